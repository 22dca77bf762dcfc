"""Coarse trajectory trees for multi-modal pedestrian trajectory prediction."""
__version__ = "0.1.0"
