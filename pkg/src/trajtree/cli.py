"""Command-line entry point: ``trajtree {eval-raw,train,eval,predict,ablate}``.

Configuration precedence is flags > ``--config`` file (``key = value`` lines)
> built-in defaults. Each run writes into ``<out>/<run-id>/`` and echoes its
effective configuration there as ``config.txt``. Outputs are staged in a
temporary directory and only moved into place once the command succeeds.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
import argparse
import csv
import io
import json
import logging
import math
import os
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from . import eval as ev
from .data import ETH_UCY_SCENES, DatasetConfig, load_windows, make_splits, scene_files
from .errors import ConfigError, DataError, TrajTreeError
from .model import predict_batch, prepare_batch
from .synthetic import synthetic_windows
from .train import TrainConfig, fit, load_checkpoint, save_checkpoint
from .tree import TreeConfig, parse_key_values, scene_angles

log = logging.getLogger("trajtree")

DATA_ENV = "TRAJTREE_DATA_DIR"

DEFAULTS = {
    "scene": "eth",
    "data_dir": None,
    "manifest": None,
    "synthetic": 0,
    "depth": 3,
    "width": 3,
    "interval": None,
    "angles": None,
    "horizon": 12,
    "t_obs": 8,
    "k": 20,
    "seed": 0,
    "epochs": 200,
    "lr": 1e-3,
    "lambda1": 1.0,
    "lambda2": 1.0,
    "lambda3": 1.0,
    "batch_size": 64,
    "out": "runs",
    "run_id": None,
    "jobs": 1,
    "checkpoint": None,
    "sweep": "depth",
    "values": None,
    "criterion": "fde",
}
INT_KEYS = {"synthetic", "depth", "width", "interval", "horizon", "t_obs", "k", "seed",
            "epochs", "batch_size", "jobs"}
FLOAT_KEYS = {"lr", "lambda1", "lambda2", "lambda3"}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--out", help="output root directory (default: runs)")
    common.add_argument("--run-id", help="output sub-directory name (default: timestamp-seed)")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker processes for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--scene", help="held-out ETH-UCY scene, 'all', or 'sdd'")
    data.add_argument("--data-dir", help=f"dataset root (default: ${DATA_ENV})")
    data.add_argument("--manifest", help="train/test split manifest (SDD)")
    data.add_argument("--synthetic", type=int, metavar="N",
                      help="use N synthetic windows instead of files")
    data.add_argument("--t-obs", type=int)
    data.add_argument("--horizon", type=int)

    tree = argparse.ArgumentParser(add_help=False)
    tree.add_argument("--depth", type=int)
    tree.add_argument("--width", type=int)
    tree.add_argument("--interval", type=int)
    tree.add_argument("--angles", help="comma-separated radians, one per level")

    trainp = argparse.ArgumentParser(add_help=False)
    trainp.add_argument("--epochs", type=int)
    trainp.add_argument("--lr", type=float)
    trainp.add_argument("--lambda1", type=float)
    trainp.add_argument("--lambda2", type=float)
    trainp.add_argument("--lambda3", type=float)
    trainp.add_argument("--batch-size", type=int)

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--checkpoint", help="model checkpoint from 'train'")
    model.add_argument("--k", type=int, help="hypotheses per agent (default 20)")

    parser = argparse.ArgumentParser(prog="trajtree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("eval-raw", parents=[common, data, tree],
                   help="best-of-all-paths metrics of the untrained tree")
    sub.add_parser("train", parents=[common, data, tree, trainp],
                   help="train the scoring/refinement model")
    ev_p = sub.add_parser("eval", parents=[common, data, tree, model],
                          help="best-of-K metrics and selection accuracy")
    ev_p.add_argument("--criterion", choices=("fde", "ade"))
    sub.add_parser("predict", parents=[common, data, tree, model],
                   help="write top-K trajectories as JSON lines")
    ab = sub.add_parser("ablate", parents=[common, data, tree, model],
                        help="sweep depth, width, horizon or K")
    ab.add_argument("--sweep", choices=("depth", "width", "horizon", "k"))
    ab.add_argument("--values", help="comma-separated sweep values")
    return parser


def resolve_config(args):
    cfg = dict(DEFAULTS)
    cfg["data_dir"] = os.environ.get(DATA_ENV)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = parse_key_values(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        for key, value in file_cfg.items():
            if key not in DEFAULTS:
                raise ConfigError(f"{args.config}: unknown key {key!r}")
            cfg[key] = _coerce(key, value)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg["command"] = args.command
    return cfg


def _coerce(key, value):
    try:
        if key in INT_KEYS:
            return int(value)
        if key in FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def parse_floats(text, what):
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"bad {what} list: {text!r}") from None


def tree_config_for(cfg, scene=None, depth=None, width=None, horizon=None):
    depth = cfg["depth"] if depth is None else depth
    width = cfg["width"] if width is None else width
    horizon = cfg["horizon"] if horizon is None else horizon
    scene = scene or cfg["scene"]
    if depth < 0:
        raise ConfigError(f"depth must be >= 0, got {depth}")
    if cfg["interval"] is not None:
        interval = cfg["interval"]
    else:
        interval = 1 if depth == 0 else math.ceil(horizon / depth)
    if cfg["angles"] is not None:
        angles = parse_floats(cfg["angles"], "angles")
        if len(angles) < depth:
            raise ConfigError(f"--angles gives {len(angles)} values for depth {depth}")
        angles = angles[:depth]
    else:
        preset = scene if scene in ("sdd",) + ETH_UCY_SCENES else "eth"
        angles = scene_angles(preset, depth)
    return TreeConfig(interval=interval, depth=depth, width=width, angles=angles,
                      horizon=horizon)


def validate(cfg):
    cmd = cfg["command"]
    if cfg["synthetic"] < 0:
        raise ConfigError("--synthetic must be >= 0")
    if cfg["jobs"] < 1:
        raise ConfigError("--jobs must be >= 1")
    if not cfg["synthetic"]:
        scene = str(cfg["scene"]).lower()
        cfg["scene"] = scene
        if scene == "sdd":
            if not cfg["manifest"]:
                raise ConfigError("--scene sdd needs --manifest")
        elif scene != "all" and scene not in ETH_UCY_SCENES:
            raise ConfigError(f"unknown scene {scene!r}; expected one of "
                              f"{ETH_UCY_SCENES + ('all', 'sdd')}")
        elif not cfg["data_dir"]:
            raise ConfigError(f"no dataset directory: pass --data-dir or set ${DATA_ENV}")
        if scene == "all" and cmd not in ("eval-raw", "ablate"):
            raise ConfigError("--scene all is only supported by eval-raw and ablate")
    DatasetConfig(cfg["t_obs"], cfg["horizon"])
    if cmd in ("eval", "predict") or (cmd == "ablate" and cfg["sweep"] == "k"):
        if not cfg["checkpoint"]:
            raise ConfigError(f"{cmd} needs --checkpoint")
        if not os.path.isfile(cfg["checkpoint"]):
            raise ConfigError(f"checkpoint not found: {cfg['checkpoint']}")
    if cmd == "train":
        TrainConfig(cfg["lambda1"], cfg["lambda2"], cfg["lambda3"], cfg["lr"],
                    cfg["epochs"], cfg["seed"], batch_size=cfg["batch_size"])
    if cmd == "ablate":
        if not cfg["values"]:
            raise ConfigError("ablate needs --values")
        cfg["values"] = tuple(int(v) for v in parse_floats(cfg["values"], "values"))
        if cfg["sweep"] == "k":
            m = tree_config_for(cfg).path_count
            if not all(1 <= k <= m for k in cfg["values"]):
                raise ConfigError(f"K values must be in [1, {m}]")
        else:
            for v in cfg["values"]:
                _setting_tree(cfg, v)
    else:
        tree = tree_config_for(cfg)
        if cmd in ("train", "eval", "predict") and tree.depth < 1:
            raise ConfigError("the learnable model needs --depth >= 1")
        if cmd in ("eval", "predict") and not 1 <= cfg["k"] <= tree.path_count:
            raise ConfigError(f"--k must be in [1, {tree.path_count}], got {cfg['k']}")


def _setting_tree(cfg, value):
    sweep = cfg["sweep"]
    if sweep == "depth":
        return tree_config_for(cfg, depth=value)
    if sweep == "width":
        return tree_config_for(cfg, width=value)
    return tree_config_for(cfg, horizon=value)


# ---------------------------------------------------------------- data access

def _dataset_config(cfg, horizon=None):
    return DatasetConfig(cfg["t_obs"], cfg["horizon"] if horizon is None else horizon)


def synthetic_split(cfg, horizon=None):
    tree = tree_config_for(cfg, scene="eth", depth=max(cfg["depth"], 1),
                           horizon=horizon)
    n = cfg["synthetic"]
    train, _ = synthetic_windows(n, tree, t_obs=cfg["t_obs"], seed=cfg["seed"])
    test, _ = synthetic_windows(max(n // 4, 1), tree, t_obs=cfg["t_obs"],
                                seed=cfg["seed"] + 1)
    return train, test


def test_windows(cfg, scene, horizon=None):
    if cfg["synthetic"]:
        return synthetic_split(cfg, horizon)[1]
    dcfg = _dataset_config(cfg, horizon)
    if scene == "sdd":
        return make_splits(None, dcfg, manifest=cfg["manifest"]).test
    return load_windows(scene_files(cfg["data_dir"], scene), dcfg, scene, "meters")


def train_windows(cfg):
    if cfg["synthetic"]:
        return synthetic_split(cfg)[0]
    dcfg = _dataset_config(cfg)
    if cfg["scene"] == "sdd":
        return make_splits(None, dcfg, manifest=cfg["manifest"]).train
    return make_splits(cfg["data_dir"], dcfg, holdout=cfg["scene"]).train


def _scenes(cfg):
    if cfg["synthetic"]:
        return ["synthetic"]
    return list(ETH_UCY_SCENES) if cfg["scene"] == "all" else [cfg["scene"]]


# ------------------------------------------------------------------- commands

def cmd_eval_raw(cfg, out):
    reports = []
    for scene in _scenes(cfg):
        tree = tree_config_for(cfg, scene=scene)
        reports.append(ev.raw_tree_eval(test_windows(cfg, scene), tree, scene))
        log.info("%s: ADE %.4f FDE %.4f over %d agents, %d hypotheses", scene,
                 reports[-1].ade, reports[-1].fde, reports[-1].n_agents, reports[-1].k)
    if len(reports) > 1:
        reports.append(_average(reports))
    out["metrics.csv"] = ev.reports_csv(reports)
    out["metrics.json"] = ev.reports_json(reports)
    return reports


def _average(reports):
    r0 = reports[0]
    return ev.MetricsReport(float(np.mean([r.ade for r in reports])),
                            float(np.mean([r.fde for r in reports])), r0.k,
                            sum(r.n_agents for r in reports), r0.unit, "avg",
                            r0.depth, r0.width, r0.horizon)


def cmd_train(cfg, out):
    tree = tree_config_for(cfg)
    tcfg = TrainConfig(cfg["lambda1"], cfg["lambda2"], cfg["lambda3"], cfg["lr"],
                       cfg["epochs"], cfg["seed"], batch_size=cfg["batch_size"])
    windows = [w.arrays() for w in train_windows(cfg)]
    if not windows:
        raise DataError("no training windows")
    params, records = fit(windows, tree, tcfg)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = ["epoch", "loss", "coarse", "clf", "ref", "top1"]
    writer.writerow(cols)
    for rec in records:
        writer.writerow([rec["epoch"]] + [repr(rec[c]) for c in cols[1:]])
    out["loss_log.csv"] = buf.getvalue()
    out["tree.txt"] = tree.to_text()
    out.files["checkpoint.txt"] = partial(save_checkpoint, params)
    return records


def _load_model(cfg, tree):
    params = load_checkpoint(cfg["checkpoint"])
    from .model import check_model_tree
    check_model_tree(params, tree)
    return params


def cmd_eval(cfg, out):
    tree = tree_config_for(cfg)
    params = _load_model(cfg, tree)
    scene = _scenes(cfg)[0]
    windows = test_windows(cfg, scene)
    report = ev.model_eval(windows, params, tree, cfg["k"], scene)
    out["metrics.csv"] = ev.reports_csv([report])
    out["metrics.json"] = ev.reports_json([report])
    scorer = ev.model_scorer(params)
    rows = ["K,criterion,accuracy"]
    for k in sorted({1, 5, 10, 15, 20, cfg["k"]}):
        if k <= tree.path_count:
            acc = ev.topk_selection_accuracy(windows, scorer, tree, k, cfg["criterion"])
            rows.append(f"{k},{cfg['criterion']},{acc!r}")
    out["selection_accuracy.csv"] = "\n".join(rows) + "\n"
    return report


def cmd_predict(cfg, out):
    tree = tree_config_for(cfg)
    params = _load_model(cfg, tree)
    scene = _scenes(cfg)[0]
    lines = []
    for w in test_windows(cfg, scene):
        batch = prepare_batch(w.observed(), tree)
        trajs, conf, order = predict_batch(batch, params, cfg["k"])
        for i, s in enumerate(w.samples):
            lines.append(json.dumps({
                "scene": w.scene_name, "start_frame": w.start_frame, "agent_id": s.agent_id,
                "unit": w.unit, "paths": order[i].tolist(),
                "confidences": conf[i].tolist(), "trajectories": trajs[i].tolist(),
            }, sort_keys=True))
    out["predictions.jsonl"] = "\n".join(lines) + ("\n" if lines else "")
    return len(lines)


def _raw_setting(cfg, scene, value):
    tree = _setting_tree(cfg, value)
    windows = test_windows(cfg, scene, horizon=tree.horizon)
    return ev.raw_tree_eval(windows, tree, scene)


def cmd_ablate(cfg, out):
    sweep = cfg["sweep"]
    reports = []
    if sweep == "k":
        tree = tree_config_for(cfg)
        params = _load_model(cfg, tree)
        for scene in _scenes(cfg):
            windows = test_windows(cfg, scene)
            reports.extend(ev.ablate(
                cfg["values"], lambda k: ev.model_eval(windows, params, tree, k, scene)))
    else:
        settings = [(scene, v) for scene in _scenes(cfg) for v in cfg["values"]]
        runner = partial(_raw_setting_pair, cfg)
        if cfg["jobs"] > 1:
            with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
                reports = list(pool.map(runner, settings))
        else:
            reports = ev.ablate(settings, runner)
    out[f"ablate_{sweep}.csv"] = ev.reports_csv(reports)
    out[f"ablate_{sweep}.json"] = ev.reports_json(reports)
    return reports


def _raw_setting_pair(cfg, setting):
    return _raw_setting(cfg, *setting)


COMMANDS = {"eval-raw": cmd_eval_raw, "train": cmd_train, "eval": cmd_eval,
            "predict": cmd_predict, "ablate": cmd_ablate}


class Outputs(dict):
    """Text outputs keyed by file name, plus writer callables in ``files``."""

    def __init__(self):
        super().__init__()
        self.files = {}

    def commit(self, directory):
        tmp = directory + ".partial"
        if os.path.exists(directory):
            raise ConfigError(f"output directory already exists: {directory}")
        shutil.rmtree(tmp, ignore_errors=True)
        os.makedirs(tmp)
        try:
            for name, text in self.items():
                with open(os.path.join(tmp, name), "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
            for name, writer in self.files.items():
                writer(os.path.join(tmp, name))
            os.replace(tmp, directory)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise


def effective_config_text(cfg):
    lines = [f"{k} = {'' if cfg[k] is None else _fmt(cfg[k])}"
             for k in sorted(cfg) if k not in ("run_id", "out")]
    return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, (tuple, list)):
        return ",".join(str(x) for x in v)
    return str(v)


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = resolve_config(args)
    validate(cfg)
    run_id = cfg["run_id"] or f"{time.strftime('%Y%m%d-%H%M%S')}-s{cfg['seed']}"
    directory = os.path.join(cfg["out"], run_id)
    if os.path.exists(directory):
        raise ConfigError(f"output directory already exists: {directory}")
    out = Outputs()
    COMMANDS[cfg["command"]](cfg, out)
    out["config.txt"] = effective_config_text(cfg)
    os.makedirs(cfg["out"], exist_ok=True)
    out.commit(directory)
    log.info("wrote %s", directory)
    return directory


def main(argv=None):
    try:
        run(argv)
    except TrajTreeError as exc:
        print(f"trajtree: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FloatingPointError as exc:
        print(f"trajtree: numerical failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
