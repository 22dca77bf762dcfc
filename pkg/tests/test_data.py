import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trajtree.data import (DatasetConfig, SceneWindow, TrajectorySample, leave_one_out_scenes,
                           load_trajectory_file, load_windows, make_splits, normalize_window,
                           read_manifest, scene_files, window_scenes, write_manifest)
from trajtree.errors import ConfigError, DataError


def write_tracks(path, rows):
    path.write_text("".join(f"{f}\t{a}\t{x:.4f}\t{y:.4f}\n" for f, a, x, y in rows))
    return path


def line_rows(agent, frames, step=10):
    return [(f * step, agent, 0.1 * f, -0.2 * f) for f in frames]


def test_empty_file_warns(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("")
    with pytest.warns(UserWarning):
        assert load_trajectory_file(p) == []


def test_single_agent_twenty_frames(tmp_path):
    p = write_tracks(tmp_path / "a.txt", line_rows(1, range(20)))
    tracks = load_trajectory_file(p)
    assert len(tracks) == 1 and len(tracks[0].frames) == 20
    windows = window_scenes(tracks, DatasetConfig())
    assert len(windows) == 1
    s = windows[0].samples[0]
    assert s.observed.shape == (8, 2) and s.future.shape == (12, 2)
    np.testing.assert_allclose(s.future[-1], [1.9, -3.8], atol=1e-9)


def test_gap_splits_track(tmp_path):
    rows = line_rows(1, range(10)) + line_rows(1, range(15, 40))
    tracks = load_trajectory_file(write_tracks(tmp_path / "g.txt", rows))
    assert [len(t.frames) for t in tracks] == [10, 25]
    windows = window_scenes(tracks, DatasetConfig())
    assert len(windows) == 6
    assert all(w.start_frame >= 150 for w in windows)


def test_twenty_five_frames_give_six_windows(tmp_path):
    tracks = load_trajectory_file(write_tracks(tmp_path / "a.txt", line_rows(4, range(25))))
    windows = window_scenes(tracks, DatasetConfig())
    assert [w.start_frame for w in windows] == [0, 10, 20, 30, 40, 50]


def test_stride_covers_starts(tmp_path):
    tracks = load_trajectory_file(write_tracks(tmp_path / "a.txt", line_rows(4, range(30))))
    starts = [w.start_frame for w in window_scenes(tracks, DatasetConfig(stride=3))]
    assert starts == [0, 30, 60, 90]


def test_only_fully_present_agents(tmp_path):
    rows = line_rows(1, range(20)) + line_rows(2, range(5, 20)) + line_rows(3, range(20))
    windows = window_scenes(load_trajectory_file(write_tracks(tmp_path / "p.txt", rows)),
                            DatasetConfig())
    assert len(windows) == 1
    assert [s.agent_id for s in windows[0].samples] == [1, 3]


def test_malformed_lines_are_reported(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("0 1 0.0 0.0\n10 1 0.5\n20 1 x 1.0\n30 1 1.0 1.0\n")
    with pytest.raises(DataError) as exc:
        load_trajectory_file(p)
    assert "line 2" in str(exc.value) and "line 3" in str(exc.value)


def test_duplicate_agent_frame_is_rejected(tmp_path):
    p = tmp_path / "dup.txt"
    p.write_text("0 1 0.0 0.0\n0 1 0.5 0.5\n")
    with pytest.raises(DataError, match="duplicate"):
        load_trajectory_file(p)


def test_duplicate_ids_in_window():
    s = TrajectorySample(1, np.zeros((8, 2)), np.zeros((12, 2)))
    with pytest.raises(DataError):
        SceneWindow(0, (s, s))


def test_missing_file_is_data_error(tmp_path):
    with pytest.raises(DataError):
        load_trajectory_file(tmp_path / "nope.txt")


def test_leave_one_out_eth():
    train, test = leave_one_out_scenes("eth")
    assert set(train) == {"hotel", "univ", "zara1", "zara2"} and test == ("eth",)
    with pytest.raises(ConfigError):
        leave_one_out_scenes("atlantis")


def test_scene_file_layouts(tmp_path):
    (tmp_path / "eth" / "test").mkdir(parents=True)
    write_tracks(tmp_path / "eth" / "test" / "a.txt", line_rows(1, range(20)))
    write_tracks(tmp_path / "hotel.txt", line_rows(1, range(20)))
    assert scene_files(tmp_path, "eth")[0].endswith("a.txt")
    assert scene_files(tmp_path, "hotel")[0].endswith("hotel.txt")
    with pytest.raises(DataError):
        scene_files(tmp_path, "univ")


def test_leave_one_out_split(tmp_path):
    for i, s in enumerate(("eth", "hotel", "univ", "zara1", "zara2")):
        write_tracks(tmp_path / f"{s}.txt", line_rows(1, range(20 + i)))
    splits = make_splits(tmp_path, DatasetConfig(), holdout="eth")
    assert len(splits.test) == 1 and len(splits.train) == 2 + 3 + 4 + 5
    assert splits.unit == "meters"
    assert {w.scene_name for w in splits.train} == {"hotel", "univ", "zara1", "zara2"}


def test_manifest_round_trip(tmp_path):
    write_tracks(tmp_path / "a.txt", line_rows(1, range(20)))
    write_tracks(tmp_path / "b.txt", line_rows(2, range(21)))
    path = tmp_path / "split.txt"
    write_manifest(path, ["a.txt"], ["b.txt"])
    assert read_manifest(path) == {"train": ["a.txt"], "test": ["b.txt"]}
    splits = make_splits(None, DatasetConfig(), manifest=path)
    assert (len(splits.train), len(splits.test), splits.unit) == (1, 2, "pixels")
    with pytest.raises(ConfigError):
        make_splits(tmp_path, DatasetConfig())


def test_manifest_errors(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("a.txt\n")
    with pytest.raises(DataError):
        read_manifest(p)
    p.write_text("[validation]\na.txt\n")
    with pytest.raises(DataError):
        read_manifest(p)


def test_load_windows_names_scene_after_file(tmp_path):
    p = write_tracks(tmp_path / "students.txt", line_rows(1, range(20)))
    assert load_windows([p], DatasetConfig())[0].scene_name == "students"


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_normalize_then_invert_is_identity(n, seed):
    rng = np.random.default_rng(seed)
    samples = tuple(TrajectorySample(i, rng.normal(scale=50, size=(8, 2)),
                                     rng.normal(scale=50, size=(12, 2))) for i in range(n))
    window = SceneWindow(0, samples)
    norm = normalize_window(window)
    np.testing.assert_array_equal(norm.window.observed()[:, -1], 0.0)
    np.testing.assert_allclose(norm.invert(norm.window.observed()), window.observed(),
                               rtol=0, atol=1e-12)
    np.testing.assert_allclose(norm.invert(norm.window.future()), window.future(),
                               rtol=0, atol=1e-12)
