import json
from pathlib import Path

import numpy as np
import pytest

from evomsn import evaluation
from evomsn.config import RunConfig
from evomsn.errors import NoData, SeriesTooShort, ShapeError
from evomsn.evaluation import (
    SplitSpec,
    run_experiment,
    segment_windows,
    split,
    stats_dynamics_dump,
    sweep,
)
from evomsn.metrics import cumulative_average, mse_mae
from evomsn.params import load_params
from evomsn.series import MultiSeries
from evomsn.synthetic import regime_stream

GOLDEN = Path(__file__).parent / "golden" / "report_schema.json"


def small_cfg(**kw):
    base = dict(lookback=24, horizon=12, k=2, backbone="linear", epochs=2, seed=0)
    return RunConfig(**{**base, **kw})


@pytest.fixture(scope="module")
def stream():
    return regime_stream(T=1400, seed=0)


def test_split_sizes():
    s = MultiSeries(np.zeros((1000, 1)))
    assert split(s, SplitSpec("online"), 96, 24).sizes() == {"warmup": 200, "validation": 50, "online": 750}
    assert split(s, SplitSpec("offline"), 24, 12).sizes() == {"train": 700, "validation": 100, "test": 200}
    seg = split(s, SplitSpec("online"), 24, 12)
    assert seg["warmup"] == (0, 200) and seg["validation"] == (200, 250) and seg["online"] == (250, 1000)


@pytest.mark.parametrize("T", [997, 1003, 4321, 17420])
def test_split_floor_boundaries_contiguous(T):
    seg = split(MultiSeries(np.zeros((T, 1))), SplitSpec("online"), 1, 1)
    assert seg["warmup"] == (0, int(T * 0.2))
    assert seg["validation"][1] == int(np.floor(T * 0.25 + 1e-9))
    assert seg["online"][1] == T


def test_split_too_short():
    with pytest.raises(SeriesTooShort):
        split(MultiSeries(np.zeros((10, 1))), SplitSpec("online"), 96, 24)
    # warm-up holds a window but the 5% validation slice (20 rows) is shorter than H
    with pytest.raises(SeriesTooShort):
        split(MultiSeries(np.zeros((400, 1))), SplitSpec("online"), 48, 24)


def test_segment_windows_reach_back():
    v = np.arange(100.0)[:, None]
    xs, ys, orig = segment_windows(v, 50, 100, 10, 5)
    assert ys[0, 0, 0] == 50 and xs[0, 0, 0] == 40 and orig[0] == 40
    assert ys[-1, -1, 0] == 99
    assert np.all(ys >= 50)


def test_mse_mae_examples():
    a = np.random.default_rng(0).normal(size=(12, 3))
    assert mse_mae(a, a) == (0.0, 0.0)
    assert mse_mae(np.array([[1.0], [2.0]]), np.array([[1.0], [4.0]])) == (2.0, 1.0)
    b = np.random.default_rng(1).normal(size=(12, 3))
    sq = ab = 0.0
    for u, w in zip(a.ravel(), b.ravel()):
        sq += (u - w) ** 2
        ab += abs(u - w)
    m, e = mse_mae(a, b)
    assert abs(m - sq / a.size) <= 1e-12 and abs(e - ab / a.size) <= 1e-12
    assert mse_mae(a, b) == mse_mae(b, a)
    with pytest.raises(ShapeError):
        mse_mae(a, b[:, :2])


def test_cumulative_average_examples():
    np.testing.assert_array_equal(cumulative_average([4.0]), [4.0])
    np.testing.assert_array_equal(cumulative_average([2.0, 4.0]), [2.0, 3.0])
    np.testing.assert_array_equal(cumulative_average([0.37] * 50), [0.37] * 50)
    with pytest.raises(NoData):
        cumulative_average([])
    x = np.random.default_rng(3).exponential(size=500)
    c = cumulative_average(x)
    assert np.all(c >= x.min()) and np.all(c <= x.max())
    np.testing.assert_allclose(c, np.cumsum(x) / np.arange(1, 501), rtol=1e-12)


def test_no_online_variant(stream):
    rep = run_experiment(small_cfg(variant="no_online"), series=stream, write=False)
    assert rep.label == "W/O online"
    assert rep.online["n_stats_updates"] == 0 and rep.online["n_backbone_updates"] == 0


@pytest.mark.parametrize("variant,label", [("full", "EvoMSN"), ("freeze_stats", "W/O stat"),
                                           ("freeze_backbone", "W/O backbone"), ("vanilla", "Vanilla")])
def test_variant_labels(stream, variant, label):
    rep = run_experiment(small_cfg(variant=variant, epochs=1), series=stream, write=False)
    assert rep.label == label
    assert len(rep.cumulative_mse) == rep.online["steps"] == len(rep.step_mse)
    assert rep.mse >= 0 and rep.mae >= 0


def test_online_steps_cover_online_segment(stream):
    rep = run_experiment(small_cfg(epochs=1), series=stream, write=False)
    a, b = split(stream, SplitSpec("online"), 24, 12)["online"]
    assert rep.online["steps"] == (b - a) - 12 + 1
    assert rep.online["n_stats_updates"] + rep.online["n_backbone_updates"] == rep.online["steps"]


def test_offline_mode(stream):
    rep = run_experiment(small_cfg(mode="offline", epochs=1), series=stream, write=False)
    a, b = split(stream, SplitSpec("offline"), 24, 12)["test"]
    assert rep.online is None and len(rep.step_mse) == (b - a) - 12 + 1


def test_k_sweep_gives_one_report_each(stream):
    reps = sweep(small_cfg(epochs=1), ks=[1, 2, 3, 4], series=stream, write=False)
    assert [r.config["k"] for r in reps] == [1, 2, 3, 4]
    assert [len(r.periods["periods"]) for r in reps] == [1, 2, 3, 4]


def test_byte_identical_reports(stream, tmp_path):
    cfg = small_cfg()
    run_experiment(cfg, series=stream, out_dir=tmp_path / "a")
    run_experiment(cfg, series=stream, out_dir=tmp_path / "b")
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    assert ra.pop("runtime_seconds") >= 0 and rb.pop("runtime_seconds") >= 0
    assert json.dumps(ra, sort_keys=True) == json.dumps(rb, sort_keys=True)
    for name in ("cumulative.tsv", "online_log.jsonl", "backbone.bin", "stat_bank.bin", "stat_bank.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def _schema(obj):
    if isinstance(obj, dict):
        return {k: _schema(v) for k, v in sorted(obj.items())}
    if isinstance(obj, list):
        return [_schema(obj[0])] if obj else []
    return type(obj).__name__


def test_report_schema_golden(stream, tmp_path):
    run_experiment(small_cfg(epochs=1), series=stream, out_dir=tmp_path)
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["schema_version"] == 1
    # per-epoch histories are lists of floats; a golden file pins the rest of the shape
    assert _schema(rep) == json.loads(GOLDEN.read_text())
    head = (tmp_path / "cumulative.tsv").read_text().splitlines()[0]
    assert head == "step\tmse\tcum_mse"


def test_saved_parameters_reload(stream, tmp_path):
    run_experiment(small_cfg(epochs=1), series=stream, out_dir=tmp_path)
    store, meta = load_params(tmp_path / "backbone")
    assert meta["kind"] == "linear" and store["weight"].shape == (12, 24)
    bank, meta = load_params(tmp_path / "stat_bank")
    assert meta["L"] == 24 and len(meta["periods"]) == 2


def test_pretraining_never_sees_online_rows(monkeypatch):
    # online rows carry a huge offset; nothing handed to pretraining may contain them
    T = 1400
    base = regime_stream(T=T, seed=1).values
    seg = split(MultiSeries(base), SplitSpec("online"), 24, 12)
    a, _ = seg["online"]
    vals = base.copy()
    vals[a:] += 1e6
    seen = []

    def tracker(fn):
        def wrapped(model, x, y, schedule, val=None):
            seen.extend([np.asarray(x), np.asarray(y)] + ([np.asarray(v) for v in val] if val else []))
            return fn(model, x, y, schedule, val=val)
        return wrapped

    monkeypatch.setattr(evaluation, "pretrain_stats", tracker(evaluation.pretrain_stats))
    monkeypatch.setattr(evaluation, "pretrain_backbone", tracker(evaluation.pretrain_backbone))
    periods_input = []
    orig = evaluation.extract_global_periods
    monkeypatch.setattr(evaluation, "extract_global_periods", lambda w, k: periods_input.append(w) or orig(w, k))
    run_experiment(small_cfg(epochs=1, standardize=False), series=MultiSeries(vals), write=False)
    assert len(seen) == 8 and periods_input
    assert all(np.abs(arr).max() < 1e5 for arr in seen + periods_input)


def test_stats_dump_examples(tmp_path):
    const = MultiSeries(np.full((200, 2), 3.0), ["a", "b"])
    tables = stats_dynamics_dump(const, [96, 48, 24], out_dir=tmp_path)
    assert [t.count("\n") - 1 for t in tables.values()] == [200 // 96, 200 // 48, 200 // 24]
    lines = (tmp_path / "stats_w24.tsv").read_text().splitlines()
    head = lines[0].split("\t")
    assert head == ["window", "start", "a_mean", "a_std", "a_lower", "a_upper",
                    "b_mean", "b_std", "b_lower", "b_upper"]
    for row in lines[1:]:
        cells = dict(zip(head, row.split("\t")))
        assert float(cells["a_mean"]) == 3.0 and float(cells["a_std"]) == 0.0


def test_stats_dump_ramp():
    ramp = MultiSeries(np.arange(20.0)[:, None] * 0.5, ["r"])
    t = stats_dynamics_dump(ramp, [2])[2].splitlines()[1:]
    means = [float(r.split("\t")[2]) for r in t]
    # window j covers t = 2j, 2j+1: mean 0.5 * (2j + 0.5) so the slope per window is 2 * 0.5
    np.testing.assert_allclose(means, [0.5 * (2 * j + 0.5) for j in range(10)])
    np.testing.assert_allclose(np.diff(means), 1.0)
    with pytest.raises(SeriesTooShort):
        stats_dynamics_dump(ramp, [21])
