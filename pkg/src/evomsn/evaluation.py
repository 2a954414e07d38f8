"""Chronological splits, experiment orchestration and report writing."""
from __future__ import annotations

import io
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .backbone import make_backbone
from .config import RunConfig
from .engine import MSNPipeline, VanillaPipeline
from .errors import SeriesTooShort
from .metrics import cumulative_average
from .params import save_params
from .series import MultiSeries, window_arrays
from .spectral import extract_global_periods
from .stat_predictor import StatPredictorBank
from .training import OnlineLearner, TrainSchedule, VARIANTS, pretrain_backbone, pretrain_stats, run_online, stream_from_arrays

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
VARIANT_LABELS = {**VARIANTS, "vanilla": "Vanilla"}

# (first segment, second segment, third segment) fractions in chronological order
ONLINE_FRACTIONS = {"warmup": 0.20, "validation": 0.05, "online": 0.75}
OFFLINE_FRACTIONS = {"train": 0.70, "validation": 0.10, "test": 0.20}


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "online"

    @property
    def fractions(self) -> Dict[str, float]:
        return dict(ONLINE_FRACTIONS if self.mode == "online" else OFFLINE_FRACTIONS)


@dataclass(frozen=True)
class Segments:
    """Named ``[start, stop)`` row ranges, contiguous and in chronological order."""

    bounds: Dict[str, Tuple[int, int]]

    def __getitem__(self, name: str) -> Tuple[int, int]:
        return self.bounds[name]

    def sizes(self) -> Dict[str, int]:
        return {k: b - a for k, (a, b) in self.bounds.items()}


def split(series: MultiSeries, spec: SplitSpec, L: int = 1, H: int = 1) -> Segments:
    """Cut a series at floor(T * cumulative fraction).

    Online mode gives warm-up, validation, online; offline mode gives
    train, validation, test. The first segment must hold a whole window
    (L + H rows); later segments borrow their look-back from earlier rows
    and only need H rows.
    """
    T = series.length if isinstance(series, MultiSeries) else int(series)
    bounds, start, acc = {}, 0, 0.0
    names = list(spec.fractions)
    for i, name in enumerate(names):
        acc += spec.fractions[name]
        stop = T if i == len(names) - 1 else int(np.floor(T * acc + 1e-9))
        bounds[name] = (start, stop)
        start = stop
    for i, (name, (a, b)) in enumerate(bounds.items()):
        need = L + H if i == 0 else H
        if b - a < need:
            raise SeriesTooShort(f"{name} segment has {b - a} rows; need at least {need}")
    return Segments(bounds)


def segment_windows(values: np.ndarray, start: int, stop: int, L: int, H: int):
    """Windows whose horizon lies in ``[start, stop)``; the look-back may reach into earlier rows."""
    first = max(0, start - L)
    xs, ys = window_arrays(values[first:stop], L, H)
    origins = np.arange(first, first + len(xs))
    return xs, ys, origins


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray) -> "Standardizer":
        std = values.std(axis=0)
        return cls(values.mean(axis=0), np.where(std > 0, std, 1.0))

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std


def schedule_from(cfg: RunConfig) -> TrainSchedule:
    return TrainSchedule(
        epochs=cfg.epochs, batch_size=cfg.batch_size, lr_stats=cfg.lr_stats, lr_backbone=cfg.lr_backbone,
        weight_decay=cfg.weight_decay, patience=cfg.patience, seed=cfg.seed,
        variant="full" if cfg.variant == "vanilla" else cfg.variant,
    )


@dataclass
class ExperimentReport:
    label: str
    config: dict
    periods: Optional[dict]
    metrics: Dict[str, dict]
    cumulative_mse: List[float] = field(default_factory=list)
    step_mse: List[float] = field(default_factory=list)
    online: Optional[dict] = None
    pretrain: Optional[dict] = None
    seed: int = 0
    runtime_seconds: float = 0.0
    schema_version: int = REPORT_SCHEMA_VERSION

    @property
    def mse(self) -> float:
        return next(iter(self.metrics.values()))["mse"]

    @property
    def mae(self) -> float:
        return next(iter(self.metrics.values()))["mae"]

    def to_dict(self, include_runtime: bool = True) -> dict:
        d = {
            "schema_version": self.schema_version,
            "label": self.label,
            "seed": self.seed,
            "config": self.config,
            "periods": self.periods,
            "metrics": self.metrics,
            "online": self.online,
            "pretrain": self.pretrain,
            "cumulative_mse": self.cumulative_mse,
        }
        if include_runtime:
            d["runtime_seconds"] = self.runtime_seconds
        return d

    def to_json(self, include_runtime: bool = True) -> str:
        return json.dumps(self.to_dict(include_runtime), indent=2, sort_keys=True) + "\n"

    def curve_tsv(self) -> str:
        buf = io.StringIO()
        buf.write("step\tmse\tcum_mse\n")
        for i, (m, c) in enumerate(zip(self.step_mse, self.cumulative_mse)):
            buf.write(f"{i}\t{m!r}\t{c!r}\n")
        return buf.getvalue()


def run_name(cfg: RunConfig) -> str:
    return f"{cfg.mode}_{cfg.variant}_{cfg.backbone}_L{cfg.lookback}_H{cfg.horizon}_k{cfg.k}_seed{cfg.seed}"


def _select_channels(series: MultiSeries, channels: Sequence[str]) -> MultiSeries:
    if not channels:
        return series
    missing = [c for c in channels if c not in series.channel_names]
    if missing:
        raise KeyError(f"channels not in dataset: {missing}")
    idx = [series.channel_names.index(c) for c in channels]
    return MultiSeries(series.values[:, idx], list(channels), series.step_index_origin)


def run_experiment(cfg: RunConfig, series: Optional[MultiSeries] = None, write: bool = True,
                   out_dir: Optional[Path] = None) -> ExperimentReport:
    """Offline two-stage pretraining followed by online (or offline test) evaluation."""
    t0 = time.perf_counter()
    if series is None:
        from .ingest import load_csv
        series = load_csv(cfg.dataset)
    series = _select_channels(series, cfg.channels)
    L, H = cfg.lookback, cfg.horizon
    seg = split(series, SplitSpec(cfg.mode), L, H)
    train_name, eval_name = ("warmup", "online") if cfg.mode == "online" else ("train", "test")
    values = series.values
    if cfg.standardize:
        a, b = seg[train_name]
        values = Standardizer.fit(values[a:b]).transform(values)

    a, b = seg[train_name]
    tx, ty = window_arrays(values[a:b], L, H)
    vx, vy, _ = segment_windows(values, *seg["validation"], L, H)
    ex, ey, eorig = segment_windows(values, *seg[eval_name], L, H)
    schedule = schedule_from(cfg)
    backbone = make_backbone(cfg.backbone, L, H, seed=cfg.seed, kernel_size=cfg.kernel_size)

    pretrain = {}
    if cfg.variant == "vanilla":
        pipeline = VanillaPipeline(backbone)
        periods = None
    else:
        periods = extract_global_periods(tx, cfg.k)
        bank = StatPredictorBank(periods.periods, L, H, seed=cfg.seed)
        _, h1 = pretrain_stats(bank, tx, ty, schedule, val=(vx, vy))
        pretrain["stats"] = {"train_loss": h1.train_loss, "val_loss": h1.val_loss, "best_epoch": h1.best_epoch}
        pipeline = MSNPipeline(periods, bank, backbone, cfg.eps)
    _, h2 = pretrain_backbone(pipeline, tx, ty, schedule, val=(vx, vy))
    pretrain["backbone"] = {"train_loss": h2.train_loss, "val_loss": h2.val_loss, "best_epoch": h2.best_epoch}

    label = VARIANT_LABELS[cfg.variant]
    online_info = None
    if cfg.mode == "online":
        learner = OnlineLearner(pipeline, schedule)
        log_buf = io.StringIO()
        rep = run_online(learner, stream_from_arrays(ex, ey, eorig), log_file=log_buf)
        step_mse, step_mae = rep.mse, rep.mae
        cum = rep.cum_mse
        online_info = {"steps": int(len(rep.mse)), "n_stats_updates": rep.n_stats_updates,
                       "n_backbone_updates": rep.n_backbone_updates,
                       "final_cum_mse": float(rep.cum_mse[-1]), "final_cum_mae": float(rep.cum_mae[-1])}
    else:
        preds = pipeline.predict(ex)
        err = preds - ey
        step_mse = np.mean(err * err, axis=(1, 2))
        step_mae = np.mean(np.abs(err), axis=(1, 2))
        cum = cumulative_average(step_mse)
        log_buf = None

    report = ExperimentReport(
        label=label,
        config=cfg.to_dict(),
        periods=periods.to_dict() if periods is not None else None,
        metrics={str(H): {"mse": float(np.mean(step_mse)), "mae": float(np.mean(step_mae))}},
        cumulative_mse=[float(c) for c in cum],
        step_mse=[float(m) for m in step_mse],
        online=online_info,
        pretrain=pretrain,
        seed=cfg.seed,
        runtime_seconds=time.perf_counter() - t0,
    )
    if write:
        target = Path(out_dir) if out_dir is not None else Path(cfg.output_dir) / run_name(cfg)
        write_report(report, target, pipeline, log_buf.getvalue() if log_buf else None)
    return report


def write_report(report: ExperimentReport, target: Path, pipeline=None, train_log: Optional[str] = None) -> Path:
    target.mkdir(parents=True, exist_ok=True)
    (target / "report.json").write_text(report.to_json())
    with open(target / "cumulative.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.curve_tsv())
    if train_log is not None:
        with open(target / "online_log.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(train_log)
    if pipeline is not None:
        save_params(pipeline.backbone.store, target / "backbone", meta=pipeline.backbone.config())
        if pipeline.bank is not None:
            save_params(pipeline.bank.store, target / "stat_bank",
                        meta={"periods": [s.period for s in pipeline.bank.scales],
                              "L": pipeline.bank.L, "H": pipeline.bank.H})
    return target


def sweep(cfg: RunConfig, ks: Sequence[int] = (), horizons: Sequence[int] = (), series=None,
          write: bool = True) -> List[ExperimentReport]:
    """One report per (horizon, k) pair of the grid."""
    reports = []
    for h in horizons or [cfg.horizon]:
        for k in ks or [cfg.k]:
            reports.append(run_experiment(cfg.replace(k=int(k), horizon=int(h)), series=series, write=write))
    return reports


def stats_dynamics(series: MultiSeries, window_len: int) -> np.ndarray:
    """Non-overlapping window means and stds, shape ``(T // w, 2, C)``."""
    T = series.length
    n = T // window_len
    if n < 1:
        raise SeriesTooShort(f"window length {window_len} exceeds series length {T}")
    blocks = series.values[: n * window_len].reshape(n, window_len, series.n_channels)
    return np.stack([blocks.mean(axis=1), blocks.std(axis=1)], axis=1)


def stats_dynamics_dump(series: MultiSeries, window_lengths: Sequence[int],
                        out_dir: Optional[Path] = None) -> Dict[int, str]:
    """Plot-ready TSV per window length: window index, start, then mean/std/lower/upper per channel."""
    tables = {}
    for w in window_lengths:
        st = stats_dynamics(series, int(w))
        header = ["window", "start"]
        for name in series.channel_names:
            header += [f"{name}_mean", f"{name}_std", f"{name}_lower", f"{name}_upper"]
        lines = ["\t".join(header)]
        for i, row in enumerate(st):
            cells = [str(i), str(series.step_index_origin + i * w)]
            for c in range(series.n_channels):
                m, s = row[0, c], row[1, c]
                cells += [repr(float(m)), repr(float(s)), repr(float(m - s)), repr(float(m + s))]
            lines.append("\t".join(cells))
        tables[int(w)] = "\n".join(lines) + "\n"
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            with open(Path(out_dir) / f"stats_w{w}.tsv", "w", encoding="utf-8", newline="\n") as fh:
                fh.write(tables[int(w)])
    return tables
