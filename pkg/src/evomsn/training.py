"""AdamW, two-stage offline pretraining and the alternating online update loop."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .engine import ForecastBundle
from .errors import NoData, OrderViolation, ShapeError
from .metrics import cumulative_average, mse_mae
from .series import WindowPair

log = logging.getLogger(__name__)

VARIANTS = {
    "full": "EvoMSN",
    "no_online": "W/O online",
    "freeze_stats": "W/O stat",
    "freeze_backbone": "W/O backbone",
}


@dataclass
class AdamWState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    weight_decay: float = 1e-2
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    step: int = 0


def adamw_step(state: AdamWState, params_flat: np.ndarray, grads_flat: np.ndarray) -> np.ndarray:
    """One decoupled-weight-decay Adam update, applied in place to ``params_flat``."""
    if params_flat.shape != grads_flat.shape:
        raise ShapeError(f"parameter length {params_flat.shape} != gradient length {grads_flat.shape}")
    if state.m is None:
        state.m = np.zeros_like(params_flat)
        state.v = np.zeros_like(params_flat)
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1 - b1) * grads_flat
    state.v *= b2
    state.v += (1 - b2) * grads_flat * grads_flat
    m_hat = state.m / (1 - b1 ** state.step)
    v_hat = state.v / (1 - b2 ** state.step)
    params_flat -= state.lr * (m_hat / (np.sqrt(v_hat) + state.eps_opt) + state.weight_decay * params_flat)
    return params_flat


@dataclass
class TrainSchedule:
    epochs: int = 100
    batch_size: int = 32
    lr_stats: float = 1e-3
    lr_backbone: float = 1e-3
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    patience: int = 5
    seed: int = 0
    variant: str = "full"

    def optimizer(self, lr: float) -> AdamWState:
        return AdamWState(lr=lr, beta1=self.beta1, beta2=self.beta2, eps_opt=self.eps_opt,
                          weight_decay=self.weight_decay)


@dataclass
class History:
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False


def _fit(store, loss_grad: Callable, val_loss: Optional[Callable], n: int, lr: float,
         schedule: TrainSchedule, seed_offset: int) -> History:
    """Mini-batch AdamW over ``n`` samples with patience-based early stopping."""
    hist = History()
    if schedule.epochs <= 0:
        return hist
    rng = np.random.default_rng(schedule.seed + seed_offset)
    opt = schedule.optimizer(lr)
    best, best_flat, bad = np.inf, store.flat.copy(), 0
    for epoch in range(schedule.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, schedule.batch_size):
            idx = np.sort(order[start:start + schedule.batch_size])
            loss, grad = loss_grad(idx)
            adamw_step(opt, store.flat, grad)
            total += loss * len(idx)
        hist.train_loss.append(total / n)
        score = val_loss() if val_loss is not None else hist.train_loss[-1]
        hist.val_loss.append(score)
        if score < best:
            best, best_flat, bad, hist.best_epoch = score, store.flat.copy(), 0, epoch
        else:
            bad += 1
            if bad >= schedule.patience:
                hist.stopped_early = True
                break
    store.set_flat(best_flat)
    return hist


def _check_xy(x, y):
    if x is None or len(x) == 0:
        raise NoData("empty training set")
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) != len(y):
        raise ShapeError(f"{len(x)} inputs vs {len(y)} targets")
    return x, y


def pretrain_stats(bank, train_x, train_y, schedule: TrainSchedule, val=None):
    """Stage one: fit every scale's mean/std predictors to the true horizon slice stats."""
    x, y = _check_xy(train_x, train_y)

    def loss_grad(idx):
        return bank.stat_loss_and_grad(x[idx], y[idx])

    val_fn = None
    if val is not None:
        vx, vy = _check_xy(*val)
        val_fn = lambda: bank.stat_loss_and_grad(vx, vy)[0] / bank.k
    hist = _fit(bank.store, loss_grad, val_fn, len(x), schedule.lr_stats, schedule, seed_offset=0)
    log.info("stats pretraining: %d epochs, best val %.6g", len(hist.val_loss),
             min(hist.val_loss) if hist.val_loss else float("nan"))
    return bank, hist


def pretrain_backbone(pipeline, train_x, train_y, schedule: TrainSchedule, val=None):
    """Stage two: fit the backbone through the frozen normalization pipeline."""
    x, y = _check_xy(train_x, train_y)
    store = pipeline.backbone.store

    def loss_grad(idx):
        loss, _, grad = pipeline.loss_and_grads(x[idx], y[idx], want_stats=False, want_backbone=True)
        return loss, grad

    val_fn = None
    if val is not None:
        vx, vy = _check_xy(*val)
        val_fn = lambda: mse_mae(pipeline.predict(vx), vy)[0]
    hist = _fit(store, loss_grad, val_fn, len(x), schedule.lr_backbone, schedule, seed_offset=1)
    log.info("backbone pretraining: %d epochs, best val %.6g", len(hist.val_loss),
             min(hist.val_loss) if hist.val_loss else float("nan"))
    return pipeline.backbone, hist


class OnlineLearner:
    """Prequential forecaster: ``observe`` forecasts from x alone, ``learn`` then updates with y."""

    def __init__(self, pipeline, schedule: TrainSchedule):
        if schedule.variant not in VARIANTS:
            raise ValueError(f"unknown variant {schedule.variant!r}")
        self.pipeline = pipeline
        self.schedule = schedule
        self.stats_opt = schedule.optimizer(schedule.lr_stats)
        self.backbone_opt = schedule.optimizer(schedule.lr_backbone)
        self.n_stats_updates = 0
        self.n_backbone_updates = 0
        self.last_origin: Optional[int] = None
        self._pending: Optional[Tuple[np.ndarray, object, int]] = None

    def stage_for(self, step_index: int) -> Optional[str]:
        """Component updated at this step, or None."""
        variant = self.schedule.variant
        if variant == "no_online":
            return None
        if not self.pipeline.normalized:
            return "backbone"
        stage = "stats" if step_index % 2 == 0 else "backbone"
        if (stage == "stats" and variant == "freeze_stats") or (stage == "backbone" and variant == "freeze_backbone"):
            return None
        return stage

    def observe(self, x: np.ndarray, origin: int):
        if self.last_origin is not None and origin <= self.last_origin:
            raise OrderViolation(f"window origin {origin} does not follow {self.last_origin}")
        self.last_origin = origin
        x = np.asarray(x, dtype=np.float64)
        if self.pipeline.normalized:
            bundle = self.pipeline.forward(x)
            forecast = bundle.final
        else:
            bundle = None
            forecast = self.pipeline.predict(x)
        self._pending = (x, bundle, origin)
        return forecast, bundle

    def learn(self, y: np.ndarray, step_index: int, forecast: np.ndarray) -> Optional[str]:
        if self._pending is None:
            raise RuntimeError("learn() called without a preceding observe()")
        x, bundle, _ = self._pending
        self._pending = None
        stage = self.stage_for(step_index)
        if stage is None:
            return None
        err = forecast - y
        d_final = 2.0 * err / err.size
        if stage == "stats":
            g, _ = self.pipeline.backward(bundle, d_final, want_stats=True, want_backbone=False)
            adamw_step(self.stats_opt, self.pipeline.bank.store.flat, g)
            self.n_stats_updates += 1
        else:
            if bundle is not None:
                _, g = self.pipeline.backward(bundle, d_final, want_stats=False, want_backbone=True)
            else:
                _, _, g = self.pipeline.loss_and_grads(x, y, want_stats=False, want_backbone=True)
            adamw_step(self.backbone_opt, self.pipeline.backbone.store.flat, g)
            self.n_backbone_updates += 1
        return stage


@dataclass
class StepResult:
    forecast: np.ndarray
    bundle: Optional[ForecastBundle]
    mse: float
    mae: float
    stage: Optional[str]


def online_step(learner: OnlineLearner, incoming: WindowPair, step_index: int) -> StepResult:
    forecast, bundle = learner.observe(incoming.x, incoming.origin)
    if incoming.y is None:
        raise ValueError("online_step needs the horizon to score and update")
    y = np.asarray(incoming.y, dtype=np.float64)
    mse, mae = mse_mae(forecast, y)
    stage = learner.learn(y, step_index, forecast)
    return StepResult(forecast, bundle, mse, mae, stage)


@dataclass
class OnlineReport:
    mse: np.ndarray
    mae: np.ndarray
    cum_mse: np.ndarray
    cum_mae: np.ndarray
    stages: List[Optional[str]]
    n_stats_updates: int
    n_backbone_updates: int
    forecasts: Optional[np.ndarray] = None

    @property
    def mean_mse(self) -> float:
        return float(np.mean(self.mse))

    @property
    def mean_mae(self) -> float:
        return float(np.mean(self.mae))


def run_online(learner: OnlineLearner, stream: Iterable[WindowPair], keep_forecasts: bool = False,
               log_file=None) -> OnlineReport:
    """Forecast-then-update over a chronological stream of windows.

    ``log_file`` receives one JSON line per step with keys
    step, stage, loss, cum_mse, cum_mae.
    """
    mses, maes, stages, forecasts = [], [], [], []
    cm = ca = 0.0
    for n, pair in enumerate(stream):
        res = online_step(learner, pair, n)
        mses.append(res.mse)
        maes.append(res.mae)
        stages.append(res.stage)
        if keep_forecasts:
            forecasts.append(res.forecast)
        cm += (res.mse - cm) / (n + 1)
        ca += (res.mae - ca) / (n + 1)
        if log_file is not None:
            log_file.write(json.dumps({"step": n, "stage": res.stage, "loss": res.mse,
                                       "cum_mse": cm, "cum_mae": ca}) + "\n")
    if not mses:
        raise NoData("empty online stream")
    return OnlineReport(
        mse=np.asarray(mses), mae=np.asarray(maes),
        cum_mse=cumulative_average(mses), cum_mae=cumulative_average(maes),
        stages=stages, n_stats_updates=learner.n_stats_updates,
        n_backbone_updates=learner.n_backbone_updates,
        forecasts=np.stack(forecasts) if keep_forecasts else None,
    )


def stream_from_arrays(xs: np.ndarray, ys: np.ndarray, origins: Sequence[int]):
    for x, y, o in zip(xs, ys, origins):
        yield WindowPair(x, y, int(o))
