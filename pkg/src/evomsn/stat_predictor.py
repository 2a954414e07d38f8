"""Per-scale two-layer perceptrons that forecast future slice means and stds.

Each scale owns a mean model and a std model. Both are shared across
channels: the per-channel feature vector is the input slice statistics
followed by one window-level summary (window mean for the mean model,
window std for the std model).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ShapeError
from .params import ParamStore
from .series import compute_slice_stats, n_slices, pad_and_slice

MLP_TENSORS = ("w1", "b1", "w2", "b2")
STD_BIAS_INIT = 1.0


@dataclass(frozen=True)
class MlpParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def in_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[0]


@dataclass(frozen=True)
class ScaleSpec:
    period: int
    in_len: int
    out_len: int
    hidden: int


def default_hidden(in_len: int) -> int:
    return max(32, 2 * (in_len + 1))


def mlp_forward(p: MlpParams, v: np.ndarray, relu_out: bool):
    """Forward pass on features ``(..., in)``; returns output and backward cache."""
    z1 = v @ p.w1.T + p.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ p.w2.T + p.b2
    out = np.maximum(z2, 0.0) if relu_out else z2
    return out, (v, z1, a1, z2, relu_out)


def mlp_backward(p: MlpParams, cache, dout: np.ndarray) -> Dict[str, np.ndarray]:
    v, z1, a1, z2, relu_out = cache
    dz2 = dout * (z2 > 0) if relu_out else dout
    dz2 = dz2.reshape(-1, dz2.shape[-1])
    a1 = a1.reshape(-1, a1.shape[-1])
    v = v.reshape(-1, v.shape[-1])
    da1 = dz2 @ p.w2
    dz1 = da1 * (z1.reshape(da1.shape) > 0)
    return {
        "w1": dz1.T @ v,
        "b1": dz1.sum(axis=0),
        "w2": dz2.T @ a1,
        "b2": dz2.sum(axis=0),
    }


def _features(stats: np.ndarray, summary: np.ndarray) -> np.ndarray:
    # stats (..., J, C), summary (..., C) -> (..., C, J + 1)
    return np.concatenate([np.swapaxes(stats, -1, -2), summary[..., None]], axis=-1)


class StatPredictorBank:
    """Mean and std predictors for every scale, stored in one flat vector."""

    def __init__(self, periods: Sequence[int], L: int, H: int, seed: int = 0,
                 hidden: Optional[int] = None, init: bool = True):
        self.L, self.H = int(L), int(H)
        self.scales: List[ScaleSpec] = []
        layout = []
        for i, p in enumerate(periods):
            j_in, j_out = n_slices(L, p), n_slices(H, p)
            h = hidden or default_hidden(j_in)
            self.scales.append(ScaleSpec(int(p), j_in, j_out, h))
            for kind in ("mean", "std"):
                layout += [
                    (f"s{i}.{kind}.w1", (h, j_in + 1)),
                    (f"s{i}.{kind}.b1", (h,)),
                    (f"s{i}.{kind}.w2", (j_out, h)),
                    (f"s{i}.{kind}.b2", (j_out,)),
                ]
        self.store = ParamStore(layout)
        if init:
            self.reset(seed)

    @property
    def k(self) -> int:
        return len(self.scales)

    def reset(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        for name, shape in self.store.layout:
            prefix, tensor = name.rsplit(".", 1)
            fan_in = self.store[f"{prefix}.w{tensor[-1]}"].shape[1]
            bound = 1.0 / np.sqrt(fan_in)
            self.store[name][...] = rng.uniform(-bound, bound, size=shape)
        # a negative start would leave the relu std head dead with zero gradient;
        # unit slice std is the natural prior on standardized data
        for i in range(self.k):
            self.store[f"s{i}.std.b2"][...] = STD_BIAS_INIT

    def model(self, scale_index: int, kind: str) -> MlpParams:
        pre = f"s{scale_index}.{kind}."
        return MlpParams(*(self.store[pre + t] for t in MLP_TENSORS))

    def copy(self) -> "StatPredictorBank":
        other = StatPredictorBank([s.period for s in self.scales], self.L, self.H,
                                  hidden=None, init=False)
        other.scales = list(self.scales)
        other.store = self.store.copy()
        return other

    # -- forward -------------------------------------------------------
    def _check(self, scale_index: int, stats: np.ndarray, window: np.ndarray) -> ScaleSpec:
        spec = self.scales[scale_index]
        if stats.shape[-2] != spec.in_len:
            raise ShapeError(f"scale {scale_index}: expected {spec.in_len} input slices, got {stats.shape[-2]}")
        if window.shape[-2] != self.L or window.shape[-1] != stats.shape[-1]:
            raise ShapeError(f"window shape {window.shape} inconsistent with L={self.L} and stats {stats.shape}")
        return spec

    def predict_means(self, scale_index: int, input_means: np.ndarray, window: np.ndarray, return_cache: bool = False):
        self._check(scale_index, input_means, window)
        v = _features(input_means, window.mean(axis=-2))
        out, cache = mlp_forward(self.model(scale_index, "mean"), v, relu_out=False)
        out = np.swapaxes(out, -1, -2)
        return (out, cache) if return_cache else out

    def predict_stds(self, scale_index: int, input_stds: np.ndarray, window: np.ndarray, return_cache: bool = False):
        self._check(scale_index, input_stds, window)
        v = _features(input_stds, window.std(axis=-2))
        out, cache = mlp_forward(self.model(scale_index, "std"), v, relu_out=True)
        out = np.swapaxes(out, -1, -2)
        return (out, cache) if return_cache else out

    # -- backward ------------------------------------------------------
    def backward_into(self, grad_views: Dict[str, np.ndarray], scale_index: int,
                      mean_cache, std_cache, d_means: np.ndarray, d_stds: np.ndarray) -> None:
        """Accumulate gradients given upstream grads shaped like the predictions ``(..., J_out, C)``."""
        for kind, cache, d in (("mean", mean_cache, d_means), ("std", std_cache, d_stds)):
            grads = mlp_backward(self.model(scale_index, kind), cache, np.swapaxes(d, -1, -2))
            for t in MLP_TENSORS:
                grad_views[f"s{scale_index}.{kind}.{t}"] += grads[t]

    def slice_targets(self, scale_index: int, x: np.ndarray, y: np.ndarray):
        """Input slice stats of ``x`` and true horizon slice stats of ``y`` for one scale."""
        p = self.scales[scale_index].period
        sx = compute_slice_stats(pad_and_slice(x, p, scale_index))
        sy = compute_slice_stats(pad_and_slice(y, p, scale_index))
        return sx, sy

    def stat_loss_and_grad(self, x: np.ndarray, y: np.ndarray, scales: Optional[Sequence[int]] = None):
        """Summed per-scale stat losses and the flat gradient over the whole bank."""
        grad_flat, grad_views = self.store.zeros_like()
        total = 0.0
        for i in (range(self.k) if scales is None else scales):
            sx, sy = self.slice_targets(i, x, y)
            pm, mc = self.predict_means(i, sx.means, x, return_cache=True)
            ps, sc = self.predict_stds(i, sx.stds, x, return_cache=True)
            n = pm.size + ps.size
            total += stat_loss(pm, ps, sy.means, sy.stds)
            self.backward_into(grad_views, i, mc, sc, 2.0 * (pm - sy.means) / n, 2.0 * (ps - sy.stds) / n)
        return total, grad_flat


def predict_means(bank: StatPredictorBank, scale_index: int, input_means: np.ndarray, window: np.ndarray) -> np.ndarray:
    return bank.predict_means(scale_index, np.asarray(input_means, float), np.asarray(window, float))


def predict_stds(bank: StatPredictorBank, scale_index: int, input_stds: np.ndarray, window: np.ndarray) -> np.ndarray:
    return bank.predict_stds(scale_index, np.asarray(input_stds, float), np.asarray(window, float))


def stat_loss(pred_means, pred_stds, true_means, true_stds) -> float:
    """Mean squared error pooled over both statistics."""
    pm, ps, tm, ts = (np.asarray(a, dtype=np.float64) for a in (pred_means, pred_stds, true_means, true_stds))
    if pm.shape != tm.shape or ps.shape != ts.shape:
        raise ShapeError(f"prediction/target shapes differ: {pm.shape} vs {tm.shape}, {ps.shape} vs {ts.shape}")
    sq = np.sum((pm - tm) ** 2) + np.sum((ps - ts) ** 2)
    return float(sq / (pm.size + ps.size))


def stat_grad(bank: StatPredictorBank, scale_index: int, batch: Tuple[np.ndarray, np.ndarray],
              loss_kind: str = "stat_loss", pipeline=None) -> Tuple[float, Dict[str, Dict[str, np.ndarray]]]:
    """Loss and gradients of one scale's mean/std models.

    ``loss_kind="end_to_end"`` back-propagates the forecast MSE through a
    ``pipeline`` (an :class:`evomsn.engine.MSNPipeline`) whose backbone is
    treated as frozen.
    """
    x, y = (np.asarray(a, dtype=np.float64) for a in batch)
    if loss_kind == "stat_loss":
        loss, flat = bank.stat_loss_and_grad(x, y, scales=[scale_index])
        views = bank.store._bind(flat)
    elif loss_kind == "end_to_end":
        if pipeline is None:
            raise ValueError("end_to_end gradients need a pipeline")
        loss, flat, _ = pipeline.loss_and_grads(x, y, want_stats=True, want_backbone=False)
        views = bank.store._bind(flat)
    else:
        raise ValueError(f"unknown loss_kind {loss_kind!r}")
    out = {kind: {t: views[f"s{scale_index}.{kind}.{t}"] for t in MLP_TENSORS} for kind in ("mean", "std")}
    return loss, out
