"""Multi-scale normalization, backbone pass, denormalization and amplitude ensemble.

All array arguments may carry leading batch dimensions. Per-scale outputs
are stacked on axis ``-3`` so a single window gives ``(k, H, C)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .backbone import Backbone
from .errors import ShapeError
from .series import SliceStats, compute_slice_stats, pad_and_slice, pad_length, reassemble, SlicedWindow
from .spectral import PeriodSet, local_amplitudes
from .stat_predictor import StatPredictorBank

DEFAULT_EPS = 1e-5


@dataclass
class NormalizedSet:
    windows: List[np.ndarray]
    stats: List[SliceStats]
    pad_lens: List[int]
    periods: List[int]


@dataclass
class ForecastBundle:
    per_scale_forecasts: np.ndarray
    predicted_stats: List[Tuple[np.ndarray, np.ndarray]]
    local_amplitudes: np.ndarray
    weights: np.ndarray
    final: np.ndarray
    normalized: Optional[NormalizedSet] = None
    backbone_outputs: Optional[List[np.ndarray]] = None
    _caches: Optional[dict] = field(default=None, repr=False)


def _periods(periods) -> List[int]:
    return list(periods.periods) if isinstance(periods, PeriodSet) else [int(p) for p in periods]


def normalize(window: np.ndarray, periods, eps: float = DEFAULT_EPS) -> NormalizedSet:
    if eps <= 0:
        raise ValueError("eps must be > 0")
    window = np.asarray(window, dtype=np.float64)
    out, stats, pads, ps = [], [], [], _periods(periods)
    for i, p in enumerate(ps):
        sliced = pad_and_slice(window, p, i)
        st = compute_slice_stats(sliced)
        z = (sliced.slices - st.means[..., None, :]) / (st.stds[..., None, :] + eps)
        out.append(reassemble(SlicedWindow(i, p, z, sliced.pad_len)))
        stats.append(st)
        pads.append(sliced.pad_len)
    return NormalizedSet(out, stats, pads, ps)


def _denorm_one(y_tilde: np.ndarray, means: np.ndarray, stds: np.ndarray, p: int, eps: float, H: int):
    sliced = pad_and_slice(y_tilde, p)
    if means.shape[-2] != sliced.n_slices or stds.shape[-2] != sliced.n_slices:
        raise ShapeError(f"period {p}: predicted stats have {means.shape[-2]} slices, horizon needs {sliced.n_slices}")
    scale = stds[..., None, :] + eps
    y = sliced.slices * scale + means[..., None, :]
    return reassemble(SlicedWindow(0, p, y, sliced.pad_len))[..., :H, :], sliced.slices


def denormalize(outputs: Sequence[np.ndarray], predicted_stats: Sequence[Tuple[np.ndarray, np.ndarray]],
                periods, eps: float = DEFAULT_EPS, H: Optional[int] = None) -> np.ndarray:
    ps = _periods(periods)
    if len(outputs) != len(ps) or len(predicted_stats) != len(ps):
        raise ShapeError(f"expected {len(ps)} scales, got {len(outputs)} outputs and {len(predicted_stats)} stats")
    res = []
    for y_tilde, (m, s), p in zip(outputs, predicted_stats, ps):
        y_tilde = np.asarray(y_tilde, dtype=np.float64)
        h = y_tilde.shape[-2] if H is None else H
        res.append(_denorm_one(y_tilde, np.asarray(m, float), np.asarray(s, float), p, eps, h)[0])
    return np.stack(res, axis=-3)


def ensemble_weights(amplitudes: np.ndarray) -> np.ndarray:
    """Normalize ``(..., k, C)`` amplitudes per channel; all-zero channels get 1/k."""
    amplitudes = np.asarray(amplitudes, dtype=np.float64)
    k = amplitudes.shape[-2]
    total = amplitudes.sum(axis=-2, keepdims=True)
    safe = np.where(total > 0, total, 1.0)
    return np.where(total > 0, amplitudes / safe, 1.0 / k)


def combine(per_scale: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return np.sum(weights[..., None, :] * per_scale, axis=-3)


def ensemble(per_scale: np.ndarray, window: np.ndarray, periods: PeriodSet):
    weights = ensemble_weights(local_amplitudes(window, periods))
    return weights, combine(per_scale, weights)


class MSNPipeline:
    """Forecaster composed of period set, statistic predictor bank and backbone."""

    normalized = True

    def __init__(self, periods: PeriodSet, bank: StatPredictorBank, backbone: Backbone, eps: float = DEFAULT_EPS):
        if [s.period for s in bank.scales] != list(periods.periods):
            raise ShapeError("bank periods do not match the period set")
        if backbone.L != periods.analysis_len or bank.L != backbone.L or bank.H != backbone.H:
            raise ShapeError("look-back/horizon lengths of periods, bank and backbone disagree")
        self.periods, self.bank, self.backbone, self.eps = periods, bank, backbone, eps

    @property
    def L(self) -> int:
        return self.backbone.L

    @property
    def H(self) -> int:
        return self.backbone.H

    def forward(self, window: np.ndarray, weights: Optional[np.ndarray] = None) -> ForecastBundle:
        x = np.asarray(window, dtype=np.float64)
        if x.shape[-2] != self.L:
            raise ShapeError(f"window length {x.shape[-2]} != L={self.L}")
        norm = normalize(x, self.periods, self.eps)
        outs, stats, per_scale, bb_caches, mcaches, scaches, y_sl = [], [], [], [], [], [], []
        for i, p in enumerate(norm.periods):
            y_tilde, bc = self.backbone.forward(norm.windows[i], return_cache=True)
            m, mc = self.bank.predict_means(i, norm.stats[i].means, x, return_cache=True)
            s, sc = self.bank.predict_stds(i, norm.stats[i].stds, x, return_cache=True)
            y_hat, sl = _denorm_one(y_tilde, m, s, p, self.eps, self.H)
            outs.append(y_tilde)
            stats.append((m, s))
            per_scale.append(y_hat)
            bb_caches.append(bc)
            mcaches.append(mc)
            scaches.append(sc)
            y_sl.append(sl)
        per_scale = np.stack(per_scale, axis=-3)
        amps = local_amplitudes(x, self.periods)
        w = ensemble_weights(amps) if weights is None else np.broadcast_to(np.asarray(weights, float), amps.shape)
        final = combine(per_scale, w)
        caches = {"backbone": bb_caches, "mean": mcaches, "std": scaches, "y_sliced": y_sl}
        return ForecastBundle(per_scale, stats, amps, w, final, norm, outs, caches)

    def predict(self, window: np.ndarray) -> np.ndarray:
        return self.forward(window).final

    def backward(self, bundle: ForecastBundle, d_final: np.ndarray,
                 want_stats: bool = True, want_backbone: bool = True):
        """Gradients of a scalar loss given ``d loss / d final``; weights are constants."""
        c = bundle._caches
        stats_flat, stats_views = self.bank.store.zeros_like() if want_stats else (None, None)
        bb_flat, bb_views = self.backbone.store.zeros_like() if want_backbone else (None, None)
        for i, p in enumerate(self.periods.periods):
            d_scale = bundle.weights[..., i, None, :] * d_final
            pad = pad_length(self.H, p)
            if pad:
                widths = [(0, 0)] * d_scale.ndim
                widths[-2] = (0, pad)
                d_scale = np.pad(d_scale, widths)
            d_sl = d_scale.reshape(d_scale.shape[:-2] + (-1, p, d_scale.shape[-1]))
            m, s = bundle.predicted_stats[i]
            if want_stats:
                d_m = d_sl.sum(axis=-2)
                d_s = (d_sl * c["y_sliced"][i]).sum(axis=-2)
                self.bank.backward_into(stats_views, i, c["mean"][i], c["std"][i], d_m, d_s)
            if want_backbone:
                d_y = (d_sl * (s[..., None, :] + self.eps)).reshape(d_scale.shape)[..., : self.H, :]
                self.backbone.backward_into(bb_views, c["backbone"][i], d_y)
        return stats_flat, bb_flat

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray, want_stats: bool = True, want_backbone: bool = True):
        """End-to-end MSE of the ensembled forecast and its gradients."""
        bundle = self.forward(x)
        err = bundle.final - y
        loss = float(np.mean(err * err))
        g_stats, g_bb = self.backward(bundle, 2.0 * err / err.size, want_stats, want_backbone)
        return loss, g_stats, g_bb


class VanillaPipeline:
    """Backbone applied directly to the raw window, no normalization."""

    normalized = False

    def __init__(self, backbone: Backbone):
        self.backbone = backbone
        self.bank = None

    @property
    def L(self) -> int:
        return self.backbone.L

    @property
    def H(self) -> int:
        return self.backbone.H

    def predict(self, window: np.ndarray) -> np.ndarray:
        return self.backbone.forward(np.asarray(window, dtype=np.float64))

    def loss_and_grads(self, x, y, want_stats=False, want_backbone=True):
        pred, cache = self.backbone.forward(np.asarray(x, float), return_cache=True)
        err = pred - y
        loss = float(np.mean(err * err))
        g = None
        if want_backbone:
            g, views = self.backbone.store.zeros_like()
            self.backbone.backward_into(views, cache, 2.0 * err / err.size)
        return loss, None, g


def forward(window: np.ndarray, periods: PeriodSet, bank: StatPredictorBank, backbone_params: Backbone,
            eps: float = DEFAULT_EPS) -> ForecastBundle:
    return MSNPipeline(periods, bank, backbone_params, eps).forward(window)
