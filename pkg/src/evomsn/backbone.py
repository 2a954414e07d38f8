"""Backbone forecasters mapping a normalized ``(..., L, C)`` window to ``(..., H, C)``.

A backbone exposes ``forward``, ``backward_into`` (analytic gradients into a
buffer laid out like its :class:`ParamStore`) and flat parameter access via
``store``. Weights are shared across channels.
"""
from __future__ import annotations

from typing import Dict, List, Sequence

import numpy as np

from .errors import ShapeError
from .params import ParamStore

DEFAULT_KERNEL = 25


def moving_average_matrix(length: int, kernel_size: int) -> np.ndarray:
    """Centered moving average with edge replication, as an ``(L, L)`` operator."""
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ValueError(f"kernel_size must be a positive odd integer, got {kernel_size}")
    half = kernel_size // 2
    m = np.zeros((length, length))
    rows = np.repeat(np.arange(length), kernel_size)
    cols = np.clip(rows + np.tile(np.arange(-half, half + 1), length), 0, length - 1)
    np.add.at(m, (rows, cols), 1.0 / kernel_size)
    return m


class Backbone:
    kind = "base"

    def __init__(self, L: int, H: int):
        self.L, self.H = int(L), int(H)

    def _check(self, x: np.ndarray) -> None:
        if x.ndim < 2 or x.shape[-2] != self.L:
            raise ShapeError(f"{self.kind} backbone expects (..., {self.L}, C) input, got {x.shape}")

    def forward(self, x: np.ndarray, return_cache: bool = False):
        raise NotImplementedError

    def backward_into(self, grad_views: Dict[str, np.ndarray], cache, dy: np.ndarray) -> None:
        raise NotImplementedError

    def init_uniform(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(self.L)
        for name, shape in self.store.layout:
            self.store[name][...] = rng.uniform(-bound, bound, size=shape)

    def zero_(self) -> None:
        self.store.flat[...] = 0.0

    def config(self) -> dict:
        return {"kind": self.kind, "L": self.L, "H": self.H}

    def copy(self) -> "Backbone":
        other = make_backbone(**self.config())
        other.store.set_flat(self.store.flat)
        return other


def _affine(w: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.einsum("hl,...lc->...hc", w, x) + b[:, None]


def _affine_grads(dy: np.ndarray, x: np.ndarray):
    dy2 = np.moveaxis(dy, -2, 0).reshape(dy.shape[-2], -1)
    x2 = np.moveaxis(x, -2, 0).reshape(x.shape[-2], -1)
    return dy2 @ x2.T, dy2.sum(axis=1)


class LinearBackbone(Backbone):
    kind = "linear"

    def __init__(self, L: int, H: int, seed: int = 0, **_):
        super().__init__(L, H)
        self.store = ParamStore([("weight", (H, L)), ("bias", (H,))])
        self.init_uniform(seed)

    def forward(self, x, return_cache=False):
        self._check(x)
        y = _affine(self.store["weight"], self.store["bias"], x)
        return (y, x) if return_cache else y

    def backward_into(self, grad_views, cache, dy):
        dw, db = _affine_grads(dy, cache)
        grad_views["weight"] += dw
        grad_views["bias"] += db


class DLinearBackbone(Backbone):
    """Moving-average trend plus seasonal residual, each with its own linear map."""

    kind = "dlinear"

    def __init__(self, L: int, H: int, seed: int = 0, kernel_size: int = DEFAULT_KERNEL, **_):
        super().__init__(L, H)
        self.kernel_size = int(kernel_size)
        self.ma = moving_average_matrix(L, self.kernel_size)
        self.store = ParamStore([
            ("trend_weight", (H, L)), ("trend_bias", (H,)),
            ("seasonal_weight", (H, L)), ("seasonal_bias", (H,)),
        ])
        self.init_uniform(seed)

    def config(self) -> dict:
        return {**super().config(), "kernel_size": self.kernel_size}

    def decompose(self, x: np.ndarray):
        trend = np.einsum("tl,...lc->...tc", self.ma, x)
        return trend, x - trend

    def forward(self, x, return_cache=False):
        self._check(x)
        trend, seasonal = self.decompose(x)
        s = self.store
        y = _affine(s["trend_weight"], s["trend_bias"], trend) + _affine(s["seasonal_weight"], s["seasonal_bias"], seasonal)
        return (y, (trend, seasonal)) if return_cache else y

    def backward_into(self, grad_views, cache, dy):
        trend, seasonal = cache
        dw, db = _affine_grads(dy, trend)
        grad_views["trend_weight"] += dw
        grad_views["trend_bias"] += db
        dw, db = _affine_grads(dy, seasonal)
        grad_views["seasonal_weight"] += dw
        grad_views["seasonal_bias"] += db


BACKBONES = {"linear": LinearBackbone, "dlinear": DLinearBackbone}


def make_backbone(kind: str, L: int, H: int, seed: int = 0, kernel_size: int = DEFAULT_KERNEL) -> Backbone:
    try:
        cls = BACKBONES[kind]
    except KeyError:
        raise ValueError(f"unknown backbone kind {kind!r}; choose from {sorted(BACKBONES)}") from None
    return cls(L, H, seed=seed, kernel_size=kernel_size)


def backbone_forward(params: Backbone, x: np.ndarray) -> np.ndarray:
    return params.forward(np.asarray(x, dtype=np.float64))


def backbone_forward_multiscale(params: Backbone, normalized_set: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Apply one shared parameter set to every scale's normalized window."""
    normalized_set = list(normalized_set)
    if not normalized_set:
        raise ShapeError("need at least one normalized window")
    shapes = {np.shape(w) for w in normalized_set}
    if len(shapes) != 1:
        raise ShapeError(f"normalized windows differ in shape: {sorted(shapes)}")
    return [params.forward(np.asarray(w, dtype=np.float64)) for w in normalized_set]


def backbone_grad(params: Backbone, pipeline, batch):
    """End-to-end MSE and its gradient w.r.t. the backbone, stats and weights held fixed."""
    x, y = batch
    loss, _, grad = pipeline.loss_and_grads(np.asarray(x, float), np.asarray(y, float),
                                            want_stats=False, want_backbone=True)
    return loss, params.store._bind(grad)
