"""Series storage, look-back/horizon windowing, periodic padding and slicing.

Array functions here accept arbitrary leading batch dimensions: a window is
``(..., L, C)`` and slicing produces ``(..., J, p, C)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidPeriod, SeriesTooShort, ShapeError


@dataclass(frozen=True)
class MultiSeries:
    values: np.ndarray
    channel_names: List[str] = field(default_factory=list)
    step_index_origin: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ShapeError(f"series values must be T x C with T, C >= 1, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("series contains NaN or Inf")
        names = list(self.channel_names) or [f"ch{i}" for i in range(values.shape[1])]
        if len(names) != values.shape[1]:
            raise ShapeError(f"{len(names)} channel names for {values.shape[1]} channels")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel_names", names)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    def segment(self, start: int, stop: int) -> "MultiSeries":
        return MultiSeries(self.values[start:stop], self.channel_names, self.step_index_origin + start)


@dataclass(frozen=True)
class WindowPair:
    x: np.ndarray
    y: Optional[np.ndarray]
    origin: int

    def without_label(self) -> "WindowPair":
        return WindowPair(self.x, None, self.origin)


def window_count(T: int, L: int, H: int, stride: int = 1) -> int:
    if L < 1 or H < 1 or stride < 1:
        raise ValueError("L, H and stride must be >= 1")
    if L + H > T:
        raise SeriesTooShort(f"series of length {T} cannot hold a window of L={L} + H={H}")
    return (T - L - H) // stride + 1


def window_arrays(values: np.ndarray, L: int, H: int, stride: int = 1):
    """Stacked look-back and horizon arrays, shapes ``(N, L, C)`` and ``(N, H, C)``."""
    values = np.asarray(values, dtype=np.float64)
    n = window_count(values.shape[0], L, H, stride)
    # sliding_window_view puts the window axis last
    full = sliding_window_view(values, L + H, axis=0)[::stride][:n]
    full = np.ascontiguousarray(np.swapaxes(full, 1, 2))
    return full[:, :L], full[:, L:]


def make_windows(series: MultiSeries, L: int, H: int, stride: int = 1) -> List[WindowPair]:
    xs, ys = window_arrays(series.values, L, H, stride)
    origin = series.step_index_origin
    return [WindowPair(x, y, origin + i * stride) for i, (x, y) in enumerate(zip(xs, ys))]


@dataclass(frozen=True)
class SlicedWindow:
    scale_index: int
    period: int
    slices: np.ndarray
    pad_len: int

    @property
    def n_slices(self) -> int:
        return self.slices.shape[-3]


@dataclass(frozen=True)
class SliceStats:
    means: np.ndarray
    stds: np.ndarray


def pad_length(length: int, period: int) -> int:
    return (period - length % period) % period


def n_slices(length: int, period: int) -> int:
    return -(-length // period)


def _check_period(period) -> int:
    if int(period) != period or period <= 0:
        raise InvalidPeriod(f"period must be a positive integer, got {period!r}")
    return int(period)


def pad_and_slice(window: np.ndarray, period: int, scale_index: int = 1) -> SlicedWindow:
    """Pad the window by repeating its final rows, then cut into blocks of ``period``."""
    period = _check_period(period)
    window = np.asarray(window, dtype=np.float64)
    if window.ndim < 2 or window.shape[-2] < 1:
        raise ShapeError(f"window must be (..., L, C) with L >= 1, got shape {window.shape}")
    length = window.shape[-2]
    pad = pad_length(length, period)
    if pad:
        # a period longer than twice the window wraps the tail cyclically
        tail = np.arange(length - pad, length) % length
        window = np.concatenate([window, window[..., tail, :]], axis=-2)
    j = window.shape[-2] // period
    slices = window.reshape(window.shape[:-2] + (j, period, window.shape[-1]))
    return SlicedWindow(scale_index, period, slices, pad)


def compute_slice_stats(sliced: SlicedWindow) -> SliceStats:
    slices = sliced.slices
    means = slices.mean(axis=-2)
    dev = slices - means[..., None, :]
    stds = np.sqrt((dev * dev).mean(axis=-2))
    return SliceStats(means, stds)


def reassemble(sliced: SlicedWindow) -> np.ndarray:
    s = sliced.slices
    flat = s.reshape(s.shape[:-3] + (s.shape[-3] * s.shape[-2], s.shape[-1]))
    if sliced.pad_len:
        flat = flat[..., : flat.shape[-2] - sliced.pad_len, :]
    return flat
