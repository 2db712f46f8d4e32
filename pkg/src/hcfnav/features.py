"""
Handcrafted features of single-channel IMU windows.

Each window is passed through three transforms (linear detrend, Gaussian
normalization, absolute value) and every transformed series is summarized by
eight statistics, giving 24 features per window. The batch functions operate
on an (m, N) array of windows at once and are what dataset generation uses;
the single-window functions wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "CHANNELS",
    "WINDOW_LENGTH",
    "STAT_NAMES",
    "FEATURE_NAMES",
    "Window",
    "detrend",
    "gauss_normalize",
    "abs_series",
    "low_level_stats",
    "extract_features",
    "extract_features_batch",
]

CHANNELS = ("ax", "ay", "az", "gx", "gy", "gz")
WINDOW_LENGTH = 200
TRANSFORM_NAMES = ("detrend", "normalize", "absolute")
STAT_NAMES = ("min", "max", "median", "std", "mean", "kurtosis", "skewness", "second_max")
FEATURE_NAMES = tuple(f"{t}_{s}" for t in TRANSFORM_NAMES for s in STAT_NAMES)


@dataclass(frozen=True)
class Window:
    """A length-N run of samples from one IMU channel."""

    samples: NDArray
    channel: str = "ax"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1:
            raise ValueError("window samples must be one-dimensional")
        if not np.isfinite(s).all():
            raise ValueError("window contains non-finite samples")
        if self.channel not in CHANNELS:
            raise ValueError(f"unknown channel {self.channel!r}; expected one of {CHANNELS}")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size


def _as_batch(x: ArrayLike | Window) -> tuple[NDArray, bool]:
    if isinstance(x, Window):
        x = x.samples
    a = np.asarray(x, dtype=float)
    return (a[None, :], True) if a.ndim == 1 else (a, False)


def _detrend_batch(X: NDArray) -> NDArray:
    n = X.shape[1]
    if n < 2:
        raise ValueError("detrend needs at least 2 samples")
    idx = np.arange(n, dtype=float)
    idx -= idx.mean()
    Xc = X - X.mean(axis=1, keepdims=True)
    Xc[X.max(axis=1) == X.min(axis=1)] = 0.0
    slope = (Xc @ idx) / (idx @ idx)
    return Xc - slope[:, None] * idx


def _normalize_batch(X: NDArray) -> NDArray:
    if X.shape[1] < 2:
        raise ValueError("normalization needs at least 2 samples")
    Xc = X - X.mean(axis=1, keepdims=True)
    std = X.std(axis=1, ddof=1, keepdims=True)
    out = np.zeros_like(Xc)
    # exact test: the float mean of a constant row need not equal its value
    ok = X.max(axis=1) > X.min(axis=1)
    out[ok] = Xc[ok] / std[ok]
    # a large offset leaves rounding residue in the mean that division amplifies
    out[ok] -= out[ok].mean(axis=1, keepdims=True)
    return out


def _stats_batch(X: NDArray) -> NDArray:
    n = X.shape[1]
    if n < 4:
        raise ValueError("low-level statistics need at least 4 samples")
    Xs = np.sort(X, axis=1)
    mean = X.mean(axis=1)
    # pin constant rows exactly; the float mean can miss the value by an ulp
    const = Xs[:, 0] == Xs[:, -1]
    mean[const] = Xs[const, 0]
    d = X - mean[:, None]
    m2 = np.mean(d**2, axis=1)
    m3 = np.mean(d**3, axis=1)
    m4 = np.mean(d**4, axis=1)
    kurt = np.zeros_like(m2)
    skew = np.zeros_like(m2)
    ok = m2 > 0
    kurt[ok] = m4[ok] / m2[ok] ** 2
    skew[ok] = m3[ok] / m2[ok] ** 1.5
    if n % 2:
        median = Xs[:, n // 2]
    else:
        median = 0.5 * (Xs[:, n // 2 - 1] + Xs[:, n // 2])
    return np.column_stack(
        [
            Xs[:, 0],
            Xs[:, -1],
            median,
            np.sqrt(np.sum(d**2, axis=1) / (n - 1)),
            mean,
            kurt,
            skew,
            Xs[:, -2],
        ]
    )


def detrend(w: ArrayLike | Window) -> NDArray:
    """Remove the least-squares straight line fitted against the sample index."""
    X, single = _as_batch(w)
    out = _detrend_batch(X)
    return out[0] if single else out


def gauss_normalize(w: ArrayLike | Window) -> NDArray:
    """
    Standardize to zero mean and unit sample standard deviation (N-1 divisor).

    A constant window has no scale and maps to all zeros.
    """
    X, single = _as_batch(w)
    out = _normalize_batch(X)
    return out[0] if single else out


def abs_series(w: ArrayLike | Window) -> NDArray:
    X, single = _as_batch(w)
    out = np.abs(X)
    return out[0] if single else out


def low_level_stats(x: ArrayLike) -> NDArray:
    """
    Eight summary statistics of a series, in :data:`STAT_NAMES` order.

    ``std`` uses the N-1 divisor. Kurtosis (non-excess, 3 for a normal law) and
    skewness use population moments and are 0 for a constant series.
    ``second_max`` is the second-largest order statistic, so ties count.
    """
    X, single = _as_batch(x)
    out = _stats_batch(X)
    return out[0] if single else out


def extract_features_batch(X: ArrayLike) -> NDArray:
    """Feature matrix (m, 24) for an (m, N) array of windows."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a 2-D array of windows")
    if not np.isfinite(X).all():
        raise ValueError("windows contain non-finite samples")
    return np.hstack(
        [
            _stats_batch(_detrend_batch(X)),
            _stats_batch(_normalize_batch(X)),
            _stats_batch(np.abs(X)),
        ]
    )


def extract_features(w: Window | ArrayLike, n: int = WINDOW_LENGTH) -> NDArray:
    """The 24-feature vector of one window of exactly ``n`` samples."""
    if not isinstance(w, Window):
        w = Window(w)
    if len(w) != n:
        raise ValueError(f"window has {len(w)} samples, expected {n}")
    return extract_features_batch(w.samples[None, :])[0]
