"""
Process-noise strategies: constant, innovation-adaptive and learned.

The strategy objects are plain descriptions; the filter loop keeps whatever
running state a strategy needs (innovation history, IMU buffer) and calls the
``next_q_*`` functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .eskf import ProcessNoiseSpec
from .features import CHANNELS, WINDOW_LENGTH, Window, extract_features_batch
from .trees import TreeEnsemble

__all__ = [
    "TRUE_Q",
    "MISMATCHED_Q",
    "ALPHA_CLAMP",
    "Constant",
    "InnovationAdaptive",
    "Learned",
    "next_q_constant",
    "next_q_innovation",
    "innovation_scale",
    "next_q_learned",
    "parse_strategy",
]

TRUE_Q = ProcessNoiseSpec(0.01, 0.001)
MISMATCHED_Q = ProcessNoiseSpec(0.2, 0.02)
ALPHA_CLAMP = (0.1, 10.0)


@dataclass(frozen=True)
class Constant:
    spec: ProcessNoiseSpec = TRUE_Q

    @property
    def name(self) -> str:
        return f"constant:{self.spec.q_f[0]:g},{self.spec.q_w[0]:g}"


@dataclass(frozen=True)
class InnovationAdaptive:
    """
    Covariance-matching adaptation.

    ``xi`` is the number of most recent DVL innovations averaged; ``base`` is
    the nominal spec that the trace ratio scales at every fix.
    """

    xi: int = 5
    base: ProcessNoiseSpec = MISMATCHED_Q

    def __post_init__(self):
        if int(self.xi) != self.xi or self.xi < 1:
            raise ValueError(f"xi must be a positive integer, got {self.xi!r}")

    @property
    def name(self) -> str:
        return f"adaptive:{self.xi}"


@dataclass(frozen=True)
class Learned:
    """
    Ensemble-predicted noise, assigned every ``tuning_rate`` seconds.

    ``initial`` is used until a full window of IMU samples is available.
    """

    ensemble: TreeEnsemble
    tuning_rate: float = 1.0
    initial: ProcessNoiseSpec = TRUE_Q
    window: int = WINDOW_LENGTH

    def __post_init__(self):
        if not self.tuning_rate > 0:
            raise ValueError("tuning_rate must be positive")

    @property
    def name(self) -> str:
        return "learned"


def next_q_constant(spec: ProcessNoiseSpec) -> ProcessNoiseSpec:
    return spec


def innovation_scale(innovations: Sequence[ArrayLike], S: NDArray) -> float:
    """
    Trace ratio of empirical to predicted innovation covariance, clamped to
    :data:`ALPHA_CLAMP`.
    """
    nu = np.asarray(innovations, dtype=float).reshape(-1, 3)
    C_hat = nu.T @ nu / len(nu)
    alpha = np.trace(C_hat) / np.trace(S)
    return float(np.clip(alpha, *ALPHA_CLAMP))


def next_q_innovation(
    history: Sequence[ArrayLike],
    S: NDArray | None,
    spec: ProcessNoiseSpec,
    xi: int | None = None,
) -> ProcessNoiseSpec:
    """
    Scale ``spec`` by the innovation trace ratio over the last ``xi`` innovations.

    Parameters
    ----------
    history : sequence of (3,) arrays
        Innovations, oldest first. Only the last ``xi`` are used (all if ``xi`` is None).
    S : (3, 3) array
        Predicted innovation covariance ``H P H^T + R`` of the latest update.
    spec : ProcessNoiseSpec
        The spec to scale.

    An empty history returns ``spec`` unchanged.
    """
    if len(history) == 0 or S is None:
        return spec
    recent = list(history)[-xi:] if xi else list(history)
    return spec.scaled(innovation_scale(recent, S))


def next_q_learned(
    windows: Sequence[Window] | NDArray,
    ensemble: TreeEnsemble,
    n: int = WINDOW_LENGTH,
    eps_bias: float | None = None,
) -> ProcessNoiseSpec:
    """
    Predict per-axis noise variances from six channel windows.

    ``windows`` is a sequence of :class:`Window` (any order, one per channel)
    or an (6, n) array ordered ax, ay, az, gx, gy, gz.
    """
    if isinstance(windows, np.ndarray):
        W = np.asarray(windows, dtype=float)
        if W.shape[0] != 6:
            raise ValueError("expected six channel windows")
    else:
        by_channel = {w.channel: w for w in windows}
        if sorted(by_channel) != sorted(CHANNELS) or len(windows) != 6:
            raise ValueError(f"expected exactly one window per channel {CHANNELS}")
        W = np.stack([by_channel[c].samples for c in CHANNELS]) if all(
            len(by_channel[c]) == n for c in CHANNELS) else None
    if W is None or W.shape != (6, n):
        raise ValueError(f"every window must have exactly {n} samples")
    q = ensemble.predict(extract_features_batch(W))
    kw = {} if eps_bias is None else {"eps_bias": eps_bias}
    return ProcessNoiseSpec(q[:3], q[3:], **kw)


def parse_strategy(text: str, ensemble: TreeEnsemble | None = None,
                   adaptive_base: ProcessNoiseSpec = MISMATCHED_Q,
                   tuning_rate: float = 1.0):
    """
    Build a strategy from ``name[:params]``.

    ``constant:QF,QW``, ``adaptive:XI``, ``learned`` (needs ``ensemble``).
    """
    name, _, params = text.partition(":")
    name = name.strip().lower()
    if name == "constant":
        if params:
            qf, qw = (float(x) for x in params.split(","))
            return Constant(ProcessNoiseSpec(qf, qw))
        return Constant()
    if name == "adaptive":
        return InnovationAdaptive(int(params) if params else 5, adaptive_base)
    if name == "learned":
        if ensemble is None:
            raise ValueError("the learned strategy needs a trained model")
        return Learned(ensemble, tuning_rate)
    raise ValueError(f"unknown strategy {text!r}")
