"""
Velocity-aided error-state Kalman filter.

Error state ordering is ``[dv(3), eps(3), b_a(3), b_g(3)]``: NED velocity error,
NED attitude error (phi angle), accelerometer bias and gyro bias. The filter
carries no position error states; the only aiding is a direct NED velocity
measurement from the DVL.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .strapdown import NavState, ImuSample, quat_multiply, quat_to_dcm

__all__ = [
    "ProcessNoiseSpec",
    "ErrorFilterState",
    "DvlMeasurement",
    "initial_covariance",
    "propagate",
    "dvl_update",
    "is_psd",
]

logger = logging.getLogger(__name__)

N_STATES = 12
EPS_BIAS = 0.001
DVL_VARIANCE = 0.01

_H = np.hstack([np.eye(3), np.zeros((3, 9))])
_I12 = np.eye(N_STATES)
_BIAS = np.arange(6, 12)


def _vec3(x) -> NDArray:
    a = np.asarray(x, dtype=float)
    return np.full(3, float(a)) if a.ndim == 0 else a.reshape(3).copy()


@dataclass(frozen=True)
class ProcessNoiseSpec:
    """
    Diagonal continuous-time process noise.

    Parameters
    ----------
    q_f : float or array-like, shape (3,)
        Accelerometer noise variance per axis. A scalar is broadcast.
    q_w : float or array-like, shape (3,)
        Gyro noise variance per axis. A scalar is broadcast.
    eps_bias : float
        Random-walk variance shared by all six bias states.
    """

    q_f: NDArray
    q_w: NDArray
    eps_bias: float = EPS_BIAS

    def __post_init__(self):
        object.__setattr__(self, "q_f", _vec3(self.q_f))
        object.__setattr__(self, "q_w", _vec3(self.q_w))
        object.__setattr__(self, "eps_bias", float(self.eps_bias))
        d = self.diagonal()
        if not (np.isfinite(d).all() and (d > 0).all()):
            raise ValueError(f"process noise entries must be finite and positive, got {d}")

    def diagonal(self) -> NDArray:
        """The 12 diagonal entries of the continuous process noise covariance."""
        return np.concatenate([self.q_f, self.q_w, np.full(6, self.eps_bias)])

    def scaled(self, alpha: float) -> "ProcessNoiseSpec":
        """Scale the sensor noise entries by ``alpha``; the bias entry is kept."""
        return ProcessNoiseSpec(self.q_f * alpha, self.q_w * alpha, self.eps_bias)

    def __eq__(self, other):
        if not isinstance(other, ProcessNoiseSpec):
            return NotImplemented
        return np.array_equal(self.diagonal(), other.diagonal())

    __hash__ = None


@dataclass(frozen=True)
class DvlMeasurement:
    """NED velocity measurement with covariance ``R`` (default ``0.01 I``)."""

    v_meas: NDArray
    R: NDArray = field(default_factory=lambda: DVL_VARIANCE * np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "v_meas", np.asarray(self.v_meas, dtype=float).reshape(3))
        R = np.asarray(self.R, dtype=float)
        if R.ndim == 0:
            R = float(R) * np.eye(3)
        if R.shape != (3, 3) or not np.allclose(R, R.T) or np.linalg.eigvalsh(R).min() <= 0:
            raise ValueError("DVL covariance must be a symmetric positive definite 3x3 matrix")
        object.__setattr__(self, "R", R)


def initial_covariance(
    sigma_v: float = 0.1, sigma_att: float = 0.01, sigma_bias: float = 0.01
) -> NDArray:
    """Diagonal initial covariance: velocity, attitude, then both bias blocks."""
    return np.diag(np.repeat([sigma_v**2, sigma_att**2, sigma_bias**2, sigma_bias**2], 3))


@dataclass(frozen=True)
class ErrorFilterState:
    """
    Filter context between navigation steps.

    ``innovation_cov`` holds the predicted innovation covariance ``H P H^T + R``
    of the latest DVL update, and ``psd_repairs`` counts how often
    :func:`propagate` had to clamp a covariance that drifted out of the PSD cone.
    """

    P: NDArray = field(default_factory=initial_covariance)
    b_a: NDArray = field(default_factory=lambda: np.zeros(3))
    b_g: NDArray = field(default_factory=lambda: np.zeros(3))
    last_innovation: NDArray = field(default_factory=lambda: np.zeros(3))
    innovation_cov: NDArray | None = None
    psd_repairs: int = 0


def is_psd(P: NDArray, sym_tol: float = 1e-10, eig_tol: float = 1e-9) -> bool:
    """True when ``P`` is symmetric within ``sym_tol`` and its smallest eigenvalue exceeds ``-eig_tol``."""
    if np.abs(P - P.T).max() > sym_tol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (P + P.T)).min() > -eig_tol)


def _skew(v: NDArray) -> NDArray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def _repair(P: NDArray) -> NDArray:
    w, V = np.linalg.eigh(P)
    return (V * np.clip(w, 0.0, None)) @ V.T


def propagate(
    fs: ErrorFilterState,
    state: NavState,
    imu: ImuSample,
    q: ProcessNoiseSpec | ArrayLike,
    dt: float,
) -> ErrorFilterState:
    """
    Covariance prediction over one IMU interval.

    ``P <- Phi P Phi^T + G Qc G^T dt`` with ``Phi = I + F dt``. ``imu`` is the raw
    reading; the current bias estimates are removed before forming ``F``.

    Parameters
    ----------
    q : ProcessNoiseSpec or array-like, shape (12,)
        Continuous process noise; a raw diagonal may contain zeros.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    qc = q.diagonal() if isinstance(q, ProcessNoiseSpec) else np.asarray(q, dtype=float)

    C = quat_to_dcm(state.q_bn)
    f_n = C @ (imu.f_b - fs.b_a)
    Cdt = C * dt

    Phi = _I12.copy()
    Phi[0:3, 3:6] = _skew(f_n * -dt)
    Phi[0:3, 6:9] = -Cdt
    Phi[3:6, 9:12] = -Cdt

    Qd = np.zeros((N_STATES, N_STATES))
    Qd[0:3, 0:3] = (Cdt * qc[0:3]) @ C.T
    Qd[3:6, 3:6] = (Cdt * qc[3:6]) @ C.T
    Qd[_BIAS, _BIAS] = qc[6:] * dt

    P = Phi @ fs.P @ Phi.T + Qd
    P = 0.5 * (P + P.T)
    repairs = fs.psd_repairs
    if np.diagonal(P).min() < -1e-9:
        P = _repair(P)
        repairs += 1
        logger.warning("covariance left the PSD cone during propagation; clamped")
    return replace(fs, P=P, psd_repairs=repairs)


def dvl_update(
    fs: ErrorFilterState, state: NavState, z: DvlMeasurement
) -> tuple[ErrorFilterState, NavState]:
    """
    DVL velocity update, error injection and reset.

    Returns the updated filter context (``P`` in Joseph form, innovation stored)
    and the corrected navigation state.
    """
    P = fs.P
    R = z.R
    nu = z.v_meas - state.v_n
    S = P[:3, :3] + R
    K = np.linalg.solve(S, P[:3, :]).T
    dx = K @ nu

    IKH = np.eye(N_STATES) - K @ _H
    P_new = IKH @ P @ IKH.T + K @ R @ K.T
    P_new = 0.5 * (P_new + P_new.T)

    dq = np.empty(4)
    dq[0] = 1.0
    dq[1:] = 0.5 * dx[3:6]
    q_new = quat_multiply(dq, state.q_bn)
    q_new /= np.linalg.norm(q_new)

    new_state = NavState(state.lat, state.lon, state.depth, state.v_n + dx[0:3], q_new)
    new_fs = replace(
        fs,
        P=P_new,
        b_a=fs.b_a + dx[6:9],
        b_g=fs.b_g + dx[9:12],
        last_innovation=nu,
        innovation_cov=S,
    )
    return new_fs, new_state
