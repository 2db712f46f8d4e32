"""
Strapdown inertial navigation in a local North-East-Down frame.

The mechanization is the simplified phi-angle form used throughout the package:
normal gravity is held constant, and Earth rate and transport rate are not
modelled. :func:`inverse_mechanize` is the exact discrete inverse of
:func:`mechanize`, so ideal IMU readings synthesized from a trajectory reproduce
that trajectory when integrated again.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "ImuSample",
    "NavState",
    "ImuSeries",
    "NavSeries",
    "gravity",
    "earth_radii",
    "quat_multiply",
    "quat_conjugate",
    "quat_to_dcm",
    "quat_from_euler",
    "euler_from_quat",
    "mechanize",
    "inverse_mechanize",
]

WGS84_A = 6_378_137.0
WGS84_E2 = 6.69437999014e-3


class PolarSingularityError(ValueError):
    """Raised when the latitude is too close to a pole for the NED mechanization."""


def gravity(lat: float) -> float:
    """
    Normal gravity magnitude on the WGS-84 ellipsoid (Somigliana).

    Parameters
    ----------
    lat : float
        Geodetic latitude in radians.

    Returns
    -------
    float
        Gravity in m/s^2.
    """
    s2 = np.sin(lat) ** 2
    return float(9.7803253359 * (1.0 + 0.00193185265241 * s2) / np.sqrt(1.0 - WGS84_E2 * s2))


def earth_radii(lat: float) -> tuple[float, float]:
    """Meridian and transverse radii of curvature at ``lat`` (radians)."""
    s2 = np.sin(lat) ** 2
    den = 1.0 - WGS84_E2 * s2
    r_n = WGS84_A / np.sqrt(den)
    r_m = r_n * (1.0 - WGS84_E2) / den
    return float(r_m), float(r_n)


def quat_multiply(p: NDArray, q: NDArray) -> NDArray:
    """Hamilton product ``p * q`` for scalar-first quaternions, broadcasting over leading axes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.ndim == 1 and q.ndim == 1:
        pw, px, py, pz = p.tolist()
        qw, qx, qy, qz = q.tolist()
        return np.array([
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ])
    pw, px, py, pz = np.moveaxis(p, -1, 0)
    qw, qx, qy, qz = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ],
        axis=-1,
    )


def quat_conjugate(q: NDArray) -> NDArray:
    q = np.array(q, dtype=float)
    q[..., 1:] *= -1.0
    return q


def quat_to_dcm(q: NDArray) -> NDArray:
    """
    Rotation matrix ``C_bn`` (body to NED) of a unit quaternion ``q_bn``.

    Accepts a single quaternion of shape (4,) or a stack of shape (n, 4).
    """
    q = np.asarray(q, dtype=float)
    if q.ndim == 1:
        w, x, y, z = q.tolist()
        return np.array([
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ])
    w, x, y, z = np.moveaxis(q, -1, 0)
    C = np.empty(q.shape[:-1] + (3, 3))
    C[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    C[..., 0, 1] = 2.0 * (x * y - w * z)
    C[..., 0, 2] = 2.0 * (x * z + w * y)
    C[..., 1, 0] = 2.0 * (x * y + w * z)
    C[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    C[..., 1, 2] = 2.0 * (y * z - w * x)
    C[..., 2, 0] = 2.0 * (x * z - w * y)
    C[..., 2, 1] = 2.0 * (y * z + w * x)
    C[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return C


def quat_from_euler(roll: ArrayLike, pitch: ArrayLike, yaw: ArrayLike) -> NDArray:
    """Quaternion ``q_bn`` from ZYX Euler angles (radians)."""
    cr, sr = np.cos(np.asarray(roll) / 2), np.sin(np.asarray(roll) / 2)
    cp, sp = np.cos(np.asarray(pitch) / 2), np.sin(np.asarray(pitch) / 2)
    cy, sy = np.cos(np.asarray(yaw) / 2), np.sin(np.asarray(yaw) / 2)
    return np.stack(
        np.broadcast_arrays(
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        ),
        axis=-1,
    )


def euler_from_quat(q: NDArray) -> NDArray:
    """ZYX Euler angles (roll, pitch, yaw) in radians, stacked on the last axis."""
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    roll = np.arctan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y))
    pitch = np.arcsin(np.clip(2 * (w * y - z * x), -1.0, 1.0))
    yaw = np.arctan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))
    return np.stack([roll, pitch, yaw], axis=-1)


def _wrap_lon(lon: float) -> float:
    if -np.pi < lon <= np.pi:
        return lon
    lon = (lon + np.pi) % (2.0 * np.pi) - np.pi
    return np.pi if lon == -np.pi else lon


@dataclass(frozen=True)
class ImuSample:
    """One IMU reading: specific force and angular rate in the body frame."""

    f_b: NDArray
    w_ib: NDArray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "f_b", np.asarray(self.f_b, dtype=float).reshape(3))
        object.__setattr__(self, "w_ib", np.asarray(self.w_ib, dtype=float).reshape(3))


@dataclass(frozen=True)
class NavState:
    """
    Navigation state.

    Parameters
    ----------
    lat, lon : float
        Geodetic latitude and longitude in radians.
    depth : float
        Depth in meters, positive down.
    v_n : array-like, shape (3,)
        Velocity in NED, m/s.
    q_bn : array-like, shape (4,)
        Unit quaternion (scalar first) rotating body vectors into NED.
    """

    lat: float
    lon: float
    depth: float
    v_n: NDArray = field(default_factory=lambda: np.zeros(3))
    q_bn: NDArray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        object.__setattr__(self, "v_n", np.asarray(self.v_n, dtype=float).reshape(3))
        object.__setattr__(self, "q_bn", np.asarray(self.q_bn, dtype=float).reshape(4))

    @property
    def C_bn(self) -> NDArray:
        return quat_to_dcm(self.q_bn)


@dataclass(frozen=True)
class ImuSeries:
    """A sampled IMU stream. ``f_b`` and ``w_ib`` have shape (n, 3)."""

    t: NDArray
    f_b: NDArray
    w_ib: NDArray

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k):
        """An :class:`ImuSample` for an integer index, an :class:`ImuSeries` for a slice."""
        if isinstance(k, slice):
            return ImuSeries(self.t[k], self.f_b[k], self.w_ib[k])
        return ImuSample(self.f_b[k], self.w_ib[k], float(self.t[k]))

    @property
    def channels(self) -> NDArray:
        """All six channels as an (n, 6) array ordered ax, ay, az, gx, gy, gz."""
        return np.hstack([self.f_b, self.w_ib])


@dataclass(frozen=True)
class NavSeries:
    """Navigation states sampled at the IMU epochs."""

    t: NDArray
    lat: NDArray
    lon: NDArray
    depth: NDArray
    v_n: NDArray
    q_bn: NDArray

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> NavState:
        return NavState(
            float(self.lat[k]), float(self.lon[k]), float(self.depth[k]), self.v_n[k], self.q_bn[k]
        )


def _check_state(state: NavState) -> None:
    if not (np.isfinite([state.lat, state.lon, state.depth]).all()
            and np.isfinite(state.v_n).all() and np.isfinite(state.q_bn).all()):
        raise ValueError("navigation state contains non-finite values")
    if abs(state.lat) >= np.pi / 2:
        raise PolarSingularityError(f"latitude {state.lat!r} rad is at or beyond a pole")


def _position_step(lat, lon, depth, v0, v1, dt):
    vm = 0.5 * (v0 + v1)
    r_m, r_n = earth_radii(lat)
    h = -depth
    lat_new = lat + vm[0] * dt / (r_m + h)
    lon_new = lon + vm[1] * dt / ((r_n + h) * np.cos(lat))
    return lat_new, _wrap_lon(lon_new), depth + vm[2] * dt


def mechanize(state: NavState, imu: ImuSample, dt: float, g: float | None = None) -> NavState:
    """
    Propagate the navigation state over one IMU interval.

    Velocity is integrated with the attitude at the start of the interval,
    attitude with a first-order quaternion increment followed by
    renormalization, and position with the trapezoidal velocity.

    Parameters
    ----------
    state : NavState
        State at the start of the interval.
    imu : ImuSample
        Bias-compensated IMU reading valid over the interval.
    dt : float
        Interval length in seconds, > 0.
    g : float, optional
        Gravity magnitude. Defaults to the normal gravity at ``state.lat``;
        pass a fixed value to keep gravity constant over a run.

    Returns
    -------
    NavState
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if not (np.isfinite(imu.f_b).all() and np.isfinite(imu.w_ib).all()):
        raise ValueError("IMU sample contains non-finite values")
    _check_state(state)
    if g is None:
        g = gravity(state.lat)

    C_bn = quat_to_dcm(state.q_bn)
    v_new = state.v_n + (C_bn @ imu.f_b + np.array([0.0, 0.0, g])) * dt

    dq = np.empty(4)
    dq[0] = 1.0
    dq[1:] = 0.5 * dt * imu.w_ib
    q_new = quat_multiply(state.q_bn, dq)
    q_new /= np.linalg.norm(q_new)

    lat, lon, depth = _position_step(state.lat, state.lon, state.depth, state.v_n, v_new, dt)
    return NavState(lat, lon, depth, v_new, q_new)


def inverse_mechanize(traj, rate: float, g: float | None = None) -> tuple[ImuSeries, NavSeries]:
    """
    Synthesize ideal IMU readings along an analytic trajectory.

    ``traj`` must expose ``duration`` (s), ``lat0``, ``lon0`` (rad), ``depth0`` (m)
    and ``kinematics(t) -> (v_n, q_bn)`` returning NED velocity (n, 3) and body
    attitude quaternions (n, 4) at the times ``t``.

    The readings invert :func:`mechanize` step by step, so feeding them back
    from the first state reproduces the sampled velocity and attitude up to
    rounding.

    Returns
    -------
    imu : ImuSeries
        ``round(duration * rate)`` samples; sample ``k`` drives epoch ``k`` to ``k + 1``.
    truth : NavSeries
        ``n + 1`` states: one at every IMU epoch plus the state after the last
        sample, so ``zip(imu, truth)`` pairs each reading with the state it starts from.
    """
    n = int(round(traj.duration * rate))
    dt = 1.0 / rate
    if g is None:
        g = gravity(traj.lat0)
    t = np.arange(n + 1) * dt
    v_n, q_bn = traj.kinematics(t)
    v_n = np.asarray(v_n, dtype=float)
    q_bn = np.asarray(q_bn, dtype=float)
    q_bn = q_bn / np.linalg.norm(q_bn, axis=1, keepdims=True)

    # Consecutive quaternions must share a hemisphere for the increment to be small.
    for k in range(1, n + 1):
        if q_bn[k] @ q_bn[k - 1] < 0:
            q_bn[k:] *= -1.0

    C_bn = quat_to_dcm(q_bn[:-1])
    acc_n = np.diff(v_n, axis=0) / dt - np.array([0.0, 0.0, g])
    f_b = np.einsum("kji,kj->ki", C_bn, acc_n)

    dq = quat_multiply(quat_conjugate(q_bn[:-1]), q_bn[1:])
    w_ib = 2.0 * dq[:, 1:] / (dq[:, :1] * dt)

    lat = np.empty(n + 1)
    lon = np.empty(n + 1)
    depth = np.empty(n + 1)
    lat[0], lon[0], depth[0] = traj.lat0, traj.lon0, traj.depth0
    for k in range(n):
        lat[k + 1], lon[k + 1], depth[k + 1] = _position_step(
            lat[k], lon[k], depth[k], v_n[k], v_n[k + 1], dt
        )

    imu = ImuSeries(t[:-1], f_b, w_ib)
    truth = NavSeries(t, lat, lon, depth, v_n, q_bn)
    return imu, truth
