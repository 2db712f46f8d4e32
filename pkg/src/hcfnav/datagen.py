"""
Synthetic trajectories, the labelled window dataset, and evaluation runs.

The dataset recipe: four baseline trajectories of 400 s at 100 Hz, each
corrupted with 15 noise variances from :func:`noise_grid`, cut into
non-overlapping 200-sample windows per channel (4 x 15 x 6 x 200 = 72,000
windows), featurized, and split 80:20 inside every (trajectory, noise level)
cell.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .eskf import DVL_VARIANCE, ProcessNoiseSpec
from .features import CHANNELS, FEATURE_NAMES, WINDOW_LENGTH, extract_features_batch
from .strapdown import ImuSeries, NavSeries, NavState, gravity, inverse_mechanize, quat_from_euler

__all__ = [
    "AnalyticTrajectory",
    "BASELINE_IDS",
    "baseline_trajectories",
    "evaluation_trajectory",
    "get_trajectory",
    "generate_baselines",
    "noise_grid",
    "corrupt",
    "Dataset",
    "build_dataset",
    "write_dataset",
    "read_dataset",
    "EvalRun",
    "synthesize_eval_run",
    "DEFAULT_IMU_NOISE",
]

LAT0 = np.deg2rad(32.0)
LON0 = np.deg2rad(34.0)
DEPTH0 = 5.0
RATE = 100.0
BASELINE_DURATION = 400.0
EVAL_DURATION = 330.0
BASELINE_IDS = ("straight-line", "sinusoidal-heading", "lawnmower", "spiral-turn")
DATASET_FORMAT_VERSION = 1

# accelerometer 0.01^2 (m/s^2)^2 and gyro 0.001^2 (rad/s)^2 per sample
DEFAULT_IMU_NOISE = np.array([1e-4] * 3 + [1e-6] * 3)


def _smoothstep(x):
    """Quintic step, 0 to 1 on [0, 1] with continuous first and second derivatives."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x * x)


@dataclass(frozen=True)
class AnalyticTrajectory:
    """
    Level, constant-depth trajectory given by speed and heading as smooth
    functions of time. The body x-axis is aligned with the velocity.

    ``kind`` selects the family and ``params`` its parameters:

    - ``straight-line``: ``speed``, ``heading``
    - ``sinusoidal-heading``: ``speed``, ``heading``, ``amplitude`` (rad),
      ``period`` (s), ``speed_amp``, ``speed_period``
    - ``lawnmower``: ``speed``, ``heading``, ``leg`` (s), ``turn`` (s),
      ``speed_amp``, ``speed_period``
    - ``spiral-turn``: ``speed``, ``heading``, ``rate0`` (rad/s), ``tau`` (s)
    """

    id: str
    kind: str
    params: dict
    duration: float = BASELINE_DURATION
    lat0: float = LAT0
    lon0: float = LON0
    depth0: float = DEPTH0

    def speed_heading(self, t: ArrayLike) -> tuple[NDArray, NDArray]:
        t = np.asarray(t, dtype=float)
        p = self.params
        u = np.full_like(t, p["speed"])
        if p.get("speed_amp"):
            u = u + p["speed_amp"] * np.sin(2 * np.pi * t / p["speed_period"])
        psi0 = p.get("heading", 0.0)

        if self.kind == "straight-line":
            psi = np.full_like(t, psi0)
        elif self.kind == "sinusoidal-heading":
            psi = psi0 + p["amplitude"] * np.sin(2 * np.pi * t / p["period"])
        elif self.kind == "lawnmower":
            leg, turn = p["leg"], p["turn"]
            psi = np.full_like(t, psi0)
            n_turns = int(self.duration // (leg + turn)) + 1
            for i in range(n_turns):
                start = leg + i * (leg + turn)
                psi = psi + (-1) ** i * np.pi * _smoothstep((t - start) / turn)
        elif self.kind == "spiral-turn":
            psi = psi0 + p["rate0"] * p["tau"] * np.log1p(t / p["tau"])
        else:
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        return u, psi

    def kinematics(self, t: ArrayLike) -> tuple[NDArray, NDArray]:
        """NED velocity (n, 3) and attitude quaternion (n, 4) at times ``t``."""
        u, psi = self.speed_heading(t)
        v_n = np.column_stack([u * np.cos(psi), u * np.sin(psi), np.zeros_like(u)])
        q = quat_from_euler(np.zeros_like(psi), np.zeros_like(psi), psi)
        return v_n, q

    def initial_state(self) -> NavState:
        v, q = self.kinematics(np.array([0.0]))
        return NavState(self.lat0, self.lon0, self.depth0, v[0], q[0])


def baseline_trajectories(duration: float = BASELINE_DURATION) -> list[AnalyticTrajectory]:
    """The four training trajectories."""
    return [
        AnalyticTrajectory("straight-line", "straight-line",
                           {"speed": 2.0, "heading": np.deg2rad(30.0)}, duration),
        AnalyticTrajectory("sinusoidal-heading", "sinusoidal-heading",
                           {"speed": 1.5, "heading": 0.0, "amplitude": 0.6, "period": 50.0,
                            "speed_amp": 0.3, "speed_period": 80.0}, duration),
        AnalyticTrajectory("lawnmower", "lawnmower",
                           {"speed": 1.2, "heading": np.deg2rad(90.0), "leg": 60.0, "turn": 15.0},
                           duration),
        AnalyticTrajectory("spiral-turn", "spiral-turn",
                           {"speed": 1.0, "heading": 0.0, "rate0": 0.2, "tau": 60.0}, duration),
    ]


def evaluation_trajectory(duration: float = EVAL_DURATION) -> AnalyticTrajectory:
    """
    Held-out lawnmower variant: shorter legs, slower turns and a surging
    speed, starting north-bound at 1 m/s.
    """
    return AnalyticTrajectory(
        "eval-lawnmower", "lawnmower",
        {"speed": 1.0, "heading": 0.0, "leg": 45.0, "turn": 25.0,
         "speed_amp": 0.25, "speed_period": 40.0},
        duration,
    )


def get_trajectory(traj_id: str, duration: float | None = None) -> AnalyticTrajectory:
    if traj_id == "eval-lawnmower":
        return evaluation_trajectory(EVAL_DURATION if duration is None else duration)
    for traj in baseline_trajectories(BASELINE_DURATION if duration is None else duration):
        if traj.id == traj_id:
            return traj
    raise ValueError(f"unknown trajectory {traj_id!r}; choose from "
                     f"{BASELINE_IDS + ('eval-lawnmower',)}")


def generate_baselines(rate: float = RATE, duration: float = BASELINE_DURATION):
    """Ideal IMU streams and ground truth for the four baselines, as (id, imu, truth) triples."""
    out = []
    for traj in baseline_trajectories(duration):
        imu, truth = inverse_mechanize(traj, rate, g=gravity(traj.lat0))
        out.append((traj.id, imu, truth))
    return out


def noise_grid(lo: float = 0.001, hi: float = 0.05, n: int = 15) -> NDArray:
    """``n`` log-spaced variances from ``lo`` to ``hi`` inclusive."""
    grid = np.geomspace(lo, hi, n)
    grid[0], grid[-1] = lo, hi
    return grid


def corrupt(imu: ImuSeries, q: float | ArrayLike, seed) -> ImuSeries:
    """
    Add zero-mean Gaussian noise of variance ``q`` to every channel.

    ``q`` is a scalar shared by all six channels or a 6-vector ordered
    ax, ay, az, gx, gy, gz. ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    q = np.broadcast_to(np.asarray(q, dtype=float), (6,))
    if (q < 0).any():
        raise ValueError("noise variance must be non-negative")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((len(imu), 6)) * np.sqrt(q)
    return ImuSeries(imu.t.copy(), imu.f_b + noise[:, :3], imu.w_ib + noise[:, 3:])


@dataclass
class Dataset:
    """Featurized, labelled windows. One row per window."""

    traj_id: NDArray
    channel: NDArray
    label: NDArray
    start: NDArray
    features: NDArray
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.label)

    def subset(self, mask) -> "Dataset":
        return Dataset(self.traj_id[mask], self.channel[mask], self.label[mask],
                       self.start[mask], self.features[mask], dict(self.metadata))


def _cell_seed(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=key)


def build_dataset(
    baselines=None,
    grid: ArrayLike | None = None,
    n: int = WINDOW_LENGTH,
    train_fraction: float = 0.8,
    seed: int = 0,
) -> tuple[Dataset, Dataset]:
    """
    Corrupt, window, featurize and split the baselines.

    Parameters
    ----------
    baselines : list of (id, ImuSeries, NavSeries), optional
        Defaults to :func:`generate_baselines`.
    grid : array-like, optional
        Noise variances; defaults to :func:`noise_grid`.
    n : int
        Window length. Windows do not overlap; a trailing partial window is dropped.
    train_fraction : float
        Share of every (trajectory, noise level) cell assigned to the train set.
    seed : int
        Master seed for noise and split.
    """
    if baselines is None:
        baselines = generate_baselines()
    grid = noise_grid() if grid is None else np.asarray(grid, dtype=float)

    parts = {"train": [], "test": []}
    for i, (traj_id, imu, _) in enumerate(baselines):
        n_win = len(imu) // n
        for j, q in enumerate(grid):
            noisy = corrupt(imu, q, _cell_seed(seed, 0, i, j)).channels[: n_win * n]
            # (channel, window, sample)
            W = noisy.T.reshape(6, n_win, n)
            feats = extract_features_batch(W.reshape(6 * n_win, n))
            m = 6 * n_win
            rows = (
                np.full(m, traj_id, dtype=object),
                np.repeat(np.array(CHANNELS, dtype=object), n_win),
                np.full(m, q),
                np.tile(np.arange(n_win) * n, 6),
                feats,
            )
            n_train = int(round(train_fraction * m))
            perm = np.random.default_rng(_cell_seed(seed, 1, i, j)).permutation(m)
            is_train = np.zeros(m, dtype=bool)
            is_train[perm[:n_train]] = True
            parts["train"].append([r[is_train] for r in rows])
            parts["test"].append([r[~is_train] for r in rows])

    meta = {
        "format_version": DATASET_FORMAT_VERSION,
        "seed": int(seed),
        "window_length": int(n),
        "rate_hz": RATE,
        "train_fraction": float(train_fraction),
        "noise_grid": [float(g) for g in grid],
        "trajectories": [b[0] for b in baselines],
    }
    out = []
    for name in ("train", "test"):
        cols = [np.concatenate(c) for c in zip(*parts[name])]
        out.append(Dataset(*cols, metadata={**meta, "split": name}))
    return out[0], out[1]


_HEADER = ("trajectory", "channel", "label", "start") + FEATURE_NAMES


def write_dataset(ds: Dataset, path: str | Path) -> None:
    """
    Write a dataset as comma-separated text.

    Metadata goes first as ``# key=value`` lines, then a header naming every
    column. Floats are written with ``repr`` so a read-back is exact.
    """
    buf = io.StringIO()
    for k, v in ds.metadata.items():
        if isinstance(v, list):
            v = ";".join(str(x) for x in v)
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_HEADER)
    for r in range(len(ds)):
        w.writerow(
            [ds.traj_id[r], ds.channel[r], repr(float(ds.label[r])), int(ds.start[r])]
            + [repr(x) for x in ds.features[r].tolist()]
        )
    Path(path).write_text(buf.getvalue())


def read_dataset(path: str | Path) -> Dataset:
    meta = {}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body_start = 0
    for body_start, line in enumerate(lines):
        if not line.startswith("#"):
            break
        key, _, val = line[1:].strip().partition("=")
        meta[key] = val
    reader = csv.reader(lines[body_start:])
    header = next(reader)
    if tuple(header) != _HEADER:
        raise ValueError(f"{path}: unexpected dataset header")
    rows = list(reader)
    traj = np.array([r[0] for r in rows], dtype=object)
    chan = np.array([r[1] for r in rows], dtype=object)
    num = np.array([r[2:] for r in rows], dtype=float).reshape(len(rows), len(_HEADER) - 2)
    if meta.get("format_version") not in (None, str(DATASET_FORMAT_VERSION)):
        raise ValueError(f"{path}: unsupported format_version {meta['format_version']!r}")
    return Dataset(traj, chan, num[:, 0], num[:, 1].astype(np.int64), num[:, 2:], meta)


@dataclass(frozen=True)
class EvalRun:
    """
    Sensor streams and ground truth for one filter run.

    ``truth`` has one more state than ``imu`` has samples (the state after
    the last sample). DVL fixes are taken at ``dvl_index`` epochs, i.e. after
    processing IMU samples ``0 .. dvl_index - 1``.
    """

    imu: ImuSeries
    truth: NavSeries
    dvl_index: NDArray
    dvl_v: NDArray
    dvl_R: NDArray
    dt: float
    g: float
    traj_id: str = ""

    @property
    def initial_state(self) -> NavState:
        return self.truth[0]


def synthesize_eval_run(
    traj: AnalyticTrajectory | None = None,
    imu_noise: ProcessNoiseSpec | ArrayLike = DEFAULT_IMU_NOISE,
    dvl_R: ArrayLike = DVL_VARIANCE,
    dvl_period: float = 1.0,
    duration: float = EVAL_DURATION,
    seed=0,
    rate: float = RATE,
) -> EvalRun:
    """
    Noisy IMU and DVL streams along ``traj``.

    Parameters
    ----------
    imu_noise : ProcessNoiseSpec or array-like
        Per-sample IMU noise variances, six entries (ax..gz) or a spec whose
        ``q_f``/``q_w`` are used. Zeros give ideal readings.
    dvl_R : float or (3, 3) array
        DVL noise covariance. Zero gives exact velocity fixes.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    if traj is None:
        traj = evaluation_trajectory(duration)
    traj = AnalyticTrajectory(traj.id, traj.kind, traj.params, duration,
                              traj.lat0, traj.lon0, traj.depth0)
    if isinstance(imu_noise, ProcessNoiseSpec):
        imu_noise = np.concatenate([imu_noise.q_f, imu_noise.q_w])
    R = np.asarray(dvl_R, dtype=float)
    if R.ndim == 0:
        R = float(R) * np.eye(3)

    g = gravity(traj.lat0)
    ideal, truth = inverse_mechanize(traj, rate, g=g)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    imu_seed, dvl_seed = ss.spawn(2)
    imu = corrupt(ideal, imu_noise, imu_seed)

    step = int(round(dvl_period * rate))
    idx = np.arange(step, len(imu) + 1, step)
    v_true = truth.v_n[idx]
    rng = np.random.default_rng(dvl_seed)
    noise = rng.standard_normal(v_true.shape) @ np.linalg.cholesky(R).T if R.any() else 0.0
    return EvalRun(imu, truth, idx, v_true + noise, R, 1.0 / rate, g, traj.id)
