"""
End-to-end hybrid filter runs, speed metrics and Monte-Carlo comparison.
"""

from __future__ import annotations

import csv
import io
import json
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .datagen import (EVAL_DURATION, RATE, DEFAULT_IMU_NOISE, EvalRun, get_trajectory,
                      synthesize_eval_run)
from .eskf import (DVL_VARIANCE, DvlMeasurement, ErrorFilterState, initial_covariance, is_psd,
                   propagate, dvl_update)
from .qstrategy import (Constant, InnovationAdaptive, Learned, MISMATCHED_Q, TRUE_Q,
                        next_q_constant, next_q_innovation, next_q_learned)
from .strapdown import ImuSample, mechanize

__all__ = [
    "RunConfig",
    "RunMetrics",
    "srmse",
    "smae",
    "run_filter",
    "monte_carlo",
    "ComparisonReport",
    "default_strategies",
]

REPORT_FORMAT_VERSION = 1


def srmse(err: ArrayLike) -> float:
    """Square root of the mean, over epochs, of the summed squared NED velocity errors."""
    err = np.asarray(err, dtype=float).reshape(-1, 3)
    if len(err) == 0:
        raise ValueError("empty error series")
    # factor out the largest magnitude so squaring cannot under- or overflow
    scale = np.abs(err).max()
    if scale == 0 or not np.isfinite(scale):
        return float(scale)
    return float(scale * np.sqrt(np.mean(np.sum((err / scale) ** 2, axis=1))))


def smae(err: ArrayLike) -> float:
    """Mean, over epochs, of the summed absolute NED velocity errors."""
    err = np.asarray(err, dtype=float).reshape(-1, 3)
    if len(err) == 0:
        raise ValueError("empty error series")
    return float(np.mean(np.sum(np.abs(err), axis=1)))


@dataclass
class RunConfig:
    """
    Parameters of a run or a Monte-Carlo campaign. Defaults: 100 Hz IMU,
    1 s DVL period, 330 s runs on the held-out lawnmower trajectory.
    """

    imu_dt: float = 1.0 / RATE
    dvl_period: float = 1.0
    duration: float = EVAL_DURATION
    tuning_rate: float = 1.0
    trajectory: str = "eval-lawnmower"
    imu_noise: list = field(default_factory=lambda: DEFAULT_IMU_NOISE.tolist())
    dvl_variance: float = DVL_VARIANCE
    runs: int = 20
    seed: int = 0
    strategies: list = field(default_factory=lambda: [
        "constant:0.01,0.001", "constant:0.2,0.02", "adaptive:1", "adaptive:5", "learned"])
    adaptive_base: list = field(default_factory=lambda: [0.2, 0.02])
    model: str | None = None
    check_covariance: bool = False

    def __post_init__(self):
        for name in ("dvl_period", "tuning_rate"):
            ratio = getattr(self, name) / self.imu_dt
            if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
                raise ValueError(f"{name} must be a positive integer multiple of imu_dt")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")

    @property
    def dvl_steps(self) -> int:
        return int(round(self.dvl_period / self.imu_dt))

    @property
    def tuning_steps(self) -> int:
        return int(round(self.tuning_rate / self.imu_dt))

    def to_dict(self) -> dict:
        return {"format_version": 1, **asdict(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        version = d.pop("format_version", 1)
        if version != 1:
            raise ValueError(f"unsupported config format_version {version!r}")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def make_run(self, seed) -> EvalRun:
        traj = get_trajectory(self.trajectory, self.duration)
        return synthesize_eval_run(traj, np.asarray(self.imu_noise, dtype=float),
                                   self.dvl_variance, self.dvl_period, self.duration,
                                   seed, 1.0 / self.imu_dt)


@dataclass
class RunMetrics:
    """Outcome of one filter run; error series are sampled at the DVL epochs."""

    srmse: float
    smae: float
    t: NDArray
    vel_err: NDArray
    innovations: NDArray
    q_trace: NDArray
    psd_ok: bool
    psd_repairs: int
    max_asymmetry: float
    min_eigenvalue: float
    v_est: NDArray | None = None


def run_filter(config: RunConfig, run: EvalRun, strategy, record_velocity: bool = False) -> RunMetrics:
    """
    Run the hybrid filter over one set of streams.

    Each IMU step propagates the covariance and the navigation state; at every
    DVL epoch the measurement update is applied and the velocity error against
    ground truth recorded. The process noise is reassigned from the strategy
    every ``tuning_rate`` seconds (innovation strategies at every DVL fix).
    The learned prediction depends only on the trailing IMU window, so it is
    evaluated only at the epochs where it is assigned.
    """
    n = len(run.imu)
    if run.dvl_index.size and run.dvl_index[-1] > n:
        raise ValueError(f"DVL fix at IMU index {int(run.dvl_index[-1])} beyond stream end {n}")
    if len(run.truth) < n + 1:
        raise ValueError(f"ground truth has {len(run.truth)} states, need {n + 1}")
    if abs(run.dt - config.imu_dt) > 1e-12:
        raise ValueError(f"stream period {run.dt} does not match config imu_dt {config.imu_dt}")

    dt, g = run.dt, run.g
    f_raw, w_raw = run.imu.f_b, run.imu.w_ib
    channels = run.imu.channels
    R = run.dvl_R
    fixes = {int(k): i for i, k in enumerate(run.dvl_index)}

    if isinstance(strategy, Constant):
        q = next_q_constant(strategy.spec)
    elif isinstance(strategy, InnovationAdaptive):
        q = strategy.base
        history = deque(maxlen=strategy.xi)
    elif isinstance(strategy, Learned):
        q = strategy.initial
        tuning_steps = int(round(strategy.tuning_rate / dt))
        window = strategy.window
    else:
        raise TypeError(f"unsupported strategy {strategy!r}")

    state = run.truth[0]
    fs = ErrorFilterState(P=initial_covariance())
    errs, innov, qtr, times, vest = [], [], [], [], []
    psd_ok, max_asym, min_eig = True, 0.0, np.inf

    def check(P):
        nonlocal psd_ok, max_asym, min_eig
        asym = float(np.abs(P - P.T).max())
        eig = float(np.linalg.eigvalsh(P).min())
        max_asym = max(max_asym, asym)
        min_eig = min(min_eig, eig)
        psd_ok = psd_ok and is_psd(P)

    for k in range(n):
        raw = ImuSample(f_raw[k], w_raw[k])
        fs = propagate(fs, state, raw, q, dt)
        state = mechanize(state, ImuSample(raw.f_b - fs.b_a, raw.w_ib - fs.b_g), dt, g)
        if config.check_covariance:
            check(fs.P)
        kk = k + 1
        i = fixes.get(kk)
        if i is not None:
            fs, state = dvl_update(fs, state, DvlMeasurement(run.dvl_v[i], R))
            check(fs.P)
            errs.append(run.truth.v_n[kk] - state.v_n)
            innov.append(fs.last_innovation)
            times.append(kk * dt)
            if record_velocity:
                vest.append(state.v_n)
            if isinstance(strategy, InnovationAdaptive):
                history.append(fs.last_innovation)
                q = next_q_innovation(history, fs.innovation_cov, strategy.base, strategy.xi)
            qtr.append(q.diagonal()[:6].sum())
        if isinstance(strategy, Learned) and kk % tuning_steps == 0 and kk >= window:
            q = next_q_learned(channels[kk - window:kk].T, strategy.ensemble, window,
                               eps_bias=q.eps_bias)

    err = np.asarray(errs).reshape(-1, 3)
    return RunMetrics(
        srmse=srmse(err),
        smae=smae(err),
        t=np.asarray(times),
        vel_err=err,
        innovations=np.asarray(innov).reshape(-1, 3),
        q_trace=np.asarray(qtr),
        psd_ok=psd_ok,
        psd_repairs=fs.psd_repairs,
        max_asymmetry=max_asym,
        min_eigenvalue=min_eig,
        v_est=np.asarray(vest).reshape(-1, 3) if record_velocity else None,
    )


def default_strategies(ensemble=None, tuning_rate: float = 1.0):
    """The comparison set: two constants, two innovation windows and, given a model, the learned one."""
    out = [Constant(TRUE_Q), Constant(MISMATCHED_Q),
           InnovationAdaptive(1, MISMATCHED_Q), InnovationAdaptive(5, MISMATCHED_Q)]
    if ensemble is not None:
        out.append(Learned(ensemble, tuning_rate))
    return out


@dataclass
class ComparisonReport:
    """Mean metrics per strategy over Monte-Carlo runs, plus the per-run values."""

    names: list
    srmse: NDArray  # (n_strategies, n_runs)
    smae: NDArray
    seed: int
    metadata: dict = field(default_factory=dict)

    @property
    def mean_srmse(self) -> NDArray:
        return self.srmse.mean(axis=1)

    @property
    def mean_smae(self) -> NDArray:
        return self.smae.mean(axis=1)

    def row(self, name: str) -> tuple[float, float]:
        i = self.names.index(name)
        return float(self.mean_srmse[i]), float(self.mean_smae[i])

    def to_text(self) -> str:
        width = max(len("Approach"), *(len(n) for n in self.names))
        lines = [
            f"runs={self.srmse.shape[1]} seed={self.seed}",
            f"{'Approach':<{width}}  {'SRMSE [m/s]':>12}  {'SMAE [m/s]':>12}",
            "-" * (width + 28),
        ]
        for name, a, b in zip(self.names, self.mean_srmse, self.mean_smae):
            lines.append(f"{name:<{width}}  {a:>12.4f}  {b:>12.4f}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# format_version={REPORT_FORMAT_VERSION}\n")
        buf.write(f"# seed={self.seed}\n")
        buf.write(f"# runs={self.srmse.shape[1]}\n")
        for k, v in self.metadata.items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["approach", "srmse", "smae", "srmse_std", "smae_std"])
        for i, name in enumerate(self.names):
            w.writerow([name, repr(float(self.mean_srmse[i])), repr(float(self.mean_smae[i])),
                        repr(float(self.srmse[i].std())), repr(float(self.smae[i].std()))])
        return buf.getvalue()

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(self.to_text())
        (out / "report.csv").write_text(self.to_csv())


def _run_one(config, strategies, run_seed):
    run = config.make_run(run_seed)
    return [run_filter(config, run, s) for s in strategies]


def monte_carlo(config: RunConfig, strategies, n_runs: int | None = None,
                n_jobs: int = 1) -> ComparisonReport:
    """
    Run every strategy on ``n_runs`` independent noise realizations.

    Run ``r`` draws its sensor noise from the ``r``-th child of the master
    seed, and all strategies see the same streams within a run.
    """
    n_runs = config.runs if n_runs is None else n_runs
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    seeds = np.random.SeedSequence(config.seed).spawn(n_runs)
    if n_jobs == 1:
        results = [_run_one(config, strategies, s) for s in seeds]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(_run_one)(config, strategies, s) for s in seeds)
    sr = np.array([[m.srmse for m in r] for r in results]).T
    sm = np.array([[m.smae for m in r] for r in results]).T
    return ComparisonReport(
        names=[s.name for s in strategies],
        srmse=sr,
        smae=sm,
        seed=config.seed,
        metadata={"trajectory": config.trajectory, "duration_s": config.duration,
                  "tuning_rate_s": config.tuning_rate},
    )
