"""
Acceptance suite: one test per criterion, each recording a PASS/FAIL line
that is printed in the pytest terminal summary.

The expensive artifacts (dataset, 30-tree model, 20-run comparison) are
built once per module through the command-line entry point.
"""

import time
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from hcfnav.cli import main
from hcfnav.datagen import (corrupt, evaluation_trajectory, noise_grid,
                            read_dataset, synthesize_eval_run)
from hcfnav.features import extract_features, extract_features_batch
from hcfnav.harness import RunConfig, monte_carlo, run_filter, smae, srmse
from hcfnav.qstrategy import MISMATCHED_Q, TRUE_Q, Constant, InnovationAdaptive, Learned
from hcfnav.strapdown import gravity, inverse_mechanize
from hcfnav.trees import TreeEnsemble, evaluate_mse, fit_tree

from . import oracles

pytestmark = pytest.mark.acceptance

# normalize block and the kurtosis / skewness entries carry no units
_unitless = np.zeros(24, dtype=bool)
_unitless[8:16] = True
_unitless[[5, 6, 21, 22]] = True


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="module")
def generated(workdir):
    t0 = time.perf_counter()
    assert main(["generate", "--seed", "0", "--out", str(workdir / "data")]) == 0
    return workdir / "data", time.perf_counter() - t0


@pytest.fixture(scope="module")
def trained(workdir, generated):
    t0 = time.perf_counter()
    assert main(["train", "--seed", "0", "--data", str(generated[0]), "--out", str(workdir / "model")]) == 0
    return workdir / "model" / "model.json", time.perf_counter() - t0


@pytest.fixture(scope="module")
def comparison(trained):
    ens = TreeEnsemble.load(trained[0])
    cfg = RunConfig(runs=20, seed=0)
    strategies = [Constant(TRUE_Q), Constant(MISMATCHED_Q), InnovationAdaptive(1, MISMATCHED_Q),
                  InnovationAdaptive(5, MISMATCHED_Q), Learned(ens, cfg.tuning_rate)]
    t0 = time.perf_counter()
    report = monte_carlo(cfg, strategies)
    return report, time.perf_counter() - t0


def test_1_dataset_recipe(generated, criterion):
    path, elapsed = generated
    train, test = read_dataset(path / "train.csv"), read_dataset(path / "test.csv")
    labels = Counter(np.concatenate([train.label, test.label]).tolist())
    grid = noise_grid()
    ok = (len(train) + len(test) == 72_000 and len(train) == 57_600 and len(test) == 14_400
          and sorted(labels) == sorted(grid.tolist()) and set(labels.values()) == {4_800}
          and elapsed < 120)
    detail = (f"rows={len(train) + len(test)} train={len(train)} test={len(test)} "
              f"levels={len(labels)} per_level={sorted(set(labels.values()))} time={elapsed:.1f}s")
    assert criterion(1, ok, detail), detail


def test_2_feature_oracle(criterion):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        x = rng.normal(rng.uniform(-20, 20), 10 ** rng.uniform(-3, 1), 200)
        got, want = extract_features(x), np.array(oracles.features(x))
        # signal-unit entries are compared at the window's magnitude, where a mean-zero
        # statistic has no relative scale of its own
        scale = np.where(_unitless, 1.0, np.abs(x).max())
        worst = max(worst, float(np.max(np.abs(got - want) / np.maximum(np.abs(want), scale))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10
    detail = f"max relative deviation {worst:.2e} over 1000 windows, time={elapsed:.1f}s"
    assert criterion(2, ok, detail), detail



def test_3_tree_oracle(criterion):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    mismatches = 0
    for k in range(200):
        n, F = int(rng.integers(1, 33)), int(rng.integers(1, 4))
        if k % 2:
            X = rng.integers(0, 5, (n, F)).astype(float)
            y = rng.choice(noise_grid(), n)
        else:
            X = rng.normal(size=(n, F))
            y = rng.uniform(0.001, 0.05, n)
        leaf = int(rng.choice([1, 2, 3, 4, 8]))
        tree = fit_tree(X, y, min_leaf=leaf)
        got = [(-1, None, float(v)) if f == -1 else (int(f), float(t), None)
               for f, t, v in zip(tree.feature, tree.threshold, tree.value)]
        mismatches += got != oracles.flatten(oracles.grow_tree(X.tolist(), y.tolist(), leaf))
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30
    detail = f"{200 - mismatches}/200 datasets identical to exhaustive search, time={elapsed:.1f}s"
    assert criterion(3, ok, detail), detail


def test_4_learned_model(generated, trained, criterion):
    path, elapsed = trained
    ens = TreeEnsemble.load(path)
    train, test = read_dataset(generated[0] / "train.csv"), read_dataset(generated[0] / "test.csv")
    mse = evaluate_mse(ens, test.features, test.label)
    mean_mse = float(np.mean((test.label - train.label.mean()) ** 2))

    # fresh windows: the held-out trajectory with new noise draws
    traj = evaluation_trajectory()
    ideal, _ = inverse_mechanize(traj, 100.0, g=gravity(traj.lat0))
    medians = []
    for j, q in enumerate(noise_grid()):
        ch = corrupt(ideal, q, np.random.SeedSequence([4, j])).channels
        m = len(ch) // 200
        pred = ens.predict(extract_features_batch(ch[: m * 200].T.reshape(6 * m, 200)))
        medians.append(float(np.median(np.abs(pred - q) / q)))
    ratio = mse / mean_mse
    ok = ratio <= 0.25 and max(medians) <= 0.30 and len(ens) == 30 and elapsed < 600
    detail = (f"test MSE {mse:.3e} = {100 * ratio:.1f}% of mean-predictor MSE; worst per-level "
              f"median relative error {100 * max(medians):.1f}%; training {elapsed:.0f}s")
    assert criterion(4, ok, detail), detail


def test_5_filter_health(criterion):
    cfg = RunConfig(check_covariance=True)
    m = run_filter(cfg, cfg.make_run(np.random.SeedSequence(5)), Constant(TRUE_Q))

    plain = RunConfig()
    run = plain.make_run(np.random.SeedSequence(6))
    t0 = time.perf_counter()
    run_filter(plain, run, Constant(TRUE_Q))
    elapsed = time.perf_counter() - t0

    # exact IMU and DVL streams; the filter keeps its nominal DVL covariance
    ideal = synthesize_eval_run(imu_noise=np.zeros(6), dvl_R=0.0, seed=7)
    perfect = run_filter(plain, replace(ideal, dvl_R=0.01 * np.eye(3)), Constant(TRUE_Q))

    ok = (m.psd_ok and m.psd_repairs == 0 and m.max_asymmetry <= 1e-10 and m.min_eigenvalue >= -1e-9
          and perfect.srmse < 1e-6 and elapsed < 5)
    detail = (f"max |P-P^T|={m.max_asymmetry:.1e} min eig={m.min_eigenvalue:.1e} repairs={m.psd_repairs}; "
              f"perfect-sensor SRMSE={perfect.srmse:.1e} m/s; run time {elapsed:.2f}s")
    assert criterion(5, ok, detail), detail


def test_6_table_ordering(comparison, criterion):
    report, elapsed = comparison
    true_q = report.row("constant:0.01,0.001")[0]
    mism = report.row("constant:0.2,0.02")[0]
    xi1 = report.row("adaptive:1")[0]
    xi5 = report.row("adaptive:5")[0]
    learned = report.row("learned")[0]
    a = mism > true_q
    b = learned <= 0.95 * mism and learned <= 1.02 * true_q
    c = xi5 <= xi1
    ok = a and b and c and elapsed < 900
    detail = (f"(a) {'ok' if a else 'FAIL'} {mism:.4f} > {true_q:.4f}; "
              f"(b) {'ok' if b else 'FAIL'} learned {learned:.4f} = {100 * (1 - learned / mism):.1f}% below "
              f"mismatched, {100 * (learned / true_q - 1):+.1f}% vs true; "
              f"(c) {'ok' if c else 'FAIL'} xi5 {xi5:.5f} <= xi1 {xi1:.5f}; time={elapsed:.0f}s")
    print(report.to_text())
    assert criterion(6, ok, detail), detail


def test_7_metric_identities(comparison, criterion):
    report, _ = comparison
    examples = [
        (np.zeros((3, 3)), 0.0, 0.0),
        ([[3.0, 4.0, 0.0]], 5.0, 7.0),
        ([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], 1.0, 1.0),
    ]
    unit = all(srmse(e) == pytest.approx(r) and smae(e) == pytest.approx(a) for e, r, a in examples)
    bound = bool((report.smae <= np.sqrt(3) * report.srmse).all())
    ok = unit and bound
    detail = f"examples {'ok' if unit else 'FAIL'}; SMAE <= sqrt(3) SRMSE on all {report.srmse.size} runs: {bound}"
    assert criterion(7, ok, detail), detail


def test_8_cli_determinism(workdir, generated, trained, criterion):
    d2, m2 = workdir / "data2", workdir / "model2"
    assert main(["generate", "--seed", "0", "--out", str(d2)]) == 0
    assert main(["train", "--seed", "0", "--data", str(d2), "--out", str(m2)]) == 0
    pairs = [(generated[0] / "train.csv", d2 / "train.csv"), (generated[0] / "test.csv", d2 / "test.csv"),
             (trained[0], m2 / "model.json")]
    for tag in ("a", "b"):
        assert main(["evaluate", "--seed", "8", "--runs", "2", "--duration", "60", "--model", str(trained[0]),
                     "--out", str(workdir / f"eval_{tag}")]) == 0
        assert main(["run", "--seed", "8", "--strategy", "learned", "--model", str(trained[0]),
                     "--out", str(workdir / f"run_{tag}")]) == 0
    for name in ("report.txt", "report.csv", "config.json"):
        pairs.append((workdir / "eval_a" / name, workdir / "eval_b" / name))
    pairs.append((workdir / "run_a" / "run.csv", workdir / "run_b" / "run.csv"))
    same = [a.read_bytes() == b.read_bytes() for a, b in pairs]
    ok = all(same)
    detail = f"{sum(same)}/{len(same)} file pairs byte-identical (dataset, model, report, run)"
    assert criterion(8, ok, detail), detail
