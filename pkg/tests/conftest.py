import numpy as np
import pytest

from hcfnav.datagen import build_dataset, generate_baselines
from hcfnav.trees import fit_ensemble


@pytest.fixture(scope="session")
def small_model():
    """A 10-tree ensemble trained on 100 s baselines, quick enough for unit tests."""
    train, _ = build_dataset(generate_baselines(duration=100.0), seed=0)
    return fit_ensemble(train.features, train.label, n_trees=10, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def baselines():
    return generate_baselines()


@pytest.fixture(scope="session")
def full_dataset(baselines):
    """The default dataset recipe, built once per session: (train, test)."""
    return build_dataset(baselines, seed=0)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(pytestconfig):
    """
    Record an acceptance verdict: ``criterion(n, ok, detail)`` stores one
    line for the terminal summary and returns ``ok``.
    """
    log = pytestconfig.stash.setdefault(_ACCEPTANCE, [])

    def record(n, ok, detail=""):
        log.append((str(n), bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(_ACCEPTANCE, [])
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(log, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
