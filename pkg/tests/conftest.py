"""Shared fixtures: the worked CARMA(3,2) configuration used across suites."""
import numpy as np
import pytest

from slcarma import CarmaModel, NormalJumps, PeriodicPartition, SubordinatorSpec

GOLDEN_LENGTHS = (2.0, 2.0, 2.0, 2.0, 1.0, 1.0, 2.0)
GOLDEN_MASSES = (6.0, 4.0, 2.0, 10.0, 4.0, 8.0, 12.0)
GOLDEN_ROOTS = (complex(-1.0, 0.0), complex(-2.0, 1.0), complex(-2.0, -1.0))
GOLDEN_B = (0.5, 2.0, 1.0)
GOLDEN_PERIOD = 12.0
GOLDEN_TOTAL_MASS = 46.0


def make_golden_spec(horizon_periods: int, gamma: float = 0.0) -> SubordinatorSpec:
    return SubordinatorSpec(
        gamma=gamma,
        partition=PeriodicPartition(lengths=GOLDEN_LENGTHS, masses=GOLDEN_MASSES),
        jumps=NormalJumps(mean=3.0, var=1.0),
        horizon_periods=horizon_periods,
    )


@pytest.fixture(scope="session")
def golden_partition():
    return PeriodicPartition(lengths=GOLDEN_LENGTHS, masses=GOLDEN_MASSES)


@pytest.fixture(scope="session")
def golden_jumps():
    return NormalJumps(mean=3.0, var=1.0)


@pytest.fixture(scope="session")
def golden_spec():
    return make_golden_spec(40)


@pytest.fixture(scope="session")
def golden_model():
    return CarmaModel.from_roots(GOLDEN_ROOTS, b=GOLDEN_B)


def sample_variance_se(x: np.ndarray) -> float:
    """Standard error of the sample variance via the fourth central moment."""
    x = np.asarray(x, dtype=float)
    v = x.var(ddof=1)
    m4 = np.mean((x - x.mean()) ** 4)
    return float(np.sqrt((m4 - v * v) / x.size))
