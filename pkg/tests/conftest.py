import warnings
from functools import lru_cache

import numpy as np
import pytest

from choquard.harness import SweepConfig, run_sweep
from choquard.problem import PowerTerm, ProblemParams
from choquard.radial import build_grid
from choquard.riesz import build_kernel

# default parameter sets of the three regimes
DEFAULTS = {
    5: ProblemParams(5, 1.0, (PowerTerm(1.8, 1.0),)),
    4: ProblemParams(4, 1.0, (PowerTerm(2.2, 1.0),)),
    3: ProblemParams(3, 0.5, (PowerTerm(2.6, 1.0),)),
}


@lru_cache(maxsize=None)
def reference(N: int, alpha: float, M: int = 1024, Rmax: float = 200.0, core: float = 0.1):
    """Grid and kernel shared across tests."""
    grid = build_grid(N, Rmax, M, "loglinear", core=core)
    return grid, build_kernel(grid, alpha)


@lru_cache(maxsize=None)
def default_sweep(N: int, eps_min: float = 1e2, eps_max: float = 1e4, points: int = 9):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_sweep(SweepConfig(DEFAULTS[N], eps_min=eps_min, eps_max=eps_max, points=points),
                         keep_states=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def profile_reference(N: int, alpha: float):
    """Like ``reference`` but with Rmax large enough that the r^{-(N-2)} tail of W_1
    loses < 1e-3 of its Dirichlet energy (N = 3 needs Rmax ~ 1e4)."""
    return reference(N, alpha, Rmax=2e4 if N == 3 else 200.0)
