import time

import numpy as np
import pytest

import switchtrack as st
from switchtrack import engine

TIMINGS: dict = {}


@pytest.fixture(scope="session")
def warm_kernels():
    """Compile the hot kernels once so timed tests measure steady state."""
    raw = st.PRESETS["sim-circle"]()
    raw["duration"] = 0.05
    engine.run(st.from_dict(raw))
    return True


@pytest.fixture(scope="session")
def sim_circle_logs(warm_kernels):
    """One 30 s sim-circle run per seed 0..9, shared across test modules."""
    sc = st.load_scenario(preset="sim-circle")
    logs = {}
    per_seed = {}
    for seed in range(10):
        t0 = time.perf_counter()
        logs[seed] = engine.run(sc, seed=seed)
        per_seed[seed] = time.perf_counter() - t0
    TIMINGS["sim_circle_per_seed"] = per_seed
    return logs


@pytest.fixture(scope="session")
def quad_log(warm_kernels):
    sc = st.load_scenario(preset="quad-integrator")
    t0 = time.perf_counter()
    log = engine.run(sc, seed=0)
    TIMINGS["quad"] = time.perf_counter() - t0
    return log


@pytest.fixture(scope="session")
def timings():
    return TIMINGS


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
