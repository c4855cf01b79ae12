import functools

import pytest

from boussinesq_couette.diagnostics import collect_run, diagnose_run
from boussinesq_couette.solver import SimConfig

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(cid, passed, detail):
    ACCEPTANCE[cid] = (bool(passed), detail)
    print(f"[criterion {cid}] {'PASS' if passed else 'FAIL'} {detail}")


@functools.lru_cache(maxsize=None)
def reference_run(n):
    """The eps = 1e-3, nu = gamma = 1, Ly = 8, T = 50 run at ``n x n`` (cached)."""
    import time

    cfg = SimConfig(nu=1.0, gamma=1.0, epsilon=1e-3, T=50.0, Nx=n, Ny=n, Ly=8.0)
    t0 = time.perf_counter()
    states, hist = collect_run(cfg)
    elapsed = time.perf_counter() - t0
    report = diagnose_run(states, hist, cfg.gamma_sq, cfg.epsilon)
    return cfg, states, hist, report, elapsed


@pytest.fixture(scope="session")
def run128():
    return reference_run(128)


@pytest.fixture(scope="session")
def run256():
    return reference_run(256)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"criterion {cid:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
