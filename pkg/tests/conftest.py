import time

import pytest

from protocols import cube_case, sphere_fit

CUBE_SEEDS = (0, 1, 2)
# (lambda_laplacian, tau): no regularizer, regularizer with edge sampling, regularizer without it
CUBE_ARMS = ((0.0, 20.0), (0.001, 20.0), (0.001, float("inf")))

_criteria = {}


@pytest.fixture(scope="session")
def criterion():
    """``criterion(n, ok, detail)`` records one acceptance line and returns ``ok``."""
    def record(n, ok, detail):
        _criteria[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, detail = _criteria[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def cube_runs():
    """Every (seed, arm) cube fit, timed; shared by the direction checks and the edge-law checks."""
    runs = {}
    for seed in CUBE_SEEDS:
        for lam, tau in CUBE_ARMS:
            t0 = time.perf_counter()
            r = cube_case(seed, lam, tau)
            r["seconds"] = time.perf_counter() - t0
            runs[seed, lam, tau] = r
    return runs


@pytest.fixture(scope="session")
def sphere_run():
    t0 = time.perf_counter()
    dc, model, hist, pts = sphere_fit()
    return {"chamfer": dc, "model": model, "points": pts, "seconds": time.perf_counter() - t0}
