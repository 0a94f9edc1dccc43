import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gflsr.core import ModelParams, random_orthonormal  # noqa: E402
from gflsr.simulate import NoiseSpec, random_params, simulate_pls  # noqa: E402

# criterion id -> list of (part, passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for ac in sorted(ACCEPTANCE, key=lambda k: int(k[2:])):
        parts = ACCEPTANCE[ac]
        ok = all(p[1] for p in parts if p[1] is not None)
        skipped = all(p[1] is None for p in parts)
        status = "SKIP" if skipped else ("PASS" if ok else "FAIL")
        detail = "; ".join(f"{name}: {'skip' if res is None else ('ok' if res else 'FAIL')} ({d})"
                           for name, res, d in parts)
        terminalreporter.write_line(f"{ac} {status}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_problem():
    """A noisy p=6, q=5, H=2 dataset with its parameters."""
    P = random_params(6, 5, 2, 7, min_ratio=1.5)
    noise = NoiseSpec("B", 0.05, 0.05, sigma1_sq=0.05)
    data, gt = simulate_pls(P, 200, noise, 8)
    return P, data, gt


def sim2_params(seed, p=20, q=20):
    rng = np.random.default_rng(seed)
    return ModelParams(random_orthonormal(p, 3, rng), random_orthonormal(q, 3, rng),
                       [9.0, 6.0, 4.0], [5.0, 3.0, 2.0])
