import numpy as np
import pytest
from hypothesis import strategies as st

from statesecrecy.harness import example_scenario, run_monte_carlo
from statesecrecy.sysmodel import validate_system

EXAMPLE_A = np.array([[1.2, 0.0], [0.0, 0.7]])
EXAMPLE_Q = np.array([[1.0, 0.8], [0.8, 1.0]])
EXAMPLE_L = np.array([[1.2, 0.582857142857], [0.0, 1.428571428571]])

# filled by test_acceptance; printed at the end of the run
ACCEPTANCE = {}


def rel_err(a, b):
    """Entrywise error relative to max(1, |b|)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)))) if a.size else 0.0


def random_spd(rng, n, floor=0.3):
    M = rng.standard_normal((n, n))
    return M @ M.T / n + floor * np.eye(n)


def _block(rng, mag, size):
    if size == 1:
        return np.array([[mag * rng.choice([-1.0, 1.0])]])
    th = rng.uniform(0.3, 2.8)
    c, s = np.cos(th), np.sin(th)
    return mag * np.array([[c, -s], [s, c]])


def random_system(rng, n=None, n_u=None, coupling=False):
    """Random valid system in real Jordan block order with distinct eigenvalue
    magnitudes (unstable in [1.05, 1.6], stable in [0.1, 0.9])."""
    n = int(rng.integers(1, 5)) if n is None else n
    n_u = int(rng.integers(0, n + 1)) if n_u is None else n_u
    blocks = []
    used = set()

    def mag(lo, hi):
        while True:
            m = round(float(rng.uniform(lo, hi)), 3)
            if m not in used:
                used.add(m)
                return m

    for count, lo, hi in ((n_u, 1.05, 1.6), (n - n_u, 0.1, 0.9)):
        left = count
        while left:
            size = 2 if left >= 2 and rng.random() < 0.3 else 1
            blocks.append(_block(rng, mag(lo, hi), size))
            left -= size
    A = np.zeros((n, n))
    i = 0
    for b in blocks:
        A[i : i + len(b), i : i + len(b)] = b
        i += len(b)
    if coupling and 0 < n_u < n:
        A[:n_u, n_u:] = 0.3 * rng.standard_normal((n_u, n - n_u))
    return validate_system(A, random_spd(rng, n), random_spd(rng, n))


@st.composite
def systems(draw, min_n=1, max_n=4, coupling=False):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(min_n, max_n))
    return random_system(np.random.default_rng(seed), n=n, coupling=coupling)


@pytest.fixture(scope="session")
def example_system():
    return example_scenario().system


@pytest.fixture(scope="session")
def example_mc():
    """500 trials x 120 steps of the two-state example, full code."""
    return run_monte_carlo(example_scenario(), verify=False)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
