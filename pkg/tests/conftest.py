import itertools
import math

import numpy as np
import pytest

from qbiwafer.bayesnet import BayesianNetwork, Cpt


def binom_lower(p: float, n: int, k_sigma: float = 3.0) -> float:
    """``p`` minus ``k_sigma`` binomial standard deviations for ``n`` trials."""
    return p - k_sigma * math.sqrt(p * (1 - p) / n)


def copy_chain(p0: float = 0.5) -> BayesianNetwork:
    """A -> B where B deterministically copies A."""
    return BayesianNetwork((Cpt.root(p0), Cpt.from_p1((0,), [0.0, 1.0])))


def dense_ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


def dense_on(op: np.ndarray, q: int, n: int) -> np.ndarray:
    """Single-qubit matrix ``op`` on qubit ``q`` of ``n`` (little-endian kron order)."""
    out = np.eye(1)
    for k in reversed(range(n)):
        out = np.kron(out, op if k == q else np.eye(2))
    return out


def dense_controlled(op: np.ndarray, controls, target: int, n: int) -> np.ndarray:
    dim = 2 ** n
    U = np.eye(dim, dtype=complex)
    for i in range(dim):
        if all(((i >> q) & 1) == b for q, b in controls) and not (i >> target) & 1:
            j = i | (1 << target)
            U[np.ix_([i, j], [i, j])] = op
    return U


def dense_dft(r: int, inverse: bool) -> np.ndarray:
    M = 2 ** r
    y, z = np.meshgrid(np.arange(M), np.arange(M), indexing="ij")
    sign = -1 if inverse else 1
    return np.exp(sign * 2j * math.pi * y * z / M) / math.sqrt(M)


def brute_joint(net: BayesianNetwork, a) -> float:
    p = 1.0
    for i, cpt in enumerate(net.cpts):
        row = sum(a[q] << j for j, q in enumerate(cpt.parents))
        p *= cpt.table[row, a[i]]
    return p


def brute_assignments(n: int):
    return [tuple(bits) for bits in itertools.product((0, 1), repeat=n)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(k: int, ok: bool, detail: str) -> bool:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES[k] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
