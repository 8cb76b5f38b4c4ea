"""Query-count comparison: amplitude estimation vs rejection sampling vs amplified sampling.

The benchmark network has two nodes: ``X0`` with ``P(X0 = 1) = a`` is the
evidence and a child ``X1`` is the target.  For every ``(a, epsilon)`` grid
point three costs are measured:

* ``grover_calls``: Grover applications spent by :func:`estimate_amplitude`;
* ``classical_attempts_baseline``: ancestral samples drawn by rejection
  sampling until ``K = ceil(3 ln(2/delta) / epsilon^2)`` samples are accepted,
  enough for a relative-error ``epsilon`` estimate of ``a`` by a
  multiplicative Chernoff bound;
* ``prior_work_grover_calls``: the same ``K`` accepted samples drawn after
  ``k = floor(pi / (4 theta))`` rounds of amplitude amplification each,
  counting ``k`` Grover calls per attempt.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .bayesnet import BayesianNetwork, Cpt, forward_sample_posterior
from .errors import InvalidConfig
from .qae import QaeConfig, estimate_amplitude, repetitions
from .qsim import StateVector, encode_network, grover_apply, measure_amplitude

COLUMNS = (
    "a_true", "epsilon", "delta", "m", "T", "J", "a_hat", "rel_err",
    "grover_calls", "classical_attempts_baseline", "prior_work_grover_calls",
)

DEFAULT_A_GRID = (1 / 4, 1 / 16, 1 / 64)
DEFAULT_EPS_GRID = (0.1, 0.05, 0.025, 0.0125)


@dataclass(frozen=True)
class BenchRow:
    a_true: float
    epsilon: float
    delta: float
    m: int
    T: int
    J: int
    a_hat: float
    rel_err: float
    grover_calls: int
    classical_attempts_baseline: int
    prior_work_grover_calls: int


def bench_network(a: float) -> BayesianNetwork:
    return BayesianNetwork((Cpt.root(1.0 - a), Cpt.from_p1((0,), [0.5, 0.5])))


def chernoff_samples(epsilon: float, delta: float) -> int:
    return math.ceil(3.0 * math.log(2.0 / delta) / epsilon ** 2)


def amplification_rounds(a: float) -> int:
    # tolerance keeps exact ratios such as a = 1/2 from rounding down
    return int(math.floor(math.pi / (4.0 * math.asin(math.sqrt(a))) + 1e-9))


def amplified_success(encoder, pattern, k: int) -> float:
    """Probability of landing in the evidence subspace after ``k`` Grover rounds."""
    s = encoder.apply(StateVector.zero(encoder.n_qubits))
    for _ in range(k):
        s = grover_apply(encoder, pattern, s)
    return measure_amplitude(s, pattern)


def bench_point(a: float, epsilon: float, delta: float, seed: int) -> BenchRow:
    if not 0 < a <= 1:
        raise InvalidConfig(f"a must lie in (0, 1], got {a}")
    net = bench_network(a)
    enc = encode_network(net).circuit
    pattern = enc.pattern({0: 1})
    est = estimate_amplitude(enc, pattern, QaeConfig(epsilon, delta, a), seed)

    K = chernoff_samples(epsilon, delta)
    _, stats = forward_sample_posterior(net, {0: 1}, [1], K, seed)

    k = amplification_rounds(a)
    p_success = amplified_success(enc, pattern, k)
    rng = np.random.default_rng([seed, 1])
    attempts = K + int(rng.negative_binomial(K, min(p_success, 1.0))) if p_success < 1 else K

    return BenchRow(
        a_true=a, epsilon=epsilon, delta=delta, m=est.grover_power, T=est.T, J=repetitions(delta),
        a_hat=est.a_hat, rel_err=abs(est.a_hat - a) / a, grover_calls=est.total_grover_calls,
        classical_attempts_baseline=stats.attempts, prior_work_grover_calls=attempts * k,
    )


def run_bench(
    a_grid: Sequence[float] = DEFAULT_A_GRID,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    delta: float = 0.1,
    seed: int = 0,
) -> list[BenchRow]:
    """Every ``(a, epsilon)`` pair of the grids, in ``a``-major order."""
    if not a_grid or not eps_grid:
        raise InvalidConfig("grids must be non-empty")
    return [bench_point(a, e, delta, seed) for a, e in itertools.product(a_grid, eps_grid)]


def _slope(x, y) -> float | None:
    if len(set(x)) < 2:
        return None
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def fit_slopes(rows: Sequence[BenchRow]) -> dict:
    """Log-log slopes vs ``a`` (at the first epsilon) and vs ``1/epsilon`` (at the first ``a``)."""
    eps0, a0 = rows[0].epsilon, rows[0].a_true
    by_a = [r for r in rows if r.epsilon == eps0]
    by_e = [r for r in rows if r.a_true == a0]
    out = {"epsilon_fixed": eps0, "a_fixed": a0}
    for name in ("grover_calls", "classical_attempts_baseline", "prior_work_grover_calls"):
        out[f"{name}_vs_a"] = _slope([r.a_true for r in by_a], [getattr(r, name) for r in by_a])
        out[f"{name}_vs_inv_eps"] = _slope([1 / r.epsilon for r in by_e], [getattr(r, name) for r in by_e])
    return out


def to_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in asdict(r).items()})
    return buf.getvalue()
