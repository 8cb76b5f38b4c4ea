import math

import numpy as np
import pytest

from qbiwafer.bench import (
    COLUMNS,
    amplification_rounds,
    amplified_success,
    bench_network,
    bench_point,
    chernoff_samples,
    fit_slopes,
    run_bench,
    to_csv,
)
from qbiwafer.errors import InvalidConfig
from qbiwafer.qsim import encode_network


def test_chernoff():
    assert chernoff_samples(0.1, 0.1) == math.ceil(300 * math.log(20))


@pytest.mark.parametrize("a,k", [(1.0, 0), (0.5, 1), (0.25, 1), (1 / 64, 6)])
def test_rounds(a, k):
    assert amplification_rounds(a) == k


@pytest.mark.parametrize("a", [0.25, 1 / 16, 1 / 64, 0.3])
def test_amplified_success_closed_form(a):
    c = encode_network(bench_network(a)).circuit
    k = amplification_rounds(a)
    theta = math.asin(math.sqrt(a))
    assert amplified_success(c, c.pattern({0: 1}), k) == pytest.approx(math.sin((2 * k + 1) * theta) ** 2)


def test_single_point():
    rows = run_bench([0.25], [0.1], 0.1, 0)
    assert len(rows) == 1
    r = rows[0]
    assert r.m == 126 and r.T == 7 and r.J == 1 and r.grover_calls == 127
    assert r.classical_attempts_baseline >= chernoff_samples(0.1, 0.1)
    assert r.prior_work_grover_calls >= chernoff_samples(0.1, 0.1)
    text = to_csv(rows).splitlines()
    assert text[0] == ",".join(COLUMNS) and len(text) == 2


def test_reproducible():
    assert bench_point(1 / 16, 0.05, 0.1, 3) == bench_point(1 / 16, 0.05, 0.1, 3)


def test_invalid():
    with pytest.raises(InvalidConfig):
        bench_point(0.0, 0.1, 0.1, 0)
    with pytest.raises(InvalidConfig):
        run_bench([], [0.1])


def test_slopes():
    rows = run_bench()
    assert len(rows) == 12
    s = fit_slopes(rows)
    assert s["grover_calls_vs_a"] == pytest.approx(-0.5, abs=0.15)
    assert s["classical_attempts_baseline_vs_a"] == pytest.approx(-1.0, abs=0.15)
    assert s["grover_calls_vs_inv_eps"] == pytest.approx(1.0, abs=0.15)
    assert s["classical_attempts_baseline_vs_inv_eps"] == pytest.approx(2.0, abs=0.15)
    assert s["prior_work_grover_calls_vs_inv_eps"] == pytest.approx(2.0, abs=0.15)
    assert np.isfinite(s["prior_work_grover_calls_vs_a"])
