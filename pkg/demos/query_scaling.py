"""Query counts of amplitude estimation against rejection sampling.

Prints the benchmark table and its log-log slopes.  Run with
``python demos/query_scaling.py``.
"""

from qbiwafer.bench import fit_slopes, run_bench


def main():
    rows = run_bench()
    print(f"{'a':>8} {'eps':>7} {'a_hat':>8} {'grover':>8} {'rejection':>10} {'amplified':>10}")
    for r in rows:
        print(f"{r.a_true:8.4f} {r.epsilon:7.4f} {r.a_hat:8.4f} {r.grover_calls:8d} "
              f"{r.classical_attempts_baseline:10d} {r.prior_work_grover_calls:10d}")
    for k, v in fit_slopes(rows).items():
        print(f"{k:40s} {v:.4g}")


if __name__ == "__main__":
    main()
