"""Estimate a conditional probability by amplitude estimation and compare it to the exact answer.

Run with ``python demos/posterior_inference.py``.
"""

import numpy as np

from qbiwafer.bayesnet import evidence_probability, exact_posterior, random_tree_network
from qbiwafer.qbi import InferenceRequest, infer_posterior, posterior_cost
from qbiwafer.qsim import encode_network


def main():
    rng = np.random.default_rng(3)
    net = random_tree_network(6, rng)
    evidence, targets = {1: 1, 4: 0}, (2,)

    exact = exact_posterior(net, evidence, targets)
    p_ev = evidence_probability(net, evidence)
    print(f"P(evidence) = {p_ev:.4f}")
    print("exact posterior:", {k: round(v, 4) for k, v in exact.probs.items()})

    circuit = encode_network(net).circuit
    for eps in (0.2, 0.1, 0.05):
        req = InferenceRequest(evidence, targets, eps, 0.1, a_min_evidence=p_ev, seed=1)
        est = infer_posterior(circuit, req)
        shown = {k: round(v, 4) for k, v in est.probs.items()}
        print(f"epsilon={eps:<5} estimate={shown} grover_calls={est.total_grover_calls} "
              f"(predicted {posterior_cost(req)})")


if __name__ == "__main__":
    main()
