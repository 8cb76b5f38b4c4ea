"""Posterior inference P(Y | X = x) from two families of amplitude estimates.

The evidence probability P(X = x) is estimated once and every joint
probability P(Y = y, X = x) is estimated separately, each at relative error
``epsilon / 3`` and failure probability ``delta / 2``.  Their ratio is then
within relative error ``epsilon`` of the posterior entry.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .bayesnet import Assignment
from .errors import DuplicateQubit, InvalidConfig, ValidationError, ZeroEvidenceProbability
from .qae import AmplitudeEstimate, QaeConfig, estimate_amplitude, predicted_calls
from .qsim import DEFAULT_QUBIT_CAP, Circuit, EvidencePattern


@dataclass(frozen=True)
class InferenceRequest:
    evidence: Mapping[int, int]
    targets: tuple[int, ...]
    epsilon: float
    delta: float
    a_min_evidence: float
    seed: int = 0
    # optional per-entry lower bounds on P(Y = y, X = x), keyed by target values
    a_min_joint: Mapping[tuple[int, ...], float] | None = None
    qubit_cap: int = DEFAULT_QUBIT_CAP
    method: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "evidence", {int(k): int(v) for k, v in dict(self.evidence).items()})
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(set(self.targets)) != len(self.targets):
            raise DuplicateQubit(f"repeated target in {self.targets}")
        overlap = set(self.targets) & set(self.evidence)
        if overlap:
            raise ValidationError(f"variables {sorted(overlap)} are both evidence and target")
        # validates epsilon, delta and the bounds eagerly
        self.evidence_config()
        for y in self.outcomes():
            self.joint_config(y)

    def outcomes(self) -> list[tuple[int, ...]]:
        return list(itertools.product((0, 1), repeat=len(self.targets)))

    def evidence_config(self) -> QaeConfig:
        return QaeConfig(self.epsilon / 3, self.delta / 2, self.a_min_evidence,
                         qubit_cap=self.qubit_cap, method=self.method)

    def joint_config(self, y: tuple[int, ...]) -> QaeConfig:
        a_min = self.a_min_evidence * 2.0 ** -len(self.targets)
        if self.a_min_joint is not None and tuple(y) in self.a_min_joint:
            a_min = self.a_min_joint[tuple(y)]
        return self.evidence_config().with_(a_min=a_min)


@dataclass(frozen=True)
class EstimatedPosterior:
    targets: tuple[int, ...]
    probs: dict[tuple[int, ...], float]
    numerators: dict[tuple[int, ...], AmplitudeEstimate] = field(repr=False, default_factory=dict)
    denominator: AmplitudeEstimate | None = field(repr=False, default=None)

    @property
    def total_grover_calls(self) -> int:
        calls = self.denominator.total_grover_calls if self.denominator else 0
        return calls + sum(e.total_grover_calls for e in self.numerators.values())

    def normalized(self) -> dict[tuple[int, ...], float]:
        """Entries rescaled to sum to one, for display only."""
        s = sum(self.probs.values())
        return {k: v / s for k, v in self.probs.items()} if s > 0 else dict(self.probs)

    def as_array(self) -> np.ndarray:
        return np.array([self.probs[y] for y in itertools.product((0, 1), repeat=len(self.targets))])

    def diagnostics(self) -> dict:
        return {
            "denominator": self.denominator.a_hat if self.denominator else None,
            "numerators": {"".join(map(str, y)): e.a_hat for y, e in self.numerators.items()},
            "total_grover_calls": self.total_grover_calls,
        }


def infer_posterior(encoder: Circuit, req: InferenceRequest) -> EstimatedPosterior:
    """Estimate each entry of P(Y | X = x); entries are not renormalized.

    All estimations reuse ``req.seed``, so estimations of equal amplitude
    under equal settings return equal values.
    """
    evidence = encoder.pattern(req.evidence)
    den = estimate_amplitude(encoder, evidence, req.evidence_config(), req.seed)
    if den.a_hat == 0:
        raise ZeroEvidenceProbability(f"estimated P(evidence) is 0 for {req.evidence}")
    if not req.targets:
        return EstimatedPosterior((), {(): 1.0}, {}, den)
    numerators, probs = {}, {}
    for y in req.outcomes():
        joint = encoder.pattern({**req.evidence, **dict(zip(req.targets, y))})
        numerators[y] = estimate_amplitude(encoder, joint, req.joint_config(y), req.seed)
        probs[y] = numerators[y].a_hat / den.a_hat
    return EstimatedPosterior(req.targets, probs, numerators, den)


def restrict_missing(assignment: Assignment, circuit: Circuit | None = None) -> EvidencePattern | dict[int, int]:
    """Evidence over the observed variables only.

    Leaving a variable out of the pattern sums its amplitude mass over both
    values, which is exactly classical marginalization.  With a circuit the
    result is a qubit pattern, otherwise a ``{variable: bit}`` map.
    """
    observed = assignment.observed()
    return circuit.pattern(observed) if circuit is not None else observed


def posterior_cost(req: InferenceRequest) -> int:
    """Grover calls of one evidence estimation plus one per target outcome."""
    total = predicted_calls(req.evidence_config())
    if req.targets:
        total += sum(predicted_calls(req.joint_config(y)) for y in req.outcomes())
    return total


def parse_assignment(text: str) -> dict[int, int]:
    """``"3=1,5=0"`` -> ``{3: 1, 5: 0}``."""
    out: dict[int, int] = {}
    for part in filter(None, (s.strip() for s in text.split(","))):
        k, sep, v = part.partition("=")
        if not sep or v.strip() not in ("0", "1") or not k.strip().isdigit():
            raise InvalidConfig(f"bad evidence item {part!r}; expected index=bit")
        if int(k) in out:
            raise DuplicateQubit(f"variable {k} given twice")
        out[int(k)] = int(v)
    return out


def parse_targets(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise InvalidConfig(f"bad target list {text!r}") from None

