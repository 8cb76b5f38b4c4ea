"""Amplitude estimation with a relative-error guarantee.

The Grover power ``m`` is chosen from a caller-supplied lower bound
``a_min`` on the amplitude, phase estimation is run ``J`` times with
independent seeds and the per-run estimates are averaged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig
from .qsim import (
    DEFAULT_QUBIT_CAP,
    Circuit,
    EvidencePattern,
    check_cap,
    qpe_distribution,
    readout_angle,
    sample_outcome,
)


@dataclass(frozen=True)
class QaeConfig:
    epsilon: float
    delta: float
    a_min: float
    T_override: int | None = None
    qubit_cap: int = DEFAULT_QUBIT_CAP
    method: str = "auto"

    def __post_init__(self):
        if not 0 < self.epsilon < 1 / 3:
            raise InvalidConfig(f"epsilon must lie in (0, 1/3), got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise InvalidConfig(f"delta must lie in (0, 1), got {self.delta}")
        if not 0 < self.a_min <= 1:
            raise InvalidConfig(f"a_min must lie in (0, 1], got {self.a_min}")
        if self.T_override is not None and self.T_override < 1:
            raise InvalidConfig("T_override must be a positive integer")
        if self.method not in ("auto", "full", "subspace"):
            raise InvalidConfig(f"unknown method {self.method!r}")

    def with_(self, **kw) -> "QaeConfig":
        d = dict(self.__dict__)
        d.update(kw)
        return QaeConfig(**d)


@dataclass(frozen=True)
class AmplitudeEstimate:
    a_hat: float
    runs: int
    grover_power: int
    total_grover_calls: int
    T: int
    samples: tuple[float, ...] = field(default=(), repr=False)


# rational approximation of erfinv (M. Giles), refined by Halley steps
_CENTRAL = (2.81022636e-08, 3.43273939e-07, -3.5233877e-06, -4.39150654e-06, 0.00021858087,
            -0.00125372503, -0.00417768164, 0.246640727, 1.50140941)
_TAIL = (-0.000200214257, 0.000100950558, 0.00134934322, -0.00367342844, 0.00573950773,
         -0.0076224613, 0.00943887047, 1.00167406, 2.83297682)


def _horner(coefs, w):
    p = 0.0
    for c in coefs:
        p = p * w + c
    return p


def erfinv(x: float) -> float:
    """Inverse error function on (-1, 1), accurate to about 1e-14."""
    if not -1 < x < 1:
        if x in (-1.0, 1.0):
            return math.copysign(math.inf, x)
        raise InvalidConfig(f"erfinv argument {x} outside (-1, 1)")
    if x == 0:
        return 0.0
    s, ax = math.copysign(1.0, x), abs(x)
    tail = 1.0 - ax
    w = -math.log(tail * (1.0 + ax))
    y = ax * (_horner(_CENTRAL, w - 2.5) if w < 5 else _horner(_TAIL, math.sqrt(w) - 3.0))
    # the fit targets single precision; beyond 1 - x ~ 1e-8 it needs more steps
    for _ in range(2 if w < 16 else 12):
        # residual through erfc keeps precision when x is close to 1
        r = (tail - math.erfc(y)) if ax > 0.5 else (math.erf(y) - ax)
        d = 2.0 / math.sqrt(math.pi) * math.exp(-y * y)
        y -= r / (d + r * y)
    return s * y


def grover_power(cfg: QaeConfig) -> int:
    return 2 * math.ceil(math.pi / (math.sqrt(cfg.a_min) * cfg.epsilon))


def repetitions(delta: float) -> int:
    if not 0 < delta < 1:
        raise InvalidConfig(f"delta must lie in (0, 1), got {delta}")
    e = erfinv(1.0 - delta)
    return max(1, math.ceil(2 * (math.pi ** 2 - 8) * e * e / math.pi ** 2))


def ancillas(cfg: QaeConfig) -> int:
    if cfg.T_override is not None:
        return cfg.T_override
    return math.ceil(math.log2(grover_power(cfg) + 1))


def predicted_calls(cfg: QaeConfig) -> int:
    return repetitions(cfg.delta) * (2 ** ancillas(cfg) - 1)


def estimate_amplitude(encoder: Circuit, p: EvidencePattern, cfg: QaeConfig, seed) -> AmplitudeEstimate:
    """Estimate ``a = <psi|P|psi>`` for ``psi`` prepared by ``encoder``.

    Every repetition measures the same phase register distribution, so it is
    computed once; repetition ``j`` samples it with the stream ``(*seed, j)``.
    ``seed`` is a non-negative integer or a tuple of them.
    """
    m = grover_power(cfg)
    T = ancillas(cfg)
    J = repetitions(cfg.delta)
    check_cap(encoder.n_qubits + T, cfg.qubit_cap)
    probs = qpe_distribution(encoder, p, T, cfg.method, cfg.qubit_cap)
    key = [int(seed)] if np.ndim(seed) == 0 else [int(s) for s in seed]
    samples = []
    for j in range(J):
        y = sample_outcome(probs, np.random.default_rng(key + [j]))
        samples.append(math.sin(readout_angle(y, T)) ** 2)
    a_hat = 0.0
    for a_j in samples:
        a_hat += a_j
    a_hat = min(max(a_hat / J, 0.0), 1.0)
    return AmplitudeEstimate(a_hat, J, m, J * (2 ** T - 1), T, tuple(samples))


def query_count(est: AmplitudeEstimate) -> int:
    return est.runs * (2 ** est.T - 1)
