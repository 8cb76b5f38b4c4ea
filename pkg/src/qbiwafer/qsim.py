"""Dense statevector simulator restricted to the gates amplitude estimation needs.

Conventions
-----------
* Basis index bit ``k`` is qubit ``k`` (little-endian).
* Gate kernels work in place on arrays of shape ``(..., 2**n)``; leading axes
  are independent batch entries (used for controlled Grover powers).
* The public ``apply_*`` functions are pure: they copy the input state.
* ``RY(theta) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]]``.
* The Grover operator is ``G = U V`` with ``U = 2|psi><psi| - I`` and
  ``V = I - 2P``, i.e. ``-O S_0 O^dagger S_x``.  The leading minus sign puts
  the eigenphases of ``G`` at ``+-2 theta`` with ``sin^2 theta = <psi|P|psi>``.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .bayesnet import BayesianNetwork, topological_sort, validate_dag
from .errors import DuplicateQubit, IndexOutOfRange, TooManyQubits, ValidationError

DEFAULT_QUBIT_CAP = 26

RY = "RY"
CRY = "CRY"
REFLECT_ZERO = "ReflectZero"
REFLECT_PATTERN = "ReflectPattern"
HADAMARD = "Hadamard"
CONTROLLED_GROVER_POWER = "ControlledGroverPower"
INV_QFT = "InvQft"

_SQRT1_2 = 1.0 / math.sqrt(2.0)


@dataclass
class StateVector:
    amps: np.ndarray
    n_qubits: int

    def __post_init__(self):
        self.amps = np.ascontiguousarray(self.amps, dtype=complex)
        if self.amps.shape != (2 ** self.n_qubits,):
            raise ValidationError(f"{self.amps.shape} amplitudes for {self.n_qubits} qubits")

    @classmethod
    def zero(cls, n_qubits: int, qubit_cap: int = DEFAULT_QUBIT_CAP) -> "StateVector":
        check_cap(n_qubits, qubit_cap)
        amps = np.zeros(2 ** n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps, n_qubits)

    def copy(self) -> "StateVector":
        return StateVector(self.amps.copy(), self.n_qubits)

    def norm(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def to_csv(self) -> str:
        lines = ["index,re,im"]
        lines += [f"{i},{a.real!r},{a.imag!r}" for i, a in enumerate(self.amps)]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EvidencePattern:
    """Required bit per qubit; the projector P selects matching basis states."""

    pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        pairs = tuple((int(q), int(b)) for q, b in self.pairs)
        qubits = [q for q, _ in pairs]
        if len(set(qubits)) != len(qubits):
            raise DuplicateQubit(f"pattern repeats a qubit: {qubits}")
        if any(b not in (0, 1) for _, b in pairs):
            raise ValidationError("pattern bits must be 0 or 1")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return len(self.pairs)

    def merged(self, other: "EvidencePattern") -> "EvidencePattern":
        return EvidencePattern(self.pairs + other.pairs)


@dataclass(frozen=True)
class GateOp:
    kind: str
    target: int | None = None
    theta: float = 0.0
    controls: tuple[tuple[int, int], ...] = ()
    qubits: tuple[int, ...] = ()
    pattern: EvidencePattern | None = None
    power: int = 1

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.target is not None:
            d["target"] = self.target
        if self.kind in (RY, CRY):
            d["theta"] = self.theta
        if self.controls:
            d["controls"] = [list(c) for c in self.controls]
        if self.qubits:
            d["qubits"] = list(self.qubits)
        if self.pattern is not None:
            d["pattern"] = [list(p) for p in self.pattern.pairs]
        if self.kind == CONTROLLED_GROVER_POWER:
            d["power"] = self.power
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "GateOp":
        pattern = d.get("pattern")
        return cls(
            kind=d["kind"],
            target=d.get("target"),
            theta=float(d.get("theta", 0.0)),
            controls=tuple(tuple(c) for c in d.get("controls", ())),
            qubits=tuple(d.get("qubits", ())),
            pattern=None if pattern is None else EvidencePattern(tuple(tuple(p) for p in pattern)),
            power=int(d.get("power", 1)),
        )


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list.  ``labels[k]`` names what qubit ``k`` represents."""

    n_qubits: int
    ops: tuple[GateOp, ...]
    labels: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(self, "labels", tuple(self.labels))
        for op in self.ops:
            _check_op(op, self.n_qubits)

    @property
    def gate_count(self) -> int:
        return len(self.ops)

    def inverse(self) -> "Circuit":
        inv = []
        for op in reversed(self.ops):
            if op.kind in (RY, CRY):
                inv.append(GateOp(op.kind, op.target, -op.theta, op.controls))
            elif op.kind in (REFLECT_ZERO, REFLECT_PATTERN, HADAMARD):
                inv.append(op)
            else:
                raise ValidationError(f"{op.kind} has no inverse in this simulator")
        return Circuit(self.n_qubits, tuple(inv), self.labels)

    def qubit_of(self, label: int) -> int:
        return self.labels.index(label)

    def pattern(self, values: Mapping[int, int]) -> EvidencePattern:
        """Evidence pattern for ``{variable: bit}`` using this circuit's labels."""
        pos = {v: k for k, v in enumerate(self.labels)}
        try:
            return EvidencePattern(tuple(sorted((pos[int(v)], int(b)) for v, b in values.items())))
        except KeyError as exc:
            raise IndexOutOfRange(f"variable {exc.args[0]} is not encoded by this circuit") from None

    def apply(self, state: StateVector) -> StateVector:
        out = state.copy()
        self.apply_inplace(out.amps, out.n_qubits)
        return out

    def apply_inplace(self, psi: np.ndarray, n: int) -> None:
        """Apply to the lowest ``self.n_qubits`` qubits of each row of ``psi``."""
        if n < self.n_qubits:
            raise IndexOutOfRange(f"circuit needs {self.n_qubits} qubits, state has {n}")
        view = psi.reshape(-1, 2 ** self.n_qubits)
        for op in self.ops:
            _apply_op(view, self.n_qubits, op)

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": "QC-JSON",
                "version": 1,
                "n_qubits": self.n_qubits,
                "labels": list(self.labels),
                "ops": [op.to_dict() for op in self.ops],
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        d = json.loads(text)
        if d.get("format") != "QC-JSON" or d.get("version") != 1:
            raise ValidationError("not a QC-JSON v1 document")
        return cls(int(d["n_qubits"]), tuple(GateOp.from_dict(o) for o in d["ops"]), tuple(d.get("labels", ())))


class Encoding(NamedTuple):
    circuit: Circuit
    state: StateVector


def check_cap(n_qubits: int, qubit_cap: int = DEFAULT_QUBIT_CAP) -> None:
    if n_qubits > qubit_cap:
        raise TooManyQubits(f"{n_qubits} qubits exceed the cap of {qubit_cap}")


def _check_qubits(qubits: Iterable[int], n: int) -> None:
    qubits = list(qubits)
    for q in qubits:
        if not 0 <= q < n:
            raise IndexOutOfRange(f"qubit {q} not in [0, {n})")
    if len(set(qubits)) != len(qubits):
        raise DuplicateQubit(f"qubit repeated in {qubits}")


def _check_op(op: GateOp, n: int) -> None:
    if op.kind in (RY, CRY, HADAMARD):
        _check_qubits([op.target, *(q for q, _ in op.controls)], n)
        if not math.isfinite(op.theta):
            raise ValidationError("rotation angle must be finite")
        if any(b not in (0, 1) for _, b in op.controls):
            raise ValidationError("control polarity must be 0 or 1")
    elif op.kind == REFLECT_PATTERN:
        _check_qubits([q for q, _ in op.pattern.pairs], n)
    elif op.kind == INV_QFT:
        _check_qubits(op.qubits, n)
    elif op.kind != REFLECT_ZERO:
        raise ValidationError(f"unsupported gate kind {op.kind!r}")


# --- kernels -------------------------------------------------------------------


def _index(n: int, fixed: Iterable[tuple[int, int]]) -> tuple:
    # axis 0 is the batch; qubit q lives on axis 1 + (n - 1 - q)
    idx = [slice(None)] * (n + 1)
    for q, b in fixed:
        idx[n - q] = b
    return tuple(idx)


def _rotate(psi2: np.ndarray, n: int, target: int, controls, m00, m01, m10, m11) -> None:
    t = psi2.reshape((psi2.shape[0],) + (2,) * n)
    i0 = _index(n, [*controls, (target, 0)])
    i1 = _index(n, [*controls, (target, 1)])
    a0 = t[i0].copy()
    a1 = t[i1]
    t[i0] = m00 * a0 + m01 * a1
    t[i1] = m10 * a0 + m11 * a1


def _ry_inplace(psi2, n, target, theta, controls=()):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    _rotate(psi2, n, target, controls, c, -s, s, c)


def _hadamard_inplace(psi2, n, target):
    h = _SQRT1_2
    _rotate(psi2, n, target, (), h, h, h, -h)


def _reflect_pattern_inplace(psi2, n, pattern: EvidencePattern):
    t = psi2.reshape((psi2.shape[0],) + (2,) * n)
    t[_index(n, pattern.pairs)] *= -1


def _reflect_zero_inplace(psi2):
    psi2[:, 0] *= -1


def _apply_op(psi2: np.ndarray, n: int, op: GateOp) -> None:
    if op.kind in (RY, CRY):
        _ry_inplace(psi2, n, op.target, op.theta, op.controls)
    elif op.kind == HADAMARD:
        _hadamard_inplace(psi2, n, op.target)
    elif op.kind == REFLECT_PATTERN:
        _reflect_pattern_inplace(psi2, n, op.pattern)
    elif op.kind == REFLECT_ZERO:
        _reflect_zero_inplace(psi2)
    elif op.kind == INV_QFT:
        out = _qft_axis(psi2.reshape(-1), n, op.qubits, inverse=True)
        psi2.reshape(-1)[:] = out
    else:
        raise ValidationError(f"{op.kind} cannot be applied directly")


# --- public gate functions ------------------------------------------------------------


def apply_ry(s: StateVector, q: int, theta: float) -> StateVector:
    _check_qubits([q], s.n_qubits)
    out = s.copy()
    _ry_inplace(out.amps.reshape(1, -1), s.n_qubits, q, theta)
    return out


def apply_controlled_ry(s: StateVector, controls: Sequence[tuple[int, int]], target: int, theta: float) -> StateVector:
    """RY on ``target`` for basis states where every ``(qubit, polarity)`` control matches."""
    controls = tuple((int(q), int(b)) for q, b in controls)
    op = GateOp(CRY, target, theta, controls)
    _check_op(op, s.n_qubits)
    out = s.copy()
    _apply_op(out.amps.reshape(1, -1), s.n_qubits, op)
    return out


def apply_hadamard(s: StateVector, q: int) -> StateVector:
    _check_qubits([q], s.n_qubits)
    out = s.copy()
    _hadamard_inplace(out.amps.reshape(1, -1), s.n_qubits, q)
    return out


def reflect_zero(s: StateVector) -> StateVector:
    out = s.copy()
    out.amps[0] *= -1
    return out


def reflect_pattern(s: StateVector, p: EvidencePattern) -> StateVector:
    _check_qubits([q for q, _ in p.pairs], s.n_qubits)
    out = s.copy()
    _reflect_pattern_inplace(out.amps.reshape(1, -1), s.n_qubits, p)
    return out


def measure_amplitude(s: StateVector, p: EvidencePattern) -> float:
    """``<psi|P|psi>``: total probability of basis states matching the pattern."""
    _check_qubits([q for q, _ in p.pairs], s.n_qubits)
    t = s.amps.reshape((1,) + (2,) * s.n_qubits)
    sel = t[_index(s.n_qubits, p.pairs)]
    return float(np.sum(sel.real ** 2 + sel.imag ** 2))


def _qft_axis(amps: np.ndarray, n: int, qubits: Sequence[int], inverse: bool) -> np.ndarray:
    qubits = list(qubits)
    r = len(qubits)
    t = amps.reshape((2,) * n)
    # register value y = sum_j bit(qubits[j]) 2^j; C-order wants the high bit first
    axes = [n - 1 - q for q in reversed(qubits)]
    rest = [a for a in range(n) if a not in axes]
    moved = np.transpose(t, rest + axes).reshape(-1, 2 ** r)
    if inverse:
        moved = np.fft.fft(moved, axis=1) / math.sqrt(2 ** r)
    else:
        moved = np.fft.ifft(moved, axis=1) * math.sqrt(2 ** r)
    back = moved.reshape([2] * n)
    return np.transpose(back, np.argsort(rest + axes)).reshape(-1)


def inverse_qft(s: StateVector, qubits: Sequence[int]) -> StateVector:
    """``|y> -> 2^{-r/2} sum_z exp(-2 pi i y z / 2^r) |z>`` on the listed register.

    ``qubits[j]`` carries bit ``j`` of the register value.
    """
    _check_qubits(qubits, s.n_qubits)
    return StateVector(_qft_axis(s.amps, s.n_qubits, qubits, inverse=True), s.n_qubits)


def qft(s: StateVector, qubits: Sequence[int]) -> StateVector:
    _check_qubits(qubits, s.n_qubits)
    return StateVector(_qft_axis(s.amps, s.n_qubits, qubits, inverse=False), s.n_qubits)


# --- network encoding ------------------------------------------------------------


def _angle(p0: float) -> float:
    return 2.0 * math.acos(math.sqrt(min(max(p0, 0.0), 1.0)))


def encode_network(net: BayesianNetwork, qubit_cap: int = DEFAULT_QUBIT_CAP) -> Encoding:
    """Circuit whose output amplitudes are square roots of the joint distribution.

    Qubit ``k`` represents the ``k``-th variable of the topological order; a
    node with ``m`` parents costs ``2**m`` controlled rotations, one per
    parent assignment, and a root costs one plain rotation.
    """
    validate_dag(net)
    check_cap(net.n_vars, qubit_cap)
    order = topological_sort(net)
    pos = {v: k for k, v in enumerate(order)}
    ops = []
    for k, v in enumerate(order):
        cpt = net.cpts[v]
        if not cpt.parents:
            ops.append(GateOp(RY, k, _angle(cpt.table[0, 0])))
            continue
        for r in range(2 ** cpt.n_parents):
            controls = tuple((pos[p], (r >> j) & 1) for j, p in enumerate(cpt.parents))
            ops.append(GateOp(CRY, k, _angle(cpt.table[r, 0]), controls))
    circuit = Circuit(net.n_vars, tuple(ops), tuple(order))
    return Encoding(circuit, circuit.apply(StateVector.zero(net.n_vars, qubit_cap)))


def basis_index(circuit: Circuit, assignment: Sequence[int]) -> int:
    """Basis index holding the amplitude of a full variable assignment."""
    return sum(int(assignment[v]) << k for k, v in enumerate(circuit.labels))


# --- Grover operator -----------------------------------------------------------------


def _grover_inplace(psi2: np.ndarray, encoder: Circuit, inverse: Circuit, p: EvidencePattern, times: int = 1) -> None:
    n = encoder.n_qubits
    for _ in range(times):
        _reflect_pattern_inplace(psi2, n, p)
        for op in inverse.ops:
            _apply_op(psi2, n, op)
        _reflect_zero_inplace(psi2)
        for op in encoder.ops:
            _apply_op(psi2, n, op)
        psi2 *= -1


def grover_apply(encoder: Circuit, p: EvidencePattern, s: StateVector) -> StateVector:
    """One application of ``G``: S_x, then O^dagger, then S_0, then O, then a sign flip.

    Qubits of ``s`` beyond the encoder's are treated as untouched spectators.
    """
    _check_qubits([q for q, _ in p.pairs], encoder.n_qubits)
    if s.n_qubits < encoder.n_qubits:
        raise IndexOutOfRange("state is smaller than the encoder")
    out = s.copy()
    _grover_inplace(out.amps.reshape(-1, 2 ** encoder.n_qubits), encoder, encoder.inverse(), p)
    return out


@functools.lru_cache(maxsize=64)
def _encoded(encoder: Circuit) -> np.ndarray:
    psi = encoder.apply(StateVector.zero(encoder.n_qubits, qubit_cap=max(encoder.n_qubits, DEFAULT_QUBIT_CAP))).amps
    psi.setflags(write=False)
    return psi


def _subspace_matrix(coords: Sequence[float], signs: Sequence[float]) -> np.ndarray:
    c = np.asarray(coords, dtype=complex)
    return (2 * np.outer(c, c.conj()) - np.eye(len(c))) * np.asarray(signs)


def _split_norms(encoder: Circuit, p: EvidencePattern) -> tuple[float, float]:
    psi = _encoded(encoder)
    sel = psi.reshape((1,) + (2,) * encoder.n_qubits)[_index(encoder.n_qubits, p.pairs)]
    good2 = float(np.sum(sel.real ** 2 + sel.imag ** 2))
    bad2 = max(float(np.vdot(psi, psi).real) - good2, 0.0)
    return math.sqrt(bad2), math.sqrt(good2)


def grover_subspace(encoder: Circuit, p: EvidencePattern) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Restriction of ``G`` to span{bad, good} of the encoded state ``psi = O|0>``.

    Returns ``(basis, matrix, coords)``: orthonormal basis vectors as rows,
    ``matrix[i, j] = <basis_i|G|basis_j>`` and the coordinates of ``psi`` in
    that basis.  Inside this span ``O S_0 O^dagger`` acts as
    ``I - 2|psi><psi|``, so ``G = (2|psi><psi| - I) S_x`` needs only the
    simulated ``psi`` and the pattern.  When ``psi`` lies entirely inside or
    outside the pattern the span is one dimensional.
    """
    n = encoder.n_qubits
    _check_qubits([q for q, _ in p.pairs], n)
    psi = _encoded(encoder)
    mask = np.zeros((2,) * n, dtype=bool)
    mask[_index(n, p.pairs)[1:]] = True
    good = np.where(mask.reshape(-1), psi, 0)
    vecs, coords, signs = [], [], []
    for v, norm, sign in zip((psi - good, good), _split_norms(encoder, p), (1.0, -1.0)):
        if norm > 1e-15:
            vecs.append(v / norm)
            coords.append(norm)
            signs.append(sign)
    return np.array(vecs), _subspace_matrix(coords, signs), np.array(coords, dtype=complex)


# --- phase estimation --------------------------------------------------------------


def _full_register_distribution(encoder: Circuit, p: EvidencePattern, T: int) -> np.ndarray:
    # ancillas are qubits n..n+T-1, so ancilla k is bit k of the row index
    n = encoder.n_qubits
    M = 2 ** T
    psi = _encoded(encoder)
    full = np.tile(psi / math.sqrt(M), (M, 1))
    inv = encoder.inverse()
    for k in range(T):
        rows = full.reshape(M // 2 ** (k + 1), 2, 2 ** k, 2 ** n)[:, 1]
        sub = np.ascontiguousarray(rows).reshape(-1, 2 ** n)
        _grover_inplace(sub, encoder, inv, p, times=2 ** k)
        rows[...] = sub.reshape(rows.shape)
    state = StateVector(full.reshape(-1), n + T)
    state = inverse_qft(state, list(range(n, n + T)))
    amps = state.amps.reshape(M, 2 ** n)
    return np.sum(np.abs(amps) ** 2, axis=1)


def _subspace_distribution(encoder: Circuit, p: EvidencePattern, T: int) -> np.ndarray:
    M = 2 ** T
    pairs = [(nrm, sign) for nrm, sign in zip(_split_norms(encoder, p), (1.0, -1.0)) if nrm > 1e-15]
    c = np.array([nrm for nrm, _ in pairs], dtype=complex)
    g = _subspace_matrix(c, [sign for _, sign in pairs])
    # G is unitary with distinct eigenvalues on a two-dimensional span, so powers
    # follow from its eigendecomposition: coeffs[y] = G**y c
    lam, vec = np.linalg.eig(g)
    w = np.linalg.solve(vec, c)
    powers = np.exp(1j * np.outer(np.arange(M), np.angle(lam)))
    coeffs = (powers * w) @ vec.T
    out = np.fft.fft(coeffs / math.sqrt(M), axis=0) / math.sqrt(M)
    return np.sum(np.abs(out) ** 2, axis=1)


def qpe_distribution(
    encoder: Circuit,
    p: EvidencePattern,
    T: int,
    method: str = "auto",
    qubit_cap: int = DEFAULT_QUBIT_CAP,
) -> np.ndarray:
    """Outcome probabilities of the ``T``-qubit phase register after inverse QFT.

    ``method="full"`` simulates the whole ``n + T`` qubit register with
    controlled ``G**(2**k)`` realized as ``2**k`` repeated applications.
    ``method="subspace"`` applies ``G`` only inside its two-dimensional
    invariant subspace, which is exact because the data register starts in
    that subspace.  ``"auto"`` picks the full route when it is cheap.
    """
    if T < 1:
        raise ValidationError("phase register needs at least one qubit")
    check_cap(encoder.n_qubits + T, qubit_cap)
    _check_qubits([q for q, _ in p.pairs], encoder.n_qubits)
    if method == "auto":
        method = "full" if 2 * T + encoder.n_qubits <= 18 else "subspace"
    if method == "full":
        probs = _full_register_distribution(encoder, p, T)
    elif method == "subspace":
        probs = _subspace_distribution(encoder, p, T)
    else:
        raise ValidationError(f"unknown method {method!r}")
    # flush FFT round-off so exactly-zero outcomes stay impossible
    probs[probs < 1e-20] = 0.0
    return probs / probs.sum()


def sample_outcome(probs: np.ndarray, rng) -> int:
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(probs) - 1))


def readout_angle(outcome: int, T: int) -> float:
    """Angle estimate in ``[0, pi/2]`` from a phase-register outcome.

    The eigenphases of ``G`` are ``+-2 theta``, so outcome ``y`` and
    ``2**T - y`` report the same angle ``pi * y / 2**T``.
    """
    M = 2 ** T
    return math.pi * min(outcome, M - outcome) / M


def qpe_estimate(
    encoder: Circuit,
    p: EvidencePattern,
    T: int,
    seed,
    method: str = "auto",
    qubit_cap: int = DEFAULT_QUBIT_CAP,
) -> float:
    """One phase-estimation run; returns the angle estimate (``a ~ sin^2`` of it)."""
    probs = qpe_distribution(encoder, p, T, method, qubit_cap)
    return readout_angle(sample_outcome(probs, np.random.default_rng(seed)), T)
