"""Binary Bayesian networks: data model, topological order, exact and sampled inference.

CPT tables are stored as arrays of shape ``(2**k, 2)`` where ``k`` is the
number of parents.  Row ``r`` holds ``(P(X=0 | u), P(X=1 | u))`` for the parent
assignment ``u`` whose bit ``j`` (little-endian) is the value of
``parents[j]``.  The same little-endian convention is used for qubits in
:mod:`qbiwafer.qsim`.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    CptNotNormalized,
    CptShapeMismatch,
    CycleDetected,
    MissingValue,
    ValidationError,
    ZeroEvidenceProbability,
)

ROW_TOL = 1e-12


@dataclass(frozen=True)
class Cpt:
    parents: tuple[int, ...]
    table: np.ndarray

    def __post_init__(self):
        parents = tuple(int(p) for p in self.parents)
        table = np.array(self.table, dtype=float)
        if table.ndim == 1 and table.shape == (2,):
            table = table.reshape(1, 2)
        table.setflags(write=False)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "table", table)

    @classmethod
    def root(cls, p0: float) -> "Cpt":
        return cls((), [[p0, 1.0 - p0]])

    @classmethod
    def from_p1(cls, parents: Sequence[int], p1: Sequence[float]) -> "Cpt":
        p1 = np.asarray(p1, dtype=float).reshape(-1)
        return cls(tuple(parents), np.stack([1.0 - p1, p1], axis=1))

    @property
    def n_parents(self) -> int:
        return len(self.parents)

    def row_index(self, parent_bits: Sequence[int]) -> int:
        return sum(int(b) << j for j, b in enumerate(parent_bits))

    def row(self, parent_bits: Sequence[int] = ()) -> tuple[float, float]:
        p0, p1 = self.table[self.row_index(parent_bits)]
        return float(p0), float(p1)

    def __eq__(self, other):
        if not isinstance(other, Cpt):
            return NotImplemented
        return self.parents == other.parents and np.array_equal(self.table, other.table)

    def __hash__(self):
        return hash((self.parents, self.table.tobytes()))


@dataclass(frozen=True)
class BayesianNetwork:
    """DAG over binary variables ``0..n_vars-1`` with one CPT per node.

    Edges are derived from the CPT parent lists so the two can never
    disagree.  Construction does not validate; call :func:`validate_dag`.
    """

    cpts: tuple[Cpt, ...]

    def __post_init__(self):
        object.__setattr__(self, "cpts", tuple(self.cpts))

    @property
    def n_vars(self) -> int:
        return len(self.cpts)

    @property
    def edges(self) -> frozenset[tuple[int, int]]:
        return frozenset((p, i) for i, c in enumerate(self.cpts) for p in c.parents)

    def parents(self, i: int) -> tuple[int, ...]:
        return self.cpts[i].parents

    def children(self, i: int) -> list[int]:
        return [j for j, c in enumerate(self.cpts) if i in c.parents]

    @property
    def max_indegree(self) -> int:
        return max((c.n_parents for c in self.cpts), default=0)


@dataclass(frozen=True)
class Assignment:
    """Full-length bit vector with an optional missing mask (True = missing)."""

    values: tuple[int, ...]
    missing: tuple[bool, ...] | None = None

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if self.missing is not None:
            missing = tuple(bool(m) for m in self.missing)
            if len(missing) != len(values):
                raise ValidationError("missing mask and values differ in length")
            object.__setattr__(self, "missing", missing)
        for i, v in enumerate(values):
            if v not in (0, 1) and not (self.missing and self.missing[i]):
                raise ValidationError(f"value at {i} is not a bit: {v}")

    def observed(self) -> dict[int, int]:
        if self.missing is None:
            return dict(enumerate(self.values))
        return {i: v for i, (v, m) in enumerate(zip(self.values, self.missing)) if not m}


@dataclass(frozen=True)
class Posterior:
    targets: tuple[int, ...]
    probs: dict[tuple[int, ...], float] = field(hash=False)

    def as_array(self) -> np.ndarray:
        """Probabilities in ``itertools.product([0, 1], repeat=len(targets))`` order."""
        return np.array([self.probs[y] for y in itertools.product((0, 1), repeat=len(self.targets))])


@dataclass(frozen=True)
class SampleStats:
    attempts: int
    accepted: int


def _as_evidence(evidence) -> dict[int, int]:
    if evidence is None:
        return {}
    if isinstance(evidence, Assignment):
        return evidence.observed()
    return {int(k): int(v) for k, v in dict(evidence).items()}


# --- structure ---------------------------------------------------------------


def validate_dag(net: BayesianNetwork) -> None:
    """Raise if the network is not a well-formed binary Bayesian network."""
    n = net.n_vars
    for i, cpt in enumerate(net.cpts):
        if len(set(cpt.parents)) != len(cpt.parents):
            raise CptShapeMismatch(i, "duplicate parent")
        if any(p < 0 or p >= n or p == i for p in cpt.parents):
            raise CptShapeMismatch(i, "parent index out of range")
        if cpt.table.shape != (2 ** cpt.n_parents, 2):
            raise CptShapeMismatch(i, f"table shape {cpt.table.shape}")
    _kahn(net)
    for i, cpt in enumerate(net.cpts):
        t = cpt.table
        bad = (t < 0).any(axis=1) | (t > 1).any(axis=1) | (np.abs(t.sum(axis=1) - 1.0) > ROW_TOL)
        if bad.any():
            raise CptNotNormalized(i, int(np.flatnonzero(bad)[0]))


def _kahn(net: BayesianNetwork) -> list[int]:
    n = net.n_vars
    indeg = [len(set(c.parents)) for c in net.cpts]
    children: list[list[int]] = [[] for _ in range(n)]
    for i, c in enumerate(net.cpts):
        for p in set(c.parents):
            if 0 <= p < n:
                children[p].append(i)
    ready = [i for i in range(n) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, c)
    if len(order) != n:
        raise CycleDetected(_find_cycle(net, set(range(n)) - set(order)))
    return order


def _find_cycle(net: BayesianNetwork, nodes: set[int]) -> list[int]:
    # every leftover node has a leftover parent, so walking parents must loop
    v = min(nodes)
    seen: dict[int, int] = {}
    path = []
    while v not in seen:
        seen[v] = len(path)
        path.append(v)
        v = next(p for p in net.cpts[v].parents if p in nodes)
    return path[seen[v]:][::-1]


def topological_sort(net: BayesianNetwork) -> list[int]:
    """Kahn's algorithm; among ready nodes the smallest id goes first."""
    return _kahn(net)


def is_topological(net: BayesianNetwork, order: Sequence[int]) -> bool:
    pos = {v: k for k, v in enumerate(order)}
    if sorted(pos) != list(range(net.n_vars)):
        return False
    return all(pos[p] < pos[i] for i, c in enumerate(net.cpts) for p in c.parents)


# --- evaluation --------------------------------------------------------------


def joint_probability(net: BayesianNetwork, a) -> float:
    if isinstance(a, Assignment):
        if a.missing is not None and any(a.missing):
            raise MissingValue("joint_probability needs a fully observed assignment")
        a = a.values
    a = [int(v) for v in a]
    if len(a) != net.n_vars:
        raise ValidationError(f"assignment has length {len(a)}, network has {net.n_vars} variables")
    p = 1.0
    for i, cpt in enumerate(net.cpts):
        p *= cpt.table[cpt.row_index([a[q] for q in cpt.parents]), a[i]]
    return float(p)


def _row_indices(cpt: Cpt, X: np.ndarray) -> np.ndarray:
    idx = np.zeros(X.shape[0], dtype=np.int64)
    for j, p in enumerate(cpt.parents):
        idx |= X[:, p].astype(np.int64) << j
    return idx


def log_joint_batch(net: BayesianNetwork, X) -> np.ndarray:
    """Log joint probability of each fully observed row of ``X`` (shape ``(B, N)``)."""
    X = np.asarray(X)
    out = np.zeros(X.shape[0])
    with np.errstate(divide="ignore"):
        for i, cpt in enumerate(net.cpts):
            out += np.log(cpt.table[_row_indices(cpt, X), X[:, i].astype(np.int64)])
    return out


def log_marginal_batch(net: BayesianNetwork, X, missing=None) -> np.ndarray:
    """Log probability of the observed part of each row, missing entries summed out.

    Forests (max indegree <= 1) use vectorized upward messages in reverse
    topological order; anything else falls back to per-row elimination.
    """
    X = np.asarray(X)
    B, n = X.shape
    miss = np.zeros_like(X, dtype=bool) if missing is None else np.asarray(missing, dtype=bool)
    if net.max_indegree > 1:
        out = np.empty(B)
        for b in range(B):
            ev = {i: int(X[b, i]) for i in range(n) if not miss[b, i]}
            p = evidence_probability(net, ev)
            out[b] = np.log(p) if p > 0 else -np.inf
        return out

    order = topological_sort(net)
    lam = np.ones((n, B, 2))
    logp = np.zeros(B)
    obs = np.ones((n, B, 2))
    bit = X.astype(np.int64)
    rows = np.arange(B)
    for i in range(n):
        seen = ~miss[:, i]
        obs[i, rows[seen], 1 - bit[seen, i]] = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for v in reversed(order):
            w = obs[v] * lam[v]
            table = net.cpts[v].table
            if not net.cpts[v].parents:
                logp += np.log(w @ table[0])
                continue
            msg = w @ table.T
            scale = msg.max(axis=1)
            msg /= np.where(scale > 0, scale, 1.0)[:, None]
            logp += np.log(scale)
            lam[net.cpts[v].parents[0]] *= msg
    return logp


# --- exact inference ---------------------------------------------------------


def _cpt_factor(i: int, cpt: Cpt) -> tuple[list[int], np.ndarray]:
    k = cpt.n_parents
    # row-major reshape puts the highest parent bit on the first axis
    return [*reversed(cpt.parents), i], cpt.table.reshape((2,) * k + (2,))


def _eliminate(net: BayesianNetwork, evidence: Mapping[int, int], targets: Sequence[int]) -> np.ndarray:
    """Unnormalized factor over ``targets`` (axes in the given order), evidence clamped."""
    factors = []
    for i, cpt in enumerate(net.cpts):
        scope, table = _cpt_factor(i, cpt)
        index = tuple(evidence[v] if v in evidence else slice(None) for v in scope)
        table = table[index]
        scope = [v for v in scope if v not in evidence]
        factors.append((scope, table))

    keep = set(targets) | set(evidence)
    for v in reversed(topological_sort(net)):
        if v in keep:
            continue
        touching = [f for f in factors if v in f[0]]
        if not touching:
            continue
        factors = [f for f in factors if v not in f[0]]
        out = sorted({u for s, _ in touching for u in s} - {v})
        factors.append((out, _einsum(touching, out)))
    return _einsum(factors, list(targets))


def _einsum(factors, out):
    # einsum sublists only accept small integers, so relabel locally
    label = {v: k for k, v in enumerate(sorted({u for s, _ in factors for u in s} | set(out)))}
    operands = [x for s, t in factors for x in (t, [label[u] for u in s])]
    if not operands:
        return np.ones((2,) * len(out))
    return np.einsum(*operands, [label[u] for u in out])


def evidence_probability(net: BayesianNetwork, evidence) -> float:
    return float(_eliminate(net, _as_evidence(evidence), ()))


def exact_posterior(net: BayesianNetwork, evidence, targets: Sequence[int]) -> Posterior:
    """P(targets | evidence) by variable elimination in reverse topological order."""
    evidence = _as_evidence(evidence)
    targets = tuple(int(t) for t in targets)
    if set(targets) & set(evidence):
        raise ValidationError("evidence and target variables overlap")
    if len(set(targets)) != len(targets):
        raise ValidationError("duplicate target variable")
    table = _eliminate(net, evidence, targets)
    z = float(table.sum())
    if not z > 0:
        raise ZeroEvidenceProbability(f"P(evidence) = 0 for {evidence}")
    table = table / z
    probs = {y: float(table[y]) for y in itertools.product((0, 1), repeat=len(targets))}
    return Posterior(targets, probs)


def enumerate_posterior(net: BayesianNetwork, evidence, targets: Sequence[int]) -> Posterior:
    """Brute-force oracle over all 2**N assignments.  Only for small N."""
    evidence = _as_evidence(evidence)
    targets = tuple(targets)
    X = all_assignments(net.n_vars)
    p = np.exp(log_joint_batch(net, X))
    ok = np.ones(len(X), dtype=bool)
    for v, b in evidence.items():
        ok &= X[:, v] == b
    z = p[ok].sum()
    if not z > 0:
        raise ZeroEvidenceProbability(f"P(evidence) = 0 for {evidence}")
    probs = {}
    for y in itertools.product((0, 1), repeat=len(targets)):
        m = ok.copy()
        for v, b in zip(targets, y):
            m &= X[:, v] == b
        probs[y] = float(p[m].sum() / z)
    return Posterior(targets, probs)


def all_assignments(n: int) -> np.ndarray:
    """All 2**n bit vectors; row ``k`` has bit ``i`` of ``k`` in column ``i``."""
    k = np.arange(2 ** n, dtype=np.int64)
    return ((k[:, None] >> np.arange(n)) & 1).astype(np.uint8)


# --- sampling ------------------------------------------------------------------


def sample(net: BayesianNetwork, n: int, rng) -> np.ndarray:
    """Ancestral samples, shape ``(n, N)`` of uint8."""
    rng = np.random.default_rng(rng)
    X = np.zeros((n, net.n_vars), dtype=np.uint8)
    for v in topological_sort(net):
        cpt = net.cpts[v]
        p1 = cpt.table[_row_indices(cpt, X), 1]
        X[:, v] = rng.random(n) < p1
    return X


def forward_sample_posterior(
    net: BayesianNetwork,
    evidence,
    targets: Sequence[int],
    n_accepted: int,
    seed,
    max_attempts: int = 10 ** 9,
) -> tuple[Posterior, SampleStats]:
    """Rejection sampling: draw ancestral samples until ``n_accepted`` match the evidence.

    ``attempts`` counts every sample drawn up to and including the last
    accepted one, i.e. the classical query count.
    """
    evidence = _as_evidence(evidence)
    targets = tuple(int(t) for t in targets)
    if n_accepted < 1:
        raise ValidationError("n_accepted must be positive")
    rng = np.random.default_rng(seed)
    counts = np.zeros(2 ** len(targets), dtype=np.int64)
    weights = 1 << np.arange(len(targets), dtype=np.int64)
    attempts = accepted = 0
    rate = 1.0
    ev_vars = np.array(list(evidence), dtype=np.int64)
    ev_bits = np.array(list(evidence.values()), dtype=np.uint8)
    while accepted < n_accepted:
        need = n_accepted - accepted
        batch = int(min(max(1024, 1.2 * need / rate), 1 << 20))
        X = sample(net, batch, rng)
        ok = np.all(X[:, ev_vars] == ev_bits, axis=1) if len(ev_vars) else np.ones(batch, dtype=bool)
        idx = np.flatnonzero(ok)
        if len(idx) >= need:
            idx = idx[:need]
            used = int(idx[-1]) + 1
        else:
            used = batch
        if attempts + used > max_attempts:
            raise BudgetExceeded(f"more than {max_attempts} attempts for {n_accepted} accepted samples")
        attempts += used
        accepted += len(idx)
        rate = max(accepted / attempts, 1e-9)
        if len(targets):
            code = (X[idx][:, list(targets)].astype(np.int64) * weights).sum(axis=1)
            counts += np.bincount(code, minlength=len(counts))
        else:
            counts[0] += len(idx)
    # bincount code uses little-endian target bits; map back to tuple keys
    probs = {}
    for y in itertools.product((0, 1), repeat=len(targets)):
        probs[y] = float(counts[int(np.dot(y, weights))] / accepted) if targets else 1.0
    return Posterior(targets, probs), SampleStats(attempts, accepted)


def total_variation(p: Posterior, q: Posterior) -> float:
    return 0.5 * sum(abs(p.probs[y] - q.probs[y]) for y in p.probs)


# --- indegree reduction check -----------------------------------------------------


def verify_ancilla_decomposition(
    original: BayesianNetwork,
    augmented: BayesianNetwork,
    node: int,
    ancilla_ids: Sequence[int],
    tol: float = 1e-9,
) -> bool:
    """Check that ancillas between ``node`` and its parents leave P(node | parents) intact.

    Every ancilla row must be a distribution, and summing the augmented
    factors over all ancilla values must reproduce each original CPT row.
    """
    ancillas = [int(a) for a in ancilla_ids]
    orig_parents = original.cpts[node].parents
    allowed = set(orig_parents) | set(ancillas)
    if augmented.n_vars < original.n_vars or any(a < original.n_vars or a >= augmented.n_vars for a in ancillas):
        return False
    for a in ancillas:
        t = augmented.cpts[a].table
        if t.shape != (2 ** augmented.cpts[a].n_parents, 2):
            return False
        if (t < 0).any() or (np.abs(t.sum(axis=1) - 1.0) > ROW_TOL).any():
            return False
        if not set(augmented.cpts[a].parents) <= allowed - {a}:
            return False
    target = augmented.cpts[node]
    if not set(target.parents) <= allowed or target.table.shape != (2 ** target.n_parents, 2):
        return False

    for u in itertools.product((0, 1), repeat=len(orig_parents)):
        values = dict(zip(orig_parents, u))
        got = np.zeros(2)
        for av in itertools.product((0, 1), repeat=len(ancillas)):
            values.update(zip(ancillas, av))
            w = 1.0
            for a in ancillas:
                c = augmented.cpts[a]
                w *= c.table[c.row_index([values[p] for p in c.parents]), values[a]]
            got += w * target.table[target.row_index([values[p] for p in target.parents])]
        want = original.cpts[node].table[original.cpts[node].row_index(u)]
        if np.abs(got - want).max() > tol:
            return False
    return True


# --- generators -----------------------------------------------------------------


def random_tree_network(n: int, rng, p_low: float = 0.05, p_high: float = 0.95) -> BayesianNetwork:
    """Random max-indegree-1 network with ``n`` nodes and uniform CPT entries."""
    return random_network(n, 1, rng, p_low, p_high)


def random_network(n: int, max_indegree: int, rng, p_low: float = 0.05, p_high: float = 0.95) -> BayesianNetwork:
    """Random DAG whose in-degrees never exceed ``max_indegree``.

    Every non-first node gets at least one parent (the skeleton is connected)
    and the last node in the hidden order gets ``min(n - 1, max_indegree)``,
    so the bound is attained whenever ``n > max_indegree``.
    """
    rng = np.random.default_rng(rng)
    perm = rng.permutation(n)
    parents: list[tuple[int, ...]] = [()] * n
    for k in range(1, n):
        hi = min(k, max_indegree)
        m = hi if k == n - 1 else int(rng.integers(min(1, hi), hi + 1))
        chosen = rng.choice(k, size=m, replace=False)
        parents[perm[k]] = tuple(int(perm[c]) for c in sorted(chosen))
    cpts = [Cpt.from_p1(pa, rng.uniform(p_low, p_high, size=2 ** len(pa))) for pa in parents]
    return BayesianNetwork(tuple(cpts))


# --- BN-JSON v1 -------------------------------------------------------------------


def network_to_dict(net: BayesianNetwork) -> dict:
    cpts = []
    for cpt in net.cpts:
        rows = {}
        for r in range(2 ** cpt.n_parents):
            key = "".join(str((r >> j) & 1) for j in range(cpt.n_parents))
            rows[key] = [float(cpt.table[r, 0]), float(cpt.table[r, 1])]
        cpts.append({"parents": list(cpt.parents), "rows": rows})
    return {
        "format": "BN-JSON",
        "version": 1,
        "n_vars": net.n_vars,
        "edges": [list(e) for e in sorted(net.edges)],
        "cpts": cpts,
    }


def network_from_dict(d: Mapping) -> BayesianNetwork:
    if d.get("format", "BN-JSON") != "BN-JSON" or int(d.get("version", 1)) != 1:
        raise ValidationError("not a BN-JSON v1 document")
    n = int(d["n_vars"])
    if len(d["cpts"]) != n:
        raise ValidationError(f"n_vars={n} but {len(d['cpts'])} CPTs")
    cpts = []
    for i, c in enumerate(d["cpts"]):
        parents = tuple(int(p) for p in c["parents"])
        k = len(parents)
        table = np.zeros((2 ** k, 2))
        if len(c["rows"]) != 2 ** k:
            raise CptShapeMismatch(i, f"{len(c['rows'])} rows for {k} parents")
        for key, (p0, p1) in c["rows"].items():
            if len(key) != k or set(key) - {"0", "1"}:
                raise CptShapeMismatch(i, f"bad row key {key!r}")
            table[sum(int(ch) << j for j, ch in enumerate(key))] = (p0, p1)
        cpts.append(Cpt(parents, table))
    net = BayesianNetwork(tuple(cpts))
    if "edges" in d and {tuple(int(x) for x in e) for e in d["edges"]} != set(net.edges):
        raise ValidationError("edge list disagrees with CPT parent lists")
    validate_dag(net)
    return net


def save_network(net: BayesianNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh, indent=1)
        fh.write("\n")


def load_network(path) -> BayesianNetwork:
    with open(path, encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))


def chain(p0_root: float, p1_given: Iterable[Sequence[float]]) -> BayesianNetwork:
    """Chain 0 -> 1 -> ... ; ``p1_given[k]`` is (P(X_{k+1}=1|X_k=0), P(X_{k+1}=1|X_k=1))."""
    cpts = [Cpt.root(p0_root)]
    for k, p1 in enumerate(p1_given):
        cpts.append(Cpt.from_p1((k,), p1))
    return BayesianNetwork(tuple(cpts))
