"""Chow-Liu trees over binary samples.

Pairwise dependence is scored with the Gaussian mutual information of the
Pearson correlation, ``-0.5 ln(1 - corr^2)``, even though the variables are
binary.  The maximum-weight spanning tree is found with Kruskal's algorithm
and oriented away from a root by depth-first search.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .bayesnet import BayesianNetwork, Cpt
from .errors import EmptySampleSet, IndexOutOfRange, ValidationError

CORR2_CLAMP = 1.0 - 1e-12


def _as_samples(s) -> np.ndarray:
    X = np.asarray(s, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError("samples must form a 2-D array")
    if X.shape[0] == 0:
        raise EmptySampleSet("no samples")
    if not np.all((X == 0) | (X == 1)):
        raise ValidationError("samples must be binary")
    return X


def correlation(s, i: int, j: int) -> float:
    """Pearson correlation of columns ``i`` and ``j``; 0 if either is constant."""
    X = _as_samples(s)
    n = X.shape[1]
    if not (0 <= i < n and 0 <= j < n):
        raise IndexOutOfRange(f"column index out of [0, {n})")
    x, y = X[:, i], X[:, j]
    vx = np.mean(x * x) - np.mean(x) ** 2
    vy = np.mean(y * y) - np.mean(y) ** 2
    if vx <= 0 or vy <= 0:
        return 0.0
    c = (np.mean(x * y) - np.mean(x) * np.mean(y)) / np.sqrt(vx * vy)
    return float(np.clip(c, -1.0, 1.0))


def correlation_matrix(s) -> np.ndarray:
    X = _as_samples(s)
    mean = X.mean(axis=0)
    cov = X.T @ X / X.shape[0] - np.outer(mean, mean)
    var = np.diag(cov).copy()
    live = var > 1e-15
    denom = np.sqrt(np.outer(np.where(live, var, 1.0), np.where(live, var, 1.0)))
    c = np.where(np.outer(live, live), cov / denom, 0.0)
    return np.clip(c, -1.0, 1.0)


def mutual_information_matrix(s) -> np.ndarray:
    c2 = np.minimum(correlation_matrix(s) ** 2, CORR2_CLAMP)
    m = -0.5 * np.log1p(-c2)
    np.fill_diagonal(m, 0.0)
    return m


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def maximum_spanning_tree(m) -> list[tuple[int, int]]:
    """Kruskal; equal weights are taken in ascending ``(i, j)`` order."""
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if n < 1 or m.shape != (n, n):
        raise ValidationError("weight matrix must be square and non-empty")
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    pairs.sort(key=lambda e: (-m[e], e))
    ds = _DisjointSet(n)
    tree = []
    for i, j in pairs:
        if ds.union(i, j):
            tree.append((i, j))
            if len(tree) == n - 1:
                break
    return sorted(tree)


def orient_edges(tree: Iterable[tuple[int, int]], root: int = 0, n_vars: int | None = None) -> list[tuple[int, int]]:
    """Direct tree edges away from ``root``; each child points back to its DFS predecessor."""
    tree = list(tree)
    n = n_vars if n_vars is not None else (max((max(e) for e in tree), default=root) + 1)
    if not 0 <= root < n:
        raise IndexOutOfRange(f"root {root} not in [0, {n})")
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in tree:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    seen[root] = True
    stack = [root]
    directed = []
    while stack:
        u = stack.pop()
        # reversed push so the smallest neighbour is explored first
        for v in sorted(adj[u], reverse=True):
            if not seen[v]:
                seen[v] = True
                directed.append((u, v))
                stack.append(v)
    if len(directed) != len(tree):
        raise ValidationError("edge set is not a tree")
    return sorted(directed)


def fit_cpts(edges: Iterable[tuple[int, int]], s, alpha: float = 1.0, n_vars: int | None = None) -> BayesianNetwork:
    """Smoothed frequency estimates; a parent context with no mass gives (0.5, 0.5)."""
    if alpha < 0:
        raise ValidationError("alpha must be non-negative")
    X = _as_samples(s).astype(np.int64)
    n = n_vars if n_vars is not None else X.shape[1]
    if X.shape[1] != n:
        raise ValidationError(f"samples have {X.shape[1]} columns, expected {n}")
    parent = [-1] * n
    for u, v in edges:
        if parent[v] != -1:
            raise ValidationError(f"node {v} would get two parents")
        parent[v] = u
    cpts = []
    for i in range(n):
        if parent[i] < 0:
            counts = np.bincount(X[:, i], minlength=2)[None, :].astype(float)
            parents: tuple[int, ...] = ()
        else:
            counts = np.zeros((2, 2))
            np.add.at(counts, (X[:, parent[i]], X[:, i]), 1.0)
            parents = (parent[i],)
        num = counts + alpha
        tot = num.sum(axis=1, keepdims=True)
        table = np.where(tot > 0, num / np.where(tot > 0, tot, 1.0), 0.5)
        cpts.append(Cpt(parents, table))
    return BayesianNetwork(tuple(cpts))


def learn_tree(s, alpha: float = 1.0, root: int = 0) -> BayesianNetwork:
    X = _as_samples(s)
    n = X.shape[1]
    tree = maximum_spanning_tree(mutual_information_matrix(X))
    return fit_cpts(orient_edges(tree, root, n), X, alpha, n)


def kl_gap_terms(net: BayesianNetwork, s) -> float:
    """Negated MI sum over the network's edges: the structure-dependent part of the KL gap."""
    m = mutual_information_matrix(s)
    return float(-sum(m[u, v] for u, v in net.edges))


def tree_weight(m, edges: Sequence[tuple[int, int]]) -> float:
    m = np.asarray(m)
    return float(sum(m[i, j] for i, j in edges))
