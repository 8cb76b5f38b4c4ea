"""Synthetic wafer data with a known generating distribution.

Each defect class is a template of per-cell defect probabilities over the
unit disk.  A template becomes a tree Bayesian network on a ``side x side``
grid: cells are chained in row-major order (the first cell of a row hangs
off the cell above it) and each cell leans towards its parent's value by a
coupling ``rho``.  Because the generator is itself a network, exact class
conditional probabilities are available as an oracle.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .bayesnet import BayesianNetwork, Cpt, all_assignments, log_joint_batch, sample
from .wbm import DEFECT_LABELS, RAW_SIDE, RawWaferMap

HIGH, LOW = 0.92, 0.02


def _disk(u, v):
    return np.hypot(u, v)


def _sector(u, v, lo, hi):
    ang = np.arctan2(v, u)
    return (ang >= lo) & (ang <= hi)


TEMPLATES: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "Normal": lambda u, v: np.full(u.shape, LOW),
    "Center": lambda u, v: np.where(_disk(u, v) < 0.45, HIGH, LOW),
    "Doughnut": lambda u, v: np.where((_disk(u, v) > 0.45) & (_disk(u, v) < 0.85), HIGH, LOW),
    "Edge-Loc": lambda u, v: np.where((_disk(u, v) > 0.6) & _sector(u, v, math.pi / 2, math.pi), HIGH, LOW),
    "Edge-Ring": lambda u, v: np.where(_disk(u, v) > 0.85, HIGH, LOW),
    "Loc": lambda u, v: np.where(np.hypot(u - 0.5, v + 0.5) < 0.4, HIGH, LOW),
    "Near-Full": lambda u, v: np.full(u.shape, HIGH),
    "Scratch": lambda u, v: np.where(np.abs(u - v) < 0.3, HIGH, LOW),
    "Random": lambda u, v: np.full(u.shape, 0.5),
}


def cell_centers(side: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalized ``(u, v)`` in ``[-1, 1]`` for each cell, row-major; ``v`` points up."""
    c = (np.arange(side) + 0.5) / side * 2 - 1
    u, v = np.meshgrid(c, -c)
    return u.reshape(-1), v.reshape(-1)


def template_probs(label: str, side: int) -> np.ndarray:
    u, v = cell_centers(side)
    return TEMPLATES[label](u, v).astype(float)


def grid_tree_parents(side: int) -> list[int]:
    """Row-major chain: left neighbour, or the cell above for column 0; -1 for the root."""
    parents = []
    for k in range(side * side):
        r, c = divmod(k, side)
        parents.append(-1 if k == 0 else (k - 1 if c > 0 else k - side))
    return parents


def class_network(label: str, side: int = 8, rho: float = 0.1, floor: float = 0.02) -> BayesianNetwork:
    t = template_probs(label, side)
    cpts = []
    for k, par in enumerate(grid_tree_parents(side)):
        if par < 0:
            cpts.append(Cpt.root(1.0 - t[k]))
            continue
        p1 = np.clip([(1 - rho) * t[k], (1 - rho) * t[k] + rho], floor, 1 - floor)
        cpts.append(Cpt.from_p1((par,), p1))
    return BayesianNetwork(tuple(cpts))


def class_networks(side: int = 8, rho: float = 0.1, classes=DEFECT_LABELS) -> dict[str, BayesianNetwork]:
    return {c: class_network(c, side, rho) for c in classes}


def make_dataset(per_class: int, seed: int, side: int = 8, rho: float = 0.1, classes=DEFECT_LABELS):
    """``per_class`` samples from each class generator, in class order."""
    rng = np.random.default_rng(seed)
    nets = class_networks(side, rho, classes)
    X = np.concatenate([sample(nets[c], per_class, rng) for c in classes])
    labels = [c for c in classes for _ in range(per_class)]
    return X, labels


def stratified_split(labels, frac: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices of train and held-out rows; each class keeps ``round(frac * count)`` rows in training."""
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels, dtype=object)
    train, test = [], []
    for c in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        k = int(round(frac * len(idx)))
        train.extend(idx[:k].tolist())
        test.extend(idx[k:].tolist())
    return np.array(sorted(train), dtype=int), np.array(sorted(test), dtype=int)


def exact_tv(p: BayesianNetwork, q: BayesianNetwork) -> float:
    """Total variation by full enumeration; only for small networks."""
    X = all_assignments(p.n_vars)
    return float(0.5 * np.abs(np.exp(log_joint_batch(p, X)) - np.exp(log_joint_batch(q, X))).sum())


def monte_carlo_tv(p: BayesianNetwork, q: BayesianNetwork, n: int, seed: int) -> float:
    """``E_p[max(0, 1 - q(x)/p(x))]``, an unbiased estimate of TV(p, q)."""
    X = sample(p, n, np.random.default_rng(seed))
    ratio = np.exp(np.minimum(log_joint_batch(q, X) - log_joint_batch(p, X), 0.0))
    return float(np.mean(1.0 - ratio))


def raw_map(label: str, rng, side: int = RAW_SIDE) -> RawWaferMap:
    """A 52x52 trivalued map: 0 off-wafer, 1 good chip, 2 defect drawn from the template."""
    u, v = cell_centers(side)
    on = _disk(u, v) <= 1.0
    defect = rng.random(side * side) < TEMPLATES[label](u, v)
    grid = np.where(on, np.where(defect, 2, 1), 0)
    return RawWaferMap(grid.reshape(side, side), label)
