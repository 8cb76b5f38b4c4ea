"""Generative classifier: one Chow-Liu network per defect class.

A sample is assigned to the class maximising ``log P(C) + log P(x | C)``.
The exact backend evaluates the likelihood by (marginalizing) variable
elimination; the quantum backend estimates it as the amplitude of the
sample's evidence pattern in the class's encoded state.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bayesnet import BayesianNetwork, log_marginal_batch, network_from_dict, network_to_dict, validate_dag
from .chowliu import learn_tree
from .errors import DimensionMismatch, EmptyClass, MissingClass, ValidationError
from .qae import QaeConfig, estimate_amplitude
from .qsim import DEFAULT_QUBIT_CAP, Circuit, check_cap, encode_network
from .wbm import DEFECT_LABELS

PRIOR_MODES = ("uniform", "empirical", "explicit")
UNIFORM, EMPIRICAL, EXPLICIT = PRIOR_MODES
EXACT, QUANTUM = "exact", "quantum"


@dataclass(frozen=True)
class ClassifierModel:
    classes: tuple[str, ...]
    networks: tuple[BayesianNetwork, ...]
    priors: tuple[float, ...]
    alpha: float = 1.0
    counts: tuple[int, ...] = ()
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if len(self.classes) != len(self.networks) or len(self.classes) != len(self.priors):
            raise ValidationError("classes, networks and priors differ in length")
        if abs(sum(self.priors) - 1.0) > 1e-12 or min(self.priors) < 0:
            raise ValidationError("priors must be a probability vector")
        sizes = {net.n_vars for net in self.networks}
        if len(sizes) != 1:
            raise ValidationError("all class networks must share one feature count")

    @property
    def n_features(self) -> int:
        return self.networks[0].n_vars

    def index(self, label: str) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise ValidationError(f"class {label!r} is not in the model") from None


@dataclass(frozen=True)
class Prediction:
    label: str
    scores: dict[str, float]


@dataclass(frozen=True)
class Evaluation:
    classes: tuple[str, ...]
    counts: np.ndarray
    predictions: tuple[str, ...] = field(repr=False, default=())

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total)

    def recall(self) -> dict[str, float | None]:
        rows = self.counts.sum(axis=1)
        return {c: (float(self.counts[i, i] / rows[i]) if rows[i] else None) for i, c in enumerate(self.classes)}

    def precision(self) -> dict[str, float | None]:
        cols = self.counts.sum(axis=0)
        return {c: (float(self.counts[i, i] / cols[i]) if cols[i] else None) for i, c in enumerate(self.classes)}

    def to_csv(self) -> str:
        lines = ["true\\pred," + ",".join(self.classes)]
        for c, row in zip(self.classes, self.counts):
            lines.append(c + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "n_samples": self.total,
            "accuracy": self.accuracy,
            "precision": self.precision(),
            "recall": self.recall(),
        }


def _priors(mode: str, counts: np.ndarray, explicit) -> np.ndarray:
    if mode == UNIFORM:
        return np.full(len(counts), 1.0 / len(counts))
    if mode == EMPIRICAL:
        return counts / counts.sum()
    if mode == EXPLICIT:
        if explicit is None:
            raise ValidationError("explicit priors requested but none given")
        p = np.asarray(explicit, dtype=float)
        if p.shape != counts.shape or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValidationError("explicit priors must be one probability per class")
        return p / p.sum()
    raise ValidationError(f"unknown priors mode {mode!r}")


def train(
    X,
    labels: Sequence[str],
    alpha: float = 1.0,
    priors: str = UNIFORM,
    explicit_priors: Sequence[float] | None = None,
    classes: Sequence[str] = DEFECT_LABELS,
    root: int = 0,
    threads: int = 1,
) -> ClassifierModel:
    """Fit one Chow-Liu tree per class on that class's rows of ``X``."""
    X = np.asarray(X, dtype=np.uint8)
    labels = list(labels)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyClass("no training samples")
    if len(labels) != X.shape[0]:
        raise DimensionMismatch("one label per sample required")
    classes = tuple(classes)
    unknown = set(labels) - set(classes)
    if unknown:
        raise ValidationError(f"labels {sorted(unknown)} are not among the model classes")
    lab = np.array(labels, dtype=object)
    counts = np.array([int(np.sum(lab == c)) for c in classes])
    if np.any(counts == 0):
        missing = [c for c, k in zip(classes, counts) if k == 0]
        raise MissingClass(f"no training samples for classes {missing}")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        nets = tuple(pool.map(lambda c: learn_tree(X[lab == c], alpha, root), classes))
    p = _priors(priors, counts.astype(float), explicit_priors)
    return ClassifierModel(classes, nets, tuple(float(v) for v in p), alpha, tuple(int(k) for k in counts),
                           {"priors_mode": priors, "root": root})


def _check_width(model: ClassifierModel, X: np.ndarray) -> None:
    if X.shape[-1] != model.n_features:
        raise DimensionMismatch(f"samples have {X.shape[-1]} features, model expects {model.n_features}")


def log_likelihood(model: ClassifierModel, class_i: int | str, sample, missing=None) -> float:
    """``log P(x | C_i)`` with masked variables summed out; ``-inf`` for impossible samples."""
    i = model.index(class_i) if isinstance(class_i, str) else int(class_i)
    x = np.asarray(sample, dtype=np.uint8).reshape(1, -1)
    _check_width(model, x)
    m = None if missing is None else np.asarray(missing, dtype=bool).reshape(1, -1)
    return float(log_marginal_batch(model.networks[i], x, m)[0])


def exact_scores(model: ClassifierModel, X, missing=None) -> np.ndarray:
    """``(n, n_classes)`` matrix of ``log P(C) + log P(x | C)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.uint8))
    _check_width(model, X)
    m = None if missing is None else np.atleast_2d(np.asarray(missing, dtype=bool))
    with np.errstate(divide="ignore"):
        logp = np.log(np.asarray(model.priors))
    cols = [log_marginal_batch(net, X, m) for net in model.networks]
    return np.stack(cols, axis=1) + logp


def argmax_label(classes: Sequence[str], scores: Sequence[float]) -> str:
    """Highest score wins; ties go to the lexicographically smallest class name."""
    best = max(scores)
    return min(c for c, s in zip(classes, scores) if s == best)


class QuantumScorer:
    """Encoded class states, reused across samples."""

    def __init__(self, model: ClassifierModel, qcfg: QaeConfig):
        check_cap(model.n_features, qcfg.qubit_cap)
        self.model = model
        self.qcfg = qcfg
        self.encoders: list[Circuit] = [encode_network(net, qcfg.qubit_cap).circuit for net in model.networks]

    def scores(self, sample, missing=None, seed: int = 0) -> np.ndarray:
        x = np.asarray(sample, dtype=np.uint8).reshape(-1)
        _check_width(self.model, x)
        m = np.zeros(len(x), dtype=bool) if missing is None else np.asarray(missing, dtype=bool).reshape(-1)
        evidence = {i: int(v) for i, v in enumerate(x) if not m[i]}
        out = np.empty(len(self.encoders))
        for c, enc in enumerate(self.encoders):
            est = estimate_amplitude(enc, enc.pattern(evidence), self.qcfg, (seed, c))
            prior = self.model.priors[c]
            out[c] = math.log(est.a_hat) + math.log(prior) if est.a_hat > 0 and prior > 0 else -math.inf
        return out


def classify(
    model: ClassifierModel,
    sample,
    backend: str = EXACT,
    qcfg: QaeConfig | None = None,
    missing=None,
    seed: int = 0,
) -> Prediction:
    if backend == EXACT:
        s = exact_scores(model, sample, None if missing is None else [missing])[0]
    elif backend == QUANTUM:
        s = QuantumScorer(model, qcfg or default_qcfg()).scores(sample, missing, seed)
    else:
        raise ValidationError(f"unknown backend {backend!r}")
    return Prediction(argmax_label(model.classes, s), dict(zip(model.classes, map(float, s))))


def default_qcfg(qubit_cap: int = DEFAULT_QUBIT_CAP) -> QaeConfig:
    return QaeConfig(epsilon=0.1, delta=0.05, a_min=0.005, qubit_cap=qubit_cap)


def predict(
    model: ClassifierModel,
    X,
    backend: str = EXACT,
    qcfg: QaeConfig | None = None,
    missing=None,
    seed: int = 0,
    threads: int = 1,
) -> list[str]:
    """Labels for every row; quantum sample ``k`` uses the seed stream ``(seed + k, class)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.uint8))
    if backend == EXACT:
        s = exact_scores(model, X, missing)
        return [argmax_label(model.classes, row) for row in s]
    if backend != QUANTUM:
        raise ValidationError(f"unknown backend {backend!r}")
    scorer = QuantumScorer(model, qcfg or default_qcfg())
    masks = [None] * len(X) if missing is None else list(np.atleast_2d(missing))

    def one(k):
        return argmax_label(model.classes, scorer.scores(X[k], masks[k], seed + k))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(one, range(len(X))))


def confusion(classes: Sequence[str], truth: Sequence[str], predicted: Sequence[str]) -> np.ndarray:
    pos = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(truth, predicted):
        if t not in pos:
            raise ValidationError(f"true label {t!r} is not a model class")
        counts[pos[t], pos[p]] += 1
    return counts


def evaluate(model: ClassifierModel, X, labels: Sequence[str], backend: str = EXACT, **kw) -> Evaluation:
    X = np.atleast_2d(np.asarray(X, dtype=np.uint8))
    if len(labels) == 0:
        raise EmptyClass("nothing to evaluate")
    if len(labels) != X.shape[0]:
        raise DimensionMismatch("one label per sample required")
    pred = predict(model, X, backend, **kw)
    return Evaluation(model.classes, confusion(model.classes, labels, pred), tuple(pred))


# --- MODEL-JSON v1 ------------------------------------------------------------------


def model_to_dict(model: ClassifierModel) -> dict:
    return {
        "format": "MODEL-JSON",
        "version": 1,
        "classes": list(model.classes),
        "priors": list(model.priors),
        "alpha": model.alpha,
        "counts": list(model.counts),
        "meta": dict(model.meta),
        "networks": {c: network_to_dict(net) for c, net in zip(model.classes, model.networks)},
    }


def model_from_dict(d: Mapping) -> ClassifierModel:
    if d.get("format") != "MODEL-JSON" or d.get("version") != 1:
        raise ValidationError("not a MODEL-JSON v1 document")
    classes = tuple(d["classes"])
    nets = tuple(network_from_dict(d["networks"][c]) for c in classes)
    for net in nets:
        validate_dag(net)
    return ClassifierModel(classes, nets, tuple(float(p) for p in d["priors"]), float(d.get("alpha", 1.0)),
                           tuple(d.get("counts", ())), d.get("meta", {}))


def save_model(model: ClassifierModel, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model_to_dict(model), f, indent=1)


def load_model(path) -> ClassifierModel:
    with open(path, encoding="utf-8") as f:
        return model_from_dict(json.load(f))
