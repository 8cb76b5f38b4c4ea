"""Command line interface.

Every command writes its artifacts and a ``<command>_report.json`` into
``--output-dir``.  Reports embed the resolved configuration; the timestamp
is kept out of ``content_sha256`` so identical runs hash identically.

Exit codes: 0 success, 2 invalid input, 3 capacity or verification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
import warnings
from collections import Counter
from pathlib import Path

import numpy as np

from . import bench, classifier
from .bayesnet import (
    all_assignments,
    exact_posterior,
    load_network,
    log_joint_batch,
    random_tree_network,
    save_network,
)
from .errors import CapacityError, DimensionMismatch, InvalidConfig, MissingClass, TooManyQubits, ValidationError
from .qae import QaeConfig
from .qbi import InferenceRequest, infer_posterior, parse_assignment, parse_targets
from .qsim import DEFAULT_QUBIT_CAP, basis_index, encode_network
from .synthetic import stratified_split
from .wbm import DEFECT_LABELS, FLAT_CSV, WBM_TXT, NoDefectCellsWarning, parse_dataset, preprocess, read_flat_csv, write_flat_csv

THREADS_ENV = "QBI_THREADS"
EXIT_OK, EXIT_INVALID, EXIT_CAPACITY = 0, 2, 3


class VerificationFailed(CapacityError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise InvalidConfig(f"expected comma-separated numbers, got {text!r}") from None


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidConfig(f"{THREADS_ENV}={raw!r} is not an integer") from None
    return n


def _qcfg(args, a_min: float | None = None) -> QaeConfig:
    a = a_min if a_min is not None else args.a_min
    if a is None:
        raise InvalidConfig("--a-min is required for the quantum backend")
    return QaeConfig(args.epsilon, args.delta, a, qubit_cap=args.qubit_cap)


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}


def write_report(args, result: dict) -> dict:
    body = {"command": args.command, "config": _config(args), "seeds": {"seed": args.seed}, "result": result}
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"), default=str)
    report = dict(body, content_sha256=hashlib.sha256(canonical.encode()).hexdigest(),
                  timestamp=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))
    out = Path(args.output_dir) / f"{args.command.replace('-', '_')}_report.json"
    out.write_text(json.dumps(report, indent=1, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return report


# --- commands ----------------------------------------------------------------------


def cmd_ingest(args) -> dict:
    rows, labels, no_defect = [], [], 0
    for path in args.paths:
        if args.format == FLAT_CSV:
            X, lab = read_flat_csv(path)
            rows.extend(X)
            labels.extend(lab)
            continue
        for raw in parse_dataset(path, WBM_TXT):
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", NoDefectCellsWarning)
                flat = preprocess(raw)
            no_defect += sum(issubclass(w.category, NoDefectCellsWarning) for w in caught)
            rows.append(flat.bits)
            labels.append(flat.label)
    out = Path(args.output_dir) / args.out
    write_flat_csv(out, np.array(rows, dtype=np.uint8), labels)
    counts = Counter(labels)
    return {
        "output": str(out),
        "n_records": len(labels),
        "per_class": {c: counts.get(c, 0) for c in DEFECT_LABELS},
        "maps_without_defects": no_defect,
    }


def cmd_train(args) -> dict:
    X, labels = read_flat_csv(args.data)
    if not 0 < args.split <= 1:
        raise InvalidConfig("--split must lie in (0, 1]")
    classes = tuple(args.classes.split(",")) if args.classes else DEFECT_LABELS
    train_idx, test_idx = stratified_split(labels, args.split, args.split_seed)
    train_labels = [labels[i] for i in train_idx]
    counts = Counter(train_labels)
    short = [c for c in classes if counts.get(c, 0) < 2]
    if short:
        raise MissingClass(f"fewer than 2 training samples for {short}")
    explicit = _floats(args.explicit_priors) if args.explicit_priors else None
    model = classifier.train(X[train_idx], train_labels, args.alpha, args.priors, explicit, classes,
                             threads=args.threads)
    out_dir = Path(args.output_dir)
    classifier.save_model(model, out_dir / args.model_out)
    manifest = {"split": args.split, "split_seed": args.split_seed,
                "train": train_idx.tolist(), "heldout": test_idx.tolist()}
    (out_dir / "split_manifest.json").write_text(json.dumps(manifest) + "\n", encoding="utf-8")
    result = {"model": str(out_dir / args.model_out), "n_train": len(train_idx), "n_heldout": len(test_idx),
              "per_class_train": {c: counts.get(c, 0) for c in classes}, "priors": dict(zip(classes, model.priors))}
    if len(test_idx):
        held = out_dir / "heldout.csv"
        write_flat_csv(held, X[test_idx], [labels[i] for i in test_idx])
        result["heldout"] = str(held)
    return result


def _load_eval_data(args, model):
    X, labels = read_flat_csv(args.data)
    if len(labels) and X.shape[1] != model.n_features:
        raise DimensionMismatch(f"data has {X.shape[1]} features, model expects {model.n_features}")
    missing = None
    if args.missing:
        try:
            idx = [int(s) for s in args.missing.split(",") if s.strip()]
        except ValueError:
            raise InvalidConfig(f"bad --missing list {args.missing!r}") from None
        if any(not 0 <= i < model.n_features for i in idx):
            raise InvalidConfig("--missing index out of range")
        missing = np.zeros(X.shape, dtype=bool)
        missing[:, idx] = True
    return X, labels, missing


def _predict_kw(args):
    kw = {"missing": None, "seed": args.seed, "threads": args.threads}
    if args.backend == classifier.QUANTUM:
        kw["qcfg"] = _qcfg(args)
    return kw


def cmd_classify(args) -> dict:
    model = classifier.load_model(args.model)
    X, labels, missing = _load_eval_data(args, model)
    kw = _predict_kw(args)
    kw["missing"] = missing
    pred = classifier.predict(model, X, args.backend, **kw) if len(X) else []
    out = Path(args.output_dir) / "predictions.csv"
    with open(out, "w", encoding="utf-8") as f:
        f.write("index,label,predicted\n")
        for i, (t, p) in enumerate(zip(labels, pred)):
            f.write(f"{i},{t},{p}\n")
    return {"predictions": str(out), "n_samples": len(pred), "per_class_predicted": dict(Counter(pred))}


def cmd_evaluate(args) -> dict:
    model = classifier.load_model(args.model)
    X, labels, missing = _load_eval_data(args, model)
    kw = _predict_kw(args)
    kw["missing"] = missing
    ev = classifier.evaluate(model, X, labels, args.backend, **kw)
    out = Path(args.output_dir) / "confusion.csv"
    out.write_text(ev.to_csv(), encoding="utf-8")
    return dict(ev.summary(), confusion=str(out), classes=list(model.classes))


def cmd_infer(args) -> dict:
    net = load_network(args.network)
    evidence = parse_assignment(args.evidence)
    targets = parse_targets(args.targets)
    if args.backend == "exact":
        post = exact_posterior(net, evidence, targets)
        return {"backend": "exact", "targets": list(targets),
                "posterior": {"".join(map(str, y)): p for y, p in post.probs.items()}}
    if args.backend != "quantum":
        raise InvalidConfig(f"unknown backend {args.backend!r}")
    if args.a_min is None:
        raise InvalidConfig("--a-min is required for the quantum backend")
    enc = encode_network(net, args.qubit_cap).circuit
    req = InferenceRequest(evidence, targets, args.epsilon, args.delta, args.a_min, args.seed,
                           qubit_cap=args.qubit_cap)
    est = infer_posterior(enc, req)
    return {"backend": "quantum", "targets": list(targets),
            "posterior": {"".join(map(str, y)): p for y, p in est.probs.items()},
            "normalized": {"".join(map(str, y)): p for y, p in est.normalized().items()},
            "diagnostics": est.diagnostics()}


def cmd_qae_bench(args) -> dict:
    rows = bench.run_bench(_floats(args.a_grid), _floats(args.eps_grid), args.delta, args.seed)
    out = Path(args.output_dir) / "qae_bench.csv"
    out.write_text(bench.to_csv(rows), encoding="utf-8")
    return {"csv": str(out), "n_rows": len(rows), "slopes": bench.fit_slopes(rows)}


def _verify_one(net, qubit_cap) -> float:
    enc = encode_network(net, qubit_cap)
    X = all_assignments(net.n_vars)
    idx = np.array([basis_index(enc.circuit, x) for x in X])
    return float(np.max(np.abs(enc.state.probabilities()[idx] - np.exp(log_joint_batch(net, X)))))


def cmd_encode_verify(args) -> dict:
    limit = min(args.max_n, args.qubit_cap)
    if args.network:
        nets = [("file", load_network(args.network))]
    else:
        rng = np.random.default_rng(args.seed)
        nets = [(f"random[{k}]", random_tree_network(int(rng.integers(1, limit + 1)), rng)) for k in range(args.count)]
    diffs = []
    for name, net in nets:
        if net.n_vars > limit:
            raise TooManyQubits(f"{name} has {net.n_vars} variables, limit is {limit}")
        diffs.append(_verify_one(net, args.qubit_cap))
    worst = max(diffs)
    result = {"n_networks": len(nets), "max_abs_diff": worst, "tolerance": args.tol, "pass": worst <= args.tol}
    if args.save_random and not args.network:
        save_network(nets[0][1], Path(args.output_dir) / "random_network.json")
    return result


# --- parser ------------------------------------------------------------------------


def _qae_flags(p, epsilon=0.1, delta=0.05):
    p.add_argument("--epsilon", type=float, default=epsilon)
    p.add_argument("--delta", type=float, default=delta)
    p.add_argument("--a-min", type=float, default=None, help="lower bound on the estimated amplitude")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or 1)")
    common.add_argument("--qubit-cap", type=int, default=DEFAULT_QUBIT_CAP)
    common.add_argument("--output-dir", default=".")

    parser = argparse.ArgumentParser(prog="qbiwafer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="raw maps to compressed FLAT-CSV")
    p.add_argument("paths", nargs="+")
    p.add_argument("--format", choices=[WBM_TXT, FLAT_CSV], default=WBM_TXT)
    p.add_argument("--out", default="flat.csv")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common], help="fit one Chow-Liu network per class")
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--priors", choices=classifier.PRIOR_MODES, default=classifier.UNIFORM)
    p.add_argument("--explicit-priors", default=None)
    p.add_argument("--classes", default=None, help="comma-separated class subset")
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--model-out", default="model.json")
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("classify", cmd_classify, "predict labels"),
                                 ("evaluate", cmd_evaluate, "confusion matrix and accuracy")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--backend", choices=[classifier.EXACT, classifier.QUANTUM], default=classifier.EXACT)
        p.add_argument("--missing", default=None, help="comma-separated feature indices treated as missing")
        _qae_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("infer", parents=[common], help="posterior of targets given evidence")
    p.add_argument("--network", required=True)
    p.add_argument("--evidence", default="")
    p.add_argument("--targets", default="")
    p.add_argument("--backend", choices=["exact", "quantum"], default="quantum")
    _qae_flags(p, delta=0.1)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("qae-bench", parents=[common], help="query-count scaling table")
    p.add_argument("--a-grid", default=",".join(repr(a) for a in bench.DEFAULT_A_GRID))
    p.add_argument("--eps-grid", default=",".join(repr(e) for e in bench.DEFAULT_EPS_GRID))
    p.add_argument("--delta", type=float, default=0.1)
    p.set_defaults(func=cmd_qae_bench)

    p = sub.add_parser("encode-verify", parents=[common], help="check amplitudes against the joint")
    p.add_argument("--network", default=None)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--max-n", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--save-random", action="store_true")
    p.set_defaults(func=cmd_encode_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads is None:
            args.threads = _default_threads()
        if args.threads < 1:
            raise InvalidConfig("--threads must be at least 1")
        Path(args.output_dir).mkdir(parents=True, exist_ok=True)
        result = args.func(args)
        report = write_report(args, result)
        print(json.dumps(report["result"], indent=1, sort_keys=True, default=str))
        if result.get("pass") is False:
            raise VerificationFailed(f"max difference {result['max_abs_diff']:.3e} exceeds {result['tolerance']}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
