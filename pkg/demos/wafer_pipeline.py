"""Synthetic wafer maps through the full pipeline: compress, train, classify.

Raw 52x52 maps are drawn from the synthetic templates, reduced to 64 bits
and used to train one tree network per defect class.  A 16-feature variant
is then scored with the amplitude-estimation backend.

Run with ``python demos/wafer_pipeline.py``.
"""

import numpy as np

from qbiwafer.classifier import QUANTUM, evaluate, predict, train
from qbiwafer.qae import QaeConfig
from qbiwafer.synthetic import make_dataset, raw_map, stratified_split
from qbiwafer.wbm import DEFECT_LABELS, preprocess, unflatten


def show(bits):
    for row in unflatten(bits):
        print("   " + "".join("#" if b else "." for b in row))


def main():
    rng = np.random.default_rng(0)
    raw = raw_map("Edge-Ring", rng)
    print(f"raw map {raw.grid.shape}, label {raw.label}; compressed:")
    show(preprocess(raw).bits)

    maps = [raw_map(c, rng) for c in DEFECT_LABELS for _ in range(150)]
    X = np.array([preprocess(m).bits for m in maps])
    labels = [m.label for m in maps]
    tr, te = stratified_split(labels, 0.8, seed=0)
    model = train(X[tr], [labels[i] for i in tr])
    ev = evaluate(model, X[te], [labels[i] for i in te])
    print(f"\n64-feature exact backend: accuracy {ev.accuracy:.3f} on {ev.total} held-out maps")

    X16, labels16 = make_dataset(200, seed=1, side=4)
    tr, te = stratified_split(labels16, 0.8, seed=1)
    model16 = train(X16[tr], [labels16[i] for i in tr])
    subset = te[::4]
    exact = predict(model16, X16[subset])
    quantum = predict(model16, X16[subset], QUANTUM, QaeConfig(0.1, 0.05, 0.005), seed=0)
    agree = np.mean(np.array(exact) == np.array(quantum))
    print(f"16-feature model: quantum and exact labels agree on {agree:.3f} of {len(subset)} samples")


if __name__ == "__main__":
    main()
