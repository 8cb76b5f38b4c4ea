import math

import numpy as np
import pytest

from qbiwafer.bayesnet import (
    all_assignments,
    log_joint_batch,
    random_tree_network,
    sample,
)
from qbiwafer.classifier import (
    QUANTUM,
    ClassifierModel,
    argmax_label,
    classify,
    confusion,
    evaluate,
    exact_scores,
    load_model,
    log_likelihood,
    model_from_dict,
    model_to_dict,
    predict,
    save_model,
    train,
)
from qbiwafer.errors import DimensionMismatch, EmptyClass, MissingClass, TooManyQubits, ValidationError
from qbiwafer.qae import QaeConfig
from qbiwafer.qsim import encode_network, measure_amplitude
from qbiwafer.synthetic import make_dataset

TWO = ("Center", "Normal")


def two_class_data(n_features=8, per_class=3000, seed=0):
    rng = np.random.default_rng(seed)
    gens = [random_tree_network(n_features, rng) for _ in TWO]
    X = np.concatenate([sample(g, per_class, rng) for g in gens])
    labels = [c for c in TWO for _ in range(per_class)]
    return gens, X, labels


@pytest.fixture(scope="module")
def small_model():
    X, labels = make_dataset(40, seed=1, side=4)
    return train(X, labels), X, labels


class TestTrain:
    def test_regenerates_generators(self):
        gens, X, labels = two_class_data()
        model = train(X, labels, classes=TWO)
        A = all_assignments(8)
        for gen, net in zip(gens, model.networks):
            p = np.exp(log_joint_batch(gen, A))
            q = np.exp(log_joint_batch(net, A))
            assert float(np.sum(p * np.log(p / q))) <= 0.05
            assert net.max_indegree <= 1

    def test_uniform_priors(self, small_model):
        model, _, _ = small_model
        assert model.priors == pytest.approx([1 / 9] * 9)
        assert model.counts == (40,) * 9

    def test_empirical_priors(self):
        X, labels = make_dataset(10, seed=2, side=4, classes=TWO)
        X, labels = X[:15], labels[:15]
        model = train(X, labels, priors="empirical", classes=TWO)
        assert model.priors == pytest.approx([10 / 15, 5 / 15])

    def test_explicit_priors(self):
        X, labels = make_dataset(5, seed=2, side=4, classes=TWO)
        model = train(X, labels, priors="explicit", explicit_priors=[0.3, 0.7], classes=TWO)
        assert model.priors == pytest.approx([0.3, 0.7])
        with pytest.raises(ValidationError):
            train(X, labels, priors="explicit", explicit_priors=[0.3, 0.3], classes=TWO)

    def test_missing_class(self):
        X, labels = make_dataset(5, seed=0, side=4, classes=("Center",))
        with pytest.raises(MissingClass):
            train(X, labels, priors="empirical")

    def test_empty(self):
        with pytest.raises(EmptyClass):
            train(np.zeros((0, 4)), [])

    def test_unknown_label(self):
        with pytest.raises(ValidationError):
            train(np.zeros((2, 4)), ["Blob", "Center"], classes=TWO)

    def test_threads_identical(self, small_model):
        model, X, labels = small_model
        other = train(X, labels, threads=4)
        assert model_to_dict(other) == model_to_dict(model)

    def test_model_validation(self, small_model):
        model, _, _ = small_model
        with pytest.raises(ValidationError):
            ClassifierModel(model.classes, model.networks, (0.5,) * 9)


class TestScoring:
    def test_likelihood_vs_amplitude(self, small_model):
        model, X, _ = small_model
        rng = np.random.default_rng(3)
        for c in range(9):
            enc, state = encode_network(model.networks[c])
            for k in rng.integers(0, len(X), size=5):
                miss = rng.random(16) < 0.3
                ev = {i: int(X[k, i]) for i in range(16) if not miss[i]}
                amp = measure_amplitude(state, enc.pattern(ev))
                assert math.exp(log_likelihood(model, c, X[k], miss)) == pytest.approx(amp, abs=1e-10)

    def test_fully_missing(self, small_model):
        model, X, _ = small_model
        for c in model.classes:
            assert log_likelihood(model, c, X[0], np.ones(16, dtype=bool)) == pytest.approx(0.0, abs=1e-12)

    def test_impossible_sample(self):
        from qbiwafer.bayesnet import BayesianNetwork, Cpt
        net = BayesianNetwork((Cpt.root(1.0), Cpt.from_p1((0,), [0.0, 1.0])))
        model = ClassifierModel(TWO, (net, net), (0.5, 0.5))
        assert log_likelihood(model, 0, [1, 1]) == -math.inf

    def test_width_mismatch(self, small_model):
        model, _, _ = small_model
        with pytest.raises(DimensionMismatch):
            exact_scores(model, np.zeros((1, 5)))

    def test_tie_break(self):
        assert argmax_label(("b", "a", "c"), [1.0, 1.0, 0.0]) == "a"
        assert argmax_label(("b", "a"), [-math.inf, -math.inf]) == "a"

    def test_identical_networks_tie(self):
        gens, _, _ = two_class_data(per_class=1)
        net = gens[0]
        model = ClassifierModel(("Normal", "Center"), (net, net), (0.5, 0.5))
        assert classify(model, np.zeros(8)).label == "Center"

    def test_modal_samples(self, small_model):
        model, _, _ = small_model
        A = all_assignments(16)
        for c, net in zip(model.classes, model.networks):
            mode = A[int(np.argmax(log_joint_batch(net, A)))]
            assert classify(model, mode).label == c

    def test_deterministic(self, small_model):
        model, X, _ = small_model
        assert predict(model, X) == predict(model, X)


class TestQuantum:
    def test_refuses_wide_model(self):
        X, labels = make_dataset(4, seed=0, classes=TWO)
        model = train(X, labels, classes=TWO)
        with pytest.raises(TooManyQubits):
            classify(model, X[0], backend=QUANTUM)

    def test_agrees_with_exact(self):
        X, labels = make_dataset(150, seed=4, side=4, classes=TWO)
        model = train(X, labels, classes=TWO)
        test = make_dataset(50, seed=5, side=4, classes=TWO)[0]
        qcfg = QaeConfig(0.1, 0.05, 0.005)
        agree = np.mean(np.array(predict(model, test, QUANTUM, qcfg, seed=7)) == np.array(predict(model, test)))
        assert agree >= 0.95

    def test_thread_invariant(self, small_model):
        model, X, _ = small_model
        qcfg = QaeConfig(0.2, 0.1, 0.01)
        a = predict(model, X[:12], QUANTUM, qcfg, seed=3)
        b = predict(model, X[:12], QUANTUM, qcfg, seed=3, threads=4)
        assert a == b

    def test_unknown_backend(self, small_model):
        model, X, _ = small_model
        with pytest.raises(ValidationError):
            classify(model, X[0], backend="analog")


class TestEvaluate:
    def test_single_correct(self, small_model):
        model, X, labels = small_model
        pred = classify(model, X[0]).label
        ev = evaluate(model, X[:1], [pred])
        assert ev.accuracy == 1.0 and ev.total == 1

    def test_row_sums(self, small_model):
        model, X, labels = small_model
        ev = evaluate(model, X, labels)
        assert ev.counts.sum(axis=1).tolist() == [40] * 9
        assert ev.accuracy == pytest.approx(np.trace(ev.counts) / 360)
        assert set(ev.summary()) == {"n_samples", "accuracy", "precision", "recall"}
        assert ev.to_csv().splitlines()[0].startswith("true\\pred,Normal")

    def test_confusion(self):
        c = confusion(TWO, ["Center", "Normal", "Normal"], ["Center", "Center", "Normal"])
        assert c.tolist() == [[1, 0], [1, 1]]

    def test_empty(self, small_model):
        model, _, _ = small_model
        with pytest.raises(EmptyClass):
            evaluate(model, np.zeros((0, 16)), [])


class TestPersistence:
    def test_round_trip(self, tmp_path, small_model):
        model, X, _ = small_model
        p = tmp_path / "model.json"
        save_model(model, p)
        back = load_model(p)
        assert back.classes == model.classes and back.priors == model.priors
        assert np.array_equal(exact_scores(back, X), exact_scores(model, X))

    def test_wrong_format(self):
        with pytest.raises(ValidationError):
            model_from_dict({"format": "BN-JSON"})
