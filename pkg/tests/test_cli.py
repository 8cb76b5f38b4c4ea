import json

import numpy as np
import pytest

from qbiwafer.bayesnet import save_network
from qbiwafer.cli import main
from qbiwafer.synthetic import make_dataset, raw_map
from qbiwafer.wbm import DEFECT_LABELS, RawWaferMap, read_flat_csv, write_flat_csv, write_wbm_txt

from conftest import copy_chain


def run(*argv):
    return main([str(a) for a in argv])


def report(d, cmd):
    return json.loads((d / f"{cmd}_report.json").read_text())


@pytest.fixture
def flat16(tmp_path):
    X, labels = make_dataset(30, seed=0, side=4)
    p = tmp_path / "flat.csv"
    write_flat_csv(p, X, labels)
    return p


class TestIngest:
    def test_empty(self, tmp_path):
        src = tmp_path / "in.txt"
        src.write_text("")
        assert run("ingest", src, "--output-dir", tmp_path) == 0
        assert (tmp_path / "flat.csv").read_text() == ""
        assert report(tmp_path, "ingest")["result"]["n_records"] == 0

    def test_zero_map(self, tmp_path):
        src = tmp_path / "in.txt"
        write_wbm_txt(src, [RawWaferMap(np.zeros((52, 52), dtype=int), "Normal")])
        assert run("ingest", src, "--output-dir", tmp_path) == 0
        X, labels = read_flat_csv(tmp_path / "flat.csv")
        assert labels == ["Normal"] and not X.any() and X.shape == (1, 64)
        assert report(tmp_path, "ingest")["result"]["maps_without_defects"] == 1

    def test_eighteen_maps(self, tmp_path):
        rng = np.random.default_rng(0)
        labels = [DEFECT_LABELS[k % 9] for k in range(18)]
        src = tmp_path / "in.txt"
        write_wbm_txt(src, [raw_map(c, rng) for c in labels])
        assert run("ingest", src, "--output-dir", tmp_path) == 0
        _, back = read_flat_csv(tmp_path / "flat.csv")
        assert back == labels
        assert report(tmp_path, "ingest")["result"]["per_class"] == {c: 2 for c in DEFECT_LABELS}

    def test_parse_error_exit(self, tmp_path, capsys):
        src = tmp_path / "in.txt"
        src.write_text("Center;" + ",".join(["0"] * 2703) + "\n")
        assert run("ingest", src, "--output-dir", tmp_path) == 2
        assert "line 1" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run("ingest", tmp_path / "nope.txt", "--output-dir", tmp_path) == 2

    def test_unknown_flag(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("ingest", "x", "--frobnicate")
        assert exc.value.code == 2


class TestTrain:
    def test_split(self, tmp_path, flat16):
        assert run("train", "--data", flat16, "--output-dir", tmp_path) == 0
        r = report(tmp_path, "train")["result"]
        assert r["n_train"] == 216 and r["n_heldout"] == 54
        assert set(r["per_class_train"].values()) == {24}
        assert (tmp_path / "heldout.csv").exists()

    def test_full_split_no_heldout(self, tmp_path, flat16):
        assert run("train", "--data", flat16, "--split", 1.0, "--output-dir", tmp_path) == 0
        assert not (tmp_path / "heldout.csv").exists()

    def test_manifest_deterministic(self, tmp_path, flat16):
        for d in ("a", "b"):
            assert run("train", "--data", flat16, "--split-seed", 4, "--output-dir", tmp_path / d) == 0
        assert (tmp_path / "a" / "split_manifest.json").read_text() == (tmp_path / "b" / "split_manifest.json").read_text()

    def test_missing_class(self, tmp_path):
        X, labels = make_dataset(5, seed=0, side=4, classes=("Center", "Loc"))
        p = tmp_path / "two.csv"
        write_flat_csv(p, X, labels)
        assert run("train", "--data", p, "--output-dir", tmp_path) == 2
        assert run("train", "--data", p, "--classes", "Center,Loc", "--output-dir", tmp_path) == 0


class TestEvaluate:
    @pytest.fixture
    def trained(self, tmp_path, flat16):
        assert run("train", "--data", flat16, "--output-dir", tmp_path) == 0
        return tmp_path

    def test_exact(self, trained):
        d = trained
        assert run("evaluate", "--model", d / "model.json", "--data", d / "heldout.csv", "--output-dir", d) == 0
        r = report(d, "evaluate")["result"]
        assert r["n_samples"] == 54 and 0 <= r["accuracy"] <= 1
        assert (d / "confusion.csv").read_text().startswith("true\\pred,")

    def test_classify(self, trained):
        d = trained
        assert run("classify", "--model", d / "model.json", "--data", d / "heldout.csv",
                   "--missing", "0,3", "--output-dir", d) == 0
        lines = (d / "predictions.csv").read_text().splitlines()
        assert lines[0] == "index,label,predicted" and len(lines) == 55

    def test_quantum_needs_a_min(self, trained):
        d = trained
        assert run("evaluate", "--model", d / "model.json", "--data", d / "heldout.csv",
                   "--backend", "quantum", "--output-dir", d) == 2

    def test_quantum(self, trained):
        d = trained
        assert run("classify", "--model", d / "model.json", "--data", d / "heldout.csv", "--backend", "quantum",
                   "--a-min", 0.01, "--epsilon", 0.2, "--output-dir", d) == 0

    def test_dimension_mismatch(self, trained, tmp_path):
        X, labels = make_dataset(2, seed=0, side=3)
        p = tmp_path / "nine.csv"
        write_flat_csv(p, X, labels)
        assert run("evaluate", "--model", trained / "model.json", "--data", p, "--output-dir", trained) == 2

    def test_bad_missing(self, trained):
        d = trained
        assert run("classify", "--model", d / "model.json", "--data", d / "heldout.csv",
                   "--missing", "a", "--output-dir", d) == 2

    def test_capacity_exit(self, tmp_path):
        X, labels = make_dataset(3, seed=0)
        p = tmp_path / "wide.csv"
        write_flat_csv(p, X, labels)
        assert run("train", "--data", p, "--split", 1.0, "--output-dir", tmp_path) == 0
        assert run("evaluate", "--model", tmp_path / "model.json", "--data", p, "--backend", "quantum",
                   "--a-min", 0.01, "--output-dir", tmp_path) == 3


class TestInfer:
    def test_exact_and_quantum(self, tmp_path):
        net = tmp_path / "net.json"
        save_network(copy_chain(), net)
        assert run("infer", "--network", net, "--evidence", "1=0", "--targets", "0", "--backend", "exact",
                   "--output-dir", tmp_path) == 0
        assert report(tmp_path, "infer")["result"]["posterior"] == {"0": 1.0, "1": 0.0}
        assert run("infer", "--network", net, "--evidence", "1=0", "--targets", "0", "--a-min", 0.5,
                   "--output-dir", tmp_path) == 0
        r = report(tmp_path, "infer")["result"]
        assert r["posterior"]["1"] == 0.0 and r["diagnostics"]["total_grover_calls"] > 0

    def test_bad_evidence(self, tmp_path):
        net = tmp_path / "net.json"
        save_network(copy_chain(), net)
        assert run("infer", "--network", net, "--evidence", "1=7", "--targets", "0", "--backend", "exact",
                   "--output-dir", tmp_path) == 2

    def test_zero_evidence(self, tmp_path):
        net = tmp_path / "net.json"
        save_network(copy_chain(1.0), net)
        assert run("infer", "--network", net, "--evidence", "0=1", "--targets", "1", "--backend", "exact",
                   "--output-dir", tmp_path) == 3

    def test_malformed_network(self, tmp_path):
        net = tmp_path / "net.json"
        net.write_text("{not json")
        assert run("infer", "--network", net, "--backend", "exact", "--output-dir", tmp_path) == 2


class TestBenchAndVerify:
    def test_bench_single_point(self, tmp_path):
        assert run("qae-bench", "--a-grid", 0.25, "--eps-grid", 0.1, "--output-dir", tmp_path) == 0
        assert len((tmp_path / "qae_bench.csv").read_text().splitlines()) == 2

    def test_bench_invalid(self, tmp_path):
        assert run("qae-bench", "--a-grid", "0", "--eps-grid", 0.1, "--output-dir", tmp_path) == 2
        assert run("qae-bench", "--a-grid", "x", "--output-dir", tmp_path) == 2

    def test_encode_verify_random(self, tmp_path):
        assert run("encode-verify", "--count", 50, "--save-random", "--output-dir", tmp_path) == 0
        r = report(tmp_path, "encode_verify")["result"]
        assert r["pass"] and r["max_abs_diff"] <= 1e-10
        assert (tmp_path / "random_network.json").exists()

    def test_encode_verify_file(self, tmp_path):
        net = tmp_path / "net.json"
        save_network(copy_chain(), net)
        assert run("encode-verify", "--network", net, "--output-dir", tmp_path) == 0
        assert run("encode-verify", "--network", net, "--max-n", 1, "--output-dir", tmp_path) == 3

    def test_reproducible_hash(self, tmp_path):
        hashes = []
        for _ in range(2):
            assert run("encode-verify", "--count", 5, "--seed", 9, "--output-dir", tmp_path) == 0
            hashes.append(report(tmp_path, "encode_verify")["content_sha256"])
        assert hashes[0] == hashes[1]
        r = report(tmp_path, "encode_verify")
        assert r["config"]["seed"] == 9 and "timestamp" in r

    def test_threads_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("QBI_THREADS", "3")
        assert run("encode-verify", "--count", 2, "--output-dir", tmp_path) == 0
        assert report(tmp_path, "encode_verify")["config"]["threads"] == 3
        assert run("encode-verify", "--count", 2, "--threads", 2, "--output-dir", tmp_path) == 0
        assert report(tmp_path, "encode_verify")["config"]["threads"] == 2
        monkeypatch.setenv("QBI_THREADS", "many")
        assert run("encode-verify", "--count", 2, "--output-dir", tmp_path) == 2
