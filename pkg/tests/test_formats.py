import json
import struct

import numpy as np
import pytest

from eegbench.efficiency import CellResult
from eegbench.formats import (
    RunManifest,
    config_hash,
    read_emb1,
    read_epoch_store,
    read_manifest,
    read_predictions,
    read_results,
    write_emb1,
    write_epoch_store,
    write_predictions,
    write_results,
)
from eegbench.preprocess import Epoch, EpochSet
from eegbench.probe import EmbeddingSet


def toy_embeddings(n=6, d=3, k=2, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingSet(
        features=rng.normal(0, 1, (n, d)),
        labels=rng.integers(0, k, n),
        subject_ids=[f"s{i % 2}" for i in range(n)],
        epoch_ids=np.arange(100, 100 + n),
        model_tag="labram",
        n_classes=k,
    )


class TestEmb1:
    def test_roundtrip(self, tmp_path):
        emb = toy_embeddings()
        path = tmp_path / "e.emb1"
        write_emb1(path, emb, dataset_id="toy")
        back = read_emb1(path)
        assert np.allclose(back.features, emb.features.astype(np.float32), atol=0)
        assert np.array_equal(back.labels, emb.labels)
        assert np.array_equal(back.epoch_ids, emb.epoch_ids)
        assert back.subject_ids == emb.subject_ids
        assert back.model_tag == "labram"
        assert back.n_classes == 2

    def test_header_layout(self, tmp_path):
        emb = toy_embeddings(n=4, d=5, k=3)
        path = tmp_path / "e.emb1"
        write_emb1(path, emb)
        raw = path.read_bytes()
        assert raw[:4] == b"EMB1"
        assert struct.unpack("<IIII", raw[4:20]) == (1, 4, 5, 3)
        assert len(raw) == 20 + 4 * (8 + 4 + 5 * 4)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.emb1"
        path.write_bytes(b"XXXX" + b"\x00" * 16)
        with pytest.raises(ValueError, match="magic"):
            read_emb1(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "bad.emb1"
        path.write_bytes(b"EMB1" + struct.pack("<IIII", 7, 0, 0, 0))
        with pytest.raises(ValueError, match="version"):
            read_emb1(path)

    def test_length_mismatch(self, tmp_path):
        emb = toy_embeddings()
        path = tmp_path / "e.emb1"
        write_emb1(path, emb)
        path.write_bytes(path.read_bytes()[:-1])
        with pytest.raises(ValueError, match="bytes"):
            read_emb1(path)

    def test_sidecar_metadata(self, tmp_path):
        path = tmp_path / "e.emb1"
        write_emb1(path, toy_embeddings(), dataset_id="tuev",
                   extra_meta={"note": "x"})
        meta = json.loads((tmp_path / "e.emb1.meta.json").read_text())
        assert meta["dataset_id"] == "tuev"
        assert meta["model_tag"] == "labram"
        assert meta["note"] == "x"

    def test_missing_sidecar_tolerated(self, tmp_path):
        path = tmp_path / "e.emb1"
        write_emb1(path, toy_embeddings())
        (tmp_path / "e.emb1.meta.json").unlink()
        back = read_emb1(path)
        assert back.model_tag == "unknown"
        assert back.subject_ids == [""] * 6


class TestPredictions:
    def test_roundtrip(self, tmp_path):
        proba = np.array([[0.7, 0.3], [0.1, 0.9]])
        path = tmp_path / "p.csv"
        write_predictions(path, [5, 6], [0, 1], proba)
        ids, ys, back, rejected = read_predictions(path)
        assert rejected == 0
        assert ids.tolist() == [5, 6]
        assert ys.tolist() == [0, 1]
        assert np.array_equal(back, proba)

    def test_rows_not_summing_to_one_rejected(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(
            "epoch_id,true_label,p_0,p_1\n"
            "1,0,0.6,0.4\n"
            "2,1,0.6,0.5\n"           # sums to 1.1
            "3,0,0.5,0.49999999\n"    # within 1e-6
        )
        ids, _, _, rejected = read_predictions(path)
        assert rejected == 1
        assert ids.tolist() == [1, 3]

    def test_bad_header(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("id,label,p_0\n1,0,1.0\n")
        with pytest.raises(ValueError, match="header"):
            read_predictions(path)


class TestResults:
    def test_roundtrip(self, tmp_path):
        cells = [
            CellResult("labram", "linear_probe", "tuev", 0, 1, "bac", 0.625, 240),
            CellResult("cnn", "supervised", "tuev", 1, 2, "kappa", 0.5, None),
        ]
        path = tmp_path / "results.csv"
        write_results(path, cells)
        assert read_results(path) == cells

    def test_value_roundtrips_exactly(self, tmp_path):
        value = 0.1 + 0.2  # not representable as a short decimal
        path = tmp_path / "results.csv"
        write_results(path, [CellResult("m", "s", "d", 0, 0, "bac", value, 1)])
        assert read_results(path)[0].value == value

    def test_bad_header(self, tmp_path):
        path = tmp_path / "results.csv"
        path.write_text("a,b\n")
        with pytest.raises(ValueError, match="header"):
            read_results(path)


class TestEpochStore:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        epochs = [Epoch(data=rng.normal(0, 1, (3, 8)).astype(np.float32).astype(float),
                        label=i % 2, subject_id=f"s{i}", epoch_id=i, t_start_s=2.0 * i)
                  for i in range(4)]
        es = EpochSet(epochs=epochs, n_classes=2, class_names=["rest", "move"])
        write_epoch_store(tmp_path / "store", es, ["Fz", "Cz", "Pz"], 200.0, "toy",
                          log=["notch 50"])
        back, channels, fs, dataset = read_epoch_store(tmp_path / "store")
        assert channels == ["Fz", "Cz", "Pz"]
        assert fs == 200.0
        assert dataset == "toy"
        assert back.n_classes == 2
        assert back.class_names == ["rest", "move"]
        for a, b in zip(back.epochs, epochs):
            assert np.array_equal(a.data, b.data)
            assert (a.label, a.subject_id, a.epoch_id, a.t_start_s) == \
                (b.label, b.subject_id, b.epoch_id, b.t_start_s)

    def test_storage_is_f32_little_endian(self, tmp_path):
        es = EpochSet(epochs=[Epoch(data=np.ones((2, 4)), label=0, subject_id="s")],
                      n_classes=2)
        write_epoch_store(tmp_path / "store", es, ["a", "b"], 100.0, "d")
        raw = (tmp_path / "store" / "epochs.f32").read_bytes()
        assert len(raw) == 1 * 2 * 4 * 4
        assert np.frombuffer(raw, dtype="<f4").tolist() == [1.0] * 8


class TestManifest:
    def test_config_hash_is_order_insensitive(self):
        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})

    def test_roundtrip(self, tmp_path):
        manifest = RunManifest(config={"seed": 3}, config_hash=config_hash({"seed": 3}),
                               harness_version="0.1.0",
                               fold_samples={"0:1": [4, 5]}, timestamp="t")
        path = tmp_path / "manifest.json"
        path.write_text(manifest.to_json())
        assert read_manifest(path) == manifest
