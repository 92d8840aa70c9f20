import json

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from eegbench.cli import main
from eegbench.formats import (
    read_epoch_store,
    read_predictions,
    write_emb1,
    write_epoch_store,
    write_predictions,
)
from eegbench.preprocess import Epoch, EpochSet
from eegbench.probe import EmbeddingSet

from conftest import make_edf_bytes, make_specs


@pytest.fixture
def runner():
    return CliRunner()


def write_mdd_edf(path, subject="subj1", seed=0, n_seconds=30):
    """A 2-channel 256 Hz recording matching the mdd_mal preset."""
    rng = np.random.default_rng(seed)
    digital = rng.integers(-500, 500, size=(2, 256 * n_seconds))
    raw = make_edf_bytes(digital, specs=make_specs(2, samples_per_record=256),
                         subject=subject, samples_per_record=256)
    path.write_bytes(raw)
    return path


def synthetic_store(path, n_subjects=6, per_class=20, n_classes=2, d_time=16, seed=0):
    rng = np.random.default_rng(seed)
    epochs, eid = [], 0
    for s in range(n_subjects):
        for k in range(n_classes):
            for _ in range(per_class):
                epochs.append(Epoch(data=rng.normal(0, 1, (3, d_time)),
                                    label=k, subject_id=f"s{s}", epoch_id=eid))
                eid += 1
    es = EpochSet(epochs=epochs, n_classes=n_classes)
    write_epoch_store(path, es, ["Fz", "Cz", "Pz"], 200.0, "toy")
    return es


def embeddings_for(es, d=6, noise=0.5, seed=0):
    rng = np.random.default_rng(seed)
    n = len(es.epochs)
    feats = rng.normal(0, noise, (n, d))
    for i, ep in enumerate(es.epochs):
        feats[i, ep.label] += 3.0  # separable by construction
    return EmbeddingSet(features=feats,
                        labels=np.array([ep.label for ep in es.epochs]),
                        subject_ids=[ep.subject_id for ep in es.epochs],
                        epoch_ids=np.array([ep.epoch_id for ep in es.epochs]),
                        model_tag="labram", n_classes=es.n_classes)


class TestIngest:
    def test_mdd_recording_to_epoch_store(self, runner, tmp_path):
        f = write_mdd_edf(tmp_path / "r1.edf")
        store = tmp_path / "store"
        result = runner.invoke(main, ["ingest", str(f), "--preset", "mdd_mal",
                                      "--out", str(store), "--label", "1"])
        assert result.exit_code == 0, result.output
        es, channels, fs, dataset = read_epoch_store(store)
        assert dataset == "mdd_mal"
        assert fs == 200.0
        assert channels == ["C3", "C4"]
        # 30 s at 200 Hz in 10 s windows
        assert len(es.epochs) == 3
        assert es.epochs[0].data.shape == (2, 2000)
        assert all(ep.label == 1 for ep in es.epochs)

    def test_corrupt_file_isolated(self, runner, tmp_path):
        good = write_mdd_edf(tmp_path / "good.edf")
        bad = tmp_path / "bad.edf"
        bad.write_bytes(b"\x00" * 64)  # truncated header
        store = tmp_path / "store"
        result = runner.invoke(main, ["ingest", str(good), str(bad),
                                      "--preset", "mdd_mal",
                                      "--out", str(store), "--label", "0"])
        assert result.exit_code == 3
        es, _, _, _ = read_epoch_store(store)
        assert len(es.epochs) == 3  # the good file still landed

    def test_all_files_corrupt_is_usage_error(self, runner, tmp_path):
        bad = tmp_path / "bad.edf"
        bad.write_bytes(b"nonsense")
        result = runner.invoke(main, ["ingest", str(bad), "--preset", "mdd_mal",
                                      "--out", str(tmp_path / "s"), "--label", "0"])
        assert result.exit_code == 2

    def test_missing_required_option(self, runner, tmp_path):
        f = write_mdd_edf(tmp_path / "r.edf")
        result = runner.invoke(main, ["ingest", str(f), "--out", "x"])
        assert result.exit_code == 2

    def test_out_resolved_under_env_root(self, runner, tmp_path):
        f = write_mdd_edf(tmp_path / "r.edf")
        result = runner.invoke(main, ["ingest", str(f), "--preset", "mdd_mal",
                                      "--out", "store", "--label", "0"],
                               env={"EEGBENCH_OUT": str(tmp_path)})
        assert result.exit_code == 0, result.output
        assert (tmp_path / "store" / "meta.json").exists()


class TestFoldsAndSample:
    def test_folds_then_sample(self, runner, tmp_path):
        store = tmp_path / "store"
        synthetic_store(store)
        folds_path = tmp_path / "folds.json"
        result = runner.invoke(main, ["folds", "--store", str(store),
                                      "--scheme", "kfold3", "--seed", "1",
                                      "--out", str(folds_path)])
        assert result.exit_code == 0, result.output
        payload = json.loads(folds_path.read_text())
        assert len(payload) == 3
        assert {"fold_id", "train", "val", "test"} <= set(payload[0])

        sample_path = tmp_path / "sample.txt"
        result = runner.invoke(main, ["sample", "--store", str(store),
                                      "--folds", str(folds_path),
                                      "--budget", "40", "--n-subjects", "2",
                                      "--seed", "0", "--out", str(sample_path)])
        assert result.exit_code == 0, result.output
        ids = [int(x) for x in sample_path.read_text().split()]
        assert len(ids) == 40

    def test_unsatisfiable_budget_exits_4(self, runner, tmp_path):
        store = tmp_path / "store"
        synthetic_store(store, per_class=3)
        folds_path = tmp_path / "folds.json"
        runner.invoke(main, ["folds", "--store", str(store), "--out", str(folds_path)])
        result = runner.invoke(main, ["sample", "--store", str(store),
                                      "--folds", str(folds_path),
                                      "--budget", "500", "--n-subjects", "2",
                                      "--out", str(tmp_path / "s.txt")])
        assert result.exit_code == 4


class TestProbeAndScore:
    def test_probe_then_score(self, runner, tmp_path):
        store = tmp_path / "store"
        es = synthetic_store(store)
        emb = embeddings_for(es)
        split = np.arange(len(es.epochs))
        train, val, test = split[:160], split[160:200], split[200:]

        def subset(rows, name):
            sub = EmbeddingSet(features=emb.features[rows], labels=emb.labels[rows],
                               subject_ids=[emb.subject_ids[i] for i in rows],
                               epoch_ids=emb.epoch_ids[rows],
                               model_tag="labram", n_classes=2)
            path = tmp_path / name
            write_emb1(path, sub)
            return path

        paths = [subset(r, n) for r, n in
                 [(train, "tr.emb1"), (val, "va.emb1"), (test, "te.emb1")]]
        preds_path = tmp_path / "preds.csv"
        result = runner.invoke(main, ["probe",
                                      "--train-emb", str(paths[0]),
                                      "--val-emb", str(paths[1]),
                                      "--test-emb", str(paths[2]),
                                      "--lr", "0.1", "--out", str(preds_path)])
        assert result.exit_code == 0, result.output
        _, _, proba, rejected = read_predictions(preds_path)
        assert rejected == 0
        assert proba.shape == (40, 2)

        result = runner.invoke(main, ["score", "--preds", str(preds_path)])
        assert result.exit_code == 0, result.output
        scores = dict(line.split() for line in result.output.strip().splitlines())
        assert float(scores["bac"]) > 95.0
        assert "auroc" in scores

    def test_score_rejects_bad_rows(self, runner, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("epoch_id,true_label,p_0,p_1\n"
                        "1,0,0.6,0.4\n2,1,0.2,0.8\n3,1,0.9,0.3\n")
        result = runner.invoke(main, ["score", "--preds", str(path)])
        assert result.exit_code == 0
        assert "rejected 1" in result.output


class TestEfficiencyAndReport:
    def make_results(self, tmp_path):
        lines = ["model_tag,setting,dataset_id,budget,fold_id,seed,metric_name,value"]
        for fold in range(5):
            lines.append(f"labram,linear_probe,toy,240,{fold},0,bac,{0.70 + 0.01 * fold!r}")
            lines.append(f"cnn,supervised,toy,240,{fold},0,bac,{0.60!r}")
        path = tmp_path / "results.csv"
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_se_summary(self, runner, tmp_path):
        path = self.make_results(tmp_path)
        result = runner.invoke(main, ["efficiency", "--results", str(path),
                                      "--kind", "se", "--denominator", "supervised",
                                      "--n-classes", "2"])
        assert result.exit_code == 0, result.output
        assert "SE (bac" in result.output
        assert "n=5" in result.output

    def test_unpaired_exits_4(self, runner, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("model_tag,setting,dataset_id,budget,fold_id,seed,metric_name,value\n"
                        "labram,linear_probe,toy,240,0,0,bac,0.7\n")
        result = runner.invoke(main, ["efficiency", "--results", str(path),
                                      "--kind", "se", "--n-classes", "2"])
        assert result.exit_code == 4

    def test_report_table(self, runner, tmp_path):
        path = self.make_results(tmp_path)
        result = runner.invoke(main, ["report", "--results", str(path),
                                      "--kind", "se", "--n-classes", "2"])
        assert result.exit_code == 0, result.output
        assert "labram" in result.output


class TestEvaluateReplay:
    def test_byte_identical_replay(self, runner, tmp_path):
        store = tmp_path / "store"
        es = synthetic_store(store)
        emb_path = tmp_path / "labram.emb1"
        write_emb1(emb_path, embeddings_for(es))

        sup_path = tmp_path / "cnn.csv"
        rng = np.random.default_rng(7)
        raw = rng.uniform(0.05, 0.95, len(es.epochs))
        proba = np.stack([1 - raw, raw], axis=1)
        write_predictions(sup_path, [ep.epoch_id for ep in es.epochs],
                          [ep.label for ep in es.epochs], proba)

        config = {
            "epoch_store": str(store),
            "dataset_id": "toy",
            "cv": {"scheme": "kfold2", "seed": 0},
            "seeds": [0, 1],
            "budget": {"s_total": 40, "n_subjects": 2},
            "probe": {"lr": 0.1, "max_epochs": 15},
            "embeddings": {"labram": str(emb_path)},
            "predictions": {"cnn": {"setting": "supervised", "path": str(sup_path)}},
        }
        cfg_path = tmp_path / "config.yaml"
        cfg_path.write_text(yaml.safe_dump(config))

        result = runner.invoke(main, ["evaluate", "--config", str(cfg_path),
                                      "--out", str(tmp_path / "run1")])
        assert result.exit_code == 0, result.output
        result = runner.invoke(main, ["replay",
                                      "--manifest", str(tmp_path / "run1" / "manifest.json"),
                                      "--out", str(tmp_path / "run2")])
        assert result.exit_code == 0, result.output
        first = (tmp_path / "run1" / "results.csv").read_bytes()
        second = (tmp_path / "run2" / "results.csv").read_bytes()
        assert first == second
        assert b"linear_probe" in first and b"supervised" in first
