"""Run orchestration: the evaluate loop over folds x seeds x settings, run
manifests, and deterministic result emission."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import montage as montage_mod
from .efficiency import CellResult
from .errors import HarnessError
from .formats import (
    RunManifest,
    config_hash,
    read_emb1,
    read_epoch_store,
    read_predictions,
    write_predictions,
    write_results,
)
from .metrics import score_predictions
from .probe import EmbeddingSet, predict_proba, train_probe
from .sampling import BudgetSpec, make_folds, sample_budget

HARNESS_VERSION = "0.1.0"


def _metric_rows(report, model_tag, setting, dataset_id, fold_id, seed, budget):
    rows = [
        CellResult(model_tag, setting, dataset_id, fold_id, seed, "bac", report.bac, budget),
        CellResult(model_tag, setting, dataset_id, fold_id, seed, "f1_macro",
                   report.f1_macro, budget),
        CellResult(model_tag, setting, dataset_id, fold_id, seed, "kappa",
                   report.kappa, budget),
    ]
    if report.auroc is not None:
        rows.append(CellResult(model_tag, setting, dataset_id, fold_id, seed,
                               "auroc", report.auroc, budget))
    return rows


def _subset(emb: EmbeddingSet, epoch_ids: list[int]) -> EmbeddingSet:
    index = {int(e): i for i, e in enumerate(emb.epoch_ids)}
    missing = [e for e in epoch_ids if e not in index]
    if missing:
        raise HarnessError(f"embeddings missing epoch ids {missing[:5]}...")
    rows = [index[e] for e in epoch_ids]
    return EmbeddingSet(
        features=emb.features[rows],
        labels=emb.labels[rows],
        subject_ids=[emb.subject_ids[i] for i in rows],
        epoch_ids=emb.epoch_ids[rows],
        model_tag=emb.model_tag,
        n_classes=emb.n_classes,
    )


def evaluate(config: dict, output_dir: str | Path) -> tuple[Path, Path]:
    """Run a full evaluation per config; returns (results_path, manifest_path).

    Deterministic: config + inputs + seeds fix every output byte.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    epoch_set, channels, fs_hz, dataset_id = read_epoch_store(config["epoch_store"])
    dataset_id = config.get("dataset_id", dataset_id)
    seeds = list(config.get("seeds", [0]))

    resolved = {"dataset_id": dataset_id, "fs_hz": fs_hz,
                "significance_test": "wilcoxon_signed_rank_one_sided (sign test for n<10)",
                "validation_excluded_from_budget": True}

    mont = config.get("montage")
    if mont:
        taxonomy = montage_mod.classify_channels(channels)
        if mont.get("lobe"):
            selection = montage_mod.select_lobe_restricted(taxonomy, mont["lobe"])
        else:
            selection = montage_mod.select_sparse(
                taxonomy, mont["sparse_n"], mont.get("seed", 0))
        epoch_set, channels = montage_mod.apply(selection, epoch_set, channels)
        resolved["montage_selected"] = channels

    cv = config.get("cv", {})
    scheme = cv.get("scheme", "kfold5")
    folds = make_folds(sorted(set(epoch_set.subject_ids)), scheme, cv.get("seed", 0))
    resolved["cv_scheme"] = scheme

    budget_cfg = config.get("budget")
    probe_cfg = dict(config.get("probe", {}))

    epochs_by_subject: dict[str, list[int]] = {}
    for ep in epoch_set.epochs:
        epochs_by_subject.setdefault(ep.subject_id, []).append(ep.epoch_id)
    id_to_index = {ep.epoch_id: i for i, ep in enumerate(epoch_set.epochs)}

    cells: list[CellResult] = []
    fold_samples: dict[str, list[int]] = {}
    preds_dir = output_dir / "predictions"
    preds_dir.mkdir(exist_ok=True)

    embeddings = config.get("embeddings", {})
    for model_tag in sorted(embeddings):
        emb = read_emb1(embeddings[model_tag])
        for fold in folds:
            for seed in seeds:
                train_ids = [e for s in fold.train_subjects for e in epochs_by_subject.get(s, [])]
                val_ids = [e for s in fold.val_subjects for e in epochs_by_subject.get(s, [])]
                test_ids = [e for s in fold.test_subjects for e in epochs_by_subject.get(s, [])]
                budget = None
                if budget_cfg:
                    budget = int(budget_cfg["s_total"])
                    spec = BudgetSpec(s_total=budget,
                                      n_subjects=int(budget_cfg["n_subjects"]),
                                      seed=seed)
                    try:
                        _, picked = sample_budget(epoch_set, spec, fold.train_subjects)
                    except HarnessError as err:
                        raise type(err)(f"fold {fold.fold_id}: {err}") from None
                    train_ids = [epoch_set.epochs[i].epoch_id for i in picked]
                fold_samples[f"{model_tag}:{fold.fold_id}:{seed}"] = sorted(train_ids)

                train_emb = _subset(emb, sorted(train_ids))
                val_emb = _subset(emb, sorted(val_ids)) if val_ids else train_emb
                test_emb = _subset(emb, sorted(test_ids))
                cfg = dict(probe_cfg)
                cfg["seed"] = seed
                model = train_probe(train_emb, val_emb, cfg)
                proba = predict_proba(model, test_emb.features)
                pred_path = preds_dir / f"{model_tag}_fold{fold.fold_id}_seed{seed}.csv"
                write_predictions(pred_path, test_emb.epoch_ids, test_emb.labels, proba)
                report = score_predictions(test_emb.labels, proba, epoch_set.n_classes)
                cells.extend(_metric_rows(report, model_tag, "linear_probe",
                                          dataset_id, fold.fold_id, seed, budget))

    external = config.get("predictions", {})
    for model_tag in sorted(external):
        entry = external[model_tag]
        setting = entry["setting"]
        ids, y_true, proba, rejected = read_predictions(entry["path"])
        if rejected:
            resolved.setdefault("rejected_prediction_rows", {})[model_tag] = rejected
        row_of = {int(e): i for i, e in enumerate(ids)}
        for fold in folds:
            test_ids = sorted(
                e for s in fold.test_subjects for e in epochs_by_subject.get(s, [])
                if e in row_of
            )
            if not test_ids:
                continue
            rows = [row_of[e] for e in test_ids]
            report = score_predictions(y_true[rows], proba[rows], epoch_set.n_classes)
            budget = int(budget_cfg["s_total"]) if budget_cfg else None
            for seed in seeds:
                cells.extend(_metric_rows(report, model_tag, setting,
                                          dataset_id, fold.fold_id, seed, budget))

    cells.sort(key=lambda c: (c.model_tag, c.setting, c.fold_id, c.seed, c.metric_name))
    results_path = output_dir / "results.csv"
    write_results(results_path, cells)

    manifest = RunManifest(
        config=config,
        config_hash=config_hash(config),
        harness_version=HARNESS_VERSION,
        resolved=resolved,
        fold_samples=fold_samples,
    )
    manifest_path = output_dir / "manifest.json"
    manifest_path.write_text(manifest.to_json())
    return results_path, manifest_path


def replay(manifest_path: str | Path, output_dir: str | Path) -> tuple[Path, Path]:
    """Re-run an evaluation from its manifest; outputs are byte-identical."""
    manifest = json.loads(Path(manifest_path).read_text())
    return evaluate(manifest["config"], output_dir)
