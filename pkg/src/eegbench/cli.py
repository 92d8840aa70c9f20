"""Command-line entry points.

Exit codes: 0 ok, 2 usage error, 3 data error, 4 unpaired/insufficient data.
Output paths are resolved under $EEGBENCH_OUT when set.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from . import edf as edf_mod
from . import preprocess as pp
from . import runner
from .efficiency import aggregate
from .errors import HarnessError, InsufficientData, UnpairedCells
from .formats import (
    read_emb1,
    read_epoch_store,
    read_predictions,
    read_results,
    write_epoch_store,
    write_predictions,
)
from .metrics import chance_level, score_predictions
from .probe import predict_proba, train_probe
from .report import render_channel_table, render_pe_table, render_se_table
from .sampling import BudgetSpec, make_folds, sample_budget


def _out(path: str) -> Path:
    root = os.environ.get("EEGBENCH_OUT")
    p = Path(path)
    return Path(root) / p if root and not p.is_absolute() else p


def harness_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (UnpairedCells, InsufficientData) as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(4)
        except HarnessError as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(3)
    return wrapper


@click.group()
def main():
    """EEG model efficiency benchmark harness."""


@main.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path())
@click.option("--preset", required=True, type=click.Choice(sorted(pp.PRESETS)))
@click.option("--out", "out_dir", required=True, help="epoch store directory")
@click.option("--label", type=int, default=None,
              help="whole-recording class label (constant-label presets)")
@click.option("--sparse-n", type=int, default=None, help="sparse montage channels per lobe")
@click.option("--lobe", type=str, default=None, help="restrict to one region or 'midline'")
@harness_errors
def ingest(paths, preset, out_dir, label, sparse_n, lobe):
    """Parse EDF files, run the preset preprocessing pipeline, store epochs."""
    ds = pp.PRESETS[preset]
    all_epochs, channels, log, failures = [], None, [], []
    for path in paths:
        try:
            _, _, recording = edf_mod.parse_edf(Path(path).read_bytes())
            rule = pp.label_rule_for(ds, constant_label=label)
            epoch_set = pp.run_pipeline(recording, ds.pipeline, rule, ds.n_classes,
                                        ds.class_names, ds.dataset_id)
            if channels is None:
                channels = recording.channels
            all_epochs.extend(epoch_set.epochs)
            log.append(f"{path}: {len(epoch_set.epochs)} epochs "
                       f"(notch={ds.pipeline.notch_hz}, band={ds.pipeline.bandpass}, "
                       f"fs->{ds.pipeline.target_fs_hz}, norm={ds.pipeline.norm})")
        except HarnessError as err:
            failures.append(path)
            click.echo(f"skipping {path}: {err}", err=True)
    if not all_epochs:
        raise click.UsageError("no epochs produced from the given files")
    epoch_set = pp.EpochSet(epochs=all_epochs, n_classes=ds.n_classes,
                            class_names=list(ds.class_names))
    if sparse_n or lobe:
        from . import montage as mg
        taxonomy = mg.classify_channels(channels)
        sel = (mg.select_lobe_restricted(taxonomy, lobe) if lobe
               else mg.select_sparse(taxonomy, sparse_n))
        epoch_set, channels = mg.apply(sel, epoch_set, channels)
        log.append(f"montage: {sel.mode} -> {channels}")
    fs = float(ds.pipeline.target_fs_hz or ds.native_fs_hz)
    write_epoch_store(_out(out_dir), epoch_set, channels, fs, ds.dataset_id, log)
    click.echo(f"wrote {len(all_epochs)} epochs to {_out(out_dir)}"
               + (f" ({len(failures)} files failed)" if failures else ""))
    if failures:
        sys.exit(3)


@main.command()
@click.option("--store", required=True, type=click.Path(exists=True))
@click.option("--scheme", default="kfold5", help="kfold<k> or loso")
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_path", required=True)
@harness_errors
def folds(store, scheme, seed, out_path):
    """Build between-subjects CV folds for an epoch store."""
    epoch_set, _, _, _ = read_epoch_store(store)
    fold_specs = make_folds(sorted(set(epoch_set.subject_ids)), scheme, seed)
    payload = [
        {"fold_id": f.fold_id, "train": f.train_subjects,
         "val": f.val_subjects, "test": f.test_subjects}
        for f in fold_specs
    ]
    _out(out_path).write_text(json.dumps(payload, indent=2))
    click.echo(f"wrote {len(fold_specs)} folds to {_out(out_path)}")


@main.command()
@click.option("--store", required=True, type=click.Path(exists=True))
@click.option("--folds", "folds_path", required=True, type=click.Path(exists=True))
@click.option("--fold-id", default=0, type=int)
@click.option("--budget", required=True, type=int)
@click.option("--n-subjects", required=True, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_path", required=True)
@harness_errors
def sample(store, folds_path, fold_id, budget, n_subjects, seed, out_path):
    """Draw a budget-constrained, class-stratified training sample manifest."""
    epoch_set, _, _, _ = read_epoch_store(store)
    fold = json.loads(Path(folds_path).read_text())[fold_id]
    spec = BudgetSpec(s_total=budget, n_subjects=n_subjects, seed=seed)
    sampled, picked = sample_budget(epoch_set, spec, fold["train"])
    lines = [f"{epoch_set.epochs[i].epoch_id}" for i in picked]
    _out(out_path).write_text("\n".join(lines) + "\n")
    click.echo(f"sampled {len(picked)} epochs "
               f"({len(set(sampled.subject_ids))} subjects) to {_out(out_path)}")


@main.command()
@click.option("--train-emb", required=True, type=click.Path(exists=True))
@click.option("--val-emb", required=True, type=click.Path(exists=True))
@click.option("--test-emb", required=True, type=click.Path(exists=True))
@click.option("--lr", default=1e-2, type=float)
@click.option("--weight-decay", default=0.0, type=float)
@click.option("--max-epochs", default=30, type=int)
@click.option("--batch", default=64, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_path", required=True)
@harness_errors
def probe(train_emb, val_emb, test_emb, lr, weight_decay, max_epochs, batch, seed, out_path):
    """Train a linear probe on EMB1 embeddings and write test predictions."""
    train = read_emb1(train_emb)
    val = read_emb1(val_emb)
    test = read_emb1(test_emb)
    cfg = {"lr": lr, "weight_decay": weight_decay, "max_epochs": max_epochs,
           "batch": batch, "seed": seed}
    model = train_probe(train, val, cfg)
    proba = predict_proba(model, test.features)
    write_predictions(_out(out_path), test.epoch_ids, test.labels, proba)
    click.echo(f"wrote predictions for {test.n} epochs to {_out(out_path)}")


@main.command()
@click.option("--preds", required=True, type=click.Path(exists=True))
@harness_errors
def score(preds):
    """Score a predictions file (BAC, kappa, F1-macro, AUROC when binary)."""
    _, y_true, proba, rejected = read_predictions(preds)
    if rejected:
        click.echo(f"rejected {rejected} rows with bad probability sums", err=True)
    if len(y_true) == 0:
        raise click.UsageError("no valid prediction rows")
    report = score_predictions(y_true, proba, proba.shape[1])
    click.echo(f"bac      {100 * report.bac:.2f}")
    click.echo(f"kappa    {100 * report.kappa:.2f}")
    click.echo(f"f1_macro {100 * report.f1_macro:.2f}")
    if report.auroc is not None:
        click.echo(f"auroc    {100 * report.auroc:.2f}")


@main.command()
@click.option("--results", required=True, type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["pe", "se"]), required=True)
@click.option("--numerator", default=None, help="setting, default linear_probe")
@click.option("--denominator", default=None,
              help="setting, default full_ft (pe) / supervised (se)")
@click.option("--metric", default="bac")
@click.option("--n-classes", required=True, type=int)
@harness_errors
def efficiency(results, kind, numerator, denominator, metric, n_classes):
    """Aggregate per-fold PE or SE from a results table."""
    cells = [c for c in read_results(results) if c.metric_name == metric]
    numerator = numerator or "linear_probe"
    denominator = denominator or ("full_ft" if kind == "pe" else "supervised")
    chance = chance_level(metric, n_classes)
    rep = aggregate(cells, numerator, denominator, chance, kind=kind.upper())
    line = f"{kind.upper()} ({metric}, {numerator} vs {denominator}): " \
           f"{rep.mean:.3f} +- {rep.std:.3f} over n={rep.n}"
    if rep.p_value is not None:
        line += f", p={rep.p_value:.3g} ({rep.test_name})"
    if rep.n_excluded:
        line += f", {rep.n_excluded} pathological pairs excluded"
    click.echo(line)


@main.command()
@click.option("--results", required=True, type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["pe", "se", "channel"]), required=True)
@click.option("--metric", default="bac")
@click.option("--n-classes", default=2, type=int)
@harness_errors
def report(results, kind, metric, n_classes):
    """Render a deterministic text table from a results file."""
    cells = read_results(results)
    if kind == "pe":
        click.echo(render_pe_table(cells, metric, n_classes))
    elif kind == "se":
        click.echo(render_se_table(cells, metric, n_classes))
    else:
        click.echo(render_channel_table(cells, metric))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True)
@harness_errors
def evaluate(config_path, out_dir):
    """Full run: folds x seeds x settings -> results table + manifest."""
    config = yaml.safe_load(Path(config_path).read_text())
    results_path, manifest_path = runner.evaluate(config, _out(out_dir))
    click.echo(f"results:  {results_path}")
    click.echo(f"manifest: {manifest_path}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True)
@harness_errors
def replay(manifest_path, out_dir):
    """Re-run an evaluation from its manifest (byte-identical results)."""
    results_path, new_manifest = runner.replay(manifest_path, _out(out_dir))
    click.echo(f"results:  {results_path}")
    click.echo(f"manifest: {new_manifest}")


if __name__ == "__main__":
    main()
