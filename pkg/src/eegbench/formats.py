"""Bit-exact interchange formats: EMB1 embedding files, predictions CSV,
results tables, the epoch store, and run manifests."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .efficiency import CellResult
from .preprocess import Epoch, EpochSet
from .probe import EmbeddingSet

EMB1_MAGIC = b"EMB1"
RESULT_COLUMNS = ("model_tag", "setting", "dataset_id", "budget",
                  "fold_id", "seed", "metric_name", "value")


# --- EMB1 embedding files -------------------------------------------------

def write_emb1(path: str | Path, emb: EmbeddingSet, dataset_id: str = "custom",
               extra_meta: dict | None = None) -> None:
    """magic 'EMB1', u32 version=1, u32 n, u32 d, u32 K, then n records of
    (u64 epoch_id, i32 label or -1, d x f32). Sidecar JSON carries metadata."""
    path = Path(path)
    k = emb.n_classes or 0
    with open(path, "wb") as fh:
        fh.write(EMB1_MAGIC)
        fh.write(struct.pack("<IIII", 1, emb.n, emb.d, k))
        feats = emb.features.astype("<f4")
        for i in range(emb.n):
            fh.write(struct.pack("<qi", int(emb.epoch_ids[i]), int(emb.labels[i])))
            fh.write(feats[i].tobytes())
    meta = {
        "subject_ids": list(emb.subject_ids),
        "model_tag": emb.model_tag,
        "dataset_id": dataset_id,
    }
    meta.update(extra_meta or {})
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def read_emb1(path: str | Path) -> EmbeddingSet:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != EMB1_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}, expected EMB1")
    version, n, d, k = struct.unpack("<IIII", raw[4:20])
    if version != 1:
        raise ValueError(f"{path}: unsupported EMB1 version {version}")
    record = 8 + 4 + 4 * d
    expected = 20 + n * record
    if len(raw) != expected:
        raise ValueError(f"{path}: {len(raw)} bytes, header implies {expected}")
    epoch_ids = np.empty(n, dtype=np.int64)
    labels = np.empty(n, dtype=np.int64)
    features = np.empty((n, d), dtype=np.float64)
    for i in range(n):
        off = 20 + i * record
        epoch_ids[i], labels[i] = struct.unpack("<qi", raw[off : off + 12])
        features[i] = np.frombuffer(raw, dtype="<f4", count=d, offset=off + 12)
    meta_path = Path(str(path) + ".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    subject_ids = meta.get("subject_ids") or [""] * n
    return EmbeddingSet(
        features=features,
        labels=np.where(labels < 0, 0, labels),
        subject_ids=subject_ids,
        epoch_ids=epoch_ids,
        model_tag=meta.get("model_tag", "unknown"),
        n_classes=k if k >= 2 else None,
    )


# --- predictions files ----------------------------------------------------

def write_predictions(path: str | Path, epoch_ids, y_true, proba: np.ndarray) -> None:
    proba = np.asarray(proba, dtype=np.float64)
    k = proba.shape[1]
    lines = ["epoch_id,true_label," + ",".join(f"p_{j}" for j in range(k))]
    for eid, y, row in zip(epoch_ids, y_true, proba):
        lines.append(f"{int(eid)},{int(y)}," + ",".join(repr(float(p)) for p in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_predictions(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Returns (epoch_ids, y_true, proba, n_rejected). Rows whose probabilities
    do not sum to 1 within 1e-6 are rejected."""
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    if header[:2] != ["epoch_id", "true_label"]:
        raise ValueError(f"{path}: bad predictions header {lines[0]!r}")
    k = len(header) - 2
    ids, ys, probas, rejected = [], [], [], 0
    for line in lines[1:]:
        parts = line.split(",")
        row = [float(p) for p in parts[2:]]
        if len(row) != k or abs(sum(row) - 1.0) > 1e-6:
            rejected += 1
            continue
        ids.append(int(parts[0]))
        ys.append(int(parts[1]))
        probas.append(row)
    return (np.array(ids, dtype=np.int64), np.array(ys, dtype=np.int64),
            np.array(probas, dtype=np.float64).reshape(len(ids), k), rejected)


# --- results tables -------------------------------------------------------

def write_results(path: str | Path, cells: list[CellResult]) -> None:
    lines = [",".join(RESULT_COLUMNS)]
    for c in cells:
        budget = "" if c.budget is None else str(c.budget)
        lines.append(
            f"{c.model_tag},{c.setting},{c.dataset_id},{budget},"
            f"{c.fold_id},{c.seed},{c.metric_name},{c.value!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_results(path: str | Path) -> list[CellResult]:
    lines = Path(path).read_text().strip().splitlines()
    if lines[0] != ",".join(RESULT_COLUMNS):
        raise ValueError(f"{path}: unexpected results header {lines[0]!r}")
    cells = []
    for line in lines[1:]:
        tag, setting, dataset, budget, fold, seed, metric, value = line.split(",")
        cells.append(CellResult(
            model_tag=tag, setting=setting, dataset_id=dataset,
            budget=int(budget) if budget else None,
            fold_id=int(fold), seed=int(seed),
            metric_name=metric, value=float(value),
        ))
    return cells


# --- epoch store ----------------------------------------------------------

def write_epoch_store(path: str | Path, epoch_set: EpochSet, channels: list[str],
                      fs_hz: float, dataset_id: str, log: list[str] | None = None) -> None:
    """Directory with meta.json plus epochs.f32 (n x C x T little-endian f32)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    n = len(epoch_set.epochs)
    shape = epoch_set.epochs[0].data.shape if n else (len(channels), 0)
    meta = {
        "dataset_id": dataset_id,
        "n_classes": epoch_set.n_classes,
        "class_names": list(epoch_set.class_names),
        "channels": list(channels),
        "fs_hz": fs_hz,
        "shape": [n, *shape],
        "epochs": [
            {"epoch_id": i if ep.epoch_id < 0 else ep.epoch_id,
             "subject_id": ep.subject_id, "label": ep.label,
             "t_start_s": ep.t_start_s}
            for i, ep in enumerate(epoch_set.epochs)
        ],
        "transform_log": log or [],
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    data = np.stack([ep.data for ep in epoch_set.epochs]) if n else np.empty((0, *shape))
    (path / "epochs.f32").write_bytes(data.astype("<f4").tobytes())


def read_epoch_store(path: str | Path) -> tuple[EpochSet, list[str], float, str]:
    path = Path(path)
    meta = json.loads((path / "meta.json").read_text())
    n, c, t = meta["shape"]
    data = np.frombuffer((path / "epochs.f32").read_bytes(), dtype="<f4")
    data = data.reshape(n, c, t).astype(np.float64)
    epochs = [
        Epoch(data=data[i], label=rec["label"], subject_id=rec["subject_id"],
              t_start_s=rec["t_start_s"], dataset_id=meta["dataset_id"],
              epoch_id=rec["epoch_id"])
        for i, rec in enumerate(meta["epochs"])
    ]
    epoch_set = EpochSet(epochs=epochs, n_classes=meta["n_classes"],
                         class_names=meta["class_names"])
    return epoch_set, meta["channels"], meta["fs_hz"], meta["dataset_id"]


# --- run manifests --------------------------------------------------------

@dataclass
class RunManifest:
    config: dict
    config_hash: str
    harness_version: str
    resolved: dict = field(default_factory=dict)
    fold_samples: dict = field(default_factory=dict)  # "fold:seed" -> epoch ids
    timestamp: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def read_manifest(path: str | Path) -> RunManifest:
    raw = json.loads(Path(path).read_text())
    return RunManifest(**raw)
