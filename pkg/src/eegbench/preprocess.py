"""Deterministic preprocessing transforms and windowing.

Pipeline order is fixed: notch -> bandpass -> resample -> re-reference ->
windowize -> normalize. All transforms are pure functions of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import signal as sps

from .edf import Recording
from .errors import EmptyResult, InvalidBand, NyquistViolation, TooFewChannels

EPS = 1e-8


@dataclass(frozen=True)
class PipelineSpec:
    notch_hz: float | None = None
    notch_q: float = 30.0
    bandpass: tuple[float, float] | None = (0.3, 75.0)
    bandpass_order: int = 4
    target_fs_hz: Fraction | None = Fraction(200)
    reref: str = "common_average"  # or "none"
    norm: str = "zscore"  # "zscore" | "interquartile" | "none"
    window_s: float = 1.0
    window_stride_s: float | None = None  # None = non-overlapping

    def __post_init__(self):
        if self.window_s <= 0:
            raise ValueError("window_s must be positive")
        if self.bandpass is not None:
            low, high = self.bandpass
            if not 0 < low < high:
                raise InvalidBand(f"invalid band ({low}, {high})")
            if self.target_fs_hz is not None and high >= float(self.target_fs_hz) / 2:
                raise NyquistViolation(
                    f"bandpass high {high} Hz >= Nyquist of target fs {self.target_fs_hz}"
                )
        if self.reref not in ("common_average", "none"):
            raise ValueError(f"unknown reref mode {self.reref!r}")
        if self.norm not in ("zscore", "interquartile", "none"):
            raise ValueError(f"unknown norm mode {self.norm!r}")


@dataclass
class Epoch:
    data: np.ndarray  # channels x samples
    label: int
    subject_id: str
    t_start_s: float = 0.0
    dataset_id: str = "custom"
    epoch_id: int = -1


@dataclass
class EpochSet:
    epochs: list[Epoch]
    n_classes: int
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("an epoch set needs at least 2 classes")
        for ep in self.epochs:
            if not 0 <= ep.label < self.n_classes:
                raise ValueError(f"label {ep.label} outside [0, {self.n_classes})")

    def __len__(self) -> int:
        return len(self.epochs)

    @property
    def labels(self) -> np.ndarray:
        return np.array([ep.label for ep in self.epochs], dtype=np.int64)

    @property
    def subject_ids(self) -> list[str]:
        return [ep.subject_id for ep in self.epochs]


def notch(recording: Recording, f0: float, q: float = 30.0) -> Recording:
    """Zero-phase second-order IIR notch at f0 Hz, per channel."""
    fs = float(recording.fs_hz)
    if not 0 < f0 < fs / 2:
        raise NyquistViolation(f"notch frequency {f0} Hz outside (0, {fs / 2}) at fs {fs}")
    b, a = sps.iirnotch(f0, q, fs=fs)
    data = sps.filtfilt(b, a, recording.data, axis=1)
    return replace(recording, data=data)


def bandpass(recording: Recording, low: float, high: float, order: int = 4) -> Recording:
    """Zero-phase Butterworth band-pass (cascaded second-order sections)."""
    fs = float(recording.fs_hz)
    if low >= high:
        raise InvalidBand(f"low {low} >= high {high}")
    if not 0 < low or not high < fs / 2:
        raise NyquistViolation(f"band ({low}, {high}) outside (0, {fs / 2}) at fs {fs}")
    sos = sps.butter(order, [low, high], btype="bandpass", fs=fs, output="sos")
    data = sps.sosfiltfilt(sos, recording.data, axis=1)
    return replace(recording, data=data)


def resample_array(data: np.ndarray, source_fs: Fraction, target_fs: Fraction) -> np.ndarray:
    """Polyphase rational resampling along the last axis.

    Output length is round(n * target / source); spectral content below the
    lower of the two Nyquist frequencies is preserved.
    """
    ratio = Fraction(target_fs) / Fraction(source_fs)
    if ratio == 1:
        return data
    out = sps.resample_poly(data, ratio.numerator, ratio.denominator, axis=-1)
    n_out = round(data.shape[-1] * ratio.numerator / ratio.denominator)
    return out[..., :n_out]


def resample(recording: Recording, target_fs: Fraction | int) -> Recording:
    target = Fraction(target_fs)
    if target <= 0:
        raise ValueError("target_fs must be positive")
    if target == recording.fs_hz:
        return recording
    data = resample_array(recording.data, recording.fs_hz, target)
    return replace(recording, data=data, fs_hz=target)


def common_average_reref(recording: Recording) -> Recording:
    if recording.n_channels < 2:
        raise TooFewChannels("common average reference needs at least 2 channels")
    data = recording.data - recording.data.mean(axis=0, keepdims=True)
    return replace(recording, data=data)


def normalize(epoch: Epoch, mode: str) -> Epoch:
    """Per-channel normalization; epsilon keeps flat channels finite (they map to 0)."""
    x = epoch.data
    if mode == "zscore":
        data = (x - x.mean(axis=1, keepdims=True)) / (x.std(axis=1, keepdims=True) + EPS)
    elif mode == "interquartile":
        med = np.median(x, axis=1, keepdims=True)
        q25, q75 = np.quantile(x, [0.25, 0.75], axis=1, keepdims=True, method="hazen")
        data = (x - med) / (q75 - q25 + EPS)
    elif mode == "none":
        return epoch
    else:
        raise ValueError(f"unknown norm mode {mode!r}")
    return replace(epoch, data=data)


class LabelRule:
    """Assigns a class label to a candidate window, or None to drop it."""

    def windows(self, recording: Recording, window_s: float, stride_s: float):
        """Yield (t_start_s, label) for each epoch to cut."""
        raise NotImplementedError


class ConstantLabel(LabelRule):
    """Whole-recording label (e.g. per-patient diagnosis)."""

    def __init__(self, label: int):
        self.label = label

    def windows(self, recording, window_s, stride_s):
        t = 0.0
        while t + window_s <= recording.duration_s + 1e-9:
            yield t, self.label
            t += stride_s


class CoveringAnnotation(LabelRule):
    """Fixed-epoch labeling: a window takes the label of the annotation covering
    its start. Windows without a mapped covering annotation are dropped."""

    def __init__(self, label_map: dict[str, int]):
        self.label_map = label_map

    def windows(self, recording, window_s, stride_s):
        spans = [
            (onset, onset + (duration if duration > 0 else window_s), self.label_map[text])
            for onset, duration, text in recording.annotations
            if text in self.label_map
        ]
        t = 0.0
        while t + window_s <= recording.duration_s + 1e-9:
            for lo, hi, label in spans:
                if lo - 1e-9 <= t < hi - 1e-9:
                    yield t, label
                    break
            t += stride_s


class TrialOnset(LabelRule):
    """One window per annotated trial, starting at the annotation onset."""

    def __init__(self, label_map: dict[str, int]):
        self.label_map = label_map

    def windows(self, recording, window_s, stride_s):
        for onset, _duration, text in recording.annotations:
            if text in self.label_map and onset + window_s <= recording.duration_s + 1e-9:
                yield onset, self.label_map[text]


def windowize(
    recording: Recording,
    annotations: Sequence[tuple[float, float, str]] | None,
    window_s: float,
    stride_s: float | None,
    label_rule: LabelRule,
    n_classes: int,
    class_names: Sequence[str] | None = None,
    dataset_id: str = "custom",
) -> EpochSet:
    """Deterministic left-to-right segmentation into labeled epochs."""
    if annotations is not None:
        recording = replace(recording, annotations=list(annotations))
    if window_s > recording.duration_s + 1e-9:
        raise EmptyResult(
            f"window {window_s}s longer than recording {recording.duration_s}s"
        )
    stride = window_s if stride_s is None else stride_s
    fs = float(recording.fs_hz)
    n_win = int(round(window_s * fs))
    epochs = []
    for t_start, label in label_rule.windows(recording, window_s, stride):
        i0 = int(round(t_start * fs))
        if i0 + n_win > recording.n_samples:
            continue
        epochs.append(
            Epoch(
                data=recording.data[:, i0 : i0 + n_win].copy(),
                label=label,
                subject_id=recording.subject_id,
                t_start_s=t_start,
                dataset_id=dataset_id,
            )
        )
    if not epochs:
        raise EmptyResult("no complete window produced")
    return EpochSet(epochs=epochs, n_classes=n_classes,
                    class_names=list(class_names or []))


def run_pipeline(
    recording: Recording,
    spec: PipelineSpec,
    label_rule: LabelRule,
    n_classes: int,
    class_names: Sequence[str] | None = None,
    dataset_id: str = "custom",
) -> EpochSet:
    """Apply the full fixed-order pipeline to one recording."""
    import warnings

    rec = recording
    if spec.notch_hz is not None:
        if spec.notch_hz < float(rec.fs_hz) / 2:
            rec = notch(rec, spec.notch_hz, spec.notch_q)
        else:
            # powerline sits at/above Nyquist (e.g. 50 Hz at fs 100): nothing to remove
            warnings.warn(
                f"skipping notch at {spec.notch_hz} Hz: at or above Nyquist for fs {rec.fs_hz}"
            )
    if spec.bandpass is not None:
        low, high = spec.bandpass
        high = min(high, 0.45 * float(rec.fs_hz))
        rec = bandpass(rec, low, high, spec.bandpass_order)
    if spec.target_fs_hz is not None:
        rec = resample(rec, spec.target_fs_hz)
    if spec.reref == "common_average":
        rec = common_average_reref(rec)
    epoch_set = windowize(
        rec, None, spec.window_s, spec.window_stride_s, label_rule,
        n_classes, class_names, dataset_id,
    )
    if spec.norm != "none":
        epoch_set.epochs = [normalize(ep, spec.norm) for ep in epoch_set.epochs]
    return epoch_set


@dataclass(frozen=True)
class DatasetPreset:
    dataset_id: str
    n_classes: int
    native_fs_hz: int
    window_s: float
    n_channels: int
    pipeline: PipelineSpec
    class_names: tuple[str, ...] = ()
    label_map: dict[str, int] | None = None
    label_style: str = "covering"  # "covering" | "trial_onset" | "constant"
    cv_scheme: str = "kfold5"


def _sleep_label_map() -> dict[str, int]:
    # NREM-3 and NREM-4 share a class, giving 5 classes total
    return {
        "Sleep stage W": 0,
        "Sleep stage 1": 1,
        "Sleep stage 2": 2,
        "Sleep stage 3": 3,
        "Sleep stage 4": 3,
        "Sleep stage R": 4,
    }


PRESETS: dict[str, DatasetPreset] = {
    "physionet_mi": DatasetPreset(
        dataset_id="physionet_mi", n_classes=4, native_fs_hz=160, window_s=4.0,
        n_channels=64,
        pipeline=PipelineSpec(notch_hz=60.0, window_s=4.0),
        class_names=("left_fist", "right_fist", "both_fists", "both_feet"),
        label_style="trial_onset", cv_scheme="kfold5",
    ),
    "bcic_iv2a": DatasetPreset(
        dataset_id="bcic_iv2a", n_classes=4, native_fs_hz=250, window_s=4.0,
        n_channels=22,
        pipeline=PipelineSpec(notch_hz=50.0, window_s=4.0),
        class_names=("left_hand", "right_hand", "feet", "tongue"),
        label_style="trial_onset", cv_scheme="loso",
    ),
    "kaggle_ern": DatasetPreset(
        dataset_id="kaggle_ern", n_classes=2, native_fs_hz=200, window_s=1.0,
        n_channels=56,
        pipeline=PipelineSpec(notch_hz=50.0, window_s=1.0),
        class_names=("correct", "error"),
        label_style="trial_onset", cv_scheme="kfold5",
    ),
    "mdd_mal": DatasetPreset(
        dataset_id="mdd_mal", n_classes=2, native_fs_hz=256, window_s=10.0,
        n_channels=19,
        pipeline=PipelineSpec(notch_hz=50.0, window_s=10.0),
        class_names=("healthy", "mdd"),
        label_style="constant", cv_scheme="kfold5",
    ),
    "sleep_edf": DatasetPreset(
        dataset_id="sleep_edf", n_classes=5, native_fs_hz=100, window_s=30.0,
        n_channels=2,
        pipeline=PipelineSpec(notch_hz=50.0, reref="none", window_s=30.0),
        class_names=("wake", "nrem1", "nrem2", "nrem34", "rem"),
        label_map=_sleep_label_map(), label_style="covering", cv_scheme="kfold5",
    ),
    "tuev": DatasetPreset(
        dataset_id="tuev", n_classes=6, native_fs_hz=200, window_s=5.0,
        n_channels=21,
        pipeline=PipelineSpec(notch_hz=60.0, norm="interquartile", window_s=5.0),
        class_names=("spsw", "gped", "pled", "eyem", "artf", "bckg"),
        label_style="covering", cv_scheme="kfold5",
    ),
}


def label_rule_for(preset: DatasetPreset, constant_label: int | None = None) -> LabelRule:
    if preset.label_style == "constant":
        if constant_label is None:
            raise ValueError(f"preset {preset.dataset_id!r} needs a per-recording label")
        return ConstantLabel(constant_label)
    label_map = preset.label_map or {name: i for i, name in enumerate(preset.class_names)}
    if preset.label_style == "trial_onset":
        return TrialOnset(label_map)
    return CoveringAnnotation(label_map)
