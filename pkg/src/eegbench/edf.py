"""EDF/EDF+ reader and writer.

Parses the fixed-layout 256-byte header plus 256 bytes per signal, applies
per-signal linear calibration to physical units, and extracts EDF+ TAL
annotations into (onset, duration, label) tuples. Writing inverts the
calibration and is lossless at digital (16-bit) resolution.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import BinaryIO

import numpy as np

from .errors import (
    MalformedHeader,
    RangeOverflow,
    TruncatedFile,
    UnsupportedVariant,
)

ANNOTATION_LABEL = "EDF Annotations"

_HEADER_SIZE = 256
_PER_SIGNAL = 256


@dataclass
class EdfHeader:
    version: str
    patient_id: str
    recording_id: str
    start_date: str
    start_time: str
    header_bytes: int
    n_records: int
    record_duration_s: float
    n_signals: int
    reserved: str = ""


@dataclass
class SignalSpec:
    label: str
    transducer: str
    unit: str
    phys_min: float
    phys_max: float
    dig_min: int
    dig_max: int
    prefilter: str
    samples_per_record: int
    reserved: str = ""

    def validate(self) -> None:
        if self.dig_min >= self.dig_max:
            raise MalformedHeader(
                f"signal {self.label!r}: dig_min {self.dig_min} >= dig_max {self.dig_max}"
            )
        if self.phys_min == self.phys_max:
            raise MalformedHeader(
                f"signal {self.label!r}: phys_min == phys_max == {self.phys_min}"
            )
        if self.samples_per_record < 1:
            raise MalformedHeader(
                f"signal {self.label!r}: samples_per_record {self.samples_per_record} < 1"
            )

    @property
    def gain(self) -> float:
        return (self.phys_max - self.phys_min) / (self.dig_max - self.dig_min)


@dataclass
class Recording:
    subject_id: str
    channels: list[str]
    fs_hz: Fraction
    data: np.ndarray  # channels x samples, float64, physical units
    annotations: list[tuple[float, float, str]] = field(default_factory=list)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] != len(self.channels):
            raise ValueError(
                f"data shape {self.data.shape} does not match {len(self.channels)} channels"
            )
        if self.data.size and not np.all(np.isfinite(self.data)):
            raise ValueError("recording contains non-finite samples")

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / float(self.fs_hz)


def _ascii_field(raw: bytes, name: str) -> str:
    """Decode a text header field; non-ASCII bytes become '?' with a warning."""
    if any(b < 32 or b > 126 for b in raw):
        warnings.warn(f"non-ASCII bytes in header field {name!r} replaced with '?'")
        raw = bytes(b if 32 <= b <= 126 else ord("?") for b in raw)
    return raw.decode("ascii").rstrip()

def _int_field(raw: bytes, name: str) -> int:
    text = raw.decode("ascii", errors="replace").strip()
    try:
        return int(text)
    except ValueError:
        raise MalformedHeader(f"numeric header field {name!r} is corrupt: {text!r}")


def _float_field(raw: bytes, name: str) -> float:
    text = raw.decode("ascii", errors="replace").strip()
    try:
        value = float(text)
    except ValueError:
        raise MalformedHeader(f"numeric header field {name!r} is corrupt: {text!r}")
    if not math.isfinite(value):
        raise MalformedHeader(f"numeric header field {name!r} is not finite: {text!r}")
    return value


def _read_exact(stream: BinaryIO, n: int, what: str) -> bytes:
    buf = stream.read(n)
    if len(buf) < n:
        raise TruncatedFile(f"stream ended while reading {what} ({len(buf)}/{n} bytes)")
    return buf


def parse_header(stream: BinaryIO) -> tuple[EdfHeader, list[SignalSpec]]:
    fixed = _read_exact(stream, _HEADER_SIZE, "fixed header")
    if fixed[0] == 0xFF:
        raise UnsupportedVariant("BDF (24-bit) files are not supported")
    header = EdfHeader(
        version=_ascii_field(fixed[0:8], "version"),
        patient_id=_ascii_field(fixed[8:88], "patient_id"),
        recording_id=_ascii_field(fixed[88:168], "recording_id"),
        start_date=_ascii_field(fixed[168:176], "start_date"),
        start_time=_ascii_field(fixed[176:184], "start_time"),
        header_bytes=_int_field(fixed[184:192], "header_bytes"),
        reserved=_ascii_field(fixed[192:236], "reserved"),
        n_records=_int_field(fixed[236:244], "n_records"),
        record_duration_s=_float_field(fixed[244:252], "record_duration_s"),
        n_signals=_int_field(fixed[252:256], "n_signals"),
    )
    if header.n_signals < 1:
        raise MalformedHeader(f"n_signals must be >= 1, got {header.n_signals}")
    if header.header_bytes != _HEADER_SIZE + _PER_SIGNAL * header.n_signals:
        raise MalformedHeader(
            f"header_bytes {header.header_bytes} != 256 + 256*{header.n_signals}"
        )
    if header.record_duration_s <= 0:
        raise MalformedHeader(
            f"record_duration_s must be > 0, got {header.record_duration_s}"
        )
    if header.n_records < -1:
        raise MalformedHeader(f"n_records must be >= 0 (or -1), got {header.n_records}")

    ns = header.n_signals
    block = _read_exact(stream, _PER_SIGNAL * ns, "signal headers")

    def col(offset: int, width: int, i: int) -> bytes:
        start = offset * ns + i * width
        return block[start : start + width]

    specs = []
    for i in range(ns):
        spec = SignalSpec(
            label=_ascii_field(col(0, 16, i), "label"),
            transducer=_ascii_field(col(16, 80, i), "transducer"),
            unit=_ascii_field(col(96, 8, i), "unit"),
            phys_min=_float_field(col(104, 8, i), "phys_min"),
            phys_max=_float_field(col(112, 8, i), "phys_max"),
            dig_min=_int_field(col(120, 8, i), "dig_min"),
            dig_max=_int_field(col(128, 8, i), "dig_max"),
            prefilter=_ascii_field(col(136, 80, i), "prefilter"),
            samples_per_record=_int_field(col(216, 8, i), "samples_per_record"),
            reserved=_ascii_field(col(224, 32, i), "reserved"),
        )
        spec.validate()
        specs.append(spec)
    return header, specs


def _parse_tals(raw: bytes) -> list[tuple[float, float, str]]:
    """Decode one record's TAL byte block into (onset, duration, label) tuples."""
    out = []
    for tal in raw.rstrip(b"\x00").split(b"\x00"):
        if not tal:
            continue
        head, _, rest = tal.partition(b"\x14")
        if b"\x15" in head:
            onset_b, _, dur_b = head.partition(b"\x15")
        else:
            onset_b, dur_b = head, b""
        try:
            onset = float(onset_b)
            duration = float(dur_b) if dur_b else 0.0
        except ValueError:
            warnings.warn(f"skipping malformed TAL {tal!r}")
            continue
        for label in rest.split(b"\x14"):
            if label:
                out.append((onset, duration, label.decode("ascii", errors="replace")))
    return out


def parse_edf(stream: BinaryIO | bytes) -> tuple[EdfHeader, list[SignalSpec], Recording]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(bytes(stream))
    header, specs = parse_header(stream)

    samples_per_record = [s.samples_per_record for s in specs]
    record_size = 2 * sum(samples_per_record)
    payload = stream.read()
    if header.n_records == -1:
        # streaming EDF+: record count resolved from file size
        header.n_records = len(payload) // record_size if record_size else 0
    needed = header.n_records * record_size
    if len(payload) < needed:
        raise TruncatedFile(
            f"expected {needed} data bytes for {header.n_records} records, got {len(payload)}"
        )
    if len(payload) > needed:
        warnings.warn(f"ignoring {len(payload) - needed} trailing bytes after data region")
        payload = payload[:needed]

    raw = np.frombuffer(payload, dtype="<i2")
    if header.n_records:
        raw = raw.reshape(header.n_records, sum(samples_per_record))

    annotations: list[tuple[float, float, str]] = []
    signal_data: list[np.ndarray] = []
    channel_names: list[str] = []
    channel_specs: list[SignalSpec] = []
    offset = 0
    for spec in specs:
        n = spec.samples_per_record
        chunk = raw[:, offset : offset + n] if header.n_records else np.empty((0, n), "<i2")
        offset += n
        if spec.label == ANNOTATION_LABEL:
            for rec in range(header.n_records):
                annotations.extend(_parse_tals(chunk[rec].tobytes()))
            continue
        physical = spec.phys_min + (chunk.reshape(-1).astype(np.float64) - spec.dig_min) * spec.gain
        signal_data.append(physical)
        channel_names.append(spec.label)
        channel_specs.append(spec)

    if not channel_specs:
        raise MalformedHeader("file contains no data signals")

    rates = [Fraction(s.samples_per_record) / Fraction(str(header.record_duration_s))
             for s in channel_specs]
    fs = max(rates)
    if len(set(rates)) > 1:
        # mixed-rate file: bring every signal up to the fastest rate
        from .preprocess import resample_array

        signal_data = [
            x if r == fs else resample_array(x[np.newaxis, :], r, fs)[0]
            for x, r in zip(signal_data, rates)
        ]
    n_samples = min((x.shape[0] for x in signal_data), default=0)
    data = np.vstack([x[:n_samples] for x in signal_data]) if signal_data else np.empty((0, 0))

    subject = header.patient_id.split()[0] if header.patient_id.split() else "unknown"
    recording = Recording(
        subject_id=subject,
        channels=channel_names,
        fs_hz=fs,
        data=data,
        annotations=annotations,
    )
    return header, specs, recording


def _pad(text: str, width: int, name: str) -> bytes:
    raw = text.encode("ascii", errors="replace")
    if len(raw) > width:
        raise MalformedHeader(f"field {name!r} longer than {width} bytes: {text!r}")
    return raw.ljust(width)


def format_number(value: float, width: int = 8) -> str:
    """Canonical fixed-width ASCII rendering of a header number."""
    if value == int(value) and abs(value) < 10 ** width:
        text = str(int(value))
    else:
        text = repr(float(value))
    if len(text) > width:
        text = f"{value:.{max(width - 7, 0)}e}"
    if len(text) > width:
        raise MalformedHeader(f"cannot render {value} in {width} ASCII bytes")
    return text


def _encode_tal_record(onset_s: float, anns: list[tuple[float, float, str]]) -> bytes:
    parts = [b"+" + format_number(onset_s).encode() + b"\x14\x14\x00"]
    for onset, duration, label in anns:
        head = ("+" if onset >= 0 else "") + format_number(onset)
        if duration:
            head += "\x15" + format_number(duration)
        parts.append(head.encode() + b"\x14" + label.encode("ascii", "replace")
                     + b"\x14\x00")
    return b"".join(parts)


def write_edf(header: EdfHeader, specs: list[SignalSpec], recording: Recording) -> bytes:
    """Serialize a recording back to EDF bytes; inverse of parse_edf at digital resolution."""
    data_specs = [s for s in specs if s.label != ANNOTATION_LABEL]
    if len(data_specs) != recording.n_channels:
        raise MalformedHeader(
            f"{len(data_specs)} data signal specs for {recording.n_channels} channels"
        )
    for spec in data_specs:
        spec.validate()

    n_records = header.n_records
    digital = []
    for row, spec in zip(recording.data, data_specs):
        lo, hi = min(spec.phys_min, spec.phys_max), max(spec.phys_min, spec.phys_max)
        if row.size and (row.min() < lo or row.max() > hi):
            raise RangeOverflow(
                f"signal {spec.label!r}: values outside [{lo}, {hi}]"
            )
        dig = np.rint((row - spec.phys_min) / spec.gain + spec.dig_min).astype("<i2")
        expected = n_records * spec.samples_per_record
        if dig.shape[0] != expected:
            raise MalformedHeader(
                f"signal {spec.label!r}: {dig.shape[0]} samples, header implies {expected}"
            )
        digital.append(dig.reshape(n_records, spec.samples_per_record))

    ann_specs = [s for s in specs if s.label == ANNOTATION_LABEL]
    ann_records: list[bytes] = []
    if recording.annotations and not ann_specs:
        raise MalformedHeader("recording has annotations but no EDF Annotations signal spec")
    if ann_specs:
        spec = ann_specs[0]
        width = 2 * spec.samples_per_record
        for rec in range(n_records):
            anns = recording.annotations if rec == 0 else []
            tal = _encode_tal_record(rec * header.record_duration_s, anns)
            if len(tal) > width:
                raise MalformedHeader(
                    f"annotation record needs {len(tal)} bytes, signal holds {width}"
                )
            ann_records.append(tal.ljust(width, b"\x00"))

    out = io.BytesIO()
    out.write(_pad(header.version or "0", 8, "version"))
    out.write(_pad(header.patient_id, 80, "patient_id"))
    out.write(_pad(header.recording_id, 80, "recording_id"))
    out.write(_pad(header.start_date, 8, "start_date"))
    out.write(_pad(header.start_time, 8, "start_time"))
    out.write(_pad(str(_HEADER_SIZE + _PER_SIGNAL * len(specs)), 8, "header_bytes"))
    out.write(_pad(header.reserved, 44, "reserved"))
    out.write(_pad(str(n_records), 8, "n_records"))
    out.write(_pad(format_number(header.record_duration_s), 8, "record_duration_s"))
    out.write(_pad(str(len(specs)), 4, "n_signals"))

    for width, render in [
        (16, lambda s: s.label),
        (80, lambda s: s.transducer),
        (8, lambda s: s.unit),
        (8, lambda s: format_number(s.phys_min)),
        (8, lambda s: format_number(s.phys_max)),
        (8, lambda s: str(s.dig_min)),
        (8, lambda s: str(s.dig_max)),
        (80, lambda s: s.prefilter),
        (8, lambda s: str(s.samples_per_record)),
        (32, lambda s: s.reserved),
    ]:
        for spec in specs:
            out.write(_pad(render(spec), width, spec.label))

    data_iter = iter(digital)
    per_signal = {id(s): next(data_iter) for s in data_specs}
    for rec in range(n_records):
        for spec in specs:
            if spec.label == ANNOTATION_LABEL:
                out.write(ann_records[rec])
            else:
                out.write(per_signal[id(spec)][rec].tobytes())
    return out.getvalue()


def make_header(
    specs: list[SignalSpec],
    n_records: int,
    record_duration_s: float = 1.0,
    patient_id: str = "X",
    recording_id: str = "Startdate X",
) -> EdfHeader:
    """Convenience constructor with the size fields filled in consistently."""
    return EdfHeader(
        version="0",
        patient_id=patient_id,
        recording_id=recording_id,
        start_date="01.01.00",
        start_time="00.00.00",
        header_bytes=_HEADER_SIZE + _PER_SIGNAL * len(specs),
        n_records=n_records,
        record_duration_s=record_duration_s,
        n_signals=len(specs),
    )
