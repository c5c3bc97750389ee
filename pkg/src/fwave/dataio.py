"""Recording/annotation file formats and analysis-window segmentation.

Formats:
  * CSV: header lines ``# record_id=<text>``, ``# fs=<float>``,
    ``# lead=<text>`` followed by one sample (mV) per line.
  * Binary: magic ``FWK1``, u32 little-endian header length, JSON header
    ``{record_id, fs, lead, n}``, then n little-endian float32 samples.
  * Annotations: JSON list of ``{"onset": int, "offset": int,
    "label": "AF"|"non-AF"}``.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

BINARY_MAGIC = b"FWK1"


@dataclass
class EcgRecording:
    samples: np.ndarray  # millivolts
    fs: float
    lead_name: str = "V1"
    record_id: str = "unknown"

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.fs <= 0:
            raise FormatError(f"sampling rate must be positive, got {self.fs}")
        if self.samples.size == 0:
            raise FormatError("recording has no samples")
        if not np.all(np.isfinite(self.samples)):
            bad = int(np.flatnonzero(~np.isfinite(self.samples))[0])
            raise FormatError(f"non-finite sample at index {bad}")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.fs


@dataclass
class RhythmAnnotation:
    events: list  # of (onset_sample, offset_sample, label)

    def validate(self, n_samples: int) -> None:
        prev_off = 0
        for onset, offset, label in self.events:
            if label not in ("AF", "non-AF"):
                raise FormatError(f"unknown rhythm label {label!r}")
            if not 0 <= onset < offset <= n_samples:
                raise FormatError(f"event ({onset}, {offset}) out of bounds")
            if onset < prev_off:
                raise FormatError("events overlap or are unsorted")
            prev_off = offset


@dataclass
class AnalysisWindow:
    record_id: str
    start_sample: int
    length_samples: int
    label: str
    quality_pass: bool = True

    @property
    def end_sample(self) -> int:
        return self.start_sample + self.length_samples


@dataclass
class AfWindowResult:
    windows: list
    excluded_events: list = field(default_factory=list)  # (onset, offset) pairs


def load_recording(path, fmt=None) -> EcgRecording:
    """Load a recording; format inferred from the file magic unless given."""
    path = str(path)
    if fmt is None:
        with open(path, "rb") as fh:
            fmt = "binary" if fh.read(4) == BINARY_MAGIC else "csv"
    if fmt == "csv":
        return _load_csv(path)
    if fmt == "binary":
        return _load_binary(path)
    raise FormatError(f"unknown recording format {fmt!r}")


def _load_csv(path) -> EcgRecording:
    meta = {}
    values = []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" not in body:
                    raise FormatError(f"{path}:{lineno}: malformed header line {line!r}")
                key, val = body.split("=", 1)
                meta[key.strip()] = val.strip()
                continue
            try:
                v = float(line)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: not a number: {line!r}") from None
            if not np.isfinite(v):
                raise FormatError(f"{path}:{lineno}: non-finite sample {line!r}")
            values.append(v)
    if "fs" not in meta:
        raise FormatError(f"{path}: missing required header 'fs'")
    try:
        fs = float(meta["fs"])
    except ValueError:
        raise FormatError(f"{path}: fs header is not a number: {meta['fs']!r}") from None
    if fs <= 0:
        raise FormatError(f"{path}: fs must be positive, got {fs}")
    if not values:
        raise FormatError(f"{path}: no samples")
    return EcgRecording(
        samples=np.array(values),
        fs=fs,
        lead_name=meta.get("lead", "V1"),
        record_id=meta.get("record_id", "unknown"),
    )


def _load_binary(path) -> EcgRecording:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != BINARY_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r} (offset 0)")
        raw = fh.read(4)
        if len(raw) != 4:
            raise FormatError(f"{path}: truncated header length (offset 4)")
        (hlen,) = struct.unpack("<I", raw)
        try:
            header = json.loads(fh.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: bad JSON header: {exc}") from None
        for key in ("record_id", "fs", "lead", "n"):
            if key not in header:
                raise FormatError(f"{path}: header missing key {key!r}")
        n = int(header["n"])
        data = np.fromfile(fh, dtype="<f4", count=n)
        if len(data) != n:
            raise FormatError(f"{path}: expected {n} samples, found {len(data)}")
    return EcgRecording(
        samples=data.astype(np.float64),
        fs=float(header["fs"]),
        lead_name=str(header["lead"]),
        record_id=str(header["record_id"]),
    )


def write_recording(rec: EcgRecording, path, fmt="csv") -> None:
    path = str(path)
    if fmt == "csv":
        with open(path, "w") as fh:
            fh.write(f"# record_id={rec.record_id}\n")
            fh.write(f"# fs={rec.fs}\n")
            fh.write(f"# lead={rec.lead_name}\n")
            for v in rec.samples:
                fh.write(f"{v:.9g}\n")
    elif fmt == "binary":
        header = json.dumps(
            {"record_id": rec.record_id, "fs": rec.fs, "lead": rec.lead_name,
             "n": int(len(rec.samples))}
        ).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            rec.samples.astype("<f4").tofile(fh)
    else:
        raise FormatError(f"unknown recording format {fmt!r}")


def load_annotations(path) -> RhythmAnnotation:
    with open(path, "r") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: bad annotation JSON: {exc}") from None
    if not isinstance(data, list):
        raise FormatError(f"{path}: annotation file must hold a JSON list")
    events = []
    for i, item in enumerate(data):
        try:
            events.append((int(item["onset"]), int(item["offset"]), str(item["label"])))
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{path}: event {i}: {exc}") from None
    return RhythmAnnotation(events=events)


def write_annotations(ann: RhythmAnnotation, path) -> None:
    data = [{"onset": int(a), "offset": int(b), "label": lab} for a, b, lab in ann.events]
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


def extract_af_windows(
    rec: EcgRecording,
    ann: RhythmAnnotation,
    min_event_s: float = 30.0,
    window_s: float = 60.0,
) -> AfWindowResult:
    """One window per AF event long enough to hold it, anchored at onset.

    AF events shorter than ``window_s`` but at least ``min_event_s`` long
    are counted as excluded; shorter stretches are not AF episodes and
    are ignored.
    """
    ann.validate(len(rec.samples))
    win_n = int(round(window_s * rec.fs))
    windows, excluded = [], []
    for onset, offset, label in ann.events:
        if label != "AF":
            continue
        dur = (offset - onset) / rec.fs
        if dur >= window_s:
            windows.append(
                AnalysisWindow(
                    record_id=rec.record_id,
                    start_sample=onset,
                    length_samples=win_n,
                    label="AF",
                )
            )
        elif dur >= min_event_s:
            excluded.append((onset, offset))
    return AfWindowResult(windows=windows, excluded_events=excluded)


def sample_nonaf_windows(
    rec: EcgRecording,
    ann: RhythmAnnotation,
    count: int,
    rng_seed: int,
    window_s: float = 60.0,
):
    """Up to ``count`` non-overlapping windows from non-AF regions.

    Each non-AF region is tiled into window-sized slots and slots are
    drawn uniformly without replacement, so windows never overlap and
    the draw is reproducible. Returns (windows, shortfall) where
    shortfall counts how many requested windows could not be placed.
    """
    ann.validate(len(rec.samples))
    win_n = int(round(window_s * rec.fs))
    slots = []
    for onset, offset, label in ann.events:
        if label != "non-AF":
            continue
        k = (offset - onset) // win_n
        slots.extend(onset + i * win_n for i in range(k))
    rng = np.random.default_rng(rng_seed)
    take = min(count, len(slots))
    chosen = sorted(rng.choice(len(slots), size=take, replace=False)) if take else []
    windows = [
        AnalysisWindow(
            record_id=rec.record_id,
            start_sample=int(slots[i]),
            length_samples=win_n,
            label="non-AF",
        )
        for i in chosen
    ]
    return windows, count - take
