"""Dataset ingestion: manifest-driven loading, 1024-step block reduction, and
assembly of per-load labeled series."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass

import numpy as np

from .segmentation import TimeSeries

log = logging.getLogger("vibgraph")

BINARY_EXTENSIONS = {".bin", ".f64", ".raw"}


@dataclass
class RawRecording:
    samples: np.ndarray
    sampling_rate: float
    fault_class: int
    load_tag: str
    source_file: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sampling_rate <= 0:
            raise ValueError("sampling_rate must be positive")
        if self.samples.size == 0:
            raise ValueError("recording has no samples")


@dataclass
class ManifestEntry:
    file: str
    channel: int
    fault_class: int
    load_tag: str


def read_manifest(path: str, n_classes: int = 10) -> list[ManifestEntry]:
    """Parse the `file,channel,fault_class,load_tag` manifest CSV."""
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"file", "channel", "fault_class", "load_tag"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(
                f"manifest {path} must have header columns {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            fault_class = int(row["fault_class"])
            if not 0 <= fault_class < n_classes:
                raise ValueError(
                    f"{path}:{lineno}: fault_class {fault_class} outside "
                    f"[0, {n_classes})")
            entries.append(ManifestEntry(file=row["file"],
                                         channel=int(row["channel"]),
                                         fault_class=fault_class,
                                         load_tag=row["load_tag"]))
    if not entries:
        raise ValueError(f"manifest {path} lists no recordings")
    return entries


def _read_samples(path: str, channel: int) -> np.ndarray:
    ext = os.path.splitext(path)[1].lower()
    if ext in BINARY_EXTENSIONS:
        return np.fromfile(path, dtype="<f8")
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cols = line.split(",")
            if channel >= len(cols):
                raise ValueError(f"{path}:{lineno}: no column {channel}")
            token = cols[channel].strip()
            try:
                values.append(float(token))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: unparsable value {token!r}") from exc
    return np.asarray(values, dtype=np.float64)


def load_recordings(data_dir: str, manifest: list[ManifestEntry],
                    sampling_rate: float = 48000.0) -> list[RawRecording]:
    """Load every manifest entry; NaN samples are dropped with a logged count."""
    recordings = []
    for entry in manifest:
        path = os.path.join(data_dir, entry.file)
        if not os.path.exists(path):
            raise FileNotFoundError(f"recording file not found: {path}")
        samples = _read_samples(path, entry.channel)
        nan_mask = np.isnan(samples)
        if nan_mask.any():
            log.info("NaN removal: dropped %d of %d samples from %s",
                     int(nan_mask.sum()), samples.size, entry.file)
            samples = samples[~nan_mask]
        if samples.size == 0:
            raise ValueError(f"{entry.file}: empty after NaN removal")
        recordings.append(RawRecording(samples=samples,
                                       sampling_rate=sampling_rate,
                                       fault_class=entry.fault_class,
                                       load_tag=entry.load_tag,
                                       source_file=entry.file))
    return recordings


REDUCERS = {
    "rms": lambda blocks: np.sqrt((blocks ** 2).mean(axis=1)),
    "mean": lambda blocks: blocks.mean(axis=1),
    "first": lambda blocks: blocks[:, 0],
}


def block_reduce(recording: RawRecording, block: int = 1024,
                 reducer: str = "rms") -> TimeSeries:
    """One value per full ``block`` of samples; the trailing remainder is dropped.

    Default reducer is RMS, which preserves the vibration energy per block.
    """
    if block < 1:
        raise ValueError("block must be >= 1")
    n_blocks = recording.samples.size // block
    if n_blocks == 0:
        raise ValueError(
            f"recording of {recording.samples.size} samples is shorter than "
            f"one block of {block}")
    if reducer not in REDUCERS:
        raise ValueError(f"unknown reducer {reducer!r}; choose from {sorted(REDUCERS)}")
    blocks = recording.samples[:n_blocks * block].reshape(n_blocks, block)
    reduced = REDUCERS[reducer](blocks)
    labels = np.full(n_blocks, recording.fault_class, dtype=np.int64)
    return TimeSeries(samples=reduced, labels=labels,
                      source_id=recording.load_tag)


def assemble_dataset(recordings: list[RawRecording], block: int = 1024,
                     reducer: str = "rms") -> dict[str, TimeSeries]:
    """Per-load labeled series: reduced recordings concatenated in manifest order.

    Every load must cover every fault class seen anywhere in the manifest.
    """
    if not recordings:
        raise ValueError("no recordings to assemble")
    all_classes = sorted({r.fault_class for r in recordings})
    loads = {}
    for rec in recordings:
        loads.setdefault(rec.load_tag, []).append(rec)

    out = {}
    for load_tag, recs in loads.items():
        present = {r.fault_class for r in recs}
        missing = [c for c in all_classes if c not in present]
        if missing:
            raise ValueError(
                f"load {load_tag!r} has zero recordings for classes {missing}")
        pieces = [block_reduce(r, block, reducer) for r in recs]
        out[load_tag] = TimeSeries(
            samples=np.concatenate([p.samples for p in pieces]),
            labels=np.concatenate([p.labels for p in pieces]),
            source_id=load_tag)
    return out
