"""Entropy-driven window selection and overlapping segmentation of labeled series."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TimeSeries:
    """One channel of preprocessed vibration samples with per-sample labels."""

    samples: np.ndarray
    labels: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.samples.ndim != 1 or self.labels.ndim != 1:
            raise ValueError("samples and labels must be 1-D")
        if len(self.samples) != len(self.labels):
            raise ValueError(
                f"samples ({len(self.samples)}) and labels ({len(self.labels)}) "
                "must have equal length")
        if np.any(np.isnan(self.samples)):
            raise ValueError("samples contain NaN; preprocess first")

    def __len__(self):
        return len(self.samples)


@dataclass
class Segment:
    """A contiguous window with its majority label and origin index."""

    values: np.ndarray
    start_index: int
    label: int


@dataclass
class WindowSelection:
    w_star: int
    candidates: list = field(default_factory=list)
    scores: list = field(default_factory=list)


def default_bin_count(w: int) -> int:
    return max(2, math.ceil(math.sqrt(w)))


def shannon_entropy(values, bin_count: int) -> float:
    """Shannon entropy in nats of an equal-width histogram over [min, max].

    A constant segment occupies a single bin and has zero entropy.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("shannon_entropy: empty segment")
    if bin_count < 1:
        raise ValueError("bin_count must be >= 1")
    lo, hi = values.min(), values.max()
    if lo == hi:
        return 0.0
    counts, _ = np.histogram(values, bins=bin_count, range=(lo, hi))
    p = counts[counts > 0] / values.size
    return float(-(p * np.log(p)).sum())


def iter_starts(n: int, w: int, step: int):
    return range(0, n - w + 1, step)


def average_entropy(series: TimeSeries, w: int, step: int = 1,
                    bin_count: int | None = None) -> float:
    """Mean segment entropy over all windows of size ``w`` at the given stride."""
    n = len(series)
    if w > n:
        raise ValueError(f"window {w} exceeds series length {n}")
    if step < 1:
        raise ValueError("step must be >= 1")
    if bin_count is None:
        bin_count = default_bin_count(w)
    ents = [shannon_entropy(series.samples[i:i + w], bin_count)
            for i in iter_starts(n, w, step)]
    return float(np.mean(ents))


def select_window(series: TimeSeries, candidates, step: int = 1,
                  bin_count: int | None = None) -> WindowSelection:
    """Pick the window size maximizing mean entropy normalized by ln(w).

    Ties break toward the smallest window (cheaper downstream DTW).
    """
    candidates = sorted(set(int(c) for c in candidates))
    if not candidates:
        raise ValueError("empty candidate set")
    for c in candidates:
        if c < 2:
            raise ValueError(f"candidate window {c} < 2 (ln w must be positive)")
        if c > len(series):
            raise ValueError(f"candidate window {c} exceeds series length {len(series)}")
    scores = [average_entropy(series, w, step, bin_count) / math.log(w)
              for w in candidates]
    best = int(np.argmax(scores))   # argmax takes the first max: smallest window
    return WindowSelection(w_star=candidates[best], candidates=candidates,
                           scores=scores)


def majority_label(labels: np.ndarray) -> int:
    """Most frequent class id; ties go to the lowest id."""
    ids, counts = np.unique(labels, return_counts=True)
    return int(ids[np.argmax(counts)])


def segment(series: TimeSeries, w: int, step: int) -> list[Segment]:
    """Cut the series into overlapping windows of size ``w`` at stride ``step``."""
    n = len(series)
    if w > n:
        raise ValueError(f"window {w} exceeds series length {n}")
    if step < 1:
        raise ValueError("step must be >= 1")
    out = []
    for i in iter_starts(n, w, step):
        out.append(Segment(values=series.samples[i:i + w].copy(),
                           start_index=i,
                           label=majority_label(series.labels[i:i + w])))
    return out


def default_stride(w_star: int) -> int:
    return math.ceil(w_star / 2)


DEFAULT_CANDIDATES = (5, 10, 15, 20, 25, 30, 40, 50, 64, 100, 128)
