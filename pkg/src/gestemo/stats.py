"""Dataset statistics over a manifest: frame-count histogram, class counts,
per-class event-time sums, and per-polarity box summaries.

Everything here is a pure function of the manifest contents, so reruns on
the same data are identical.  Quartiles use linear interpolation between
order statistics and outliers follow the standard 1.5*IQR box rule.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataio import SplitManifest, read_events_file, read_feature_file
from .errors import EmptyStreamError, MissingFeaturesError
from .events import GestureClass

MICROS_PER_SECOND = 1_000_000.0


@dataclass(frozen=True)
class FiveNumber:
    """min/Q1/median/Q3/max plus the values outside the 1.5*IQR fences."""

    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    outliers: Tuple[float, ...]

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "FiveNumber":
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            raise EmptyStreamError("five-number summary of an empty sequence")
        q1, med, q3 = np.percentile(v, [25.0, 50.0, 75.0])
        iqr = q3 - q1
        lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        out = tuple(float(x) for x in np.sort(v[(v < lo) | (v > hi)]))
        return cls(float(v.min()), float(q1), float(med), float(q3),
                   float(v.max()), out)

    def to_dict(self) -> dict:
        return {
            "min": self.minimum, "q1": self.q1, "median": self.median,
            "q3": self.q3, "max": self.maximum,
            "outliers": list(self.outliers),
        }


@dataclass(frozen=True)
class ClassStats:
    """Per-class rollup: sample count, summed event time, and positive and
    negative per-sample event-count box summaries."""

    gesture: str
    count: int
    time_sum_s: float
    positive: Optional[FiveNumber]
    negative: Optional[FiveNumber]

    def to_dict(self) -> dict:
        return {
            "gesture": self.gesture,
            "count": self.count,
            "time_sum_s": self.time_sum_s,
            "positive": self.positive.to_dict() if self.positive else None,
            "negative": self.negative.to_dict() if self.negative else None,
        }


def frame_length_histogram(manifest: SplitManifest,
                           bin_width: int = 100) -> Dict[str, List[int]]:
    """Counts of samples per frame-count bin [0,bw), [bw,2bw), ...

    Raises MissingFeaturesError when an entry has no feature file.
    """
    if bin_width < 1:
        raise ValueError(f"bin width must be >= 1, got {bin_width}")
    lengths = []
    for e in manifest.entries:
        if e.features is None:
            raise MissingFeaturesError(f"sample {e.id!r} has no feature file")
        seq = read_feature_file(manifest.path_of(e.features))
        lengths.append(len(seq))
    if not lengths:
        return {"bin_edges": [], "counts": []}
    n_bins = max(lengths) // bin_width + 1
    counts = np.bincount(np.asarray(lengths) // bin_width, minlength=n_bins)
    edges = [i * bin_width for i in range(n_bins + 1)]
    return {"bin_edges": edges, "counts": counts.tolist()}


def class_counts(manifest: SplitManifest) -> Dict[str, int]:
    """Exact sample counts for every gesture class, zeros included."""
    counts = {g.value: 0 for g in GestureClass}
    for e in manifest.entries:
        counts[e.gesture.value] += 1
    return counts


def event_time_sum(manifest: SplitManifest) -> Dict[str, float]:
    """Per class, the sum over samples of (t_last - t_first) in seconds.

    Zero-event streams contribute nothing and raise a warning.
    """
    sums = {g.value: 0.0 for g in GestureClass}
    for e in manifest.entries:
        stream = read_events_file(manifest.path_of(e.events))
        if len(stream) == 0:
            warnings.warn(f"sample {e.id!r}: empty event stream skipped")
            continue
        sums[e.gesture.value] += stream.duration_us() / MICROS_PER_SECOND
    return sums


def polarity_box_stats(manifest: SplitManifest) -> Dict[str, ClassStats]:
    """Per class and polarity, box summaries of per-sample event counts.

    Only classes with at least one sample appear in the result.
    """
    per_class: Dict[str, dict] = {}
    for e in manifest.entries:
        stream = read_events_file(manifest.path_of(e.events))
        d = per_class.setdefault(e.gesture.value,
                                 {"count": 0, "time": 0.0, "pos": [], "neg": []})
        d["count"] += 1
        if len(stream):
            d["time"] += stream.duration_us() / MICROS_PER_SECOND
        d["pos"].append(int((stream.p == 1).sum()))
        d["neg"].append(int((stream.p == 0).sum()))
    out: Dict[str, ClassStats] = {}
    for g in GestureClass:
        d = per_class.get(g.value)
        if d is None:
            continue
        out[g.value] = ClassStats(
            gesture=g.value,
            count=d["count"],
            time_sum_s=d["time"],
            positive=FiveNumber.from_values(d["pos"]),
            negative=FiveNumber.from_values(d["neg"]),
        )
    return out


def dataset_stats(manifest: SplitManifest, bin_width: int = 100) -> dict:
    """One JSON-ready document bundling every analysis."""
    return {
        "n_samples": len(manifest.entries),
        "frame_histogram": frame_length_histogram(manifest, bin_width),
        "class_counts": class_counts(manifest),
        "event_time_sum_s": event_time_sum(manifest),
        "polarity_boxes": {k: v.to_dict()
                           for k, v in polarity_box_stats(manifest).items()},
    }


# -- CSV emitters (one per analysis) ----------------------------------------------

def frame_histogram_csv(hist: Dict[str, List[int]]) -> List[str]:
    lines = ["bin_start,bin_end,count"]
    edges, counts = hist["bin_edges"], hist["counts"]
    for i, c in enumerate(counts):
        lines.append(f"{edges[i]},{edges[i + 1]},{c}")
    return lines


def class_counts_csv(counts: Dict[str, int]) -> List[str]:
    return ["class,count"] + [f"{k},{v}" for k, v in counts.items()]


def time_sum_csv(sums: Dict[str, float]) -> List[str]:
    return ["class,seconds"] + [f"{k},{v:.6f}" for k, v in sums.items()]


def polarity_box_csv(stats: Dict[str, ClassStats]) -> List[str]:
    lines = ["class,polarity,min,q1,median,q3,max,n_outliers"]
    for g, cs in stats.items():
        for pol, fn in (("positive", cs.positive), ("negative", cs.negative)):
            lines.append(f"{g},{pol},{fn.minimum:.6f},{fn.q1:.6f},"
                         f"{fn.median:.6f},{fn.q3:.6f},{fn.maximum:.6f},"
                         f"{len(fn.outliers)}")
    return lines
