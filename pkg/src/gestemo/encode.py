"""Compress an event stream into K dense spike planes by fixed event count.

Events are split in time order into K contiguous groups; the first
(L mod K) groups take ceil(L/K) events, the rest floor(L/K), so group sizes
never differ by more than one and trailing groups are all-zero when K > L.
Each group is histogrammed per pixel and per polarity, giving a
K x 2 x H x W non-negative count tensor (channel 0 = negative polarity,
channel 1 = positive).  The total count always equals the source event
count exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadFactorError, BadKError, EmptyStreamError, ParseError
from .events import EventStream, Geometry

SCALE_MODES = ("none", "clip01", "divide_by_max")


@dataclass(frozen=True)
class DenseSpikePlanes:
    """K planes of per-pixel, per-polarity event counts."""

    k: int
    geometry: Geometry
    counts: np.ndarray  # (K, 2, H, W) int64

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        expected = (self.k, 2, self.geometry.height, self.geometry.width)
        if c.shape != expected:
            raise BadKError(f"counts shape {c.shape} != {expected}")
        if np.any(c < 0):
            raise BadKError("plane counts must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def per_plane_totals(self) -> np.ndarray:
        return self.counts.sum(axis=(1, 2, 3))


def group_sizes(n_events: int, k: int) -> np.ndarray:
    """Group sizes for splitting n_events into k ordered groups; the
    remainder is front-loaded."""
    base, extra = divmod(n_events, k)
    sizes = np.full(k, base, dtype=np.int64)
    sizes[:extra] += 1
    return sizes


def dense_spike_planes(stream: EventStream, k: int) -> DenseSpikePlanes:
    """Count-based compression of a stream into K planes."""
    if k < 1:
        raise BadKError(f"K must be >= 1, got {k}")
    n = len(stream)
    if n == 0:
        raise EmptyStreamError("cannot encode an empty stream")
    g = stream.geometry
    sizes = group_sizes(n, k)
    group = np.repeat(np.arange(k, dtype=np.int64), sizes)
    flat = ((group * 2 + stream.p) * g.height + stream.y) * g.width + stream.x
    counts = np.bincount(flat, minlength=k * 2 * g.height * g.width)
    counts = counts.reshape(k, 2, g.height, g.width).astype(np.int64)
    return DenseSpikePlanes(k=k, geometry=g, counts=counts)


def downsample_planes(planes: DenseSpikePlanes, factor: int) -> DenseSpikePlanes:
    """Block-sum spatial pooling; pads H and W with zeros up to a multiple
    of factor, so the total count is conserved exactly."""
    if factor < 1:
        raise BadFactorError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return planes
    c = planes.counts
    k, _, h, w = c.shape
    hp = -h % factor
    wp = -w % factor
    if hp or wp:
        c = np.pad(c, ((0, 0), (0, 0), (0, hp), (0, wp)))
    nh, nw = (h + hp) // factor, (w + wp) // factor
    pooled = c.reshape(k, 2, nh, factor, nw, factor).sum(axis=(3, 5))
    return DenseSpikePlanes(k=k, geometry=Geometry(nw, nh), counts=pooled)


def scale_planes(planes: DenseSpikePlanes, mode: str = "clip01") -> np.ndarray:
    """Condition integer counts into real-valued network input.

    none          raw counts as float64
    clip01        1.0 wherever a count is positive (binary spike planes)
    divide_by_max counts / global max (all zeros stay zero)
    """
    c = planes.counts
    if mode == "none":
        return c.astype(np.float64)
    if mode == "clip01":
        return (c > 0).astype(np.float64)
    if mode == "divide_by_max":
        m = c.max()
        if m == 0:
            return np.zeros_like(c, dtype=np.float64)
        return c / float(m)
    raise ValueError(f"unknown scale mode {mode!r}; expected one of {SCALE_MODES}")


def write_planes_file(planes: DenseSpikePlanes, path) -> None:
    """Plane file: header ``K,W,H`` then one line of H*W integers per
    polarity plane, K*2 lines in (k, polarity) order."""
    g = planes.geometry
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{planes.k},{g.width},{g.height}\n")
        flat = planes.counts.reshape(planes.k * 2, g.height * g.width)
        for row in flat:
            f.write(" ".join(str(v) for v in row) + "\n")


def read_planes_file(path) -> DenseSpikePlanes:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        try:
            k, w, h = (int(v) for v in header.split(","))
        except ValueError:
            raise ParseError(f"{path}: bad planes header {header!r}", line=1)
        rows = []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                row = [int(v) for v in line.split()]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer value", line=lineno)
            if len(row) != h * w:
                raise ParseError(f"{path}:{lineno}: expected {h * w} values, "
                                 f"got {len(row)}", line=lineno)
            rows.append(row)
    if len(rows) != k * 2:
        raise ParseError(f"{path}: expected {k * 2} plane rows, got {len(rows)}")
    counts = np.asarray(rows, dtype=np.int64).reshape(k, 2, h, w)
    return DenseSpikePlanes(k=k, geometry=Geometry(w, h), counts=counts)
