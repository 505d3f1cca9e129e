"""Locate frame-annotation timestamps inside an event time sequence and cut
streams into labeled segments.

The search is a binary descent with an absolute tolerance alpha: probe the
midpoint, succeed if it lies within alpha of the tag, otherwise recurse on
(lo, mid) when the midpoint is above the tag and on (mid, hi) when below,
stopping when the range no longer shrinks.  find_position clamps tags that
fall outside the list, then retries the descent with alpha = 1, 2, 3, ...
until it succeeds.  The result is guaranteed within alpha_final of the tag
but is NOT necessarily the globally nearest timestamp.

All indices here are 0-based; clamps return 0 and N-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import (
    BadCutsError,
    BadRangeError,
    EmptyTimeListError,
    NonMonotonicTimeError,
    UnsortedTagsError,
)
from .events import EventStream


@dataclass
class SearchTrace:
    """Instrumentation for one find_position call.

    comparisons counts midpoint probes (one list element examined per probe,
    summed over every alpha attempt); visited records the probe indices of
    the final attempt in descent order.
    """

    comparisons: int = 0
    alpha_final: int = 0
    clamped: bool = False
    visited: List[int] = field(default_factory=list)


def _as_times(times) -> np.ndarray:
    a = np.asarray(times, dtype=np.int64)
    if a.ndim != 1:
        raise BadRangeError(f"time list must be 1-D, got shape {a.shape}")
    return a


def validate_times(times) -> np.ndarray:
    a = _as_times(times)
    bad = np.nonzero(np.diff(a) < 0)[0]
    if bad.size:
        i = int(bad[0]) + 1
        raise NonMonotonicTimeError(f"time list decreases at index {i}", index=i)
    return a


def validate_tags(tags) -> np.ndarray:
    a = np.asarray(tags, dtype=np.int64)
    if a.ndim != 1:
        raise UnsortedTagsError(f"tag list must be 1-D, got shape {a.shape}")
    if a.size > 1 and not np.all(np.diff(a) > 0):
        raise UnsortedTagsError("tags must be strictly increasing")
    return a


def scaling_binary_search(times, lo: int, hi: int, tag: int, alpha: int,
                          trace: Optional[SearchTrace] = None) -> Optional[int]:
    """One tolerance-alpha descent over times[lo..hi] (inclusive bounds).

    Returns an index m with |times[m] - tag| < alpha, or None when the
    descent exhausts the range without meeting the tolerance.
    """
    a = _as_times(times)
    n = a.shape[0]
    if lo < 0 or lo > hi or hi >= n:
        raise BadRangeError(f"range [{lo},{hi}] invalid for list of length {n}")
    if alpha < 1:
        raise BadRangeError(f"alpha must be >= 1, got {alpha}")
    while True:
        mid = lo + (hi - lo) // 2
        if trace is not None:
            trace.comparisons += 1
            trace.visited.append(mid)
        if abs(int(a[mid]) - tag) < alpha:
            return mid
        if a[mid] > tag:
            new_lo, new_hi = lo, mid
        else:
            new_lo, new_hi = mid, hi
        if (new_lo, new_hi) == (lo, hi):  # range stopped shrinking: give up
            return None
        lo, hi = new_lo, new_hi


def find_position(tag: int, times, trace: Optional[SearchTrace] = None) -> int:
    """Index of a timestamp near tag.

    Below-range tags return 0, above-range tags return N-1.  In-range tags
    run the descent with alpha escalating by +1 per retry until it succeeds;
    termination is guaranteed because the descent always probes a neighbor
    of the tag's insertion point, so alpha eventually exceeds that gap.
    """
    a = _as_times(times)
    n = a.shape[0]
    if n == 0:
        raise EmptyTimeListError("cannot search an empty time list")
    if trace is None:
        trace = SearchTrace()
    if tag < a[0]:
        trace.clamped = True
        return 0
    if tag > a[n - 1]:
        trace.clamped = True
        return n - 1
    alpha = 1
    while True:
        trace.visited.clear()
        found = scaling_binary_search(a, 0, n - 1, tag, alpha, trace)
        if found is not None:
            trace.alpha_final = alpha
            return found
        alpha += 1


def split_indices(tags, times) -> np.ndarray:
    """Apply find_position to each annotation tag; output is non-decreasing
    for strictly increasing tags."""
    tag_arr = validate_tags(tags)
    if tag_arr.size == 0:
        return np.zeros(0, dtype=np.int64)
    time_arr = validate_times(times)
    if time_arr.size == 0:
        raise EmptyTimeListError("cannot split against an empty time list")
    out = np.array([find_position(int(t), time_arr) for t in tag_arr],
                   dtype=np.int64)
    return out


def segment_events(stream: EventStream, cuts: Sequence[int]) -> List[EventStream]:
    """Cut a stream into len(cuts)+1 contiguous segments.

    Segment k covers event indices [cuts[k-1], cuts[k]) with implicit
    leading 0 and trailing len(stream); concatenating the segments restores
    the stream exactly.
    """
    n = len(stream)
    cut_arr = np.asarray(cuts, dtype=np.int64)
    if cut_arr.size and (np.any(np.diff(cut_arr) < 0)
                         or cut_arr[0] < 0 or cut_arr[-1] > n):
        raise BadCutsError(f"cuts must be sorted within [0,{n}], got {list(cut_arr)}")
    bounds = [0, *cut_arr.tolist(), n]
    return [stream.slice(bounds[k], bounds[k + 1]) for k in range(len(bounds) - 1)]
