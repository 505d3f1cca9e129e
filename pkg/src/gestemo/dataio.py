"""File formats and dataset manifests.

Three plain-text formats, chosen to be human-inspectable and diffable:

* event file    -- header ``t,x,y,p geometry=WxH`` then one ``t,x,y,p``
                   integer row per event, sorted by t
* feature file  -- header ``D=<int>`` then one whitespace-separated real row
                   per video frame
* manifest      -- a single JSON document listing samples, labels, file
                   paths (relative to the manifest's directory) and their
                   train/test split

Feature loaders expose truncate/pad normalization: most recordings sit
under 100 frames, so the default pads or truncates to 100.  Padding is
applied at the FRONT so a recurrent reader's final state always sees the
real frames.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import (
    MissingFileError,
    ParseError,
    RaggedRowsError,
    UnknownIdError,
    UnknownLabelError,
)
from .events import (
    EmotionClass,
    EventStream,
    Geometry,
    GestureClass,
    SampleRecord,
    emotion_of,
)

#: default frame-count normalization for feature sequences
DEFAULT_FRAME_LIMIT = 100

_EVENT_HEADER = re.compile(r"^t,x,y,p geometry=(\d+)x(\d+)$")
_FEATURE_HEADER = re.compile(r"^D=(\d+)$")


@dataclass(frozen=True)
class FrameFeatureSequence:
    """Per-frame feature vectors for one recording: an (N, D) real matrix."""

    dim: int
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != self.dim:
            raise RaggedRowsError(f"expected (N,{self.dim}) matrix, got {v.shape}")
        if v.shape[0] < 1:
            raise ParseError("feature sequence must contain at least one frame")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    def normalized(self, frame_limit: int = DEFAULT_FRAME_LIMIT,
                   pad: str = "front") -> np.ndarray:
        """Return a (frame_limit, D) matrix: truncated if longer, zero-padded
        (front by default, or back) if shorter."""
        v = self.vectors
        if len(self) >= frame_limit:
            return v[:frame_limit].copy()
        out = np.zeros((frame_limit, self.dim))
        if pad == "front":
            out[frame_limit - len(self):] = v
        elif pad == "back":
            out[: len(self)] = v
        else:
            raise ValueError(f"pad must be 'front' or 'back', got {pad!r}")
        return out


def read_events_file(path) -> EventStream:
    """Parse an event file; validation (ordering, bounds) happens on load."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        m = _EVENT_HEADER.match(header)
        if not m:
            raise ParseError(f"{path}: bad event header {header!r}", line=1)
        geometry = Geometry(int(m.group(1)), int(m.group(2)))
        body = f.read()
    rows = _parse_int_rows(body, path, n_cols=4, delimiter=",")
    if rows.shape[0] == 0:
        return EventStream.empty(geometry)
    return EventStream.from_arrays(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3],
                                   geometry)


def write_events_file(stream: EventStream, path) -> None:
    """Inverse of read_events_file: round-trips to an equal stream."""
    g = stream.geometry
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"t,x,y,p geometry={g.width}x{g.height}\n")
        for t, x, y, p in zip(stream.t, stream.x, stream.y, stream.p):
            f.write(f"{t},{x},{y},{p}\n")


def read_feature_file(path) -> FrameFeatureSequence:
    """Parse a feature file; D comes from the header, rows must all match."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        m = _FEATURE_HEADER.match(header)
        if not m:
            raise ParseError(f"{path}: bad feature header {header!r}", line=1)
        dim = int(m.group(1))
        rows = []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            try:
                row = [float(v) for v in parts]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric value", line=lineno)
            if len(row) != dim:
                raise RaggedRowsError(
                    f"{path}:{lineno}: row has {len(row)} values, expected {dim}",
                    line=lineno)
            rows.append(row)
    if not rows:
        raise ParseError(f"{path}: feature file has no rows")
    return FrameFeatureSequence(dim, np.asarray(rows, dtype=np.float64))


def write_feature_file(seq: FrameFeatureSequence, path) -> None:
    """Writes with enough digits that float64 values round-trip exactly."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"D={seq.dim}\n")
        for row in seq.vectors:
            f.write(" ".join(format(v, ".17g") for v in row) + "\n")


def _parse_int_rows(body: str, path, n_cols: int, delimiter: str) -> np.ndarray:
    lines = [ln for ln in body.splitlines() if ln.strip()]
    if not lines:
        return np.zeros((0, n_cols), dtype=np.int64)
    try:
        return np.array([[int(v) for v in ln.split(delimiter)] for ln in lines],
                        dtype=np.int64)
    except ValueError:
        pass
    # slow path only to locate the offending line for the error message
    for i, ln in enumerate(lines, start=2):
        parts = ln.split(delimiter)
        if len(parts) != n_cols:
            raise ParseError(f"{path}:{i}: expected {n_cols} fields, got {len(parts)}",
                             line=i)
        for v in parts:
            try:
                int(v)
            except ValueError:
                raise ParseError(f"{path}:{i}: non-integer value {v!r}", line=i)
    raise ParseError(f"{path}: malformed rows")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    gesture: GestureClass
    events: str
    split: str
    features: Optional[str] = None


@dataclass
class SplitManifest:
    """Parsed dataset manifest; paths in entries are relative to root."""

    root: str
    entries: List[ManifestEntry] = field(default_factory=list)

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise ParseError(f"duplicate sample id {dup!r} in manifest")
        self._by_id: Dict[str, ManifestEntry] = {e.id: e for e in self.entries}

    def ids(self, split: Optional[str] = None) -> List[str]:
        return [e.id for e in self.entries if split is None or e.split == split]

    def entry(self, sample_id: str) -> ManifestEntry:
        try:
            return self._by_id[sample_id]
        except KeyError:
            raise UnknownIdError(f"sample id {sample_id!r} not in manifest")

    def path_of(self, rel: str) -> str:
        return os.path.join(self.root, rel)


def read_manifest(path) -> SplitManifest:
    """Load and validate a manifest: unique ids, known labels and splits,
    and every referenced file present on disk."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: invalid JSON ({e})")
    root = os.path.join(os.path.dirname(os.path.abspath(path)),
                        doc.get("root", "."))
    entries = []
    for i, raw in enumerate(doc.get("entries", [])):
        try:
            gesture = GestureClass(raw["gesture"])
        except ValueError:
            raise UnknownLabelError(f"entry {i}: unknown gesture {raw['gesture']!r}")
        except KeyError as e:
            raise ParseError(f"{path}: entry {i} missing key {e}")
        split = raw.get("split", "train")
        if split not in ("train", "test"):
            raise ParseError(f"{path}: entry {i} has unknown split {split!r}")
        entries.append(ManifestEntry(id=str(raw["id"]), gesture=gesture,
                                     events=raw["events"], split=split,
                                     features=raw.get("features")))
    manifest = SplitManifest(root=root, entries=entries)
    for e in manifest.entries:
        for rel in filter(None, (e.events, e.features)):
            p = manifest.path_of(rel)
            if not os.path.isfile(p):
                raise MissingFileError(f"manifest entry {e.id!r} references missing {p}")
    return manifest


def write_manifest(manifest: SplitManifest, path) -> None:
    doc = {
        "root": os.path.relpath(manifest.root, os.path.dirname(os.path.abspath(path))),
        "entries": [
            {k: v for k, v in (("id", e.id), ("gesture", e.gesture.value),
                               ("events", e.events), ("features", e.features),
                               ("split", e.split)) if v is not None}
            for e in manifest.entries
        ],
    }
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
    os.replace(tmp, path)  # manifest appears atomically, after all data files


def load_sample(manifest: SplitManifest, sample_id: str) -> SampleRecord:
    """Assemble a SampleRecord for one manifest entry; emotion is derived
    from the gesture label."""
    e = manifest.entry(sample_id)
    events_path = manifest.path_of(e.events)
    if not os.path.isfile(events_path):
        raise MissingFileError(f"sample {sample_id!r}: missing event file {events_path}")
    stream = read_events_file(events_path)
    features = None
    if e.features is not None:
        fpath = manifest.path_of(e.features)
        if not os.path.isfile(fpath):
            raise MissingFileError(f"sample {sample_id!r}: missing feature file {fpath}")
        features = read_feature_file(fpath)
    return SampleRecord(id=e.id, gesture=e.gesture, emotion=emotion_of(e.gesture),
                        events=stream, features=features)


def split_partition_ok(manifest: SplitManifest) -> bool:
    """True when train/test ids partition the id set (always holds for
    manifests built by this package; useful for imported data)."""
    train = set(manifest.ids("train"))
    test = set(manifest.ids("test"))
    return not (train & test) and (train | test) == set(manifest.ids())
