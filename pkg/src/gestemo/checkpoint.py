"""Single-file model checkpoints.

Layout: one line of JSON (format tag, architecture, cell constants, fusion
weight, seed, tensor names and shapes, free-form extra) terminated by a
newline, then the named tensors concatenated as little-endian float64 in
the header's order.  Saving and loading round-trips bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .errors import ParseError
from .fusion import FusionConfig, HeadParams, RecurrentParams
from .snn import LifConfig, SnnArchitecture
from .training import ModelParams

FORMAT_TAG = "gestemo.ckpt"
FORMAT_VERSION = 1

_LSTM_KEYS = ("lstm.wx", "lstm.wh", "lstm.b")
_HEAD_KEYS = ("head.w1", "head.b1", "head.w2", "head.b2")


@dataclass
class Checkpoint:
    """Everything needed to rebuild and rerun a trained model."""

    model: ModelParams
    arch: SnnArchitecture
    lif: LifConfig
    fusion: FusionConfig
    seed: int
    label_space: Tuple[str, ...]
    extra: dict = field(default_factory=dict)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    tensors = ckpt.model.flat()
    names = sorted(tensors)
    header = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "seed": int(ckpt.seed),
        "arch": ckpt.arch.to_dict(),
        "lif": ckpt.lif.to_dict(),
        "fusion": ckpt.fusion.to_dict(),
        "label_space": list(ckpt.label_space),
        "tensors": [{"name": n, "shape": list(tensors[n].shape)} for n in names],
        "extra": ckpt.extra,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True, separators=(",", ":"))
                .encode("utf-8"))
        f.write(b"\n")
        for n in names:
            f.write(np.ascontiguousarray(tensors[n], dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        data = f.read()
    nl = data.find(b"\n")
    if nl < 0:
        raise ParseError(f"{path}: no header line")
    try:
        header = json.loads(data[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ParseError(f"{path}: bad header ({e})")
    if header.get("format") != FORMAT_TAG:
        raise ParseError(f"{path}: not a checkpoint file "
                         f"(format={header.get('format')!r})")
    if header.get("version") != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported version {header.get('version')!r}")
    blob = data[nl + 1:]
    sizes = [int(np.prod(t["shape"], dtype=np.int64)) for t in header["tensors"]]
    if len(blob) != 8 * sum(sizes):
        raise ParseError(f"{path}: tensor block is {len(blob)} bytes, "
                         f"header promises {8 * sum(sizes)}")
    arrays: Dict[str, np.ndarray] = {}
    offset = 0
    for t, n in zip(header["tensors"], sizes):
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=offset)
        arrays[t["name"]] = arr.reshape(t["shape"]).astype(np.float64, copy=True)
        offset += 8 * n
    model = ModelParams()
    snn = {k: v for k, v in arrays.items()
           if k not in _LSTM_KEYS and k not in _HEAD_KEYS}
    if snn:
        model.snn = snn
    if all(k in arrays for k in _LSTM_KEYS):
        model.lstm = RecurrentParams(arrays["lstm.wx"], arrays["lstm.wh"],
                                     arrays["lstm.b"])
    if all(k in arrays for k in _HEAD_KEYS):
        model.head = HeadParams(arrays["head.w1"], arrays["head.b1"],
                                arrays["head.w2"], arrays["head.b2"])
    return Checkpoint(
        model=model,
        arch=SnnArchitecture.from_dict(header["arch"]),
        lif=LifConfig.from_dict(header["lif"]),
        fusion=FusionConfig.from_dict(header["fusion"]),
        seed=header["seed"],
        label_space=tuple(header["label_space"]),
        extra=header.get("extra", {}),
    )
