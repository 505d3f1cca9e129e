"""Frame branch and fusion: an LSTM over per-frame feature vectors, a small
classification head with dropout, and additive late fusion with the event
branch output.

The fused score is simply

    y_hat = s_dg + lam * branch_logits        (lam >= 0, default 1.0)

with no normalization before the sum; the predicted class is the argmax.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import DimMismatchError, NoRecordedForwardError

HEAD_DROPOUT = 0.5


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# -- recurrent branch ------------------------------------------------------------

@dataclass
class RecurrentParams:
    """LSTM weights; rows of wx/wh hold the four gates stacked i, f, g, o."""

    wx: np.ndarray   # (4H, D)
    wh: np.ndarray   # (4H, H)
    b: np.ndarray    # (4H,)

    def __post_init__(self):
        if self.wx.ndim != 2 or self.wh.ndim != 2 or self.b.ndim != 1:
            raise DimMismatchError("recurrent params must be 2d, 2d, 1d")
        four_h = self.wx.shape[0]
        if four_h % 4 != 0 or self.wh.shape != (four_h, four_h // 4) \
                or self.b.shape != (four_h,):
            raise DimMismatchError(
                f"inconsistent gate shapes wx={self.wx.shape} wh={self.wh.shape} "
                f"b={self.b.shape}")

    @property
    def hidden(self) -> int:
        return self.wx.shape[0] // 4

    @property
    def dim(self) -> int:
        return self.wx.shape[1]

    def names(self) -> Tuple[str, ...]:
        return ("lstm.wx", "lstm.wh", "lstm.b")

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {"lstm.wx": self.wx, "lstm.wh": self.wh, "lstm.b": self.b}


def init_recurrent_params(dim: int, hidden: int = 128, seed: int = 0) -> RecurrentParams:
    rng = np.random.default_rng(seed)
    bx = math.sqrt(6.0 / (dim + hidden))
    bh = math.sqrt(6.0 / (hidden + hidden))
    return RecurrentParams(
        wx=rng.uniform(-bx, bx, size=(4 * hidden, dim)),
        wh=rng.uniform(-bh, bh, size=(4 * hidden, hidden)),
        b=np.zeros(4 * hidden),
    )


@dataclass
class RecurrentTape:
    x: np.ndarray                  # (B, T, D)
    gates: np.ndarray              # (T, B, 4H) post-activation i,f,g,o
    c: np.ndarray                  # (T+1, B, H), c[0] = 0
    h: np.ndarray                  # (T+1, B, H), h[0] = 0


def recurrent_forward(x: np.ndarray, params: RecurrentParams, *,
                      record: bool = False):
    """Run the LSTM over time and return the final hidden state.

    x: (T, D) for one sequence or (B, T, D) for a batch.  With zero input
    and zero biases the output is exactly zero (tanh(0) gates through).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != params.dim:
        raise DimMismatchError(f"features shape {x.shape}, expected (B,T,{params.dim})")
    b, t_len, _ = x.shape
    hid = params.hidden
    h = np.zeros((b, hid))
    c = np.zeros((b, hid))
    tape = None
    if record:
        tape = RecurrentTape(
            x=x,
            gates=np.empty((t_len, b, 4 * hid)),
            c=np.zeros((t_len + 1, b, hid)),
            h=np.zeros((t_len + 1, b, hid)),
        )
    # precompute all input projections at once
    zx = x @ params.wx.T + params.b                      # (B, T, 4H)
    for t in range(t_len):
        z = zx[:, t] + h @ params.wh.T
        i = _sigmoid(z[:, :hid])
        f = _sigmoid(z[:, hid:2 * hid])
        g = np.tanh(z[:, 2 * hid:3 * hid])
        o = _sigmoid(z[:, 3 * hid:])
        c = f * c + i * g
        h = o * np.tanh(c)
        if record:
            tape.gates[t, :, :hid] = i
            tape.gates[t, :, hid:2 * hid] = f
            tape.gates[t, :, 2 * hid:3 * hid] = g
            tape.gates[t, :, 3 * hid:] = o
            tape.c[t + 1] = c
            tape.h[t + 1] = h
    h_last = h[0] if single else h
    return (h_last, tape) if record else h_last


def recurrent_backward(tape: Optional[RecurrentTape], d_hlast: np.ndarray,
                       params: RecurrentParams) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """Backprop through time; returns ({"lstm.wx": ..., ...}, d_x)."""
    if tape is None:
        raise NoRecordedForwardError("recurrent_backward requires a recorded tape")
    x = tape.x
    b, t_len, dim = x.shape
    hid = params.hidden
    d_hlast = np.asarray(d_hlast, dtype=np.float64).reshape(b, hid)
    g_wx = np.zeros_like(params.wx)
    g_wh = np.zeros_like(params.wh)
    g_b = np.zeros_like(params.b)
    d_x = np.zeros_like(x)
    dh = d_hlast.copy()
    dc = np.zeros((b, hid))
    for t in reversed(range(t_len)):
        i = tape.gates[t, :, :hid]
        f = tape.gates[t, :, hid:2 * hid]
        g = tape.gates[t, :, 2 * hid:3 * hid]
        o = tape.gates[t, :, 3 * hid:]
        c_t = tape.c[t + 1]
        c_prev = tape.c[t]
        h_prev = tape.h[t]
        tc = np.tanh(c_t)
        d_o = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        d_f = dc * c_prev
        d_i = dc * g
        d_g = dc * i
        dz = np.concatenate([
            d_i * i * (1.0 - i),
            d_f * f * (1.0 - f),
            d_g * (1.0 - g * g),
            d_o * o * (1.0 - o),
        ], axis=1)                                       # (B, 4H)
        g_wx += dz.T @ x[:, t]
        g_wh += dz.T @ h_prev
        g_b += dz.sum(axis=0)
        d_x[:, t] = dz @ params.wx
        dh = dz @ params.wh
        dc = dc * f
    return {"lstm.wx": g_wx, "lstm.wh": g_wh, "lstm.b": g_b}, d_x


# -- classification head ----------------------------------------------------------

@dataclass
class HeadParams:
    """Two dense layers with a ReLU and train-time dropout between them."""

    w1: np.ndarray   # (M, H)
    b1: np.ndarray   # (M,)
    w2: np.ndarray   # (C, M)
    b2: np.ndarray   # (C,)

    def __post_init__(self):
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise DimMismatchError("head weights must be 2d")
        if self.b1.shape != (self.w1.shape[0],) or self.b2.shape != (self.w2.shape[0],):
            raise DimMismatchError("head bias shapes inconsistent with weights")
        if self.w2.shape[1] != self.w1.shape[0]:
            raise DimMismatchError(
                f"head layer widths disagree: {self.w1.shape} then {self.w2.shape}")

    def names(self) -> Tuple[str, ...]:
        return ("head.w1", "head.b1", "head.w2", "head.b2")

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {"head.w1": self.w1, "head.b1": self.b1,
                "head.w2": self.w2, "head.b2": self.b2}


def init_head_params(hidden: int, mid: int, num_classes: int,
                     seed: int = 0) -> HeadParams:
    rng = np.random.default_rng(seed)
    b1 = math.sqrt(6.0 / (hidden + mid))
    b2 = math.sqrt(6.0 / (mid + num_classes))
    return HeadParams(
        w1=rng.uniform(-b1, b1, size=(mid, hidden)),
        b1=np.zeros(mid),
        w2=rng.uniform(-b2, b2, size=(num_classes, mid)),
        b2=np.zeros(num_classes),
    )


@dataclass
class HeadTape:
    h: np.ndarray
    z1: np.ndarray       # pre-relu
    a: np.ndarray        # post-relu, post-mask
    mask: Optional[np.ndarray]   # dropout keep mask scaled, or None in eval


def head_forward(h: np.ndarray, params: HeadParams, *, train: bool = False,
                 rng: Optional[np.random.Generator] = None,
                 dropout: float = HEAD_DROPOUT, record: bool = False):
    """h (B, H) or (H,) -> logits (B, C).

    In train mode each post-ReLU unit is dropped with probability `dropout`
    and survivors are scaled by 1/(1-dropout), so the expected train output
    equals the eval output.  Eval mode applies no mask and no scaling.
    """
    h = np.asarray(h, dtype=np.float64)
    single = h.ndim == 1
    if single:
        h = h[None]
    if h.shape[1] != params.w1.shape[1]:
        raise DimMismatchError(f"head input width {h.shape[1]} != {params.w1.shape[1]}")
    z1 = h @ params.w1.T + params.b1
    a = np.maximum(z1, 0.0)
    mask = None
    if train:
        if not (0.0 <= dropout < 1.0):
            raise DimMismatchError(f"dropout must be in [0,1), got {dropout}")
        if dropout > 0.0:
            if rng is None:
                raise NoRecordedForwardError("train-mode head needs an rng for dropout")
            keep = 1.0 - dropout
            mask = (rng.random(a.shape) < keep).astype(np.float64) / keep
            a = a * mask
    logits = a @ params.w2.T + params.b2
    out = logits[0] if single else logits
    if record:
        return out, HeadTape(h=h, z1=z1, a=a, mask=mask)
    return out


def head_backward(tape: Optional[HeadTape], d_logits: np.ndarray,
                  params: HeadParams) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """Returns ({"head.w1": ...}, d_h)."""
    if tape is None:
        raise NoRecordedForwardError("head_backward requires a recorded tape")
    b = tape.h.shape[0]
    d_logits = np.asarray(d_logits, dtype=np.float64).reshape(b, -1)
    g_w2 = d_logits.T @ tape.a
    g_b2 = d_logits.sum(axis=0)
    d_a = d_logits @ params.w2
    if tape.mask is not None:
        d_a = d_a * tape.mask
    d_z1 = d_a * (tape.z1 > 0.0)
    g_w1 = d_z1.T @ tape.h
    g_b1 = d_z1.sum(axis=0)
    d_h = d_z1 @ params.w1
    return {"head.w1": g_w1, "head.b1": g_b1, "head.w2": g_w2, "head.b2": g_b2}, d_h


# -- fusion ------------------------------------------------------------------------

@dataclass(frozen=True)
class FusionConfig:
    """Additive late fusion weight applied to the frame-branch logits."""

    lam: float = 1.0

    def __post_init__(self):
        if self.lam < 0.0:
            raise DimMismatchError(f"fusion weight must be >= 0, got {self.lam}")

    def to_dict(self) -> dict:
        return {"lam": self.lam}

    @classmethod
    def from_dict(cls, d: dict) -> "FusionConfig":
        return cls(**d)


def fuse(s_dg: np.ndarray, branch_logits: np.ndarray,
         cfg: FusionConfig = FusionConfig()) -> np.ndarray:
    """y_hat = s_dg + lam * branch_logits, elementwise over classes."""
    s = np.asarray(s_dg, dtype=np.float64)
    l = np.asarray(branch_logits, dtype=np.float64)
    if s.shape != l.shape:
        raise DimMismatchError(f"fusion shapes disagree: {s.shape} vs {l.shape}")
    return s + cfg.lam * l


def predict(scores: np.ndarray) -> np.ndarray:
    """Argmax class index along the last axis (first index wins ties)."""
    return np.argmax(np.asarray(scores), axis=-1)
