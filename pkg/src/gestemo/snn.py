"""Event branch: a feedforward stack of LIF spiking layers run for K time
steps, one dense spike plane per step.

Dynamics per layer and step, with membrane potential v and input current I:

    v' = beta * v + I
    s  = 1  where v' >= theta, else 0
    v  = v' * (1 - s)          (reset to_zero)
    v  = v' - theta * s        (reset subtract_theta)

The class-sized output is the mean of the last layer's spikes over the K
steps, so every component lies in [0, 1].

Training uses backpropagation through time with a rectangular surrogate in
place of the threshold derivative: d(spike)/dv ~= 1/(2w) for |v - theta| < w,
else 0.  The backward pass differentiates the reset through the surrogate as
well (product rule), which makes it the exact gradient of the "relaxed"
network in which the hard threshold is replaced by the matching piecewise
linear sigmoid clip((v - theta + w) / 2w, 0, 1).  That is what the
finite-difference tests check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .errors import (
    NoRecordedForwardError,
    ShapeMismatchError,
    UninitializedParamsError,
)

DEFAULT_SURROGATE_WIDTH = 0.5


@dataclass(frozen=True)
class LifConfig:
    """Leaky integrate-and-fire constants; beta is the per-step leak."""

    beta: float = 0.9
    theta: float = 1.0
    reset: str = "to_zero"

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise ShapeMismatchError(f"beta must be in (0,1], got {self.beta}")
        if self.theta <= 0.0:
            raise ShapeMismatchError(f"theta must be > 0, got {self.theta}")
        if self.reset not in ("to_zero", "subtract_theta"):
            raise ShapeMismatchError(f"unknown reset mode {self.reset!r}")

    def to_dict(self) -> dict:
        return {"beta": self.beta, "theta": self.theta, "reset": self.reset}

    @classmethod
    def from_dict(cls, d: dict) -> "LifConfig":
        return cls(**d)


# -- architecture -------------------------------------------------------------

@dataclass(frozen=True)
class Conv:
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1


@dataclass(frozen=True)
class Pool:
    window: int
    mode: str = "sum"  # or "max"


@dataclass(frozen=True)
class Dense:
    in_width: int
    out_width: int


Layer = Union[Conv, Pool, Dense]

_LAYER_KIND = {Conv: "conv", Pool: "pool", Dense: "fc"}


@dataclass(frozen=True)
class SnnArchitecture:
    """Ordered layer stack over (channels, height, width) input.

    A LIF follows every layer, pooling included (sum pooling of spikes feeds
    the next membrane, preserving event-count semantics).  The final dense
    width must equal num_classes.
    """

    layers: Tuple[Layer, ...]
    input_shape: Tuple[int, int, int]
    num_classes: int

    def __post_init__(self):
        shapes = self.output_shapes()  # raises on incompatibility
        if not self.layers or not isinstance(self.layers[-1], Dense):
            raise ShapeMismatchError("architecture must end with a Dense layer")
        if shapes[-1] != (self.num_classes,):
            raise ShapeMismatchError(
                f"final layer width {shapes[-1]} != ({self.num_classes},)")

    def output_shapes(self) -> List[tuple]:
        shape = tuple(self.input_shape)
        out = []
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Conv):
                if len(shape) != 3 or shape[0] != layer.in_channels:
                    raise ShapeMismatchError(
                        f"layer {i}: conv expects {layer.in_channels} channels, "
                        f"input is {shape}")
                h = (shape[1] - layer.kernel) // layer.stride + 1
                w = (shape[2] - layer.kernel) // layer.stride + 1
                if h < 1 or w < 1:
                    raise ShapeMismatchError(f"layer {i}: kernel larger than input {shape}")
                shape = (layer.out_channels, h, w)
            elif isinstance(layer, Pool):
                if len(shape) != 3:
                    raise ShapeMismatchError(f"layer {i}: pool needs spatial input")
                h, w = shape[1] // layer.window, shape[2] // layer.window
                if h < 1 or w < 1:
                    raise ShapeMismatchError(f"layer {i}: window exceeds input {shape}")
                shape = (shape[0], h, w)
            elif isinstance(layer, Dense):
                flat = int(np.prod(shape))
                if flat != layer.in_width:
                    raise ShapeMismatchError(
                        f"layer {i}: fc expects width {layer.in_width}, input "
                        f"flattens to {flat}")
                shape = (layer.out_width,)
            else:
                raise ShapeMismatchError(f"layer {i}: unknown layer {layer!r}")
            out.append(shape)
        return out

    def param_names(self) -> List[str]:
        names = []
        for i, layer in enumerate(self.layers):
            if isinstance(layer, (Conv, Dense)):
                kind = _LAYER_KIND[type(layer)]
                names += [f"{kind}{i}.w", f"{kind}{i}.b"]
        return names

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "num_classes": self.num_classes,
            "layers": [dict(kind=_LAYER_KIND[type(l)], **vars(l)) for l in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SnnArchitecture":
        layers = []
        for spec in d["layers"]:
            spec = dict(spec)
            kind = spec.pop("kind")
            layers.append({"conv": Conv, "pool": Pool, "fc": Dense}[kind](**spec))
        return cls(tuple(layers), tuple(d["input_shape"]), d["num_classes"])


def default_architecture(num_classes: int, height: int = 32, width: int = 32,
                         pool_mode: str = "sum") -> SnnArchitecture:
    """Desk-scale default: two conv/pool blocks and two dense layers."""
    h1 = (height - 3) + 1
    w1 = (width - 3) + 1
    h2 = (h1 // 2 - 3) + 1
    w2 = (w1 // 2 - 3) + 1
    flat = 32 * (h2 // 2) * (w2 // 2)
    return SnnArchitecture(
        layers=(
            Conv(2, 16, 3),
            Pool(2, pool_mode),
            Conv(16, 32, 3),
            Pool(2, pool_mode),
            Dense(flat, 256),
            Dense(256, num_classes),
        ),
        input_shape=(2, height, width),
        num_classes=num_classes,
    )


# -- parameters ----------------------------------------------------------------

def _fans(layer: Layer) -> Tuple[int, int]:
    if isinstance(layer, Conv):
        rf = layer.kernel * layer.kernel
        return layer.in_channels * rf, layer.out_channels * rf
    return layer.in_width, layer.out_width


def init_params(arch: SnnArchitecture, seed: int,
                scheme: str = "xavier_uniform") -> Dict[str, np.ndarray]:
    """Seeded parameter initialization; biases start at zero."""
    if scheme != "xavier_uniform":
        raise ValueError(f"unknown init scheme {scheme!r}")
    rng = np.random.default_rng(seed)
    params: Dict[str, np.ndarray] = {}
    for i, layer in enumerate(arch.layers):
        if isinstance(layer, Pool):
            continue
        kind = _LAYER_KIND[type(layer)]
        fan_in, fan_out = _fans(layer)
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        if isinstance(layer, Conv):
            wshape = (layer.out_channels, layer.in_channels, layer.kernel, layer.kernel)
            bshape = (layer.out_channels,)
        else:
            wshape = (layer.out_width, layer.in_width)
            bshape = (layer.out_width,)
        params[f"{kind}{i}.w"] = rng.uniform(-bound, bound, size=wshape)
        params[f"{kind}{i}.b"] = np.zeros(bshape)
    return params


def _require_params(arch: SnnArchitecture, params: Dict[str, np.ndarray]) -> None:
    for name in arch.param_names():
        if name not in params:
            raise UninitializedParamsError(f"missing parameter {name!r}")


# -- LIF dynamics ----------------------------------------------------------------

def lif_step(potential: np.ndarray, input_current: np.ndarray,
             cfg: LifConfig) -> Tuple[np.ndarray, np.ndarray]:
    """One membrane update: leak, integrate, threshold, reset.

    Returns (new_potential, spikes); spikes are exactly 0.0 or 1.0 and fire
    on v' >= theta (threshold equality fires).
    """
    v = np.asarray(potential, dtype=np.float64)
    i = np.asarray(input_current, dtype=np.float64)
    if v.shape != i.shape:
        raise ShapeMismatchError(f"potential {v.shape} vs current {i.shape}")
    vp = cfg.beta * v + i
    s = (vp >= cfg.theta).astype(np.float64)
    if cfg.reset == "to_zero":
        v_new = vp * (1.0 - s)
    else:
        v_new = vp - cfg.theta * s
    return v_new, s


def _spike(vp: np.ndarray, cfg: LifConfig, fn: str, width: float) -> np.ndarray:
    if fn == "binary":
        return (vp >= cfg.theta).astype(np.float64)
    if fn == "relaxed":
        return np.clip((vp - cfg.theta + width) / (2.0 * width), 0.0, 1.0)
    raise ValueError(f"unknown spike function {fn!r}")


def _surrogate_deriv(vp: np.ndarray, cfg: LifConfig, width: float) -> np.ndarray:
    return np.where(np.abs(vp - cfg.theta) < width, 1.0 / (2.0 * width), 0.0)


# -- layer plumbing ---------------------------------------------------------------

def _im2col_indices(cin, hin, win_, kh, kw, stride):
    ho = (hin - kh) // stride + 1
    wo = (win_ - kw) // stride + 1
    c_idx = np.repeat(np.arange(cin), kh * kw)
    di = np.tile(np.repeat(np.arange(kh), kw), cin)
    dj = np.tile(np.arange(kw), cin * kh)
    base = (c_idx * hin + di) * win_ + dj                 # (cin*kh*kw,)
    oi = np.repeat(np.arange(ho) * stride, wo)
    oj = np.tile(np.arange(wo) * stride, ho)
    offset = oi * win_ + oj                               # (ho*wo,)
    return offset[:, None] + base[None, :], (ho, wo)      # (P, K)


class _Plan:
    """Per-layer shapes, parameter names, and cached gather indices."""

    def __init__(self, arch: SnnArchitecture):
        self.arch = arch
        self.in_shapes: List[tuple] = []
        self.out_shapes = arch.output_shapes()
        self.col_idx: List[Optional[np.ndarray]] = []
        shape = tuple(arch.input_shape)
        for layer in arch.layers:
            self.in_shapes.append(shape)
            if isinstance(layer, Conv):
                idx, _ = _im2col_indices(shape[0], shape[1], shape[2],
                                         layer.kernel, layer.kernel, layer.stride)
                self.col_idx.append(idx)
            else:
                self.col_idx.append(None)
            shape = self.out_shapes[len(self.in_shapes) - 1]


def _layer_forward(plan: _Plan, li: int, x: np.ndarray,
                   params: Dict[str, np.ndarray]) -> np.ndarray:
    layer = plan.arch.layers[li]
    b = x.shape[0]
    if isinstance(layer, Conv):
        idx = plan.col_idx[li]
        cols = x.reshape(b, -1)[:, idx]                         # (B, P, K)
        w2 = params[f"conv{li}.w"].reshape(layer.out_channels, -1)
        out = cols @ w2.T + params[f"conv{li}.b"]               # (B, P, Cout)
        co, h, w = plan.out_shapes[li]
        return out.transpose(0, 2, 1).reshape(b, co, h, w)
    if isinstance(layer, Pool):
        c, h, w = plan.in_shapes[li]
        win = layer.window
        hc, wc = (h // win) * win, (w // win) * win
        blocks = x[:, :, :hc, :wc].reshape(b, c, h // win, win, w // win, win)
        if layer.mode == "sum":
            return blocks.sum(axis=(3, 5))
        return blocks.max(axis=(3, 5))
    flat = x.reshape(b, -1)
    return flat @ params[f"fc{li}.w"].T + params[f"fc{li}.b"]


def _layer_backward(plan: _Plan, li: int, x: np.ndarray, d_out: np.ndarray,
                    params: Dict[str, np.ndarray],
                    grads: Dict[str, np.ndarray],
                    need_d_in: bool) -> Optional[np.ndarray]:
    """Accumulate parameter gradients for layer li and return the gradient
    with respect to its input spikes (None when not needed)."""
    layer = plan.arch.layers[li]
    b = x.shape[0]
    if isinstance(layer, Conv):
        idx = plan.col_idx[li]
        cols = x.reshape(b, -1)[:, idx]
        co = layer.out_channels
        d2 = d_out.reshape(b, co, -1).transpose(0, 2, 1)        # (B, P, Cout)
        grads[f"conv{li}.w"] += np.tensordot(d2, cols, axes=([0, 1], [0, 1])) \
            .reshape(params[f"conv{li}.w"].shape)
        grads[f"conv{li}.b"] += d2.sum(axis=(0, 1))
        if not need_d_in:
            return None
        d_cols = d2 @ params[f"conv{li}.w"].reshape(co, -1)     # (B, P, K)
        n_in = int(np.prod(plan.in_shapes[li]))
        flat_idx = idx.ravel()
        d_in = np.empty((b, n_in))
        for bi in range(b):  # scatter-add overlapping windows back
            d_in[bi] = np.bincount(flat_idx, weights=d_cols[bi].ravel(),
                                   minlength=n_in)
        return d_in.reshape((b,) + plan.in_shapes[li])
    if isinstance(layer, Pool):
        if not need_d_in:
            return None
        c, h, w = plan.in_shapes[li]
        win = layer.window
        nh, nw = h // win, w // win
        d_in = np.zeros((b, c, h, w))
        if layer.mode == "sum":
            d_in[:, :, :nh * win, :nw * win] = np.repeat(
                np.repeat(d_out, win, axis=2), win, axis=3)
        else:
            blocks = x[:, :, :nh * win, :nw * win] \
                .reshape(b, c, nh, win, nw, win).transpose(0, 1, 2, 4, 3, 5) \
                .reshape(b, c, nh, nw, win * win)
            arg = blocks.argmax(axis=-1)
            view = d_in[:, :, :nh * win, :nw * win] \
                .reshape(b, c, nh, win, nw, win).transpose(0, 1, 2, 4, 3, 5) \
                .reshape(b, c, nh, nw, win * win)
            np.put_along_axis(view, arg[..., None], d_out[..., None], axis=-1)
            d_in[:, :, :nh * win, :nw * win] = view \
                .reshape(b, c, nh, nw, win, win).transpose(0, 1, 2, 4, 3, 5) \
                .reshape(b, c, nh * win, nw * win)
        return d_in
    flat = x.reshape(b, -1)
    grads[f"fc{li}.w"] += d_out.T @ flat
    grads[f"fc{li}.b"] += d_out.sum(axis=0)
    if not need_d_in:
        return None
    return (d_out @ params[f"fc{li}.w"]).reshape((b,) + plan.in_shapes[li])


# -- forward / backward ---------------------------------------------------------

@dataclass
class SnnTape:
    """Recorded forward pass: everything the backward pass needs."""

    plan: _Plan
    cfg: LifConfig
    spike_fn: str
    surrogate_width: float
    x: np.ndarray                       # (B, K, C, H, W)
    vpre: List[np.ndarray] = field(default_factory=list)    # per layer (K, B, ...)
    spikes: List[np.ndarray] = field(default_factory=list)
    s_dg: Optional[np.ndarray] = None


def snn_forward(planes: np.ndarray, params: Dict[str, np.ndarray],
                arch: SnnArchitecture, cfg: LifConfig = LifConfig(), *,
                spike_fn: str = "binary",
                surrogate_width: float = DEFAULT_SURROGATE_WIDTH,
                record: bool = False):
    """Run the stack for K steps, feeding plane k at step k.

    planes: conditioned real-valued array, (K, C, H, W) for one sample or
    (B, K, C, H, W) for a batch.  Returns the averaged class-sized output
    (and the tape when record=True); membranes always start at zero.
    """
    _require_params(arch, params)
    x = np.asarray(planes, dtype=np.float64)
    single = x.ndim == 4
    if single:
        x = x[None]
    if x.ndim != 5 or x.shape[2:] != tuple(arch.input_shape):
        raise ShapeMismatchError(
            f"planes shape {x.shape} incompatible with input {arch.input_shape}")
    b, k = x.shape[0], x.shape[1]
    plan = _Plan(arch)
    n_layers = len(arch.layers)
    v = [np.zeros((b,) + shp) for shp in plan.out_shapes]
    tape = SnnTape(plan, cfg, spike_fn, surrogate_width, x) if record else None
    if record:
        tape.vpre = [np.empty((k, b) + shp) for shp in plan.out_shapes]
        tape.spikes = [np.empty((k, b) + shp) for shp in plan.out_shapes]
    out_sum = np.zeros((b, arch.num_classes))
    for t in range(k):
        cur = x[:, t]
        for li in range(n_layers):
            current = _layer_forward(plan, li, cur, params)
            vp = cfg.beta * v[li] + current
            s = _spike(vp, cfg, spike_fn, surrogate_width)
            if cfg.reset == "to_zero":
                v[li] = vp * (1.0 - s)
            else:
                v[li] = vp - cfg.theta * s
            if record:
                tape.vpre[li][t] = vp
                tape.spikes[li][t] = s
            cur = s
        out_sum += cur
    s_dg = out_sum / k
    if record:
        tape.s_dg = s_dg
        return (s_dg[0], tape) if single else (s_dg, tape)
    return s_dg[0] if single else s_dg


def snn_backward_from_output(tape: Optional[SnnTape], d_sdg: np.ndarray,
                             params: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """Backpropagate an arbitrary loss gradient d(loss)/d(s_dg) through the
    recorded K steps; returns gradients for every weighted layer."""
    if tape is None or tape.s_dg is None:
        raise NoRecordedForwardError("snn_backward requires a recorded forward tape")
    plan, cfg = tape.plan, tape.cfg
    width = tape.surrogate_width
    arch = plan.arch
    n_layers = len(arch.layers)
    k, b = tape.spikes[0].shape[0], tape.spikes[0].shape[1]
    d_sdg = np.asarray(d_sdg, dtype=np.float64)
    if d_sdg.ndim == 1:
        d_sdg = d_sdg[None]
    if d_sdg.shape != (b, arch.num_classes):
        raise ShapeMismatchError(f"d_sdg shape {d_sdg.shape} != ({b},{arch.num_classes})")
    grads = {name: np.zeros_like(params[name]) for name in arch.param_names()}
    dv_carry = [np.zeros((b,) + shp) for shp in plan.out_shapes]
    for t in reversed(range(k)):
        d_s = d_sdg / k
        for li in reversed(range(n_layers)):
            vp = tape.vpre[li][t]
            s = tape.spikes[li][t]
            fp = _surrogate_deriv(vp, cfg, width)
            if cfg.reset == "to_zero":
                # d(v'*(1-s))/dv' with s = f(v'), product rule
                g_v = (1.0 - s) - vp * fp
            else:
                g_v = 1.0 - cfg.theta * fp
            dvp = d_s * fp + dv_carry[li] * g_v
            dv_carry[li] = cfg.beta * dvp
            x_in = tape.spikes[li - 1][t] if li > 0 else tape.x[:, t]
            d_s = _layer_backward(plan, li, x_in, dvp, params, grads,
                                  need_d_in=li > 0)
    return grads


def snn_backward(tape: Optional[SnnTape], targets: np.ndarray,
                 params: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """Gradients of the mean-over-batch MSE spike loss against one-hot
    targets.  targets: int class labels (B,) or one-hot (B, C)."""
    if tape is None or tape.s_dg is None:
        raise NoRecordedForwardError("snn_backward requires a recorded forward tape")
    s_dg = tape.s_dg
    b, c = s_dg.shape
    t = np.asarray(targets)
    if t.ndim == 1 and t.shape[0] == b and not np.issubdtype(t.dtype, np.floating):
        onehot = np.zeros((b, c))
        onehot[np.arange(b), t.astype(int)] = 1.0
    else:
        onehot = t.reshape(b, c).astype(np.float64)
    d_sdg = 2.0 * (s_dg - onehot) / (b * c)
    return snn_backward_from_output(tape, d_sdg, params)
