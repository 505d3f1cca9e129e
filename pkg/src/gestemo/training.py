"""Training and evaluation for the two-branch recognizer.

The fused objective combines a spike-rate regression on the event branch
with a class-weighted cross entropy on the fused scores:

    loss = mse_spike(s_dg, onehot) + wce(s_dg + lam * branch_logits, y)

Class weights are inverse-frequency, w_c = T / (C * n_c), so rare classes
pull harder.  Single-branch modes train on their own term only, and
mode="separate" trains the two branches independently and fuses them only
at evaluation time.  All randomness (shuffling, dropout) flows from one
seeded generator, so runs are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .encode import dense_spike_planes, downsample_planes, scale_planes
from .errors import (
    DimMismatchError,
    DivergedLossError,
    EmptyClassError,
    EmptySplitError,
    ShapeMismatchError,
)
from .events import LABELED_GESTURES, EmotionClass, GestureClass, SampleRecord, emotion_of
from .fusion import (
    FusionConfig,
    HeadParams,
    RecurrentParams,
    fuse,
    head_backward,
    head_forward,
    init_head_params,
    init_recurrent_params,
    predict,
    recurrent_backward,
    recurrent_forward,
)
from .snn import (
    LifConfig,
    SnnArchitecture,
    init_params,
    snn_backward_from_output,
    snn_forward,
)

BRANCHES = ("snn_only", "video_only", "fused")
MODES = ("joint", "separate")


# -- losses and weights ----------------------------------------------------------

def class_weights(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """Inverse-frequency weights w_c = T / (C * n_c); mean weight is >= 1
    with equality iff the classes are balanced."""
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels, minlength=num_classes)
    if counts.size > num_classes:
        raise EmptyClassError(f"label outside [0,{num_classes}) present")
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise EmptyClassError(f"class {int(missing[0])} has no samples")
    return labels.size / (num_classes * counts.astype(np.float64))


def _onehot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def weighted_cross_entropy(logits: np.ndarray, labels: np.ndarray,
                           weights: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean over the batch of -w[y] * log softmax(logits)[y].

    Returns (loss, d_loss/d_logits).  Log-sum-exp uses max subtraction, so
    large scores cannot overflow.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 1:
        z = z[None]
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if z.shape[0] != labels.size:
        raise DimMismatchError(f"{z.shape[0]} score rows vs {labels.size} labels")
    b = z.shape[0]
    zs = z - z.max(axis=1, keepdims=True)
    logp = zs - np.log(np.exp(zs).sum(axis=1, keepdims=True))
    w = np.asarray(weights, dtype=np.float64)[labels]
    loss = float(-(w * logp[np.arange(b), labels]).mean())
    grad = np.exp(logp) * w[:, None]
    grad[np.arange(b), labels] -= w
    return loss, grad / b


def mse_spike_loss(s_dg: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean over the batch of (1/C) * sum_c (s_c - onehot_c)^2.

    Returns (loss, d_loss/d_s_dg).
    """
    s = np.asarray(s_dg, dtype=np.float64)
    if s.ndim == 1:
        s = s[None]
    b, c = s.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size != b:
        raise DimMismatchError(f"{b} score rows vs {labels.size} labels")
    diff = s - _onehot(labels, c)
    loss = float((diff * diff).sum() / (b * c))
    return loss, 2.0 * diff / (b * c)


# -- Adam --------------------------------------------------------------------------

@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_update(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
                state: AdamState, cfg: AdamConfig = AdamConfig()) -> None:
    """One bias-corrected Adam step, in place; eps sits outside the sqrt,
    so a first step on unit gradient moves by lr / (1 + eps)."""
    state.step += 1
    t = state.step
    c1 = 1.0 - cfg.beta1 ** t
    c2 = 1.0 - cfg.beta2 ** t
    for name, g in grads.items():
        p = params[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        p -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


# -- model bundle ------------------------------------------------------------------

@dataclass
class ModelParams:
    """All trainable tensors; the flat view shares memory with the branch
    views, so in-place updates reach both."""

    snn: Optional[Dict[str, np.ndarray]] = None
    lstm: Optional[RecurrentParams] = None
    head: Optional[HeadParams] = None

    def flat(self) -> Dict[str, np.ndarray]:
        out: Dict[str, np.ndarray] = {}
        if self.snn is not None:
            out.update(self.snn)
        if self.lstm is not None:
            out.update(self.lstm.as_dict())
        if self.head is not None:
            out.update(self.head.as_dict())
        return out


def init_model(arch: SnnArchitecture, feature_dim: int, *, hidden: int = 128,
               head_mid: int = 64, seed: int = 0,
               branch: str = "fused") -> ModelParams:
    """Seeded init of whichever branches the mode requires."""
    if branch not in BRANCHES:
        raise DimMismatchError(f"unknown branch {branch!r}")
    ss = np.random.SeedSequence(seed).spawn(3)
    seeds = [int(s.generate_state(1)[0]) for s in ss]
    model = ModelParams()
    if branch != "video_only":
        model.snn = init_params(arch, seeds[0])
    if branch != "snn_only":
        model.lstm = init_recurrent_params(feature_dim, hidden, seeds[1])
        model.head = init_head_params(hidden, head_mid, arch.num_classes, seeds[2])
    return model


# -- dataset tensors ---------------------------------------------------------------

@dataclass
class TrainData:
    """Stacked per-sample tensors ready for the training loop.

    label_space lists the classes in index order; entries are GestureClass
    for the 9-way gesture target or EmotionClass for the default 3-way
    emotion target.
    """

    planes: Optional[np.ndarray]      # (N, K, 2, H, W) float64 or None
    features: Optional[np.ndarray]    # (N, T, D) float64 or None
    labels: np.ndarray                # (N,) int64 indices into label_space
    label_space: Tuple = LABELED_GESTURES

    def __post_init__(self):
        n = self.labels.shape[0]
        if self.planes is not None and self.planes.shape[0] != n:
            raise DimMismatchError(f"{self.planes.shape[0]} plane stacks vs {n} labels")
        if self.features is not None and self.features.shape[0] != n:
            raise DimMismatchError(f"{self.features.shape[0]} feature stacks vs {n} labels")
        if self.planes is None and self.features is None:
            raise DimMismatchError("need planes or features")

    def __len__(self) -> int:
        return int(self.labels.shape[0])


def prepare_tensors(samples: Sequence[SampleRecord], k: int, *,
                    downsample: int = 1, scale_mode: str = "clip01",
                    frame_limit: int = 100, target: str = "gesture",
                    label_space: Optional[Sequence] = None,
                    with_planes: bool = True,
                    with_features: bool = True) -> TrainData:
    """Encode every sample to fixed-shape tensors.

    target selects the class set: "gesture" labels by gesture (label_space
    defaults to the nine named gestures), "emotion" collapses each gesture
    to its emotion (3 classes).  Samples outside the label space — notably
    the catch-all gesture class — are skipped.
    """
    if target not in ("gesture", "emotion"):
        raise DimMismatchError(f"unknown target {target!r}")
    if label_space is None:
        label_space = (LABELED_GESTURES if target == "gesture"
                       else tuple(EmotionClass))
    label_space = tuple(label_space)
    index = {g: i for i, g in enumerate(label_space)}
    planes_list: List[np.ndarray] = []
    feats_list: List[np.ndarray] = []
    labels: List[int] = []
    for s in samples:
        key = s.gesture if target == "gesture" else emotion_of(s.gesture)
        if key not in index:
            continue
        labels.append(index[key])
        if with_planes:
            p = dense_spike_planes(s.events, k)
            if downsample > 1:
                p = downsample_planes(p, downsample)
            planes_list.append(scale_planes(p, scale_mode))
        if with_features:
            if s.features is None:
                raise DimMismatchError(f"sample {s.id}: no frame features")
            feats_list.append(s.features.normalized(frame_limit))
    if not labels:
        raise EmptySplitError("no samples with labels in the requested space")
    planes = None
    feats = None
    if with_planes:
        shapes = {p.shape for p in planes_list}
        if len(shapes) > 1:
            raise ShapeMismatchError(f"inconsistent plane shapes: {sorted(shapes)}")
        planes = np.stack(planes_list)
    if with_features:
        dims = {f.shape for f in feats_list}
        if len(dims) > 1:
            raise DimMismatchError(f"inconsistent feature shapes: {sorted(dims)}")
        feats = np.stack(feats_list)
    return TrainData(planes, feats, np.asarray(labels, dtype=np.int64), label_space)


# -- training loop -----------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    lr: float = 1e-3
    seed: int = 0
    branch: str = "fused"
    mode: str = "joint"
    lam: float = 1.0
    batch_size: int = 0          # 0 means full batch
    dropout: float = 0.5
    surrogate_width: float = 0.5
    diverge_limit: float = 1e6

    def __post_init__(self):
        if self.branch not in BRANCHES:
            raise DimMismatchError(f"unknown branch {self.branch!r}")
        if self.mode not in MODES:
            raise DimMismatchError(f"unknown mode {self.mode!r}")
        if self.epochs < 0:
            raise DimMismatchError("epochs must be >= 0")


def _check_loss(loss: float, epoch: int, limit: float) -> None:
    if not np.isfinite(loss) or abs(loss) > limit:
        raise DivergedLossError(f"loss {loss} at epoch {epoch} is out of bounds")


def _train_joint(data: TrainData, model: ModelParams, arch: SnnArchitecture,
                 lif_cfg: LifConfig, cfg: TrainConfig,
                 log: Optional[List[str]]) -> List[dict]:
    use_snn = cfg.branch != "video_only"
    use_video = cfg.branch != "snn_only"
    if use_snn and (data.planes is None or model.snn is None):
        raise DimMismatchError("event branch requested without planes or params")
    if use_video and (data.features is None or model.lstm is None):
        raise DimMismatchError("frame branch requested without features or params")
    n = len(data)
    weights = class_weights(data.labels, arch.num_classes)
    fusion_cfg = FusionConfig(cfg.lam)
    params = model.flat()
    state = AdamState()
    adam_cfg = AdamConfig(lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    batch = n if cfg.batch_size <= 0 else min(cfg.batch_size, n)
    history: List[dict] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        ep_loss = 0.0
        ep_mse = 0.0
        ep_wce = 0.0
        seen = 0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            y = data.labels[idx]
            grads: Dict[str, np.ndarray] = {}
            loss_mse = 0.0
            loss_wce = 0.0
            s_dg = tape = None
            logits = rtape = htape = None
            if use_snn:
                s_dg, tape = snn_forward(
                    data.planes[idx], model.snn, arch, lif_cfg,
                    surrogate_width=cfg.surrogate_width, record=True)
            if use_video:
                h, rtape = recurrent_forward(data.features[idx], model.lstm,
                                             record=True)
                logits, htape = head_forward(h, model.head, train=True, rng=rng,
                                             dropout=cfg.dropout, record=True)
            if cfg.branch == "snn_only":
                loss_mse, d_sdg = mse_spike_loss(s_dg, y)
                d_logits = None
            elif cfg.branch == "video_only":
                loss_wce, d_logits = weighted_cross_entropy(logits, y, weights)
                d_sdg = None
            else:
                y_hat = fuse(s_dg, logits, fusion_cfg)
                loss_mse, d_sdg = mse_spike_loss(s_dg, y)
                loss_wce, d_fused = weighted_cross_entropy(y_hat, y, weights)
                d_sdg = d_sdg + d_fused
                d_logits = cfg.lam * d_fused
            if use_snn:
                grads.update(snn_backward_from_output(tape, d_sdg, model.snn))
            if use_video:
                hg, d_h = head_backward(htape, d_logits, model.head)
                rg, _ = recurrent_backward(rtape, d_h, model.lstm)
                grads.update(hg)
                grads.update(rg)
            adam_update(params, grads, state, adam_cfg)
            bsz = idx.size
            ep_loss += (loss_mse + loss_wce) * bsz
            ep_mse += loss_mse * bsz
            ep_wce += loss_wce * bsz
            seen += bsz
        entry = {
            "epoch": epoch,
            "branch": cfg.branch,
            "loss": ep_loss / seen,
            "mse": ep_mse / seen,
            "wce": ep_wce / seen,
        }
        _check_loss(entry["loss"], epoch, cfg.diverge_limit)
        history.append(entry)
        if log is not None:
            log.append(f"epoch {epoch:3d} [{cfg.branch}] loss {entry['loss']:.6f}")
    return history


def train(data: TrainData, model: ModelParams, arch: SnnArchitecture,
          lif_cfg: LifConfig = LifConfig(), cfg: TrainConfig = TrainConfig(),
          log: Optional[List[str]] = None) -> List[dict]:
    """Fit the model in place and return the per-epoch loss history."""
    if len(data) == 0:
        raise EmptySplitError("training split is empty")
    if cfg.branch == "fused" and cfg.mode == "separate":
        children = np.random.SeedSequence(cfg.seed).spawn(2)
        seeds = [int(s.generate_state(1)[0]) for s in children]
        hist = _train_joint(
            data, model, arch, lif_cfg,
            _replace(cfg, branch="snn_only", seed=seeds[0]), log)
        hist += _train_joint(
            data, model, arch, lif_cfg,
            _replace(cfg, branch="video_only", seed=seeds[1]), log)
        return hist
    return _train_joint(data, model, arch, lif_cfg, cfg, log)


def _replace(cfg: TrainConfig, **kw) -> TrainConfig:
    d = {k: getattr(cfg, k) for k in TrainConfig.__dataclass_fields__}
    d.update(kw)
    return TrainConfig(**d)


# -- evaluation and metrics ---------------------------------------------------------

def scores_for(data: TrainData, model: ModelParams, arch: SnnArchitecture,
               lif_cfg: LifConfig = LifConfig(), *, branch: str = "fused",
               lam: float = 1.0) -> np.ndarray:
    """Class scores for every sample, eval mode (no dropout, binary spikes)."""
    if len(data) == 0:
        raise EmptySplitError("evaluation split is empty")
    if branch not in BRANCHES:
        raise DimMismatchError(f"unknown branch {branch!r}")
    s_dg = logits = None
    if branch != "video_only":
        s_dg = snn_forward(data.planes, model.snn, arch, lif_cfg)
    if branch != "snn_only":
        h = recurrent_forward(data.features, model.lstm)
        logits = head_forward(h, model.head, train=False)
    if branch == "snn_only":
        return s_dg
    if branch == "video_only":
        return logits
    return fuse(s_dg, logits, FusionConfig(lam))


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray,
                     num_classes: int) -> np.ndarray:
    """Rows are true classes, columns predicted."""
    t = np.asarray(y_true, dtype=np.int64).reshape(-1)
    p = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if t.size != p.size:
        raise DimMismatchError(f"{t.size} true vs {p.size} predicted")
    if t.size and (t.min() < 0 or t.max() >= num_classes
                   or p.min() < 0 or p.max() >= num_classes):
        raise DimMismatchError(f"labels outside [0,{num_classes})")
    flat = np.bincount(t * num_classes + p, minlength=num_classes * num_classes)
    return flat.reshape(num_classes, num_classes)


@dataclass(frozen=True)
class MetricsReport:
    """Support-weighted precision/recall/F1 over a confusion matrix.

    Weighted recall coincides with accuracy: sum_c (n_c/T) * (TP_c/n_c)
    = (1/T) sum_c TP_c.
    """

    confusion: np.ndarray
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float

    @classmethod
    def from_confusion(cls, cm: np.ndarray) -> "MetricsReport":
        cm = np.asarray(cm, dtype=np.int64)
        if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
            raise DimMismatchError(f"confusion matrix must be square, got {cm.shape}")
        total = cm.sum()
        if total == 0:
            raise EmptySplitError("empty confusion matrix")
        tp = np.diag(cm).astype(np.float64)
        support = cm.sum(axis=1).astype(np.float64)
        predicted = cm.sum(axis=0).astype(np.float64)
        precision = np.divide(tp, predicted, out=np.zeros_like(tp),
                              where=predicted > 0)
        recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
        pr = precision + recall
        f1 = np.divide(2.0 * precision * recall, pr, out=np.zeros_like(tp),
                       where=pr > 0)
        frac = support / total
        return cls(
            confusion=cm,
            accuracy=float(tp.sum() / total),
            precision=precision,
            recall=recall,
            f1=f1,
            support=support.astype(np.int64),
            weighted_precision=float((frac * precision).sum()),
            weighted_recall=float((frac * recall).sum()),
            weighted_f1=float((frac * f1).sum()),
        )

    @classmethod
    def from_predictions(cls, y_true: np.ndarray, y_pred: np.ndarray,
                         num_classes: int) -> "MetricsReport":
        return cls.from_confusion(confusion_matrix(y_true, y_pred, num_classes))

    def to_dict(self, names: Optional[Sequence[str]] = None) -> dict:
        c = self.confusion.shape[0]
        names = list(names) if names is not None else [str(i) for i in range(c)]
        return {
            "accuracy": self.accuracy,
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "weighted_f1": self.weighted_f1,
            "per_class": {
                names[i]: {
                    "precision": float(self.precision[i]),
                    "recall": float(self.recall[i]),
                    "f1": float(self.f1[i]),
                    "support": int(self.support[i]),
                }
                for i in range(c)
            },
            "confusion": self.confusion.tolist(),
        }

    def to_csv_lines(self, names: Optional[Sequence[str]] = None) -> List[str]:
        c = self.confusion.shape[0]
        names = list(names) if names is not None else [str(i) for i in range(c)]
        lines = ["class,precision,recall,f1,support"]
        for i in range(c):
            lines.append(f"{names[i]},{self.precision[i]:.6f},"
                         f"{self.recall[i]:.6f},{self.f1[i]:.6f},"
                         f"{int(self.support[i])}")
        lines.append(f"weighted,{self.weighted_precision:.6f},"
                     f"{self.weighted_recall:.6f},{self.weighted_f1:.6f},"
                     f"{int(self.support.sum())}")
        return lines


def evaluate(data: TrainData, model: ModelParams, arch: SnnArchitecture,
             lif_cfg: LifConfig = LifConfig(), *, branch: str = "fused",
             lam: float = 1.0) -> Tuple[MetricsReport, np.ndarray]:
    """Returns (metrics, scores); predictions are the argmax of scores."""
    scores = scores_for(data, model, arch, lif_cfg, branch=branch, lam=lam)
    preds = predict(scores)
    report = MetricsReport.from_predictions(data.labels, preds, arch.num_classes)
    return report, scores


def emotion_report(data: TrainData, y_pred: np.ndarray) -> Tuple[MetricsReport, Tuple[str, ...]]:
    """Collapse gesture predictions through the gesture-to-emotion map and
    score at emotion level.  Requires gesture-level labels."""
    if not all(isinstance(g, GestureClass) for g in data.label_space):
        raise DimMismatchError("labels are already emotion-level")
    emotions = tuple(e.value for e in EmotionClass)
    idx = {e: i for i, e in enumerate(emotions)}

    def collapse(gesture_ids: np.ndarray) -> np.ndarray:
        out = np.empty(gesture_ids.size, dtype=np.int64)
        for j, g in enumerate(gesture_ids):
            emo = emotion_of(data.label_space[int(g)])
            if emo is None:
                raise DimMismatchError("unlabeled gesture in emotion scoring")
            out[j] = idx[emo.value]
        return out

    report = MetricsReport.from_predictions(
        collapse(data.labels), collapse(np.asarray(y_pred)), len(emotions))
    return report, emotions
