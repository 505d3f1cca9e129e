"""Command-line entry point.

Subcommands: synth, align, encode, stats, train, eval, import.  Exit codes:
0 success, 1 usage error, 2 data error, 3 numeric divergence.  Training
options can come from a JSON config file (--config); explicit flags win,
unknown config keys are rejected.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from typing import Dict, List, Optional

import numpy as np

from .align import segment_events, split_indices
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .dataio import (
    ManifestEntry,
    SplitManifest,
    load_sample,
    read_events_file,
    read_feature_file,
    read_manifest,
    write_events_file,
    write_manifest,
)
from .encode import (
    DenseSpikePlanes,
    dense_spike_planes,
    downsample_planes,
    write_planes_file,
)
from .errors import DataError, DivergedLossError, GestemoError
from .events import DAVIS346, EmotionClass, Geometry, GestureClass
from .fusion import FusionConfig, predict
from .snn import LifConfig, default_architecture
from .stats import (
    class_counts,
    class_counts_csv,
    event_time_sum,
    frame_histogram_csv,
    frame_length_histogram,
    polarity_box_csv,
    polarity_box_stats,
    time_sum_csv,
)
from .synth import DatasetSpec, build_dataset
from .training import (
    TrainConfig,
    TrainData,
    emotion_report,
    evaluate,
    init_model,
    prepare_tensors,
    train,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting with 2."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


# -- config file merging -----------------------------------------------------------

#: training options a --config file may set (same names as the flags)
TRAIN_DEFAULTS: Dict[str, object] = {
    "k": 12,
    "downsample": 1,
    "scale_mode": "clip01",
    "lam": 1.0,
    "branch": "fused",
    "mode": "joint",
    "epochs": 50,
    "lr": 1e-3,
    "batch_size": 0,
    "dropout": 0.5,
    "surrogate_width": 0.5,
    "hidden": 128,
    "head_mid": 64,
    "frame_limit": 100,
    "seed": 0,
    "threads": 1,
    "split": "train",
    "target": "emotion",
    "lif_beta": 0.9,
    "lif_theta": 1.0,
    "lif_reset": "to_zero",
}


def merge_config(ns: argparse.Namespace, defaults: Dict[str, object]) -> Dict[str, object]:
    """defaults < config file < explicit flags; unknown file keys rejected."""
    merged = dict(defaults)
    if getattr(ns, "config", None):
        try:
            with open(ns.config, "r", encoding="utf-8") as f:
                doc = json.load(f)
        except FileNotFoundError:
            raise _UsageError(f"config file not found: {ns.config}")
        except json.JSONDecodeError as e:
            raise _UsageError(f"config file {ns.config}: invalid JSON ({e})")
        if not isinstance(doc, dict):
            raise _UsageError(f"config file {ns.config}: expected a JSON object")
        unknown = sorted(set(doc) - set(defaults))
        if unknown:
            raise _UsageError(
                f"config file {ns.config}: unknown keys {', '.join(unknown)}")
        for k, v in doc.items():
            merged[k] = type(defaults[k])(v)
    for k in defaults:
        flag = getattr(ns, k, None)
        if flag is not None:
            merged[k] = flag
    return merged


def _set_threads(n: int) -> None:
    """Best-effort BLAS thread cap; harmless no-op when unavailable."""
    if n <= 0:
        return
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=n)
    except ImportError:
        pass


# -- subcommands -------------------------------------------------------------------

def cmd_synth(ns) -> int:
    if ns.gestures:
        try:
            gestures = tuple(GestureClass(g.strip())
                             for g in ns.gestures.split(",") if g.strip())
        except ValueError as e:
            raise _UsageError(f"bad gesture list: {e}")
    else:
        gestures = tuple(GestureClass)
    spec = DatasetSpec(
        gestures=gestures,
        per_class=ns.per_class,
        geometry=Geometry(ns.width, ns.height),
        duration_us=ns.duration_us,
        min_events=ns.min_events,
        max_events=ns.max_events,
        min_frames=ns.min_frames,
        max_frames=ns.max_frames,
        feature_dim=ns.feature_dim,
        train_fraction=ns.train_fraction,
    )
    manifest = build_dataset(ns.out, spec, seed=ns.seed)
    print(f"wrote {len(manifest.entries)} samples "
          f"({len(manifest.ids('train'))} train / {len(manifest.ids('test'))} test) "
          f"under {os.path.abspath(ns.out)}")
    return EXIT_OK


def _read_tags(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as f:
        vals = [line.strip() for line in f if line.strip()]
    try:
        return np.asarray([int(v) for v in vals], dtype=np.int64)
    except ValueError as e:
        raise DataError(f"{path}: tags must be integers ({e})")


def cmd_align(ns) -> int:
    for p in (ns.events, ns.tags):
        if not os.path.isfile(p):
            raise _UsageError(f"no such file: {p}")
    stream = read_events_file(ns.events)
    tags = _read_tags(ns.tags)
    cuts = split_indices(tags, stream.t)
    os.makedirs(ns.out, exist_ok=True)
    with open(os.path.join(ns.out, "positions.csv"), "w", encoding="utf-8") as f:
        f.write("tag,index,time\n")
        for tag, idx in zip(tags, cuts):
            f.write(f"{tag},{idx},{stream.t[idx]}\n")
    segments = segment_events(stream, cuts)
    seg_dir = os.path.join(ns.out, "segments")
    os.makedirs(seg_dir, exist_ok=True)
    for i, seg in enumerate(segments):
        write_events_file(seg, os.path.join(seg_dir, f"{i:03d}.csv"))
    total = sum(len(s) for s in segments)
    print(f"aligned {len(tags)} tags over {len(stream)} events; "
          f"{len(segments)} segments, {total} events total "
          f"(conserved={'yes' if total == len(stream) else 'NO'})")
    return EXIT_OK


def cmd_encode(ns) -> int:
    if ns.scale_mode not in (None, "none", "clip01"):
        raise _UsageError(
            f"scale mode {ns.scale_mode!r} does not produce integer planes; "
            "use none or clip01 for file output")
    stream = read_events_file(ns.events)
    planes = dense_spike_planes(stream, ns.k)
    if ns.downsample and ns.downsample > 1:
        planes = downsample_planes(planes, ns.downsample)
    if ns.scale_mode == "clip01":
        planes = DenseSpikePlanes(planes.k, planes.geometry,
                                  np.minimum(planes.counts, 1))
        note = "conserved=n/a (clipped)"
    else:
        note = "conserved=yes" if planes.total == len(stream) else "conserved=NO"
    write_planes_file(planes, ns.out)
    print(f"encoded {len(stream)} events into K={planes.k} planes "
          f"({planes.geometry.width}x{planes.geometry.height}); "
          f"total count {planes.total}; {note}")
    return EXIT_OK


def cmd_stats(ns) -> int:
    manifest = read_manifest(ns.manifest)
    readable: List[ManifestEntry] = []
    for e in manifest.entries:
        try:
            read_events_file(manifest.path_of(e.events))
            if e.features is not None:
                read_feature_file(manifest.path_of(e.features))
        except (GestemoError, OSError) as exc:
            print(f"warning: skipping sample {e.id!r}: {exc}", file=sys.stderr)
            continue
        readable.append(e)
    if not readable:
        raise DataError("no readable samples in manifest")
    kept = SplitManifest(root=manifest.root, entries=readable)
    os.makedirs(ns.out, exist_ok=True)
    with_features = SplitManifest(
        root=kept.root, entries=[e for e in kept.entries if e.features])
    if with_features.entries:
        hist = frame_length_histogram(with_features, ns.bin_width)
    else:
        print("warning: no feature files; frame histogram empty", file=sys.stderr)
        hist = {"bin_edges": [], "counts": []}
    counts = class_counts(kept)
    sums = event_time_sum(kept)
    boxes = polarity_box_stats(kept)
    doc = {
        "n_samples": len(kept.entries),
        "frame_histogram": hist,
        "class_counts": counts,
        "event_time_sum_s": sums,
        "polarity_boxes": {k: v.to_dict() for k, v in boxes.items()},
    }
    def emit(name: str, lines: List[str]) -> None:
        with open(os.path.join(ns.out, name), "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
    with open(os.path.join(ns.out, "stats.json"), "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    emit("frame_hist.csv", frame_histogram_csv(hist))
    emit("class_counts.csv", class_counts_csv(counts))
    emit("time_sum.csv", time_sum_csv(sums))
    emit("polarity_box.csv", polarity_box_csv(boxes))
    print(f"wrote stats for {len(kept.entries)} samples to {os.path.abspath(ns.out)}")
    return EXIT_OK


def _label_space(manifest: SplitManifest, target: str):
    """Classes in index order: present gestures for the 9-way target, the
    three emotions for the default emotion target."""
    if target == "emotion":
        return tuple(EmotionClass)
    present = {e.gesture for e in manifest.entries}
    return tuple(g for g in GestureClass
                 if g in present and g is not GestureClass.OTHER)


def _load_split(manifest: SplitManifest, split: str, cfg: Dict[str, object],
                target: str, label_space) -> TrainData:
    samples = [load_sample(manifest, sid) for sid in manifest.ids(split)]
    return prepare_tensors(
        samples, int(cfg["k"]), downsample=int(cfg["downsample"]),
        scale_mode=str(cfg["scale_mode"]), frame_limit=int(cfg["frame_limit"]),
        target=target, label_space=label_space)


def cmd_train(ns) -> int:
    cfg = merge_config(ns, TRAIN_DEFAULTS)
    _set_threads(int(cfg["threads"]))
    manifest = read_manifest(ns.manifest)
    target = str(cfg["target"])
    if target not in ("emotion", "gesture"):
        raise _UsageError(f"target must be emotion or gesture, not {target!r}")
    label_space = _label_space(manifest, target)
    if not label_space:
        raise DataError("manifest has no trainable gesture classes")
    data = _load_split(manifest, str(cfg["split"]), cfg, target, label_space)
    k, _, h, w = data.planes.shape[1:]
    arch = default_architecture(len(label_space), h, w)
    lif = LifConfig(beta=float(cfg["lif_beta"]), theta=float(cfg["lif_theta"]),
                    reset=str(cfg["lif_reset"]))
    model = init_model(arch, data.features.shape[2],
                       hidden=int(cfg["hidden"]), head_mid=int(cfg["head_mid"]),
                       seed=int(cfg["seed"]), branch=str(cfg["branch"]))
    tcfg = TrainConfig(
        epochs=int(cfg["epochs"]), lr=float(cfg["lr"]), seed=int(cfg["seed"]),
        branch=str(cfg["branch"]), mode=str(cfg["mode"]), lam=float(cfg["lam"]),
        batch_size=int(cfg["batch_size"]), dropout=float(cfg["dropout"]),
        surrogate_width=float(cfg["surrogate_width"]))
    log: List[str] = []
    history = train(data, model, arch, lif, tcfg, log)
    for line in log:
        print(line)
    ckpt = Checkpoint(
        model=model, arch=arch, lif=lif, fusion=FusionConfig(float(cfg["lam"])),
        seed=int(cfg["seed"]),
        label_space=tuple(g.value for g in label_space),
        extra={"branch": str(cfg["branch"]), "mode": str(cfg["mode"]),
               "target": target,
               "k": int(cfg["k"]), "downsample": int(cfg["downsample"]),
               "scale_mode": str(cfg["scale_mode"]),
               "frame_limit": int(cfg["frame_limit"]),
               "final_loss": history[-1]["loss"] if history else None,
               "epochs": int(cfg["epochs"])})
    save_checkpoint(ckpt, ns.out)
    print(f"saved checkpoint to {ns.out} "
          f"({len(data)} samples, {len(label_space)} classes, "
          f"branch={cfg['branch']})")
    return EXIT_OK


def cmd_eval(ns) -> int:
    ckpt = load_checkpoint(ns.checkpoint)
    manifest = read_manifest(ns.manifest)
    target = ckpt.extra.get("target", "emotion")
    if target == "gesture":
        label_space = tuple(GestureClass(v) for v in ckpt.label_space)
    else:
        label_space = tuple(EmotionClass(v) for v in ckpt.label_space)
    cfg = {
        "k": ckpt.extra.get("k", 12),
        "downsample": ckpt.extra.get("downsample", 1),
        "scale_mode": ckpt.extra.get("scale_mode", "clip01"),
        "frame_limit": ckpt.extra.get("frame_limit", 100),
    }
    data = _load_split(manifest, ns.split, cfg, target, label_space)
    branch = ns.branch or ckpt.extra.get("branch", "fused")
    lam = ns.lam if ns.lam is not None else ckpt.fusion.lam
    report, scores = evaluate(data, ckpt.model, ckpt.arch, ckpt.lif,
                              branch=branch, lam=lam)
    names = [g.value for g in label_space]
    doc = report.to_dict(names)
    doc["target"] = target
    doc["branch"] = branch
    doc["split"] = ns.split
    lines = [
        f"split={ns.split} target={target} branch={branch} n={len(data)}",
        f"accuracy           {report.accuracy:.4f}",
        f"weighted precision {report.weighted_precision:.4f}",
        f"weighted recall    {report.weighted_recall:.4f}",
        f"weighted f1        {report.weighted_f1:.4f}",
    ]
    if target == "gesture":
        emo, emo_names = emotion_report(data, predict(scores))
        doc["emotion"] = emo.to_dict(emo_names)
        lines.append(f"emotion accuracy   {emo.accuracy:.4f}")
    if ns.out:
        with open(ns.out, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
    print("\n".join(lines))
    return EXIT_OK


def _import_converted(src: str, out: str) -> SplitManifest:
    manifest = read_manifest(os.path.join(src, "manifest.json"))
    os.makedirs(out, exist_ok=True)
    entries = []
    for e in manifest.entries:
        for rel in (e.events, e.features):
            if rel is None:
                continue
            dst = os.path.join(out, rel)
            os.makedirs(os.path.dirname(dst), exist_ok=True)
            src_path = manifest.path_of(rel)
            if os.path.abspath(src_path) != os.path.abspath(dst):
                shutil.copyfile(src_path, dst)
        entries.append(e)
    result = SplitManifest(root=os.path.abspath(out), entries=entries)
    write_manifest(result, os.path.join(out, "manifest.json"))
    return result


def _import_class_dirs(src: str, out: str, train_fraction: float) -> SplitManifest:
    found = [g for g in GestureClass
             if os.path.isdir(os.path.join(src, g.value))]
    if not found:
        raise DataError(
            f"{src}: unrecognized layout; expected either a manifest.json or "
            f"per-gesture subdirectories named "
            f"{', '.join(g.value for g in GestureClass)} containing event csv files")
    os.makedirs(os.path.join(out, "events"), exist_ok=True)
    entries = []
    any_features = False
    for g in found:
        gdir = os.path.join(src, g.value)
        csvs = sorted(f for f in os.listdir(gdir) if f.endswith(".csv"))
        if not csvs:
            print(f"warning: {gdir} has no event csv files", file=sys.stderr)
            continue
        n_train = min(max(int(round(train_fraction * len(csvs))), 1), len(csvs))
        for i, name in enumerate(csvs):
            stream = read_events_file(os.path.join(gdir, name))
            sid = f"{g.value}-{i:04d}"
            ev_rel = os.path.join("events", f"{sid}.csv")
            write_events_file(stream, os.path.join(out, ev_rel))
            ft_rel = None
            ft_src = os.path.join(gdir, os.path.splitext(name)[0] + ".txt")
            if os.path.isfile(ft_src):
                read_feature_file(ft_src)  # validate before adopting
                ft_rel = os.path.join("features", f"{sid}.txt")
                os.makedirs(os.path.join(out, "features"), exist_ok=True)
                shutil.copyfile(ft_src, os.path.join(out, ft_rel))
                any_features = True
            entries.append(ManifestEntry(
                id=sid, gesture=g, events=ev_rel,
                split="train" if i < n_train else "test", features=ft_rel))
    if not entries:
        raise DataError(f"{src}: no event files found in any gesture directory")
    if not any_features:
        print("note: no feature files found; frame branch will be unavailable",
              file=sys.stderr)
    manifest = SplitManifest(root=os.path.abspath(out), entries=entries)
    write_manifest(manifest, os.path.join(out, "manifest.json"))
    return manifest


def cmd_import(ns) -> int:
    if not os.path.isdir(ns.src):
        raise _UsageError(f"no such directory: {ns.src}")
    if os.path.isfile(os.path.join(ns.src, "manifest.json")):
        manifest = _import_converted(ns.src, ns.out)
        kind = "converted tree"
    else:
        manifest = _import_class_dirs(ns.src, ns.out, ns.train_fraction)
        kind = "per-gesture directories"
    print(f"imported {len(manifest.entries)} samples from {kind} "
          f"into {os.path.abspath(ns.out)}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="gestemo",
                     description="event-based gesture and emotion pipeline")
    sub = parser.add_subparsers(dest="command", metavar="command",
                                parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth",
                       help="generate a labeled synthetic dataset")
    p.add_argument("out", help="output dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--gestures", default="",
                   help="comma-separated gesture names (default: all)")
    p.add_argument("--width", type=int, default=DAVIS346.width)
    p.add_argument("--height", type=int, default=DAVIS346.height)
    p.add_argument("--duration-us", type=int, default=2_000_000)
    p.add_argument("--min-events", type=int, default=800)
    p.add_argument("--max-events", type=int, default=1200)
    p.add_argument("--min-frames", type=int, default=30)
    p.add_argument("--max-frames", type=int, default=90)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--train-fraction", type=float, default=2.0 / 3.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("align",
                       help="find split positions for tag timestamps")
    p.add_argument("events", help="event file")
    p.add_argument("tags", help="text file, one integer timestamp per line")
    p.add_argument("--out", default="align_out", help="output directory")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("encode",
                       help="encode an event file into dense spike planes")
    p.add_argument("events", help="event file")
    p.add_argument("--out", default="planes.txt", help="output planes file")
    p.add_argument("--k", type=int, default=12)
    p.add_argument("--downsample", type=int, default=1)
    p.add_argument("--scale-mode", dest="scale_mode", default=None,
                   help="none or clip01 (counts stay integers in files)")
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("stats",
                       help="dataset statistics (json + csv)")
    p.add_argument("manifest", help="manifest.json path")
    p.add_argument("--out", default="stats_out", help="output directory")
    p.add_argument("--bin-width", type=int, default=100)
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train",
                       help="train the recognizer on a manifest split")
    p.add_argument("manifest", help="manifest.json path")
    p.add_argument("--out", default="model.ckpt", help="checkpoint path")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--downsample", type=int, default=None)
    p.add_argument("--scale-mode", dest="scale_mode", default=None,
                   choices=("none", "clip01", "divide_by_max"))
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--branch", default=None,
                   choices=("snn_only", "video_only", "fused"))
    p.add_argument("--mode", default=None, choices=("joint", "separate"))
    p.add_argument("--target", default=None, choices=("emotion", "gesture"))
    p.add_argument("--split", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--surrogate-width", dest="surrogate_width", type=float,
                   default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--head-mid", dest="head_mid", type=int, default=None)
    p.add_argument("--frame-limit", dest="frame_limit", type=int, default=None)
    p.add_argument("--lif-beta", dest="lif_beta", type=float, default=None)
    p.add_argument("--lif-theta", dest="lif_theta", type=float, default=None)
    p.add_argument("--lif-reset", dest="lif_reset", default=None,
                   choices=("to_zero", "subtract_theta"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval",
                       help="evaluate a checkpoint on a manifest split")
    p.add_argument("checkpoint", help="checkpoint file")
    p.add_argument("manifest", help="manifest.json path")
    p.add_argument("--split", default="test")
    p.add_argument("--branch", default=None,
                   choices=("snn_only", "video_only", "fused"))
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--out", default=None, help="write metrics JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("import",
                       help="convert an external dataset tree to this layout")
    p.add_argument("src", help="source dataset root")
    p.add_argument("out", help="destination root")
    p.add_argument("--train-fraction", type=float, default=2.0 / 3.0)
    p.set_defaults(func=cmd_import)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return int(e.code or 0)
    try:
        return int(ns.func(ns) or EXIT_OK)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except DivergedLossError as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (GestemoError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
