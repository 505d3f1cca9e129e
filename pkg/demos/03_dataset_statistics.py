"""Build a small synthetic corpus and summarize it.

Run: python3 demos/03_dataset_statistics.py
"""

import tempfile

from gestemo.events import Geometry, GestureClass
from gestemo.stats import dataset_stats
from gestemo.synth import DatasetSpec, build_dataset

spec = DatasetSpec(
    gestures=(GestureClass.OK, GestureClass.NO, GestureClass.VICTORY,
              GestureClass.LOVE),
    per_class=6,
    geometry=Geometry(64, 48),
    duration_us=400_000,
    min_events=200, max_events=400,
    min_frames=20, max_frames=60,
    feature_dim=8,
)

with tempfile.TemporaryDirectory() as root:
    manifest = build_dataset(root, spec, seed=11)
    print(f"built {len(manifest.entries)} samples "
          f"({len(manifest.ids('train'))} train, {len(manifest.ids('test'))} test)")

    doc = dataset_stats(manifest, bin_width=25)

    print("\nclass counts (zeros kept so gaps are visible):")
    for name, count in doc["class_counts"].items():
        print(f"  {name:<10s} {count}")

    print("\nrecorded seconds per class:")
    for name, secs in doc["event_time_sum_s"].items():
        if secs:
            print(f"  {name:<10s} {secs:.2f}s")

    print("\nframe-count histogram:")
    hist = doc["frame_histogram"]
    for lo, hi, c in zip(hist["bin_edges"], hist["bin_edges"][1:], hist["counts"]):
        print(f"  [{lo:>3d},{hi:>3d}) {'#' * c}")

    print("\npositive-event box summary per class:")
    for name, box in doc["polarity_boxes"].items():
        p = box["positive"]
        print(f"  {name:<10s} min {p['min']:.0f}  q1 {p['q1']:.0f}  "
              f"median {p['median']:.0f}  q3 {p['q3']:.0f}  max {p['max']:.0f}")
