import os

import numpy as np
import pytest

from gestemo.dataio import (
    FrameFeatureSequence,
    ManifestEntry,
    SplitManifest,
    load_sample,
    read_events_file,
    read_feature_file,
    read_manifest,
    split_partition_ok,
    write_events_file,
    write_feature_file,
    write_manifest,
)
from gestemo.errors import (
    MissingFileError,
    ParseError,
    RaggedRowsError,
    UnknownIdError,
    UnknownLabelError,
)
from gestemo.events import DAVIS346, EmotionClass, GestureClass, StreamSpec, synth_stream


def test_events_file_roundtrip_empty(tmp_path):
    s = synth_stream(StreamSpec(DAVIS346, 1000, 0), seed=0)
    p = tmp_path / "e.csv"
    write_events_file(s, p)
    assert read_events_file(p) == s


def test_events_file_roundtrip_random(tmp_path):
    s = synth_stream(StreamSpec(DAVIS346, 500000, 1000), seed=4)
    p = tmp_path / "e.csv"
    write_events_file(s, p)
    back = read_events_file(p)
    assert back == s
    assert back.geometry == DAVIS346


def test_events_file_explicit_rows(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("t,x,y,p geometry=346x260\n0,1,2,1\n3,4,5,0\n")
    s = read_events_file(p)
    assert len(s) == 2
    assert list(s.t) == [0, 3]
    assert list(s.x) == [1, 4]
    assert list(s.p) == [1, 0]


def test_events_file_bad_cell(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("t,x,y,p geometry=346x260\n5,abc,2,1\n")
    with pytest.raises(ParseError) as ei:
        read_events_file(p)
    assert ei.value.line == 2


def test_events_file_bad_header(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("time,x,y,p\n")
    with pytest.raises(ParseError):
        read_events_file(p)


def test_feature_file_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    seq = FrameFeatureSequence(5, rng.normal(size=(7, 5)))
    p = tmp_path / "f.txt"
    write_feature_file(seq, p)
    back = read_feature_file(p)
    assert back.dim == 5
    assert np.array_equal(back.vectors, seq.vectors)  # exact, not approx


def test_feature_file_header_and_shape(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("D=3\n1 0 0\n0 1 0\n")
    seq = read_feature_file(p)
    assert seq.dim == 3
    assert len(seq) == 2


def test_feature_file_single_row_ok(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("D=2\n0.5 -1.5\n")
    assert len(read_feature_file(p)) == 1


def test_feature_file_ragged(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("D=3\n1 0 0\n0 1\n")
    with pytest.raises(RaggedRowsError):
        read_feature_file(p)


def test_normalized_front_and_back_padding():
    seq = FrameFeatureSequence(2, np.ones((3, 2)))
    front = seq.normalized(5)
    assert front.shape == (5, 2)
    assert np.array_equal(front[:2], np.zeros((2, 2)))
    assert np.array_equal(front[2:], np.ones((3, 2)))
    back = seq.normalized(5, pad="back")
    assert np.array_equal(back[:3], np.ones((3, 2)))
    assert np.array_equal(back[3:], np.zeros((2, 2)))


def test_normalized_truncates():
    seq = FrameFeatureSequence(1, np.arange(8, dtype=float)[:, None])
    out = seq.normalized(4)
    assert out.shape == (4, 1)
    assert list(out[:, 0]) == [0.0, 1.0, 2.0, 3.0]


def _make_dataset(tmp_path, gesture=GestureClass.OK, with_features=True):
    stream = synth_stream(StreamSpec(DAVIS346, 10000, 20), seed=1)
    os.makedirs(tmp_path / "events", exist_ok=True)
    write_events_file(stream, tmp_path / "events" / "a.csv")
    feat_rel = None
    if with_features:
        os.makedirs(tmp_path / "features", exist_ok=True)
        write_feature_file(FrameFeatureSequence(2, np.zeros((4, 2))),
                           tmp_path / "features" / "a.txt")
        feat_rel = "features/a.txt"
    m = SplitManifest(root=str(tmp_path), entries=[
        ManifestEntry("a", gesture, "events/a.csv", "train", feat_rel)])
    write_manifest(m, tmp_path / "manifest.json")
    return m


def test_manifest_roundtrip_and_load_sample(tmp_path):
    _make_dataset(tmp_path)
    m = read_manifest(tmp_path / "manifest.json")
    assert m.ids() == ["a"]
    rec = load_sample(m, "a")
    assert rec.gesture is GestureClass.OK
    assert rec.emotion is EmotionClass.NEUTRAL
    assert len(rec.events) == 20
    assert rec.features is not None and rec.features.dim == 2


def test_manifest_unknown_id(tmp_path):
    m = _make_dataset(tmp_path)
    with pytest.raises(UnknownIdError):
        m.entry("nope")


def test_manifest_missing_file(tmp_path):
    _make_dataset(tmp_path)
    os.remove(tmp_path / "events" / "a.csv")
    with pytest.raises(MissingFileError):
        read_manifest(tmp_path / "manifest.json")


def test_manifest_unknown_label(tmp_path):
    _make_dataset(tmp_path)
    doc = (tmp_path / "manifest.json").read_text()
    (tmp_path / "manifest.json").write_text(doc.replace('"ok"', '"wave"'))
    with pytest.raises(UnknownLabelError):
        read_manifest(tmp_path / "manifest.json")


def test_manifest_duplicate_id_rejected(tmp_path):
    e = ManifestEntry("a", GestureClass.OK, "events/a.csv", "train")
    with pytest.raises(ParseError):
        SplitManifest(root=str(tmp_path), entries=[e, e])


def test_split_partition(tmp_path):
    m = _make_dataset(tmp_path)
    assert split_partition_ok(m)
