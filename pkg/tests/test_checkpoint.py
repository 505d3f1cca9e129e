import json

import numpy as np
import pytest

from gestemo.checkpoint import (
    FORMAT_TAG,
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from gestemo.errors import ParseError
from gestemo.fusion import FusionConfig
from gestemo.snn import Conv, Dense, LifConfig, Pool, SnnArchitecture
from gestemo.training import init_model

ARCH = SnnArchitecture(
    layers=(Conv(2, 4, 3), Pool(2), Dense(36, 3)),
    input_shape=(2, 8, 8),
    num_classes=3,
)


def make_checkpoint(branch="fused", seed=4):
    model = init_model(ARCH, feature_dim=5, hidden=6, head_mid=4, seed=seed,
                       branch=branch)
    return Checkpoint(
        model=model,
        arch=ARCH,
        lif=LifConfig(beta=0.85, theta=1.1, reset="subtract_theta"),
        fusion=FusionConfig(lam=0.75),
        seed=seed,
        label_space=("Neutral", "Negative", "Positive"),
        extra={"note": "round trip", "k": 12},
    )


def test_round_trip_preserves_everything(tmp_path):
    ckpt = make_checkpoint()
    path = tmp_path / "model.ckpt"
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path)
    assert back.arch == ckpt.arch
    assert back.lif == ckpt.lif
    assert back.fusion == ckpt.fusion
    assert back.seed == 4
    assert back.label_space == ckpt.label_space
    assert back.extra == ckpt.extra
    a, b = ckpt.model.flat(), back.model.flat()
    assert sorted(a) == sorted(b)
    for name in a:
        assert np.array_equal(a[name], b[name])
        assert b[name].dtype == np.float64


def test_save_load_save_bit_identical(tmp_path):
    ckpt = make_checkpoint()
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(ckpt, p1)
    save_checkpoint(load_checkpoint(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


@pytest.mark.parametrize("branch", ["snn_only", "video_only"])
def test_single_branch_checkpoints(tmp_path, branch):
    ckpt = make_checkpoint(branch=branch)
    path = tmp_path / "model.ckpt"
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path)
    if branch == "snn_only":
        assert back.model.snn is not None
        assert back.model.lstm is None and back.model.head is None
    else:
        assert back.model.snn is None
        assert back.model.lstm is not None and back.model.head is not None
    a, b = ckpt.model.flat(), back.model.flat()
    for name in a:
        assert np.array_equal(a[name], b[name])


def test_header_is_single_json_line(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(make_checkpoint(), path)
    header_line = path.read_bytes().split(b"\n", 1)[0]
    header = json.loads(header_line)
    assert header["format"] == FORMAT_TAG
    assert [t["name"] for t in header["tensors"]] == \
        sorted(t["name"] for t in header["tensors"])


def test_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b'{"format":"something.else","version":1}\n')
    with pytest.raises(ParseError):
        load_checkpoint(path)


def test_rejects_wrong_version(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(
        b'{"format":"gestemo.ckpt","version":99,"tensors":[]}\n')
    with pytest.raises(ParseError):
        load_checkpoint(path)


def test_rejects_truncated_blob(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(make_checkpoint(), path)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(ParseError):
        load_checkpoint(path)


def test_rejects_missing_header_newline(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b'{"format":"gestemo.ckpt"}')
    with pytest.raises(ParseError):
        load_checkpoint(path)


def test_rejects_non_json_header(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"not json at all\nrest")
    with pytest.raises(ParseError):
        load_checkpoint(path)
