import json

import numpy as np
import pytest

from hasqoe.errors import ContainerError
from hasqoe.tensorfile import read_tensors, write_tensors


def test_round_trip_preserves_float32_bits(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {
        "a.weight": rng.standard_normal((3, 2, 4)).astype(np.float32),
        "a.bias": rng.standard_normal(3).astype(np.float32),
        "scalar": np.array(1.5, dtype=np.float32),
    }
    path = tmp_path / "t.bin"
    write_tensors(path, tensors, {"kind": "test", "note": "x"})
    back, meta = read_tensors(path)
    assert meta == {"kind": "test", "note": "x"}
    assert set(back) == set(tensors)
    for name in tensors:
        assert back[name].dtype == np.float32
        assert np.array_equal(
            back[name].view(np.uint32), tensors[name].view(np.uint32)
        ), f"{name} bits differ"


def test_header_is_single_json_line(tmp_path):
    path = tmp_path / "t.bin"
    write_tensors(path, {"x": np.zeros(2, dtype=np.float32)}, {})
    raw = path.read_bytes()
    header = raw[: raw.index(b"\n")].decode("utf-8")
    doc = json.loads(header)
    assert doc["tensors"][0] == {"name": "x", "shape": [2], "offset": 0, "dtype": "f32le"}


def test_read_missing_and_corrupt(tmp_path):
    with pytest.raises(ContainerError, match="not found"):
        read_tensors(tmp_path / "none.bin")
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"not json\n\x00\x00")
    with pytest.raises(ContainerError, match="malformed header"):
        read_tensors(bad)
    no_newline = tmp_path / "nl.bin"
    no_newline.write_bytes(b"{}")
    with pytest.raises(ContainerError, match="header"):
        read_tensors(no_newline)


def test_offset_out_of_bounds(tmp_path):
    path = tmp_path / "t.bin"
    write_tensors(path, {"x": np.zeros(4, dtype=np.float32)}, {})
    raw = path.read_bytes()
    newline = raw.index(b"\n")
    header = json.loads(raw[:newline])
    header["tensors"][0]["shape"] = [400]
    path.write_bytes(json.dumps(header).encode() + raw[newline:])
    with pytest.raises(ContainerError, match="spans bytes"):
        read_tensors(path)


def test_duplicate_names_rejected(tmp_path):
    path = tmp_path / "t.bin"
    write_tensors(path, {"x": np.zeros(1, dtype=np.float32)}, {})
    raw = path.read_bytes()
    newline = raw.index(b"\n")
    header = json.loads(raw[:newline])
    header["tensors"].append(dict(header["tensors"][0]))
    path.write_bytes(json.dumps(header).encode() + raw[newline:])
    with pytest.raises(ContainerError, match="duplicate"):
        read_tensors(path)
