import json
from pathlib import Path

import numpy as np
import pytest
import torch

import export_backbone as eb


@pytest.fixture(scope="module")
def exported(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("export")
    container = out_dir / "weights.bin"
    fixture = out_dir / "fixture.json"
    rc = eb.main([
        "--model", "resnet50", "--weights", "random", "--seed", "0",
        "--out", str(container), "--fixture", str(fixture),
    ])
    assert rc == 0
    return container, fixture


def test_shapes_round_trip(exported):
    container, _ = exported
    tensors, meta, _ = eb.read_container(container)
    assert meta["arch"] == "resnet50"
    torch.manual_seed(0)
    import torchvision

    model = torchvision.models.resnet50(weights=None)
    folded = dict(eb.export_resnet50(model))
    assert set(tensors) == set(folded)
    for name, arr in folded.items():
        assert tuple(tensors[name].shape) == tuple(arr.shape), name


def test_reexport_identical_checksum(exported, tmp_path):
    container, _ = exported
    manifest = json.loads(Path(str(container) + ".manifest.json").read_text())
    second = tmp_path / "again.bin"
    rc = eb.main(["--model", "resnet50", "--weights", "random", "--seed", "0",
                  "--out", str(second)])
    assert rc == 0
    manifest2 = json.loads(Path(str(second) + ".manifest.json").read_text())
    assert manifest["checksum"] == manifest2["checksum"]


def test_corrupt_container_fails_checksum(exported, tmp_path):
    container, _ = exported
    manifest_path = Path(str(container) + ".manifest.json")
    corrupted = tmp_path / "corrupt.bin"
    raw = bytearray(container.read_bytes())
    raw[-3] ^= 0xFF
    corrupted.write_bytes(bytes(raw))
    with pytest.raises(RuntimeError, match="checksum mismatch"):
        eb.verify_container(corrupted, manifest_path)


def test_fixture_regeneration_is_identical(exported, tmp_path):
    container, fixture = exported
    again = tmp_path / "fixture2.json"
    rc = eb.main(["--container", str(container), "--fixture", str(again)])
    assert rc == 0
    assert json.loads(fixture.read_text()) == json.loads(again.read_text())


def test_fixture_contents(exported):
    _, fixture = exported
    doc = json.loads(fixture.read_text())
    assert doc["tap"] == "pre-pool"
    assert set(doc["pooled"]) == {"l1", "l2", "l3", "l4"}
    assert doc["pooled"]["l2"] <= doc["pooled"]["l3"] <= doc["pooled"]["l1"]
    assert doc["pooled"]["l4"] >= 0


def test_pgm_reader_ramp():
    image = eb.read_pgm(eb.DEFAULT_IMAGE)
    assert image.shape == (64, 64)
    assert image[0, 0] == 0.0 and image[0, -1] == 255.0
    assert np.all(np.diff(image[0]) >= 0)


def test_pretrained_unavailable_is_clean_error(tmp_path, monkeypatch):
    # Simulate an offline environment regardless of the real one.
    import torchvision

    def boom(*args, **kwargs):
        raise OSError("name resolution failed")

    monkeypatch.setattr(torchvision.models, "resnet50", boom)
    rc = eb.main(["--model", "resnet50", "--weights", "pretrained",
                  "--out", str(tmp_path / "w.bin")])
    assert rc == 1
