#!/usr/bin/env python3
"""Export a ResNet-50 checkpoint into the engine's portable tensor
container and emit a reference-activation fixture.

Batch norm is folded into the convolution kernels and biases, so every
tensor in the container is a plain conv weight or bias. The fixture holds
this tool's own forward-pass pooled statistics (max/min/mean/std of the
final pre-pooling feature map) on a test image; the scoring engine must
reproduce them from the same container, which makes the pair of files a
cross-implementation contract that needs no ML framework on the engine
side.

Usage:
    export_backbone.py --model resnet50 [--weights pretrained|random]
                       [--seed 0] --out weights.bin
                       [--fixture fixture.json] [--image ramp64.pgm]
    export_backbone.py --container weights.bin --fixture fixture.json
                       [--image ramp64.pgm]

The second form only re-emits a fixture for an existing container (any
arch this tool understands, including the engine's sequential backbones).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import torch

TAP = "pre-pool"
IMAGENET_MEAN = [0.485, 0.456, 0.406]
IMAGENET_STD = [0.229, 0.224, 0.225]
DEFAULT_IMAGE = Path(__file__).resolve().parent / "ramp64.pgm"

BLOCKS = (3, 4, 6, 3)
STRIDES = (1, 2, 2, 2)


# --- container io (independent of the engine's implementation) --------------


def write_container(path: Path, tensors: list[tuple[str, np.ndarray]], meta: dict) -> str:
    records = []
    payload = bytearray()
    for name, array in tensors:
        arr = np.ascontiguousarray(array, dtype="<f4")
        records.append(
            {"name": name, "shape": list(arr.shape), "offset": len(payload), "dtype": "f32le"}
        )
        payload += arr.tobytes()
    header = json.dumps({"tensors": records, "meta": meta}, ensure_ascii=False)
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(b"\n")
        fh.write(bytes(payload))
    return hashlib.sha256(bytes(payload)).hexdigest()


def read_container(path: Path) -> tuple[dict[str, np.ndarray], dict, str]:
    raw = Path(path).read_bytes()
    newline = raw.index(b"\n")
    header = json.loads(raw[:newline].decode("utf-8"))
    payload = raw[newline + 1 :]
    tensors = {}
    for record in header["tensors"]:
        count = int(np.prod(record["shape"])) if record["shape"] else 1
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=record["offset"])
        tensors[record["name"]] = arr.reshape(record["shape"])
    return tensors, header.get("meta", {}), hashlib.sha256(payload).hexdigest()


def verify_container(container: Path, manifest: Path) -> None:
    doc = json.loads(Path(manifest).read_text(encoding="utf-8"))
    _, _, checksum = read_container(container)
    if checksum != doc["checksum"]:
        raise RuntimeError(
            f"checksum mismatch for {container}: manifest says {doc['checksum'][:12]}..., "
            f"payload hashes to {checksum[:12]}..."
        )


# --- resnet50 export ---------------------------------------------------------


def fold_bn(conv: torch.nn.Conv2d, bn: torch.nn.BatchNorm2d) -> tuple[np.ndarray, np.ndarray]:
    """Fold a BatchNorm that follows a bias-free conv into weight+bias."""
    with torch.no_grad():
        scale = bn.weight.double() / torch.sqrt(bn.running_var.double() + bn.eps)
        weight = conv.weight.double() * scale[:, None, None, None]
        bias = bn.bias.double() - bn.running_mean.double() * scale
    return weight.numpy(), bias.numpy()


def load_resnet50(weights: str, seed: int) -> torch.nn.Module:
    import torchvision

    if weights == "pretrained":
        try:
            return torchvision.models.resnet50(
                weights=torchvision.models.ResNet50_Weights.IMAGENET1K_V2
            )
        except Exception as exc:  # no network / bad cache
            raise RuntimeError(
                f"cannot fetch the pretrained checkpoint ({exc}); "
                f"pass --weights random or point the torch cache at a local copy"
            ) from exc
    if weights == "random":
        torch.manual_seed(seed)
        return torchvision.models.resnet50(weights=None)
    raise RuntimeError(f"unknown weights source {weights!r}")


def export_resnet50(model: torch.nn.Module) -> list[tuple[str, np.ndarray]]:
    model.eval()
    tensors: list[tuple[str, np.ndarray]] = []
    w, b = fold_bn(model.conv1, model.bn1)
    tensors.append(("conv1.weight", w))
    tensors.append(("conv1.bias", b))
    for stage in range(1, 5):
        layer = getattr(model, f"layer{stage}")
        for index, block in enumerate(layer):
            prefix = f"layer{stage}.{index}"
            for conv_name in ("conv1", "conv2", "conv3"):
                w, b = fold_bn(getattr(block, conv_name), getattr(block, f"bn{conv_name[-1]}"))
                tensors.append((f"{prefix}.{conv_name}.weight", w))
                tensors.append((f"{prefix}.{conv_name}.bias", b))
            if block.downsample is not None:
                w, b = fold_bn(block.downsample[0], block.downsample[1])
                tensors.append((f"{prefix}.downsample.weight", w))
                tensors.append((f"{prefix}.downsample.bias", b))
    return tensors


# --- fixture forward (this tool's own implementation, torch-based) -----------


def read_pgm(path: Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5" or int(tokens[3]) != 255:
        raise RuntimeError(f"{path}: expected binary PGM with maxval 255")
    width, height = int(tokens[1]), int(tokens[2])
    data = np.frombuffer(raw[pos + 1 :], dtype=np.uint8, count=width * height)
    return data.reshape(height, width).astype(np.float64)


def forward_container(tensors: dict[str, np.ndarray], meta: dict, image: np.ndarray) -> torch.Tensor:
    """Forward the container's network over a gray image, in float64."""
    arch = meta.get("arch")
    mean = torch.tensor(meta.get("mean", IMAGENET_MEAN), dtype=torch.float64)
    std = torch.tensor(meta.get("std", IMAGENET_STD), dtype=torch.float64)
    channels = len(mean)
    x = torch.from_numpy(image / 255.0).to(torch.float64)
    x = x.expand(1, channels, *x.shape).clone()
    x = (x - mean[None, :, None, None]) / std[None, :, None, None]

    def conv(name: str, inp: torch.Tensor, stride: int = 1, padding: int = 0) -> torch.Tensor:
        weight = torch.from_numpy(np.asarray(tensors[f"{name}.weight"], dtype=np.float64))
        bias = torch.from_numpy(np.asarray(tensors[f"{name}.bias"], dtype=np.float64))
        return torch.nn.functional.conv2d(inp, weight, bias, stride=stride, padding=padding)

    if arch == "resnet50":
        x = torch.relu(conv("conv1", x, stride=2, padding=3))
        x = torch.nn.functional.max_pool2d(x, kernel_size=3, stride=2, padding=1)
        for stage, (blocks, stage_stride) in enumerate(zip(BLOCKS, STRIDES), start=1):
            for index in range(blocks):
                stride = stage_stride if index == 0 else 1
                prefix = f"layer{stage}.{index}"
                out = torch.relu(conv(f"{prefix}.conv1", x))
                out = torch.relu(conv(f"{prefix}.conv2", out, stride=stride, padding=1))
                out = conv(f"{prefix}.conv3", out)
                identity = (
                    conv(f"{prefix}.downsample", x, stride=stride)
                    if f"{prefix}.downsample.weight" in tensors
                    else x
                )
                x = torch.relu(out + identity)
        return x[0]
    if arch == "sequential":
        for index, layer_meta in enumerate(meta["layers"]):
            x = conv(
                f"conv{index}", x,
                stride=int(layer_meta.get("stride", 1)),
                padding=int(layer_meta.get("padding", 0)),
            )
            if layer_meta.get("activation", "relu") == "relu":
                x = torch.relu(x)
        return x[0]
    raise RuntimeError(f"container has unsupported arch {arch!r}")


def pooled_fixture(feature_map: torch.Tensor) -> dict:
    flat = feature_map.reshape(-1)
    return {
        "l1": float(flat.max()),
        "l2": float(flat.min()),
        "l3": float(flat.mean()),
        "l4": float(flat.std(unbiased=False)),
    }


def emit_fixture(container: Path, image_path: Path, fixture_path: Path) -> dict:
    tensors, meta, checksum = read_container(container)
    image = read_pgm(image_path)
    stats = pooled_fixture(forward_container(tensors, meta, image))
    doc = {
        "container_checksum": checksum,
        "image": image_path.name,
        "tap": TAP,
        "pooled": stats,
    }
    fixture_path.write_text(json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8")
    return doc


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--model", choices=["resnet50"], default=None)
    parser.add_argument("--weights", choices=["pretrained", "random"], default="pretrained")
    parser.add_argument("--seed", type=int, default=0, help="init seed for --weights random")
    parser.add_argument("--tap", default=TAP, choices=[TAP])
    parser.add_argument("--out", type=Path, default=None, help="container output path")
    parser.add_argument("--container", type=Path, default=None,
                        help="existing container (fixture-only mode)")
    parser.add_argument("--fixture", type=Path, default=None, help="fixture JSON output path")
    parser.add_argument("--image", type=Path, default=DEFAULT_IMAGE)
    args = parser.parse_args(argv)

    try:
        if args.model is None and args.container is None:
            parser.error("need --model to export or --container for fixture-only mode")
        if args.model is not None:
            if args.out is None:
                parser.error("--model requires --out")
            model = load_resnet50(args.weights, args.seed)
            tensors = export_resnet50(model)
            meta = {
                "kind": "backbone",
                "arch": "resnet50",
                "input_channels": 3,
                "mean": IMAGENET_MEAN,
                "std": IMAGENET_STD,
                "tap": args.tap,
                "source": f"torchvision resnet50 ({args.weights})",
            }
            checksum = write_container(args.out, tensors, meta)
            manifest = {
                "source_model": "resnet50",
                "weights": args.weights,
                "seed": args.seed if args.weights == "random" else None,
                "tap": args.tap,
                "mean": IMAGENET_MEAN,
                "std": IMAGENET_STD,
                "checksum": checksum,
                "tensor_count": len(tensors),
            }
            manifest_path = Path(str(args.out) + ".manifest.json")
            manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")
            verify_container(args.out, manifest_path)
            print(f"wrote {args.out} ({len(tensors)} tensors, sha256 {checksum[:12]}...)")
            container = args.out
        else:
            container = args.container
        if args.fixture is not None:
            doc = emit_fixture(container, args.image, args.fixture)
            print(f"wrote {args.fixture} (pooled {doc['pooled']})")
        return 0
    except RuntimeError as exc:
        print(f"export_backbone: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
