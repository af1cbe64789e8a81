"""Convolutional backbone inference and spatial feature pooling.

The backbone is pluggable: a small seeded three-layer network ships for
tests and desk-scale latency, and weights exported from a full ResNet-50
(batch-norm folded into the convolutions) can be loaded from the portable
tensor container. Either way the forward pass ends in a feature map that is
pooled into four spatial statistics per frame.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .errors import ContainerError
from .frames import GrayFrame, resize_bilinear
from .tensorfile import read_tensors, write_tensors

__all__ = [
    "PooledStats",
    "ConvLayer",
    "SequentialBackbone",
    "Resnet50Backbone",
    "BackboneParams",
    "pooled_stats",
    "backbone_forward",
    "tiny_backbone",
    "save_backbone",
    "load_backbone",
    "downscale_for_backbone",
]

ACTIVATIONS = ("relu", "linear")

# Bottleneck block counts and widths of the standard 50-layer residual net.
RESNET50_BLOCKS = (3, 4, 6, 3)
RESNET50_MID = (64, 128, 256, 512)
RESNET50_STRIDES = (1, 2, 2, 2)

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class PooledStats:
    """Four pooled statistics of a feature map: max, min, mean, std."""

    l1: float
    l2: float
    l3: float
    l4: float

    def as_array(self) -> np.ndarray:
        return np.array([self.l1, self.l2, self.l3, self.l4], dtype=np.float64)


def pooled_stats(feature_map: np.ndarray) -> PooledStats:
    """Pool a feature map into (max, min, mean, population std)."""
    arr = np.asarray(feature_map, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot pool an empty feature map")
    if not np.all(np.isfinite(arr)):
        raise ValueError("feature map contains non-finite values")
    mean = float(arr.mean())
    return PooledStats(
        l1=float(arr.max()),
        l2=float(arr.min()),
        l3=mean,
        l4=float(np.sqrt(np.mean((arr - mean) ** 2))),
    )


@dataclass(frozen=True)
class ConvLayer:
    """One convolution: kernel (out, in, kh, kw), bias (out,), stride,
    zero padding, and an activation tag."""

    weight: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: int = 0
    activation: str = "relu"

    def __post_init__(self) -> None:
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 4:
            raise ValueError(f"conv weight must be 4-D (out,in,kh,kw), got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise ValueError(f"conv bias shape {b.shape} does not match {w.shape[0]} out channels")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("conv parameters must be finite")
        if self.stride < 1 or self.padding < 0:
            raise ValueError("stride must be >= 1 and padding >= 0")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}, expected one of {ACTIVATIONS}")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True)
class SequentialBackbone:
    """Plain feed-forward stack of convolutions."""

    layers: tuple[ConvLayer, ...]
    mean: tuple[float, ...] = (0.5,)
    std: tuple[float, ...] = (0.25,)

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValueError("backbone needs at least one layer")
        if self.input_channels not in (1, 3):
            raise ValueError(f"first layer must take 1 or 3 channels, got {self.input_channels}")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if b.in_channels != a.out_channels:
                raise ValueError(
                    f"layer {i + 1} expects {b.in_channels} channels but layer {i} "
                    f"produces {a.out_channels}"
                )
        _check_norm(self.mean, self.std, self.input_channels)
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def input_channels(self) -> int:
        return self.layers[0].in_channels

    @property
    def downsampling_factor(self) -> int:
        factor = 1
        for layer in self.layers:
            factor *= layer.stride
        return factor


@dataclass(frozen=True)
class Resnet50Backbone:
    """ResNet-50 weights with batch norm folded into conv kernels/biases.

    ``tensors`` maps ``conv1.weight``-style names to float arrays; the block
    wiring itself is fixed by the architecture.
    """

    tensors: Mapping[str, np.ndarray]
    mean: tuple[float, ...] = IMAGENET_MEAN
    std: tuple[float, ...] = IMAGENET_STD

    input_channels: int = field(init=False, default=3)
    downsampling_factor: int = field(init=False, default=32)

    def __post_init__(self) -> None:
        names = set(self.tensors)
        expected = resnet50_tensor_names()
        missing = expected - names
        unknown = names - expected
        if missing:
            raise ContainerError(f"resnet50 weights missing tensors: {sorted(missing)[:4]}...")
        if unknown:
            raise ContainerError(f"resnet50 weights contain unknown tensors: {sorted(unknown)[:4]}")
        _check_norm(self.mean, self.std, 3)


BackboneParams = Union[SequentialBackbone, Resnet50Backbone]


def _check_norm(mean: tuple[float, ...], std: tuple[float, ...], channels: int) -> None:
    if len(mean) != channels or len(std) != channels:
        raise ValueError(f"mean/std must have {channels} entries")
    if any(not math.isfinite(m) for m in mean) or any(not (math.isfinite(s) and s > 0) for s in std):
        raise ValueError("normalization mean must be finite and std positive")


def resnet50_tensor_names() -> set[str]:
    names = {"conv1.weight", "conv1.bias"}
    for stage, blocks in enumerate(RESNET50_BLOCKS, start=1):
        for b in range(blocks):
            for conv in ("conv1", "conv2", "conv3"):
                names.add(f"layer{stage}.{b}.{conv}.weight")
                names.add(f"layer{stage}.{b}.{conv}.bias")
            if b == 0:
                names.add(f"layer{stage}.{b}.downsample.weight")
                names.add(f"layer{stage}.{b}.downsample.bias")
    return names


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int, padding: int) -> np.ndarray:
    """2-D convolution (cross-correlation) over a (C, H, W) input."""
    out_ch, in_ch, kh, kw = weight.shape
    if x.shape[0] != in_ch:
        raise ValueError(f"input has {x.shape[0]} channels, kernel expects {in_ch}")
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    _, h, w = x.shape
    if h < kh or w < kw:
        raise ValueError(f"frame too small: {h}x{w} input for {kh}x{kw} kernel")
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]
    _, out_h, out_w, _, _ = windows.shape
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(out_h * out_w, in_ch * kh * kw)
    out = cols @ weight.reshape(out_ch, -1).T + bias
    return out.T.reshape(out_ch, out_h, out_w)


def maxpool2d(x: np.ndarray, kernel: int = 3, stride: int = 2, padding: int = 1) -> np.ndarray:
    xp = np.pad(
        x, ((0, 0), (padding, padding), (padding, padding)), constant_values=-np.inf
    )
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kernel, kernel), axis=(1, 2))
    return windows[:, ::stride, ::stride].max(axis=(3, 4))


def _normalize_input(frame: GrayFrame, params: BackboneParams) -> np.ndarray:
    scaled = frame.data.astype(np.float64) / 255.0
    channels = params.input_channels
    # Gray input replicated when the network was trained on color images.
    stacked = np.broadcast_to(scaled, (channels,) + scaled.shape)
    mean = np.asarray(params.mean, dtype=np.float64)[:, None, None]
    std = np.asarray(params.std, dtype=np.float64)[:, None, None]
    return (stacked - mean) / std


def backbone_forward(frame: GrayFrame, params: BackboneParams) -> np.ndarray:
    """Run the backbone over a gray frame; returns the final feature map
    (channels, h', w'). Deterministic: same input and params give the same
    output bit for bit."""
    factor = params.downsampling_factor
    if frame.height < factor or frame.width < factor:
        raise ValueError(
            f"frame {frame.width}x{frame.height} is smaller than the backbone's "
            f"total downsampling factor {factor}"
        )
    x = _normalize_input(frame, params)
    if isinstance(params, SequentialBackbone):
        for layer in params.layers:
            x = conv2d(x, layer.weight, layer.bias, layer.stride, layer.padding)
            if layer.activation == "relu":
                x = np.maximum(x, 0.0)
        return x
    return _resnet50_forward(x, params.tensors)


def _resnet50_forward(x: np.ndarray, tensors: Mapping[str, np.ndarray]) -> np.ndarray:
    def conv(name: str, inp: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
        return conv2d(
            inp,
            np.asarray(tensors[f"{name}.weight"], dtype=np.float64),
            np.asarray(tensors[f"{name}.bias"], dtype=np.float64),
            stride,
            padding,
        )

    x = np.maximum(conv("conv1", x, stride=2, padding=3), 0.0)
    x = maxpool2d(x)
    for stage, (blocks, stage_stride) in enumerate(zip(RESNET50_BLOCKS, RESNET50_STRIDES), start=1):
        for b in range(blocks):
            stride = stage_stride if b == 0 else 1
            prefix = f"layer{stage}.{b}"
            out = np.maximum(conv(f"{prefix}.conv1", x), 0.0)
            # The 3x3 conv carries the stage stride (v1.5 layout).
            out = np.maximum(conv(f"{prefix}.conv2", out, stride=stride, padding=1), 0.0)
            out = conv(f"{prefix}.conv3", out)
            identity = conv(f"{prefix}.downsample", x, stride=stride) if b == 0 else x
            x = np.maximum(out + identity, 0.0)
    return x


def tiny_backbone(seed: int = 0) -> SequentialBackbone:
    """Deterministic seeded three-layer backbone (1->8->16->32, stride 2)."""
    rng = np.random.default_rng(seed)
    layers = []
    channels = (1, 8, 16, 32)
    for cin, cout in zip(channels, channels[1:]):
        fan_in = cin * 9
        weight = rng.standard_normal((cout, cin, 3, 3)) * math.sqrt(2.0 / fan_in)
        layers.append(ConvLayer(weight=weight, bias=np.zeros(cout), stride=2, padding=1))
    return SequentialBackbone(layers=tuple(layers))


def save_backbone(params: SequentialBackbone, path: str | os.PathLike) -> None:
    """Serialize a sequential backbone into the tensor container."""
    tensors: dict[str, np.ndarray] = {}
    layer_meta = []
    for i, layer in enumerate(params.layers):
        tensors[f"conv{i}.weight"] = layer.weight
        tensors[f"conv{i}.bias"] = layer.bias
        layer_meta.append(
            {"stride": layer.stride, "padding": layer.padding, "activation": layer.activation}
        )
    meta = {
        "kind": "backbone",
        "arch": "sequential",
        "input_channels": params.input_channels,
        "mean": list(params.mean),
        "std": list(params.std),
        "layers": layer_meta,
    }
    write_tensors(path, tensors, meta)


def load_backbone(path: str | os.PathLike) -> BackboneParams:
    """Load backbone weights from a tensor container; the ``arch`` meta
    field selects the network wiring."""
    tensors, meta = read_tensors(path)
    arch = meta.get("arch")
    if arch == "sequential":
        layer_meta = meta.get("layers")
        if not isinstance(layer_meta, list) or not layer_meta:
            raise ContainerError(f"{path}: sequential backbone needs a 'layers' meta list")
        expected = {f"conv{i}.{part}" for i in range(len(layer_meta)) for part in ("weight", "bias")}
        unknown = set(tensors) - expected
        if unknown:
            raise ContainerError(f"{path}: unknown tensor names {sorted(unknown)[:4]}")
        layers = []
        for i, lm in enumerate(layer_meta):
            wname, bname = f"conv{i}.weight", f"conv{i}.bias"
            if wname not in tensors or bname not in tensors:
                raise ContainerError(f"{path}: missing tensors for layer {i}")
            layers.append(
                ConvLayer(
                    weight=tensors[wname],
                    bias=tensors[bname],
                    stride=int(lm.get("stride", 1)),
                    padding=int(lm.get("padding", 0)),
                    activation=str(lm.get("activation", "relu")),
                )
            )
        mean = tuple(float(v) for v in meta.get("mean", (0.5,)))
        std = tuple(float(v) for v in meta.get("std", (0.25,)))
        try:
            return SequentialBackbone(layers=tuple(layers), mean=mean, std=std)
        except ValueError as exc:
            raise ContainerError(f"{path}: {exc}") from exc
    if arch == "resnet50":
        mean = tuple(float(v) for v in meta.get("mean", IMAGENET_MEAN))
        std = tuple(float(v) for v in meta.get("std", IMAGENET_STD))
        return Resnet50Backbone(tensors=tensors, mean=mean, std=std)
    raise ContainerError(f"{path}: unsupported backbone arch {arch!r}")


def downscale_for_backbone(frame: GrayFrame, max_dim: int) -> GrayFrame:
    """Shrink a frame so its longest side is at most ``max_dim`` (bilinear),
    bounding the cost of a deep forward pass. No-op when already small."""
    longest = max(frame.width, frame.height)
    if longest <= max_dim:
        return frame
    scale = max_dim / longest
    out_h = max(1, round(frame.height * scale))
    out_w = max(1, round(frame.width * scale))
    resized = np.clip(resize_bilinear(frame.data, out_h, out_w), 0.0, 255.0)
    return GrayFrame(resized)
