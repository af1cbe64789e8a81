"""Blind, real-time QoE scoring for HTTP adaptive streaming.

The engine samples each segment non-uniformly, extracts QoS and content
features (backbone pooling, GRU fusion, macroblock texture, boundary
similarity), and regresses the five-segment window vector to a QoE score
with an RBF-kernel SVR.
"""

__version__ = "0.1.0"

from .errors import (
    ContainerError,
    DataError,
    DatasetError,
    DeadlineExceeded,
    FrameFormatError,
    HasQoeError,
    ManifestError,
    ModelFormatError,
    UsageError,
)
from .frames import GrayFrame, load_frame, to_gray, write_frame
from .sampler import SamplingPlan, SamplingWeights, allocate, calibrate_weights, plan
from .session import Segment, SessionManifest, SessionWindow, load_manifest, window_at

__all__ = [
    "__version__",
    "HasQoeError",
    "UsageError",
    "DataError",
    "ManifestError",
    "FrameFormatError",
    "ContainerError",
    "ModelFormatError",
    "DatasetError",
    "DeadlineExceeded",
    "GrayFrame",
    "load_frame",
    "write_frame",
    "to_gray",
    "Segment",
    "SessionWindow",
    "SessionManifest",
    "load_manifest",
    "window_at",
    "SamplingWeights",
    "SamplingPlan",
    "allocate",
    "plan",
    "calibrate_weights",
]
