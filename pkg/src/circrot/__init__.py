"""Circular-aware rotation angle estimation toolkit."""

__version__ = "0.1.0"

from .circmath import angle_from_components, circular_distance, normalize
from .codecs import CodecSpec, LossValue, decode, encode, loss_and_grad, make_codec
from .metrics import MetricsReport, evaluate, per_sample_errors

__all__ = [
    "CodecSpec",
    "LossValue",
    "MetricsReport",
    "angle_from_components",
    "circular_distance",
    "decode",
    "encode",
    "evaluate",
    "loss_and_grad",
    "make_codec",
    "normalize",
    "per_sample_errors",
]
