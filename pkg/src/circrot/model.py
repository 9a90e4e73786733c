"""A one-hidden-layer head with hand-written backpropagation and its trainer.

The head maps a feature vector through ``affine -> ReLU -> affine`` to the
codec's output dimension. The final affine output is multiplied by a fixed
``output_scale`` (not trained); the direct-angle codec uses ``180/pi`` so its
raw output is in radians while its prediction is in degrees.
"""

from __future__ import annotations

import csv
import io
import json
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import rng
from .circmath import circular_distance, normalize
from .codecs import CodecSpec, codec_from_dict, decode, encode, loss_and_grad
from .features import FeatureExtractor, extract_batch, extract_features
from .geometry import rotate_and_crop

PARAM_NAMES = ("w1", "b1", "w2", "b2")
FILE_MAGIC = b"CIRCHEAD"
FILE_VERSION = 1
OPTIMIZERS = ("adam_like", "sgd_momentum")

_TAG_INIT = 21
_TAG_SHUFFLE = 22
_TAG_TRAIN_ANGLE = 23


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes non-finite."""


@dataclass
class HeadParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    output_scale: float = 1.0
    seed: int = 0

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    def copy(self) -> "HeadParams":
        return replace(self, **{n: a.copy() for n, a in self.arrays().items()})


def default_output_scale(codec: CodecSpec) -> float:
    return 180.0 / math.pi if codec.method == "da" else 1.0


def init_params(in_dim: int, out_dim: int, hidden: int = 128, seed: int = 0, output_scale: float = 1.0) -> HeadParams:
    """Glorot-uniform weights, zero biases."""
    g = rng.generator(seed, _TAG_INIT)
    a1 = math.sqrt(6.0 / (in_dim + hidden))
    a2 = math.sqrt(6.0 / (hidden + out_dim))
    return HeadParams(
        w1=g.uniform(-a1, a1, (in_dim, hidden)),
        b1=np.zeros(hidden),
        w2=g.uniform(-a2, a2, (hidden, out_dim)),
        b2=np.zeros(out_dim),
        output_scale=output_scale,
        seed=seed,
    )


def _check_features(params: HeadParams, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != params.in_dim or x.ndim not in (1, 2):
        raise ValueError(f"expected features with last dimension {params.in_dim}, got shape {x.shape}")
    return x


def forward(params: HeadParams, features) -> np.ndarray:
    x = _check_features(params, features)
    h = np.maximum(x @ params.w1 + params.b1, 0.0)
    return (h @ params.w2 + params.b2) * params.output_scale


def backward(params: HeadParams, features, upstream_grad) -> dict[str, np.ndarray]:
    """Gradients of a loss with respect to every parameter.

    ``upstream_grad`` is d(loss)/d(output) with the same shape as
    ``forward(params, features)``; for a batch the gradients are summed over
    samples.
    """
    x = _check_features(params, features)
    g = np.asarray(upstream_grad, dtype=np.float64)
    expected = x.shape[:-1] + (params.out_dim,)
    if g.shape != expected:
        raise ValueError(f"upstream gradient shape {g.shape} does not match output shape {expected}")
    x2, g2 = np.atleast_2d(x), np.atleast_2d(g) * params.output_scale
    z = x2 @ params.w1 + params.b1
    h = np.maximum(z, 0.0)
    dz = (g2 @ params.w2.T) * (z > 0.0)
    return {"w1": x2.T @ dz, "b1": dz.sum(axis=0), "w2": h.T @ g2, "b2": g2.sum(axis=0)}


class Adam:
    """Adaptive moment estimation with bias correction."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: HeadParams, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name in PARAM_NAMES:
            g = grads[name]
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p = getattr(params, name)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGDMomentum:
    def __init__(self, lr: float, momentum: float = 0.9):
        self.lr, self.momentum = lr, momentum
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, params: HeadParams, grads: dict[str, np.ndarray]) -> None:
        for name in PARAM_NAMES:
            v = self.velocity.setdefault(name, np.zeros_like(grads[name]))
            v *= self.momentum
            v -= self.lr * grads[name]
            getattr(params, name)[...] += v


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 60
    patience: int = 15
    optimizer: str = "adam_like"
    seed: int = 0
    hidden: int = 128

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if min(self.batch_size, self.max_epochs, self.patience, self.hidden) <= 0:
            raise ValueError("batch_size, max_epochs, patience and hidden must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")


@dataclass
class TrainingLog:
    epochs: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_mae: list[float] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_val_mae(self) -> float:
        return self.val_mae[self.epochs.index(self.best_epoch)]

    def append(self, epoch: int, loss: float, mae: float) -> None:
        self.epochs.append(epoch)
        self.train_loss.append(float(loss))
        self.val_mae.append(float(mae))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_mae"])
        for row in zip(self.epochs, self.train_loss, self.val_mae):
            w.writerow([row[0], repr(row[1]), repr(row[2])])
        return buf.getvalue()


class RotationStream:
    """Features of training scenes under fresh per-epoch rotations.

    Epoch ``e`` rotates scene ``s`` by ``uniform_angle(seed, e, s)``.
    Feature matrices are memoized per epoch, so several trainings sharing a
    seed (one per codec) pay for image resampling only once.
    """

    def __init__(self, fx: FeatureExtractor, manifest, seed: int, memoize: bool = True, quantize: bool | None = None):
        self.fx, self.manifest, self.seed, self.memoize = fx, manifest, seed, memoize
        # crops of a file-backed dataset go through the same 8-bit step as its stored val/test images
        self.quantize = manifest.root is not None if quantize is None else quantize
        self._bases: list[np.ndarray] | None = None
        self._cache: dict[int, np.ndarray] = {}

    def angles(self, epoch: int) -> np.ndarray:
        return np.array([rng.uniform_angle(self.seed, _TAG_TRAIN_ANGLE, epoch, s) for s in self.manifest.scene_seeds])

    def features(self, epoch: int) -> np.ndarray:
        if epoch in self._cache:
            return self._cache[epoch]
        if self._bases is None:
            self._bases = [self.manifest.base_image(i) for i in range(len(self.manifest))]
        size = self.fx.image_size
        rows = []
        for base, angle in zip(self._bases, self.angles(epoch)):
            crop = rotate_and_crop(base, angle, size)
            if self.quantize:
                crop = np.round(crop * 255.0) / 255.0
            rows.append(extract_features(self.fx, crop))
        feats = np.stack(rows)
        if self.memoize:
            self._cache[epoch] = feats
        return feats


def manifest_features(fx: FeatureExtractor, manifest) -> np.ndarray:
    """Features of the stored (already rotated) images of a val/test manifest."""
    return extract_batch(fx, (manifest.image(i) for i in range(len(manifest))))


def _round_to_float32(params: HeadParams) -> HeadParams:
    return replace(params, **{n: a.astype(np.float32).astype(np.float64) for n, a in params.arrays().items()})


def train(
    codec: CodecSpec,
    fx: FeatureExtractor,
    train_manifest,
    val_manifest,
    cfg: TrainConfig,
    *,
    stream: RotationStream | None = None,
    val_features: np.ndarray | None = None,
    on_epoch: Callable[[int, float, float], None] | None = None,
) -> tuple[HeadParams, TrainingLog]:
    """Mini-batch training of a fresh head for ``codec``.

    Returns the parameters of the epoch with the lowest validation MAE
    (rounded to float32 so they survive serialisation unchanged) and the
    per-epoch log. Epoch 0 records the untrained head. Training stops after
    ``cfg.patience`` epochs without improvement.
    """
    stream = stream or RotationStream(fx, train_manifest, cfg.seed)
    if stream.seed != cfg.seed:
        raise ValueError("rotation stream seed differs from the training seed")
    xv = manifest_features(fx, val_manifest) if val_features is None else val_features
    val_angles = val_manifest.angles

    params = init_params(fx.out_dim, codec.output_dim, cfg.hidden, cfg.seed, default_output_scale(codec))
    opt = Adam(cfg.learning_rate) if cfg.optimizer == "adam_like" else SGDMomentum(cfg.learning_rate)

    def val_mae(p: HeadParams) -> float:
        return float(np.mean(circular_distance(decode(codec, forward(p, xv)), val_angles)))

    def check(loss: float, epoch: int) -> None:
        if not math.isfinite(loss):
            raise TrainingDiverged(f"{codec.name}: non-finite training loss at epoch {epoch} (lr={cfg.learning_rate})")

    log = TrainingLog()
    x1 = stream.features(1)
    loss0 = float(loss_and_grad(codec, forward(params, x1), encode(codec, stream.angles(1))).loss.mean())
    check(loss0, 0)
    best, best_mae = params.copy(), val_mae(params)
    log.append(0, loss0, best_mae)

    n = len(train_manifest)
    for epoch in range(1, cfg.max_epochs + 1):
        x = stream.features(epoch)
        targets = encode(codec, stream.angles(epoch))
        order = rng.generator(cfg.seed, _TAG_SHUFFLE, epoch).permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = x[idx]
            out = forward(params, xb)
            if not np.all(np.isfinite(out)):
                raise TrainingDiverged(f"{codec.name}: non-finite head output at epoch {epoch}")
            lv = loss_and_grad(codec, out, targets[idx])
            total += float(lv.loss.sum())
            opt.step(params, backward(params, xb, lv.gradient / len(idx)))
        loss = total / n
        check(loss, epoch)
        mae = val_mae(params)
        log.append(epoch, loss, mae)
        if on_epoch is not None:
            on_epoch(epoch, loss, mae)
        if mae < best_mae:
            best, best_mae, log.best_epoch = params.copy(), mae, epoch
        elif epoch - log.best_epoch >= cfg.patience:
            break
    return _round_to_float32(best), log


def predict_batch(codec: CodecSpec, fx: FeatureExtractor, params: HeadParams, images) -> np.ndarray:
    return np.atleast_1d(decode(codec, forward(params, extract_batch(fx, images))))


def predict(codec: CodecSpec, fx: FeatureExtractor, params: HeadParams, img) -> float:
    """Predicted rotation angle of ``img`` in ``[0, 360)``."""
    return normalize(decode(codec, forward(params, extract_features(fx, img))))


def save_params(path, params: HeadParams, codec: CodecSpec, fx: FeatureExtractor) -> None:
    """Write a versioned binary parameter file.

    Layout (little-endian): 8-byte magic ``CIRCHEAD``; uint32 version;
    uint32 length + UTF-8 JSON metadata (codec, feature extractor, output
    scale, seed); uint32 tensor count; per tensor a uint16 name length, the
    ASCII name, uint32 ndim and uint32 dims; then all tensors as float32 in
    table order.
    """
    meta = json.dumps(
        {"codec": codec.to_dict(), "features": fx.to_dict(), "output_scale": params.output_scale, "seed": params.seed},
        sort_keys=True,
    ).encode("utf-8")
    buf = io.BytesIO()
    buf.write(FILE_MAGIC)
    buf.write(struct.pack("<II", FILE_VERSION, len(meta)))
    buf.write(meta)
    arrays = params.arrays()
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        buf.write(struct.pack("<H", len(name)) + name.encode("ascii"))
        buf.write(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
    for arr in arrays.values():
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_params(path) -> tuple[HeadParams, CodecSpec, FeatureExtractor]:
    data = Path(path).read_bytes()
    if data[:8] != FILE_MAGIC:
        raise ValueError(f"{path}: not a circrot parameter file")
    version, meta_len = struct.unpack_from("<II", data, 8)
    if version != FILE_VERSION:
        raise ValueError(f"{path}: unsupported file version {version}")
    pos = 16
    meta = json.loads(data[pos : pos + meta_len].decode("utf-8"))
    pos += meta_len
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    table = []
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, pos)
        name = data[pos + 2 : pos + 2 + nlen].decode("ascii")
        pos += 2 + nlen
        (ndim,) = struct.unpack_from("<I", data, pos)
        shape = struct.unpack_from(f"<{ndim}I", data, pos + 4)
        pos += 4 + 4 * ndim
        table.append((name, shape))
    arrays = {}
    for name, shape in table:
        size = int(np.prod(shape))
        arrays[name] = np.frombuffer(data, dtype="<f4", count=size, offset=pos).astype(np.float64).reshape(shape)
        pos += 4 * size
    if pos != len(data) or set(arrays) != set(PARAM_NAMES):
        raise ValueError(f"{path}: corrupt parameter file")
    params = HeadParams(**arrays, output_scale=float(meta["output_scale"]), seed=int(meta["seed"]))
    codec = codec_from_dict(meta["codec"])
    fx = FeatureExtractor(**meta["features"])
    if params.in_dim != fx.out_dim or params.out_dim != codec.output_dim:
        raise ValueError(f"{path}: tensor shapes inconsistent with metadata")
    return params, codec, fx
