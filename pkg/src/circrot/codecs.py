"""Angle codecs: target encoding, training loss with gradient, and decoding.

Five representations are supported, selected by name through
:func:`make_codec`:

``da``
    Direct angle. One output in degrees, trained with circular absolute
    error. ``circular=False`` gives the naive linear L1 loss, kept only as a
    comparison arm.
``uv``
    Unit vector ``(cos, sin)`` with an L1 loss plus a unit-norm penalty,
    decoded with the two-argument arctangent.
``psc``
    Phase-shifting coder: ``M`` cosines with evenly spaced phase offsets.
``cls``
    ``N``-way classification over equal-width bins, cross-entropy loss.
``cgd``
    Circular Gaussian soft labels over the same bins, KL-divergence loss.

Every function accepts either a single sample or a batch stacked along the
first axis. Bin ``i`` covers ``[i*w, (i+1)*w)`` with ``w = 360/N`` and is
represented by its center ``(i + 0.5)*w``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, NamedTuple

import numpy as np

from .circmath import (
    FULL_TURN,
    HALF_TURN,
    DegenerateInputError,
    angle_from_components,
    circular_distance,
    normalize,
)

METHODS = ("da", "uv", "psc", "cls", "cgd")

_DEFAULTS = {
    "da": {"circular": True},
    "uv": {"lam": 0.01},
    "psc": {"n_phases": 3, "omega": 1.0},
    "cls": {"n_bins": 360},
    "cgd": {"n_bins": 360, "sigma": 6.0},
}


@dataclass(frozen=True)
class CodecSpec:
    """An angle representation together with its hyper-parameters.

    Build instances with :func:`make_codec`, which fills in defaults and
    validates the parameters.
    """

    method: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @property
    def output_dim(self) -> int:
        if self.method == "da":
            return 1
        if self.method == "uv":
            return 2
        if self.method == "psc":
            return int(self.params["n_phases"])
        return int(self.params["n_bins"])

    @property
    def name(self) -> str:
        if self.method == "da" and not self.params["circular"]:
            return "da_naive"
        return self.method

    @property
    def bin_width(self) -> float:
        return FULL_TURN / self.params["n_bins"]

    def bin_centers(self) -> np.ndarray:
        n = int(self.params["n_bins"])
        return (np.arange(n) + 0.5) * self.bin_width

    def to_dict(self) -> dict:
        return {"method": self.method, "params": dict(self.params)}


class LossValue(NamedTuple):
    loss: float | np.ndarray
    gradient: np.ndarray


def make_codec(method: str, **params) -> CodecSpec:
    """Create a validated :class:`CodecSpec` for ``method``.

    ``"da_naive"`` is accepted as shorthand for ``make_codec("da",
    circular=False)``.
    """
    if method == "da_naive":
        method = "da"
        params.setdefault("circular", False)
    if method not in _DEFAULTS:
        raise KeyError(f"unknown method {method!r}; valid methods: {', '.join(METHODS)}")
    unknown = set(params) - set(_DEFAULTS[method])
    if unknown:
        raise TypeError(f"unexpected parameters for {method}: {sorted(unknown)}")
    merged = {**_DEFAULTS[method], **params}
    if method == "uv" and merged["lam"] < 0:
        raise ValueError("lam must be nonnegative")
    if method == "psc":
        if int(merged["n_phases"]) != merged["n_phases"] or merged["n_phases"] < 3:
            raise ValueError("n_phases must be an integer >= 3")
        if merged["omega"] <= 0:
            raise ValueError("omega must be positive")
        merged["n_phases"] = int(merged["n_phases"])
    if method in ("cls", "cgd"):
        if int(merged["n_bins"]) != merged["n_bins"] or merged["n_bins"] < 2:
            raise ValueError("n_bins must be an integer >= 2")
        merged["n_bins"] = int(merged["n_bins"])
    if method == "cgd" and merged["sigma"] <= 0:
        raise ValueError("sigma must be positive")
    if method == "da":
        merged["circular"] = bool(merged["circular"])
    return CodecSpec(method, merged)


def codec_from_dict(d: Mapping) -> CodecSpec:
    return make_codec(d["method"], **d.get("params", {}))


# registry of default codecs keyed by method name
REGISTRY: Mapping[str, CodecSpec] = MappingProxyType({m: make_codec(m) for m in METHODS})


def _phases(spec: CodecSpec) -> np.ndarray:
    m = spec.params["n_phases"]
    return 2.0 * np.pi * np.arange(m) / m


def _bin_index(spec: CodecSpec, theta: np.ndarray) -> np.ndarray:
    n = spec.params["n_bins"]
    idx = np.floor(theta / spec.bin_width).astype(np.int64)
    return np.clip(idx, 0, n - 1)


def encode(spec: CodecSpec, theta) -> np.ndarray:
    """Training target for angle(s) ``theta`` (degrees).

    Returns shape ``(output_dim,)`` for a scalar angle and
    ``(len(theta), output_dim)`` for a 1-D array.
    """
    scalar = np.ndim(theta) == 0
    t = np.atleast_1d(normalize(np.asarray(theta, dtype=np.float64)))
    method = spec.method
    if method == "da":
        out = t[:, None].copy()
    elif method == "uv":
        r = np.radians(t)
        out = np.stack([np.cos(r), np.sin(r)], axis=1)
    elif method == "psc":
        r = spec.params["omega"] * np.radians(t)
        out = np.cos(r[:, None] + _phases(spec)[None, :])
    elif method == "cls":
        out = np.zeros((t.size, spec.output_dim))
        out[np.arange(t.size), _bin_index(spec, t)] = 1.0
    else:
        d = circular_distance(spec.bin_centers()[None, :], t[:, None])
        w = np.exp(-(d**2) / (2.0 * spec.params["sigma"] ** 2))
        out = w / w.sum(axis=1, keepdims=True)
    return out[0] if scalar else out


def _check_prediction(spec: CodecSpec, prediction) -> np.ndarray:
    p = np.asarray(prediction, dtype=np.float64)
    if p.ndim not in (1, 2) or p.shape[-1] != spec.output_dim:
        raise ValueError(
            f"{spec.name} expects predictions with last dimension {spec.output_dim}, got shape {p.shape}"
        )
    if not np.all(np.isfinite(p)):
        raise ValueError("prediction contains non-finite values")
    return p


def psc_sums(spec: CodecSpec, prediction) -> tuple[np.ndarray, np.ndarray]:
    """Weighted sine and cosine sums used by the phase-shifting decoder."""
    p = np.asarray(prediction, dtype=np.float64)
    ph = _phases(spec)
    return p @ np.sin(ph), p @ np.cos(ph)


def decode(spec: CodecSpec, prediction):
    """Angle in ``[0, 360)`` represented by a network output.

    For ``cls`` and ``cgd`` the prediction may be logits or probabilities;
    only the argmax matters.
    """
    p = _check_prediction(spec, prediction)
    single = p.ndim == 1
    p2 = np.atleast_2d(p)
    method = spec.method
    if method == "da":
        out = normalize(p2[:, 0])
    elif method == "uv":
        out = angle_from_components(p2[:, 1], p2[:, 0])
    elif method == "psc":
        s_s, s_c = psc_sums(spec, p2)
        # sums at rounding level carry no direction (e.g. a constant prediction)
        if np.any(np.hypot(s_s, s_c) <= 1e-12 * np.abs(p2).sum(axis=1)):
            raise DegenerateInputError("phase sums are both zero")
        out = normalize(angle_from_components(-s_s, s_c) / spec.params["omega"])
    else:
        out = spec.bin_centers()[np.argmax(p2, axis=1)]
    return float(out[0]) if single else out


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def loss_and_grad(spec: CodecSpec, prediction, target) -> LossValue:
    """Per-sample loss and its gradient with respect to ``prediction``.

    ``target`` is the output of :func:`encode`. For a batch, ``loss`` has
    shape ``(B,)`` and ``gradient`` shape ``(B, output_dim)``; averaging over
    the batch is left to the caller.
    """
    p = _check_prediction(spec, prediction)
    t = np.asarray(target, dtype=np.float64)
    if t.shape != p.shape:
        raise ValueError(f"target shape {t.shape} does not match prediction shape {p.shape}")
    single = p.ndim == 1
    p2, t2 = np.atleast_2d(p), np.atleast_2d(t)
    method = spec.method

    if method == "da":
        if spec.params["circular"]:
            # forward difference from target to prediction, in [0, 360)
            fwd = np.mod(p2[:, 0] - t2[:, 0], FULL_TURN)
            loss = np.minimum(fwd, FULL_TURN - fwd)
            g = np.where(fwd == 0.0, 0.0, np.where(fwd <= HALF_TURN, 1.0, -1.0))
        else:
            diff = p2[:, 0] - t2[:, 0]
            loss = np.abs(diff)
            g = np.sign(diff)
        grad = g[:, None]
    elif method in ("uv", "psc"):
        diff = p2 - t2
        k = p2.shape[1]
        loss = np.abs(diff).mean(axis=1)
        grad = np.sign(diff) / k
        if method == "uv":
            lam = spec.params["lam"]
            norm = np.linalg.norm(p2, axis=1)
            loss = loss + lam * (norm - 1.0) ** 2
            safe = np.where(norm > 0.0, norm, 1.0)
            coef = np.where(norm > 0.0, 2.0 * lam * (norm - 1.0) / safe, 0.0)
            grad = grad + coef[:, None] * p2
    else:
        logp = log_softmax(p2)
        if method == "cls":
            loss = -(t2 * logp).sum(axis=1)
        else:
            # KL(target || predicted); 0 * log 0 taken as 0
            with np.errstate(divide="ignore", invalid="ignore"):
                tlogt = np.where(t2 > 0.0, t2 * np.log(np.where(t2 > 0.0, t2, 1.0)), 0.0)
            loss = np.maximum((tlogt - t2 * logp).sum(axis=1), 0.0)
        grad = np.exp(logp) - t2

    if single:
        return LossValue(float(loss[0]), grad[0])
    return LossValue(loss, grad)
