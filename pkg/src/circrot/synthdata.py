"""Deterministic synthetic scenes with an unambiguous upright direction.

Every base image is brighter at the top than at the bottom, so the
orientation of any rotated crop is recoverable from its content. Scenes are
pure functions of their seed; see :mod:`circrot.rng` for the generators.

Split protocol
--------------
``build_splits`` draws a pool of ``n_train`` scenes from ``split_seed`` and
holds out a fraction of them for validation. Validation angles are frozen by
``split_seed``; test scenes come from ``split_seed`` as well, but test angles
come from ``test_seed`` only, so changing the test seed re-rotates the same
test scenes. Training scenes carry no angle: the trainer draws a fresh one
every epoch.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import rng
from .circmath import normalize
from .geometry import rotate_and_crop
from .images import read_image, write_png

STYLES = ("gradient_horizon", "textured_horizon", "arrow_marker")
SPLITS = ("train", "val", "test")
MANIFEST_HEADER = ("path", "angle_deg", "scene_seed")

# stream tags keep independent random streams apart
_TAG_SCENE_POOL = 1
_TAG_SPLIT_PERM = 2
_TAG_VAL_ANGLE = 3
_TAG_TEST_SCENE = 4
_TAG_TEST_ANGLE = 5
_TAG_LAYOUT = 11
_TAG_NOISE = 12


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    size: int = 96
    style: str = "gradient_horizon"
    noise_std: float = 0.0

    def __post_init__(self):
        if self.size < 32:
            raise ValueError("scene size must be at least 32 pixels")
        if self.style not in STYLES:
            raise ValueError(f"unknown style {self.style!r}; expected one of {STYLES}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")


@dataclass(frozen=True)
class Sample:
    image: np.ndarray
    true_angle: float
    scene_seed: int


def _horizon_profile(n: int, g: np.random.Generator) -> tuple[np.ndarray, int]:
    """Row luminance: a downward ramp with a downward step at the horizon."""
    rows = np.arange(n) / (n - 1)
    top = g.uniform(0.8, 0.95)
    bottom = g.uniform(0.05, 0.2)
    horizon = int(round(g.uniform(0.35, 0.65) * (n - 1)))
    step = g.uniform(0.1, 0.25)
    ramp = top - (top - bottom - step) * rows
    ramp[horizon:] -= step
    return ramp, horizon


def _smooth_noise(g: np.random.Generator, shape, scale: int) -> np.ndarray:
    coarse = g.standard_normal((shape[0] // scale + 2, shape[1] // scale + 2))
    rr = np.linspace(0, coarse.shape[0] - 1.001, shape[0])
    cc = np.linspace(0, coarse.shape[1] - 1.001, shape[1])
    r0, c0 = rr.astype(int), cc.astype(int)
    fr, fc = (rr - r0)[:, None], (cc - c0)[None, :]
    a = coarse[r0][:, c0]
    b = coarse[r0][:, c0 + 1]
    c = coarse[r0 + 1][:, c0]
    d = coarse[r0 + 1][:, c0 + 1]
    return (1 - fr) * ((1 - fc) * a + fc * b) + fr * ((1 - fc) * c + fc * d)


def render_base(scene: SceneSpec) -> np.ndarray:
    """Render the upright grayscale base image for ``scene``.

    ``gradient_horizon`` images are column-constant before noise; the other
    styles add texture (``textured_horizon``) or an upward arrow
    (``arrow_marker``) on top of the same darkening-downward backdrop.
    """
    n = scene.size
    g = rng.generator(scene.seed, _TAG_LAYOUT)
    profile, horizon = _horizon_profile(n, g)
    img = np.repeat(profile[:, None], n, axis=1)

    if scene.style == "textured_horizon":
        clouds = _smooth_noise(g, (n, n), max(4, n // 8))
        grass = _smooth_noise(g, (n, n), 2)
        img[:horizon] += 0.05 * clouds[:horizon]
        img[horizon:] += 0.08 * grass[horizon:]
    elif scene.style == "arrow_marker":
        cx = g.uniform(0.3, 0.7) * n
        half = g.uniform(0.12, 0.2) * n
        top_y = g.uniform(0.2, 0.35) * n
        yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
        head = (yy >= top_y) & (yy <= top_y + half) & (np.abs(xx - cx) <= (yy - top_y))
        shaft = (yy > top_y + half) & (yy <= top_y + 3 * half) & (np.abs(xx - cx) <= half / 3)
        img[head | shaft] = 0.97

    if scene.noise_std > 0:
        img = img + rng.generator(scene.seed, _TAG_NOISE).normal(0.0, scene.noise_std, img.shape)
    return np.clip(img, 0.0, 1.0)


def make_sample(scene: SceneSpec, theta: float, out_size: int = 64) -> Sample:
    theta = normalize(theta)
    return Sample(rotate_and_crop(render_base(scene), theta, out_size), theta, scene.seed)


def gradient_orientation_estimate(img) -> float:
    """Angle recovered from the mean luminance gradient (closed-form oracle).

    The upright image gets brighter upward, so the mean gradient points at
    90 degrees in math orientation; rotating by ``theta`` turns it to
    ``90 + theta``.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr.mean(axis=2)
    d_row, d_col = np.gradient(arr)
    gx, gy_up = d_col.mean(), -d_row.mean()
    return normalize(np.degrees(np.arctan2(gy_up, gx)) - 90.0)


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    angle_deg: float
    scene_seed: int


@dataclass
class Manifest:
    """Image list of one split.

    ``entries`` reference images relative to ``root``. When ``root`` is None
    the images are rendered on demand from the scene seeds; otherwise they
    are read from disk. Training entries point at upright base images.
    """

    split: str
    entries: list[ManifestEntry]
    size: int = 96
    style: str = "gradient_horizon"
    noise_std: float = 0.0
    out_size: int = 64
    root: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}")
        paths = [e.path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest paths must be unique")
        for e in self.entries:
            if not 0.0 <= e.angle_deg < 360.0:
                raise ValueError(f"angle {e.angle_deg} outside [0, 360)")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def angles(self) -> np.ndarray:
        return np.array([e.angle_deg for e in self.entries])

    @property
    def scene_seeds(self) -> list[int]:
        return [e.scene_seed for e in self.entries]

    def scene(self, i: int) -> SceneSpec:
        return SceneSpec(self.entries[i].scene_seed, self.size, self.style, self.noise_std)

    def base_image(self, i: int) -> np.ndarray:
        """Upright base image of entry ``i`` (training manifests)."""
        if self.root is not None and self.split == "train":
            return read_image(self.root / self.entries[i].path)
        return render_base(self.scene(i))

    def image(self, i: int) -> np.ndarray:
        """The stored image of entry ``i``: the rotated crop for val/test."""
        if self.root is not None:
            return read_image(self.root / self.entries[i].path)
        if self.split == "train":
            return render_base(self.scene(i))
        return make_sample(self.scene(i), self.entries[i].angle_deg, self.out_size).image

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for e in self.entries:
            w.writerow([e.path, repr(float(e.angle_deg)), str(e.scene_seed)])
        return buf.getvalue()


def _params(m: Manifest) -> dict:
    return {"size": m.size, "style": m.style, "noise_std": m.noise_std, "out_size": m.out_size}


def build_splits(
    n_train: int,
    n_val_fraction: float,
    n_test: int,
    split_seed: int,
    test_seed: int,
    out_size: int = 64,
    *,
    size: int = 96,
    style: str = "gradient_horizon",
    noise_std: float = 0.0,
) -> tuple[Manifest, Manifest, Manifest]:
    """Train, validation and test manifests for a synthetic dataset.

    ``n_train`` scenes are split into ``n_train - round(n_train *
    n_val_fraction)`` training and the rest validation scenes.
    """
    if n_train <= 0 or n_test <= 0:
        raise ValueError("n_train and n_test must be positive")
    if not 0.0 < n_val_fraction < 1.0:
        raise ValueError("n_val_fraction must be in (0, 1)")
    n_val = int(round(n_train * n_val_fraction))
    if n_val < 1 or n_val >= n_train:
        raise ValueError(f"n_train={n_train} is too small for a {n_val_fraction} validation fraction")
    SceneSpec(0, size, style, noise_std)  # validates scene parameters

    pool = [rng.derive_seed(split_seed, _TAG_SCENE_POOL, i) for i in range(n_train)]
    order = rng.generator(split_seed, _TAG_SPLIT_PERM).permutation(n_train)
    val_idx = sorted(order[:n_val].tolist())
    train_idx = sorted(order[n_val:].tolist())
    test_scenes = [rng.derive_seed(split_seed, _TAG_TEST_SCENE, i) for i in range(n_test)]
    if len(set(pool) | set(test_scenes)) != n_train + n_test:
        raise RuntimeError("scene seed collision")

    common = dict(size=size, style=style, noise_std=noise_std, out_size=out_size)
    train = Manifest(
        "train",
        [ManifestEntry(f"train/{k:06d}.png", 0.0, pool[i]) for k, i in enumerate(train_idx)],
        **common,
    )
    val = Manifest(
        "val",
        [
            ManifestEntry(f"val/{k:06d}.png", rng.uniform_angle(split_seed, _TAG_VAL_ANGLE, i), pool[i])
            for k, i in enumerate(val_idx)
        ],
        **common,
    )
    test = Manifest(
        "test",
        [
            ManifestEntry(f"test/{k:06d}.png", rng.uniform_angle(test_seed, _TAG_TEST_ANGLE, k), s)
            for k, s in enumerate(test_scenes)
        ],
        **common,
    )
    return train, val, test


def write_dataset(root, manifests, metadata: dict | None = None) -> Path:
    """Render every image of ``manifests`` to PNG under ``root`` and write CSVs.

    Writes ``<split>.csv``, ``<split>/NNNNNN.png`` and ``dataset.json``
    (generation parameters plus ``metadata``).
    """
    root = Path(root)
    info = {"format": "circrot-dataset", "version": 1, "splits": {}}
    for m in manifests:
        src = replace(m, root=None)
        (root / m.split).mkdir(parents=True, exist_ok=True)
        for i, e in enumerate(m.entries):
            write_png(root / e.path, src.image(i))
        (root / f"{m.split}.csv").write_text(m.to_csv())
        info["splits"][m.split] = {"count": len(m), **_params(m)}
    info.update(metadata or {})
    (root / "dataset.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return root


def read_manifest(root, split: str) -> Manifest:
    """Load ``<root>/<split>.csv``; images will be read from ``root``."""
    root = Path(root)
    path = root / f"{split}.csv"
    if not path.exists():
        raise FileNotFoundError(f"missing manifest {path}")
    info = json.loads((root / "dataset.json").read_text())["splits"].get(split, {})
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != MANIFEST_HEADER:
            raise ValueError(f"{path}: expected header {','.join(MANIFEST_HEADER)}")
        entries = [ManifestEntry(p, float(a), int(s)) for p, a, s in reader]
    params = {k: info[k] for k in ("size", "style", "noise_std", "out_size") if k in info}
    return Manifest(split, entries, root=root, **params)
