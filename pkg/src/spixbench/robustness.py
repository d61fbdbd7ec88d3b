"""Image perturbations and the degradation sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .algorithms import AlgorithmParams, segment
from .core import DatasetEntry, check_image
from .metrics import AggregateStats, MetricConfig, aggregate, evaluate_entry

KINDS = ("salt_pepper", "gaussian_noise", "box_blur", "gaussian_blur", "affine")
STOCHASTIC = ("salt_pepper", "gaussian_noise")


def _to_uint8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def salt_pepper(image: np.ndarray, p: float, seed: int = 0) -> np.ndarray:
    """Replace each pixel, all channels at once, by 0 or 255 with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    image = check_image(image)
    rng = np.random.default_rng(seed)
    hit = rng.random(image.shape[:2]) < p
    salt = rng.random(image.shape[:2]) < 0.5
    out = image.copy()
    out[hit & salt] = 255
    out[hit & ~salt] = 0
    return out


def gaussian_noise(image: np.ndarray, sigma: float, seed: int = 0) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    image = check_image(image)
    if sigma == 0:
        return image.copy()
    rng = np.random.default_rng(seed)
    return _to_uint8(image + rng.normal(0.0, sigma, size=image.shape))


def _per_channel(image, fn):
    f = image.astype(np.float64)
    if f.ndim == 2:
        return fn(f)
    return np.stack([fn(f[..., c]) for c in range(f.shape[2])], axis=2)


def box_blur(image: np.ndarray, k: int) -> np.ndarray:
    """k-by-k mean filter with replicated borders; k in {0, 1} is the identity."""
    k = int(k)
    image = check_image(image)
    if k in (0, 1):
        return image.copy()
    if k < 0 or k % 2 == 0:
        raise ValueError("box filter size must be odd")
    return _to_uint8(_per_channel(image, lambda ch: ndimage.uniform_filter(ch, size=k, mode="nearest")))


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kern = np.exp(-0.5 * (x / sigma) ** 2)
    return kern / kern.sum()


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    image = check_image(image)
    if sigma == 0:
        return image.copy()
    kern = gaussian_kernel(sigma)

    def blur(ch):
        ch = ndimage.correlate1d(ch, kern, axis=0, mode="nearest")
        return ndimage.correlate1d(ch, kern, axis=1, mode="nearest")

    return _to_uint8(_per_channel(image, blur))


def _inverse_coords(shape, scale, rotation_deg, shear, tx, ty):
    """Source coordinates for every output pixel of the forward map
    p' = R(rot) Sh(shear) S(scale) (p - c) + c + t, c the image center."""
    if scale <= 0:
        raise ValueError("scale must be > 0")
    h, w = shape
    theta = math.radians(rotation_deg)
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    sh = np.array([[1.0, shear], [0.0, 1.0]])
    fwd = rot @ sh @ (scale * np.eye(2))
    inv = np.linalg.inv(fwd)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    yy, xx = np.indices((h, w), dtype=np.float64)
    dx, dy = xx - cx - tx, yy - cy - ty
    sx = inv[0, 0] * dx + inv[0, 1] * dy + cx
    sy = inv[1, 0] * dx + inv[1, 1] * dy + cy
    return np.array([sy, sx])


def affine_transform(image, scale=1.0, rotation_deg=0.0, shear=0.0, tx=0.0, ty=0.0) -> np.ndarray:
    """Bilinear inverse-mapped resampling around the image center; edges replicate."""
    image = check_image(image)
    coords = _inverse_coords(image.shape[:2], scale, rotation_deg, shear, tx, ty)
    out = _per_channel(image, lambda ch: ndimage.map_coordinates(ch, coords, order=1, mode="nearest"))
    return _to_uint8(out)


def affine_labels(labels, scale=1.0, rotation_deg=0.0, shear=0.0, tx=0.0, ty=0.0) -> np.ndarray:
    """Same geometric map as :func:`affine_transform`, nearest-neighbour for label maps."""
    labels = np.asarray(labels)
    coords = _inverse_coords(labels.shape, scale, rotation_deg, shear, tx, ty)
    return ndimage.map_coordinates(labels, coords, order=0, mode="nearest").astype(labels.dtype)


def _affine_args(magnitude) -> tuple:
    if isinstance(magnitude, dict):
        m = magnitude
        return (m.get("scale", 1.0), m.get("rotation_deg", 0.0), m.get("shear", 0.0), m.get("tx", 0.0), m.get("ty", 0.0))
    if np.isscalar(magnitude):
        # a bare number is a rotation in degrees
        return (1.0, float(magnitude), 0.0, 0.0, 0.0)
    vals = tuple(float(v) for v in magnitude)
    if len(vals) != 5:
        raise ValueError("affine magnitude is (scale, rotation_deg, shear, tx, ty)")
    return vals


@dataclass(frozen=True)
class Perturbation:
    kind: str
    magnitude: object
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation {self.kind!r}")

    def apply(self, image: np.ndarray) -> np.ndarray:
        if self.kind == "salt_pepper":
            return salt_pepper(image, float(self.magnitude), self.seed)
        if self.kind == "gaussian_noise":
            return gaussian_noise(image, float(self.magnitude), self.seed)
        if self.kind == "box_blur":
            return box_blur(image, int(self.magnitude))
        if self.kind == "gaussian_blur":
            return gaussian_blur(image, float(self.magnitude))
        return affine_transform(image, *_affine_args(self.magnitude))

    def apply_labels(self, labels: np.ndarray) -> np.ndarray:
        if self.kind == "affine":
            return affine_labels(labels, *_affine_args(self.magnitude))
        return labels


@dataclass
class SweepRow:
    magnitude: object
    stats: AggregateStats | None
    k_raw_mean: float
    k_raw_std: float
    failures: int = 0


def robustness_sweep(
    algorithm: str | Callable,
    params: AlgorithmParams,
    entries: Sequence[DatasetEntry],
    kind: str,
    magnitudes: Sequence,
    seed: int = 0,
    config: MetricConfig = MetricConfig(),
) -> list[SweepRow]:
    """One row per magnitude: perturb, segment, evaluate against the clean ground truth.

    Stochastic perturbations use ``seed + image index`` per image.  For affine
    maps the ground truth is warped with the same parameters.
    """
    if len(magnitudes) == 0:
        raise ValueError("no magnitudes given")
    rows = []
    for mag in magnitudes:
        records, k_raw, failures = [], [], 0
        for i, entry in enumerate(entries):
            pert = Perturbation(kind, mag, seed + i)
            try:
                image = pert.apply(entry.image)
                gts = [pert.apply_labels(g) for g in entry.ground_truths]
                res = algorithm(image, params) if callable(algorithm) else segment(algorithm, image, params)
                records.append(evaluate_entry(image, gts, res.labels, config, res.runtime_ns))
                k_raw.append(res.k_raw or res.k_generated)
            except Exception:
                failures += 1
        stats = aggregate(records) if records else None
        kr = np.array(k_raw, dtype=np.float64)
        rows.append(
            SweepRow(mag, stats, float(kr.mean()) if kr.size else math.nan, float(kr.std()) if kr.size else math.nan, failures)
        )
    return rows
