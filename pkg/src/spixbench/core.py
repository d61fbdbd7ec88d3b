"""Raster types, label map I/O, color conversion and the synthetic dataset generator.

Images are plain numpy arrays: ``(H, W)`` for grayscale or ``(H, W, 3)`` for RGB,
``uint8``.  Label maps are ``(H, W)`` integer arrays.  Nothing here mutates its
inputs.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image as PILImage


class DataError(ValueError):
    """Malformed or inconsistent input data."""


# ---------------------------------------------------------------------------
# Validation


def check_image(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim == 3 and image.shape[2] == 1:
        image = image[:, :, 0]
    if image.ndim not in (2, 3) or (image.ndim == 3 and image.shape[2] != 3):
        raise DataError(f"image must be HxW or HxWx3, got shape {image.shape}")
    if image.shape[0] < 2 or image.shape[1] < 2:
        raise DataError(f"image must be at least 2x2, got {image.shape[:2]}")
    return image


def check_labels(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise DataError(f"label map must be 2-D, got shape {labels.shape}")
    if labels.size and not np.issubdtype(labels.dtype, np.integer):
        if not np.all(labels == np.round(labels)):
            raise DataError("label map must hold integers")
        labels = labels.astype(np.int64)
    if labels.size and labels.min() < 0:
        raise DataError("label map contains negative labels")
    return labels


def check_same_shape(*arrays: np.ndarray) -> None:
    shapes = {tuple(np.shape(a)[:2]) for a in arrays}
    if len(shapes) > 1:
        raise DataError(f"dimension mismatch: {sorted(shapes)}")


def channels(image: np.ndarray) -> int:
    return 1 if image.ndim == 2 else image.shape[2]


def canonicalize(labels: np.ndarray) -> np.ndarray:
    """Relabel to 0..K-1, numbered by raster-scan order of first occurrence."""
    labels = np.asarray(labels)
    flat = labels.ravel()
    values, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.empty(len(values), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(values))
    return rank[inverse].reshape(labels.shape)


def num_labels(labels: np.ndarray) -> int:
    return int(np.unique(labels).size)


@dataclass(frozen=True)
class DatasetEntry:
    id: str
    image: np.ndarray
    ground_truths: list = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(self, "image", check_image(self.image))
        if not self.ground_truths:
            raise DataError(f"entry {self.id!r} has no ground truth")
        gts = [check_labels(g) for g in self.ground_truths]
        for g in gts:
            if g.shape != self.image.shape[:2]:
                raise DataError(
                    f"entry {self.id!r}: ground truth {g.shape} does not match image "
                    f"{self.image.shape[:2]}"
                )
        object.__setattr__(self, "ground_truths", gts)


# ---------------------------------------------------------------------------
# Label map encoding


def decode_label_map(payload: bytes, format: str, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Parse a label map from ``png16`` or ``csv`` bytes.

    ``shape`` is an optional declared ``(height, width)``; a mismatch raises.
    """
    if format == "csv":
        try:
            text = payload.decode("ascii")
        except UnicodeDecodeError as exc:
            raise DataError("label CSV is not ASCII") from exc
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if not rows:
            raise DataError("empty label CSV")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise DataError("ragged label CSV")
        try:
            labels = np.array([[int(v) for v in r] for r in rows], dtype=np.int64)
        except ValueError as exc:
            raise DataError(f"non-integer value in label CSV: {exc}") from exc
        if labels.min() < 0:
            raise DataError("negative label in CSV")
    elif format == "png16" or format == "png":
        try:
            with PILImage.open(io.BytesIO(payload)) as im:
                im.load()
                if im.mode not in ("I;16", "I;16B", "I", "L", "P", "1"):
                    raise DataError(f"label PNG must be single-channel, got mode {im.mode}")
                labels = np.array(im).astype(np.int64)
        except DataError:
            raise
        except Exception as exc:
            raise DataError(f"unreadable label PNG: {exc}") from exc
        if labels.ndim != 2:
            raise DataError("label PNG must be single-channel")
    else:
        raise DataError(f"unknown label map format {format!r}")
    if shape is not None and labels.shape != tuple(shape):
        raise DataError(f"declared shape {tuple(shape)} but payload is {labels.shape}")
    return labels


def encode_label_map(labels: np.ndarray, format: str) -> bytes:
    labels = check_labels(labels)
    if format == "csv":
        return "\n".join(",".join(str(int(v)) for v in row) for row in labels).encode("ascii")
    if format == "png16" or format == "png":
        if labels.max(initial=0) > 65535:
            raise DataError("labels above 65535 cannot be stored as 16-bit PNG")
        buf = io.BytesIO()
        PILImage.fromarray(labels.astype(np.uint16)).save(buf, format="PNG")
        return buf.getvalue()
    raise DataError(f"unknown label map format {format!r}")


def read_label_map(path: str | os.PathLike) -> np.ndarray:
    path = Path(path)
    fmt = "csv" if path.suffix.lower() == ".csv" else "png16"
    return decode_label_map(path.read_bytes(), fmt)


def write_label_map(path: str | os.PathLike, labels: np.ndarray) -> None:
    path = Path(path)
    fmt = "csv" if path.suffix.lower() == ".csv" else "png16"
    path.write_bytes(encode_label_map(labels, fmt))


def read_image(path: str | os.PathLike) -> np.ndarray:
    with PILImage.open(path) as im:
        if im.mode in ("L", "I;16", "I"):
            arr = np.array(im.convert("L"))
        else:
            arr = np.array(im.convert("RGB"))
    return check_image(arr)


def write_image(path: str | os.PathLike, image: np.ndarray) -> None:
    PILImage.fromarray(np.asarray(image, dtype=np.uint8)).save(path, format="PNG")


# ---------------------------------------------------------------------------
# Dataset layout: <root>/images/<id>.png, <root>/gt/<id>/<k>.png|csv


def load_dataset(root: str | os.PathLike) -> list[DatasetEntry]:
    root = Path(root)
    img_dir = root / "images"
    if not img_dir.is_dir():
        raise DataError(f"{root} has no images/ directory")
    entries = []
    for img_path in sorted(img_dir.glob("*.png")):
        ident = img_path.stem
        gt_dir = root / "gt" / ident
        gt_files = {}
        if gt_dir.is_dir():
            for p in gt_dir.iterdir():
                if p.suffix.lower() in (".png", ".csv") and p.stem.isdigit():
                    gt_files[int(p.stem)] = p
        if not gt_files:
            raise DataError(f"no ground truth for image {ident!r}")
        if sorted(gt_files) != list(range(len(gt_files))):
            raise DataError(f"ground truths for {ident!r} are not numbered 0..n-1")
        gts = [read_label_map(gt_files[k]) for k in range(len(gt_files))]
        entries.append(DatasetEntry(ident, read_image(img_path), gts))
    return entries


def save_dataset(root: str | os.PathLike, entries: Sequence[DatasetEntry], gt_format: str = "png") -> None:
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "gt").mkdir(exist_ok=True)
    for e in entries:
        write_image(root / "images" / f"{e.id}.png", e.image)
        gdir = root / "gt" / e.id
        gdir.mkdir(exist_ok=True)
        for k, g in enumerate(e.ground_truths):
            write_label_map(gdir / f"{k}.{gt_format}", g)


# ---------------------------------------------------------------------------
# Color

_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
# D65 white = XYZ of sRGB (1, 1, 1), so white maps to a = b = 0.
_D65 = _SRGB_TO_XYZ.sum(axis=1)


def rgb_to_lab(image: np.ndarray) -> np.ndarray:
    """sRGB (8-bit) to CIE-Lab under D65. Returns float64 ``(H, W, 3)``."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DataError("rgb_to_lab needs a 3-channel image")
    c = image.astype(np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _SRGB_TO_XYZ.T / _D65
    delta = 6.0 / 29.0
    f = np.where(xyz > delta**3, np.cbrt(xyz), xyz / (3 * delta**2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def rgb_to_gray(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DataError("rgb_to_gray needs a 3-channel image")
    rgb = image.astype(np.float64)
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def to_color_space(image: np.ndarray, space: str) -> np.ndarray:
    """Float working copy of ``image`` in ``rgb``, ``lab`` or ``gray``; always 3-D."""
    image = check_image(image)
    if space == "rgb":
        out = image.astype(np.float64)
    elif space == "lab":
        out = rgb_to_lab(image) if image.ndim == 3 else rgb_to_lab(np.repeat(image[..., None], 3, axis=2))
    elif space == "gray":
        out = (rgb_to_gray(image) if image.ndim == 3 else image).astype(np.float64)
    else:
        raise ValueError(f"unknown color space {space!r}")
    return out if out.ndim == 3 else out[..., None]


# ---------------------------------------------------------------------------
# Synthetic data


@dataclass(frozen=True)
class SyntheticSpec:
    width: int = 160
    height: int = 120
    num_segments: int = 12
    color_contrast: float = 60.0
    noise_sigma: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.num_segments < 2:
            raise DataError("num_segments must be >= 2")
        if self.width < 2 or self.height < 2:
            raise DataError("synthetic images must be at least 2x2")
        if self.num_segments > self.width * self.height:
            raise DataError("more segments than pixels")
        if not 0 <= self.color_contrast <= 255:
            raise DataError("color_contrast must lie in [0, 255]")
        if self.noise_sigma < 0:
            raise DataError("noise_sigma must be >= 0")


def _adjacent_pairs(labels: np.ndarray) -> set[tuple[int, int]]:
    pairs = set()
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        diff = a != b
        for x, y in zip(a[diff].tolist(), b[diff].tolist()):
            pairs.add((min(x, y), max(x, y)))
    return pairs


def _voronoi(sites: np.ndarray, height: int, width: int) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width]
    best = np.full((height, width), np.inf)
    labels = np.zeros((height, width), dtype=np.int64)
    # Strict comparison keeps the lowest site index on ties.
    for i, (sy, sx) in enumerate(sites):
        d = (yy - sy) ** 2 + (xx - sx) ** 2
        closer = d < best
        best[closer] = d[closer]
        labels[closer] = i
    return labels


def _repair_connectivity(labels: np.ndarray, sites: np.ndarray) -> np.ndarray:
    """Hand pixels cut off from their own site to an adjacent cell."""
    from scipy import ndimage

    labels = labels.copy()
    four = ndimage.generate_binary_structure(2, 1)
    while True:
        stray = np.zeros(labels.shape, dtype=bool)
        for i, (sy, sx) in enumerate(sites):
            comp, n = ndimage.label(labels == i, structure=four)
            if n > 1:
                stray |= (comp > 0) & (comp != comp[sy, sx])
        if not stray.any():
            return labels
        for y, x in zip(*np.nonzero(stray)):
            for dy, dx in ((-1, 0), (0, -1), (0, 1), (1, 0)):
                ny, nx = y + dy, x + dx
                if 0 <= ny < labels.shape[0] and 0 <= nx < labels.shape[1] and labels[ny, nx] != labels[y, x]:
                    labels[y, x] = labels[ny, nx]
                    break


def _pick_colors(n: int, adjacent: set, contrast: float, rng: np.random.Generator) -> np.ndarray:
    neighbors = {i: set() for i in range(n)}
    for a, b in adjacent:
        neighbors[a].add(b)
        neighbors[b].add(a)
    colors = np.zeros((n, 3), dtype=np.int64)
    corners = np.array([[r, g, b] for r in (0, 255) for g in (0, 255) for b in (0, 255)])

    def ok(c, i):
        return all(np.abs(colors[j] - c).max() >= contrast for j in neighbors[i] if j < i)

    for i in range(n):
        for _ in range(200):
            c = rng.integers(0, 256, size=3)
            if ok(c, i):
                break
        else:
            for c in corners:
                if ok(c, i):
                    break
            else:
                raise DataError("could not find colors satisfying color_contrast")
        colors[i] = c
    return colors


def generate_synthetic_entry(spec: SyntheticSpec, ident: str | None = None) -> DatasetEntry:
    """Voronoi ground truth with per-cell flat colors plus Gaussian noise.

    Deterministic in ``spec.seed``.  Neighbouring cells differ by at least
    ``color_contrast`` in some channel.
    """
    rng = np.random.default_rng(spec.seed)
    flat = rng.choice(spec.width * spec.height, size=spec.num_segments, replace=False)
    sites = np.stack(np.unravel_index(flat, (spec.height, spec.width)), axis=1)
    gt = _repair_connectivity(_voronoi(sites, spec.height, spec.width), sites)
    colors = _pick_colors(spec.num_segments, _adjacent_pairs(gt), spec.color_contrast, rng)
    image = colors[gt].astype(np.float64)
    if spec.noise_sigma > 0:
        image = image + rng.normal(0.0, spec.noise_sigma, size=image.shape)
    image = np.clip(np.floor(image + 0.5), 0, 255).astype(np.uint8)
    return DatasetEntry(ident or f"syn_{spec.seed}", image, [gt])


def synthetic_suite(count: int = 10, seed: int = 0, **spec_fields) -> list[DatasetEntry]:
    """``count`` synthetic entries with seeds ``seed, seed+1, ...``."""
    return [
        generate_synthetic_entry(SyntheticSpec(seed=seed + i, **spec_fields), ident=f"syn{i:04d}")
        for i in range(count)
    ]
