"""Superpixel evaluation metrics and per-image / per-K aggregation.

All functions take ground truth ``gt`` and superpixels ``sp`` as 2-D integer
label maps of the same shape; label values need not be contiguous.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np
from scipy import ndimage

from .core import DataError, check_image, check_labels, check_same_shape

METRIC_NAMES = ("rec", "ue_np", "ue_levin", "ue_bergh", "asa", "ev", "co", "icv", "mde")
# worst case over ground truths: min for these, max for the error metrics
_HIGHER_IS_BETTER = ("rec", "asa")
_GT_ERRORS = ("ue_np", "ue_levin", "ue_bergh", "mde")


@dataclass(frozen=True)
class MetricConfig:
    recall_radius_factor: float = 0.0025
    radius_rounding: str = "nearest"

    def __post_init__(self):
        if self.recall_radius_factor <= 0:
            raise ValueError("recall_radius_factor must be > 0")
        if self.radius_rounding not in ("nearest", "ceil"):
            raise ValueError(f"unknown radius_rounding {self.radius_rounding!r}")


@dataclass
class MetricRecord:
    rec: float
    ue_np: float
    ue_levin: float
    ue_bergh: float
    asa: float
    ev: float
    co: float
    icv: float
    mde: float
    k_generated: int
    runtime_ns: int | None = None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class MetricSummary:
    mean: float
    min: float
    max: float
    std: float


@dataclass
class AggregateStats:
    metrics: dict  # name -> MetricSummary
    k_mean: float
    k_std: float
    k_max: int
    count: int

    def __getitem__(self, name: str) -> MetricSummary:
        return self.metrics[name]


def _pair(gt, sp):
    gt = check_labels(gt)
    sp = check_labels(sp)
    check_same_shape(gt, sp)
    return gt, sp


def _overlaps(gt: np.ndarray, sp: np.ndarray):
    """Sparse contingency table: (g index, s index, count) plus segment sizes."""
    _, g = np.unique(gt.ravel(), return_inverse=True)
    _, s = np.unique(sp.ravel(), return_inverse=True)
    ng, ns = int(g.max()) + 1, int(s.max()) + 1
    joint, counts = np.unique(g.astype(np.int64) * ns + s, return_counts=True)
    gi, si = np.divmod(joint, ns)
    size_g = np.bincount(g, minlength=ng)
    size_s = np.bincount(s, minlength=ns)
    return gi, si, counts, size_g, size_s


def boundary_mask(labels: np.ndarray) -> np.ndarray:
    """Pixels with a 4-neighbour of a different label. The image border does not count."""
    labels = check_labels(labels)
    mask = np.zeros(labels.shape, dtype=bool)
    h = labels[:, :-1] != labels[:, 1:]
    v = labels[:-1, :] != labels[1:, :]
    mask[:, :-1] |= h
    mask[:, 1:] |= h
    mask[:-1, :] |= v
    mask[1:, :] |= v
    return mask


def recall_radius(width: int, height: int, config: MetricConfig = MetricConfig()) -> int:
    """Matching tolerance: a fixed fraction of the image diagonal, rounded."""
    x = config.recall_radius_factor * math.hypot(width, height)
    if config.radius_rounding == "ceil":
        return int(math.ceil(x))
    return int(math.floor(x + 0.5))


def boundary_recall(gt: np.ndarray, sp: np.ndarray, r: int) -> float:
    gt, sp = _pair(gt, sp)
    bg = boundary_mask(gt)
    total = int(bg.sum())
    if total == 0:
        return 1.0
    bs = boundary_mask(sp)
    if r > 0:
        bs = ndimage.binary_dilation(bs, structure=np.ones((2 * r + 1, 2 * r + 1), dtype=bool))
    return float((bg & bs).sum()) / total


def undersegmentation_np(gt: np.ndarray, sp: np.ndarray) -> float:
    gt, sp = _pair(gt, sp)
    gi, si, n, size_g, size_s = _overlaps(gt, sp)
    return float(np.minimum(n, size_s[si] - n).sum()) / gt.size


def undersegmentation_levin(gt: np.ndarray, sp: np.ndarray) -> float:
    gt, sp = _pair(gt, sp)
    gi, si, n, size_g, size_s = _overlaps(gt, sp)
    covered = np.bincount(gi, weights=size_s[si], minlength=len(size_g))
    return float(np.mean((covered - size_g) / size_g))


def _best_overlap(gt, sp):
    gi, si, n, size_g, size_s = _overlaps(gt, sp)
    best = np.zeros(len(size_s), dtype=np.int64)
    np.maximum.at(best, si, n)
    return int(best.sum())


def undersegmentation_bergh(gt: np.ndarray, sp: np.ndarray) -> float:
    gt, sp = _pair(gt, sp)
    return float(gt.size - _best_overlap(gt, sp)) / gt.size


def asa(gt: np.ndarray, sp: np.ndarray) -> float:
    gt, sp = _pair(gt, sp)
    return float(_best_overlap(gt, sp)) / gt.size


def _float_image(image) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[..., None]
    return image


def _segment_means(image: np.ndarray, s: np.ndarray, ns: int, size_s: np.ndarray) -> np.ndarray:
    return np.stack(
        [np.bincount(s, weights=image[..., c].ravel(), minlength=ns) for c in range(image.shape[2])],
        axis=1,
    ) / size_s[:, None]


def explained_variation(image: np.ndarray, sp: np.ndarray) -> float:
    sp = check_labels(sp)
    check_same_shape(image, sp)
    img = _float_image(image)
    _, s = np.unique(sp.ravel(), return_inverse=True)
    ns = int(s.max()) + 1
    size_s = np.bincount(s, minlength=ns)
    mu_img = img.reshape(-1, img.shape[2]).mean(axis=0)
    total = float(((img - mu_img) ** 2).sum())
    if total == 0.0:
        return 1.0
    mu = _segment_means(img, s, ns, size_s)
    explained = float((size_s * ((mu - mu_img) ** 2).sum(axis=1)).sum())
    return min(1.0, explained / total)


def _areas_perimeters(sp: np.ndarray):
    _, s = np.unique(sp.ravel(), return_inverse=True)
    s = s.reshape(sp.shape)
    ns = int(s.max()) + 1
    area = np.bincount(s.ravel(), minlength=ns)
    perim = np.zeros(ns, dtype=np.int64)
    for a, b in ((s[:, :-1], s[:, 1:]), (s[:-1, :], s[1:, :])):
        d = a != b
        perim += np.bincount(a[d], minlength=ns) + np.bincount(b[d], minlength=ns)
    for edge in (s[0, :], s[-1, :], s[:, 0], s[:, -1]):
        perim += np.bincount(edge, minlength=ns)
    return area, perim


def compactness(sp: np.ndarray) -> float:
    """Size-weighted isoperimetric quotient 4*pi*A/P**2, each term capped at 1."""
    sp = check_labels(sp)
    area, perim = _areas_perimeters(sp)
    q = np.minimum(1.0, 4.0 * np.pi * area / perim.astype(np.float64) ** 2)
    return float((area * q).sum()) / sp.size


def intra_cluster_variation(image: np.ndarray, sp: np.ndarray) -> float:
    sp = check_labels(sp)
    check_same_shape(image, sp)
    img = _float_image(image)
    _, s = np.unique(sp.ravel(), return_inverse=True)
    ns = int(s.max()) + 1
    size_s = np.bincount(s, minlength=ns)
    mu = _segment_means(img, s, ns, size_s)
    resid = ((img.reshape(-1, img.shape[2]) - mu[s]) ** 2).sum(axis=1)
    ss = np.bincount(s, weights=resid, minlength=ns)
    return float(np.mean(np.sqrt(ss) / size_s))


def mean_distance_to_edge(gt: np.ndarray, sp: np.ndarray) -> float:
    """Sum over ground-truth boundary pixels of the Euclidean distance to the
    nearest superpixel boundary pixel, divided by the pixel count.

    Without any superpixel boundary, every ground-truth boundary pixel is
    charged the largest pixel-to-pixel distance, sqrt((W-1)**2 + (H-1)**2).
    """
    gt, sp = _pair(gt, sp)
    bg = boundary_mask(gt)
    if not bg.any():
        return 0.0
    bs = boundary_mask(sp)
    if not bs.any():
        h, w = gt.shape
        return float(bg.sum()) * math.hypot(w - 1, h - 1) / gt.size
    dist = ndimage.distance_transform_edt(~bs)
    return float(dist[bg].sum()) / gt.size


def evaluate_entry(
    image: np.ndarray,
    ground_truths: Sequence[np.ndarray],
    sp: np.ndarray,
    config: MetricConfig = MetricConfig(),
    runtime_ns: int | None = None,
) -> MetricRecord:
    """All metrics for one segmentation, taking the worst value over ground truths."""
    if len(ground_truths) == 0:
        raise DataError("at least one ground truth is required")
    image = check_image(image)
    sp = check_labels(sp)
    check_same_shape(image, sp, *ground_truths)
    h, w = sp.shape
    r = recall_radius(w, h, config)
    per_gt = [
        {
            "rec": boundary_recall(g, sp, r),
            "ue_np": undersegmentation_np(g, sp),
            "ue_levin": undersegmentation_levin(g, sp),
            "ue_bergh": undersegmentation_bergh(g, sp),
            "asa": asa(g, sp),
            "mde": mean_distance_to_edge(g, sp),
        }
        for g in ground_truths
    ]
    worst = {}
    for name in _HIGHER_IS_BETTER:
        worst[name] = min(d[name] for d in per_gt)
    for name in _GT_ERRORS:
        worst[name] = max(d[name] for d in per_gt)
    return MetricRecord(
        **worst,
        ev=explained_variation(image, sp),
        co=compactness(sp),
        icv=intra_cluster_variation(image, sp),
        k_generated=int(np.unique(sp).size),
        runtime_ns=runtime_ns,
    )


def _summary(values) -> MetricSummary:
    v = np.asarray(values, dtype=np.float64)
    mean = float(v.mean())
    # keep min <= mean <= max under float round-off
    lo, hi = float(v.min()), float(v.max())
    return MetricSummary(min(max(mean, lo), hi), lo, hi, float(v.std()))


def aggregate(records: Sequence[MetricRecord]) -> AggregateStats:
    """Mean/min/max/population-std per metric plus superpixel-count statistics."""
    if not records:
        raise ValueError("cannot aggregate an empty list of records")
    metrics = {name: _summary([getattr(r, name) for r in records]) for name in METRIC_NAMES}
    ks = np.array([r.k_generated for r in records], dtype=np.float64)
    return AggregateStats(metrics, float(ks.mean()), float(ks.std()), int(ks.max()), len(records))


RECORD_FIELDS = tuple(f.name for f in fields(MetricRecord))
