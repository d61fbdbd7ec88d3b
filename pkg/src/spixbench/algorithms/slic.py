"""Clustering-based reference algorithm: SLIC-style local k-means in color + position."""

from __future__ import annotations

import math

import numba
import numpy as np

from ..connectivity import enforce_connectivity
from ..core import check_image, num_labels, to_color_space
from .base import AlgorithmParams, SegmentationResult, Stopwatch, default_min_size, grid_seeds


@numba.njit(cache=True)
def _assign(img, centers, step, m, previous):
    h, w, nc = img.shape
    labels = np.full((h, w), -1, dtype=np.int64)
    best = np.full((h, w), np.inf)
    wspace = (m / step) ** 2
    for c in range(centers.shape[0]):
        cy = centers[c, 0]
        cx = centers[c, 1]
        y0 = max(0, int(math.ceil(cy - step)))
        y1 = min(h - 1, int(math.floor(cy + step)))
        x0 = max(0, int(math.ceil(cx - step)))
        x1 = min(w - 1, int(math.floor(cx + step)))
        for y in range(y0, y1 + 1):
            for x in range(x0, x1 + 1):
                dc = 0.0
                for k in range(nc):
                    t = img[y, x, k] - centers[c, 2 + k]
                    dc += t * t
                ds = (y - cy) ** 2 + (x - cx) ** 2
                d = dc + wspace * ds
                # strict: lower center index wins ties
                if d < best[y, x]:
                    best[y, x] = d
                    labels[y, x] = c
    # the current center stays a candidate even if it drifted out of the window,
    # so reassignment never increases the objective
    for y in range(h):
        for x in range(w):
            p = previous[y, x]
            if p < 0 or p == labels[y, x]:
                continue
            dc = 0.0
            for k in range(nc):
                t = img[y, x, k] - centers[p, 2 + k]
                dc += t * t
            d = dc + wspace * ((y - centers[p, 0]) ** 2 + (x - centers[p, 1]) ** 2)
            if d < best[y, x] or (d == best[y, x] and p < labels[y, x]):
                best[y, x] = d
                labels[y, x] = p
    # pixels outside every window go to the spatially nearest center
    for y in range(h):
        for x in range(w):
            if labels[y, x] < 0:
                bd = np.inf
                for c in range(centers.shape[0]):
                    ds = (y - centers[c, 0]) ** 2 + (x - centers[c, 1]) ** 2
                    if ds < bd:
                        bd = ds
                        labels[y, x] = c
    return labels


def _update(img: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> np.ndarray:
    h, w, nc = img.shape
    n = centers.shape[0]
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=n).astype(np.float64)
    yy, xx = np.indices((h, w))
    sums = [np.bincount(flat, weights=yy.ravel(), minlength=n), np.bincount(flat, weights=xx.ravel(), minlength=n)]
    sums += [np.bincount(flat, weights=img[..., k].ravel(), minlength=n) for k in range(nc)]
    sums = np.stack(sums, axis=1)
    out = centers.copy()
    nz = counts > 0
    out[nz] = sums[nz] / counts[nz, None]
    return out


def objective(img: np.ndarray, labels: np.ndarray, centers: np.ndarray, step: float, m: float) -> float:
    """Sum of squared SLIC distances of every pixel to its assigned center."""
    h, w, nc = img.shape
    c = centers[labels]
    yy, xx = np.indices((h, w))
    dc = ((img - c[..., 2:]) ** 2).sum(axis=2)
    ds = (yy - c[..., 0]) ** 2 + (xx - c[..., 1]) ** 2
    return float((dc + (m / step) ** 2 * ds).sum())


def initial_centers(img: np.ndarray, k: int) -> np.ndarray:
    """Grid seeds moved to the lowest-gradient pixel of their 3x3 neighbourhood.

    Ties resolve to the first pixel in raster order of the neighbourhood.
    """
    h, w, nc = img.shape
    pad = np.pad(img, ((1, 1), (1, 1), (0, 0)), mode="edge")
    grad = ((pad[1:-1, 2:] - pad[1:-1, :-2]) ** 2).sum(axis=2) + ((pad[2:, 1:-1] - pad[:-2, 1:-1]) ** 2).sum(axis=2)
    centers = []
    for x, y in grid_seeds(w, h, k):
        y0, y1 = max(0, y - 1), min(h, y + 2)
        x0, x1 = max(0, x - 1), min(w, x + 2)
        iy, ix = np.unravel_index(np.argmin(grad[y0:y1, x0:x1]), (y1 - y0, x1 - x0))
        py, px = y0 + iy, x0 + ix
        centers.append([py, px, *img[py, px]])
    return np.array(centers, dtype=np.float64)


def slic_raw(img: np.ndarray, params: AlgorithmParams, trace: list | None = None) -> np.ndarray:
    """Run the clustering on a float working image ``(H, W, C)``.

    When ``trace`` is a list, the objective is appended after every
    assignment and every center update.
    """
    h, w, _ = img.shape
    k = int(params.k)
    step = math.sqrt(h * w / k)
    m = float(params.compactness)
    centers = initial_centers(img, k)
    labels = np.full((h, w), -1, dtype=np.int64)
    for _ in range(int(params.iterations)):
        labels = _assign(img, centers, step, m, labels)
        if trace is not None:
            trace.append(objective(img, labels, centers, step, m))
        centers = _update(img, labels, centers)
        if trace is not None:
            trace.append(objective(img, labels, centers, step, m))
    return labels


def slic_segment(image: np.ndarray, params: AlgorithmParams) -> SegmentationResult:
    image = check_image(image)
    h, w = image.shape[:2]
    if params.k > h * w:
        raise ValueError(f"k={params.k} exceeds pixel count {h * w}")
    watch = Stopwatch()
    with watch.running():
        img = to_color_space(image, params.space("lab"))
        raw = slic_raw(img, params)
    min_size = int(params.extra.get("min_size", default_min_size(w, h, params.k)))
    labels = enforce_connectivity(raw, min_size)
    return SegmentationResult(labels, num_labels(labels), watch.elapsed_ns, num_labels(raw))
