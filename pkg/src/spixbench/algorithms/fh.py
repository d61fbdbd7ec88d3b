"""Graph-based reference algorithm (Felzenszwalb-Huttenlocher style merging on the 4-neighbour grid)."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..connectivity import enforce_connectivity
from ..core import check_image, num_labels, to_color_space
from .base import AlgorithmParams, SegmentationResult, Stopwatch


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n
        self.internal = [0.0] * n

    def find(self, i):
        parent = self.parent
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    def union(self, a, b, w):
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        self.internal[a] = w
        return a


def grid_edges(img: np.ndarray):
    """4-neighbour edges ``(a, b, weight)`` ordered by pixel, right edge before down edge."""
    h, w, _ = img.shape
    idx = np.arange(h * w).reshape(h, w)
    a = np.full((h, w, 2), -1, dtype=np.int64)
    b = np.full((h, w, 2), -1, dtype=np.int64)
    wt = np.zeros((h, w, 2))
    a[:, :-1, 0], b[:, :-1, 0] = idx[:, :-1], idx[:, 1:]
    wt[:, :-1, 0] = np.sqrt(((img[:, 1:] - img[:, :-1]) ** 2).sum(axis=2))
    a[:-1, :, 1], b[:-1, :, 1] = idx[:-1, :], idx[1:, :]
    wt[:-1, :, 1] = np.sqrt(((img[1:, :] - img[:-1, :]) ** 2).sum(axis=2))
    keep = (a >= 0).ravel()
    return a.ravel()[keep], b.ravel()[keep], wt.ravel()[keep]


def fh_raw(img: np.ndarray, scale: float, min_size: int = 0) -> np.ndarray:
    h, w, _ = img.shape
    a, b, wt = grid_edges(img)
    order = np.argsort(wt, kind="stable")
    a, b, wt = a[order].tolist(), b[order].tolist(), wt[order].tolist()
    ds = _DisjointSet(h * w)
    find, size, internal = ds.find, ds.size, ds.internal
    for u, v, weight in zip(a, b, wt):
        ru, rv = find(u), find(v)
        if ru == rv:
            continue
        if weight <= min(internal[ru] + scale / size[ru], internal[rv] + scale / size[rv]):
            ds.union(ru, rv, weight)
    if min_size > 1:
        # ascending order: the first edge touching a small component is its lightest
        for u, v, weight in zip(a, b, wt):
            ru, rv = find(u), find(v)
            if ru != rv and (size[ru] < min_size or size[rv] < min_size):
                ds.union(ru, rv, max(internal[ru], internal[rv], weight))
    return np.array([find(i) for i in range(h * w)], dtype=np.int64).reshape(h, w)


def fh_segment(image: np.ndarray, params: AlgorithmParams) -> SegmentationResult:
    if "fh_k" not in params.extra:
        raise ValueError("fh_segment needs extra['fh_k']")
    scale = float(params.extra["fh_k"])
    if scale <= 0:
        raise ValueError("fh_k must be > 0")
    sigma = float(params.extra.get("fh_sigma", 0.0))
    min_size = int(params.extra.get("fh_min_size", 0))
    image = check_image(image)
    watch = Stopwatch()
    with watch.running():
        img = to_color_space(image, params.space("rgb"))
        if sigma > 0:
            img = ndimage.gaussian_filter(img, sigma=(sigma, sigma, 0), mode="nearest")
        raw = fh_raw(img, scale, min_size)
    labels = enforce_connectivity(raw, int(params.extra.get("min_size", 0)))
    return SegmentationResult(labels, num_labels(labels), watch.elapsed_ns, num_labels(raw))
