"""Watershed-based reference algorithm: marker priority flood with an optional compactness term."""

from __future__ import annotations

import heapq
import math

import numpy as np

from ..connectivity import connected_components
from ..core import check_image, num_labels, to_color_space
from .base import AlgorithmParams, SegmentationResult, Stopwatch, grid_seeds


def gradient_magnitude(img: np.ndarray) -> np.ndarray:
    """Largest absolute channel difference to any 4-neighbour."""
    grad = np.zeros(img.shape[:2])
    dh = np.abs(img[:, 1:] - img[:, :-1]).max(axis=2)
    dv = np.abs(img[1:, :] - img[:-1, :]).max(axis=2)
    grad[:, :-1] = np.maximum(grad[:, :-1], dh)
    grad[:, 1:] = np.maximum(grad[:, 1:], dh)
    grad[:-1, :] = np.maximum(grad[:-1, :], dv)
    grad[1:, :] = np.maximum(grad[1:, :], dv)
    return grad


def priority_flood(grad: np.ndarray, markers: list[tuple[int, int]], compactness: float = 0.0) -> np.ndarray:
    """Flood from ``markers`` (``(x, y)``), lowest priority first.

    Priority of a pixel reached by marker i is ``grad + compactness * dist``
    to marker i; equal priorities pop in insertion order.  A pixel takes the
    label of the first flood to pop it.
    """
    h, w = grad.shape
    g = grad.ravel().tolist()
    labels = [-1] * (h * w)
    heap = []
    counter = 0
    for i, (x, y) in enumerate(markers):
        heap.append((g[y * w + x], counter, y * w + x, i))
        counter += 1
    heapq.heapify(heap)
    mx = [float(x) for x, _ in markers]
    my = [float(y) for _, y in markers]
    push, pop = heapq.heappush, heapq.heappop
    while heap:
        _, _, idx, lab = pop(heap)
        if labels[idx] >= 0:
            continue
        labels[idx] = lab
        y, x = divmod(idx, w)
        for ny, nx in ((y - 1, x), (y, x - 1), (y, x + 1), (y + 1, x)):
            if 0 <= ny < h and 0 <= nx < w:
                n = ny * w + nx
                if labels[n] < 0:
                    prio = g[n]
                    if compactness:
                        prio += compactness * math.hypot(nx - mx[lab], ny - my[lab])
                    push(heap, (prio, counter, n, lab))
                    counter += 1
    return np.array(labels, dtype=np.int64).reshape(h, w)


def watershed_segment(image: np.ndarray, params: AlgorithmParams) -> SegmentationResult:
    image = check_image(image)
    h, w = image.shape[:2]
    watch = Stopwatch()
    with watch.running():
        img = to_color_space(image, params.space("gray"))
        markers = grid_seeds(w, h, int(params.k))
        raw = priority_flood(gradient_magnitude(img), markers, float(params.compactness))
    labels, count = connected_components(raw)
    # each flood grows through 4-neighbours, so regions are connected already
    assert count == len(markers), "watershed produced a disconnected region"
    return SegmentationResult(labels, count, watch.elapsed_ns, num_labels(raw))
