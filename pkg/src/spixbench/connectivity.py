"""4-connected component relabeling and merging of undersized fragments."""

from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from skimage.measure import label as _sk_label

from .core import canonicalize, check_labels


@dataclass
class ComponentStats:
    component_id: int
    size: int
    original_label: int
    neighbor_contact: dict = field(default_factory=dict)


def connected_components(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Split every label into its 4-connected components.

    Components are numbered 0..count-1 in raster order of their first pixel.
    """
    labels = check_labels(labels)
    # background=-1: label 0 is an ordinary region here.
    comp = _sk_label(labels, background=-1, connectivity=1)
    comp = canonicalize(comp)
    return comp, int(comp.max()) + 1


def component_stats(components: np.ndarray, original: np.ndarray | None = None) -> list[ComponentStats]:
    n = int(components.max()) + 1
    sizes = np.bincount(components.ravel(), minlength=n)
    if original is None:
        original = components
    first = np.full(n, -1, dtype=np.int64)
    flat = components.ravel()
    # reversed assignment leaves the first occurrence
    first[flat[::-1]] = np.arange(flat.size)[::-1]
    orig = original.ravel()[first]
    stats = [ComponentStats(i, int(sizes[i]), int(orig[i])) for i in range(n)]
    for a, b in ((components[:, :-1], components[:, 1:]), (components[:-1, :], components[1:, :])):
        diff = a != b
        pairs, counts = np.unique(np.stack([a[diff], b[diff]], axis=1), axis=0, return_counts=True) if diff.any() else ([], [])
        for (x, y), c in zip(pairs, counts):
            x, y, c = int(x), int(y), int(c)
            stats[x].neighbor_contact[y] = stats[x].neighbor_contact.get(y, 0) + c
            stats[y].neighbor_contact[x] = stats[y].neighbor_contact.get(x, 0) + c
    return stats


def enforce_connectivity(labels: np.ndarray, min_size: int = 0) -> np.ndarray:
    """Relabel 4-connected components, then absorb those smaller than ``min_size``.

    The smallest undersized component (lowest id on ties) is merged into the
    neighbour sharing the longest border (lowest id on ties), repeatedly.
    Output labels are canonical 0..K-1.
    """
    if min_size < 0:
        raise ValueError("min_size must be >= 0")
    comp, n = connected_components(labels)
    if min_size <= 1 or n == 1:
        return comp

    stats = component_stats(comp)
    size = [s.size for s in stats]
    contact = [defaultdict(int, s.neighbor_contact) for s in stats]
    parent = list(range(n))
    alive = [True] * n

    heap = [(size[i], i) for i in range(n) if size[i] < min_size]
    heapq.heapify(heap)
    remaining = n
    while heap and remaining > 1:
        s, i = heapq.heappop(heap)
        if not alive[i] or s != size[i]:
            continue
        target = min(contact[i].items(), key=lambda kv: (-kv[1], kv[0]))[0]
        # fold i into target
        for j, c in contact[i].items():
            if j == target:
                continue
            contact[target][j] += c
            del contact[j][i]
            contact[j][target] += c
        del contact[target][i]
        contact[i] = defaultdict(int)
        size[target] += size[i]
        alive[i] = False
        parent[i] = target
        remaining -= 1
        if size[target] < min_size:
            heapq.heappush(heap, (size[target], target))

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    lut = np.array([root(i) for i in range(n)], dtype=np.int64)
    return canonicalize(lut[comp])
