from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, fields, replace

import numpy as np


@dataclass(frozen=True)
class AlgorithmParams:
    """Parameters shared by the reference algorithms.

    ``compactness`` is m for SLIC and the distance weight for watershed; FH
    ignores it and reads ``extra["fh_k"]``, ``extra["fh_sigma"]`` and
    ``extra["fh_min_size"]`` instead.
    """

    k: int = 400
    compactness: float = 10.0
    iterations: int = 10
    color_space: str | None = None  # None: the algorithm's own default
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValueError("k must be >= 1")
        if int(self.iterations) < 1:
            raise ValueError("iterations must be >= 1")
        if self.compactness < 0:
            raise ValueError("compactness must be >= 0")
        if self.color_space not in (None, "rgb", "lab", "gray"):
            raise ValueError(f"unknown color space {self.color_space!r}")
        object.__setattr__(self, "extra", dict(self.extra))

    def to_json(self) -> dict:
        return {
            "k": int(self.k),
            "compactness": self.compactness,
            "iterations": int(self.iterations),
            "color_space": self.color_space,
            "extra": dict(sorted(self.extra.items())),
        }

    @classmethod
    def from_json(cls, obj: dict, **defaults) -> "AlgorithmParams":
        obj = dict(obj)
        extra = dict(obj.pop("extra", {}) or {})
        for key in list(obj):
            if key.startswith("extra."):
                extra[key[len("extra."):]] = obj.pop(key)
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown parameter(s): {sorted(unknown)}")
        merged = {**defaults, **obj}
        return cls(**merged, extra=extra)

    def space(self, default: str) -> str:
        return self.color_space or default

    def with_value(self, name: str, value) -> "AlgorithmParams":
        if name.startswith("extra."):
            return replace(self, extra={**self.extra, name[len("extra."):]: value})
        return replace(self, **{name: value})

    def get(self, name: str):
        if name.startswith("extra."):
            return self.extra[name[len("extra."):]]
        return getattr(self, name)


@dataclass
class SegmentationResult:
    labels: np.ndarray
    k_generated: int
    runtime_ns: int
    k_raw: int = 0  # distinct labels before connectivity enforcement


class Stopwatch:
    """Accumulates monotonic wall time over one or more ``with`` blocks."""

    def __init__(self):
        self.elapsed_ns = 0

    @contextmanager
    def running(self):
        start = time.perf_counter_ns()
        try:
            yield self
        finally:
            self.elapsed_ns += time.perf_counter_ns() - start


def measure_runtime(fn, *args, **kwargs):
    """Run ``fn`` and return ``(result, nanoseconds)``."""
    watch = Stopwatch()
    with watch.running():
        result = fn(*args, **kwargs)
    return result, watch.elapsed_ns


def default_min_size(width: int, height: int, k: int) -> int:
    return (width * height) // max(1, int(k)) // 4


def grid_seeds(width: int, height: int, k: int) -> list[tuple[int, int]]:
    """Seed positions ``(x, y)`` at the centres of a kx-by-ky grid.

    ky = round(sqrt(k * H / W)) and kx = ceil(k / ky), so kx/ky follows the
    aspect ratio and kx*ky >= k.
    """
    if k < 1 or k > width * height:
        raise ValueError(f"cannot place {k} seeds in a {width}x{height} image")
    ky = min(height, max(1, int(math.floor(math.sqrt(k * height / width) + 0.5))))
    kx = math.ceil(k / ky)
    if kx > width:
        kx = width
        ky = math.ceil(k / width)
    xs = [(2 * i + 1) * width // (2 * kx) for i in range(kx)]
    ys = [(2 * j + 1) * height // (2 * ky) for j in range(ky)]
    return [(x, y) for y in ys for x in xs]
