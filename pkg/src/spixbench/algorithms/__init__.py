"""Reference superpixel algorithms behind one ``segment`` entry point."""

from __future__ import annotations

from .base import (
    AlgorithmParams,
    SegmentationResult,
    Stopwatch,
    default_min_size,
    grid_seeds,
    measure_runtime,
)
from .fh import fh_segment
from .slic import slic_segment
from .watershed import watershed_segment

ALGORITHMS = {
    "slic": slic_segment,
    "watershed": watershed_segment,
    "fh": fh_segment,
}


def segment(algorithm_id: str, image, params: AlgorithmParams) -> SegmentationResult:
    """Dispatch to a registered algorithm. Runtime covers only the raw algorithm."""
    try:
        fn = ALGORITHMS[algorithm_id]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm_id!r}; known: {sorted(ALGORITHMS)}") from None
    return fn(image, params)


__all__ = [
    "ALGORITHMS",
    "AlgorithmParams",
    "SegmentationResult",
    "Stopwatch",
    "default_min_size",
    "fh_segment",
    "grid_seeds",
    "measure_runtime",
    "segment",
    "slic_segment",
    "watershed_segment",
]
