"""K-independent summaries (AMR, AUE, AUV), correlation and ranking."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

K_MIN = 200
K_MAX = 5200


@dataclass(frozen=True)
class Curve:
    """Samples ``(k, value)`` with strictly increasing k."""

    samples: tuple

    def __post_init__(self):
        samples = tuple((float(k), float(v)) for k, v in self.samples)
        if not samples:
            raise ValueError("curve needs at least one sample")
        ks = [k for k, _ in samples]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("curve samples must have strictly increasing k")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_points(cls, ks: Iterable[float], values: Iterable[float]) -> "Curve":
        """Sort by k and average values that share a k; NaN values are dropped."""
        groups = defaultdict(list)
        for k, v in zip(ks, values):
            if not (math.isnan(k) or math.isnan(v)):
                groups[float(k)].append(float(v))
        return cls(tuple((k, float(np.mean(groups[k]))) for k in sorted(groups)))

    def map(self, fn) -> "Curve":
        return Curve(tuple((k, fn(v)) for k, v in self.samples))


def average_under_curve(curve: Curve, k_min: float = K_MIN, k_max: float = K_MAX) -> float:
    """Trapezoidal area of the piecewise-linear curve over [k_min, k_max], divided by the width.

    Samples straddling a bound are interpolated; beyond the outermost sample
    the curve is held flat at that sample's value.
    """
    if k_max <= k_min:
        raise ValueError("k_max must exceed k_min")
    ks = np.array([k for k, _ in curve.samples])
    vs = np.array([v for _, v in curve.samples])
    inside = ks[(ks > k_min) & (ks < k_max)]
    xs = np.concatenate([[k_min], inside, [k_max]])
    # np.interp holds the end values flat outside the sample range
    ys = np.interp(xs, ks, vs)
    area = float(np.sum((xs[1:] - xs[:-1]) * (ys[1:] + ys[:-1]) / 2.0))
    return area / (k_max - k_min)


def amr_aue_auv(rec_curve: Curve, ue_curve: Curve, ev_curve: Curve, k_min=K_MIN, k_max=K_MAX):
    amr = average_under_curve(rec_curve.map(lambda v: 1.0 - v), k_min, k_max)
    aue = average_under_curve(ue_curve, k_min, k_max)
    auv = average_under_curve(ev_curve.map(lambda v: 1.0 - v), k_min, k_max)
    return amr, aue, auv


def pearson(xs, ys) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two 1-D sequences of equal length")
    if x.size < 2:
        raise ValueError("pearson needs at least two samples")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("pearson is undefined for a constant sequence")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass
class RankRow:
    algorithm: str
    average_rank: float
    mean_amr: float
    mean_aue: float
    rank_distribution: dict = field(default_factory=dict)


def rank_algorithms(scores: Mapping[str, Mapping[str, tuple]]) -> list[RankRow]:
    """Rank by AMR + AUE per dataset and average the ranks over datasets.

    ``scores[dataset][algorithm] = (amr, aue)``.  Algorithms missing from a
    dataset are averaged over the datasets they appear in.  Output is sorted
    by average rank, then algorithm id.
    """
    if not scores or not any(scores.values()):
        raise ValueError("no scores to rank")
    ranks = defaultdict(list)
    amrs = defaultdict(list)
    aues = defaultdict(list)
    for dataset in sorted(scores):
        algos = scores[dataset]
        if not algos:
            raise ValueError(f"dataset {dataset!r} has no algorithms")
        order = sorted(algos, key=lambda a: (algos[a][0] + algos[a][1], a))
        for rank, algo in enumerate(order, start=1):
            ranks[algo].append(rank)
            amrs[algo].append(algos[algo][0])
            aues[algo].append(algos[algo][1])
    rows = [
        RankRow(
            algo,
            float(np.mean(ranks[algo])),
            float(np.mean(amrs[algo])),
            float(np.mean(aues[algo])),
            dict(sorted(Counter(ranks[algo]).items())),
        )
        for algo in ranks
    ]
    rows.sort(key=lambda r: (r.average_rank, r.algorithm))
    return rows
