"""Discrete grid search over algorithm parameters with per-K anchors."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .algorithms import AlgorithmParams, segment
from .core import DatasetEntry
from .metrics import MetricConfig, evaluate_entry

log = logging.getLogger(__name__)

DEFAULT_ANCHORS = (400, 1200, 3600)


def objective(rec_mean: float, ue_mean: float) -> float:
    """Additive trade-off between missed boundaries and leakage; lower is better."""
    return (1.0 - rec_mean) + ue_mean


@dataclass
class ParameterGrid:
    axes: dict  # name -> ordered candidates; "extra.<key>" addresses AlgorithmParams.extra

    def __post_init__(self):
        if not self.axes:
            raise ValueError("parameter grid has no axes")
        for name, values in self.axes.items():
            if len(values) == 0:
                raise ValueError(f"grid axis {name!r} is empty")

    def __len__(self):
        return math.prod(len(v) for v in self.axes.values())

    def combinations(self):
        """Lexicographic over axes in insertion order, last axis fastest."""
        names = list(self.axes)
        for values in itertools.product(*(self.axes[n] for n in names)):
            yield dict(zip(names, values))


@dataclass
class TrialResult:
    params: AlgorithmParams
    rec_mean: float
    ue_mean: float
    objective: float
    k_mean: float
    k_deviation: float
    feasible: bool
    note: str = ""


@dataclass
class OptimizationOutcome:
    anchors: dict = field(default_factory=dict)  # K -> (AlgorithmParams, objective)
    trace: dict = field(default_factory=dict)  # K -> list[TrialResult]

    def to_json(self) -> dict:
        return {
            "anchors": {
                str(k): {"params": p.to_json(), "objective": obj if math.isfinite(obj) else None}
                for k, (p, obj) in sorted(self.anchors.items())
            }
        }

    @classmethod
    def from_json(cls, obj: dict) -> "OptimizationOutcome":
        anchors = {}
        for k, v in obj["anchors"].items():
            o = v.get("objective")
            anchors[int(k)] = (AlgorithmParams.from_json(v["params"]), math.inf if o is None else float(o))
        return cls(anchors)


def _run(algorithm, image, params):
    if callable(algorithm):
        return algorithm(image, params)
    return segment(algorithm, image, params)


def evaluate_params(
    algorithm: str | Callable,
    params: AlgorithmParams,
    train: Sequence[DatasetEntry],
    k_target: int,
    config: MetricConfig = MetricConfig(),
    max_k_deviation: float | None = 0.5,
) -> TrialResult:
    recs, ues, ks = [], [], []
    try:
        for entry in train:
            res = _run(algorithm, entry.image, params)
            record = evaluate_entry(entry.image, entry.ground_truths, res.labels, config)
            recs.append(record.rec)
            ues.append(record.ue_np)
            ks.append(record.k_generated)
    except Exception as exc:  # a crashing corner of the grid is just infeasible
        log.debug("combination %s failed: %s", params, exc)
        return TrialResult(params, math.nan, math.nan, math.inf, math.nan, math.nan, False, f"error: {exc}")
    rec_mean, ue_mean, k_mean = float(np.mean(recs)), float(np.mean(ues)), float(np.mean(ks))
    dev = abs(k_mean - k_target) / k_target
    score = objective(rec_mean, ue_mean)
    feasible = max_k_deviation is None or dev <= max_k_deviation
    if not feasible:
        return TrialResult(params, rec_mean, ue_mean, math.inf, k_mean, dev, False, "k deviation")
    return TrialResult(params, rec_mean, ue_mean, score, k_mean, dev, True)


def grid_search(
    algorithm: str | Callable,
    grid: ParameterGrid,
    train: Sequence[DatasetEntry],
    k_target: int,
    base: AlgorithmParams | None = None,
    config: MetricConfig = MetricConfig(),
    max_k_deviation: float | None = 0.5,
    trace: list | None = None,
) -> tuple[AlgorithmParams, float]:
    """Exhaustively score ``grid`` on ``train`` at ``k_target``; return the argmin.

    Ties keep the earliest combination in enumeration order.
    """
    if not train:
        raise ValueError("training set is empty")
    base = replace(base or AlgorithmParams(), k=int(k_target))
    best_params, best_score = None, math.inf
    for combo in grid.combinations():
        params = base
        for name, value in combo.items():
            params = params.with_value(name, value)
        trial = evaluate_params(algorithm, params, train, k_target, config, max_k_deviation)
        if trace is not None:
            trace.append(trial)
        if best_params is None or trial.objective < best_score:
            best_params, best_score = params, trial.objective
    return best_params, best_score


def optimize(
    algorithm: str | Callable,
    grid: ParameterGrid,
    train: Sequence[DatasetEntry],
    anchors: Sequence[int] = DEFAULT_ANCHORS,
    **kwargs,
) -> OptimizationOutcome:
    outcome = OptimizationOutcome()
    for k in anchors:
        trace: list = []
        params, score = grid_search(algorithm, grid, train, k, trace=trace, **kwargs)
        outcome.anchors[int(k)] = (params, score)
        outcome.trace[int(k)] = trace
    return outcome


def _lerp(a, b, t):
    return a + (b - a) * t


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _interp_value(a, b, t, nearer_is_a: bool):
    if isinstance(a, bool) or isinstance(b, bool) or isinstance(a, str) or isinstance(b, str):
        return a if nearer_is_a else b
    if isinstance(a, int) and isinstance(b, int):
        return _round_half_up(_lerp(a, b, t))
    return float(_lerp(float(a), float(b), t))


def interpolate_params(outcome: OptimizationOutcome | dict, k: int, k_min: int = 200, k_max: int = 5200) -> AlgorithmParams:
    """Parameters for ``k`` interpolated linearly between the bracketing anchors.

    Integers round half-up; categorical values come from the nearer anchor
    (the lower K on ties).  Outside the anchor range the nearest anchor is used.
    """
    anchors = outcome.anchors if isinstance(outcome, OptimizationOutcome) else outcome
    if not anchors:
        raise ValueError("no anchors to interpolate")
    k = min(max(int(k), k_min), k_max)
    ks = sorted(anchors)

    def params_of(key):
        v = anchors[key]
        return v[0] if isinstance(v, tuple) else v

    if k <= ks[0]:
        return replace(params_of(ks[0]), k=k)
    if k >= ks[-1]:
        return replace(params_of(ks[-1]), k=k)
    hi = next(i for i, a in enumerate(ks) if a >= k)
    k0, k1 = ks[hi - 1], ks[hi]
    if k == k1:
        return replace(params_of(k1), k=k)
    p0, p1 = params_of(k0), params_of(k1)
    t = (k - k0) / (k1 - k0)
    nearer_lo = (k - k0) <= (k1 - k)
    extra = {}
    for key in sorted(set(p0.extra) | set(p1.extra)):
        if key in p0.extra and key in p1.extra:
            extra[key] = _interp_value(p0.extra[key], p1.extra[key], t, nearer_lo)
        else:
            extra[key] = p0.extra[key] if key in p0.extra else p1.extra[key]
    return AlgorithmParams(
        k=k,
        compactness=float(_lerp(p0.compactness, p1.compactness, t)),
        iterations=_round_half_up(_lerp(p0.iterations, p1.iterations, t)),
        color_space=p0.color_space if nearer_lo else p1.color_space,
        extra=extra,
    )
