"""The K sweep: segment every image at every K, evaluate, and summarize."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .algorithms import AlgorithmParams, segment
from .core import DataError, DatasetEntry
from .metrics import MetricConfig, MetricRecord, aggregate, evaluate_entry
from .optimization import OptimizationOutcome, interpolate_params
from .summary import Curve, amr_aue_auv

log = logging.getLogger(__name__)

DEFAULT_K_LIST = (200, 300, 400, 600, 800, 1000, 1200, 1400, 1600, 1800, 2000, 2400, 2800, 3200, 3600, 4000, 4600, 5200)


class ParamSource:
    """Maps a desired K to parameters: a fixed set, or anchors interpolated in K."""

    def __init__(self, fixed: AlgorithmParams | None = None, outcome: OptimizationOutcome | None = None):
        self.fixed = fixed or AlgorithmParams()
        self.outcome = outcome

    def __call__(self, k: int) -> AlgorithmParams:
        if self.outcome is not None:
            return interpolate_params(self.outcome, k)
        return replace(self.fixed, k=int(k))

    @classmethod
    def from_json(cls, obj: dict) -> "ParamSource":
        if "anchors" in obj:
            return cls(outcome=OptimizationOutcome.from_json(obj))
        return cls(fixed=AlgorithmParams.from_json(obj))

    @classmethod
    def load(cls, path) -> "ParamSource":
        try:
            obj = json.loads(Path(path).read_text())
            return cls.from_json(obj)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: invalid parameter file: {exc}") from exc


def evaluate_one(algorithm, entry: DatasetEntry, params: AlgorithmParams, config: MetricConfig) -> MetricRecord | None:
    try:
        res = algorithm(entry.image, params) if callable(algorithm) else segment(algorithm, entry.image, params)
    except Exception as exc:
        log.warning("%s failed on %s at k=%s: %s", algorithm, entry.id, params.k, exc)
        return None
    return evaluate_entry(entry.image, entry.ground_truths, res.labels, config, res.runtime_ns)


def _task(args):
    algorithm, entry, params, config = args
    return evaluate_one(algorithm, entry, params, config)


def map_jobs(fn, items, jobs: int = 1):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@dataclass
class SweepResult:
    rows: list  # (image_id, k_desired, MetricRecord | None), ordered by image then K
    per_k: dict  # k_desired -> AggregateStats (feasible records only)
    amr: float
    aue: float
    auv: float


def curves_from_rows(rows) -> tuple[Curve, Curve, Curve] | None:
    """Curves over the mean generated K of each desired K."""
    by_k = {}
    for _, k, rec in rows:
        if rec is not None:
            by_k.setdefault(k, []).append(rec)
    if not by_k:
        return None
    ks, rec, ue, ev = [], [], [], []
    for k in sorted(by_k):
        recs = by_k[k]
        ks.append(float(np.mean([r.k_generated for r in recs])))
        rec.append(float(np.mean([r.rec for r in recs])))
        ue.append(float(np.mean([r.ue_np for r in recs])))
        ev.append(float(np.mean([r.ev for r in recs])))
    return Curve.from_points(ks, rec), Curve.from_points(ks, ue), Curve.from_points(ks, ev)


def run_sweep(
    algorithm: str | Callable,
    entries: Sequence[DatasetEntry],
    params: ParamSource | Callable[[int], AlgorithmParams],
    k_list: Sequence[int] = DEFAULT_K_LIST,
    config: MetricConfig = MetricConfig(),
    jobs: int = 1,
) -> SweepResult:
    k_list = sorted({int(k) for k in k_list})
    entries = sorted(entries, key=lambda e: e.id)
    tasks = [(algorithm, e, params(k), config) for e in entries for k in k_list]
    records = map_jobs(_task, tasks, jobs)
    rows = [(e.id, k, rec) for (_, e, p, _), rec, k in zip(tasks, records, [k for _ in entries for k in k_list])]
    per_k = {}
    for k in k_list:
        feasible = [rec for _, kk, rec in rows if kk == k and rec is not None]
        if feasible:
            per_k[k] = aggregate(feasible)
    curves = curves_from_rows(rows)
    if curves is None:
        amr = aue = auv = math.nan
    else:
        amr, aue, auv = amr_aue_auv(*curves)
    return SweepResult(rows, per_k, amr, aue, auv)
