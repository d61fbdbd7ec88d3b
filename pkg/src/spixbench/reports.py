"""CSV schemas for metrics, summaries, rankings and robustness tables."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from pathlib import Path

from .core import DataError
from .metrics import METRIC_NAMES

METRICS_HEADER = ["dataset", "image_id", "algorithm", "k_desired", "k_generated", *METRIC_NAMES, "runtime_ms"]
SUMMARY_HEADER = ["algorithm", "dataset", "amr", "aue", "auv"]
RANK_HEADER = ["algorithm", "avg_rank", "mean_amr", "mean_aue", "rank_counts"]
ROBUSTNESS_HEADER = ["algorithm", "perturbation", "magnitude", "rec_mean", "ue_np_mean", "ev_mean", "k_raw_mean", "k_raw_std"]


def fmt(value, digits: int = 6) -> str:
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    text = f"{value:.{digits}f}"
    # tiny negatives would otherwise print as -0.000000
    return text[1:] if text.startswith("-") and float(text) == 0 else text


def _write(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue())


def _read(path, header) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or list(reader.fieldnames) != list(header):
                raise DataError(f"{path}: expected header {','.join(header)}")
            rows = list(reader)
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not a text CSV") from exc
    for i, row in enumerate(rows, start=2):
        if None in row or any(v is None for v in row.values()):
            raise DataError(f"{path}:{i}: wrong number of fields")
    return rows


def _float(path, row, key) -> float:
    try:
        return float(row[key]) if row[key] != "" else math.nan
    except ValueError:
        raise DataError(f"{path}: bad number {row[key]!r} in column {key}") from None


def metrics_row(dataset, image_id, algorithm, k_desired, record, timing: bool = True) -> list[str]:
    if record is None:
        return [dataset, image_id, algorithm, str(k_desired), ""] + [""] * len(METRIC_NAMES) + [""]
    runtime = ""
    if timing and record.runtime_ns is not None:
        runtime = fmt(record.runtime_ns / 1e6, 3)
    return [
        dataset,
        image_id,
        algorithm,
        str(k_desired),
        str(record.k_generated),
        *(fmt(getattr(record, m)) for m in METRIC_NAMES),
        runtime,
    ]


def write_metrics_csv(path, rows) -> None:
    _write(path, METRICS_HEADER, rows)


def read_metrics_csv(path) -> list[dict]:
    rows = _read(path, METRICS_HEADER)
    out = []
    for row in rows:
        rec = {"dataset": row["dataset"], "image_id": row["image_id"], "algorithm": row["algorithm"]}
        for key in ("k_desired", "k_generated", *METRIC_NAMES, "runtime_ms"):
            rec[key] = _float(path, row, key)
        out.append(rec)
    return out


def write_summary_csv(path, rows) -> None:
    """``rows``: iterable of (algorithm, dataset, amr, aue, auv)."""
    _write(path, SUMMARY_HEADER, [[a, d, fmt(x), fmt(y), fmt(z)] for a, d, x, y, z in rows])


def read_summary_csv(path) -> list[tuple]:
    out = []
    for row in _read(path, SUMMARY_HEADER):
        out.append((row["algorithm"], row["dataset"], *(_float(path, row, k) for k in ("amr", "aue", "auv"))))
    return out


def scores_from_summaries(rows) -> dict:
    scores = defaultdict(dict)
    for algo, dataset, amr, aue, _ in rows:
        if algo in scores[dataset]:
            raise DataError(f"duplicate summary for {algo!r} on {dataset!r}")
        scores[dataset][algo] = (amr, aue)
    return dict(scores)


def write_rank_csv(path, table) -> None:
    rows = []
    for r in table:
        counts = "|".join(f"{rank}:{count}" for rank, count in sorted(r.rank_distribution.items()))
        rows.append([r.algorithm, fmt(r.average_rank), fmt(r.mean_amr), fmt(r.mean_aue), counts])
    _write(path, RANK_HEADER, rows)


def read_rank_csv(path) -> list[dict]:
    out = []
    for row in _read(path, RANK_HEADER):
        counts = {}
        for part in filter(None, row["rank_counts"].split("|")):
            rank, count = part.split(":")
            counts[int(rank)] = int(count)
        out.append(
            {
                "algorithm": row["algorithm"],
                "avg_rank": _float(path, row, "avg_rank"),
                "mean_amr": _float(path, row, "mean_amr"),
                "mean_aue": _float(path, row, "mean_aue"),
                "rank_counts": counts,
            }
        )
    return out


def format_magnitude(magnitude) -> str:
    if isinstance(magnitude, (tuple, list)):
        return ":".join(f"{float(v):g}" for v in magnitude)
    return f"{float(magnitude):g}"


def write_robustness_csv(path, algorithm, kind, sweep_rows) -> None:
    rows = []
    for r in sweep_rows:
        s = r.stats
        rows.append(
            [
                algorithm,
                kind,
                format_magnitude(r.magnitude),
                fmt(s["rec"].mean if s else math.nan),
                fmt(s["ue_np"].mean if s else math.nan),
                fmt(s["ev"].mean if s else math.nan),
                fmt(r.k_raw_mean),
                fmt(r.k_raw_std),
            ]
        )
    _write(path, ROBUSTNESS_HEADER, rows)


def write_series_csv(path, series) -> None:
    """``series``: mapping name -> list of (x, y); one row per point."""
    rows = [[name, fmt(x), fmt(y)] for name in sorted(series) for x, y in series[name]]
    _write(path, ["series", "x", "y"], rows)
