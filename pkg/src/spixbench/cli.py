"""Command-line entry point: ``spixbench <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime/system failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .algorithms import ALGORITHMS, segment
from .benchmark import DEFAULT_K_LIST, ParamSource, run_sweep
from .core import (
    DataError,
    SyntheticSpec,
    generate_synthetic_entry,
    load_dataset,
    read_label_map,
    save_dataset,
    write_label_map,
)
from .metrics import MetricConfig, evaluate_entry
from .optimization import DEFAULT_ANCHORS, ParameterGrid, optimize
from .reports import (
    fmt,
    metrics_row,
    read_metrics_csv,
    read_summary_csv,
    scores_from_summaries,
    write_metrics_csv,
    write_rank_csv,
    write_robustness_csv,
    write_series_csv,
    write_summary_csv,
)
from .robustness import KINDS, robustness_sweep
from .summary import rank_algorithms

log = logging.getLogger("spixbench")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3

ROBUSTNESS_DEFAULTS = {
    "salt_pepper": [0, 0.04, 0.08, 0.12, 0.16],
    "box_blur": [0, 5, 9, 13, 17],
    "gaussian_noise": [0, 5, 10, 20, 40],
    "gaussian_blur": [0, 1, 2, 3, 4],
    "affine": [(1, 0, 0, 0, 0), (1, 5, 0, 0, 0), (1, 10, 0, 0, 0), (1.1, 0, 0, 0, 0), (1, 0, 0.1, 0, 0)],
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Run manifest


def digest_file(path) -> str:
    h = hashlib.blake2b(digest_size=8)
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def digest_inputs(paths) -> dict:
    out = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for f in sorted(p.rglob("*")):
                if f.is_file() and f.name != "manifest.json":
                    out[str(f)] = digest_file(f)
        elif p.is_file():
            out[str(p)] = digest_file(p)
    return out


def _now() -> str:
    # SOURCE_DATE_EPOCH pins the timestamp for reproducible outputs
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return when.isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    arguments: dict
    tool_version: str = __version__
    timestamp: str = field(default_factory=_now)
    input_digests: dict = field(default_factory=dict)

    def write(self, out_dir) -> None:
        (Path(out_dir) / "manifest.json").write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _manifest(args, inputs=()) -> RunManifest:
    arguments = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "command"):
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, (list, tuple)):
            value = [str(v) if isinstance(v, Path) else v for v in value]
        arguments[key] = value
    return RunManifest(args.command, arguments, input_digests=digest_inputs(inputs))


# ---------------------------------------------------------------------------
# Argument helpers


def parse_int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("K values must be positive")
    return values


def parse_magnitudes(text: str, kind: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if kind == "affine":
            vals = tuple(float(v) for v in part.split(":"))
            if len(vals) != 5:
                raise UsageError("affine magnitudes are scale:rotation:shear:tx:ty")
            out.append(vals)
        else:
            out.append(float(part))
    if not out:
        raise UsageError("no magnitudes given")
    return out


def _params_source(args) -> ParamSource:
    if args.params:
        return ParamSource.load(args.params)
    return ParamSource()


def _prepare_out(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_algo(name):
    if name not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {name!r}; choose from {', '.join(sorted(ALGORITHMS))}")


def _dataset_name(args) -> str:
    return args.name or Path(args.dataset).resolve().name


# ---------------------------------------------------------------------------
# Commands


def cmd_generate(args) -> int:
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not (out / "manifest.json").is_file():
        raise DataError(f"{out} exists and is not a generated dataset; refusing to overwrite")
    parent = out.resolve().parent
    parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=parent))
    try:
        entries = [
            generate_synthetic_entry(
                SyntheticSpec(
                    width=args.width,
                    height=args.height,
                    num_segments=args.segments,
                    color_contrast=args.contrast,
                    noise_sigma=args.noise,
                    seed=args.seed + i,
                ),
                ident=f"syn{i:04d}",
            )
            for i in range(args.count)
        ]
        (tmp / "images").mkdir()
        (tmp / "gt").mkdir()
        save_dataset(tmp, entries, gt_format=args.gt_format)
        _manifest(args).write(tmp)
        if out.exists():
            shutil.rmtree(out)
        os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    log.info("wrote %d entries to %s", args.count, out)
    return EXIT_OK


def cmd_segment(args) -> int:
    _check_algo(args.algo)
    entries = load_dataset(args.dataset)
    params = _params_source(args)(args.k[0])
    out = _prepare_out(args.out)
    label_dir = out / "labels"
    label_dir.mkdir(exist_ok=True)
    rows = []
    for e in entries:
        res = segment(args.algo, e.image, params)
        write_label_map(label_dir / f"{e.id}.{'csv' if args.format == 'csv' else 'png'}", res.labels)
        runtime = "" if args.no_timing else fmt(res.runtime_ns / 1e6, 3)
        rows.append([e.id, str(params.k), str(res.k_generated), runtime])
    with open(out / "segment.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_id", "k_desired", "k_generated", "runtime_ms"])
        w.writerows(rows)
    _manifest(args, [args.dataset, args.params] if args.params else [args.dataset]).write(out)
    return EXIT_OK


def cmd_eval(args) -> int:
    entries = load_dataset(args.dataset)
    label_dir = Path(args.labels)
    out = _prepare_out(args.out)
    dataset = _dataset_name(args)
    rows = []
    for e in entries:
        candidates = [label_dir / f"{e.id}.csv", label_dir / f"{e.id}.png"]
        path = next((p for p in candidates if p.is_file()), None)
        if path is None:
            raise DataError(f"no label map for image {e.id!r} in {label_dir}")
        record = evaluate_entry(e.image, e.ground_truths, read_label_map(path), MetricConfig())
        rows.append(metrics_row(dataset, e.id, args.algo, args.k if args.k is not None else "", record, timing=False))
    write_metrics_csv(out / "metrics.csv", rows)
    _manifest(args, [args.dataset, args.labels]).write(out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    _check_algo(args.algo)
    entries = load_dataset(args.dataset)
    source = _params_source(args)
    out = _prepare_out(args.out)
    dataset = _dataset_name(args)
    result = run_sweep(args.algo, entries, source, args.k, MetricConfig(), jobs=args.jobs)
    rows = [metrics_row(dataset, image_id, args.algo, k, rec, timing=not args.no_timing) for image_id, k, rec in result.rows]
    write_metrics_csv(out / "metrics.csv", rows)
    write_summary_csv(out / "summary.csv", [(args.algo, dataset, result.amr, result.aue, result.auv)])
    _manifest(args, [args.dataset] + ([args.params] if args.params else [])).write(out)
    failed = sum(1 for *_, rec in result.rows if rec is None)
    if result.rows and failed == len(result.rows):
        log.error("every segmentation failed")
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_optimize(args) -> int:
    _check_algo(args.algo)
    try:
        axes = json.loads(Path(args.grid).read_text())
        grid = ParameterGrid({k: list(v) for k, v in axes.items()})
    except (json.JSONDecodeError, AttributeError, TypeError, ValueError) as exc:
        raise DataError(f"{args.grid}: invalid grid file: {exc}") from exc
    train = load_dataset(args.train)
    base = ParamSource.load(args.params).fixed if args.params else None
    outcome = optimize(args.algo, grid, train, anchors=args.k, base=base, max_k_deviation=args.max_k_deviation)
    out = _prepare_out(args.out)
    (out / f"params_{args.algo}.json").write_text(json.dumps(outcome.to_json(), indent=2, sort_keys=True) + "\n")
    with open(out / f"trace_{args.algo}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k_target", "params", "rec_mean", "ue_mean", "objective", "k_mean", "k_deviation", "feasible", "note"])
        for k in sorted(outcome.trace):
            for t in outcome.trace[k]:
                w.writerow(
                    [k, json.dumps(t.params.to_json(), sort_keys=True), fmt(t.rec_mean), fmt(t.ue_mean), fmt(t.objective),
                     fmt(t.k_mean), fmt(t.k_deviation), int(t.feasible), t.note]
                )
    _manifest(args, [args.grid, args.train]).write(out)
    if all(math.isinf(obj) for _, obj in outcome.anchors.values()):
        log.error("no feasible parameter combination at any anchor")
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_robustness(args) -> int:
    _check_algo(args.algo)
    entries = load_dataset(args.dataset)
    params = _params_source(args)(args.k[0])
    mags = parse_magnitudes(args.magnitudes, args.perturbation) if args.magnitudes else ROBUSTNESS_DEFAULTS[args.perturbation]
    rows = robustness_sweep(args.algo, params, sorted(entries, key=lambda e: e.id), args.perturbation, mags, seed=args.seed)
    out = _prepare_out(args.out)
    write_robustness_csv(out / "robustness.csv", args.algo, args.perturbation, rows)
    _manifest(args, [args.dataset]).write(out)
    return EXIT_OK


def cmd_rank(args) -> int:
    rows = []
    for path in args.summaries:
        rows.extend(read_summary_csv(path))
    table = rank_algorithms(scores_from_summaries(rows))
    out = _prepare_out(args.out)
    write_rank_csv(out / "rank.csv", table)
    _manifest(args, args.summaries).write(out)
    return EXIT_OK


def cmd_report(args) -> int:
    """Plot-data CSVs: one file per metric, one series per (algorithm, dataset)."""
    records = []
    for path in args.metrics:
        records.extend(read_metrics_csv(path))
    out = _prepare_out(args.out)
    groups = {}
    for r in records:
        if math.isnan(r["k_generated"]):
            continue
        groups.setdefault((r["algorithm"], r["dataset"], r["k_desired"]), []).append(r)
    for metric in ("rec", "ue_np", "ev", "co", "asa", "runtime_ms"):
        series = {}
        for (algo, dataset, _), rs in sorted(groups.items()):
            vals = [r[metric] for r in rs if not math.isnan(r[metric])]
            if not vals:
                continue
            k_mean = sum(r["k_generated"] for r in rs) / len(rs)
            series.setdefault(f"{algo}@{dataset}", []).append((k_mean, sum(vals) / len(vals)))
        write_series_csv(out / f"{metric}_vs_k.csv", {k: sorted(v) for k, v in series.items()})
    _manifest(args, args.metrics).write(out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    jobs_default = int(os.environ.get("SPIX_BENCH_THREADS", "1") or 1)
    p = _Parser(prog="spixbench", description="Superpixel benchmark toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, dataset=True, algo=True, k_default=None, params=True):
        if dataset:
            sp.add_argument("--dataset", required=True, help="dataset root (images/, gt/)")
            sp.add_argument("--name", help="dataset name in CSV output (default: directory name)")
        if algo:
            sp.add_argument("--algo", required=True)
        if params:
            sp.add_argument("--params", help="JSON parameters or optimize output")
        if k_default is not None:
            sp.add_argument("--k", type=parse_int_list, default=list(k_default))
        sp.add_argument("--out", required=True)
        sp.add_argument("--jobs", type=int, default=jobs_default)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--format", choices=["csv", "png"], default="csv")

    g = sub.add_parser("generate", help="write a synthetic dataset")
    common(g, dataset=False, algo=False, params=False)
    g.add_argument("--count", type=int, default=10)
    g.add_argument("--width", type=int, default=160)
    g.add_argument("--height", type=int, default=120)
    g.add_argument("--segments", type=int, default=12)
    g.add_argument("--contrast", type=float, default=60.0)
    g.add_argument("--noise", type=float, default=4.0)
    g.add_argument("--gt-format", choices=["png", "csv"], default="png")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("segment", help="segment every image of a dataset")
    common(s, k_default=[400])
    s.add_argument("--no-timing", action="store_true")
    s.set_defaults(func=cmd_segment)

    e = sub.add_parser("eval", help="evaluate stored label maps against a dataset")
    common(e, params=False)
    e.add_argument("--labels", required=True, help="directory of <id>.csv|png label maps")
    e.add_argument("--k", type=int, default=None, help="desired K to record")
    e.set_defaults(func=cmd_eval)

    w = sub.add_parser("sweep", help="evaluate over a K sweep and summarize")
    common(w, k_default=DEFAULT_K_LIST)
    w.add_argument("--no-timing", action="store_true", help="leave runtime_ms empty for byte-stable output")
    w.set_defaults(func=cmd_sweep)

    o = sub.add_parser("optimize", help="grid-search parameters at anchor K values")
    common(o, dataset=False, k_default=DEFAULT_ANCHORS)
    o.add_argument("--grid", required=True)
    o.add_argument("--train", required=True)
    o.add_argument("--max-k-deviation", type=float, default=0.5)
    o.set_defaults(func=cmd_optimize)

    r = sub.add_parser("robustness", help="metric degradation under perturbations")
    common(r, k_default=[400])
    r.add_argument("--perturbation", choices=KINDS, required=True)
    r.add_argument("--magnitudes", help="comma list; affine entries as scale:rot:shear:tx:ty")
    r.set_defaults(func=cmd_robustness)

    k = sub.add_parser("rank", help="rank algorithms from summary.csv files")
    k.add_argument("summaries", nargs="+")
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_rank)

    t = sub.add_parser("report", help="plot-data CSVs from metrics.csv files")
    t.add_argument("metrics", nargs="+")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits 0, parse errors exit EXIT_USAGE
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"spixbench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError, KeyError) as exc:
        print(f"spixbench: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        print(f"spixbench: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
