"""``graphclust`` command line: single runs, benchmark plans, embedding
export, dataset conversion and listing.

Exit codes: 0 success, 1 invalid input, 2 runtime failure, 3 a benchmark
finished with at least one failed run.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from graphclust import deep, leiden as leiden_mod, mcl as mcl_mod, sbm, spectral
from graphclust.graph import GraphError, Partition
from graphclust.ingest import BUNDLED, DATA_ENV, SYNTHETIC, Dataset, IngestError, convert_tables, resolve_dataset
from graphclust.metrics import REPORT_COLUMNS, MetricsReport, evaluate
from graphclust.numerics import NumericError

__all__ = [
    "ALGORITHMS",
    "BenchPlan",
    "ValidationError",
    "format_table",
    "load_plan",
    "main",
    "run_bench",
    "run_single",
]

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_PARTIAL = 0, 1, 2, 3
DEEP = ("gae", "arga", "mvgrl")


class ValidationError(ValueError):
    """Bad command-line input, plan or configuration."""


# ---------------------------------------------------------------- algorithms

def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _pos_weight(v) -> float | str:
    return "auto" if str(v).strip().lower() == "auto" else float(v)


# per-algorithm configuration keys with their parsers and defaults (None:
# taken from the dataset or the algorithm)
CONFIG_KEYS: dict[str, dict[str, tuple[Callable[[Any], Any], Any]]] = {
    "spectral": {"k": (int, None), "normalize_rows": (_bool, False), "n_init": (int, 10)},
    "sbm-em": {"k": (int, None), "max_iters": (int, 200), "restarts": (int, 5), "init": (str, "spectral")},
    "sbm-mh": {"k": (int, None), "iters": (int, 20000), "burn_in": (int, 5000), "restarts": (int, 1)},
    "dcsbm-mh": {"k": (int, None), "iters": (int, 20000), "burn_in": (int, 5000), "restarts": (int, 8)},
    "mcl": {
        "expansion": (int, 2),
        "inflation": (float, 2.0),
        "epsilon": (float, 1e-4),
        "max_rounds": (int, 100),
        "prune_threshold": (float, 1e-8),
        "add_self_loops": (_bool, True),
    },
    "leiden": {"objective": (str, "modularity"), "gamma": (float, 1.0), "theta": (float, 0.01)},
}
_DEEP_KEYS: dict[str, tuple[Callable[[Any], Any], Any]] = {
    "k": (int, None),
    "epochs": (int, None),
    "latent_dim": (int, None),
    "hidden_dim": (int, None),
    "lr": (float, None),
    "pos_weight": (_pos_weight, None),
    "normalize_features": (_bool, None),
    "kmeans_restarts": (int, 10),
}
CONFIG_KEYS["gae"] = dict(_DEEP_KEYS)
CONFIG_KEYS["arga"] = {
    **_DEEP_KEYS,
    "disc_iters": (int, None),
    "disc_hidden": (int, None),
    "saturating_generator": (_bool, None),
}
CONFIG_KEYS["mvgrl"] = {**_DEEP_KEYS, "ppr_alpha": (float, None)}
ALGORITHMS = tuple(CONFIG_KEYS)


def parse_config(algorithm: str, raw: dict[str, Any]) -> dict[str, Any]:
    """Validate and type a configuration; unknown keys are an error."""
    if algorithm not in CONFIG_KEYS:
        raise ValidationError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    keys = CONFIG_KEYS[algorithm]
    out = {name: default for name, (_, default) in keys.items()}
    for name, value in raw.items():
        key = name.replace("-", "_")
        if key not in keys:
            raise ValidationError(f"{algorithm}: unknown setting {name!r} (known: {', '.join(sorted(keys))})")
        if value is None:
            continue
        try:
            out[key] = keys[key][0](value)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{algorithm}: bad value for {name}: {value!r} ({exc})") from None
    if algorithm == "leiden" and out["objective"] not in ("modularity", "cpm"):
        raise ValidationError(f"leiden: objective must be 'modularity' or 'cpm', got {out['objective']!r}")
    if algorithm == "mcl":
        try:
            mcl_mod.MclConfig(**out)
        except ValueError as exc:
            raise ValidationError(f"mcl: {exc}") from None
    return out


def _k(cfg: dict[str, Any], ds: Dataset) -> int:
    return int(cfg["k"]) if cfg.get("k") else ds.num_classes


def _hyper(algorithm: str, cfg: dict[str, Any], seed: int) -> deep.DeepHyper:
    base = {"gae": deep.DeepHyper.gae, "arga": deep.DeepHyper.arga, "mvgrl": deep.DeepHyper.mvgrl}[algorithm]()
    fields = {k: v for k, v in cfg.items() if k not in ("k", "kmeans_restarts")}
    try:
        return base.with_(seed=seed, **fields)
    except ValueError as exc:
        raise ValidationError(f"{algorithm}: {exc}") from None


@dataclass
class _Outcome:
    partition: Partition
    extra: dict[str, Any] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    embeddings: np.ndarray | None = None


def _cluster(algorithm: str, ds: Dataset, cfg: dict[str, Any], seed: int) -> _Outcome:
    g = ds.graph
    if algorithm == "spectral":
        p = spectral.spectral_clustering(g, _k(cfg, ds), seed, cfg["normalize_rows"], n_init=cfg["n_init"])
        return _Outcome(p)
    if algorithm == "sbm-em":
        params = sbm.sbm_em(g, _k(cfg, ds), seed, cfg["max_iters"], restarts=cfg["restarts"], init=cfg["init"])
        return _Outcome(Partition.from_labels(params.memberships), {"iterations": params.iterations, "loglik": params.loglik_trace[-1]})
    if algorithm in ("sbm-mh", "dcsbm-mh"):
        run = sbm.sbm_mh if algorithm == "sbm-mh" else sbm.dcsbm_mh
        res = run(g, _k(cfg, ds), iters=cfg["iters"], burn_in=cfg["burn_in"], seed=seed, restarts=cfg["restarts"])
        return _Outcome(
            res.map_partition,
            {"map_log_posterior": res.map_log_posterior, "acceptance_rate": res.acceptance_rate},
        )
    if algorithm == "mcl":
        res = mcl_mod.mcl(g, mcl_mod.MclConfig(**cfg))
        flags = [] if res.converged else [f"mcl: not converged after {res.rounds} rounds"]
        return _Outcome(
            res.partition,
            {"converged": res.converged, "rounds": res.rounds, "final_change": res.final_change},
            flags,
        )
    if algorithm == "leiden":
        obj = leiden_mod.QualityObjective(cfg["objective"], cfg["gamma"])
        res = leiden_mod.leiden(g, obj, seed=seed, theta=cfg["theta"])
        return _Outcome(res.partition, {"quality": res.quality, "levels": res.levels})
    train = {"gae": deep.gae_train, "arga": deep.arga_train, "mvgrl": deep.mvgrl_train}[algorithm]
    hyper = _hyper(algorithm, cfg, seed)
    model = train(ds, hyper)
    p, z = deep.encode_and_cluster(model, ds, _k(cfg, ds), seed=seed, n_init=cfg["kmeans_restarts"])
    extra = {
        "epochs": hyper.epochs,
        "latent_dim": hyper.latent_dim,
        "normalize_features": hyper.normalize_features,
        "final_loss": model.history[-1] if model.history else None,
    }
    return _Outcome(p, extra, embeddings=z)


def run_single(
    algorithm: str, ds: Dataset, config: dict[str, Any] | None = None, seed: int = 0, timing: bool = False
) -> MetricsReport:
    """One clustering run plus the full metric suite.

    ``wall_ms`` is filled only when ``timing`` is set, so that reports of
    repeated runs are byte-identical by default.
    """
    report, _ = _run(algorithm, ds, parse_config(algorithm, config or {}), seed, timing)
    return report


def _run(algorithm: str, ds: Dataset, cfg: dict[str, Any], seed: int, timing: bool) -> tuple[MetricsReport, _Outcome]:
    start = time.perf_counter()
    out = _cluster(algorithm, ds, cfg, seed)
    elapsed = (time.perf_counter() - start) * 1000.0
    report = evaluate(ds.graph, ds.labels, out.partition, algorithm, ds.name, seed)
    report.flags.extend(out.flags)
    report.extra.update(num_clusters=out.partition.num_clusters, **out.extra)
    if timing:
        report.wall_ms = elapsed
    return report, out


# ----------------------------------------------------------------- reporting

def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.4f}"
    return str(v)


def format_table(reports: Sequence[MetricsReport], columns: Sequence[str] = REPORT_COLUMNS) -> str:
    """Aligned plain-text table, one line per report."""
    cols = list(columns) + ["status"]
    rows = [[_cell({**r.row(), "status": r.status}.get(c)) for c in cols] for r in reports]
    widths = [max(len(c), *(len(row[i]) for row in rows)) if rows else len(c) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"


def _csv(reports: Sequence[MetricsReport]) -> str:
    return MetricsReport.csv_header() + "".join(r.to_csv_row() for r in reports)


def _emit(reports: Sequence[MetricsReport], fmt: str) -> str:
    if fmt == "csv":
        return _csv(reports)
    if fmt == "json":
        return "\n".join(r.to_json() for r in reports) + "\n"
    return format_table(reports)


# ------------------------------------------------------------------- benches

@dataclass(frozen=True)
class BenchPlan:
    """What to run: every algorithm on every dataset for every seed."""

    datasets: tuple[str, ...]
    algorithms: tuple[str, ...]
    seeds: tuple[int, ...]
    metrics: tuple[str, ...] = REPORT_COLUMNS[3:-1]
    output: str = "bench"
    configs: dict[str, dict[str, Any]] = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self) -> None:
        for name in ("datasets", "algorithms", "seeds", "metrics"):
            if not getattr(self, name):
                raise ValidationError(f"plan: {name} must not be empty")
        for a in self.algorithms:
            if a not in CONFIG_KEYS:
                raise ValidationError(f"plan: unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
        for m in self.metrics:
            if m not in REPORT_COLUMNS[3:]:
                raise ValidationError(f"plan: unknown metric {m!r}")
        for a, cfg in self.configs.items():
            if a not in self.algorithms:
                raise ValidationError(f"plan: settings given for {a!r}, which is not in algorithms")
            parse_config(a, cfg)
        if self.workers < 1:
            raise ValidationError("plan: workers must be >= 1")


def _split(value: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in value.replace("\n", ",").split(",") if x.strip())


def _seeds(value: str) -> tuple[int, ...]:
    out: list[int] = []
    for item in _split(value):
        span = re.fullmatch(r"(\d+)\s*-\s*(\d+)", item)
        if span:
            out.extend(range(int(span[1]), int(span[2]) + 1))
        else:
            out.append(int(item))
    return tuple(out)


def load_plan(text: str, base: Path | None = None) -> BenchPlan:
    """Parse a plan::

        [plan]
        datasets = cora
        algorithms = leiden, mcl
        seeds = 0-4
        metrics = acc, nmi, modularity
        output = results/cora

        [leiden]
        objective = modularity

    Sections other than ``[plan]`` hold settings for the named algorithm.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"plan: {exc}") from None
    if not cp.has_section("plan"):
        raise ValidationError("plan: missing [plan] section")
    sec = cp["plan"]
    unknown = set(sec) - {"datasets", "algorithms", "seeds", "metrics", "output", "workers"}
    if unknown:
        raise ValidationError(f"plan: unknown keys {sorted(unknown)}")
    try:
        seeds = _seeds(sec.get("seeds", "0"))
        workers = int(sec.get("workers", "1"))
    except ValueError as exc:
        raise ValidationError(f"plan: {exc}") from None
    output = sec.get("output", "bench")
    if base is not None and not Path(output).is_absolute():
        output = str(base / output)
    return BenchPlan(
        datasets=_split(sec.get("datasets", "")),
        algorithms=_split(sec.get("algorithms", "")),
        seeds=seeds,
        metrics=_split(sec["metrics"]) if "metrics" in sec else REPORT_COLUMNS[3:-1],
        output=output,
        configs={s: dict(cp[s]) for s in cp.sections() if s != "plan"},
        workers=workers,
    )


def _bench_cell(args: tuple[str, Dataset, dict[str, Any], int, bool]) -> MetricsReport:
    algorithm, ds, cfg, seed, timing = args
    try:
        report, _ = _run(algorithm, ds, cfg, seed, timing)
    except Exception as exc:  # a failed cell must not stop the bench
        report = MetricsReport(algorithm, ds.name, seed, status="failed")
        report.flags.append(f"{type(exc).__name__}: {exc}")
    return report


_LOWER_IS_BETTER = {"conductance_mean"}


def summarize(raw: Sequence[MetricsReport]) -> MetricsReport:
    """Best-of-seeds row for one (algorithm, dataset): each metric takes its
    best value over the successful seeds (independently); ``seed`` is -1."""
    first = raw[0]
    ok = [r for r in raw if r.status == "ok"]
    out = MetricsReport(first.algorithm, first.dataset, -1)
    out.extra["seeds"] = [r.seed for r in raw]
    out.extra["failed_seeds"] = [r.seed for r in raw if r.status != "ok"]
    if not ok:
        out.status = "failed"
        return out
    for name in REPORT_COLUMNS[3:-1]:
        vals = [r.entries.get(name, float("nan")) for r in ok]
        vals = [v for v in vals if not math.isnan(v)]
        if vals:
            out.entries[name] = min(vals) if name in _LOWER_IS_BETTER else max(vals)
        else:
            out.entries[name] = float("nan")
    times = [r.wall_ms for r in ok if r.wall_ms is not None]
    if times:
        out.wall_ms = float(np.mean(times))
    out.flags = sorted({f for r in ok for f in r.flags})
    if len(ok) < len(raw):
        out.status = "partial"
    return out


@dataclass
class BenchResult:
    summary: list[MetricsReport]
    raw: list[MetricsReport]

    @property
    def failed(self) -> bool:
        return any(r.status != "ok" for r in self.raw)


def run_bench(plan: BenchPlan, timing: bool = False, datasets: dict[str, Dataset] | None = None) -> BenchResult:
    """Run every (algorithm, dataset, seed) cell, then summarize per
    (algorithm, dataset). Datasets are all loaded before the first run."""
    loaded = dict(datasets or {})
    for name in plan.datasets:
        if name not in loaded:
            try:
                loaded[name] = resolve_dataset(name)
            except IngestError as exc:
                raise ValidationError(str(exc)) from None
    configs = {a: parse_config(a, plan.configs.get(a, {})) for a in plan.algorithms}
    cells = [
        (a, loaded[d], configs[a], s, timing) for d in plan.datasets for a in plan.algorithms for s in plan.seeds
    ]
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            raw = list(pool.map(_bench_cell, cells))
    else:
        raw = [_bench_cell(c) for c in cells]
    per = len(plan.seeds)
    summary = [summarize(raw[i : i + per]) for i in range(0, len(raw), per)]
    return BenchResult(summary, raw)


def write_bench(result: BenchResult, plan: BenchPlan) -> list[Path]:
    """Summary CSV, per-seed CSV, JSON with both, and an aligned text table."""
    out = Path(plan.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    paths = [
        out.with_name(out.name + ".csv"),
        out.with_name(out.name + ".raw.csv"),
        out.with_name(out.name + ".json"),
        out.with_name(out.name + ".txt"),
    ]
    paths[0].write_text(_csv(result.summary))
    paths[1].write_text(_csv(result.raw))
    doc = {
        "summary": [json.loads(r.to_json()) for r in result.summary],
        "raw": [json.loads(r.to_json()) for r in result.raw],
    }
    paths[2].write_text(json.dumps(doc, indent=2) + "\n")
    cols = ["algorithm", "dataset", *plan.metrics, "wall_ms"]
    paths[3].write_text(format_table(result.summary, cols))
    return paths


# ----------------------------------------------------------------------- CLI

class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # bad usage is a validation failure
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("algorithm", help=f"one of: {', '.join(ALGORITHMS)}")
    p.add_argument("--dataset", required=True, help="bundled or synthetic name, or path to a .gct file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, help="number of clusters (default: number of classes)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--ppr-alpha", type=float)
    p.add_argument("--disc-iters", type=int)
    p.add_argument("--pos-weight", help="positive-class weight for reconstruction, or 'auto'")
    p.add_argument("--inflation", type=float)
    p.add_argument("--expansion", type=int)
    p.add_argument("--objective", choices=("modularity", "cpm"))
    p.add_argument("--gamma", type=float, help="Leiden resolution")
    p.add_argument("--normalize-rows", action="store_const", const=True, help="spectral: unit-length embedding rows")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="any other algorithm setting")


def _run_config(args: argparse.Namespace) -> dict[str, Any]:
    raw: dict[str, Any] = {}
    for item in args.set:
        if "=" not in item:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()
    for key in ("k", "epochs", "latent_dim", "lr", "ppr_alpha", "disc_iters", "pos_weight", "inflation",
                "expansion", "objective", "gamma", "normalize_rows"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    return raw


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphclust", description="Graph clustering toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="cluster one dataset with one algorithm and report metrics")
    _add_run_options(p)
    p.add_argument("--format", choices=("csv", "json", "text"), default="csv")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--timing", action="store_true", help="record wall time (reports then differ run to run)")

    p = sub.add_parser("bench", help="run a benchmark plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--workers", type=int, help="override the plan's worker count")
    p.add_argument("--timing", action="store_true")

    p = sub.add_parser("export-embeddings", help="write node embeddings as CSV")
    _add_run_options(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("convert", help="convert edge/feature/label tables to the canonical format")
    p.add_argument("--edges", required=True, help="tab-separated 'u v' lines")
    p.add_argument("--features", required=True, help="CSV: node id, then feature values")
    p.add_argument("--labels", required=True, help="CSV: node id, class")
    p.add_argument("--name", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--header", action="store_true", help="the CSV files have a header row")

    p = sub.add_parser("datasets", help="list known datasets")
    p.add_argument("--verify", action="store_true", help="load each one and print its size")
    return parser


def _load(name: str) -> Dataset:
    try:
        return resolve_dataset(name)
    except IngestError as exc:
        raise ValidationError(str(exc)) from None


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = parse_config(args.algorithm, _run_config(args))
    ds = _load(args.dataset)
    report, _ = _run(args.algorithm, ds, cfg, args.seed, args.timing)
    text = _emit([report], args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace) -> int:
    path = Path(args.plan)
    if not path.exists():
        raise ValidationError(f"plan file {args.plan!r} does not exist")
    plan = load_plan(path.read_text(), base=path.parent)
    if args.workers is not None:
        plan = BenchPlan(**{**plan.__dict__, "workers": args.workers})
    result = run_bench(plan, timing=args.timing)
    paths = write_bench(result, plan)
    sys.stdout.write(format_table(result.summary, ["algorithm", "dataset", *plan.metrics, "wall_ms"]))
    for p in paths:
        print(f"wrote {p}")
    if result.failed:
        for r in result.raw:
            if r.status != "ok":
                print(f"failed: {r.algorithm} on {r.dataset}, seed {r.seed}: {'; '.join(r.flags)}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_export(args: argparse.Namespace) -> int:
    if args.algorithm not in DEEP + ("spectral",):
        raise ValidationError(f"export-embeddings supports {', '.join(DEEP + ('spectral',))}")
    cfg = parse_config(args.algorithm, _run_config(args))
    ds = _load(args.dataset)
    if args.algorithm == "spectral":
        z = spectral.spectral_embedding(ds.graph, _k(cfg, ds), cfg["normalize_rows"])
    else:
        z = _cluster(args.algorithm, ds, cfg, args.seed).embeddings
    assert z is not None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node_id", *(f"dim_{j}" for j in range(z.shape[1])), "label"])
    for i in range(len(z)):
        w.writerow([i, *(repr(float(v)) for v in z[i]), int(ds.labels[i])])
    Path(args.out).write_text(buf.getvalue())
    print(f"wrote {len(z)} x {z.shape[1]} embeddings to {args.out}")
    return EXIT_OK


def _cmd_convert(args: argparse.Namespace) -> int:
    from graphclust.ingest import save_canonical

    try:
        ds = convert_tables(args.edges, args.features, args.labels, args.name, header=args.header)
    except (IngestError, OSError) as exc:
        raise ValidationError(str(exc)) from None
    save_canonical(ds, args.out)
    print(f"{ds.name}: n={ds.num_nodes} m={ds.graph.num_edges} d={ds.num_features} k={ds.num_classes} -> {args.out}")
    return EXIT_OK


def _cmd_datasets(args: argparse.Namespace) -> int:
    for name in BUNDLED + tuple(SYNTHETIC):
        kind = "synthetic" if name in SYNTHETIC else "file"
        try:
            ds = resolve_dataset(name) if (args.verify or kind == "synthetic") else None
            status = "ok"
        except IngestError as exc:
            ds, status = None, f"missing ({exc})"
        if ds is None and status == "ok":
            status = f"not checked (use --verify; looked up under ${DATA_ENV})"
        size = f"n={ds.num_nodes} m={ds.graph.num_edges} d={ds.num_features} k={ds.num_classes}" if ds else ""
        print(f"{name:14s} {kind:9s} {status} {size}".rstrip())
    return EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "bench": _cmd_bench,
    "export-embeddings": _cmd_export,
    "convert": _cmd_convert,
    "datasets": _cmd_datasets,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors (exit 1) and --help (exit 0)
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"graphclust: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (GraphError, NumericError, deep.TrainingError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"graphclust: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
