"""Command line: ``dampwave run <config> [--out DIR] [--plots] [--jobs N]`` and ``dampwave report <dir>``.

A run directory holds ``config.resolved.toml``, one CSV per series,
``summary.json`` (deterministic) and ``record.json`` (timestamp and
paths).  ``run`` exits with status 0 iff no item has a VIOLATION verdict;
schema errors exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .config import ConfigError, dumps, experiment_id, load
from .scaling import VIOLATION
from .suites import ItemResult, expand, run_item, worst

logger = logging.getLogger(__name__)

JOBS_ENV = "DAMPWAVE_JOBS"
RESOLVED_NAME = "config.resolved.toml"
SUMMARY_NAME = "summary.json"
RECORD_NAME = "record.json"
EXPECTED_FILES = (RESOLVED_NAME, SUMMARY_NAME)


@dataclass
class RunRecord:
    experiment_id: str
    timestamp: str
    directory: str
    artifacts: list
    verdicts: dict

    @property
    def exit_status(self) -> int:
        return 1 if self.verdicts.get(VIOLATION, 0) else 0


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _jsonable(obj):
    """JSON-safe copy; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _plot_script(csv_name: str, x: str, ys: list, columns: list, log: bool) -> str:
    idx = {c: k + 1 for k, c in enumerate(columns)}
    lines = ["set datafile separator ','", "set key autotitle columnhead", f"set xlabel '{x}'"]
    if log:
        lines.append("set logscale xy")
    plots = [f"'{csv_name}' using {idx[x]}:{idx[y]} with linespoints title '{y}'" for y in ys]
    lines.append("plot " + ", \\\n     ".join(plots))
    lines.append("pause -1")
    return "\n".join(lines) + "\n"


def resolve_jobs(jobs) -> int:
    """``--jobs`` value, overridden by the environment variable when set."""
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise ConfigError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
    return max(1, int(jobs or 1))


def execute(cfg: dict, out_dir, plots: bool = False, jobs: int = 1) -> RunRecord:
    """Run the suite of a resolved config and write all artifacts to ``out_dir``."""
    eid = experiment_id(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    items = expand(cfg)
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
            futures = [pool.submit(run_item, fn, cfg, eid, label, kw) for label, fn, kw in items]
            results = [f.result() for f in futures]
    else:
        results = [run_item(fn, cfg, eid, label, kw) for label, fn, kw in items]
    return collect(cfg, eid, out, results, plots)


def collect(cfg: dict, eid: str, out: Path, results: list, plots: bool) -> RunRecord:
    """Single writer for all artifacts, in item order."""
    (out / RESOLVED_NAME).write_text(dumps(cfg))
    artifacts, rows, details = [RESOLVED_NAME], [], []
    for res in results:
        res: ItemResult
        for name, (columns, table) in res.tables.items():
            (out / name).write_text(_csv_text(columns, table))
            artifacts.append(name)
            if plots and name in res.plots:
                x, ys, log = res.plots[name]
                gp = Path(name).with_suffix(".gp").name
                (out / gp).write_text(_plot_script(name, x, ys, columns, log))
                artifacts.append(gp)
        for row in res.rows:
            rows.append({**row, "csv": sorted(res.tables)})
        details.append({"label": res.label, **res.detail})
    counts: dict = {}
    for row in rows:
        counts[row["verdict"]] = counts.get(row["verdict"], 0) + 1
    summary = {"experiment_id": eid, "suite": cfg["suite"], "overall": worst(r["verdict"] for r in rows),
               "verdicts": dict(sorted(counts.items())), "rows": rows, "details": details}
    (out / SUMMARY_NAME).write_text(json.dumps(_jsonable(summary), indent=1, sort_keys=True) + "\n")
    artifacts.append(SUMMARY_NAME)
    rec = RunRecord(eid, datetime.now(timezone.utc).isoformat(timespec="seconds"), str(out), artifacts + [RECORD_NAME],
                    summary["verdicts"])
    (out / RECORD_NAME).write_text(json.dumps(rec.__dict__, indent=1) + "\n")
    return rec


def run(config_path, out_dir=None, plots=None, jobs=1) -> RunRecord:
    """Load, validate and execute a config file."""
    cfg = load(config_path)
    if plots is not None:
        cfg["output"]["plots"] = bool(plots)
    eid = experiment_id(cfg)
    out_dir = out_dir or cfg["output"]["dir"] or os.path.join("runs", f"{cfg['suite']}-{eid}")
    cfg["output"]["dir"] = str(out_dir)
    return execute(cfg, out_dir, cfg["output"]["plots"], resolve_jobs(jobs))


# ---------------------------------------------------------------------------
# report


def _run_dirs(root: Path) -> list:
    if (root / SUMMARY_NAME).is_file():
        return [root]
    return sorted(p.parent for p in root.glob(f"*/{SUMMARY_NAME}"))


def _num(v) -> str:
    if isinstance(v, str):
        return "-" if v == "nan" else v
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-"
    return f"{v:.4g}"


def report(directory) -> str:
    """One table per run: label, predicted exponent, fitted slope, verdict and CSV pointers.

    Raises
    ------
    FileNotFoundError
        Listing the expected files when no run is found.
    """
    root = Path(directory)
    dirs = _run_dirs(root) if root.is_dir() else []
    if not dirs:
        raise FileNotFoundError(f"no run artifacts in {directory}: expected {', '.join(EXPECTED_FILES)} "
                                f"in the directory or in its subdirectories")
    blocks = []
    for d in dirs:
        missing = [f for f in EXPECTED_FILES if not (d / f).is_file()]
        if missing:
            blocks.append(f"{d.name}: missing {', '.join(missing)}")
            continue
        s = json.loads((d / SUMMARY_NAME).read_text())
        head = ["item", "predicted", "slope", "verdict", "csv", "note"]
        table = [[r["label"], _num(r["predicted"]), _num(r["slope"]), r["verdict"], " ".join(r["csv"]), r["note"]]
                 for r in s["rows"]]
        widths = [max(len(str(x)) for x in col) for col in zip(head, *table)]
        fmt = lambda row: "  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip()
        lines = [f"== {s['suite']} ({s['experiment_id']}): {s['overall']}", fmt(head),
                 fmt(["-" * w for w in widths])]
        lines += [fmt(r) for r in table]
        counts = ", ".join(f"{k} {v}" for k, v in s["verdicts"].items())
        lines.append(f"verdicts: {counts}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dampwave", description="Damped-wave numerical experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the suite described by a TOML config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--plots", action="store_true", default=None, help="write gnuplot scripts")
    p_run.add_argument("--jobs", type=int, default=1, help=f"worker processes (overridden by ${JOBS_ENV})")
    p_rep = sub.add_parser("report", help="summarize run directories")
    p_rep.add_argument("directory")
    p_run.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        try:
            rec = run(args.config, args.out, args.plots, args.jobs)
        except (ConfigError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        counts = ", ".join(f"{k} {v}" for k, v in rec.verdicts.items())
        print(f"{rec.experiment_id} -> {rec.directory} ({counts})")
        return rec.exit_status
    try:
        sys.stdout.write(report(args.directory))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
