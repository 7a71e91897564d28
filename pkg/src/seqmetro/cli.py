"""Command-line experiment runner.

Exit codes: 0 success, 1 validation or invariant failure, 2 configuration
error, 3 resource guard.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .config import EXPERIMENTS as NAMES
from .config import ConfigError, ExperimentConfig, load_config
from .errors import DomainError, NumericalError, ResourceError, UsageError

log = logging.getLogger("seqmetro")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3


def format_value(v) -> str:
    """Text form used in CSV cells: ``repr`` for floats, which switches to
    scientific notation below 1e-4 in magnitude."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def _normalize(row) -> tuple:
    out = []
    for v in row:
        if hasattr(v, "item"):  # numpy scalar
            v = v.item()
        out.append(v)
    return tuple(out)


def execute(cfg: ExperimentConfig) -> tuple[tuple[str, ...], list[tuple]]:
    """Evaluate every grid point of ``cfg`` and return ``(columns, rows)``."""
    from .experiments import EXPERIMENTS

    exp = EXPERIMENTS[cfg.experiment]
    tasks = exp.tasks(cfg)
    log.info("%s: %d grid points on %d worker(s)", cfg.experiment, len(tasks), cfg.workers)
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(exp.evaluate, tasks))
    else:
        chunks = [exp.evaluate(t) for t in tasks]
    rows = [_normalize(r) for chunk in chunks for r in chunk]
    if exp.check is not None:
        for r in rows:
            exp.check(dict(zip(exp.columns, r)))
    return exp.columns, rows


def metadata(cfg: ExperimentConfig) -> dict:
    from ._kernels import backend

    return {
        "artifact": "seqmetro",
        "version": __version__,
        "backend": backend(),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.resolved(),
    }


def render(cfg: ExperimentConfig, columns, rows, meta: dict) -> str:
    if cfg.format == "json":
        doc = {"metadata": meta, "columns": list(columns), "rows": [[_json_value(v) for v in r] for r in rows]}
        return json.dumps(doc, indent=1, default=str) + "\n"
    buf = io.StringIO()
    buf.write("# metadata: " + json.dumps(meta, sort_keys=True, default=str) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(v) for v in r])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqmetro", description="Sequential-measurement metrology experiments.")
    p.add_argument("experiment", choices=NAMES)
    p.add_argument("--config", help="INI file with [run], [grid] and [noise] sections")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--count", type=int, help="trajectories for the sample experiment")
    p.add_argument("--full-scale", action="store_true", default=None, help="allow large grids beyond the desk-scale guards")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {"out": args.out, "format": args.format, "workers": args.workers, "seed": args.seed, "count": args.count, "full_scale": args.full_scale}
    try:
        cfg = load_config(args.config, args.experiment, overrides)
        columns, rows = execute(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UsageError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        where = f" (limiting parameter: {exc.parameter})" if getattr(exc, "parameter", None) else ""
        print(f"resource guard: {exc}{where}", file=sys.stderr)
        return EXIT_RESOURCE
    except NumericalError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_FAIL
    text = render(cfg, columns, rows, metadata(cfg))
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if cfg.experiment == "validate":
        failed = [r[0] for r in rows if r[-1] != "pass"]
        for r in rows:
            print(f"{r[-1].upper():4s} {r[0]}  value={format_value(r[1])}  tol={format_value(r[2])}", file=sys.stderr)
        if failed:
            print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
            return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
