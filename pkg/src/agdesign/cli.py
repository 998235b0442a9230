"""Command-line front end: ``agdesign {size,power,simulate,reproduce-table,check}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Optional, Sequence

from . import checks
from .config import ConfigError, load
from .harness import TABLE_COLUMNS, empirical_power, reproduce_table
from .power import power, sample_size

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError("", message)


def _threads_default() -> int:
    try:
        return int(os.environ.get("AGDESIGN_THREADS", "1"))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="agdesign", description="Power and sample size for recurrent-event trials.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="scenario JSON file")
            sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                            help="override a config field by dotted path (repeatable)")
        sp.add_argument("--out", choices=("text", "json", "csv"), default="text")

    common(sub.add_parser("size", help="sample size at the target power"))
    common(sub.add_parser("power", help="nominal power at run.n_total"))
    sp = sub.add_parser("simulate", help="Monte Carlo power at run.n_total")
    common(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--threads", type=int, default=_threads_default(), help="0 means all cores")
    sp = sub.add_parser("reproduce-table", help="recompute a published design table")
    common(sp, config=False)
    sp.add_argument("--table", type=int, choices=(1, 2, 3), required=True)
    sp.add_argument("--reps", type=int, default=0, help="Monte Carlo replicates per row (0 skips)")
    sp.add_argument("--seed", type=int, default=20190101)
    sp.add_argument("--threads", type=int, default=_threads_default())
    common(sub.add_parser("check", help="run the built-in invariant suite"), config=False)
    return p


def _render(command: str, result: dict, fmt: str, config: Optional[dict] = None) -> str:
    if fmt == "json":
        doc = {"command": command, "result": result}
        if config is not None:
            doc["config"] = config
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    rows = result["rows"] if "rows" in result else [result]
    cols = list(TABLE_COLUMNS) if command == "reproduce-table" else list(rows[0])
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, cols, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    if "rows" not in result:
        width = max(map(len, cols))
        return "".join(f"{k:<{width}}  {_fmt(v)}\n" for k, v in result.items())
    table = [cols] + [[_fmt(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(cols))]
    return "".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) + "\n" for r in table)


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _run(args) -> tuple[str, dict, Optional[dict]]:
    if args.command == "reproduce-table":
        if args.reps < 0:
            raise ConfigError("--reps", "must be non-negative")
        rows = reproduce_table(args.table, args.reps, args.seed, args.threads)
        return args.command, {"rows": rows}, None
    if args.command == "check":
        results = checks.run_checks()
        rows = [{"check": r.name, "passed": r.passed, "detail": r.detail} for r in results]
        return args.command, {"rows": rows, "all_passed": all(r.passed for r in results)}, None

    overrides = list(args.set)
    if getattr(args, "seed", None) is not None:
        overrides.append(f"run.seed={args.seed}")
    if getattr(args, "reps", None) is not None:
        overrides.append(f"run.replicates={args.reps}")
    res = load(args.config, overrides)
    sc, hyp = res.scenario, res.hypothesis

    if args.command == "size":
        s = sample_size(sc, hyp, res.target_power)
        out = {
            "total_n": s.total_n,
            "n_treatment": s.n_per_arm[0],
            "n_control": s.n_per_arm[1],
            "raw_n": s.raw_n,
            "nominal_power": s.nominal_power,
            "v_beta": s.v_beta,
            "method": s.method,
        }
        return args.command, out, res.config
    if res.n_total is None:
        raise ConfigError("run.n_total", f"required for the {args.command} command")
    if args.command == "power":
        return args.command, {"n_total": res.n_total, "nominal_power": power(sc, hyp, res.n_total)}, res.config
    if res.replicates < 1:
        raise ConfigError("run.replicates", "must be >= 1")
    sim = empirical_power(sc, hyp, res.n_total, res.replicates, res.seed, args.threads)
    out = {"n_total": res.n_total, "seed": res.seed, **sim.to_dict(timing=False)}
    return args.command, out, res.config


def run_cli(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        command, result, config = _run(args)
    except ValueError as exc:  # ConfigError, DirectionError and other bad input
        print(f"error: {exc}", file=stderr)
        return EXIT_VALIDATION
    except ArithmeticError as exc:
        print(f"numeric error: {exc}", file=stderr)
        return EXIT_NUMERIC
    stdout.write(_render(command, result, args.out, config))
    if command == "check" and not result["all_passed"]:
        return EXIT_NUMERIC
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
