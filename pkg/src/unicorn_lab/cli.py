"""``unicorn-lab`` command line: verify, sweep, eval.

Exit codes: 0 pass, 1 verification failure (or an error record from
``eval``), 2 configuration error, 3 internal numerical error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .config import load, load_schema
from .errors import ConfigError, UnicornLabError
from .evaluate import run_eval
from .sweep import QUANTITIES, format_csv, run_sweep
from .verify import SUITES, run_verify

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unicorn-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"unicorn-lab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run verification suites and write a JSON report")
    _common(v)
    v.add_argument("--suite", nargs="+", choices=("all",) + SUITES, help="suites to run")
    v.add_argument("--tol-scale", type=float, help="multiply every upper tolerance")
    v.add_argument("--timings", action="store_true", help="record wall times (breaks byte-identity)")

    s = sub.add_parser("sweep", help="tabulate quantities along a parameter range as CSV")
    _common(s)
    s.add_argument("--param", required=True, choices=sorted(QUANTITIES))
    s.add_argument("--range", nargs=2, type=float, required=True, metavar=("LO", "HI"))
    s.add_argument("--steps", type=int, default=21)
    s.add_argument("--quantity", nargs="+", help="columns to compute (default: all for the parameter)")
    spacing = s.add_mutually_exclusive_group()
    spacing.add_argument("--log", dest="log", action="store_true", default=None)
    spacing.add_argument("--linear", dest="log", action="store_false")

    e = sub.add_parser("eval", help="evaluate the geometry at one point and direction")
    _common(e)
    e.add_argument("--point", nargs="+", type=float, required=True)
    e.add_argument("--direction", nargs="+", type=float, required=True)
    return ap


def _verify(args) -> int:
    overrides = {"seed": args.seed, "tol_scale": args.tol_scale, "suites": args.suite}
    cfg = load(args.config, overrides)
    report = run_verify(cfg, timings=args.timings or None)
    jsonschema.validate(report, load_schema("report.schema.json"))
    out = args.out or cfg.raw["output"]["report"]
    _emit(dumps(report), out)
    s = report["summary"]
    c = s["counts"]
    print(f"{s['verdict']}: {c['pass']} passed, {c['fail']} failed, {c['measured']} measured, "
          f"{c['skipped']} skipped", file=sys.stderr)
    return EXIT_PASS if s["verdict"] == "PASS" else EXIT_FAIL


def _sweep(args) -> int:
    cfg = load(args.config, {"seed": args.seed})
    header, rows = run_sweep(cfg, args.param, args.range[0], args.range[1], args.steps,
                             args.quantity, args.log)
    _emit(format_csv(header, rows), args.out)
    return EXIT_PASS


def _eval(args) -> int:
    cfg = load(args.config, {"seed": args.seed})
    if len(args.point) != cfg.background.dim or len(args.direction) != cfg.background.dim:
        raise ConfigError(f"--point and --direction need {cfg.background.dim} values")
    record, ok = run_eval(cfg, np.array(args.point), np.array(args.direction))
    jsonschema.validate(record, load_schema("eval.schema.json"))
    _emit(dumps(record), args.out)
    return EXIT_PASS if ok else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"verify": _verify, "sweep": _sweep, "eval": _eval}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UnicornLabError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
