"""Command line entry point: ``bafflesim run | sweep | report``."""
import argparse
import glob
import json
import logging
import os
import sys

from ..exceptions import BaffleError
from .config import build_config, load_config_file, parse_value
from .experiment import run_experiment, sweep
from .report import emit_report, emit_sweep, format_table, load_summary, report_to_dict


def _pairs(items, what):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"{what} expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _config_from_args(args):
    file_values = load_config_file(args.config) if args.config else {}
    return build_config(args.scenario, file_values, args.seed, _pairs(args.set, "--set"))


def _grid(items):
    grid = {}
    for key, raw in _pairs(items, "--grid").items():
        value = parse_value(raw if raw.startswith("[") else f"[{raw}]")
        grid[key] = value if isinstance(value, list) else [value]
    return grid


def cmd_run(args):
    config = _config_from_args(args)
    report = run_experiment(config)
    summary, rounds = emit_report(report, args.out)
    print(format_table([{"label": config.config_hash(), "fp_rate": report.fp_rate,
                         "fn_rate": report.fn_rate}]), end="")
    print(f"wrote {summary}\nwrote {rounds}")


def cmd_sweep(args):
    config = _config_from_args(args)
    grid = _grid(args.grid)
    results = sweep(config, grid)
    path, _ = emit_sweep(results, config, grid, args.out)
    rows = [{"label": ",".join(f"{k}={v}" for k, v in point.items()),
             "fp_rate": rep.fp_rate, "fn_rate": rep.fn_rate} for point, rep in results]
    print(format_table(rows), end="")
    print(f"wrote {path}")


def _load_rows(path):
    if os.path.isdir(path):
        files = sorted(glob.glob(os.path.join(path, "summary-*.json")))
        if not files:
            raise BaffleError(f"no summary-*.json files under {path}")
        return [_summary_row(load_summary(f)) for f in files]
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "rows" in doc:
        return [{"label": ",".join(f"{k}={v}" for k, v in row["point"].items()),
                 "fp_rate": row["fp_rate"], "fn_rate": row["fn_rate"]} for row in doc["rows"]]
    return [_summary_row(load_summary(path))]


def _summary_row(report):
    return {"label": report.config_hash, "fp_rate": report.fp_rate, "fn_rate": report.fn_rate}


def cmd_report(args):
    if args.format == "json" and not os.path.isdir(args.input):
        with open(args.input, encoding="utf-8") as fh:
            doc = json.load(fh)
        if "rows" not in doc:
            doc = report_to_dict(load_summary(args.input))
            doc = {k: doc[k] for k in ("config_hash", "fp_rate", "fn_rate")}
        print(json.dumps(doc, indent=2, sort_keys=True))
        return
    rows = _load_rows(args.input)
    if args.format == "json":
        print(json.dumps(rows, indent=2, sort_keys=True))
    else:
        print(format_table(rows, args.format), end="")


def _add_common(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--scenario", choices=["stable", "early"])
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable)")


def build_parser():
    parser = argparse.ArgumentParser(prog="bafflesim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a single experiment")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter grid")
    _add_common(p)
    p.add_argument("--grid", action="append", required=True, metavar="KEY=V1,V2,...",
                   help="grid axis (repeatable)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="reformat existing output")
    p.add_argument("input", help="summary/sweep JSON file or an output directory")
    p.add_argument("--format", choices=["text", "markdown", "json"], default="text")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (BaffleError, argparse.ArgumentTypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
