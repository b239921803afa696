"""Command-line front end.

Exit codes: 0 success, 2 invalid config or arguments, 3 property violation
under --strict.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .harness import (ConfigError, ExperimentConfig, PRESET_NAMES, diagnose,
                      export, preset_config, run)
from .numstats import Rng
from .oracles import SymmetricMixingParams, mcc_closed_form, null_mcc_floor
from .properties import (MATRIX_METRICS, Thresholds, matrix_to_csv,
                         verdict_matrix)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VIOLATION = 3


def _parse_grid(text: str, *, integer: bool = False) -> list:
    """Grid axis syntax: comma list `0,0.5,0.9` or range `lo:hi:count`."""
    cast = int if integer else float
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range grid must be lo:hi:count, got {text!r}")
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError("grid count must be >= 1")
        if count == 1:
            return [cast(lo)]
        step = (hi - lo) / (count - 1)
        return [cast(round(lo + i * step, 12)) for i in range(count)]
    return [cast(v) for v in text.split(",") if v != ""]


def _cmd_run(args) -> int:
    try:
        config = ExperimentConfig.from_json(Path(args.config).read_text())
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return _run_and_export(config, args)


def _cmd_preset(args) -> int:
    if args.list or args.name is None:
        for name in PRESET_NAMES:
            print(name)
        return EXIT_OK
    try:
        config = preset_config(args.name)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.show:
        print(config.to_json())
        return EXIT_OK
    return _run_and_export(config, args)


def _run_and_export(config: ExperimentConfig, args) -> int:
    table = run(config)
    out_dir = Path(args.out) if args.out else Path(f"results/{config.name}")
    formats = tuple(args.formats.split(","))
    paths = export(table, out_dir, formats=formats)
    defined = sum(1 for r in table.rows if r.defined)
    print(f"{config.name}: {len(table.rows)} rows ({defined} defined), "
          f"{len(table.skipped)} cells skipped")
    for _, path in sorted(paths.items()):
        print(f"  wrote {path}")
    for cell, reason in table.skipped:
        print(f"  skipped {cell}: {reason}")
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    try:
        report = diagnose(args.z, args.zhat,
                          split_fraction=args.split_fraction,
                          rng=Rng(args.seed))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n")
    print(report.to_markdown(), end="")
    return EXIT_OK


def _cmd_properties(args) -> int:
    file_cfg = {}
    if args.config is not None:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read properties config: {exc}",
                  file=sys.stderr)
            return EXIT_CONFIG
        if not isinstance(file_cfg, dict):
            print("error: properties config must be a JSON object",
                  file=sys.stderr)
            return EXIT_CONFIG
    # config file fills anything not given explicitly on the command line
    taus = dict(file_cfg.get("thresholds", {}))
    for name in ("tau1", "tau2", "tau3", "tau4"):
        if getattr(args, name) is not None:
            taus[name] = getattr(args, name)
    thresholds = Thresholds(**taus)
    if args.seeds is None:
        args.seeds = int(file_cfg.get("seeds", 5))
    if args.seed is None:
        args.seed = int(file_cfg.get("seed", 42))
    if args.metrics is None and file_cfg.get("metrics"):
        args.metrics = ",".join(file_cfg["metrics"])
    metrics = (tuple(args.metrics.split(",")) if args.metrics
               else MATRIX_METRICS)
    unknown = [m for m in metrics if m not in MATRIX_METRICS]
    if unknown:
        print(f"error: matrix metrics must be among {MATRIX_METRICS}, "
              f"got {unknown}", file=sys.stderr)
        return EXIT_CONFIG
    matrix = verdict_matrix(metrics=metrics, seeds=args.seeds,
                            thresholds=thresholds, rng=Rng(args.seed))
    reports = matrix.pop("_reports")
    for metric in metrics:
        row = " ".join(f"{p}={matrix[metric][p]}"
                       for p in sorted(matrix[metric]))
        print(f"{metric}: {row}")
    if args.out:
        matrix_to_csv(matrix, args.out)
        print(f"wrote {args.out}")
    if args.report:
        payload = [r.to_json() for r in reports]
        Path(args.report).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(f"wrote {args.report}")
    violated = sorted({m for m in matrix
                       for p in matrix[m] if matrix[m][p] == "violated"})
    if violated and args.strict:
        print(f"violations under --strict: {', '.join(violated)}",
              file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def _oracle_rows(args):
    if args.name == "mcc-closed-form":
        rhos = _parse_grid(args.rho)
        epsilons = _parse_grid(args.eps)
        yield ["rho", "eps", "mcc"]
        for eps in epsilons:
            for rho in rhos:
                p = SymmetricMixingParams(rho=rho, eps=eps)
                yield [repr(rho), repr(eps), repr(mcc_closed_form(p))]
    else:  # null-floor; argparse restricts the choices
        ms = _parse_grid(args.m, integer=True)
        ns = _parse_grid(args.n, integer=True)
        yield ["m", "n", "floor"]
        for m in ms:
            for n in ns:
                yield [m, n, repr(null_mcc_floor(m, n))]


def _cmd_oracle(args) -> int:
    try:
        rows = list(_oracle_rows(args))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out is None:
        csv.writer(sys.stdout).writerows(rows)
    else:
        with open(args.out, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
        print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentbench",
        description="Stress tests for identifiability and disentanglement "
                    "metrics on synthetic ground-truth factor models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config (JSON)")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--formats", default="csv,json")
    p_run.set_defaults(func=_cmd_run)

    p_preset = sub.add_parser("preset", help="run a shipped experiment preset")
    p_preset.add_argument("name", nargs="?", default=None,
                          metavar="{" + ",".join(PRESET_NAMES) + "}")
    p_preset.add_argument("--list", action="store_true",
                          help="list preset names")
    p_preset.add_argument("--show", action="store_true",
                          help="print the preset config instead of running")
    p_preset.add_argument("--out", default=None)
    p_preset.add_argument("--formats", default="csv,json")
    p_preset.set_defaults(func=_cmd_preset)

    p_diag = sub.add_parser(
        "diagnose", help="checklist report for a candidate representation")
    p_diag.add_argument("--z", required=True, help="factors CSV (z0..z{d-1})")
    p_diag.add_argument("--zhat", required=True,
                        help="codes CSV (c0..c{m-1})")
    p_diag.add_argument("--json", default=None,
                        help="also write the JSON report here")
    p_diag.add_argument("--split-fraction", type=float, default=0.8)
    p_diag.add_argument("--seed", type=int, default=7)
    p_diag.set_defaults(func=_cmd_diagnose)

    p_prop = sub.add_parser(
        "properties", help="run the property checkers and print the "
                           "metric-by-property verdict matrix")
    p_prop.add_argument("config", nargs="?", default=None,
                        help="optional JSON file with metrics/seeds/"
                             "thresholds; flags override it")
    p_prop.add_argument("--metrics", default=None,
                        help="comma list, default all matrix metrics")
    p_prop.add_argument("--seeds", type=int, default=None)
    p_prop.add_argument("--seed", type=int, default=None)
    p_prop.add_argument("--tau1", type=float, default=None)
    p_prop.add_argument("--tau2", type=float, default=None)
    p_prop.add_argument("--tau3", type=float, default=None)
    p_prop.add_argument("--tau4", type=float, default=None)
    p_prop.add_argument("--out", default=None, help="write matrix CSV here")
    p_prop.add_argument("--report", default=None,
                        help="write full JSON reports here")
    p_prop.add_argument("--strict", action="store_true",
                        help="exit 3 when any verdict is violated")
    p_prop.set_defaults(func=_cmd_properties)

    p_oracle = sub.add_parser(
        "oracle", help="export closed-form reference curves as CSV")
    p_oracle.add_argument("name", choices=("mcc-closed-form", "null-floor"))
    p_oracle.add_argument("--rho", default="-0.99:0.99:9",
                          help="rho grid (comma list or lo:hi:count)")
    p_oracle.add_argument("--eps", default="0.25,0.5,0.75,1.0")
    p_oracle.add_argument("--m", default="2,5,10,20,50")
    p_oracle.add_argument("--n", default="20,100,1000,10000")
    p_oracle.add_argument("--out", default=None)
    p_oracle.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad arguments already; normalize others
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
