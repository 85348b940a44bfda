"""Command-line entry point ``bem-local``.

Exit codes: 0 pass, 1 rate-check failure, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .geometry import GeometryError
from .harness import (
    ConfigError,
    ExperimentError,
    config_from_mapping,
    emit_csv,
    emit_plot_data,
    load_geometry,
    parse_alpha,
    predicted_rates,
    read_config_file,
    run_experiment,
)

EXIT_PASS = 0
EXIT_RATE = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bem-local", description="Local convergence experiments for 2D Laplace BEM.")
    p.add_argument("-v", "--verbose", action="store_true", help="log every level")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one convergence experiment")
    run.add_argument("--config", help="key=value file mirroring these flags (flags override it)")
    run.add_argument("--geometry", help="lshape, zshape, square or file:PATH")
    run.add_argument("--equation", choices=["symm", "hypsing"])
    run.add_argument("--alpha", type=str, help="exponent of the manufactured solution, e.g. 1/3")
    run.add_argument("--levels", type=int)
    run.add_argument("--elements-per-edge", type=int)
    run.add_argument("--region-dist", type=float, help="region = midpoints at least this fraction of diam from the corner")
    run.add_argument("--eoc-window", type=int)
    run.add_argument("--hm12-refine", type=int)
    run.add_argument("--energy-refine", type=int)
    run.add_argument("--tolerance", type=float, help="local-rate tolerance")
    run.add_argument("--global-l2", action="store_true", default=None, help="also report the global L2 error")
    run.add_argument("--csv")
    run.add_argument("--plot")
    run.add_argument("--threads", type=int)

    pred = sub.add_parser("predict", help="print predicted rates")
    pred.add_argument("--geometry", required=True)
    pred.add_argument("--alpha", required=True)
    pred.add_argument("--equation", choices=["symm", "hypsing"], default="symm")

    ver = sub.add_parser("verify", help="run the acceptance suite")
    ver.add_argument("--only", nargs="*", type=int, help="criterion numbers to run")
    return p


_FLAG_FIELDS = (
    "geometry",
    "equation",
    "alpha",
    "levels",
    "elements_per_edge",
    "region_dist",
    "eoc_window",
    "hm12_refine",
    "energy_refine",
    "tolerance",
    "csv",
    "plot",
    "threads",
)


def _run(args) -> int:
    values = read_config_file(args.config) if args.config else {}
    for name in _FLAG_FIELDS:
        v = getattr(args, name)
        if v is not None:
            values[name] = parse_alpha(v) if name == "alpha" else v
    if args.global_l2:
        values["report_global_l2"] = True
    if "csv" not in values:
        raise ConfigError("--csv is required (flag or config key)")
    cfg = config_from_mapping(values)

    def progress(rec):
        cells = " ".join(f"{k}={v:.4e}" for k, v in rec.norms.items())
        print(f"level {rec.level} N={rec.N} {cells}", flush=True)

    table = run_experiment(cfg, progress)
    emit_csv(table, cfg.csv)
    if cfg.plot:
        emit_plot_data(table, cfg.plot)
    print(table.summary())
    return EXIT_PASS if table.all_passed else EXIT_RATE


def _predict(args) -> int:
    poly = load_geometry(args.geometry)
    rates = predicted_rates(poly, parse_alpha(args.alpha), args.equation)
    for name, r in rates.items():
        print(f"{name} {r:.6f}")
    return EXIT_PASS


def _verify(args) -> int:
    from .acceptance import run_all

    results = run_all(args.only)
    return EXIT_PASS if all(r.passed for r in results) else EXIT_RATE


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "predict":
            return _predict(args)
        return _verify(args)
    except (ConfigError, GeometryError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ExperimentError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
