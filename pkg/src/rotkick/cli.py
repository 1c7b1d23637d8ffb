"""Command-line entry point: ``rotkick scan|compare|fractional|heatmap``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from rotkick.errors import ConfigError, NumericalError
from rotkick.scan import (
    PULSE_MODELS,
    ScanConfig,
    compare_species,
    emit_heatmap,
    fractional_scan,
    read_scan_csv,
    resolve_output_dir,
    run_scan,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

log = logging.getLogger("rotkick")


def _add_run_args(p):
    p.add_argument("--config", required=True, help="key = value scan configuration file")
    p.add_argument("--output", help="output directory (default: config output_dir, then $ROTKICK_OUTPUT_DIR)")
    p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("--mode", choices=PULSE_MODELS, help="override the configured pulse_model")


def build_parser():
    parser = argparse.ArgumentParser(prog="rotkick", description="Rotational excitation by periodic pulse trains.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_args(sub.add_parser("scan", help="period sweep for one species"))
    _add_run_args(sub.add_parser("compare", help="energy ratio of two species"))
    _add_run_args(sub.add_parser("fractional", help="sweep with per-parity excitation columns"))
    hm = sub.add_parser("heatmap", help="PGM map of a per-state normalized scan")
    hm.add_argument("--input", required=True, help="scan.csv or scan_normalized.csv")
    hm.add_argument("--out", required=True, help="output .pgm path")
    return parser


def _load_config(args):
    config = ScanConfig.from_file(args.config)
    if args.mode:
        config = replace(config, pulse_model=args.mode)
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    return config


def _dispatch(args):
    if args.command == "heatmap":
        scan = read_scan_csv(args.input)
        emit_heatmap(scan, args.out)
        print(f"wrote {args.out}")
        return
    config = _load_config(args)
    out = resolve_output_dir(config, args.output)
    if args.command == "scan":
        scan = run_scan(config, args.workers, out)
        print(f"{scan.species}: resonance at {scan.resonance_period} ps; wrote {out}/scan.csv")
    elif args.command == "compare":
        cmp = compare_species(config, args.workers, out)
        for name, period, e1, e2, ratio in cmp.table:
            print(f"at T_rev({name}) = {period:.6f} ps: ratio {ratio:.6g} ({e1:.6g} / {e2:.6g} cm^-1)")
        print(f"wrote {out}/compare.csv")
    elif args.command == "fractional":
        fractional_scan(config, args.workers, out)
        print(f"wrote {out}/parity.csv")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _dispatch(args)
    except ConfigError as exc:
        print(f"rotkick: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"rotkick: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"rotkick: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
