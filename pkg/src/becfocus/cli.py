"""Command-line entry point ``becfocus``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace

import numpy as np
from scipy import fft

from .config import ConfigError, load_config
from .gpe.focus import analyse_profile
from .runner import run

MODES = {
    "ground-state": "ground-state",
    "focus": "gpe",
    "classical": "classical",
    "budget": "budget",
    "sweep": "sweep",
}


def _common(p):
    p.add_argument("-c", "--config", required=True, help="experiment configuration file")
    p.add_argument("-o", "--output", help="output directory (overrides run.output)")
    p.add_argument("-j", "--threads", type=int, default=1, help="FFT threads and sweep workers")
    dim = p.add_mutually_exclusive_group()
    dim.add_argument("--2d", dest="planar", action="store_true", default=None, help="effective 2D (y integrated out)")
    dim.add_argument("--3d", dest="planar", action="store_false", help="full 3D grid")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="becfocus", description="BEC focusing by a standing-wave lattice")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("ground-state", "imaginary-time ground state"),
        ("focus", "GPE focusing run (interacting and/or non-interacting)"),
        ("classical", "classical ray deposition through one lattice slit"),
        ("budget", "closed-form aberration budget"),
        ("sweep", "kick or power sweep"),
    ]:
        _common(sub.add_parser(name, help=help_))
    an = sub.add_parser("analyze", help="re-fit a profile CSV")
    an.add_argument("profile", help="CSV with x_um in the first column")
    an.add_argument("--column", help="density column (default: second column)")
    an.add_argument("--model", choices=("voigt", "gaussian"), default="voigt")
    an.add_argument("--wavelength-um", type=float, default=12.48, help="lattice wavelength for the +-lambda/4 fit windows")
    an.add_argument("--mode", choices=("single", "sweep"), default="single")
    an.add_argument("--threshold", type=float, default=1.0 / math.e)
    an.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _analyze(args) -> int:
    with open(args.profile, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    col = header.index(args.column) if args.column else 1
    x = data[:, 0] * 1e-6
    fwhm, peak, _, peaks = analyse_profile(x, data[:, col], args.wavelength_um * 1e-6, mode=args.mode, model=args.model, threshold=args.threshold)
    print(json.dumps({"column": header[col], "fwhm_um": fwhm * 1e6, "peak": peak, "n_peaks": len(peaks)}, indent=2))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "analyze":
            return _analyze(args)
        cfg = load_config(args.config)
        cfg = cfg.with_(run=replace(cfg.run, mode=MODES[args.command], workers=max(args.threads, 1)))
        if args.planar is not None:
            cfg = cfg.with_(grid=replace(cfg.grid, planar=args.planar))
        with fft.set_workers(max(args.threads, 1)):
            manifest = run(cfg, args.output)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error ({args.command}): {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(manifest.summary, indent=2, default=str))
    for w in manifest.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
