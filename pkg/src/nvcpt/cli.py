"""Command-line entry point: ``nvcpt <subcommand> [options]``.

Exit status is 0 on success, 1 for invalid input (configuration, arguments,
files) and 2 when the numerics fail (integrator, degenerate steady state,
fit).
"""
from __future__ import annotations

import argparse
import os
import sys
from contextlib import contextmanager
from typing import Sequence

import numpy as np

from .config import Config, ConfigError, apply_overrides, parse_config
from .dressed import DressingSpec, dip_positions
from .dynamics import DegenerateSteadyState, IntegrationError
from .experiments import cpt_scan, ple_scan, rabi_scan, stark_scan
from .fitting import FitError, fit_cpt
from .io import read_spectrum, write_fit, write_spectrum
from .model import HermiticityError, NUCLEAR_PROJECTIONS, two_photon_resonance
from .selftest import SHIPPED, run_selftest, shipped_config_text

SUBCOMMANDS = ("rabi", "ple", "cpt", "stark", "dips", "fit", "selftest")
NUMERICAL_ERRORS = (IntegrationError, DegenerateSteadyState, FitError, HermiticityError,
                    np.linalg.LinAlgError, FloatingPointError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH",
                   help="configuration file, or the name of a shipped one (e.g. fig2c.conf)")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="SECTION.KEY=VALUE", help="override a configuration value (repeatable)")
    p.add_argument("--mode", choices=("steady", "time"), help="shortcut for --set scan.mode=...")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nvcpt", description="Nuclear-spin-resolved CPT simulator for NV centers.")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}",
                                parser_class=_Parser)
    p = sub.add_parser("rabi", help="microwave Rabi oscillation trace")
    _common(p)
    p.add_argument("--readout", choices=("A2", "Ey"), help="optical readout transition")
    p = sub.add_parser("ple", help="photoluminescence excitation spectrum")
    _common(p)
    p.add_argument("--spin", choices=("-1", "+1", "both"), help="microwave-populated spin")
    p = sub.add_parser("cpt", help="CPT spectrum versus two-photon detuning")
    _common(p)
    p = sub.add_parser("stark", help="CPT spectra under a dressing microwave, one file per setting")
    _common(p)
    p = sub.add_parser("dips", help="predicted dressed-state dip positions")
    _common(p)
    p = sub.add_parser("fit", help="fit Lorentzian dips to a spectrum file")
    _common(p)
    p.add_argument("spectrum", help="spectrum CSV written by this program")
    p.add_argument("--centers", help="'theory' or a comma-separated list of centers (MHz)")
    p = sub.add_parser("selftest", help="run the invariant checks and every shipped configuration")
    p.add_argument("--quick", action="store_true", help="coarser scan grids")
    return parser


def resolve_config_path(path: str) -> str | None:
    """Existing file path, or ``None`` when ``path`` names a shipped configuration."""
    if os.path.exists(path):
        return path
    name = os.path.basename(path).removesuffix(".conf")
    if name in SHIPPED:
        return None
    raise ConfigError(f"configuration file {path!r} not found")


def load(args) -> Config:
    if args.config:
        path = resolve_config_path(args.config)
        if path is None:
            text = shipped_config_text(os.path.basename(args.config).removesuffix(".conf"))
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        cfg = parse_config(text)
    else:
        cfg = parse_config("")
    overrides = list(args.overrides)
    if getattr(args, "mode", None):
        overrides.append(f"scan.mode={args.mode}")
    return apply_overrides(cfg, overrides)


@contextmanager
def _sink(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _indexed(path: str, k: int) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}_{k}{ext or '.csv'}"


def _theory_centers(cfg: Config):
    """Centers and initial weights: dressed positions if a microwave is configured."""
    f = cfg.fields
    params = cfg.params
    if f.mw_rabi > 0:
        dips = dip_positions(params, DressingSpec.from_offset(params, f.mw_rabi, f.mw_detuning))
        chosen = [d for d in dips if d.weight > cfg.fit.min_weight]
        return [d.position for d in chosen], [d.weight for d in chosen]
    return [two_photon_resonance(params, m) for m in NUCLEAR_PROJECTIONS], None


def _run(args) -> int:
    if args.command == "selftest":
        checks = run_selftest(quick=args.quick)
        for c in checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail} ({c.seconds:.1f} s)")
        failed = sum(not c.passed for c in checks)
        print(f"{len(checks) - failed}/{len(checks)} checks passed")
        return 0 if failed == 0 else 2

    cfg = load(args)
    if args.command == "cpt":
        spectra = [cpt_scan(cfg)]
    elif args.command == "rabi":
        spectra = [rabi_scan(cfg, args.readout)]
    elif args.command == "ple":
        spectra = [ple_scan(cfg, args.spin)]
    elif args.command == "stark":
        spectra = stark_scan(cfg)
        if args.out:
            for k, spec in enumerate(spectra):
                with _sink(_indexed(args.out, k)) as fh:
                    write_spectrum(spec, fh)
            return 0
    elif args.command == "dips":
        f = cfg.fields
        dips = dip_positions(cfg.params, DressingSpec.from_offset(cfg.params, f.mw_rabi, f.mw_detuning))
        with _sink(args.out) as fh:
            fh.write("m_n,branch,position_mhz,weight\n")
            for d in dips:
                fh.write(f"{d.m_n:+d},{d.branch},{d.position:.9g},{d.weight:.9g}\n")
        return 0
    elif args.command == "fit":
        try:
            spectrum = read_spectrum(args.spectrum)
        except OSError as exc:
            raise ConfigError(f"cannot read {args.spectrum}: {exc.strerror}") from None
        source = args.centers if args.centers is not None else cfg.fit.centers
        weights = None
        if source == "theory":
            centers, weights = _theory_centers(cfg)
        elif isinstance(source, str):
            try:
                centers = [float(c) for c in source.split(",") if c.strip()]
            except ValueError:
                raise ConfigError(f"--centers must be 'theory' or numbers, got {source!r}") from None
        else:
            centers = list(source)
        result = fit_cpt(spectrum.x, spectrum.y, centers, weights, cfg.fit.init_fwhm,
                         cfg.fit.linear_baseline, cfg.fit.max_iter, cfg.fit.profile)
        with _sink(args.out) as fh:
            write_fit(result, fh)
        return 0 if result.converged else 2
    else:
        raise UsageError(f"unknown subcommand {args.command!r}")

    with _sink(args.out) as fh:
        for spec in spectra:
            write_spectrum(spec, fh)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage())
        return _run(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n" if not str(exc).startswith("usage") else str(exc))
        return 1
    except NUMERICAL_ERRORS as exc:
        # checked first: LinAlgError derives from ValueError
        sys.stderr.write(f"numerical failure: {type(exc).__name__}: {exc}\n")
        return 2
    except (ConfigError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
