"""CSV spectra and plain-text fit records.

Spectrum files::

    # nv-cpt-sim v1
    # axis = two_photon_detuning
    # model.zeeman_split = 30.0
    # ...
    x_mhz,signal
    15,0.00123456789

Metadata lines are ``# key = value``.  Numbers are written with nine
significant digits.
"""
from __future__ import annotations

import io
from typing import IO, TextIO

import numpy as np

from .config import FORMAT_TAG, format_value
from .fitting import FitResult
from .spectrum import Spectrum

DIGITS = 9


def _num(value: float) -> str:
    return f"{value:.{DIGITS}g}"


def _column_name(unit: str) -> str:
    return "x_" + unit.lower().replace("/", "_")


def write_spectrum(spectrum: Spectrum, sink: TextIO) -> None:
    sink.write(f"# {FORMAT_TAG}\n")
    sink.write(f"# axis = {spectrum.axis}\n")
    sink.write(f"# unit = {spectrum.unit}\n")
    for key in sorted(spectrum.metadata):
        sink.write(f"# {key} = {format_value(spectrum.metadata[key])}\n")
    sink.write(f"{_column_name(spectrum.unit)},signal\n")
    for x, y in zip(spectrum.x, spectrum.y):
        sink.write(f"{_num(x)},{_num(y)}\n")


def spectrum_text(spectrum: Spectrum) -> str:
    buf = io.StringIO()
    write_spectrum(spectrum, buf)
    return buf.getvalue()


def read_spectrum(source: IO[str] | str) -> Spectrum:
    """Parse a file written by :func:`write_spectrum` (path or open file)."""
    if isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            return read_spectrum(fh)
    lines = source.read().splitlines()
    if not lines or lines[0].strip() != f"# {FORMAT_TAG}":
        raise ValueError(f"not a spectrum file: first line must be '# {FORMAT_TAG}'")
    meta: dict[str, str] = {}
    header = None
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("#"):
            if "=" in line:
                key, value = line[1:].split("=", 1)
                meta[key.strip()] = value.strip()
            continue
        if header is None:
            header = line.strip().split(",")
            if len(header) != 2 or not header[0].startswith("x_"):
                raise ValueError(f"line {lineno}: bad column header {line!r}")
            continue
        try:
            x, y = (float(v) for v in line.split(","))
        except ValueError:
            raise ValueError(f"line {lineno}: expected two numbers, got {line!r}") from None
        rows.append((x, y))
    if header is None or not rows:
        raise ValueError("spectrum file has no data")
    data = np.array(rows)
    axis = meta.pop("axis", "two_photon_detuning")
    unit = meta.pop("unit", header[0][2:])
    return Spectrum(data[:, 0], data[:, 1], axis, unit, meta)


def write_fit(result: FitResult, sink: TextIO) -> None:
    """One ``dip`` record per Lorentzian in ascending center order, then baseline and RSS."""
    model, err = result.model, result.stderr
    sink.write(f"# {FORMAT_TAG} fit\n")
    sink.write(f"converged = {format_value(result.converged)}\n")
    sink.write(f"iterations = {result.iterations}\n")
    order = sorted(range(len(model.dips)), key=lambda k: model.dips[k].center)
    for k in order:
        d = model.dips[k]
        sink.write(
            f"dip center={_num(d.center)} center_err={_num(err.get(f'center{k}', 0.0))} "
            f"fwhm={_num(d.fwhm)} fwhm_err={_num(err.get(f'fwhm{k}', 0.0))} "
            f"depth={_num(d.depth)} depth_err={_num(err.get(f'depth{k}', 0.0))}\n")
    sink.write(f"baseline = {_num(model.baseline)} err={_num(err.get('baseline', 0.0))}\n")
    if model.linear_baseline:
        sink.write(f"slope = {_num(model.slope)} err={_num(err.get('slope', 0.0))}"
                   f" pivot={_num(model.pivot)}\n")
    if model.profile is not None:
        p = model.profile
        sink.write(f"profile center={_num(p.center)} fwhm={_num(p.fwhm)} height={_num(p.depth)}\n")
    sink.write(f"rss = {_num(result.rss)}\n")


def read_fit_dips(source: TextIO) -> list[dict[str, float]]:
    """Dip records of a fit file as dictionaries."""
    out = []
    for line in source.read().splitlines():
        if line.startswith("dip "):
            out.append({k: float(v) for k, v in (item.split("=") for item in line[4:].split())})
    return out
