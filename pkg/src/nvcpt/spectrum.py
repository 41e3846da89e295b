"""Sampled spectra and dip detection."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


@dataclass
class Spectrum:
    """Signal sampled on a strictly increasing axis.

    ``unit`` is the axis unit (``"MHz"`` or ``"us"``); ``metadata`` carries a
    flat snapshot of the configuration that produced the data.
    """

    x: np.ndarray
    y: np.ndarray
    axis: str = "two_photon_detuning"
    unit: str = "MHz"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.y.shape:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if len(self.x) < 2:
            raise ValueError("a spectrum needs at least two samples")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("x must be strictly increasing")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("signal must be finite")
        if np.any(self.y < 0):
            raise ValueError("signal must be non-negative")

    def __len__(self):
        return len(self.x)

    def normalized(self) -> "Spectrum":
        top = self.y.max()
        y = self.y / top if top > 0 else self.y.copy()
        return Spectrum(self.x.copy(), y, self.axis, self.unit,
                        {**self.metadata, "normalization": "maxone"})


class Dip(NamedTuple):
    center: float
    depth: float


class DipList(list):
    """Dips sorted by center; ``incomplete`` is set when fewer than requested were found."""

    incomplete: bool = False


def find_dips(spectrum: Spectrum | tuple, count_hint: int | None = None,
              min_depth: float = 1e-6) -> DipList:
    """Local minima refined by a three-point parabola.

    The depth of a minimum is its prominence: the drop below the lower of
    the two neighbouring maxima.  Minima shallower than ``min_depth`` times
    the signal range are ignored, so a flat spectrum yields no dips.  With
    ``count_hint`` only the ``count_hint`` deepest dips are kept.
    """
    if isinstance(spectrum, Spectrum):
        x, y = spectrum.x, spectrum.y
    else:
        x, y = (np.asarray(a, dtype=float) for a in spectrum)
    n = len(y)
    span = float(np.ptp(y))
    out = DipList()
    if n < 3 or span <= 0:
        out.incomplete = bool(count_hint)
        return out

    # plateaus are collapsed to their first point
    keep = np.concatenate([[True], np.diff(y) != 0])
    idx = np.flatnonzero(keep)
    yy = y[idx]
    found = []
    for j in range(1, len(idx) - 1):
        if yy[j] < yy[j - 1] and yy[j] < yy[j + 1]:
            i = idx[j]
            # climb to the neighbouring maxima on each side
            lo = j - 1
            while lo > 0 and yy[lo - 1] >= yy[lo]:
                lo -= 1
            hi = j + 1
            while hi < len(yy) - 1 and yy[hi + 1] >= yy[hi]:
                hi += 1
            left, right = yy[lo:j].max(), yy[j + 1:hi + 1].max()
            depth = min(left, right) - y[i]
            if depth <= min_depth * span:
                continue
            center = _parabolic_center(x, y, i)
            found.append(Dip(center, float(depth)))
    if count_hint is not None and len(found) > count_hint:
        found = sorted(found, key=lambda d: -d.depth)[:count_hint]
    out.extend(sorted(found, key=lambda d: d.center))
    out.incomplete = count_hint is not None and len(out) < count_hint
    return out


def _parabolic_center(x, y, i) -> float:
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    if a <= 0:
        return float(x1)
    c = -b / (2 * a)
    return float(min(max(c, x0), x2))
