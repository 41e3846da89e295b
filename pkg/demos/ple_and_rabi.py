"""Optical linewidth (PLE) and microwave Rabi readout on two optical lines.

Run with ``python3 demos/ple_and_rabi.py``.
"""
import numpy as np

from nvcpt import ple_scan, rabi_scan
from nvcpt.config import parse_config
from nvcpt.experiments import fit_gaussian_peak
from nvcpt.selftest import shipped_config_text

cfg = parse_config(shipped_config_text("fig1c"))
for spin in ("-1", "+1"):
    center, fwhm, _ = fit_gaussian_peak(ple_scan(cfg, spin))
    print(f"PLE m_s = {spin}: center {center:7.1f} MHz, FWHM {fwhm:.1f} MHz")

cfg = parse_config(shipped_config_text("fig1b"))
a2, ey = rabi_scan(cfg, "A2"), rabi_scan(cfg, "Ey")
print(f"A2 first maximum at {a2.x[np.argmax(a2.y)] * 1e3:.0f} ns")
print(f"Ey first minimum at {ey.x[np.argmin(ey.y)] * 1e3:.0f} ns")
print(f"correlation between the two readouts: {np.corrcoef(a2.y, ey.y)[0, 1]:.3f}")
