"""Microwave dressing of the ground state: analytic dip positions versus simulation.

Run with ``python3 demos/dressed_spectra.py``.
"""
from nvcpt import find_dips, stark_scan
from nvcpt.config import parse_config
from nvcpt.experiments import stark_settings, stark_theory
from nvcpt.selftest import shipped_config_text

for name in ("fig3a", "fig3b"):
    cfg = parse_config(shipped_config_text(name))
    print(f"{name}:")
    for spec, (rabi, offset) in zip(stark_scan(cfg), stark_settings(cfg)):
        found = sorted(float(d.center) for d in find_dips(spec))
        theory = sorted(float(d.position) for d in stark_theory(cfg, rabi, offset).visible(0.05))
        print(f"  rabi {rabi:g} MHz, offset {offset:+.1f} MHz")
        print(f"    simulated {[round(c, 2) for c in found]}")
        print(f"    predicted {[round(c, 2) for c in theory]}")
