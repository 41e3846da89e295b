"""Power broadening of the CPT dip when the hyperfine lines are not resolved.

Run with ``python3 demos/power_broadening.py``.
"""
import numpy as np

from nvcpt import FitModel, LorentzianDip, cpt_scan, fit
from nvcpt.config import parse_config
from nvcpt.selftest import shipped_config_text

cfg = parse_config(shipped_config_text("fig2a"))
dz = cfg.params.zeeman_split
for power in (0.25, 0.5, 1.0, 1.5, 2.0):
    spec = cpt_scan(cfg.replace(fields__optical_power_uw=power))
    keep = np.abs(spec.x - dz) <= 16
    model = FitModel(spec.y.max(), [LorentzianDip(dz, 5.0, np.ptp(spec.y))], pivot=dz,
                     linear_baseline=True)
    dip = fit(model, spec.x[keep], spec.y[keep]).dips[0]
    print(f"{power:4.2f} uW: center {dip.center:6.2f} MHz, FWHM {dip.fwhm:6.2f} MHz")
