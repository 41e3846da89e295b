"""Hyperfine-resolved CPT: three dips spaced by 2|A| after a broadband pi pulse.

Run with ``python3 demos/hyperfine_cpt.py``.
"""
import numpy as np

from nvcpt import cpt_scan, find_dips, fit_cpt
from nvcpt.selftest import shipped_config_text
from nvcpt.config import parse_config

cfg = parse_config(shipped_config_text("fig2c"))
spec = cpt_scan(cfg)
dips = find_dips(spec, 3)
print("dip centers (MHz):", [round(d.center, 3) for d in dips])
print("spacings (MHz):   ", np.round(np.diff([d.center for d in dips]), 3).tolist())

# a Lorentzian fit on top of the broad one-photon background
res = fit_cpt(spec.x, spec.y, [d.center for d in dips], profile=True)
for d in res.dips:
    print(f"  fit center {d.center:7.3f}  fwhm {d.fwhm:.3f}  depth {d.depth:.3g}")

# a weak selective pulse on the m_n = +1 line leaves only one dip standing
sel = cpt_scan(parse_config(shipped_config_text("fig2e")))
deepest = max(find_dips(sel), key=lambda d: d.depth)
print(f"selective preparation: dominant dip at {deepest.center:.2f} MHz")
