"""Acceptance criteria, one test each.

Every test records its outcome in ``conftest.ACCEPTANCE``; the terminal
summary prints one PASS/FAIL line per criterion.
"""
import time

import numpy as np
import pytest

from nvcpt.dressed import DressingSpec, dip_positions, dressed_oracle, dressed_shifts
from nvcpt.dynamics import Segment, initial_state, propagate, restrict, steady_state
from nvcpt.experiments import (
    cpt_scan, find_dips, fit_gaussian_peak, ple_scan, rabi_scan, stark_scan, stark_settings,
    stark_theory,
)
from nvcpt.fitting import FitModel, LorentzianDip, fit, fit_cpt, model_eval, model_jacobian
from nvcpt.model import (
    A2, GS_MINUS, GS_PLUS, NvParams, build_basis, build_collapse, build_hamiltonian, microwave,
    optical,
)

from conftest import ACCEPTANCE, shipped


def record(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(ok), detail)
    assert ok, detail


def _fit_center_dip(spec, center):
    y = spec.y
    model = FitModel(y.max(), [LorentzianDip(center, 5.0, np.ptp(y))], pivot=center,
                     linear_baseline=True)
    keep = np.abs(spec.x - center) <= 16.0
    return fit(model, spec.x[keep], y[keep]).dips[0]


def test_criterion_01_hyperfine_triplet():
    cfg = shipped("fig2c")
    t0 = time.perf_counter()
    spec = cpt_scan(cfg)
    elapsed = time.perf_counter() - t0
    dips = find_dips(spec, 3)
    centers = [d.center for d in dips]
    spacing = np.diff(centers)
    ok = (len(dips) == 3 and np.all(np.abs(spacing - 4.4) <= 0.2) and elapsed < 60)
    record(1, ok, f"dips {np.round(centers, 3).tolist()}, spacings "
                  f"{np.round(spacing, 3).tolist()}, {elapsed:.1f} s")


def test_criterion_02_power_broadened_single_dip():
    cfg = shipped("fig2a")
    dz = cfg.params.zeeman_split
    dip = _fit_center_dip(cpt_scan(cfg), dz)
    widths = []
    for power in (0.25, 0.5, 1.0, 1.5):
        spec = cpt_scan(cfg.replace(fields__optical_power_uw=power))
        widths.append(_fit_center_dip(spec, dz).fwhm)
    monotone = bool(np.all(np.diff(widths) > 0))
    ok = abs(dip.center - dz) <= 2.0 and abs(dip.fwhm - 16.0) <= 0.25 * 16.0 and monotone
    record(2, ok, f"center {dip.center:.2f} MHz, FWHM {dip.fwhm:.2f} MHz, widths vs power "
                  f"{np.round(widths, 2).tolist()}")


def test_criterion_03_resonant_autler_townes():
    cfg = shipped("fig3a")
    worst = 0.0
    parts = []
    for spec, (rabi, offset) in zip(stark_scan(cfg), stark_settings(cfg)):
        theory = stark_theory(cfg, rabi, offset)
        found = np.array([d.center for d in find_dips(spec)])
        pair = [found[np.argmin(np.abs(found - theory.get(0, b).position))] for b in "+-"]
        split = pair[0] - pair[1]
        worst = max(worst, abs(split - rabi) / rabi)
        parts.append(f"{rabi:g}->{split:.3f}")
    record(3, worst <= 0.10, f"m_n=0 splittings {', '.join(parts)}; worst {worst:.1%}")


def test_criterion_04_detuned_dressing_tracks_theory():
    cfg = shipped("fig3b")
    worst = 0.0
    for spec, (rabi, offset) in zip(stark_scan(cfg), stark_settings(cfg)):
        found = np.array([d.center for d in find_dips(spec)])
        for d in stark_theory(cfg, rabi, offset).visible(cfg.fit.min_weight):
            if spec.x[0] <= d.position <= spec.x[-1]:
                worst = max(worst, float(np.min(np.abs(found - d.position))))
    record(4, worst <= 0.3, f"worst visible dip offset {worst:.3f} MHz over "
                            f"{len(stark_settings(cfg))} settings")


def test_criterion_05_dressed_formula_vs_oracle(rng):
    worst_pos = worst_id = 0.0
    for _ in range(1000):
        params = NvParams(zeeman_split=rng.uniform(10, 100), hyperfine_a=rng.uniform(-5, 5),
                          quadrupole_q=rng.uniform(-6, 6))
        rabi, offset = rng.uniform(0, 20), rng.uniform(-30, 30)
        spec = DressingSpec.from_offset(params, rabi, offset)
        a, b = dip_positions(params, spec).positions(), dressed_oracle(params, spec).positions()
        worst_pos = max(worst_pos, float(np.max(np.abs(a - b) / np.abs(b))))
        plus, minus = dressed_shifts(rabi, offset)
        worst_id = max(worst_id, abs((plus - minus) - np.hypot(offset, rabi))
                       / max(np.hypot(offset, rabi), 1e-300))
    ok = worst_pos <= 1e-9 and worst_id <= 1e-9
    record(5, ok, f"1000 draws: position rel err {worst_pos:.1e}, splitting identity {worst_id:.1e}")


def test_criterion_06_quadrupole_invariance():
    base = shipped("fig2c").replace(scan__start=22.0, scan__stop=38.0, scan__step=0.2)
    y0 = cpt_scan(base.replace(model__quadrupole_q=0.0)).y
    y5 = cpt_scan(base.replace(model__quadrupole_q=5.0)).y
    rel = float(np.max(np.abs(y0 - y5)) / np.max(np.abs(y0)))
    record(6, rel < 1e-6, f"max relative change Q=0 vs Q=5: {rel:.1e}")


def test_criterion_07_rabi_readout_phase():
    cfg = shipped("fig1b")
    a2, ey = rabi_scan(cfg, "A2"), rabi_scan(cfg, "Ey")
    t_max = a2.x[np.argmax(a2.y[a2.x <= 0.15])]
    t_min = ey.x[np.argmin(ey.y[ey.x <= 0.15])]
    corr = float(np.corrcoef(a2.y, ey.y)[0, 1])
    pi_time = 1 / (2 * cfg.fields.mw_rabi)
    ok = (abs(t_max - t_min) < 1e-12 and corr < 0 and abs(t_max - pi_time) <= 0.01 * pi_time
          and abs(t_max - 0.100) <= 0.01 * 0.100)
    record(7, ok, f"A2 max {t_max * 1e3:.0f} ns, Ey min {t_min * 1e3:.0f} ns, "
                  f"correlation {corr:.3f}, pi time {pi_time * 1e3:.0f} ns")


def test_criterion_08_dark_state():
    params = NvParams(ground_dephase=0.0, leak_branch=0.0)
    basis = build_basis()
    lam = [basis.index(e.at(0)) for e in (GS_MINUS, GS_PLUS, A2)]
    worst = 0.0
    for ra, rb in ((1.0, 1.0), (1.0, 1.3), (3.0, 0.5)):
        fields = [optical(GS_MINUS, A2, ra), optical(GS_PLUS, A2, rb)]
        H, collapse = restrict(build_hamiltonian(basis, params, fields).static,
                               build_collapse(basis, params), lam)
        worst = max(worst, float(steady_state(H, collapse)[2, 2].real))
    record(8, worst < 1e-8, f"max excited population at two-photon resonance {worst:.1e}")


def test_criterion_09_trajectory_invariants(rng):
    params = NvParams()
    basis = build_basis()
    worst_tr = worst_herm = worst_eig = worst_diff = 0.0
    for _ in range(10):
        fields = (microwave(1, rng.uniform(0, 8), rng.uniform(-5, 5)),
                  optical(GS_PLUS, A2, rng.uniform(0, 5), rng.uniform(-5, 5)),
                  optical(GS_MINUS, A2, rng.uniform(0, 5), rng.uniform(-5, 5)))
        seg = Segment(rng.uniform(0.05, 0.5), fields, detect=True)
        rho0 = initial_state(basis, "mixed")
        a = propagate(rho0, seg, basis, params, sample_count=20, method="expm")
        b = propagate(rho0, seg, basis, params, sample_count=20, method="ode")
        for rho in a.states:
            worst_tr = max(worst_tr, abs(np.trace(rho) - 1))
            worst_herm = max(worst_herm, float(np.abs(rho - rho.conj().T).max()))
            worst_eig = min(worst_eig, float(np.linalg.eigvalsh(rho).min()))
        worst_diff = max(worst_diff, float(np.abs(a.states - b.states).max()))
    ok = worst_tr <= 1e-9 and worst_herm <= 1e-12 and worst_eig >= -1e-8 and worst_diff <= 1e-6
    record(9, ok, f"trace {worst_tr:.1e}, hermiticity {worst_herm:.1e}, min eigenvalue "
                  f"{worst_eig:.1e}, expm vs ODE {worst_diff:.1e}")


def test_criterion_10_six_dip_fit(rng):
    centers = np.array([-12.0, -7.0, -2.5, 2.0, 6.5, 11.0])
    widths = np.array([1.0, 1.4, 0.8, 1.2, 0.9, 1.6])
    depths = np.array([0.30, 0.45, 0.25, 0.50, 0.35, 0.40])
    truth = FitModel(1.0, [LorentzianDip(c, w, d) for c, w, d in zip(centers, widths, depths)])
    x = np.linspace(-20, 20, 801)
    y = model_eval(truth, x) + rng.normal(0, 0.01, x.size)
    res = fit_cpt(x, y, centers)
    rel = max(max(abs(d.fwhm - w) / w, abs(d.depth - p) / p)
              for d, w, p in zip(res.dips, widths, depths))
    names = truth.parameter_names()
    J = model_jacobian(truth, x, names)
    jerr = 0.0
    for j, name in enumerate(names):
        v = truth.get(name)
        h = 1e-6 * max(abs(v), 1.0)
        hi, lo = truth.copy(), truth.copy()
        hi.set(name, v + h)
        lo.set(name, v - h)
        fd = (model_eval(hi, x) - model_eval(lo, x)) / (2 * h)
        jerr = max(jerr, float(np.abs(fd - J[:, j]).max()))
    ok = res.converged and rel <= 0.05 and jerr <= 1e-6
    record(10, ok, f"worst width/depth error {rel:.1%}, Jacobian vs finite differences {jerr:.1e}")


def test_criterion_11_ple_lines():
    cfg = shipped("fig1c")
    c_minus, w_minus, _ = fit_gaussian_peak(ple_scan(cfg, "-1"))
    c_plus, w_plus, _ = fit_gaussian_peak(ple_scan(cfg, "+1"))
    sep = c_minus - c_plus
    ok = (abs(sep - 500.0) <= 10.0 and abs(w_minus - 700.0) <= 35.0
          and abs(w_plus - 700.0) <= 35.0)
    record(11, ok, f"separation {sep:.1f} MHz, FWHM {w_minus:.1f} / {w_plus:.1f} MHz")
