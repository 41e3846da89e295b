"""Fast invariant checks plus a run of every shipped configuration."""
from __future__ import annotations

import time
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np

from .config import Config, parse_config
from .dressed import DressingSpec, dip_positions, dressed_oracle
from .dynamics import (
    Segment, check_density, initial_state, propagate, restrict, steady_state,
)
from .experiments import cpt_scan, ple_scan, rabi_scan, stark_scan
from .fitting import FitModel, LorentzianDip, model_eval, model_jacobian
from .model import (
    A2, GS_MINUS, GS_PLUS, NvParams, build_basis, build_collapse,
    build_hamiltonian, microwave, optical,
)

SHIPPED = ("fig1b", "fig1c", "fig2a", "fig2c", "fig2e", "fig3a", "fig3b")


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float


def shipped_config_text(name: str) -> str:
    return resources.files("nvcpt").joinpath("configs", f"{name}.conf").read_text("utf-8")


def _density_invariants() -> str:
    params = NvParams()
    basis = build_basis()
    rho0 = initial_state(basis, "mixed")
    seg = Segment(0.3, (microwave(1, 5.0), optical(GS_PLUS, A2, 2.0)), detect=True)
    expm_traj = propagate(rho0, seg, basis, params, sample_count=30, method="expm")
    ode_traj = propagate(rho0, seg, basis, params, sample_count=30, method="ode")
    for rho in expm_traj.states:
        check_density(rho)
    diff = float(np.abs(expm_traj.states - ode_traj.states).max())
    assert diff < 1e-6, f"expm and ODE paths differ by {diff:.2e}"
    return f"expm vs ODE max difference {diff:.1e}"


def _dark_state() -> str:
    params = NvParams(ground_dephase=0.0, leak_branch=0.0)
    basis = build_basis()
    lam = [basis.index(e.at(0)) for e in (GS_MINUS, GS_PLUS, A2)]
    fields = [optical(GS_MINUS, A2, 1.0), optical(GS_PLUS, A2, 1.3)]
    H, collapse = restrict(build_hamiltonian(basis, params, fields).static,
                           build_collapse(basis, params), lam)
    rho = steady_state(H, collapse)
    excited = float(rho[2, 2].real)
    assert excited < 1e-8, f"excited population {excited:.2e}"
    return f"excited population {excited:.1e}"


def _dressed_oracle() -> str:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        params = NvParams(zeeman_split=rng.uniform(10, 100), hyperfine_a=rng.uniform(-5, 5),
                          quadrupole_q=rng.uniform(-6, 6))
        spec = DressingSpec.from_offset(params, rng.uniform(0.1, 10), rng.uniform(-15, 15))
        a, b = dip_positions(params, spec).positions(), dressed_oracle(params, spec).positions()
        worst = max(worst, float(np.max(np.abs(a - b) / np.abs(a))))
    assert worst < 1e-9, f"relative mismatch {worst:.2e}"
    return f"max relative mismatch {worst:.1e}"


def _quadrupole() -> str:
    cfg = parse_config("[fields]\nrepump_rabi = 0\nmw_rabi = 3\n[scan]\nstart = 25\nstop = 35\nstep = 0.5\n")
    y0 = cpt_scan(cfg.replace(model__quadrupole_q=0.0)).y
    y5 = cpt_scan(cfg.replace(model__quadrupole_q=5.0)).y
    rel = float(np.max(np.abs(y0 - y5)) / np.max(np.abs(y0)))
    assert rel < 1e-6, f"relative change {rel:.2e}"
    return f"relative change {rel:.1e}"


def _jacobian() -> str:
    model = FitModel(1.0, [LorentzianDip(-1.0, 0.8, 0.3), LorentzianDip(1.5, 1.2, 0.5)],
                     slope=0.02, linear_baseline=True)
    x = np.linspace(-5, 5, 41)
    names = model.parameter_names()
    J = model_jacobian(model, x, names)
    err = 0.0
    for j, name in enumerate(names):
        v = model.get(name)
        h = 1e-6 * max(abs(v), 1.0)
        hi, lo = model.copy(), model.copy()
        hi.set(name, v + h)
        lo.set(name, v - h)
        fd = (model_eval(hi, x) - model_eval(lo, x)) / (2 * h)
        err = max(err, float(np.abs(fd - J[:, j]).max()))
    assert err < 1e-6, f"Jacobian error {err:.2e}"
    return f"Jacobian vs finite differences {err:.1e}"


def _coarsen(cfg: Config, factor: float) -> Config:
    step = cfg.scan.step
    return cfg if step is None else cfg.replace(scan__step=step * factor)


def _run_config(name: str, quick: bool) -> Callable[[], str]:
    def run() -> str:
        cfg = parse_config(shipped_config_text(name))
        if quick:
            cfg = _coarsen(cfg, 5.0)
        if name == "fig1b":
            spectra = [rabi_scan(cfg, "A2"), rabi_scan(cfg, "Ey")]
        elif name == "fig1c":
            spectra = [ple_scan(cfg)]
        elif name.startswith("fig3"):
            spectra = stark_scan(cfg)
        else:
            spectra = [cpt_scan(cfg)]
        points = sum(len(s) for s in spectra)
        assert all(np.all(np.isfinite(s.y)) for s in spectra)
        return f"{len(spectra)} spectra, {points} points"
    return run


def run_selftest(quick: bool = False) -> list[Check]:
    checks: list[tuple[str, Callable[[], str]]] = [
        ("density-matrix invariants", _density_invariants),
        ("dark state", _dark_state),
        ("dressed analytic vs oracle", _dressed_oracle),
        ("quadrupole invariance", _quadrupole),
        ("fit Jacobian", _jacobian),
    ]
    checks += [(f"config {name}.conf", _run_config(name, quick)) for name in SHIPPED]
    out = []
    for name, func in checks:
        t0 = time.perf_counter()
        try:
            detail, ok = func(), True
        except Exception as exc:  # report every failure, keep going
            detail, ok = f"{type(exc).__name__}: {exc}", False
        out.append(Check(name, ok, detail, time.perf_counter() - t0))
    return out
