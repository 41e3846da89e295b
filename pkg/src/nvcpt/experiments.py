"""Scan drivers for Rabi, PLE, CPT and microwave-dressed CPT spectra.

Two-photon detuning convention, used everywhere::

    delta = f(field on -1 <-> A2) - f(field on +1 <-> A2)

Field b (on +1 <-> A2) is held at ``fields.optical_detuning`` from its bare
m_n = 0 line and field a is scanned, so the dark resonance of sector m_n sits
at ``delta = zeeman_split + 2*A*m_n``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .config import Config
from .dressed import DressingSpec, dip_positions, transition_frequency
from .dynamics import (
    GreenReset, InitialState, PulseSequence, SectorSteadySolver, Segment, detected_counts,
    run_sequence, sector_steady_states,
)
from .model import (
    A2, EY, GS_MINUS, GS_PLUS, GS_ZERO, DriveField, NvParams, build_basis, ground_state,
    build_hamiltonian, microwave, optical, radiative_weights,
)
from .spectrum import Dip, DipList, Spectrum, find_dips

__all__ = [
    "cpt_scan", "stark_scan", "rabi_scan", "ple_scan", "find_dips", "Spectrum", "Dip", "DipList",
    "optical_rabi", "cpt_fields", "cpt_signal", "scan_axis", "fit_gaussian_peak",
]


# ---------------------------------------------------------------------------
# helpers

def optical_rabi(cfg: Config) -> float:
    """Per-field optical Rabi frequency, from the power calibration if a power is set."""
    f = cfg.fields
    if f.optical_power_uw is not None:
        return cfg.model.rabi_per_sqrt_uw * np.sqrt(0.5 * f.optical_power_uw)
    return f.optical_rabi


def scan_axis(cfg: Config, kind: str) -> np.ndarray:
    s = cfg.scan
    params = cfg.params
    if kind in ("cpt", "stark"):
        start, stop, step = params.zeeman_split - 15.0, params.zeeman_split + 15.0, 0.1
    elif kind == "rabi":
        start, stop, step = 0.0, 0.5, 0.005
    elif kind == "ple":
        start, stop, step = -1500.0, params.zeeman_split + 1500.0, 10.0
    else:
        raise ValueError(f"unknown experiment {kind!r}")
    start = start if s.start is None else s.start
    stop = stop if s.stop is None else s.stop
    step = step if s.step is None else s.step
    if step <= 0 or stop <= start:
        raise ValueError("scan range is empty")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def _basis(cfg: Config, ey: bool = False):
    return build_basis(a2=True, ey=ey or cfg.model.include_ey, singlet=cfg.model.include_singlet)


def _map(func: Callable[[float], float], xs: Sequence[float], workers: int) -> np.ndarray:
    if workers <= 1:
        return np.array([func(x) for x in xs])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(func, xs)))


def _spectrum(cfg, x, y, axis, unit, extra=None) -> Spectrum:
    y = np.clip(np.asarray(y, dtype=float), 0.0, None)
    meta = cfg.snapshot()
    if extra:
        meta.update(extra)
    spec = Spectrum(np.asarray(x, dtype=float), y, axis, unit, meta)
    return spec.normalized() if cfg.scan.normalization == "maxone" else spec


def _line_offset(params: NvParams, m_s: int, m_n: int) -> float:
    """Detuning that puts a 0 <-> m_s microwave on the m_n hyperfine line."""
    return params.hyperfine_a * m_s * m_n


def _prep_segment(cfg: Config) -> Segment | None:
    f = cfg.fields
    if f.prep_rabi <= 0:
        return None
    duration = f.prep_duration if f.prep_duration is not None else 0.5 / f.prep_rabi
    detuning = _line_offset(cfg.params, f.prep_transition, f.prep_mn)
    return Segment(duration, (microwave(f.prep_transition, f.prep_rabi, detuning, label="prep"),),
                   label="prep")


def _green_segment(cfg: Config) -> Segment:
    return Segment(cfg.sequence.green_duration, (), GreenReset.GREEN, label="green")


# ---------------------------------------------------------------------------
# CPT

def cpt_fields(cfg: Config, delta: float, common: float = 0.0,
               dressing: tuple[float, float] | None = None) -> list[DriveField]:
    """Drive fields at two-photon detuning ``delta``.

    ``common`` adds to the one-photon detuning of both optical fields.
    ``dressing`` is ``(rabi, offset)`` of the microwave on 0 <-> mw_transition;
    when it is active the weak repump is left off, since the dressing field
    already couples m_s = 0 back into the Lambda system.
    """
    f = cfg.fields
    params = cfg.params
    rabi = optical_rabi(cfg)
    b_detuning = f.optical_detuning + common
    a_detuning = b_detuning + delta - params.zeeman_split
    fields = [optical(GS_MINUS, A2, rabi, a_detuning, label="a"),
              optical(GS_PLUS, A2, rabi, b_detuning, label="b")]
    if dressing is None:
        dressing = (f.mw_rabi, f.mw_detuning)
    mw_rabi, mw_offset = dressing
    if mw_rabi > 0:
        fields.append(microwave(f.mw_transition, mw_rabi, mw_offset, label="dressing"))
    elif f.repump_rabi > 0:
        fields.append(microwave(f.repump_transition, f.repump_rabi, f.repump_detuning,
                                label="repump"))
    return fields


def cpt_signal(cfg: Config, delta: float, common: float = 0.0,
               dressing: tuple[float, float] | None = None, basis=None) -> float:
    """Detected signal at one two-photon detuning.

    Steady mode: photon detection rate (per us) of the stationary state with
    uniform nuclear populations.  Time mode: expected counts of the
    green -> preparation pulse -> probe sequence.
    """
    params = cfg.params
    basis = basis if basis is not None else _basis(cfg)
    fields = cpt_fields(cfg, delta, common, dressing)
    if cfg.scan.mode == "steady":
        rho = sector_steady_states(basis, params, fields)
        weights = radiative_weights(basis, params)
        return detected_counts(float(weights @ np.real(np.diag(rho))), params)
    segments = [_green_segment(cfg)]
    prep = _prep_segment(cfg)
    if prep is not None:
        segments.append(prep)
    segments.append(Segment(cfg.sequence.probe_duration, tuple(fields), detect=True, label="probe"))
    seq = PulseSequence(segments, InitialState(cfg.sequence.initial_state))
    return run_sequence(seq, basis, params).counts


def _static_hamiltonian(cfg, basis, delta, common, dressing) -> np.ndarray:
    ham = build_hamiltonian(basis, cfg.params, cpt_fields(cfg, delta, common, dressing))
    if ham.time_dependent:
        raise ValueError("drive frequencies leave a time-dependent coupling; "
                         "steady-state mode needs a static rotating frame")
    return ham.static


def common_mode_nodes(fwhm: float, core: float, panel: float = 2.0,
                      order: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and weights for a Gaussian average of the common detuning.

    Composite Gauss-Legendre: ``panel``-wide panels over ``[-core, core]``
    where the optical resonances live, wider panels out to five standard
    deviations.  Weights include the normalized Gaussian density.
    """
    sigma = fwhm / (2 * np.sqrt(2 * np.log(2)))
    lim = max(5 * sigma, core + panel)
    inner = np.linspace(-core, core, int(np.ceil(2 * core / panel)) + 1)
    n_outer = int(np.ceil((lim - core) / (12 * panel))) + 1
    outer = np.linspace(core, lim, n_outer)
    edges = np.unique(np.concatenate([-outer[::-1], inner, outer]))
    t, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * t + 0.5 * (b + a)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    weights = weights * np.exp(-0.5 * (nodes / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))
    return nodes, weights


def cpt_scan(cfg: Config, dressing: tuple[float, float] | None = None,
             x: Sequence[float] | None = None) -> Spectrum:
    """Fluorescence versus two-photon detuning.

    With ``scan.common_mode_fwhm > 0`` every point is averaged over a
    Gaussian spread of the one-photon detuning shared by both optical fields
    (spectral diffusion moves both fields' detunings together).
    """
    xs = scan_axis(cfg, "cpt") if x is None else np.asarray(x, dtype=float)
    basis = _basis(cfg)
    params = cfg.params
    fwhm = cfg.scan.common_mode_fwhm
    if fwhm > 0:
        core = (4 * (params.gamma_rad + optical_rabi(cfg) + cfg.fields.mw_rabi)
                + np.abs(xs - params.zeeman_split).max() + 20.0)
        nodes, qweights = common_mode_nodes(fwhm, core)
    else:
        nodes, qweights = np.zeros(1), np.ones(1)

    if cfg.scan.mode == "steady":
        solver = SectorSteadySolver(basis, params)
        photon = radiative_weights(basis, params)
        H0 = _static_hamiltonian(cfg, basis, xs[0], 0.0, dressing)
        solver.populations(H0, check=True)

        def point(delta):
            h0 = _static_hamiltonian(cfg, basis, delta, 0.0, dressing)
            if fwhm == 0:
                return detected_counts(float(photon @ solver.populations(h0)), params)
            # the rotating-frame Hamiltonian is affine in the common detuning
            slope = _static_hamiltonian(cfg, basis, delta, 1.0, dressing) - h0
            stack = h0[None] + nodes[:, None, None] * slope[None]
            rates = solver.populations(stack) @ photon
            return detected_counts(float(qweights @ rates), params)
    else:
        def point(delta):
            vals = [cpt_signal(cfg, delta, c, dressing, basis) for c in nodes]
            return float(qweights @ np.array(vals))

    y = _map(point, xs, cfg.scan.workers)
    extra = {"experiment": "cpt", "optical_rabi_effective": optical_rabi(cfg)}
    if dressing is not None:
        extra.update({"dressing_rabi": dressing[0], "dressing_offset": dressing[1]})
    return _spectrum(cfg, xs, y, "two_photon_detuning", "MHz", extra)


def stark_settings(cfg: Config) -> list[tuple[float, float]]:
    """(rabi, offset) pairs: every listed Rabi frequency at every listed offset."""
    f, s = cfg.fields, cfg.scan
    rabis = s.stark_rabis or (f.mw_rabi,)
    offsets = s.stark_offsets or (f.mw_detuning,)
    return [(r, o) for r in rabis for o in offsets]


def stark_scan(cfg: Config) -> list[Spectrum]:
    """One CPT spectrum per dressing setting, with the dressing recorded in metadata."""
    out = []
    params = cfg.params
    for rabi, offset in stark_settings(cfg):
        spec = cpt_scan(cfg, dressing=(rabi, offset))
        dressing = DressingSpec.from_offset(params, rabi, offset)
        spec.metadata.update({"experiment": "stark"})
        for m in (-1, 0, 1):
            spec.metadata[f"dressing_detuning_mn{m:+d}"] = dressing.detunings[m]
        out.append(spec)
    return out


def stark_theory(cfg: Config, rabi: float, offset: float):
    """Dressed-state dip set for one dressing setting of ``cfg``."""
    return dip_positions(cfg.params, DressingSpec.from_offset(cfg.params, rabi, offset))


# ---------------------------------------------------------------------------
# Rabi

def rabi_scan(cfg: Config, readout: str | None = None) -> Spectrum:
    """Counts versus microwave pulse duration.

    Sequence: green reset -> microwave on 0 <-> mw_transition for t ->
    resonant probe for ``sequence.readout_duration``.  A2 readout drives the
    mw_transition spin to A2 (signal follows the m_s = +/-1 population); Ey
    readout drives m_s = 0 to Ey (signal follows the m_s = 0 population).
    """
    f = cfg.fields
    params = cfg.params
    readout = readout or f.readout
    xs = scan_axis(cfg, "rabi")
    basis = _basis(cfg, ey=readout == "Ey")
    if readout == "A2":
        probe = optical(ground_state(f.mw_transition), A2, f.probe_rabi, label="probe")
    else:
        probe = optical(GS_ZERO, EY, f.probe_rabi, label="probe")
    mw_rabi = f.mw_rabi if f.mw_rabi > 0 else 5.0

    def point(t):
        segments = [_green_segment(cfg)]
        if t > 0:
            segments.append(Segment(float(t), (microwave(f.mw_transition, mw_rabi, f.mw_detuning),),
                                    label="mw"))
        segments.append(Segment(cfg.sequence.readout_duration, (probe,), detect=True, label="probe"))
        seq = PulseSequence(segments, InitialState(cfg.sequence.initial_state))
        return run_sequence(seq, basis, params).counts

    y = _map(point, xs, cfg.scan.workers)
    return _spectrum(cfg, xs, y, "mw_pulse_duration", "us",
                     {"experiment": "rabi", "readout": readout, "mw_rabi_effective": mw_rabi})


# ---------------------------------------------------------------------------
# PLE

def _ple_ideal(cfg: Config, spin: int, xs: np.ndarray, basis) -> np.ndarray:
    """Steady-state detection rate for one laser scanned across the spin <-> A2 line.

    ``xs`` is the laser frequency relative to the bare +1 <-> A2 line, so the
    -1 <-> A2 line sits at ``x = zeeman_split``.
    """
    f = cfg.fields
    params = cfg.params
    offset = 0.0 if spin == 1 else params.zeeman_split
    weights = radiative_weights(basis, params)
    solver = SectorSteadySolver(basis, params)

    def hamiltonian(detuning):
        fields = [optical(ground_state(spin), A2, f.probe_rabi, detuning)]
        if f.ple_mw_rabi > 0:
            # both spin transitions are driven so neither m_s = +/-1 traps population
            fields += [microwave(1, f.ple_mw_rabi), microwave(-1, f.ple_mw_rabi)]
        return build_hamiltonian(basis, params, fields).static

    # the rotating-frame Hamiltonian is affine in the laser detuning
    h0 = hamiltonian(0.0)
    slope = hamiltonian(1.0) - h0
    solver.populations(h0, check=True)
    out = np.empty(len(xs))
    for chunk in np.array_split(np.arange(len(xs)), max(1, len(xs) // 512)):
        stack = h0[None] + (xs[chunk] - offset)[:, None, None] * slope[None]
        out[chunk] = solver.populations(stack) @ weights
    return detected_counts(out, params)


def ple_scan(cfg: Config, spin: str | int | None = None) -> Spectrum:
    """PLE spectrum broadened by Gaussian spectral diffusion.

    ``spin`` (or ``scan.ple_spin``) selects the microwave-populated spin state:
    ``+1``, ``-1`` or ``both`` (sum of the two traces).  The ideal spectrum is
    computed on a grid fine enough for the natural line and then convolved
    with a Gaussian of FWHM ``scan.diffusion_fwhm``.
    """
    spin = str(spin if spin is not None else cfg.scan.ple_spin)
    spins = {"1": (1,), "+1": (1,), "-1": (-1,), "both": (1, -1)}[spin]
    xs = scan_axis(cfg, "ple")
    basis = _basis(cfg)
    fwhm = cfg.scan.diffusion_fwhm
    params = cfg.params
    natural = params.gamma_rad + cfg.fields.probe_rabi
    fine_step = min(natural / 10.0, float(xs[1] - xs[0]))
    pad = 4.0 * fwhm + 20.0 * natural
    fine = np.arange(xs[0] - pad, xs[-1] + pad + fine_step, fine_step)
    ideal = np.zeros_like(fine)
    for s in spins:
        ideal += _ple_ideal(cfg, s, fine, basis)
    if fwhm > 0:
        sigma = fwhm / (2 * np.sqrt(2 * np.log(2)))
        kernel = np.exp(-0.5 * ((xs[:, None] - fine[None, :]) / sigma) ** 2)
        kernel /= sigma * np.sqrt(2 * np.pi)
        y = kernel @ ideal * fine_step
    else:
        y = np.interp(xs, fine, ideal)
    return _spectrum(cfg, xs, y, "laser_detuning", "MHz",
                     {"experiment": "ple", "ple_spin": spin})


def fit_gaussian_peak(spectrum: Spectrum) -> tuple[float, float, float]:
    """(center, fwhm, amplitude) of a Gaussian-plus-offset fit to a single peak."""
    x, y = spectrum.x, spectrum.y
    i = int(np.argmax(y))
    above = x[y >= 0.5 * y[i]]
    width0 = max(float(above[-1] - above[0]), float(x[1] - x[0]))

    def model(x, a, c, w, b):
        return b + a * np.exp(-4 * np.log(2) * ((x - c) / w) ** 2)

    popt, _ = curve_fit(model, x, y, p0=[y[i] - y.min(), x[i], width0, y.min()], maxfev=20000)
    return float(popt[1]), abs(float(popt[2])), float(popt[0])
