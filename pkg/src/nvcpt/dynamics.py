"""Lindblad evolution, steady states and pulse-sequence execution.

Density matrices are plain ``(N, N)`` complex arrays over a :class:`LevelBasis`.
Superoperators act on the row-major vectorization ``rho.ravel()``, for which
``vec(A rho B) = kron(A, B.T) vec(rho)``.

Between segments, states are carried in the frame rotating at the bare level
energies ("lab" frame); every segment converts to and from its own drive
frame using the absolute sequence time, so coherences survive frame changes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .model import (
    TWO_PI, GS_MINUS, GS_PLUS, GS_ZERO, DriveField, FrameAssignment, Hamiltonian,
    LevelBasis, LindbladTerm, Manifold, NvParams, assign_frame, build_collapse,
    build_hamiltonian, level_energy, radiative_weights,
)

RTOL = 1e-8
ATOL = 1e-10


class IntegrationError(RuntimeError):
    pass


class DegenerateSteadyState(RuntimeError):
    """The generator has more than one stationary state."""


class GreenReset(Enum):
    GREEN = "green"


class InitialState(Enum):
    THERMAL_NUCLEAR_MS_ZERO = "thermal"
    FULLY_MIXED_GROUND = "mixed"
    CUSTOM = "custom"


# ---------------------------------------------------------------------------
# generators

def _collapse_arrays(collapse: Sequence[LindbladTerm], n: int):
    ops = [c.operator for c in collapse]
    for op in ops:
        if op.shape != (n, n):
            raise ValueError(f"collapse operator shape {op.shape} does not match dimension {n}")
    rates = [TWO_PI * c.rate for c in collapse]
    return ops, rates


def _superoperator(Ha, Hb, ops_a, ops_b, rates) -> np.ndarray:
    """Generator of the block ``rho_ab`` for block-diagonal H and collapse operators."""
    na, nb = Ha.shape[0], Hb.shape[0]
    ea, eb = np.eye(na), np.eye(nb)
    L = -1j * (np.kron(Ha, eb) - np.kron(ea, Hb.T))
    for ca, cb, g in zip(ops_a, ops_b, rates):
        if g == 0:
            continue
        cdca = ca.conj().T @ ca
        cdcb = cb.conj().T @ cb
        L += g * (np.kron(ca, cb.conj()) - 0.5 * np.kron(cdca, eb) - 0.5 * np.kron(ea, cdcb.T))
    return L


def liouvillian(H: np.ndarray, collapse: Sequence[LindbladTerm] = ()) -> np.ndarray:
    """Superoperator ``L`` with ``d vec(rho)/dt = L vec(rho)``.

    ``H`` is in angular units; collapse rates are in MHz and get the 2*pi here.
    """
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    if H.shape != (n, n):
        raise ValueError(f"Hamiltonian must be square, got {H.shape}")
    ops, rates = _collapse_arrays(collapse, n)
    return _superoperator(H, H, ops, ops, rates)


def lindblad_rhs(H: np.ndarray, rho: np.ndarray, collapse: Sequence[LindbladTerm]) -> np.ndarray:
    """``d rho/dt`` in matrix form."""
    out = -1j * (H @ rho - rho @ H)
    for c in collapse:
        cd = c.operator.conj().T
        cdc = cd @ c.operator
        out += TWO_PI * c.rate * (c.operator @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc))
    return out


# ---------------------------------------------------------------------------
# density matrices

def check_density(rho: np.ndarray, trace_tol: float = 1e-9, herm_tol: float = 1e-12,
                  eig_tol: float = 1e-8) -> None:
    """Raise ``ValueError`` unless ``rho`` is a valid density matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if abs(np.trace(rho) - 1) > trace_tol:
        raise ValueError(f"trace {np.trace(rho).real:.12g} != 1")
    if np.abs(rho - rho.conj().T).max() > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -eig_tol:
        raise ValueError("density matrix has negative eigenvalues")


def initial_state(basis: LevelBasis, policy: InitialState | str = InitialState.THERMAL_NUCLEAR_MS_ZERO,
                  custom: np.ndarray | None = None) -> np.ndarray:
    policy = InitialState(policy)
    n = len(basis)
    rho = np.zeros((n, n), dtype=complex)
    if policy is InitialState.THERMAL_NUCLEAR_MS_ZERO:
        for i in basis.indices(GS_ZERO):
            rho[i, i] = 1 / 3
    elif policy is InitialState.FULLY_MIXED_GROUND:
        for i in basis.manifold_indices(Manifold.GROUND):
            rho[i, i] = 1 / 9
    else:
        if custom is None:
            raise ValueError("custom initial state requested without a matrix")
        rho = np.array(custom, dtype=complex)
        if rho.shape != (n, n):
            raise ValueError("custom initial state has the wrong dimension")
        check_density(rho)
    return rho


def populations(rho: np.ndarray) -> np.ndarray:
    return np.real(np.diagonal(rho)).copy()


def sector_populations(basis: LevelBasis, rho: np.ndarray) -> dict[int, float]:
    p = populations(rho)
    return {m: float(p[basis.sector(m)].sum()) for m in (-1, 0, 1)}


def apply_green_reset(rho: np.ndarray, basis: LevelBasis, params: NvParams) -> np.ndarray:
    """Off-resonant (green) repolarization as a CPTP map.

    Within each m_n sector the excited and singlet population goes to
    m_s = 0, a fraction ``green_polarization_p`` of the m_s = +/-1 population
    is moved to m_s = 0, and all coherences are erased.  Nuclear populations
    are untouched.
    """
    p = params.green_polarization_p
    pops = populations(rho)
    out = np.zeros(len(basis))
    for m in (-1, 0, 1):
        zero = basis.index(GS_ZERO.at(m))
        out[zero] += pops[zero]
        for state in (GS_PLUS, GS_MINUS):
            i = basis.index(state.at(m))
            out[i] += (1 - p) * pops[i]
            out[zero] += p * pops[i]
        for i in basis.sector(m):
            if basis[i].manifold is not Manifold.GROUND:
                out[zero] += pops[i]
    return np.diag(out).astype(complex)


# ---------------------------------------------------------------------------
# segments

@dataclass(frozen=True)
class Segment:
    """One step of a pulse sequence.

    ``duration`` in us; ``None`` evolves to the steady state of the segment's
    generator.  A reset is applied at the start of the segment, before any
    evolution.
    """

    duration: float | None
    fields: tuple[DriveField, ...] = ()
    reset: GreenReset | None = None
    detect: bool = False
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        if self.duration is not None and self.duration < 0:
            raise ValueError("segment duration must be >= 0")
        if self.duration == 0 and self.reset is None and self.detect:
            raise ValueError("a detection window needs a positive duration")


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple[Segment, ...]
    initial: InitialState = InitialState.THERMAL_NUCLEAR_MS_ZERO
    custom_rho: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValueError("pulse sequence is empty")


@dataclass
class Trajectory:
    """Sampled evolution through one segment.

    ``excited_integral`` is the time integral (us) of the total excited
    population and ``photon_integral`` that of ``sum_i w_i rho_ii`` with
    ``w_i`` the radiative rate (MHz) of level ``i``.  Both are only
    accumulated on detection segments.
    """

    times: np.ndarray
    populations: np.ndarray
    states: np.ndarray
    excited_integral: float
    final: np.ndarray
    photon_integral: float = 0.0


def _frame_phase(rotation: np.ndarray, t: float) -> np.ndarray:
    """Matrix of ``exp(2j*pi*(r_j - r_k)*t)`` used to enter a rotating frame at time t."""
    phase = np.exp(1j * TWO_PI * rotation * t)
    return np.outer(phase, phase.conj())


def _bare_rotation(basis: LevelBasis, params: NvParams) -> np.ndarray:
    return np.array([level_energy(params, level) for level in basis])


def _excited_weights(basis, params):
    excited = np.zeros(len(basis))
    excited[basis.manifold_indices(Manifold.A2, Manifold.EY)] = 1.0
    return excited, radiative_weights(basis, params)


def propagate(rho0: np.ndarray, segment: Segment, basis: LevelBasis, params: NvParams,
              sample_count: int = 1, t0: float = 0.0, method: str = "auto",
              collapse: Sequence[LindbladTerm] | None = None) -> Trajectory:
    """Evolve ``rho0`` (bare frame, at absolute time ``t0``) through ``segment``.

    Static-frame segments use ``expm`` of the Liouvillian over one sample
    step, reused for every step; the excited-population integral comes from
    the augmented generator ``[[L, 0], [1, 0]]``.  Segments with residual
    time dependence, or ``method="ode"``, use an adaptive Dormand-Prince
    integrator at rtol 1e-8 / atol 1e-10.

    ``sample_count`` is the number of steps; ``sample_count + 1`` samples
    including both end points are returned.
    """
    if segment.duration is None:
        raise ValueError("use run_sequence/steady_state for until-steady segments")
    rho0 = np.asarray(rho0, dtype=complex)
    if segment.reset is GreenReset.GREEN:
        rho0 = apply_green_reset(rho0, basis, params)
    n = len(basis)
    T = float(segment.duration)
    sample_count = max(int(sample_count), 1)
    times = t0 + np.linspace(0.0, T, sample_count + 1)
    if collapse is None:
        collapse = build_collapse(basis, params)
    frame = assign_frame(basis, segment.fields, params)
    ham = build_hamiltonian(basis, params, segment.fields, frame)
    excited, weights = _excited_weights(basis, params)

    # bare frame -> segment frame
    bare = _bare_rotation(basis, params)
    rho = rho0 * _frame_phase(frame.rotation - bare, t0)

    if T == 0:
        states = np.repeat(rho0[None], len(times), axis=0)
        return Trajectory(times, np.real(np.einsum("tii->ti", states)), states, 0.0, rho0.copy())

    if method == "auto":
        method = "ode" if ham.time_dependent else "expm"
    if method == "expm":
        if ham.time_dependent:
            raise ValueError("matrix-exponential stepping needs a static frame")
        rot_states, exc, phot = _propagate_expm(rho, ham.static, collapse, T / sample_count,
                                                sample_count, excited, weights, segment.detect,
                                                basis)
    elif method == "ode":
        rot_states, exc, phot = _propagate_ode(rho, ham, collapse, times, excited, weights,
                                               segment.detect)
    else:
        raise ValueError(f"unknown propagation method {method!r}")

    # segment frame -> bare frame at every sample
    states = np.empty_like(rot_states)
    for k, t in enumerate(times):
        states[k] = rot_states[k] * _frame_phase(bare - frame.rotation, t)
    pops = np.real(np.einsum("tii->ti", states))
    return Trajectory(times, pops, states, exc, states[-1].copy(), phot)


def _sector_blocks(basis: LevelBasis, H: np.ndarray, collapse) -> list[np.ndarray] | None:
    """m_n sector index arrays if H and every collapse operator are block diagonal."""
    sectors = [np.asarray(basis.sector(m)) for m in (-1, 0, 1)]
    label = np.empty(len(basis), dtype=int)
    for k, idx in enumerate(sectors):
        label[idx] = k
    cross = label[:, None] != label[None, :]
    if np.any(H[cross]) or any(np.any(c.operator[cross]) for c in collapse):
        return None
    return sectors


def _propagate_expm(rho, H, collapse, dt, steps, excited, weights, detect, basis=None):
    n = H.shape[0]
    blocks = _sector_blocks(basis, H, collapse) if basis is not None else None
    if blocks is None:
        blocks = [np.arange(n)]
    ops = [c.operator for c in collapse]
    rates = [TWO_PI * c.rate for c in collapse]
    out = np.zeros((steps + 1, n, n), dtype=complex)
    out[0] = rho
    exc = phot = 0.0
    for ia in blocks:
        for ib in blocks:
            block0 = rho[np.ix_(ia, ib)]
            if not np.any(block0):
                continue
            diagonal = ia is ib
            L = _superoperator(H[np.ix_(ia, ia)], H[np.ix_(ib, ib)],
                               [o[np.ix_(ia, ia)] for o in ops], [o[np.ix_(ib, ib)] for o in ops],
                               rates)
            N = L.shape[0]
            if detect and diagonal:
                aug = np.zeros((2 * N, 2 * N), dtype=complex)
                aug[:N, :N] = L
                aug[N:, :N] = np.eye(N)
                E = expm(aug * dt)
                step, integral = E[:N, :N], E[N:, :N]
            else:
                step, integral = expm(L * dt), None
            v = block0.ravel()
            m = len(ia)
            diag = np.arange(m) * (m + 1)
            for k in range(steps):
                if integral is not None:
                    acc = (integral @ v)[diag].real
                    exc += float(excited[ia] @ acc)
                    phot += float(weights[ia] @ acc)
                v = step @ v
                out[k + 1][np.ix_(ia, ib)] = v.reshape(len(ia), len(ib))
    return out, exc, phot


def _propagate_ode(rho, ham: Hamiltonian, collapse, times, excited, weights, detect):
    n = rho.shape[0]
    N = n * n
    t0 = times[0]
    diag = np.arange(n) * (n + 1)

    def rhs(t, y):
        r = y[:N].reshape(n, n)
        d = lindblad_rhs(ham.at(t), r, collapse).ravel()
        pops = r.ravel()[diag].real
        return np.concatenate([d, [excited @ pops, weights @ pops]])

    y0 = np.concatenate([rho.ravel(), [0.0, 0.0]]).astype(complex)
    sol = solve_ivp(rhs, (t0, times[-1]), y0, method="DOP853", t_eval=times,
                    rtol=RTOL, atol=ATOL)
    if not sol.success:
        raise IntegrationError(f"adaptive integrator failed at rtol={RTOL:g}, "
                               f"atol={ATOL:g}: {sol.message}")
    states = sol.y[:N].T.reshape(-1, n, n)
    exc = float(sol.y[N, -1].real) if detect else 0.0
    phot = float(sol.y[N + 1, -1].real) if detect else 0.0
    return states, exc, phot


# ---------------------------------------------------------------------------
# steady state

def steady_state(H: np.ndarray, collapse: Sequence[LindbladTerm] = (), rank_tol: float = 1e-9,
                 check_degeneracy: bool = True) -> np.ndarray:
    """Unique stationary state of the Lindblad generator.

    Solves ``L vec(rho) = 0`` with ``tr rho = 1`` as a bordered linear system.
    Raises :class:`DegenerateSteadyState` when the null space of ``L`` is more
    than one dimensional (singular values below ``rank_tol * s_max``), which
    typically means an m_n sector or a spin level is dynamically decoupled.
    """
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    L = liouvillian(H, collapse)
    if check_degeneracy:
        s = np.linalg.svd(L, compute_uv=False)
        null_dim = int(np.sum(s <= rank_tol * s[0])) if s[0] > 0 else n * n
        if null_dim > 1:
            raise DegenerateSteadyState(
                f"generator has a {null_dim}-dimensional null space; some levels or "
                "m_n sectors are decoupled (add a mixing field or use time-domain mode)")
    trace_row = np.eye(n).ravel()
    A = np.vstack([L, trace_row[None, :]])
    b = np.zeros(n * n + 1, dtype=complex)
    b[-1] = 1.0
    v, *_ = np.linalg.lstsq(A, b, rcond=None)
    rho = v.reshape(n, n)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def steady_state_residual(H, collapse, rho) -> float:
    """``||L vec(rho)|| / ||L||`` (Frobenius)."""
    L = liouvillian(H, collapse)
    return float(np.linalg.norm(L @ np.asarray(rho).ravel()) / np.linalg.norm(L))


def restrict(H: np.ndarray, collapse: Sequence[LindbladTerm], indices: Sequence[int]):
    """Hamiltonian and collapse operators projected onto ``indices``.

    Exact when the dynamics do not connect ``indices`` to the rest of the basis,
    e.g. a single m_n sector.
    """
    idx = np.asarray(indices)
    sub_h = np.asarray(H)[np.ix_(idx, idx)]
    sub_c = []
    for c in collapse:
        op = c.operator[np.ix_(idx, idx)]
        if np.any(op):
            sub_c.append(LindbladTerm(op, c.rate, c.label))
    return sub_h, sub_c


def sector_steady_states(basis: LevelBasis, params: NvParams, fields: Sequence[DriveField],
                         weights: dict[int, float] | None = None) -> np.ndarray:
    """Steady state assembled from independent m_n sectors.

    Every drive and collapse channel conserves m_n, so the full generator has
    one stationary state per sector; ``weights`` (default uniform) sets the
    nuclear populations.
    """
    if weights is None:
        weights = {m: 1 / 3 for m in (-1, 0, 1)}
    frame = assign_frame(basis, fields, params)
    ham = build_hamiltonian(basis, params, fields, frame)
    if ham.time_dependent:
        raise ValueError("steady state needs a static rotating frame; use time-domain mode")
    collapse = build_collapse(basis, params)
    n = len(basis)
    rho = np.zeros((n, n), dtype=complex)
    for m, w in weights.items():
        if w == 0:
            continue
        idx = basis.sector(m)
        h, c = restrict(ham.static, collapse, idx)
        rho[np.ix_(idx, idx)] = w * steady_state(h, c)
    return rho


class SectorSteadySolver:
    """Batched stationary populations for m_n-conserving dynamics.

    The dissipator of every sector is assembled once; :meth:`populations`
    then solves the bordered system ``[L; tr] vec(rho) = [0; 1]`` for a
    whole stack of static Hamiltonians at once.
    """

    def __init__(self, basis: LevelBasis, params: NvParams,
                 weights: dict[int, float] | None = None):
        self.basis = basis
        self.params = params
        self.weights = weights or {m: 1 / 3 for m in (-1, 0, 1)}
        collapse = build_collapse(basis, params)
        self.sectors = []
        for m in (-1, 0, 1):
            idx = np.asarray(basis.sector(m))
            _, sub = restrict(np.zeros((len(basis), len(basis))), collapse, idx)
            ops, rates = _collapse_arrays(sub, len(idx))
            dissipator = _superoperator(np.zeros((len(idx),) * 2), np.zeros((len(idx),) * 2),
                                        ops, ops, rates)
            self.sectors.append((m, idx, dissipator, sub))

    def populations(self, H: np.ndarray, check: bool = False) -> np.ndarray:
        """Level populations for ``H`` of shape ``(N, N)`` or ``(K, N, N)``."""
        H = np.asarray(H, dtype=complex)
        single = H.ndim == 2
        if single:
            H = H[None]
        out = np.zeros(H.shape[:2])
        for m, idx, dissipator, sub in self.sectors:
            w = self.weights.get(m, 0.0)
            if w == 0:
                continue
            h = H[:, idx[:, None], idx[None, :]]
            n = len(idx)
            if check:
                steady_state(h[0], sub)
            eye = np.eye(n)
            L = -1j * (np.einsum("kac,bd->kabcd", h, eye) - np.einsum("ac,kdb->kabcd", eye, h))
            L = L.reshape(len(h), n * n, n * n) + dissipator
            # replace the first row by the trace condition
            L[:, 0, :] = eye.ravel()
            rhs = np.zeros((len(h), n * n), dtype=complex)
            rhs[:, 0] = 1.0
            v = np.linalg.solve(L, rhs[..., None])[..., 0]
            diag = np.arange(n) * (n + 1)
            out[:, idx] = w * v[:, diag].real
        return out[0] if single else out


# ---------------------------------------------------------------------------
# sequences

@dataclass
class SequenceResult:
    rho: np.ndarray
    counts: float
    time: float
    excited_integral: float = 0.0


def detected_counts(photon_integral: float, params: NvParams) -> float:
    """Expected detected photons from the weighted excited-population integral.

    Emission rate of a level with radiative rate G (MHz) is ``2*pi*G`` per us.
    """
    return params.collection_eff * TWO_PI * photon_integral


def run_sequence(seq: PulseSequence, basis: LevelBasis, params: NvParams,
                 method: str = "auto") -> SequenceResult:
    """Execute ``seq`` and return the final state and the detected photon count.

    Until-steady segments (``duration=None``) replace the state with the
    stationary state of their generator, weighted by the current m_n
    populations; when detecting they contribute one microsecond of
    steady-state emission.
    """
    rho = initial_state(basis, seq.initial, seq.custom_rho)
    collapse = build_collapse(basis, params)
    t = 0.0
    counts = 0.0
    exc_total = 0.0
    weights = radiative_weights(basis, params)
    for seg in seq.segments:
        if seg.duration is None:
            if seg.reset is GreenReset.GREEN:
                rho = apply_green_reset(rho, basis, params)
            pops = {m: float(populations(rho)[basis.sector(m)].sum()) for m in (-1, 0, 1)}
            frame_rho = sector_steady_states(basis, params, seg.fields, pops)
            rho = _to_bare(frame_rho, basis, params, seg.fields, t)
            if seg.detect:
                p = populations(rho)
                exc_total += float(p[basis.manifold_indices(Manifold.A2, Manifold.EY)].sum())
                counts += detected_counts(float(weights @ p), params)
            continue
        traj = propagate(rho, seg, basis, params, sample_count=1, t0=t, method=method,
                         collapse=collapse)
        rho = traj.final
        t += seg.duration
        if seg.detect:
            exc_total += traj.excited_integral
            counts += detected_counts(traj.photon_integral, params)
    return SequenceResult(rho, counts, t, exc_total)


def _to_bare(rho, basis, params, fields, t):
    frame = assign_frame(basis, fields, params)
    return rho * _frame_phase(_bare_rotation(basis, params) - frame.rotation, t)
