"""Dressed-state prediction of CPT dip positions under a strong microwave.

A microwave of Rabi frequency ``rabi`` on m_s = 0 <-> +1, detuned by
``Delta_n = f_mw - f(0 -> +1, m_n)``, splits the +1 level of each nuclear
sector into two dressed states.  In the frame of the +1 level the pair
{|+1>, |0>} has quasi-energies ``(Delta +/- sqrt(Delta**2 + rabi**2)) / 2``,
so the two-photon dark resonance of sector m_n moves from
``zeeman_split + 2*A*m_n`` to that position plus each dressed shift.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .model import (
    TWO_PI, GS_PLUS, GS_ZERO, NUCLEAR_PROJECTIONS, NvParams, assign_frame, build_basis,
    build_hamiltonian, ground_energy, microwave, two_photon_resonance,
)


@dataclass(frozen=True)
class DressingSpec:
    """Dressing microwave: Rabi frequency and per-sector detunings (MHz)."""

    rabi: float
    detunings: Mapping[int, float]

    def __post_init__(self):
        if self.rabi < 0:
            raise ValueError("rabi must be >= 0")
        if set(self.detunings) != set(NUCLEAR_PROJECTIONS):
            raise ValueError("detunings needed for m_n = -1, 0, +1")
        if not all(np.isfinite(v) for v in self.detunings.values()):
            raise ValueError("detunings must be finite")

    @classmethod
    def from_offset(cls, params: NvParams, rabi: float, offset: float) -> "DressingSpec":
        """Microwave ``offset`` MHz above the bare m_n = 0 line of 0 <-> +1."""
        line0 = transition_frequency(params, 0)
        return cls(rabi, {m: line0 + offset - transition_frequency(params, m)
                          for m in NUCLEAR_PROJECTIONS})


def transition_frequency(params: NvParams, m_n: int) -> float:
    """Bare m_s = 0 -> +1 frequency of sector m_n (MHz)."""
    return ground_energy(params, 1, m_n) - ground_energy(params, 0, m_n)


@dataclass(frozen=True)
class DressedDip:
    m_n: int
    branch: str
    position: float
    weight: float


class DipSet(tuple):
    """Six :class:`DressedDip` entries ordered by (m_n, branch)."""

    def positions(self) -> np.ndarray:
        return np.array([d.position for d in self])

    def weights(self) -> np.ndarray:
        return np.array([d.weight for d in self])

    def get(self, m_n: int, branch: str) -> DressedDip:
        for d in self:
            if d.m_n == m_n and d.branch == branch:
                return d
        raise KeyError((m_n, branch))

    def visible(self, min_weight: float = 0.05) -> list[DressedDip]:
        return sorted((d for d in self if d.weight > min_weight), key=lambda d: d.position)


def dressed_shifts(rabi: float, detuning: float) -> tuple[float, float]:
    """Shifts of the two dressed resonances relative to the bare +1 level.

    >>> dressed_shifts(4.0, 3.0)
    (4.0, -1.0)
    """
    if rabi < 0:
        raise ValueError("rabi must be >= 0")
    root = np.hypot(detuning, rabi)
    return 0.5 * (detuning + root), 0.5 * (detuning - root)


def branch_weight(rabi: float, shift: float) -> float:
    """|+1> character of the dressed state with the given shift.

    For the pair block ``[[0, rabi/2], [rabi/2, Delta]]`` the eigenvector of
    eigenvalue ``s`` is proportional to ``(rabi/2, s)``.
    """
    q = 0.25 * rabi**2
    if q == 0:
        return 1.0 if shift == 0 else 0.0
    return q / (q + shift**2)


def dip_positions(params: NvParams, dressing: DressingSpec) -> DipSet:
    """Closed-form two-photon-detuning positions of the six dressed dips."""
    dips = []
    for m in NUCLEAR_PROJECTIONS:
        bare = two_photon_resonance(params, m)
        delta = dressing.detunings[m]
        plus, minus = dressed_shifts(dressing.rabi, delta)
        if dressing.rabi == 0 and delta == 0:
            w_plus = w_minus = 0.5
        else:
            w_plus, w_minus = branch_weight(dressing.rabi, plus), branch_weight(dressing.rabi, minus)
        dips.append(DressedDip(m, "+", bare + plus, w_plus))
        dips.append(DressedDip(m, "-", bare + minus, w_minus))
    return DipSet(dips)


def dressed_oracle(params: NvParams, dressing: DressingSpec, full_block: bool = False) -> DipSet:
    """Dip positions from numerical diagonalization of the dressed ground block.

    The rotating-frame Hamiltonian is assembled by the core model for the
    nine ground levels with one microwave per sector (the per-sector
    detunings of ``dressing`` are honoured exactly, so the sectors are built
    separately).  Eigenvalues are measured from the bare +1 quasi-energy.
    With ``full_block`` the complete 9x9 matrix is diagonalized and the
    eigenvectors are assigned to sectors by their weight.
    """
    basis = build_basis(a2=False)
    dips = []
    for m in NUCLEAR_PROJECTIONS:
        # detuning measured from the m_n = 0 line that DriveField uses
        offset = dressing.detunings[m] + transition_frequency(params, m) - transition_frequency(params, 0)
        field = microwave(1, dressing.rabi, offset)
        frame = assign_frame(basis, [field], params)
        H = build_hamiltonian(basis, params, [field], frame).static / TWO_PI
        plus_i = basis.index(GS_PLUS.at(m))
        zero_i = basis.index(GS_ZERO.at(m))
        ref = H[plus_i, plus_i].real
        if full_block:
            all_vals, vecs = np.linalg.eigh(H)
            # degenerate eigenspaces (e.g. A = 0) mix sectors arbitrarily, so
            # weights are summed over each cluster, which is rotation invariant
            tol = 1e-9 * max(1.0, float(np.abs(all_vals).max()))
            cluster = np.concatenate(([0], np.cumsum(np.diff(all_vals) > tol)))
            vals, weight, plus_weight = [], [], []
            for c in np.unique(cluster):
                k = cluster == c
                vals.append(all_vals[k].mean())
                plus_weight.append(float(np.sum(np.abs(vecs[plus_i, k]) ** 2)))
                weight.append(plus_weight[-1] + float(np.sum(np.abs(vecs[zero_i, k]) ** 2)))
            sel = np.argsort(weight)[-2:]
            vals, plus_weight = np.array(vals)[sel], np.array(plus_weight)[sel]
        else:
            block = H[np.ix_([plus_i, zero_i], [plus_i, zero_i])]
            vals, vecs = np.linalg.eigh(block)
            plus_weight = np.abs(vecs[0]) ** 2
        order = np.argsort(vals)[::-1]
        bare = two_photon_resonance(params, m)
        for branch, k in zip("+-", order):
            dips.append(DressedDip(m, branch, bare + float(vals[k] - ref), float(plus_weight[k])))
    return DipSet(dips)
