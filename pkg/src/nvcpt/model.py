"""Level structure, energies, drive couplings and collapse channels of the NV center.

The Hilbert space is the product of the electronic state (ground-state spin
triplet plus optionally the A2 and Ey excited states and the metastable
singlet) with the 14N nuclear spin projection m_n in {-1, 0, +1}.

Units: frequencies are ordinary frequencies in MHz and times are in us.
Everything user-facing stays in MHz; the factor 2*pi is applied only when a
Hamiltonian or a dissipator is assembled.  Optical frequencies are measured
from a fixed optical reference (the excited levels sit at zero energy), which
only shifts every optical field by the same constant.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi
NUCLEAR_PROJECTIONS = (-1, 0, 1)
SPIN_PROJECTIONS = (-1, 0, 1)


class Manifold(Enum):
    GROUND = "ground"
    A2 = "A2"
    EY = "Ey"
    SINGLET = "singlet"


class FieldKind(Enum):
    OPTICAL = "optical"
    MICROWAVE = "microwave"


@dataclass(frozen=True, order=False)
class SpinLevel:
    """One basis level: electronic manifold, electron spin and nuclear spin."""

    manifold: Manifold
    m_s: int | None
    m_n: int

    def __post_init__(self):
        if self.m_n not in NUCLEAR_PROJECTIONS:
            raise ValueError(f"m_n must be -1, 0 or +1, got {self.m_n}")
        if self.manifold is Manifold.GROUND:
            if self.m_s not in SPIN_PROJECTIONS:
                raise ValueError(f"ground level needs m_s in (-1, 0, 1), got {self.m_s}")
        elif self.m_s is not None:
            raise ValueError(f"{self.manifold.value} levels carry no m_s")

    @property
    def electronic(self) -> "Electronic":
        return Electronic(self.manifold, self.m_s)

    def __str__(self):
        if self.manifold is Manifold.GROUND:
            return f"|m_s={self.m_s:+d}, m_n={self.m_n:+d}>"
        return f"|{self.manifold.value}, m_n={self.m_n:+d}>"


@dataclass(frozen=True)
class Electronic:
    """Electronic part of a level, without the nuclear projection.

    Drive fields are specified between two of these: they couple every m_n
    sector identically and never flip the nuclear spin.
    """

    manifold: Manifold
    m_s: int | None = None

    def __post_init__(self):
        # reuse SpinLevel validation
        SpinLevel(self.manifold, self.m_s, 0)

    def at(self, m_n: int) -> SpinLevel:
        return SpinLevel(self.manifold, self.m_s, m_n)

    def __str__(self):
        if self.manifold is Manifold.GROUND:
            return f"m_s={self.m_s:+d}"
        return self.manifold.value


GS_MINUS = Electronic(Manifold.GROUND, -1)
GS_ZERO = Electronic(Manifold.GROUND, 0)
GS_PLUS = Electronic(Manifold.GROUND, 1)
A2 = Electronic(Manifold.A2)
EY = Electronic(Manifold.EY)
SINGLET = Electronic(Manifold.SINGLET)


def ground_state(m_s: int) -> Electronic:
    return Electronic(Manifold.GROUND, int(m_s))


@dataclass(frozen=True)
class LevelBasis:
    """Ordered, deduplicated list of levels with index lookup.

    The nine ground levels always come first, ordered lexicographically by
    (m_s, m_n); excited manifolds follow, each ordered by m_n.
    """

    levels: tuple[SpinLevel, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for i, level in enumerate(self.levels):
            if level in index:
                raise ValueError(f"duplicate level {level}")
            index[level] = i
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    def __getitem__(self, i):
        return self.levels[i]

    def __contains__(self, level):
        if isinstance(level, Electronic):
            return level.at(0) in self._index
        return level in self._index

    def index(self, level: SpinLevel) -> int:
        return self._index[level]

    def indices(self, electronic: Electronic) -> list[int]:
        """Indices of ``electronic`` in every m_n sector, ordered by m_n."""
        return [self._index[electronic.at(m_n)] for m_n in NUCLEAR_PROJECTIONS]

    def sector(self, m_n: int) -> list[int]:
        return [i for i, level in enumerate(self.levels) if level.m_n == m_n]

    def manifold_indices(self, *manifolds: Manifold) -> list[int]:
        return [i for i, level in enumerate(self.levels) if level.manifold in manifolds]

    @property
    def has(self) -> set[Manifold]:
        return {level.manifold for level in self.levels}

    def subbasis(self, indices: Sequence[int]) -> "LevelBasis":
        return LevelBasis(tuple(self.levels[i] for i in indices))


def build_basis(a2: bool = True, ey: bool = False, singlet: bool = False) -> LevelBasis:
    """Assemble the level basis for the requested excited manifolds.

    >>> len(build_basis(a2=False)), len(build_basis()), len(build_basis(ey=True, singlet=True))
    (9, 12, 18)
    """
    levels = [SpinLevel(Manifold.GROUND, m_s, m_n)
              for m_s in SPIN_PROJECTIONS for m_n in NUCLEAR_PROJECTIONS]
    for enabled, manifold in ((a2, Manifold.A2), (ey, Manifold.EY), (singlet, Manifold.SINGLET)):
        if enabled:
            levels.extend(SpinLevel(manifold, None, m_n) for m_n in NUCLEAR_PROJECTIONS)
    return LevelBasis(tuple(levels))


@dataclass(frozen=True)
class NvParams:
    """Physical constants of the center, all frequencies and rates in MHz.

    ``hyperfine_a`` defaults to the physical negative sign of the 14N axial
    constant; only ``|2 A| = 4.4 MHz`` is fixed by the hyperfine CPT data, and
    flipping the sign just relabels m_n.  ``zeeman_split`` is an artifact
    default: the Zeeman splitting used for the hyperfine CPT runs is not given.
    """

    zeeman_split: float = 30.0
    hyperfine_a: float = -2.2
    quadrupole_q: float = -5.0
    zfs: float = 2870.0
    gamma_rad: float = 13.0
    leak_branch: float = 0.02
    ground_dephase: float = 0.1
    green_polarization_p: float = 0.95
    collection_eff: float = 0.05
    singlet_rate: float = 0.43

    def __post_init__(self):
        for name in ("gamma_rad", "ground_dephase", "singlet_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.leak_branch < 1.0:
            raise ValueError("leak_branch must lie in [0, 1)")
        for name in ("green_polarization_p", "collection_eff"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("zeeman_split", "hyperfine_a", "quadrupole_q", "zfs"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def ground_energy(params: NvParams, m_s: int, m_n: int) -> float:
    """Ground-state energy in MHz.

    ``zfs*[m_s != 0] + zeeman_split/2 * m_s + A*m_s*m_n + Q*m_n**2``.  The
    quadrupole term is the same for every m_s, so the splitting between
    m_s = +1 and m_s = -1 at fixed m_n is ``zeeman_split + 2*A*m_n``.
    """
    if m_s not in SPIN_PROJECTIONS or m_n not in NUCLEAR_PROJECTIONS:
        raise ValueError(f"invalid projections m_s={m_s}, m_n={m_n}")
    return (params.zfs * (m_s != 0) + 0.5 * params.zeeman_split * m_s
            + params.hyperfine_a * m_s * m_n + params.quadrupole_q * m_n**2)


def level_energy(params: NvParams, level: SpinLevel) -> float:
    if level.manifold is Manifold.GROUND:
        return ground_energy(params, level.m_s, level.m_n)
    # excited-state hyperfine structure is neglected; the quadrupole energy
    # belongs to the nucleus and is carried by every electronic state
    return params.quadrupole_q * level.m_n**2


def two_photon_resonance(params: NvParams, m_n: int) -> float:
    """Two-photon detuning at which the Lambda system of sector m_n goes dark."""
    return ground_energy(params, 1, m_n) - ground_energy(params, -1, m_n)


@dataclass(frozen=True)
class DriveField:
    """A coherent field driving ``lower`` <-> ``upper`` in every m_n sector.

    ``rabi`` is an ordinary frequency: on resonance the population completes
    one full cycle in ``1/rabi``.  ``detuning`` is measured from the m_n = 0
    transition frequency, so the lab frequency is
    ``E(upper, m_n=0) - E(lower, m_n=0) + detuning``.
    """

    kind: FieldKind
    lower: Electronic
    upper: Electronic
    rabi: float
    detuning: float = 0.0
    phase: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.rabi < 0 or not np.isfinite(self.rabi):
            raise ValueError(f"rabi must be finite and >= 0, got {self.rabi}")
        if not np.isfinite(self.detuning):
            raise ValueError("detuning must be finite")
        ground = Manifold.GROUND
        if self.kind is FieldKind.OPTICAL:
            if self.lower.manifold is not ground or self.upper.manifold in (ground, Manifold.SINGLET):
                raise ValueError("optical fields couple a ground level to A2 or Ey")
        else:
            if self.lower.manifold is not ground or self.upper.manifold is not ground:
                raise ValueError("microwave fields act within the ground triplet")
            if self.lower.m_s == self.upper.m_s:
                raise ValueError("microwave endpoints must differ in m_s")

    def frequency(self, params: NvParams) -> float:
        """Lab frequency in MHz."""
        return (level_energy(params, self.upper.at(0)) - level_energy(params, self.lower.at(0))
                + self.detuning)

    def pairs(self, basis: LevelBasis) -> list[tuple[int, int]]:
        """(upper, lower) index pairs, one per m_n sector."""
        return [(basis.index(self.upper.at(m)), basis.index(self.lower.at(m)))
                for m in NUCLEAR_PROJECTIONS]


def optical(lower: Electronic, upper: Electronic, rabi: float, detuning: float = 0.0,
            phase: float = 0.0, label: str = "") -> DriveField:
    return DriveField(FieldKind.OPTICAL, lower, upper, rabi, detuning, phase, label)


def microwave(m_s: int, rabi: float, detuning: float = 0.0, phase: float = 0.0,
              label: str = "") -> DriveField:
    """Microwave on the m_s=0 <-> m_s transition."""
    return DriveField(FieldKind.MICROWAVE, GS_ZERO, ground_state(m_s), rabi, detuning, phase, label)


@dataclass(frozen=True)
class ResidualTerm:
    """Coupling left time dependent in the rotating frame.

    The (upper, lower) matrix element is ``amplitude * exp(-2j*pi*frequency*t)``
    with ``amplitude`` already in angular units.
    """

    upper: int
    lower: int
    amplitude: complex
    frequency: float


@dataclass(frozen=True)
class FrameAssignment:
    """Per-level rotation frequencies (MHz) of the rotating frame."""

    rotation: np.ndarray
    residuals: tuple[tuple[int, int, int, float], ...] = ()

    @property
    def residual_time_dependent(self) -> bool:
        return bool(self.residuals)

    def shifted(self, offset: float) -> "FrameAssignment":
        return FrameAssignment(self.rotation + offset, self.residuals)


def assign_frame(basis: LevelBasis, fields: Iterable[DriveField], params: NvParams,
                 tol: float = 1e-9) -> FrameAssignment:
    """Choose level rotation frequencies so that as many drives as possible are static.

    Every (field, m_n) pair gives an edge ``rotation[upper] - rotation[lower] =
    frequency``.  A breadth-first spanning forest fixes the rotations; each
    root keeps its bare energy, so undriven levels carry no diagonal term.
    Edges closing a cycle with a mismatch larger than ``tol`` (MHz) are
    reported as residuals ``(field_index, upper, lower, mismatch)``.
    """
    fields = list(fields)
    n = len(basis)
    adjacency: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    edges = []
    for k, f in enumerate(fields):
        if f.rabi == 0:
            continue
        freq = f.frequency(params)
        for upper, lower in f.pairs(basis):
            adjacency[lower].append((upper, freq))
            adjacency[upper].append((lower, -freq))
            edges.append((k, upper, lower, freq))

    rotation = np.full(n, np.nan)
    for root in range(n):
        if not np.isnan(rotation[root]):
            continue
        rotation[root] = level_energy(params, basis[root])
        queue = deque([root])
        while queue:
            i = queue.popleft()
            for j, freq in adjacency[i]:
                if np.isnan(rotation[j]):
                    rotation[j] = rotation[i] + freq
                    queue.append(j)

    residuals = []
    for k, upper, lower, freq in edges:
        mismatch = freq - (rotation[upper] - rotation[lower])
        if abs(mismatch) > tol:
            residuals.append((k, upper, lower, float(mismatch)))
    return FrameAssignment(rotation, tuple(residuals))


class HermiticityError(RuntimeError):
    pass


@dataclass(frozen=True)
class Hamiltonian:
    """Rotating-frame Hamiltonian in angular units (rad/us).

    ``static`` holds the diagonal detunings and every static coupling; the
    ``residuals`` are added by :meth:`at`.
    """

    static: np.ndarray
    residuals: tuple[ResidualTerm, ...] = ()

    @property
    def time_dependent(self) -> bool:
        return bool(self.residuals)

    def at(self, t: float) -> np.ndarray:
        if not self.residuals:
            return self.static
        h = self.static.copy()
        for term in self.residuals:
            element = term.amplitude * np.exp(-1j * TWO_PI * term.frequency * t)
            h[term.upper, term.lower] += element
            h[term.lower, term.upper] += np.conj(element)
        return h

    def callback(self) -> Callable[[float], np.ndarray]:
        return self.at


def build_hamiltonian(basis: LevelBasis, params: NvParams, fields: Sequence[DriveField],
                      frame: FrameAssignment | None = None) -> Hamiltonian:
    """Rotating-wave Hamiltonian for ``fields`` in ``frame``.

    Diagonal: ``2*pi*(E_i - rotation_i)``.  Each drive adds ``pi*rabi*exp(i*phase)``
    on the (upper, lower) element of every m_n sector.
    """
    fields = list(fields)
    if frame is None:
        frame = assign_frame(basis, fields, params)
    n = len(basis)
    energies = np.array([level_energy(params, level) for level in basis])
    h = np.diag(TWO_PI * (energies - frame.rotation)).astype(complex)

    residual_edges = {(k, u, l): mismatch for k, u, l, mismatch in frame.residuals}
    residuals = []
    for k, f in enumerate(fields):
        if f.rabi == 0:
            continue
        amplitude = np.pi * f.rabi * np.exp(1j * f.phase)
        for upper, lower in f.pairs(basis):
            mismatch = residual_edges.get((k, upper, lower))
            if mismatch is None:
                h[upper, lower] += amplitude
                h[lower, upper] += np.conj(amplitude)
            else:
                residuals.append(ResidualTerm(upper, lower, amplitude, mismatch))

    if not np.allclose(h, h.conj().T, rtol=0, atol=1e-12 * max(1.0, np.abs(h).max())):
        raise HermiticityError("assembled Hamiltonian is not Hermitian")
    assert h.shape == (n, n)
    return Hamiltonian(h, tuple(residuals))


@dataclass(frozen=True)
class LindbladTerm:
    operator: np.ndarray
    rate: float
    label: str = ""

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("collapse rate must be >= 0")


def _jump(n: int, to: int, frm: int) -> np.ndarray:
    op = np.zeros((n, n), dtype=complex)
    op[to, frm] = 1.0
    return op


def build_collapse(basis: LevelBasis, params: NvParams) -> list[LindbladTerm]:
    """Spontaneous decay, singlet leak and ground-state dephasing channels.

    Rates are ordinary frequencies in MHz: a level decaying at rate G loses
    population as ``exp(-2*pi*G*t)``.  Zero-rate channels are omitted.
    """
    n = len(basis)
    has = basis.has
    terms = []
    gamma, leak = params.gamma_rad, params.leak_branch
    for m in NUCLEAR_PROJECTIONS:
        if Manifold.A2 in has:
            a2 = basis.index(A2.at(m))
            for m_s in (1, -1):
                rate = 0.5 * gamma * (1.0 - leak)
                if rate > 0:
                    terms.append(LindbladTerm(_jump(n, basis.index(ground_state(m_s).at(m)), a2),
                                              rate, f"A2->{m_s:+d} (m_n={m:+d})"))
            zero = basis.index(GS_ZERO.at(m))
            if gamma * leak > 0:
                if Manifold.SINGLET in has:
                    terms.append(LindbladTerm(_jump(n, basis.index(SINGLET.at(m)), a2),
                                              gamma * leak, f"A2->singlet (m_n={m:+d})"))
                else:
                    terms.append(LindbladTerm(_jump(n, zero, a2), gamma * leak,
                                              f"A2->0 (m_n={m:+d})"))
        if Manifold.SINGLET in has and params.singlet_rate > 0:
            terms.append(LindbladTerm(_jump(n, basis.index(GS_ZERO.at(m)),
                                            basis.index(SINGLET.at(m))),
                                      params.singlet_rate, f"singlet->0 (m_n={m:+d})"))
        if Manifold.EY in has and gamma > 0:
            terms.append(LindbladTerm(_jump(n, basis.index(GS_ZERO.at(m)), basis.index(EY.at(m))),
                                      gamma, f"Ey->0 (m_n={m:+d})"))
    if params.ground_dephase > 0:
        # exp(-2*pi*ground_dephase*t) decay of the +1/-1 coherence needs rate/2 on (P+ - P-)
        op = np.zeros((n, n), dtype=complex)
        for i in basis.indices(GS_PLUS):
            op[i, i] = 1.0
        for i in basis.indices(GS_MINUS):
            op[i, i] = -1.0
        terms.append(LindbladTerm(op, 0.5 * params.ground_dephase, "dephasing +1/-1"))
    return terms


def radiative_weights(basis: LevelBasis, params: NvParams) -> np.ndarray:
    """Per-level photon emission rate (MHz) into the detected radiative channels."""
    w = np.zeros(len(basis))
    for i, level in enumerate(basis):
        if level.manifold is Manifold.A2:
            w[i] = params.gamma_rad * (1.0 - params.leak_branch)
        elif level.manifold is Manifold.EY:
            w[i] = params.gamma_rad
    return w


def required_basis(fields: Iterable[DriveField], base: LevelBasis | None = None,
                   singlet: bool = False) -> LevelBasis:
    """Smallest standard basis containing every endpoint of ``fields``."""
    manifolds = {f.upper.manifold for f in fields}
    if base is not None:
        manifolds |= base.has
    return build_basis(a2=Manifold.A2 in manifolds, ey=Manifold.EY in manifolds,
                       singlet=singlet or Manifold.SINGLET in manifolds)
