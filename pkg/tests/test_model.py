import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvcpt.model import (
    A2, EY, GS_MINUS, GS_PLUS, GS_ZERO, SINGLET, DriveField, FieldKind, HermiticityError,
    Manifold, NvParams, assign_frame, build_basis, build_collapse, build_hamiltonian,
    ground_energy, level_energy, microwave, optical, radiative_weights, two_photon_resonance,
)

finite = st.floats(-50, 50, allow_nan=False)


def test_basis_sizes():
    assert len(build_basis(a2=False)) == 9
    assert len(build_basis()) == 12
    assert len(build_basis(ey=True, singlet=True)) == 18


def test_basis_index_roundtrip():
    basis = build_basis(ey=True, singlet=True)
    for i, level in enumerate(basis):
        assert basis.index(level) == i
    for m in (-1, 0, 1):
        assert all(basis[i].m_n == m for i in basis.sector(m))


def test_ground_energy_formula():
    p = NvParams(zeeman_split=30, hyperfine_a=-2.2, quadrupole_q=-5, zfs=2870)
    assert ground_energy(p, 0, 0) == 0
    assert ground_energy(p, 0, 1) == pytest.approx(-5)
    assert ground_energy(p, 1, 1) == pytest.approx(2870 + 15 - 2.2 - 5)
    assert ground_energy(p, -1, 1) == pytest.approx(2870 - 15 + 2.2 - 5)


def test_hyperfine_spacing_is_2a():
    p = NvParams(zeeman_split=30, hyperfine_a=2.2)
    shift = ground_energy(p, 1, 1) - ground_energy(p, -1, 1) - p.zeeman_split
    assert shift == pytest.approx(4.4)


@given(dz=finite, a=finite, q=finite, q2=finite, m=st.sampled_from([-1, 0, 1]))
def test_splitting_independent_of_quadrupole(dz, a, q, q2, m):
    p1 = NvParams(zeeman_split=dz, hyperfine_a=a, quadrupole_q=q)
    p2 = NvParams(zeeman_split=dz, hyperfine_a=a, quadrupole_q=q2)
    d1 = ground_energy(p1, 1, m) - ground_energy(p1, -1, m)
    assert d1 == pytest.approx(dz + 2 * a * m, abs=1e-9)
    assert d1 == pytest.approx(two_photon_resonance(p2, m), abs=1e-9)


def test_excited_levels_carry_only_quadrupole():
    p = NvParams(quadrupole_q=-5)
    assert level_energy(p, A2.at(0)) == 0
    assert level_energy(p, A2.at(1)) == level_energy(p, A2.at(-1)) == -5


@pytest.mark.parametrize("kwargs", [dict(leak_branch=1.0), dict(gamma_rad=-1),
                                    dict(green_polarization_p=1.5), dict(collection_eff=-0.1),
                                    dict(zeeman_split=float("nan"))])
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        NvParams(**kwargs)


def test_drive_field_validation():
    with pytest.raises(ValueError):
        optical(GS_MINUS, GS_PLUS, 1.0)
    with pytest.raises(ValueError):
        DriveField(FieldKind.MICROWAVE, GS_ZERO, GS_ZERO, 1.0)
    with pytest.raises(ValueError):
        optical(GS_MINUS, A2, -1.0)
    with pytest.raises(ValueError):
        optical(GS_MINUS, SINGLET, 1.0)


def test_field_frequency():
    p = NvParams()
    assert microwave(1, 1.0, 0.5).frequency(p) == pytest.approx(2870 + 15 + 0.5)
    assert optical(GS_PLUS, A2, 1.0).frequency(p) == pytest.approx(-(2870 + 15))


def test_coupling_amplitude_is_pi_rabi():
    basis = build_basis()
    H = build_hamiltonian(basis, NvParams(), [optical(GS_PLUS, A2, 2.0, phase=0.3)]).static
    i, j = basis.index(A2.at(0)), basis.index(GS_PLUS.at(0))
    assert H[i, j] == pytest.approx(np.pi * 2.0 * np.exp(0.3j))
    assert H[j, i] == pytest.approx(np.conj(H[i, j]))


def test_lambda_frame_is_static_with_detunings_on_diagonal():
    p = NvParams()
    basis = build_basis()
    fields = [optical(GS_MINUS, A2, 1.0, 3.0), optical(GS_PLUS, A2, 1.0, 1.0)]
    ham = build_hamiltonian(basis, p, fields)
    assert not ham.time_dependent
    H = ham.static / (2 * np.pi)
    for m in (-1, 0, 1):
        minus, plus = basis.index(GS_MINUS.at(m)), basis.index(GS_PLUS.at(m))
        # two-photon detuning of the sector sits on the ground diagonal difference
        delta = (3.0 - 1.0) - 2 * p.hyperfine_a * m
        assert (H[plus, plus] - H[minus, minus]).real == pytest.approx(-delta, abs=1e-9)


def test_loop_mismatch_becomes_residual_per_sector():
    # microwaves on both 0 <-> +/-1 plus a Lambda close a loop; a mismatch in the
    # microwave frequencies must surface as one residual per m_n sector
    p = NvParams()
    basis = build_basis()
    fields = [optical(GS_MINUS, A2, 1.0), optical(GS_PLUS, A2, 1.0),
              microwave(1, 1.0, 0.7), microwave(-1, 1.0)]
    frame = assign_frame(basis, fields, p)
    mismatches = sorted(abs(r[3]) for r in frame.residuals)
    assert len(mismatches) == 3
    assert mismatches == pytest.approx([0.7] * 3)
    ham = build_hamiltonian(basis, p, fields, frame)
    assert ham.time_dependent
    for t in (0.0, 0.13, 1.7):
        Ht = ham.at(t)
        assert np.allclose(Ht, Ht.conj().T)


def test_consistent_loop_is_static():
    p = NvParams()
    basis = build_basis()
    # microwave frequencies matching the optical difference close the loop exactly
    fields = [optical(GS_MINUS, A2, 1.0), optical(GS_PLUS, A2, 1.0),
              microwave(1, 1.0, 0.4), microwave(-1, 1.0, 0.4)]
    assert not build_hamiltonian(basis, p, fields).time_dependent


drive = st.builds(
    lambda kind, rabi, det, ph, s: (optical(GS_MINUS if s < 0 else GS_PLUS, A2, rabi, det, ph)
                                    if kind else microwave(s, rabi, det, ph)),
    st.booleans(), st.floats(0, 20), st.floats(-30, 30), st.floats(0, 6.3), st.sampled_from([-1, 1]))


@settings(max_examples=60, deadline=None)
@given(fields=st.lists(drive, max_size=4), t=st.floats(0, 5))
def test_hamiltonian_always_hermitian(fields, t):
    ham = build_hamiltonian(build_basis(), NvParams(), fields)
    H = ham.at(t)
    assert np.allclose(H, H.conj().T, atol=1e-9)


def test_hermiticity_error_class_exists():
    assert issubclass(HermiticityError, RuntimeError)


def test_collapse_channels_and_rates():
    p = NvParams(gamma_rad=13, leak_branch=0.02, ground_dephase=0.1)
    basis = build_basis()
    terms = build_collapse(basis, p)
    # per sector: A2 -> +1, A2 -> -1, A2 -> 0; plus one dephasing operator
    assert len(terms) == 3 * 3 + 1
    out_of_a2 = sum(t.rate for t in terms if "A2" in t.label and "m_n=+0" in t.label)
    assert out_of_a2 == pytest.approx(13)
    basis_s = build_basis(ey=True, singlet=True)
    labels = [t.label for t in build_collapse(basis_s, p)]
    assert sum("singlet->0" in l for l in labels) == 3
    assert sum("A2->singlet" in l for l in labels) == 3
    assert sum("Ey->0" in l for l in labels) == 3


def test_zero_rate_channels_omitted():
    terms = build_collapse(build_basis(), NvParams(leak_branch=0, ground_dephase=0))
    assert len(terms) == 6 and all(t.rate > 0 for t in terms)


def test_radiative_weights():
    p = NvParams(gamma_rad=10, leak_branch=0.1)
    basis = build_basis(ey=True)
    w = radiative_weights(basis, p)
    assert w[basis.index(A2.at(0))] == pytest.approx(9)
    assert w[basis.index(EY.at(1))] == pytest.approx(10)
    assert w[basis.index(GS_ZERO.at(0))] == 0
    assert set(basis.manifold_indices(Manifold.GROUND)) == set(np.flatnonzero(w == 0))
