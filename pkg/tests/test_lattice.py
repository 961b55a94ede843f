import math

import numpy as np
import pytest

from skinflow.lattice import (
    ModelParams,
    bloch_energies,
    build_hamiltonian,
    classify_phase,
    dispersion_hermitian,
    gamma_for_skin_length,
    group_velocity,
    lieb_robinson_velocity,
    max_group_velocity,
    max_group_velocity_numeric,
    skin_profile,
    sublattice_of,
)


def test_hermitian_limit_matrix():
    h = build_hamiltonian(ModelParams(t1=1.0, t2=0.5, gamma=0.0, n_cells=2))
    assert h.shape == (4, 4)
    assert np.allclose(h, h.conj().T)
    assert h[0, 1] == 1.0 and h[1, 2] == 0.5 and h[2, 3] == 1.0
    assert np.count_nonzero(h) == 6


def test_nonreciprocal_matrix_elements():
    h = build_hamiltonian(ModelParams(t1=1.0, t2=0.5, gamma=0.3, n_cells=2))
    assert h[0, 1] == pytest.approx(1.3)
    assert h[1, 0] == pytest.approx(0.7)
    assert h[2, 1] == pytest.approx(0.5)
    assert h[1, 2] == pytest.approx(0.5)
    assert h[2, 3] == pytest.approx(1.3)
    assert h[3, 2] == pytest.approx(0.7)


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        ModelParams(t1=1.0, gamma=1.0)
    with pytest.raises(ValueError):
        ModelParams(gamma=1.5)
    with pytest.raises(ValueError):
        ModelParams(n_cells=1)
    with pytest.raises(ValueError):
        ModelParams(t2=-0.5)
    with pytest.raises(ValueError):
        ModelParams(boundary="periodic")


def test_hermitian_at_gamma_zero_large():
    h = build_hamiltonian(ModelParams(n_cells=21))
    assert np.array_equal(h, h.conj().T)


@pytest.mark.parametrize("gamma,r_ref,xi_ref,direction", [
    (0.2, 0.8165, 4.9326, "left"),
    (-0.2, 1.2247, 4.9326, "right"),
    (0.4, 0.6547, 2.3604, "left"),
    (-0.4, 1.5275, 2.3604, "right"),
])
def test_skin_profile_values(gamma, r_ref, xi_ref, direction):
    prof = skin_profile(ModelParams(gamma=gamma))
    assert prof.r == pytest.approx(r_ref, abs=1e-4)
    assert prof.xi == pytest.approx(xi_ref, abs=1e-4)
    assert prof.direction == direction


def test_skin_profile_hermitian_limit():
    prof = skin_profile(ModelParams(gamma=0.0))
    assert prof.r == 1.0
    assert math.isinf(prof.xi)
    assert prof.direction == "none"
    assert prof.ipr_th == pytest.approx(1.0 / 21)


@pytest.mark.parametrize("gamma", [0.1, 0.25, 0.5, 0.8])
def test_skin_parameter_mirror(gamma):
    pos = skin_profile(ModelParams(gamma=gamma))
    neg = skin_profile(ModelParams(gamma=-gamma))
    assert pos.r * neg.r == pytest.approx(1.0, abs=1e-14)
    assert pos.xi == pytest.approx(neg.xi, rel=1e-12)


def test_reflection_realizes_sublattice_exchange():
    # mirror about the chain center swaps the sublattices and flips gamma
    for gamma in (0.3, -0.45):
        h = build_hamiltonian(ModelParams(gamma=gamma, n_cells=8))
        mirrored = h[::-1, ::-1]
        expected = build_hamiltonian(ModelParams(gamma=-gamma, n_cells=8))
        assert np.array_equal(mirrored, expected)


def test_dispersion_values():
    p = ModelParams()
    assert dispersion_hermitian(math.pi, p) == pytest.approx(0.5, abs=1e-12)
    assert dispersion_hermitian(0.0, p) == pytest.approx(1.5, abs=1e-12)
    crit = ModelParams(t1=1.0, t2=1.0)
    assert dispersion_hermitian(math.pi, crit) == pytest.approx(0.0, abs=1e-7)


def test_bloch_energies_values():
    plus, minus = bloch_energies(math.pi, ModelParams(gamma=0.3))
    assert plus == pytest.approx(0.4, abs=1e-12)
    assert minus == pytest.approx(-0.4, abs=1e-12)


def test_bloch_energies_hermitian_reduction():
    p = ModelParams(gamma=0.0)
    for k in np.linspace(-math.pi, math.pi, 101):
        plus, _minus = bloch_energies(k, p)
        assert abs(plus.imag) < 1e-12
        assert plus.real == pytest.approx(dispersion_hermitian(k, p), abs=1e-12)


def test_bloch_energies_match_two_band_matrix():
    # oracle: eigenvalues of the explicit 2x2 momentum-space matrix
    p = ModelParams(gamma=0.2)
    for k in (math.pi / 2, 0.3, -1.1):
        dx = p.t1 + p.t2 * math.cos(k)
        dy = complex(p.t2 * math.sin(k), p.gamma)
        hk = np.array([[0.0, dx - 1j * dy], [dx + 1j * dy, 0.0]])
        ev = sorted(np.linalg.eigvals(hk), key=lambda z: (z.real, z.imag))
        plus, minus = bloch_energies(k, p)
        got = sorted([plus, minus], key=lambda z: (z.real, z.imag))
        assert np.allclose(got, ev, atol=1e-12)


@pytest.mark.parametrize("t2,v_ref", [(0.6, 0.6), (0.8, 0.8), (1.0, 1.0), (1.2, 1.0), (1.4, 1.0)])
def test_max_group_velocity_formula_vs_grid(t2, v_ref):
    p = ModelParams(t1=1.0, t2=t2)
    assert max_group_velocity(p) == pytest.approx(v_ref, abs=1e-12)
    assert max_group_velocity_numeric(p) == pytest.approx(min(1.0, t2), abs=1e-6)


def test_group_velocity_shape_and_sign():
    p = ModelParams()
    k = np.linspace(-math.pi, math.pi, 11)
    v = group_velocity(k, p)
    assert v.shape == k.shape
    assert group_velocity(0.5, p) < 0  # band decreasing toward k = pi


def test_lieb_robinson_velocity():
    assert lieb_robinson_velocity(ModelParams(t1=1.0, t2=0.5)) == 2.0
    assert lieb_robinson_velocity(ModelParams(t1=1.0, t2=1.0)) == 2.0
    assert lieb_robinson_velocity(ModelParams(t1=1.0, t2=1.4)) == pytest.approx(2.8)


@pytest.mark.parametrize("t2,label", [(0.6, "topological"), (1.2, "trivial"), (1.0, "critical")])
def test_classify_phase(t2, label):
    info = classify_phase(ModelParams(t1=1.0, t2=t2))
    assert info.phase_label == label
    assert info.gap == pytest.approx(2.0 * abs(1.0 - t2))
    assert info.v_lr >= info.v_max


def test_sublattice_of():
    assert sublattice_of(20, 42) == "alpha"
    assert sublattice_of(0) == "alpha"
    assert sublattice_of(21) == "beta"
    with pytest.raises(ValueError):
        sublattice_of(42, 42)
    with pytest.raises(ValueError):
        sublattice_of(-1)


@pytest.mark.parametrize("xi", [0.5, 1.0, 3.3, 10.0, 250.0])
@pytest.mark.parametrize("sign", [+1, -1])
def test_gamma_for_skin_length_roundtrip(xi, sign):
    gamma = gamma_for_skin_length(xi, sign=sign)
    assert math.copysign(1, gamma) == sign
    prof = skin_profile(ModelParams(gamma=gamma))
    assert prof.xi == pytest.approx(xi, abs=1e-9)


def test_gamma_for_skin_length_invalid():
    with pytest.raises(ValueError):
        gamma_for_skin_length(0.0)
    with pytest.raises(ValueError):
        gamma_for_skin_length(2.0, sign=0)
