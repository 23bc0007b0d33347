import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from spinflow.clifford import (
    build_spinor_module,
    clifford_mul,
    complex_volume,
    herm,
    re_herm,
    spin_lift,
)
from spinflow.homspace import FLAG_ISOTROPY, FLAG_PHI1, FLAG_PHI2

E = np.eye(2, dtype=complex)
T = np.array([[0, -1j], [1j, 0]])
G1 = np.array([[1j, 0], [0, -1j]])
G2 = np.array([[0, 1j], [1j, 0]])


def tensor3(a, b, c):
    # e_i (x) e_j (x) e_k  <->  e_{1 + i + 2j + 4k}: first factor is the lowest bit
    return np.kron(c, np.kron(b, a))


@pytest.mark.parametrize("n", range(3, 9))
def test_module_invariants(n):
    m = build_spinor_module(n)
    assert m.dim == 2 ** (n // 2)
    eye = np.eye(m.dim)
    for i in range(n):
        gi = m.gammas[i]
        assert np.allclose(gi.conj().T, -gi, atol=1e-12)
        assert np.allclose(gi.conj().T @ gi, eye, atol=1e-12)
        for j in range(n):
            ac = gi @ m.gammas[j] + m.gammas[j] @ gi
            assert np.abs(ac + 2.0 * (i == j) * eye).max() <= 1e-12


def test_n6_matches_tensor_construction():
    m = build_spinor_module(6)
    expected = [
        tensor3(G1, T, T),
        tensor3(G2, T, T),
        tensor3(E, G1, T),
        tensor3(E, G2, T),
        tensor3(E, E, G1),
        tensor3(E, E, G2),
    ]
    for got, want in zip(m.gammas, expected):
        assert np.array_equal(got, want)
    assert np.allclose(m.gammas[0] @ m.gammas[0], -np.eye(8))


def test_n3_triple_product_is_a_real_sign():
    # with v.v = -|v|^2 the product squares to +Id and is central, hence +-Id
    m = build_spinor_module(3)
    P = m.gammas[0] @ m.gammas[1] @ m.gammas[2]
    assert np.allclose(P @ P, np.eye(2))
    assert np.allclose(P, np.eye(2)) or np.allclose(P, -np.eye(2))


@pytest.mark.parametrize("n", [2, 9, 0])
def test_unsupported_dimension(n):
    with pytest.raises(ValueError):
        build_spinor_module(n)


def test_clifford_mul_basics(rng):
    m = build_spinor_module(5)
    phi = rng.normal(size=m.dim) + 1j * rng.normal(size=m.dim)
    assert np.allclose(clifford_mul(m, np.zeros(5), phi), 0)
    for i in range(5):
        e = np.eye(5)[i]
        assert np.allclose(clifford_mul(m, e, clifford_mul(m, e, phi)), -phi)
    with pytest.raises(ValueError):
        clifford_mul(m, np.zeros(5), np.zeros(3))
    with pytest.raises(ValueError):
        clifford_mul(m, np.zeros(4), phi)


def test_clifford_mul_n6_e1_phi1():
    m = build_spinor_module(6)
    want = tensor3(G1, T, T) @ FLAG_PHI1
    assert np.allclose(clifford_mul(m, np.eye(6)[0], FLAG_PHI1), want)
    # g1 (x) T (x) T on phi_1, worked out by hand on the basis labels
    assert np.allclose(want, 0.5j * np.array([1, 0, 0, 1, 0, 1, -1, 0]))


@given(st.integers(3, 8), st.integers(0, 2**32 - 1))
def test_spin_lift_equivariance(n, seed):
    r = np.random.default_rng(seed)
    m = build_spinor_module(n)
    W = r.normal(size=(n, n))
    W = W - W.T
    L = spin_lift(m, W)
    v = r.normal(size=n)
    assert np.abs(L @ m.gamma(v) - m.gamma(v) @ L - m.gamma(W @ v)).max() <= 1e-10


def test_spin_lift_zero_and_errors():
    m = build_spinor_module(4)
    assert np.allclose(spin_lift(m, np.zeros((4, 4))), 0)
    with pytest.raises(ValueError):
        spin_lift(m, np.eye(4))


def test_flag_isotropy_lift_annihilates_phis():
    m = build_spinor_module(6)
    for a in FLAG_ISOTROPY:
        L = spin_lift(m, a)
        assert np.abs(L @ FLAG_PHI1).max() <= 1e-12
        assert np.abs(L @ FLAG_PHI2).max() <= 1e-12


@pytest.mark.parametrize("n", [4, 6, 8])
def test_complex_volume_squares_to_identity(n):
    w = complex_volume(build_spinor_module(n))
    assert np.allclose(w @ w, np.eye(w.shape[0]), atol=1e-12)


def test_complex_volume_odd_unsupported():
    with pytest.raises(ValueError):
        complex_volume(build_spinor_module(5))


def test_complex_volume_commutes_with_isotropy():
    m = build_spinor_module(6)
    w = complex_volume(m)
    for a in FLAG_ISOTROPY:
        L = spin_lift(m, a)
        assert np.abs(w @ L - L @ w).max() <= 1e-12


def test_complex_volume_maps_phi1_to_phi2_up_to_phase():
    # omega_C phi_1 is a unit multiple of phi_2 (the multiple is i here)
    w = complex_volume(build_spinor_module(6))
    z = herm(FLAG_PHI2, w @ FLAG_PHI1)
    assert abs(abs(z) - 1.0) <= 1e-12
    assert np.allclose(w @ FLAG_PHI1, z * FLAG_PHI2)


def test_herm_on_flag_spinors():
    assert herm(FLAG_PHI1, FLAG_PHI1) == pytest.approx(1.0)
    assert herm(FLAG_PHI2, FLAG_PHI2) == pytest.approx(1.0)
    assert abs(herm(FLAG_PHI1, FLAG_PHI2)) <= 1e-15


@given(arrays(np.float64, 8, elements=st.floats(-1, 1)), st.integers(0, 5))
def test_re_herm_gamma_orthogonal(x, i):
    m = build_spinor_module(6)
    a = x[:8] + 0j
    if np.linalg.norm(a) < 1e-3:
        return
    a = a / np.linalg.norm(a) * np.exp(0.3j)
    assert abs(re_herm(a, m.gammas[i] @ a)) <= 1e-12


def test_n3_pair_product_orthogonality(rng):
    m = build_spinor_module(3)
    pairs = [(0, 1), (0, 2), (1, 2)]
    for _ in range(20):
        phi = rng.normal(size=2) + 1j * rng.normal(size=2)
        phi /= np.linalg.norm(phi)
        for p, q in pairs:
            for r_, s in pairs:
                if (p, q) != (r_, s) and set((p, q)) & set((r_, s)):
                    x = m.gammas[p] @ m.gammas[q] @ phi
                    y = m.gammas[r_] @ m.gammas[s] @ phi
                    assert abs(re_herm(x, y)) <= 1e-12
