import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spinflow.clifford import build_spinor_module, spin_lift
from spinflow.homspace import (
    FLAG_ALPHAS,
    FLAG_H,
    FLAG_ISOTROPY,
    FLAG_P,
    FLAG_PHI1,
    FLAG_PHI2,
    HomSpace,
    coeffs_of_metric,
    flag_isotropy_from_su3,
    flag_structure_constants,
    frame_of,
    invariant_metric_basis,
    invariant_spinor_basis,
    is_invariant_metric,
    metric_from_coeffs,
    preset_almost_abelian,
    preset_bianchi,
    preset_flag,
)

ALL_EPS = list(itertools.product((-1, 0, 1), repeat=3))


def jacobi_defect(bracket):
    # sum over cyclic [[x_i, x_j], x_k]
    J = np.einsum("ijm,mkl->ijkl", bracket, bracket)
    return np.abs(J + J.transpose(1, 2, 0, 3) + J.transpose(2, 0, 1, 3)).max()


def test_bianchi_bracket_is_scaled_cross_product(rng):
    for eps in ALL_EPS:
        h = preset_bianchi(eps)
        x, y = rng.normal(size=3), rng.normal(size=3)
        assert np.allclose(h.lie(x, y), np.array(eps) * np.cross(x, y))
        assert h.isotropy == ()
        assert jacobi_defect(h.bracket) <= 1e-14


def test_bianchi_labels():
    assert preset_bianchi((1, 1, 1)).label == "su(2)"
    assert preset_bianchi((1, 0, 0)).label == "h3"
    assert np.all(preset_bianchi((0, 0, 0)).bracket == 0)


@pytest.mark.parametrize("bad", [(2, 0, 0), (1, 1), (0.5, 0, 0)])
def test_bianchi_rejects_bad_parameters(bad):
    with pytest.raises(ValueError):
        preset_bianchi(bad)


def test_almost_abelian_brackets(rng):
    h = preset_almost_abelian(np.eye(3))
    for i in range(3):
        assert np.allclose(h.lie(np.eye(4)[3], np.eye(4)[i]), np.eye(4)[i])
    F = rng.normal(size=(3, 3))
    h = preset_almost_abelian(F)
    for i in range(3):
        assert np.allclose(h.lie(np.eye(4)[3], np.eye(4)[i])[:3], F[:, i])
        for j in range(3):
            assert np.allclose(h.lie(np.eye(4)[i], np.eye(4)[j]), 0)
    assert jacobi_defect(h.bracket) <= 1e-12
    assert np.all(preset_almost_abelian(np.zeros((2, 2))).bracket == 0)


def test_almost_abelian_nilpotent_is_heisenberg():
    h = preset_almost_abelian([[0, 0], [1, 0]])
    # new basis (Y1, Y2, Y3) = (X2, X3, X1) as columns of S
    S = np.eye(3)[:, [1, 2, 0]]
    moved = np.einsum("ai,bj,abc,kc->ijk", S, S, h.bracket, np.linalg.inv(S))
    assert np.allclose(moved, preset_bianchi((1, 0, 0)).bracket)


def test_homspace_validation():
    with pytest.raises(ValueError):
        HomSpace(n=3, bracket=np.zeros((3, 3)))
    b = np.zeros((3, 3, 3))
    b[0, 1, 2] = 1.0
    with pytest.raises(ValueError):
        HomSpace(n=3, bracket=b)
    with pytest.raises(ValueError):
        HomSpace(n=3, bracket=np.zeros((3, 3, 3)), isotropy=(np.eye(3),))


def test_flag_isotropy_printed_entries():
    a = FLAG_ISOTROPY[0]
    assert a[0, 1] == -1 and a[2, 3] == 2
    for a in FLAG_ISOTROPY:
        assert np.array_equal(a, -a.T)


def test_flag_isotropy_matches_matrix_commutators():
    for printed, computed in zip(FLAG_ISOTROPY, flag_isotropy_from_su3()):
        assert np.allclose(printed, computed)


def test_flag_bracket_from_commutator():
    # [R1, R2] projected off the Cartan part, by direct 3x3 algebra
    R1, R2 = FLAG_P[0], FLAG_P[1]
    C = R1 @ R2 - R2 @ R1
    H = np.array([np.concatenate([h.real.ravel(), h.imag.ravel()]) for h in FLAG_H]).T
    P = np.array([np.concatenate([r.real.ravel(), r.imag.ravel()]) for r in FLAG_P]).T
    coeffs = np.linalg.lstsq(np.hstack([P, H]), np.concatenate([C.real.ravel(), C.imag.ravel()]), rcond=None)[0]
    assert np.allclose(flag_structure_constants(1.0)[0, 1], coeffs[:6])


def test_flag_isotropy_acts_by_derivations():
    h = preset_flag()
    B = h.bracket
    for a in FLAG_ISOTROPY:
        # a[x, y] = [a x, y] + [x, a y]
        lhs = np.einsum("kl,ijl->ijk", a, B)
        rhs = np.einsum("li,ljk->ijk", a, B) + np.einsum("lj,ilk->ijk", a, B)
        assert np.abs(lhs - rhs).max() <= 1e-12


def test_flag_metric_basis_spans_alphas():
    h = preset_flag()
    basis = invariant_metric_basis(h)
    assert len(basis) == 3
    M = np.array(basis).reshape(3, -1).T
    for a in FLAG_ALPHAS:
        c = np.linalg.lstsq(M, a.ravel(), rcond=None)[0]
        assert np.abs(M @ c - a.ravel()).max() <= 1e-10
    rref = invariant_metric_basis(h, orthonormal=False)
    for S, a in zip(rref, FLAG_ALPHAS):
        assert np.allclose(S, a)


def test_metric_basis_invariance_and_orthonormality():
    for h in (preset_flag(), preset_bianchi((1, 1, 1)), preset_almost_abelian(np.eye(2))):
        basis = invariant_metric_basis(h)
        G = np.array([[np.sum(x * y) for y in basis] for x in basis])
        assert np.allclose(G, np.eye(len(basis)))
        for S in basis:
            assert np.allclose(S, S.T)
            for a in h.isotropy:
                assert np.abs(a.T @ S + S @ a).max() <= 1e-10


def test_trivial_isotropy_gives_full_sym():
    assert len(invariant_metric_basis(preset_bianchi((1, 1, 0)))) == 6
    assert len(invariant_metric_basis(preset_almost_abelian(np.eye(3)))) == 10


def test_rotation_in_plane_leaves_only_multiples_of_identity():
    h = HomSpace(n=2, bracket=np.zeros((2, 2, 2)), isotropy=(np.array([[0.0, -1.0], [1.0, 0.0]]),))
    basis = invariant_metric_basis(h)
    assert len(basis) == 1
    assert np.allclose(basis[0], np.eye(2) / np.sqrt(2)) or np.allclose(basis[0], -np.eye(2) / np.sqrt(2))


def test_flag_spinor_basis():
    h = preset_flag()
    m = build_spinor_module(6)
    sb = invariant_spinor_basis(h, m)
    assert len(sb) == 2
    U = np.array(sb).T
    assert np.allclose(U.conj().T @ U, np.eye(2))
    for p in (FLAG_PHI1, FLAG_PHI2):
        assert np.linalg.norm(p - U @ (U.conj().T @ p)) <= 1e-10
    for a in h.isotropy:
        assert np.abs(spin_lift(m, a) @ U).max() <= 1e-10


def test_trivial_isotropy_spinor_basis_is_standard():
    m = build_spinor_module(3)
    sb = invariant_spinor_basis(preset_bianchi((1, 1, 1)), m)
    assert len(sb) == 2
    assert np.allclose(np.array(sb), np.eye(2))
    with pytest.raises(ValueError):
        invariant_spinor_basis(preset_flag(), m)


def test_frame_of_examples():
    fr = frame_of(np.eye(3))
    assert np.allclose(fr.Ainv, np.eye(3)) and fr.det_A == pytest.approx(1.0)
    a = np.array([0.5, 2.0, 3.0])
    assert np.allclose(frame_of(np.diag(a)).Ainv, np.diag(np.sqrt(a)))
    with pytest.raises(ValueError):
        frame_of(np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError):
        frame_of(np.array([[1.0, 2.0], [0.0, 1.0]]))


@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_frame_of_reconstructs(n, seed):
    r = np.random.default_rng(seed)
    B = r.normal(size=(n, n))
    g = B @ B.T + 0.1 * np.eye(n)
    fr = frame_of(g)
    assert np.abs(fr.Ainv.T @ fr.Ainv - g).max() <= 1e-12 * max(1.0, np.abs(g).max())
    assert np.allclose(fr.g, g)
    assert np.allclose(fr.Ainv, fr.Ainv.T)


def test_flag_frame_is_invariant():
    h = preset_flag()
    g = metric_from_coeffs(h, (0.7, 1.3, 2.0))
    A = frame_of(g).A
    for a in h.isotropy:
        assert np.allclose(np.linalg.inv(A) @ a @ A, a)


def test_metric_coefficients_round_trip(rng):
    h = preset_flag()
    c = rng.uniform(0.5, 2.0, size=3)
    g = metric_from_coeffs(h, c)
    assert is_invariant_metric(h, g)
    assert np.allclose(g, sum(ci * a for ci, a in zip(c, FLAG_ALPHAS)))
    assert np.allclose(coeffs_of_metric(h, g), c)
    hb = preset_bianchi((1, 1, 1))
    assert np.allclose(metric_from_coeffs(hb, (1.0, 2.0, 3.0)), np.diag([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        metric_from_coeffs(h, (1.0, 2.0))
    assert not is_invariant_metric(h, np.diag(np.arange(1.0, 7.0)))
