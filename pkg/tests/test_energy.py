import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import block_metric, random_frame, random_spd, unit_spinor
from spinflow.clifford import build_spinor_module
from spinflow.energy import (
    FlowState,
    c_coeffs,
    energy_3d,
    energy_almost_abelian,
    energy_at,
    energy_bianchi,
    energy_derivative,
    energy_flag,
    energy_flag_restricted,
    energy_general,
    spinor_quadratic_form,
)
from spinflow.homspace import (
    FLAG_PHI1,
    FLAG_PHI2,
    MetricFrame,
    frame_of,
    invariant_spinor_basis,
    metric_from_coeffs,
    preset_almost_abelian,
    preset_bianchi,
    preset_flag,
)

M3 = build_spinor_module(3)
M4 = build_spinor_module(4)
M6 = build_spinor_module(6)
ALL_EPS = list(itertools.product((-1, 0, 1), repeat=3))


def test_abelian_energy_vanishes(rng):
    h = preset_bianchi((0, 0, 0))
    for _ in range(5):
        A = random_frame(rng, 3)
        assert energy_at(h, M3, A, unit_spinor(rng, np.eye(2))) == 0.0
        assert np.all(c_coeffs(h, MetricFrame(A=A)) == 0)
    assert energy_3d(h, frame_of(np.eye(3))) == 0.0


@given(st.sampled_from(ALL_EPS), st.integers(0, 2**32 - 1))
def test_c_antisymmetric_in_last_pair(eps, seed):
    r = np.random.default_rng(seed)
    c = c_coeffs(preset_bianchi(eps), MetricFrame(A=random_frame(r, 3)))
    assert np.abs(c + c.transpose(0, 2, 1)).max() <= 1e-14 * max(1.0, np.abs(c).max())


def test_bianchi_c_values(rng):
    for eps in ALL_EPS:
        A = random_frame(rng, 3)
        Ai = np.linalg.inv(A)
        b = Ai @ np.diag(eps) @ Ai.T
        c = c_coeffs(preset_bianchi(eps), MetricFrame(A=A))
        d = np.linalg.det(A)
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            assert c[i, j, k] == pytest.approx(d * (b[i, i] - b[j, j] - b[k, k]), abs=1e-12)
            assert c[i, i, j] == pytest.approx(2 * d * b[k, i], abs=1e-12)
            assert c[i, i, k] == pytest.approx(-2 * d * b[j, i], abs=1e-12)


def test_almost_abelian_c_values(rng):
    F = rng.normal(size=(3, 3))
    B = random_frame(rng, 3)
    b = 1.7
    A = np.zeros((4, 4))
    A[:3, :3] = np.linalg.inv(B)
    A[3, 3] = 1 / b
    c = c_coeffs(preset_almost_abelian(F), MetricFrame(A=A))
    D = B @ F @ np.linalg.inv(B)
    assert np.allclose(c[:3, :3, 3], -(D + D.T) / b)
    # c_nij = g0(B[X_n/b, B^-1 X_j], X_i) - g0(B[X_n/b, B^-1 X_i], X_j) = (D_ij - D_ji)/b
    assert np.allclose(c[3, :3, :3], (D - D.T) / b)


def test_energy_3d_round_metric():
    # g = a Id: b = a Id, det A = a^{-3/2}, so E = a^{-3/2} (9 - 6) a^2 / 32
    for a in (0.25, 1.0, 4.0):
        fr = frame_of(a * np.eye(3))
        assert energy_3d(preset_bianchi((1, 1, 1)), fr) == pytest.approx(3 * np.sqrt(a) / 32, rel=1e-14)


def test_energy_3d_needs_three_dimensions():
    with pytest.raises(ValueError):
        energy_3d(preset_flag(), frame_of(np.eye(6)))


def test_three_dimensional_paths_agree(rng):
    for eps in ALL_EPS:
        h = preset_bianchi(eps)
        for k in range(100 // len(ALL_EPS) + 1):
            A = np.diag(rng.uniform(0.3, 3.0, size=3)) if k % 2 else random_frame(rng, 3)
            fr = MetricFrame(A=A)
            e = energy_at(h, M3, A, unit_spinor(rng, np.eye(2)))
            assert energy_3d(h, fr) == pytest.approx(e, rel=1e-12, abs=1e-15)
            assert energy_bianchi(eps, fr) == pytest.approx(e, rel=1e-12, abs=1e-15)


def test_su2_identity_any_spinor(rng):
    h = preset_bianchi((1, 1, 1))
    s = FlowState(np.eye(3), unit_spinor(rng, np.eye(2)))
    assert energy_general(h, M3, s) == pytest.approx(energy_3d(h, frame_of(np.eye(3))), rel=1e-14)


def test_almost_abelian_identity_H(rng):
    for _ in range(5):
        F = rng.normal(size=(3, 3))
        want = (3 * np.sum(F**2) + np.trace(F @ F)) / 32
        assert energy_almost_abelian(np.eye(3), 1.0, F) == pytest.approx(want, rel=1e-14)
    assert energy_almost_abelian(np.eye(3), 2.0, np.zeros((3, 3))) == 0.0


def test_almost_abelian_cross_path(rng):
    for _ in range(20):
        F = rng.normal(size=(3, 3))
        H, hnn = random_spd(rng, 3), float(rng.uniform(0.3, 3.0))
        h = preset_almost_abelian(F)
        e = energy_at(h, M4, frame_of(block_metric(H, hnn)).A, unit_spinor(rng, invariant_spinor_basis(h, M4)))
        assert energy_almost_abelian(H, hnn, F) == pytest.approx(e, rel=1e-12)


def test_almost_abelian_scalar_F_in_dimension_five(rng):
    m5 = build_spinor_module(5)
    F = 0.7 * np.eye(4)
    h = preset_almost_abelian(F)
    H, hnn = random_spd(rng, 4), 1.3
    e = energy_at(h, m5, frame_of(block_metric(H, hnn)).A, unit_spinor(rng, invariant_spinor_basis(h, m5)))
    assert energy_almost_abelian(H, hnn, F) == pytest.approx(e, rel=1e-12)


def test_almost_abelian_preconditions():
    with pytest.raises(ValueError):
        energy_almost_abelian(np.eye(4), 1.0, np.diag([1.0, 2.0, 3.0, 4.0]))
    with pytest.raises(ValueError):
        energy_almost_abelian(np.eye(3), 0.0, np.eye(3))


def test_flag_polynomial_values():
    assert energy_flag(1, 1, 1) == pytest.approx(3 / 16)
    a = np.array([0.7, 1.1, 2.3])
    assert energy_flag(*(3.0 * a)) == pytest.approx(9.0 * energy_flag(*a))
    u, v = 0.8, 1.7
    assert energy_flag_restricted(u, v) == pytest.approx(energy_flag(u, v, 1 / (u * v)))


def test_flag_general_matches_polynomial(rng):
    h = preset_flag()
    sb = invariant_spinor_basis(h, M6)
    for _ in range(20):
        a = rng.uniform(0.3, 3.0, size=3)
        A = frame_of(metric_from_coeffs(h, a)).A
        for phi in (FLAG_PHI1, FLAG_PHI2, unit_spinor(rng, sb)):
            assert energy_at(h, M6, A, phi) == pytest.approx(energy_flag(*a), rel=1e-12)


def test_flag_other_scale_is_a_global_multiple(rng):
    h = preset_flag(scale=1.0)
    ratios = []
    for _ in range(10):
        a = rng.uniform(0.3, 3.0, size=3)
        ratios.append(energy_at(h, M6, frame_of(metric_from_coeffs(h, a)).A, FLAG_PHI1) / energy_flag(*a))
    assert np.ptp(ratios) <= 1e-12 * ratios[0]
    assert ratios[0] > 0


@pytest.mark.parametrize(
    "h",
    [preset_bianchi((1, -1, 1)), preset_almost_abelian([[0.3, 1.0], [-0.5, 0.2]]), preset_flag()],
    ids=["bianchi", "aa3", "flag"],
)
def test_scaling_law(h, rng):
    m = build_spinor_module(h.n)
    phi = unit_spinor(rng, invariant_spinor_basis(h, m))
    g = metric_from_coeffs(h, (0.7, 1.2, 1.9)) if h.label == "flag" else random_spd(rng, h.n)
    for lam in (0.5, 2.0, 3.0):
        e0 = energy_at(h, m, frame_of(g).A, phi)
        e1 = energy_at(h, m, frame_of(lam**2 * g).A, phi)
        assert e1 == pytest.approx(lam ** (h.n - 2) * e0, rel=1e-12)


def test_energy_nonnegative_and_phase_invariant(rng):
    h = preset_almost_abelian(rng.normal(size=(4, 4)))
    m5 = build_spinor_module(5)
    for _ in range(10):
        A = random_frame(rng, 5)
        phi = unit_spinor(rng, np.eye(m5.dim))
        e = energy_at(h, m5, A, phi)
        assert e >= 0
        assert energy_at(h, m5, A, np.exp(1.1j) * phi) == pytest.approx(e, rel=1e-13)


def test_spinor_independence_n3_and_flag(rng):
    for eps in ALL_EPS:
        A = random_frame(rng, 3)
        h = preset_bianchi(eps)
        vals = [energy_at(h, M3, A, unit_spinor(rng, np.eye(2))) for _ in range(4)]
        assert np.ptp(vals) <= 1e-13 * max(1.0, max(vals))
    h = preset_flag()
    A = frame_of(metric_from_coeffs(h, (0.6, 1.0, 2.2))).A
    sb = invariant_spinor_basis(h, M6)
    vals = [energy_at(h, M6, A, unit_spinor(rng, sb)) for _ in range(4)]
    assert np.ptp(vals) <= 1e-13


def test_energy_depends_on_spinor_for_generic_five_dimensional_case(rng):
    m5 = build_spinor_module(5)
    h = preset_almost_abelian(rng.normal(size=(4, 4)))
    A = frame_of(random_spd(rng, 5)).A
    vals = [energy_at(h, m5, A, unit_spinor(rng, np.eye(m5.dim))) for _ in range(6)]
    assert np.ptp(vals) > 1e-3 * max(vals)


def test_quadratic_form(rng):
    h = preset_almost_abelian(rng.normal(size=(4, 4)))
    m5 = build_spinor_module(5)
    A = random_frame(rng, 5)
    Q = spinor_quadratic_form(h, m5, A)
    assert np.allclose(Q, Q.conj().T)
    phi = unit_spinor(rng, np.eye(m5.dim))
    assert np.vdot(phi, Q @ phi).real == pytest.approx(energy_at(h, m5, A, phi), rel=1e-13)


@given(st.sampled_from(["bianchi", "aa", "flag"]), st.integers(0, 2**32 - 1))
def test_directional_derivative_matches_finite_differences(kind, seed):
    r = np.random.default_rng(seed)
    if kind == "bianchi":
        h, m = preset_bianchi(tuple(r.integers(-1, 2, size=3))), M3
        A = random_frame(r, 3)
    elif kind == "aa":
        h, m = preset_almost_abelian(r.normal(size=(3, 3))), M4
        A = random_frame(r, 4)
    else:
        h, m = preset_flag(), M6
        A = frame_of(metric_from_coeffs(h, r.uniform(0.5, 2.0, size=3))).A
    sb = invariant_spinor_basis(h, m)
    phi = unit_spinor(r, sb)
    M = r.normal(size=A.shape)
    dphi = unit_spinor(r, sb)
    exact = energy_derivative(h, m, A, phi, M[None], dphi[None])[0]
    eps = 1e-6
    fd = (energy_at(h, m, A + eps * M, phi + eps * dphi) - energy_at(h, m, A - eps * M, phi - eps * dphi)) / (2 * eps)
    e0 = energy_at(h, m, A, phi)
    assert exact == pytest.approx(fd, rel=1e-6, abs=1e-8 * max(1.0, e0))


def test_state_validation():
    h = preset_bianchi((1, 1, 1))
    with pytest.raises(ValueError):
        energy_at(h, M4, np.eye(3), np.ones(4))
    with pytest.raises(ValueError):
        energy_at(h, M3, np.eye(3), np.ones(3))
