"""Negative gradient (Q1, Q2) of the energy on invariant data.

Q1 is the symmetric matrix in the invariant-metric space with

    tr(Q1 g^{-1} S g^{-1}) = -det(A) * dE[horizontal lift of S]

for every invariant direction S, and Q2 is the spinor in the invariant
real-orthogonal complement of phi with <Q2, psi> = -det(A) * dE[psi].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clifford import SpinorModule, re_herm
from .energy import FlowState, energy_at, energy_derivative, spinor_quadratic_form
from .homspace import HomSpace, MetricFrame, invariant_metric_basis, invariant_spinor_basis

SLICE_TOL = 1e-8
FD_REL_STEP = 1e-6


@dataclass(frozen=True)
class GradientValue:
    Q1: np.ndarray
    Q2: np.ndarray


def horizontal_velocity(A, gdot) -> np.ndarray:
    """Frame velocity with A^{-1} Adot symmetric inducing metric velocity gdot."""
    A = np.asarray(A, dtype=float)
    return -0.5 * A @ A.T @ np.asarray(gdot, dtype=float) @ A


def metric_directional_derivatives(h, m, A, phi, basis, method="exact") -> np.ndarray:
    """dE along the horizontal lifts of each symmetric matrix in ``basis``."""
    Adots = np.array([horizontal_velocity(A, S) for S in basis])
    if method == "exact":
        return energy_derivative(h, m, A, phi, Adots)
    if method != "fd":
        raise ValueError(f"unknown derivative method {method!r}")
    out = np.empty(len(Adots))
    size = FD_REL_STEP * max(1.0, np.linalg.norm(A))
    for i, M in enumerate(Adots):
        eps = size / np.linalg.norm(M)
        out[i] = (energy_at(h, m, A + eps * M, phi) - energy_at(h, m, A - eps * M, phi)) / (2 * eps)
    return out


def _solve_metric_gradient(basis, g, rhs):
    gi = np.linalg.inv(g)
    W = [gi @ S @ gi for S in basis]
    gram = np.array([[np.sum(Si * Wj) for Wj in W] for Si in basis])
    coef = np.linalg.solve(gram, rhs)
    Q = np.einsum("k,kab->ab", coef, np.array(basis))
    return 0.5 * (Q + Q.T)


def q1_at(h: HomSpace, m: SpinorModule, A, phi, basis=None, method: str = "exact") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if basis is None:
        basis = invariant_metric_basis(h)
    g = MetricFrame(A=A).g
    rhs = -np.linalg.det(A) * metric_directional_derivatives(h, m, A, phi, basis, method)
    return _solve_metric_gradient(basis, g, rhs)


def q1(h: HomSpace, m: SpinorModule, s: FlowState, method: str = "exact") -> np.ndarray:
    return q1_at(h, m, s.A, s.phi, method=method)


def q2_at(h: HomSpace, m: SpinorModule, A, phi, spinor_basis=None) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    phi = np.asarray(phi, dtype=complex)
    if spinor_basis is None:
        spinor_basis = invariant_spinor_basis(h, m)
    U = np.array(spinor_basis).T
    grad = 2.0 * spinor_quadratic_form(h, m, A) @ phi
    # project onto the invariant subspace, then off phi in the real sense
    grad = U @ (U.conj().T @ grad)
    grad = grad - re_herm(phi, grad) / re_herm(phi, phi) * phi
    return -np.linalg.det(A) * grad


def q2(h: HomSpace, m: SpinorModule, s: FlowState) -> np.ndarray:
    return q2_at(h, m, s.A, s.phi)


def normalization_term(h, m, A, phi) -> np.ndarray:
    """(n-2)/(2n) det(A) E g; det(A) = 1 on the unit-volume slice.

    The det(A) factor makes the normalised vector field scale invariant so it
    remains defined (and tangent to det g = const) off the slice.
    """
    A = np.asarray(A, dtype=float)
    fr = MetricFrame(A=A)
    return (h.n - 2) / (2.0 * h.n) * fr.det_A * energy_at(h, m, A, phi) * fr.g


def q_tilde(h: HomSpace, m: SpinorModule, s: FlowState, strict: bool = True, method: str = "exact") -> GradientValue:
    A = s.A
    if strict and abs(np.linalg.det(A) - 1.0) > SLICE_TOL:
        raise ValueError(f"state is off the unit-volume slice (det A = {np.linalg.det(A):.12g})")
    Q1 = q1_at(h, m, A, s.phi, method=method) + normalization_term(h, m, A, s.phi)
    return GradientValue(Q1=Q1, Q2=q2_at(h, m, A, s.phi))


def gradient(h: HomSpace, m: SpinorModule, s: FlowState, normalized: bool = False, method: str = "exact") -> GradientValue:
    if normalized:
        return q_tilde(h, m, s, strict=False, method=method)
    return GradientValue(Q1=q1(h, m, s, method=method), Q2=q2(h, m, s))


def metric_pairing(g, det_A, Q, gdot) -> float:
    """((Q, gdot))_g = tr(Q g^{-1} gdot g^{-1}) / det(A)."""
    gi = np.linalg.inv(g)
    return float(np.trace(Q @ gi @ gdot @ gi) / det_A)
