"""Spinorial energy of invariant universal spinor fields.

The general formula works at a frame A (g = A^{-T} A^{-1}) and a spinor phi
expressed in that frame:

    E = 1/(32 det A) * sum_i | sum_{j<k} c_ijk(A) gamma_j gamma_k phi |^2

The closed forms below are independent evaluation routes used as oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .clifford import SpinorModule
from .homspace import HomSpace, MetricFrame, frame_of


@dataclass(frozen=True)
class FlowState:
    """Invariant metric plus unit spinor, with the frame the spinor refers to.

    If ``frame`` is omitted the principal frame of ``g`` is used.
    """

    g: np.ndarray
    phi: np.ndarray
    frame: Optional[MetricFrame] = None

    @property
    def A(self) -> np.ndarray:
        return (self.frame or frame_of(self.g)).A

    @classmethod
    def from_frame(cls, A, phi) -> "FlowState":
        fr = MetricFrame(A=np.asarray(A, dtype=float))
        return cls(g=fr.g, phi=np.asarray(phi, dtype=complex), frame=fr)


def _bracket_tensor(bracket, A):
    # G[i, j, r] = r-th coordinate of [A X_i, A X_j]
    return np.einsum("pi,qj,pqr->ijr", A, A, bracket, optimize=True)


def _c_from_C(C):
    # c_ijk = C[i,k,j] + C[j,k,i] - C[i,j,k] with C[i,j,k] = gbar(A^{-1}[AX_i, AX_j], X_k)
    return np.einsum("ikj->ijk", C) + np.einsum("jki->ijk", C) - C


def c_coeffs(h: HomSpace, frame: MetricFrame) -> np.ndarray:
    A = frame.A
    C = _bracket_tensor(h.bracket, A) @ np.linalg.inv(A).T
    return _c_from_C(C)


def _check_state(h, m, A, phi):
    if m.n != h.n:
        raise ValueError(f"spinor module has n={m.n}, space has n={h.n}")
    if A.shape != (h.n, h.n):
        raise ValueError(f"frame must be {h.n}x{h.n}")
    if phi.shape != (m.dim,):
        raise ValueError(f"spinor must have length {m.dim}")


def energy_at(h: HomSpace, m: SpinorModule, A, phi) -> float:
    A = np.asarray(A, dtype=float)
    phi = np.asarray(phi, dtype=complex)
    _check_state(h, m, A, phi)
    c = c_coeffs(h, MetricFrame(A=A))
    j, k = m.pairs
    V = c[:, j, k] @ (m.pair_products @ phi)
    return float(np.sum(np.abs(V) ** 2).real / (32.0 * np.linalg.det(A)))


def energy_general(h: HomSpace, m: SpinorModule, s: FlowState) -> float:
    return energy_at(h, m, s.A, s.phi)


def energy_derivative(h: HomSpace, m: SpinorModule, A, phi, Adots, phidots=None) -> np.ndarray:
    """Exact directional derivatives of the energy along (Adot, phidot) pairs.

    ``Adots`` has shape (k, n, n); returns an array of k derivatives.
    """
    A = np.asarray(A, dtype=float)
    phi = np.asarray(phi, dtype=complex)
    M = np.asarray(Adots, dtype=float).reshape(-1, h.n, h.n)
    Ai = np.linalg.inv(A)
    detA = np.linalg.det(A)
    G = _bracket_tensor(h.bracket, A)
    C = G @ Ai.T
    dG = np.einsum("mpi,qj,pqr->mijr", M, A, h.bracket, optimize=True)
    dG = dG + np.einsum("pi,mqj,pqr->mijr", A, M, h.bracket, optimize=True)
    dAi = -np.einsum("ab,mbc,cd->mad", Ai, M, Ai)
    dC = dG @ Ai.T + np.einsum("ijr,mkr->mijk", G, dAi)
    j, k = m.pairs
    P = m.pair_products @ phi
    V = _c_from_C(C)[:, j, k] @ P
    dc = np.einsum("mikj->mijk", dC) + np.einsum("mjki->mijk", dC) - dC
    dV = dc[:, :, j, k] @ P
    if phidots is not None:
        dphi = np.asarray(phidots, dtype=complex).reshape(len(M), -1)
        dV = dV + np.einsum("ip,pab,mb->mia", _c_from_C(C)[:, j, k], m.pair_products, dphi)
    S = np.sum(np.abs(V) ** 2)
    dS = 2.0 * np.real(np.einsum("ia,mia->m", V.conj(), dV))
    dtr = np.einsum("ab,mba->m", Ai, M)
    return (dS - S * dtr) / (32.0 * detA)


def spinor_quadratic_form(h: HomSpace, m: SpinorModule, A) -> np.ndarray:
    """Hermitian Q with E(A, phi) = <phi, Q phi> for every spinor phi."""
    A = np.asarray(A, dtype=float)
    c = c_coeffs(h, MetricFrame(A=A))
    j, k = m.pairs
    Ms = np.einsum("ip,pab->iab", c[:, j, k], m.pair_products)
    Q = np.einsum("iba,ibc->ac", Ms.conj(), Ms)
    return Q / (32.0 * np.linalg.det(A))


def energy_3d(h: HomSpace, frame: MetricFrame) -> float:
    """Spinor-independent energy in dimension three (sum of squared c_ijk, j<k)."""
    if h.n != 3:
        raise ValueError(f"energy_3d needs a 3-dimensional space, got n={h.n}")
    c = c_coeffs(h, frame)
    s = sum(c[i, 0, 1] ** 2 + c[i, 0, 2] ** 2 + c[i, 1, 2] ** 2 for i in range(3))
    return float(s / (32.0 * frame.det_A))


def energy_bianchi(eps, frame: MetricFrame) -> float:
    """Bianchi energy from b = A^{-1} D A^{-T}, valid for any frame.

    With the c-values c_{i,i+1,i+2} = det A (b_ii - b_{i+1,i+1} - b_{i+2,i+2}),
    c_{i,i,i+1} = 2 det A b_{i+2,i}, c_{i,i,i+2} = -2 det A b_{i+1,i}.
    """
    D = np.diag(np.asarray(eps, dtype=float))
    Ai = frame.Ainv
    b = Ai @ D @ Ai.T
    d = np.diag(b)
    off = np.sum(b**2) - np.sum(d**2)
    diag = 3.0 * np.sum(d**2) - 2.0 * (d[0] * d[1] + d[0] * d[2] + d[1] * d[2])
    return float(frame.det_A * (4.0 * off + diag) / 32.0)


def almost_abelian_applicable(F, tol: float = 1e-12) -> bool:
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.shape[0] <= 3:
        return True
    lam = np.trace(F) / F.shape[0]
    return bool(np.abs(F - lam * np.eye(F.shape[0])).max() <= tol * max(1.0, abs(lam)))


def _aa_trace_term(H, F):
    # 3 tr(H F H^{-1} F^T) + tr(F^2)
    return 3.0 * np.trace(H @ F @ np.linalg.solve(H, F.T)) + np.trace(F @ F)


def energy_almost_abelian(H, hnn: float, F) -> float:
    H = np.atleast_2d(np.asarray(H, dtype=float))
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if not almost_abelian_applicable(F):
        raise ValueError("closed form needs dim <= 4 or F = lambda * Id")
    if hnn <= 0:
        raise ValueError("h must be positive")
    return float(np.sqrt(np.linalg.det(H)) / (32.0 * np.sqrt(hnn)) * _aa_trace_term(H, F))


def energy_flag(a1: float, a2: float, a3: float) -> float:
    return 3.0 / 16.0 * (a1 * a1 + a2 * a2 + a3 * a3) - (a2 * a3 + a1 * a2 + a1 * a3) / 8.0


def energy_flag_restricted(u: float, v: float) -> float:
    """Flag energy on the unit-volume slice a = (u, v, 1/(uv))."""
    return 3.0 / 16.0 * (u * u + v * v + 1.0 / (u * u * v * v)) - (u * v + 1.0 / u + 1.0 / v) / 8.0
