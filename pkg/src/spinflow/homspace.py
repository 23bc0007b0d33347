"""Reductive homogeneous spaces given by structure constants on p.

A ``HomSpace`` stores ``bracket[i, j, k]`` with ``[X_i, X_j]_p = sum_k
bracket[i, j, k] X_k`` in a fixed basis that is orthonormal for the background
metric, together with the linearised isotropy generators (skew matrices).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clifford import SpinorModule, spin_lift

NULL_RTOL = 1e-8

BIANCHI_NAMES = {
    (1, 1, 1): "su(2)",
    (-1, 1, 1): "sl(2,R)",
    (1, 1, 0): "e(2)",
    (1, -1, 0): "e(1,1)",
    (1, 0, 0): "h3",
    (0, 0, 0): "R^3",
}

# linearised isotropy of t^2 on p for SU(3)/T^2, basis E_1..E_6
FLAG_ISOTROPY = (
    np.array(
        [
            [0, -1, 0, 0, 0, 0],
            [1, 0, 0, 0, 0, 0],
            [0, 0, 0, 2, 0, 0],
            [0, 0, -2, 0, 0, 0],
            [0, 0, 0, 0, 0, -1],
            [0, 0, 0, 0, 1, 0],
        ],
        dtype=float,
    ),
    np.array(
        [
            [0, -2, 0, 0, 0, 0],
            [2, 0, 0, 0, 0, 0],
            [0, 0, 0, 1, 0, 0],
            [0, 0, -1, 0, 0, 0],
            [0, 0, 0, 0, 0, 1],
            [0, 0, 0, 0, -1, 0],
        ],
        dtype=float,
    ),
)

FLAG_P = (
    np.array([[0, 0, 0], [0, 0, -1], [0, 1, 0]], dtype=complex),
    -1j * np.array([[0, 0, 0], [0, 0, 1], [0, 1, 0]]),
    np.array([[0, 0, 1], [0, 0, 0], [-1, 0, 0]], dtype=complex),
    -1j * np.array([[0, 0, 1], [0, 0, 0], [1, 0, 0]]),
    np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0]], dtype=complex),
    -1j * np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]]),
)
FLAG_H = (np.diag([1j, 0, -1j]), np.diag([0, 1j, -1j]))

FLAG_ALPHAS = tuple(np.diag(np.repeat(np.eye(3)[i], 2)) for i in range(3))
FLAG_PHI1 = 0.5 * np.array([1, 0, 0, -1, 0, -1, -1, 0], dtype=complex)
FLAG_PHI2 = 0.5 * np.array([0, 1, 1, 0, 1, 0, 0, -1], dtype=complex)

# The flag energy polynomial and flow system are reproduced exactly with E_i = R_i / 2.
FLAG_DEFAULT_SCALE = 0.5


@dataclass(frozen=True)
class HomSpace:
    n: int
    bracket: np.ndarray = field(repr=False)
    isotropy: tuple = field(default=(), repr=False)
    label: str = ""
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        b = self.bracket
        if b.shape != (self.n,) * 3:
            raise ValueError(f"bracket must have shape {(self.n,) * 3}, got {b.shape}")
        if np.abs(b + b.transpose(1, 0, 2)).max() > 1e-12:
            raise ValueError("bracket constants must be antisymmetric in the first two indices")
        for a in self.isotropy:
            if a.shape != (self.n, self.n) or np.abs(a + a.T).max() > 1e-12:
                raise ValueError("isotropy generators must be skew-symmetric n x n matrices")

    def lie(self, x, y) -> np.ndarray:
        """p-component of the bracket of two vectors of p."""
        return np.einsum("i,j,ijk->k", x, y, self.bracket)


@dataclass(frozen=True)
class MetricFrame:
    """Frame A with g = A^{-T} A^{-1}; columns of A are a g-orthonormal basis."""

    A: np.ndarray

    @property
    def Ainv(self) -> np.ndarray:
        return np.linalg.inv(self.A)

    @property
    def det_A(self) -> float:
        return float(np.linalg.det(self.A))

    @property
    def g(self) -> np.ndarray:
        Ai = self.Ainv
        return Ai.T @ Ai


def _levi_civita3():
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1.0
        eps[j, i, k] = -1.0
    return eps


def preset_bianchi(eps) -> HomSpace:
    if len(eps) != 3 or any(e not in (-1, 0, 1) for e in eps):
        raise ValueError(f"Bianchi parameters must lie in {{-1,0,1}}^3, got {tuple(eps)}")
    eps = tuple(int(e) for e in eps)
    # [X, Y] = D (X x Y) with D = diag(eps)
    bracket = _levi_civita3() * np.array(eps, dtype=float)[None, None, :]
    label = BIANCHI_NAMES.get(eps, f"bianchi{eps}")
    return HomSpace(n=3, bracket=bracket, label=label, params={"eps": eps})


def preset_almost_abelian(F) -> HomSpace:
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.shape[0] != F.shape[1]:
        raise ValueError(f"F must be square, got shape {F.shape}")
    n = F.shape[0] + 1
    bracket = np.zeros((n, n, n))
    # [X_n, X_i] = sum_j F_ji X_j
    bracket[n - 1, : n - 1, : n - 1] = F.T
    bracket[: n - 1, n - 1, : n - 1] = -F.T
    return HomSpace(n=n, bracket=bracket, label="almost_abelian", params={"F": F.tolist()})


def _su3_coordinates(x: np.ndarray) -> np.ndarray:
    basis = FLAG_P + FLAG_H
    M = np.array([np.concatenate([b.real.ravel(), b.imag.ravel()]) for b in basis]).T
    v = np.concatenate([x.real.ravel(), x.imag.ravel()])
    c, *_ = np.linalg.lstsq(M, v, rcond=None)
    if np.abs(M @ c - v).max() > 1e-12:
        raise ValueError("matrix is not in su(3)")
    return c


def flag_structure_constants(scale: float = 1.0) -> np.ndarray:
    """[E_i, E_j]_p in the basis E_i = scale * R_i (t^2 component dropped)."""
    bracket = np.zeros((6, 6, 6))
    for i, Ri in enumerate(FLAG_P):
        for j, Rj in enumerate(FLAG_P):
            bracket[i, j] = _su3_coordinates(Ri @ Rj - Rj @ Ri)[:6]
    bracket = np.round(bracket, 12)
    return scale * bracket


def flag_isotropy_from_su3() -> tuple[np.ndarray, np.ndarray]:
    """ad(h)|_p for the two t^2 generators, computed from matrix commutators."""
    out = []
    for h in FLAG_H:
        cols = [_su3_coordinates(h @ R - R @ h)[:6] for R in FLAG_P]
        out.append(np.round(np.array(cols).T, 12))
    return tuple(out)


def preset_flag(scale: float = FLAG_DEFAULT_SCALE) -> HomSpace:
    if scale <= 0:
        raise ValueError("flag basis scale must be positive")
    return HomSpace(
        n=6,
        bracket=flag_structure_constants(scale),
        isotropy=FLAG_ISOTROPY,
        label="flag",
        params={"scale": scale},
    )


def _null_space(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of ker M, SVD threshold relative to sigma_max."""
    if M.size == 0:
        return np.eye(M.shape[1], dtype=M.dtype)
    _, s, vh = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > NULL_RTOL * smax)) if smax > 0 else 0
    return vh[rank:].conj().T


def _canonical(V: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Reduced row-echelon basis of span(V columns); pivots normalised to 1.

    Gives deterministic, human-readable bases (alpha_1, alpha_2, ... for the
    flag manifold) independent of the SVD's arbitrary rotation.
    """
    R = V.T.copy()
    rows, cols = R.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(R[r:, c])))
        if abs(R[p, c]) < tol:
            continue
        R[[r, p]] = R[[p, r]]
        R[r] /= R[r, c]
        for q in range(rows):
            if q != r:
                R[q] -= R[q, c] * R[r]
        r += 1
    R[np.abs(R) < 1e-13] = 0
    return R[:r].T


def _sym_basis(n: int) -> list[np.ndarray]:
    out = []
    for a in range(n):
        for b in range(a, n):
            S = np.zeros((n, n))
            S[a, b] = S[b, a] = 1.0
            out.append(S)
    return out


def invariant_metric_basis(h: HomSpace, orthonormal: bool = True) -> list[np.ndarray]:
    """Basis of symmetric S with a^T S + S a = 0 for every isotropy generator a.

    ``orthonormal=False`` returns the row-echelon basis whose coefficients are
    the metric entries at the pivot positions (alpha_i for the flag manifold,
    the upper triangle g_ab when the isotropy is trivial).
    """
    sym = _sym_basis(h.n)
    if h.isotropy:
        blocks = [np.array([(a.T @ S + S @ a).ravel() for S in sym]).T for a in h.isotropy]
        coeffs = _canonical(_null_space(np.vstack(blocks)))
    else:
        coeffs = np.eye(len(sym))
    basis = [np.einsum("m,mab->ab", c, np.array(sym)) for c in coeffs.T]
    if orthonormal:
        basis = _gram_schmidt(basis, lambda x, y: float(np.sum(x * y)))
    return basis


def _gram_schmidt(vectors, inner):
    out = []
    for v in vectors:
        w = v.astype(np.result_type(v, float)).copy()
        for u in out:
            w = w - inner(u, w) * u
        out.append(w / np.sqrt(abs(inner(w, w))))
    return out


def invariant_spinor_basis(h: HomSpace, m: SpinorModule) -> list[np.ndarray]:
    """Orthonormal basis of spinors annihilated by all lifted isotropy generators."""
    if m.n != h.n:
        raise ValueError(f"spinor module dimension {m.n} does not match space dimension {h.n}")
    if not h.isotropy:
        return [e.astype(complex) for e in np.eye(m.dim)]
    L = np.vstack([spin_lift(m, a) for a in h.isotropy])
    V = _canonical(_null_space(L))
    return _gram_schmidt([V[:, i] for i in range(V.shape[1])], lambda x, y: np.vdot(x, y))


def is_invariant_metric(h: HomSpace, g, tol: float = 1e-10) -> bool:
    g = np.asarray(g, dtype=float)
    return all(np.abs(a.T @ g + g @ a).max() <= tol for a in h.isotropy)


def frame_of(g) -> MetricFrame:
    """Principal frame: A^{-1} is the symmetric positive square root of g."""
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or np.abs(g - g.T).max() > 1e-12 * max(1.0, np.abs(g).max()):
        raise ValueError("metric must be a symmetric square matrix")
    w, V = np.linalg.eigh(0.5 * (g + g.T))
    if w[0] <= 0:
        raise ValueError(f"metric is not positive definite (smallest eigenvalue {w[0]:.3g})")
    A = (V / np.sqrt(w)) @ V.T
    return MetricFrame(A=0.5 * (A + A.T))


def metric_from_coeffs(h: HomSpace, coeffs) -> np.ndarray:
    """Build g from coefficients over the row-echelon invariant basis.

    When diagonal matrices are invariant, ``n`` coefficients are also accepted
    and read as the diagonal of g.
    """
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    basis = invariant_metric_basis(h, orthonormal=False)
    if coeffs.size == len(basis):
        return np.einsum("k,kab->ab", coeffs, np.array(basis))
    if coeffs.size == h.n:
        g = np.diag(coeffs)
        if is_invariant_metric(h, g):
            return g
    raise ValueError(
        f"expected {len(basis)} invariant-basis coefficients"
        + (f" or {h.n} diagonal entries" if is_invariant_metric(h, np.eye(h.n)) else "")
        + f", got {coeffs.size}"
    )


def coeffs_of_metric(h: HomSpace, g) -> np.ndarray:
    """Inverse of metric_from_coeffs for the row-echelon basis."""
    basis = np.array(invariant_metric_basis(h, orthonormal=False))
    M = basis.reshape(len(basis), -1).T
    c, *_ = np.linalg.lstsq(M, np.asarray(g, dtype=float).ravel(), rcond=None)
    return c
