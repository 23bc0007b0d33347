"""Critical points, solitons and g-orthogonal standard bases."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import linear_sum_assignment

from .clifford import SpinorModule
from .energy import FlowState
from .flow import _Reduced, reduced_kind
from .gradient import normalization_term, q1, q1_at, q2
from .homspace import HomSpace, frame_of, invariant_metric_basis, invariant_spinor_basis, metric_from_coeffs

ZERO_MODE_RTOL = 1e-7
SOLITON_TOL = 1e-8
CERT_TOL = 1e-8
FD_REL_STEP = 1e-6

UNIMODULAR_TYPES = {
    "abelian": (0, 0, 0),
    "h3": (1, 0, 0),
    "e(2)": (1, 1, 0),
    "e(1,1)": (1, -1, 0),
    "su(2)": (1, 1, 1),
    "sl(2,R)": (-1, 1, 1),
}


@dataclass
class LinearizationReport:
    point: np.ndarray
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    classification: str

    def to_dict(self) -> dict:
        return {
            "point": self.point.tolist(),
            "jacobian": self.jacobian.tolist(),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "classification": self.classification,
        }


@dataclass
class SolitonReport:
    is_soliton: bool
    lam: float
    residual: float
    q2_norm: float

    def to_dict(self) -> dict:
        return {"is_soliton": self.is_soliton, "lambda": self.lam, "residual": self.residual, "q2_norm": self.q2_norm}


def _classify(eigs, scale) -> str:
    zero = np.abs(eigs) <= ZERO_MODE_RTOL * max(scale, 1e-300)
    if np.any(eigs.real[~zero] > 0):
        return "unstable"
    if np.count_nonzero(zero) == 1:
        return "stable_modulo_scaling"
    return "degenerate"


def _fd_jacobian(f, x, rel_step=FD_REL_STEP):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        step = rel_step * max(1.0, abs(x[i]))
        e[i] = step
        cols.append((f(x + e) - f(x - e)) / (2 * step))
    return np.array(cols).T


def linearize(
    h: HomSpace, m: SpinorModule, point, normalized: bool = True, phi=None, path: str = "auto"
) -> LinearizationReport:
    """Jacobian of the metric part of the flow in invariant coefficients.

    ``point`` lists coefficients over the row-echelon invariant basis or, for
    spaces where diagonal metrics are invariant, the diagonal of g. The
    normalized vector field is scale invariant, so points off the unit-volume
    slice are accepted. ``path="general"`` forces the gradient computation
    even where a reduced system exists.
    """
    if path not in ("auto", "general"):
        raise ValueError(f"unknown path {path!r}")
    point = np.asarray(point, dtype=float).ravel()
    g0 = metric_from_coeffs(h, point)
    frame_of(g0)  # raises unless g is positive definite
    rbasis = np.array(invariant_metric_basis(h, orthonormal=False))
    diag_coords = point.size != len(rbasis)

    def to_metric(x):
        return np.diag(x) if diag_coords else np.einsum("k,kab->ab", x, rbasis)

    def from_metric(G):
        if diag_coords:
            return np.diag(G).copy()
        M = rbasis.reshape(len(rbasis), -1).T
        return np.linalg.lstsq(M, G.ravel(), rcond=None)[0]

    kind = reduced_kind(h, g0) if path == "auto" else None
    if kind is not None and (diag_coords or kind == "flag"):
        red = _Reduced(kind, h, normalized)

        def f(x):
            G = to_metric(x)
            return from_metric(red.metric(red.rhs(0.0, red.pack(G))))

    else:
        if phi is None:
            phi = invariant_spinor_basis(h, m)[0]

        def f(x):
            A = frame_of(to_metric(x)).A
            Q = q1_at(h, m, A, phi)
            if normalized:
                Q = Q + normalization_term(h, m, A, phi)
            return from_metric(Q)

    J = _fd_jacobian(f, point)
    eigs = np.linalg.eigvals(J)
    eigs = eigs[np.argsort(-eigs.real)]
    return LinearizationReport(point=point, jacobian=J, eigenvalues=eigs, classification=_classify(eigs, np.linalg.norm(J)))


def soliton_check(h: HomSpace, m: SpinorModule, s: FlowState) -> SolitonReport:
    """Q1 = lam g and Q2 = 0, with lam from the g-trace of Q1."""
    Q1 = q1(h, m, s)
    Q2 = q2(h, m, s)
    g = np.asarray(s.g, dtype=float)
    w, V = np.linalg.eigh(g)
    gih = (V / np.sqrt(w)) @ V.T
    N = gih @ Q1 @ gih
    lam = float(np.trace(N) / h.n)
    nrm = np.linalg.norm(N)
    residual = 0.0 if nrm == 0 else float(np.linalg.norm(N - lam * np.eye(h.n)) / nrm)
    q2n = float(np.linalg.norm(Q2))
    return SolitonReport(is_soliton=bool(residual <= SOLITON_TOL and q2n <= SOLITON_TOL), lam=lam, residual=residual, q2_norm=q2n)


# ----------------------------------------------------------- standard basis


def standard_bracket_residual(T, eps) -> float:
    """Largest deviation of [Y_i, Y_{i+1}] - eps_{i+2} Y_{i+2} for Y = columns of T.

    Brackets are those of the reference standard basis with parameters eps.
    """
    T = np.asarray(T, dtype=float)
    D = np.diag(np.asarray(eps, dtype=float))
    worst = 0.0
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        br = D @ np.cross(T[:, i], T[:, j])
        worst = max(worst, float(np.abs(br - eps[k] * T[:, k]).max()))
    return worst


def orthogonality_residual(g, T) -> float:
    G = T.T @ np.asarray(g, dtype=float) @ T
    off = G - np.diag(np.diag(G))
    return float(np.abs(off).max() / np.abs(np.diag(G)).max())


def _g_orthonormalize(g, vectors):
    out = []
    for v in vectors:
        v = np.array(v, dtype=float)
        for u in out:
            v = v - (u @ g @ v) * u
        out.append(v / np.sqrt(v @ g @ v))
    return out


def _basis_h3(g, eps):
    a = int(np.flatnonzero(eps)[0])
    b, c = (a + 1) % 3, (a + 2) % 3
    # centre is spanned by X_a; the complement is its g-orthogonal complement
    z = np.eye(3)[a]
    gz = g @ z
    proj = [np.eye(3)[i] - (gz @ np.eye(3)[i]) / (gz @ z) * z for i in (b, c)]
    w1, w2 = _g_orthonormalize(g, proj)
    T = np.zeros((3, 3))
    T[:, b], T[:, c] = w1, w2
    # [w1, w2] = eps_a (w1 x w2)_a X_a
    T[:, a] = np.cross(w1, w2)[a] * np.eye(3)[a]
    return T


def _basis_e2(g, eps):
    c = int(np.flatnonzero(np.asarray(eps) == 0)[0])
    a, b = (c + 1) % 3, (c + 2) % 3
    ea, eb = eps[a], eps[b]
    v1, v2 = _g_orthonormalize(g, [np.eye(3)[a], np.eye(3)[b]])
    w = np.linalg.solve(g, np.eye(3)[c])  # g-orthogonal to span(X_a, X_b)
    w = w / np.sqrt(w @ g @ w)
    D = np.diag(np.asarray(eps, dtype=float))

    def ad_w(x):
        return D @ np.cross(w, x)

    V = np.column_stack([v1, v2])
    f = np.array([[v @ g @ ad_w(u) for u in (v1, v2)] for v in (v1, v2)])
    sym = 0.5 * (f + f.T)
    s, t = 0.5 * (sym[0, 0] - sym[1, 1]), sym[0, 1]
    # rotate so that g(u, f u) = 0 on both new axes
    theta = 0.5 * np.arctan2(-s, t)
    if theta <= -np.pi / 4:
        theta += np.pi / 2
    elif theta > np.pi / 4:
        theta -= np.pi / 2
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    u1, u2 = (V @ R).T
    m21 = u2 @ g @ ad_w(u1)
    m12 = u1 @ g @ ad_w(u2)
    # Y_a = p u1, Y_b = q u2, Y_c = r w with [Y_c, Y_a] = eb Y_b, [Y_b, Y_c] = ea Y_a
    r = np.sqrt(-ea * eb / (m12 * m21))
    q = r * m21 / eb
    T = np.zeros((3, 3))
    T[:, a], T[:, b], T[:, c] = u1, q * u2, r * w
    return T


def _basis_semisimple(g, eps):
    eps = np.asarray(eps, dtype=float)
    D = np.diag(eps)
    lam, V = eigh(D, g)  # V^T g V = I, V^T D V = diag(lam)
    # assign eigenvectors to positions with matching sign of eps
    cost = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            cost[i, j] = (0.0 if np.sign(lam[i]) == eps[j] else 1e6) - abs(V[j, i]) / np.linalg.norm(V[:, i])
    rows, cols = linear_sum_assignment(cost)
    order = np.empty(3, dtype=int)
    order[cols] = rows
    V, lam = V[:, order], lam[order]
    if np.any(np.sign(lam) != eps):
        raise ValueError("eigenvalue signs do not match the Bianchi type")
    if np.linalg.det(V) < 0:
        V[:, 0] = -V[:, 0]
    # T = V diag(s); need T^T D T = det(T) D, i.e. s_i^2 |lam_i| = det(V) prod(s)
    dv = np.linalg.det(V)
    kappa = np.prod(np.abs(lam)) / dv**2
    s = np.sqrt(kappa / np.abs(lam))
    return V * s


def diagonal_standard_basis(g, eps):
    """Standard basis that is g-orthogonal, as columns of T in reference coordinates.

    Returns (T, achieved) where ``achieved`` holds the orthogonality and
    bracket residuals. Raises ValueError if the certificate fails.
    """
    eps = tuple(int(e) for e in eps)
    if eps not in UNIMODULAR_TYPES.values():
        if len(eps) != 3 or any(e not in (-1, 0, 1) for e in eps):
            raise ValueError(f"not a Bianchi parameter triple: {eps}")
    g = np.asarray(g, dtype=float)
    frame_of(g)  # validates SPD
    nz = sum(1 for e in eps if e != 0)
    if nz == 0:
        T = frame_of(g).A
    elif nz == 1:
        T = _basis_h3(g, eps)
    elif nz == 2:
        T = _basis_e2(g, eps)
    else:
        T = _basis_semisimple(g, eps)
    achieved = {"orthogonality": orthogonality_residual(g, T), "bracket": standard_bracket_residual(T, eps)}
    scale = max(1.0, np.abs(T).max() ** 2)
    if achieved["orthogonality"] > CERT_TOL or achieved["bracket"] > CERT_TOL * scale:
        raise ValueError(f"standard basis certificate failed: {achieved}")
    return T, achieved


def diagonal_coefficients(g, T) -> np.ndarray:
    return np.diag(T.T @ np.asarray(g, dtype=float) @ T).copy()
