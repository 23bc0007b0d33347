"""Complex spinor modules with explicit gamma matrices.

Convention: Clifford multiplication satisfies ``v . v = -|v|^2``, each gamma
matrix is skew-Hermitian and unitary.  For even ``n = 2m`` the generators are
built from the 2x2 blocks ``E, T, g1, g2`` by the tensor pattern

    gamma_{2k-1} = E^(k-1) (x) g1 (x) T^(m-k)
    gamma_{2k}   = E^(k-1) (x) g2 (x) T^(m-k)

where the first tensor factor is the least significant bit of the basis
index (``e_i (x) e_j (x) e_k <-> e_{1+i+2j+4k}`` for n = 6).  Odd ``n``
appends ``gamma_n = i T^(m)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

E2 = np.eye(2, dtype=complex)
T2 = np.array([[0, -1j], [1j, 0]])
G1 = np.array([[1j, 0], [0, -1j]])
G2 = np.array([[0, 1j], [1j, 0]])

SUPPORTED_DIMS = range(3, 9)


def _tensor(factors):
    # first factor acts on the least significant index bit
    return reduce(np.kron, reversed(factors))


@dataclass(frozen=True)
class SpinorModule:
    n: int
    gammas: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.gammas.shape[1]

    @property
    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays (j, k) with j < k, in row-major order."""
        return np.triu_indices(self.n, 1)

    @property
    def pair_products(self) -> np.ndarray:
        """Stack of gamma_j gamma_k for j < k, shape (n(n-1)/2, dim, dim)."""
        j, k = self.pairs
        return np.einsum("pab,pbc->pac", self.gammas[j], self.gammas[k])

    def gamma(self, v) -> np.ndarray:
        """Matrix of Clifford multiplication by the real vector ``v``."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {v.shape}")
        return np.einsum("i,iab->ab", v, self.gammas)


def build_spinor_module(n: int) -> SpinorModule:
    if n not in SUPPORTED_DIMS:
        raise ValueError(f"unsupported dimension n={n}; need 3 <= n <= 8")
    m = n // 2
    gammas = []
    for k in range(1, m + 1):
        for g in (G1, G2):
            gammas.append(_tensor([E2] * (k - 1) + [g] + [T2] * (m - k)))
    if n % 2:
        # i*T^m anticommutes with every even generator and squares to -Id
        gammas.append(1j * _tensor([T2] * m))
    return SpinorModule(n=n, gammas=np.array(gammas))


def clifford_mul(m: SpinorModule, v, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (m.dim,):
        raise ValueError(f"spinor must have length {m.dim}, got shape {phi.shape}")
    return m.gamma(v) @ phi


def spin_lift(m: SpinorModule, omega, tol: float = 1e-10) -> np.ndarray:
    """Lift a skew-symmetric matrix from so(n) to spin(n) acting on spinors.

    The lift is normalised so that ``[lift(omega), gamma(v)] = gamma(omega v)``;
    with ``v . v = -|v|^2`` this is ``-1/4 sum_ij omega_ij gamma_i gamma_j``.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (m.n, m.n):
        raise ValueError(f"expected an {m.n}x{m.n} matrix, got shape {omega.shape}")
    if np.abs(omega + omega.T).max() > tol:
        raise ValueError("spin_lift needs a skew-symmetric matrix")
    return -0.25 * np.einsum("ij,iab,jbc->ac", omega, m.gammas, m.gammas)


def complex_volume(m: SpinorModule) -> np.ndarray:
    """Complex volume element i^{floor((n+1)/2)} gamma_1 ... gamma_n (squares to Id)."""
    if m.n % 2:
        raise ValueError("complex volume element is only provided for even n")
    vol = reduce(np.matmul, m.gammas)
    return (1j ** ((m.n + 1) // 2)) * vol


def herm(a, b) -> complex:
    """Hermitian product, conjugate-linear in the first slot."""
    return complex(np.vdot(a, b))


def re_herm(a, b) -> float:
    return float(np.real(np.vdot(a, b)))
