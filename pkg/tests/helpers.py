import numpy as np


def random_spd(r, n, shift=0.3):
    B = r.normal(size=(n, n))
    return B @ B.T / n + shift * np.eye(n)


def random_frame(r, n):
    A = r.normal(size=(n, n)) + 1.5 * np.eye(n)
    if np.linalg.det(A) < 0:
        A[:, 0] = -A[:, 0]
    return A


def unit_spinor(r, basis):
    c = r.normal(size=len(basis)) + 1j * r.normal(size=len(basis))
    phi = np.array(basis).T @ c
    return phi / np.linalg.norm(phi)


def block_metric(H, hnn):
    n = H.shape[0] + 1
    g = np.zeros((n, n))
    g[: n - 1, : n - 1] = H
    g[-1, -1] = hnn
    return g
