"""Homogeneous spinor flow integration, reduced systems and closed forms.

The general path integrates the frame A (g = A^{-T} A^{-1}) along the
horizontal lift of the metric velocity, so the spinor components stay
meaningful without any re-trivialization. The reduced paths integrate the
scalar systems for diagonal Bianchi metrics, almost abelian block metrics and
the flag manifold.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .clifford import SpinorModule, build_spinor_module
from .energy import (
    FlowState,
    almost_abelian_applicable,
    energy_almost_abelian,
    energy_at,
    energy_bianchi,
    energy_flag,
)
from .gradient import horizontal_velocity, normalization_term, q1_at, q2_at
from .homspace import HomSpace, MetricFrame, frame_of, invariant_metric_basis, invariant_spinor_basis

log = logging.getLogger(__name__)

TERMINATIONS = ("reached_t_end", "blowup_detected", "collapse_detected", "step_underflow")
COND_MAX = 1e12
EIG_MIN, EIG_MAX = 1e-12, 1e12
DT_MIN = 1e-12

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    energies: np.ndarray
    termination: str
    coords: Optional[np.ndarray] = None  # raw ODE variables, one row per time

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> FlowState:
        return self.states[-1]


@dataclass
class FlowSpec:
    """What to integrate.

    ``path`` selects the general gradient computation or a reduced scalar
    system ("bianchi", "almost_abelian", "flag"); "auto" picks the reduced
    system when the initial state has the required shape.
    """

    space: HomSpace
    initial: FlowState
    normalized: bool = False
    t_end: float = 1.0
    integrator: str = "adaptive"
    dt: Optional[float] = None
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    path: str = "general"
    max_steps: int = 200_000
    module: Optional[SpinorModule] = field(default=None, repr=False)

    def __post_init__(self):
        if self.integrator not in ("adaptive", "rk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.integrator == "rk4" and not (self.dt and self.dt > 0):
            raise ValueError("rk4 integrator needs a positive dt")
        if self.path not in ("general", "auto", "bianchi", "almost_abelian", "flag"):
            raise ValueError(f"unknown path {self.path!r}")
        if not math.isfinite(self.t_end):
            raise ValueError("t_end must be finite")


# ----------------------------------------------------------------- integrators


def _initial_step(f, t, y, direction, rel_tol, abs_tol, span):
    scale = abs_tol + rel_tol * np.abs(y)
    f0 = f(t, y)
    d0 = np.max(np.abs(y) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = f(t + direction * h0, y + direction * h0 * f0)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span), f0


def _dp54_step(f, t, y, h, k0):
    k = [k0]
    for s in range(1, 7):
        ys = y + h * sum(a * ki for a, ki in zip(_A[s], k))
        k.append(f(t + _C[s] * h, ys))
    K = np.array(k)
    y5 = y + h * (_B5 @ K)
    err = h * ((_B5 - _B4) @ K)
    return y5, err


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def solve_ode(
    f: Callable,
    y0,
    t_end: float,
    integrator: str = "adaptive",
    dt: Optional[float] = None,
    rel_tol: float = 1e-9,
    abs_tol: float = 1e-11,
    post_step: Optional[Callable] = None,
    metric_eigs: Optional[Callable] = None,
    max_steps: int = 200_000,
):
    """Integrate y' = f(t, y) from 0 to t_end (either sign).

    ``post_step`` may project an accepted state (normalization);
    ``metric_eigs`` maps a state to the eigenvalues of g for blow-up checks.
    Returns (times, states, termination).
    """
    y = np.array(y0, dtype=float)
    t = 0.0
    ts, ys = [t], [y.copy()]
    if t_end == 0:
        return np.array(ts), np.array(ys), "reached_t_end"
    direction = 1.0 if t_end > 0 else -1.0
    span = abs(t_end)
    prev_min = None
    if metric_eigs is not None:
        prev_min = float(np.min(metric_eigs(y)))
    termination = "reached_t_end"

    if integrator == "rk4":
        h = float(dt)
        k0 = None
    else:
        h, k0 = _initial_step(f, t, y, direction, rel_tol, abs_tol, span)

    steps = 0
    while direction * (t_end - t) > 0:
        if steps >= max_steps:
            raise RuntimeError(f"exceeded {max_steps} steps at t={t:.6g}")
        steps += 1
        h = min(h, abs(t_end - t))
        if integrator == "rk4":
            y_new = _rk4_step(f, t, y, direction * h)
        else:
            if k0 is None:
                k0 = f(t, y)
            y_new, err = _dp54_step(f, t, y, direction * h, k0)
            scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            enorm = float(np.max(np.abs(err) / scale)) if np.all(np.isfinite(y_new)) else np.inf
            if enorm > 1.0:
                h *= max(0.2, 0.9 * enorm ** -0.2) if np.isfinite(enorm) else 0.2
                if h < DT_MIN:
                    termination = "step_underflow"
                    break
                continue
            factor = 5.0 if enorm == 0 else min(5.0, max(0.2, 0.9 * enorm ** -0.2))
        if not np.all(np.isfinite(y_new)):
            termination = "blowup_detected"
            break
        t = t_end if abs(t_end - t) <= h * (1 + 1e-12) else t + direction * h
        if post_step is not None:
            y_new = post_step(y_new)
        y = y_new
        ts.append(t)
        ys.append(y.copy())
        k0 = None
        if integrator != "rk4":
            h *= factor
        if metric_eigs is not None:
            w = np.asarray(metric_eigs(y), dtype=float)
            lo, hi = float(np.min(w)), float(np.max(w))
            if lo <= 0 or hi / lo > COND_MAX or lo < EIG_MIN or hi > EIG_MAX:
                # a shrinking direction means collapse, otherwise something blew up
                termination = "collapse_detected" if lo <= 0 or lo < prev_min else "blowup_detected"
                break
            prev_min = lo
    return np.array(ts), np.array(ys), termination


# ------------------------------------------------------------ reduced systems


def rhs_bianchi_diag(eps, a, normalized: bool = False) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(eps, dtype=float) * a
    P = 64.0 * a[0] * a[1] * a[2]
    out = np.empty(3)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        if normalized:
            poly = 8 * b[i] ** 2 - 4 * (b[j] ** 2 + b[k] ** 2) + 4 / 3 * (2 * b[j] * b[k] - b[i] * b[j] - b[i] * b[k])
        else:
            poly = 9 * b[i] ** 2 - 3 * (b[j] ** 2 + b[k] ** 2) + 2 * (b[j] * b[k] - b[i] * b[j] - b[i] * b[k])
        out[i] = -a[i] * poly / P
    return out


def rhs_almost_abelian(H, hnn: float, F, normalized: bool = False):
    H = np.atleast_2d(np.asarray(H, dtype=float))
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if not almost_abelian_applicable(F):
        raise ValueError("reduced almost abelian system needs dim <= 4 or F = lambda * Id")
    if hnn <= 0:
        raise ValueError("h must be positive")
    n = H.shape[0] + 1
    HFHiFt = H @ F @ np.linalg.solve(H, F.T)
    tau = 3.0 * np.trace(HFHiFt) + np.trace(F @ F)
    rest = 6.0 * HFHiFt @ H - 6.0 * F.T @ H @ F
    if normalized:
        Hdot = -(2.0 / n * tau * H + rest) / (64.0 * hnn)
        hdot = (n - 1) * tau / (32.0 * n)
    else:
        Hdot = -(tau * H + rest) / (64.0 * hnn)
        hdot = tau / 64.0
    return 0.5 * (Hdot + Hdot.T), float(hdot)


def rhs_flag(a, normalized: bool = False) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    v = np.empty(3)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        v[i] = -(a[i] / (a[j] * a[k])) * (3 * a[i] - a[j] - a[k]) / 16.0
    if normalized:
        s2 = np.sum(a * a)
        s11 = a[0] * a[1] + a[1] * a[2] + a[0] * a[2]
        v = v + (s2 / 16.0 - s11 / 24.0) / np.prod(a) * a
    return v


# --------------------------------------------------------- state conversions


def _spinor_module(spec: FlowSpec) -> SpinorModule:
    return spec.module if spec.module is not None else build_spinor_module(spec.space.n)


def _is_diag(g, tol=1e-12):
    return np.abs(g - np.diag(np.diag(g))).max() <= tol * max(1.0, np.abs(g).max())


def reduced_kind(h: HomSpace, g) -> Optional[str]:
    """Name of the reduced system that covers metric g on h, if any."""
    g = np.asarray(g, dtype=float)
    if h.label == "flag":
        return "flag"
    if "eps" in h.params and _is_diag(g):
        return "bianchi"
    if "F" in h.params and almost_abelian_applicable(h.params["F"]):
        n = h.n
        if np.abs(g[n - 1, : n - 1]).max() <= 1e-12 * np.abs(g).max():
            return "almost_abelian"
    return None


def flag_coeffs(h: HomSpace, g) -> np.ndarray:
    basis = invariant_metric_basis(h, orthonormal=False)
    M = np.array(basis).reshape(len(basis), -1).T
    c, *_ = np.linalg.lstsq(M, np.asarray(g, dtype=float).ravel(), rcond=None)
    return c


class _Reduced:
    """Pack/unpack and evaluate one of the reduced systems."""

    def __init__(self, kind, h: HomSpace, normalized: bool):
        self.kind, self.h, self.normalized = kind, h, normalized
        if kind == "flag":
            self.basis = np.array(invariant_metric_basis(h, orthonormal=False))
        if kind == "almost_abelian":
            self.F = np.atleast_2d(np.asarray(h.params["F"], dtype=float))

    def pack(self, g):
        g = np.asarray(g, dtype=float)
        if self.kind == "bianchi":
            if not _is_diag(g, 1e-10):
                raise ValueError("Bianchi reduced system needs a diagonal metric")
            return np.diag(g).copy()
        if self.kind == "flag":
            return flag_coeffs(self.h, g)
        n = self.h.n
        return np.concatenate([g[: n - 1, : n - 1].ravel(), [g[n - 1, n - 1]]])

    def metric(self, y):
        if self.kind == "bianchi":
            return np.diag(y)
        if self.kind == "flag":
            return np.einsum("k,kab->ab", y, self.basis)
        n = self.h.n
        g = np.zeros((n, n))
        g[: n - 1, : n - 1] = y[:-1].reshape(n - 1, n - 1)
        g[n - 1, n - 1] = y[-1]
        return g

    def rhs(self, t, y):
        if self.kind == "bianchi":
            return rhs_bianchi_diag(self.h.params["eps"], y, self.normalized)
        if self.kind == "flag":
            return rhs_flag(y, self.normalized)
        n = self.h.n
        Hd, hd = rhs_almost_abelian(y[:-1].reshape(n - 1, n - 1), y[-1], self.F, self.normalized)
        return np.concatenate([Hd.ravel(), [hd]])

    def energy(self, y):
        if self.kind == "bianchi":
            return energy_bianchi(self.h.params["eps"], frame_of(np.diag(y)))
        if self.kind == "flag":
            return energy_flag(*y)
        n = self.h.n
        return energy_almost_abelian(y[:-1].reshape(n - 1, n - 1), y[-1], self.F)

    def eigs(self, y):
        if self.kind in ("bianchi", "flag"):
            return y
        n = self.h.n
        H = y[:-1].reshape(n - 1, n - 1)
        return np.concatenate([np.linalg.eigvalsh(0.5 * (H + H.T)), [y[-1]]])

    def normalize(self, y):
        g_det = np.prod(self.eigs(y))
        if self.kind == "flag":
            g_det = g_det**2  # each a_i has multiplicity two
        return y * g_det ** (-1.0 / self.h.n)


def rhs_reduced(kind: str, h: HomSpace, y, normalized: bool = False) -> np.ndarray:
    return _Reduced(kind, h, normalized).rhs(0.0, np.asarray(y, dtype=float))


# ------------------------------------------------------------------ integrate


def general_rhs(h: HomSpace, m: SpinorModule, normalized: bool, metric_basis=None, spinor_basis=None):
    """Vector field on y = (A.ravel(), Re phi, Im phi)."""
    n, d = h.n, m.dim
    if metric_basis is None:
        metric_basis = invariant_metric_basis(h)
    if spinor_basis is None:
        spinor_basis = invariant_spinor_basis(h, m)

    def f(t, y):
        A = y[: n * n].reshape(n, n)
        phi = y[n * n : n * n + d] + 1j * y[n * n + d :]
        Q1 = q1_at(h, m, A, phi, basis=metric_basis)
        if normalized:
            Q1 = Q1 + normalization_term(h, m, A, phi)
        Q2 = q2_at(h, m, A, phi, spinor_basis=spinor_basis)
        return np.concatenate([horizontal_velocity(A, Q1).ravel(), Q2.real, Q2.imag])

    return f


def _integrate_general(spec: FlowSpec) -> Trajectory:
    h, m = spec.space, _spinor_module(spec)
    n, d = h.n, m.dim
    s0 = spec.initial
    A0 = np.asarray(s0.A, dtype=float)
    phi0 = np.asarray(s0.phi, dtype=complex)
    phi0 = phi0 / np.linalg.norm(phi0)
    if spec.normalized:
        A0 = A0 / abs(np.linalg.det(A0)) ** (1.0 / n)
    y0 = np.concatenate([A0.ravel(), phi0.real, phi0.imag])
    f = general_rhs(h, m, spec.normalized)

    def post(y):
        y = y.copy()
        A = y[: n * n].reshape(n, n)
        if spec.normalized:
            y[: n * n] = (A / abs(np.linalg.det(A)) ** (1.0 / n)).ravel()
        nrm = np.linalg.norm(y[n * n :])
        y[n * n :] /= nrm
        return y

    def eigs(y):
        return np.linalg.eigvalsh(MetricFrame(A=y[: n * n].reshape(n, n)).g)

    ts, ys, term = solve_ode(
        f, y0, spec.t_end, spec.integrator, spec.dt, spec.rel_tol, spec.abs_tol, post, eigs, spec.max_steps
    )
    states, energies = [], []
    for y in ys:
        A = y[: n * n].reshape(n, n)
        phi = y[n * n : n * n + d] + 1j * y[n * n + d :]
        states.append(FlowState.from_frame(A, phi))
        energies.append(energy_at(h, m, A, phi))
    log.info("general flow on %s: %d steps, %s", h.label, len(ts) - 1, term)
    return Trajectory(ts, states, np.array(energies), term, coords=ys)


def _integrate_reduced(spec: FlowSpec, kind: str) -> Trajectory:
    h = spec.space
    if kind == "almost_abelian" and "F" not in h.params:
        raise ValueError("space has no almost abelian parameters")
    if kind == "bianchi" and "eps" not in h.params:
        raise ValueError("space has no Bianchi parameters")
    if kind == "flag" and h.label != "flag":
        raise ValueError("space is not the flag manifold")
    red = _Reduced(kind, h, spec.normalized)
    y0 = red.pack(spec.initial.g)
    if spec.normalized:
        y0 = red.normalize(y0)
    post = red.normalize if spec.normalized else None
    if kind == "almost_abelian":
        n = h.n

        def post(y, _base=post):
            y = y.copy()
            H = y[:-1].reshape(n - 1, n - 1)
            y[:-1] = (0.5 * (H + H.T)).ravel()
            return _base(y) if _base else y

    ts, ys, term = solve_ode(
        red.rhs, y0, spec.t_end, spec.integrator, spec.dt, spec.rel_tol, spec.abs_tol, post, red.eigs, spec.max_steps
    )
    phi = np.asarray(spec.initial.phi, dtype=complex)
    states = [FlowState(g=red.metric(y), phi=phi) for y in ys]
    energies = np.array([red.energy(y) for y in ys])
    log.info("%s reduced flow: %d steps, %s", kind, len(ts) - 1, term)
    return Trajectory(ts, states, energies, term, coords=ys)


def integrate(spec: FlowSpec) -> Trajectory:
    path = spec.path
    if path == "auto":
        path = reduced_kind(spec.space, spec.initial.g) or "general"
    if path == "general":
        return _integrate_general(spec)
    return _integrate_reduced(spec, path)


# ------------------------------------------------------------ closed forms

REFERENCE_CASES = ("heisenberg", "e2", "su2_round", "sl2_soliton", "almost_abelian_identity")


def reference_solution(case: str, params: dict, t: float, normalized: bool = False):
    """Closed-form solutions of the reduced systems.

    heisenberg: params a0 (triple) -> a(t), eps = (1, 0, 0)
    e2: params x0, y0, eps (+1 for e(2), -1 for e(1,1)) -> (x, y) with a = (x, x, y)
    su2_round: no params -> a(t) = (x/4, x/4, x/4), x = 1 - t/16
    sl2_soliton: params x0 -> a(t) = (x/4, 3x/8, 3x/8), x = x0 - t/6
    almost_abelian_identity: params n, h0, H0 -> (H_t, h_t) for F = Id
    """
    if case == "heisenberg":
        a1, a2, a3 = (float(v) for v in params["a0"])
        if normalized:
            base = a1 / (4 * a2 * a3) * t + 1
            p = (-1 / 2, 1 / 4, 1 / 4)
        else:
            base = 15 * a1 / (64 * a2 * a3) * t + 1
            p = (-3 / 5, 1 / 5, 1 / 5)
        if base <= 0:
            raise ValueError(f"t={t} is at or before the collapse time")
        return np.array([a1 * base ** p[0], a2 * base ** p[1], a3 * base ** p[2]])
    if case == "e2":
        x0, y0, e = float(params["x0"]), float(params["y0"]), float(params["eps"])
        if e not in (-1.0, 1.0):
            raise ValueError("eps must be +1 (e(2)) or -1 (e(1,1))")
        if normalized:
            base = 1 + (3 - e) / (24 * y0) * t
            if base <= 0:
                raise ValueError(f"t={t} is at or before the collapse time")
            return np.array([x0 * base**-0.5, y0 + (3 - e) / 24 * t])
        base = 1 + (3 - e) / (32 * y0) * t
        if base <= 0:
            raise ValueError(f"t={t} is at or before the collapse time")
        return np.array([x0 / base, y0 + (3 - e) / 32 * t])
    if case == "su2_round":
        x = 1 - t / 16
        if x <= 0:
            raise ValueError(f"t={t} is past the extinction time 16")
        return np.full(3, x / 4)
    if case == "sl2_soliton":
        x0 = float(params["x0"])
        x = x0 - t / 6
        if x <= 0:
            raise ValueError(f"t={t} is past the extinction time {6 * x0}")
        return np.array([x / 4, 3 * x / 8, 3 * x / 8])
    if case == "almost_abelian_identity":
        n, h0 = int(params["n"]), float(params["h0"])
        H0 = np.atleast_2d(np.asarray(params["H0"], dtype=float))
        if normalized:
            ht = h0 + (n - 1) ** 2 * t / (8 * n)
            if ht <= 0:
                raise ValueError(f"t={t} is at or before the collapse time")
            return (h0 / ht) ** (1 / (n - 1)) * H0, ht
        ht = h0 + (n - 1) * t / 16
        if ht <= 0:
            raise ValueError(f"t={t} is at or before the collapse time")
        return h0 / ht * H0, ht
    raise ValueError(f"unknown reference case {case!r}; expected one of {REFERENCE_CASES}")


# ------------------------------------------------------------------- export


def trajectory_columns(n: int, dim: int) -> list[str]:
    iu = np.triu_indices(n)
    cols = ["t"] + [f"g_{i + 1}{j + 1}" for i, j in zip(*iu)]
    cols += [f"phi_re_{k + 1}" for k in range(dim)] + [f"phi_im_{k + 1}" for k in range(dim)]
    return cols + ["energy", "det_g"]


def trajectory_rows(traj: Trajectory) -> tuple[list[str], list[list[float]]]:
    n = traj.states[0].g.shape[0]
    dim = np.asarray(traj.states[0].phi).size
    iu = np.triu_indices(n)
    rows = []
    for t, s, e in zip(traj.times, traj.states, traj.energies):
        phi = np.asarray(s.phi, dtype=complex)
        rows.append([float(t), *s.g[iu].tolist(), *phi.real.tolist(), *phi.imag.tolist(), float(e), float(np.linalg.det(s.g))])
    return trajectory_columns(n, dim), rows


def write_trajectory(traj: Trajectory, path, fmt: str = "csv") -> None:
    cols, rows = trajectory_rows(traj)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in rows:
                w.writerow(["%.17g" % v for v in r])
    elif fmt == "json":
        data = {c: [r[i] for r in rows] for i, c in enumerate(cols)}
        data["termination"] = traj.termination
        with open(path, "w") as fh:
            json.dump(data, fh)
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        cols = next(r)
        data = np.array([[float(v) for v in row] for row in r])
    return {c: data[:, i] for i, c in enumerate(cols)}


def det_drift(traj: Trajectory) -> float:
    d = np.array([np.linalg.det(s.g) for s in traj.states])
    return float(np.max(np.abs(d / d[0] - 1.0)))


def max_uphill(energies: Sequence[float]) -> float:
    e = np.asarray(energies, dtype=float)
    return float(np.max(np.diff(e), initial=0.0))
