"""Command line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from . import verify as verify_mod
from .analysis import diagonal_standard_basis, linearize, soliton_check
from .clifford import build_spinor_module
from .energy import FlowState, almost_abelian_applicable, energy_general
from .flow import FlowSpec, integrate, write_trajectory
from .gradient import gradient
from .homspace import (
    HomSpace,
    coeffs_of_metric,
    invariant_metric_basis,
    invariant_spinor_basis,
    is_invariant_metric,
    metric_from_coeffs,
    preset_almost_abelian,
    preset_bianchi,
    preset_flag,
)

log = logging.getLogger("spinflow")

MODES = ("energy", "grad", "flow", "normflow", "linearize", "soliton", "diagonalize", "verify")
SPACES = ("bianchi", "almost_abelian", "flag")
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowOptions:
    t_end: float = 1.0
    integrator: str = "adaptive"
    dt: Optional[float] = None
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11


@dataclass(frozen=True)
class Output:
    path: Optional[str] = None
    format: str = "csv"


@dataclass(frozen=True)
class Scenario:
    space: str
    mode: str
    eps: Optional[tuple] = None
    F: Optional[tuple] = None
    metric: Optional[tuple] = None
    spinor: Optional[tuple] = None
    normalized: bool = False
    flow: FlowOptions = field(default_factory=FlowOptions)
    output: Output = field(default_factory=Output)
    seed: int = verify_mod.DEFAULT_SEED

    @property
    def is_normalized(self) -> bool:
        return self.normalized or self.mode == "normflow"


# ---------------------------------------------------------------- parsing


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where or 'scenario'}: expected an object")
    for k in obj:
        if k not in allowed:
            raise ConfigError(f"{where + '.' if where else ''}{k}: unknown key")


def _num(x, where, positive=False):
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ConfigError(f"{where}: expected a finite number, got {x!r}")
    if positive and x <= 0:
        raise ConfigError(f"{where}: must be positive")
    return float(x)


def _vector(x, where):
    if not isinstance(x, list) or not x:
        raise ConfigError(f"{where}: expected a non-empty list")
    return tuple(_num(v, f"{where}[{i}]") for i, v in enumerate(x))


def _matrix(x, where):
    if not isinstance(x, list) or not x or not all(isinstance(r, list) for r in x):
        raise ConfigError(f"{where}: expected a list of rows")
    rows = tuple(_vector(r, f"{where}[{i}]") for i, r in enumerate(x))
    if any(len(r) != len(rows) for r in rows):
        raise ConfigError(f"{where}: matrix must be square")
    return rows


def _spinor(x, where):
    if not isinstance(x, list) or not x:
        raise ConfigError(f"{where}: expected a non-empty list")
    out = []
    for i, v in enumerate(x):
        if isinstance(v, list):
            if len(v) != 2:
                raise ConfigError(f"{where}[{i}]: complex entries are [re, im] pairs")
            out.append((_num(v[0], f"{where}[{i}][0]"), _num(v[1], f"{where}[{i}][1]")))
        else:
            out.append((_num(v, f"{where}[{i}]"), 0.0))
    return tuple(out)


def validate_space(space, eps, F):
    if space not in SPACES:
        raise ConfigError(f"space: unknown preset {space!r}; expected one of {', '.join(SPACES)}")
    if space == "bianchi":
        if eps is None:
            raise ConfigError("space.eps: required for bianchi")
        if len(eps) != 3 or any(e not in (-1.0, 0.0, 1.0) for e in eps):
            raise ConfigError(f"space.eps: entries must lie in {{-1, 0, 1}}, got {list(eps)}")
    elif eps is not None:
        raise ConfigError("space.eps: only valid for bianchi")
    if space == "almost_abelian":
        if F is None:
            raise ConfigError("space.F: required for almost_abelian")
        if not almost_abelian_applicable(np.array(F)):
            raise ConfigError(
                "space.F: the almost abelian reduction needs F of size at most 3x3 "
                "or F a multiple of the identity"
            )
    elif F is not None:
        raise ConfigError("space.F: only valid for almost_abelian")


def scenario_from_dict(d: dict) -> Scenario:
    _check_keys(d, {"space", "mode", "metric", "spinor", "normalized", "flow", "output", "seed"}, "")
    if "space" not in d or "mode" not in d:
        raise ConfigError("scenario: 'space' and 'mode' are required")
    sp = d["space"]
    _check_keys(sp, {"type", "eps", "F"}, "space")
    if "type" not in sp:
        raise ConfigError("space.type: required")
    space = sp["type"]
    eps = _vector(sp["eps"], "space.eps") if "eps" in sp else None
    if eps is not None:
        eps = tuple(int(e) if float(e).is_integer() else e for e in eps)
    F = _matrix(sp["F"], "space.F") if "F" in sp else None
    validate_space(space, eps, F)
    mode = d["mode"]
    if mode not in MODES:
        raise ConfigError(f"mode: unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    metric = None
    if d.get("metric") is not None:
        m = d["metric"]
        metric = _matrix(m, "metric") if isinstance(m, list) and m and isinstance(m[0], list) else _vector(m, "metric")
    spinor = _spinor(d["spinor"], "spinor") if d.get("spinor") is not None else None
    normalized = d.get("normalized", False)
    if not isinstance(normalized, bool):
        raise ConfigError("normalized: expected true or false")
    fo = d.get("flow", {})
    _check_keys(fo, {f.name for f in fields(FlowOptions)}, "flow")
    flow = FlowOptions()
    if "t_end" in fo:
        flow = replace(flow, t_end=_num(fo["t_end"], "flow.t_end"))
    if "integrator" in fo:
        if fo["integrator"] not in ("adaptive", "rk4"):
            raise ConfigError(f"flow.integrator: expected adaptive or rk4, got {fo['integrator']!r}")
        flow = replace(flow, integrator=fo["integrator"])
    if fo.get("dt") is not None:
        flow = replace(flow, dt=_num(fo["dt"], "flow.dt", positive=True))
    for key in ("rel_tol", "abs_tol"):
        if key in fo:
            flow = replace(flow, **{key: _num(fo[key], f"flow.{key}", positive=True)})
    if flow.integrator == "rk4" and flow.dt is None:
        raise ConfigError("flow.dt: required for the rk4 integrator")
    out = d.get("output", {})
    _check_keys(out, {"path", "format"}, "output")
    output = Output()
    if out.get("path") is not None:
        if not isinstance(out["path"], str):
            raise ConfigError("output.path: expected a string")
        output = replace(output, path=out["path"])
    if "format" in out:
        if out["format"] not in ("csv", "json"):
            raise ConfigError(f"output.format: expected csv or json, got {out['format']!r}")
        output = replace(output, format=out["format"])
    seed = d.get("seed", verify_mod.DEFAULT_SEED)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed: expected an integer")
    return Scenario(space, mode, eps, F, metric, spinor, normalized, flow, output, seed)


def _load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def parse_scenario(text: str) -> Scenario:
    return scenario_from_dict(_load_json(text))


def scenario_to_dict(s: Scenario) -> dict:
    sp = {"type": s.space}
    if s.eps is not None:
        sp["eps"] = list(s.eps)
    if s.F is not None:
        sp["F"] = [list(r) for r in s.F]
    d = {"space": sp, "mode": s.mode}
    if s.metric is not None:
        d["metric"] = [list(r) for r in s.metric] if isinstance(s.metric[0], tuple) else list(s.metric)
    if s.spinor is not None:
        d["spinor"] = [list(c) for c in s.spinor]
    d["normalized"] = s.normalized
    d["flow"] = {k: v for k, v in vars(s.flow).items() if v is not None}
    d["output"] = {k: v for k, v in vars(s.output).items() if v is not None}
    d["seed"] = s.seed
    return d


def serialize_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2)


# ------------------------------------------------------------- realization


def build_space(s: Scenario) -> HomSpace:
    if s.space == "bianchi":
        return preset_bianchi(s.eps)
    if s.space == "almost_abelian":
        return preset_almost_abelian(np.array(s.F))
    return preset_flag()


def build_state(s: Scenario, h: HomSpace, m) -> FlowState:
    if s.metric is None:
        g = np.eye(h.n)
    elif isinstance(s.metric[0], tuple):
        g = np.array(s.metric)
        if g.shape != (h.n, h.n):
            raise ConfigError(f"metric: expected a {h.n}x{h.n} matrix")
        if np.abs(g - g.T).max() > 1e-12 * max(1.0, np.abs(g).max()):
            raise ConfigError("metric: matrix must be symmetric")
        if not is_invariant_metric(h, g, tol=1e-9):
            raise ConfigError("metric: matrix is not invariant under the isotropy")
    else:
        v = np.array(s.metric)
        if v.size == h.n * h.n and v.size not in (len(invariant_metric_basis(h)), h.n):
            return build_state(replace(s, metric=tuple(map(tuple, v.reshape(h.n, h.n)))), h, m)
        try:
            g = metric_from_coeffs(h, v)
        except ValueError as exc:
            raise ConfigError(f"metric: {exc}") from None
    w = np.linalg.eigvalsh(0.5 * (g + g.T))
    if w[0] <= 0:
        raise NumericalError(f"metric is not positive definite (smallest eigenvalue {w[0]:.6g})")
    basis = invariant_spinor_basis(h, m)
    if s.spinor is None:
        phi = basis[0]
    else:
        if len(s.spinor) != len(basis):
            raise ConfigError(f"spinor: expected {len(basis)} coefficients over the invariant spinor basis, got {len(s.spinor)}")
        c = np.array([complex(re, im) for re, im in s.spinor])
        phi = np.array(basis).T @ c
        nrm = np.linalg.norm(phi)
        if nrm == 0:
            raise ConfigError("spinor: coefficients must not all vanish")
        phi = phi / nrm
    return FlowState(g=g, phi=phi)


def _cmplx(v):
    v = np.asarray(v, dtype=complex)
    return {"re": v.real.tolist(), "im": v.imag.tolist()}


def _emit(obj, s: Scenario):
    text = json.dumps(obj, indent=2)
    if s.output.path:
        with open(s.output.path, "w") as fh:
            fh.write(text + "\n")
        log.info("wrote %s", s.output.path)
    else:
        print(text)


def run_scenario(s: Scenario) -> int:
    if s.mode == "verify":
        results = verify_mod.run_all(seed=s.seed)
        table = verify_mod.format_table(results)
        print(table)
        if s.output.path:
            with open(s.output.path, "w") as fh:
                fh.write(table + "\n")
        return EXIT_OK if all(r.passed for r in results) else 1
    h = build_space(s)
    m = build_spinor_module(h.n)
    state = build_state(s, h, m)
    if s.mode == "energy":
        _emit({"space": h.label, "energy": energy_general(h, m, state)}, s)
    elif s.mode == "grad":
        gv = gradient(h, m, state, normalized=s.is_normalized)
        _emit(
            {
                "space": h.label,
                "normalized": s.is_normalized,
                "Q1": gv.Q1.tolist(),
                "Q1_coefficients": coeffs_of_metric(h, gv.Q1).tolist(),
                "Q2": _cmplx(gv.Q2),
            },
            s,
        )
    elif s.mode in ("flow", "normflow"):
        fo = s.flow
        integrator = "rk4" if fo.dt is not None and fo.integrator == "rk4" else fo.integrator
        spec = FlowSpec(
            h, state, s.is_normalized, fo.t_end, integrator, fo.dt, fo.rel_tol, fo.abs_tol, path="general", module=m
        )
        traj = integrate(spec)
        if s.output.path:
            write_trajectory(traj, s.output.path, s.output.format)
            log.info("wrote %d rows to %s", len(traj), s.output.path)
        fin = traj.final
        print(
            json.dumps(
                {
                    "termination": traj.termination,
                    "t_final": float(traj.times[-1]),
                    "steps": len(traj) - 1,
                    "energy": float(traj.energies[-1]),
                    "metric_coefficients": coeffs_of_metric(h, fin.g).tolist(),
                    "det_g": float(np.linalg.det(fin.g)),
                },
                indent=2,
            )
        )
    elif s.mode == "linearize":
        g = state.g
        diag_ok = is_invariant_metric(h, np.diag(np.arange(1.0, h.n + 1)))
        if diag_ok and np.abs(g - np.diag(np.diag(g))).max() == 0:
            point = np.diag(g)
        else:
            point = coeffs_of_metric(h, g)
        rep = linearize(h, m, point, normalized=s.is_normalized, phi=state.phi)
        _emit({"space": h.label, "normalized": s.is_normalized, **rep.to_dict()}, s)
    elif s.mode == "soliton":
        _emit({"space": h.label, **soliton_check(h, m, state).to_dict()}, s)
    elif s.mode == "diagonalize":
        if s.space != "bianchi":
            raise ConfigError("diagonalize: only defined for bianchi spaces")
        T, achieved = diagonal_standard_basis(state.g, s.eps)
        _emit(
            {"space": h.label, "T": T.tolist(), "diagonal": np.diag(T.T @ state.g @ T).tolist(), "residuals": achieved},
            s,
        )
    return EXIT_OK


# ------------------------------------------------------------------- argv


def _csv_floats(text, what):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--{what}: expected a comma-separated list of numbers, got {text!r}") from None


def _csv_complex(text):
    try:
        return [complex(x.strip().replace(" ", "")) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--spinor: expected comma-separated (complex) numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON scenario file; flags override its values")
    common.add_argument("--space", choices=SPACES)
    common.add_argument("--eps", help="Bianchi parameters, e.g. 1,1,1")
    common.add_argument("--F", dest="F", help="almost abelian matrix F, row-major comma list")
    common.add_argument("--metric", help="invariant-basis coefficients, diagonal entries or a row-major matrix")
    common.add_argument("--spinor", help="coefficients over the invariant spinor basis (complex allowed, e.g. 1,0.5j)")
    common.add_argument("--normalized", action="store_true", default=None, help="use the volume-normalized flow")
    common.add_argument("--t-end", type=float)
    common.add_argument("--dt", type=float, help="fixed step; selects the RK4 integrator")
    common.add_argument("--rel-tol", type=float)
    common.add_argument("--out", help="output file")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--seed", type=int)

    p = argparse.ArgumentParser(prog="spinflow", description="Homogeneous spinor flow toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("energy", "evaluate the spinorial energy"),
        ("grad", "negative gradient (Q1, Q2)"),
        ("flow", "integrate the flow and export the trajectory"),
        ("linearize", "linearize the flow at a metric"),
        ("soliton", "test for a scaling soliton"),
        ("diagonalize", "g-orthogonal standard basis (Bianchi)"),
        ("verify", "run the reproduction suite"),
    ):
        sub.add_parser(name, parents=[common], help=help_)
    return p


def scenario_from_args(args) -> Scenario:
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"--config: {exc}") from None
        d = _load_json(text)
        if not isinstance(d, dict):
            raise ConfigError("--config: expected a JSON object")
        if "space" in d and "mode" in d:
            d = scenario_to_dict(scenario_from_dict(d))
    else:
        d = {}
    mode = args.command
    if mode == "flow" and (args.normalized or d.get("mode") == "normflow"):
        mode = "normflow"
    d["mode"] = mode
    sp = dict(d.get("space", {}))
    if args.space:
        if sp.get("type") not in (None, args.space):
            sp = {}
        sp["type"] = args.space
    if args.eps is not None:
        sp["eps"] = _csv_floats(args.eps, "eps")
    if args.F is not None:
        vals = _csv_floats(args.F, "F")
        k = int(round(math.sqrt(len(vals))))
        if k * k != len(vals) or k == 0:
            raise ConfigError(f"--F: expected k*k entries, got {len(vals)}")
        sp["F"] = [vals[i * k : (i + 1) * k] for i in range(k)]
    if mode == "verify" and not sp:
        sp = {"type": "flag"}
    d["space"] = sp
    if args.metric is not None:
        d["metric"] = _csv_floats(args.metric, "metric")
    if args.spinor is not None:
        d["spinor"] = [[z.real, z.imag] for z in _csv_complex(args.spinor)]
    if args.normalized:
        d["normalized"] = True
    fo = dict(d.get("flow", {}))
    if args.t_end is not None:
        fo["t_end"] = args.t_end
    if args.dt is not None:
        fo["dt"] = args.dt
        fo["integrator"] = "rk4"
    if args.rel_tol is not None:
        fo["rel_tol"] = args.rel_tol
        fo["integrator"] = "adaptive"
    d["flow"] = fo
    out = dict(d.get("output", {}))
    if args.out is not None:
        out["path"] = args.out
    if args.format is not None:
        out["format"] = args.format
    elif args.out and args.out.endswith(".json") and "format" not in out:
        out["format"] = "json"
    d["output"] = out
    if args.seed is not None:
        d["seed"] = args.seed
    return scenario_from_dict(d)


def setup_logging():
    name = os.environ.get("SPINFLOW_LOG", "warn").lower()
    level = LOG_LEVELS.get(name)
    logging.basicConfig(level=level or logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if level is None:
        log.warning("SPINFLOW_LOG=%r not recognised; using warn", name)


VALUE_FLAGS = ("--eps", "--F", "--metric", "--spinor")


def _join_negative_values(argv):
    # "--eps -1,1,1" would otherwise be read as an unknown option
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and argv[i + 1][1:2] in set("0123456789."):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def run(argv=None) -> int:
    setup_logging()
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_negative_values(argv))
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        scenario = scenario_from_args(args)
        return run_scenario(scenario)
    except ConfigError as exc:
        print(f"spinflow: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError, ValueError, RuntimeError) as exc:
        print(f"spinflow: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
