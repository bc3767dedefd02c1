"""
Command-line driver: parse a JSON run configuration, build the model stack,
integrate, and emit a trajectory file plus a summary report.

Usage: simulate <config.json> [--out DIR] [--validate-only] [--seed N]

Exit codes: 0 success, 2 validation error, 3 integration failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import engine, forces, hamilton, twopolar
from .errors import SimulationError
from .inertia import Inertia
from .integrate import integrate_adaptive, integrate_fixed
from .kinematics import body_state
from .tensors import Metric, TwoPolarFactors, matrix_exponential

SCHEMA_VERSION = 1

_CONSTRAINTS = {k.value: k for k in engine.ConstraintKind}
_FORMALISMS = ("newton", "comoving", "hamiltonian", "two_polar")
_METHODS = ("rk4", "rkf45", "exact_exponential")
_FORMATS = ("csv", "json")


@dataclass
class Diagnostic:
    path: str
    message: str
    severity: str = "error"

    def as_dict(self):
        return {"path": self.path, "message": self.message,
                "severity": self.severity}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _metric_from(spec, n: int) -> Metric:
    if spec == "identity" or spec is None:
        return Metric.identity(n)
    return Metric(np.asarray(spec, dtype=float))


def _inertia_from(spec, n: int, eta: Metric) -> Inertia:
    mass = float(spec.get("mass", 1.0))
    j = spec.get("J", "isotropic:1.0")
    if isinstance(j, str):
        if not j.startswith("isotropic:"):
            raise ValueError("J must be a matrix or 'isotropic:<scalar>'")
        return Inertia.isotropic(mass, float(j.split(":", 1)[1]), eta)
    return Inertia(mass, np.asarray(j, dtype=float))


def _kinetic_model_from(spec, inertia, n: int):
    kind = spec.get("type", "dalembert")
    if kind == "dalembert":
        return hamilton.DAlembert(mass=inertia.mass, J=inertia.J)
    if kind == "spatial_affine":
        return hamilton.SpatialAffine(mass=float(spec.get("mass", 1.0)),
                                      I=float(spec["I"]), A=float(spec["A"]),
                                      B=float(spec.get("B", 0.0)))
    if kind == "material_affine":
        return hamilton.MaterialAffine(mass=float(spec.get("mass", 1.0)),
                                       I=float(spec["I"]), A=float(spec["A"]),
                                       B=float(spec.get("B", 0.0)))
    if kind == "doubly_affine":
        return hamilton.DoublyAffine(A=float(spec["A"]),
                                     B=float(spec.get("B", 0.0)))
    if kind == "general":
        return hamilton.GeneralEightParam(
            m1=float(spec.get("m1", 0.0)), m2=float(spec.get("m2", 0.0)),
            I1=float(spec.get("I1", 0.0)), I2=float(spec.get("I2", 0.0)),
            I3=float(spec.get("I3", 0.0)), I4=float(spec.get("I4", 0.0)),
            A=float(spec["A"]), B=float(spec.get("B", 0.0)))
    raise ValueError(f"unknown kinetic model type '{kind}'")


def _torque_model_from(spec, n: int):
    kind = spec["type"]
    if kind == "hyperelastic_quadratic":
        # U = 0.5 * sum_a c_a (K_a - K0_a)^2 with K0 of the undeformed state
        c = np.asarray(spec.get("coefficients", [1.0] * n), dtype=float)
        k0 = np.asarray(spec.get("reference",
                                 [float(n)] * n), dtype=float)

        def u_fun(K, c=c, k0=k0):
            return 0.5 * float(np.sum(c * (K - k0) ** 2))

        def du_fun(K, c=c, k0=k0):
            return c * (K - k0)

        return forces.HyperelasticInvariant(U=u_fun, grad_U=du_fun)
    if kind == "hooke_isotropic":
        return forces.HookeIsotropic(lam=float(spec["lam"]),
                                     mu=float(spec["mu"]))
    if kind == "hooke_green_shifted":
        return forces.HookeGreenShifted(lam=float(spec["lam"]),
                                        mu=float(spec["mu"]))
    if kind == "hooke_anisotropic":
        return forces.HookeAnisotropic(
            Ctensor=np.asarray(spec["Ctensor"], dtype=float))
    if kind == "viscous_continuum":
        return forces.ViscousContinuum(eta_vis=float(spec["eta_vis"]),
                                       zeta=float(spec["zeta"]),
                                       Vol0=float(spec.get("Vol0", 1.0)))
    if kind == "viscous_discrete":
        return forces.ViscousDiscrete(alpha=float(spec["alpha"]),
                                      beta=float(spec["beta"]))
    if kind == "external_friction":
        return forces.ExternalFriction(alpha=float(spec["alpha"]),
                                       beta=float(spec["beta"]),
                                       gamma=float(spec["gamma"]))
    if kind == "pressure":
        return forces.Pressure(p=float(spec["p"]))
    if kind == "constant_force":
        return forces.ConstantBodyForce(
            field=np.asarray(spec["field"], dtype=float))
    raise ValueError(f"unknown torque model type '{kind}'")


def _lattice_model_from(spec):
    kind = spec["type"]
    if kind == "hyperbolic_casimir":
        return twopolar.HyperbolicCasimir(alpha=float(spec["alpha"]))
    if kind == "dalembert_isotropic":
        return twopolar.DAlembertIsotropic(I=float(spec["I"]))
    if kind == "sutherland_compact":
        return twopolar.SutherlandCompact(A=float(spec["A"]))
    if kind == "two_dim_closed":
        return twopolar.TwoDimClosed(A=float(spec["A"]))
    raise ValueError(f"unknown lattice model type '{kind}'")


def _random_state(n: int, seed: int, scale: float):
    rng = np.random.default_rng(seed)
    phi = np.eye(n) + scale * rng.standard_normal((n, n))
    while np.linalg.det(phi) <= 0.1:
        phi = np.eye(n) + scale * rng.standard_normal((n, n))
    return {"x": rng.standard_normal(n) * scale,
            "v": rng.standard_normal(n) * scale,
            "phi": phi,
            "phidot": rng.standard_normal((n, n)) * scale}


def expand_sweep(config: dict):
    """Cross product over the 'sweep' key: {'dotted.path': [values, ...]}."""
    sweep = config.get("sweep")
    if not sweep:
        yield None, config
        return
    keys = sorted(sweep.keys())
    for combo in itertools.product(*(sweep[k] for k in keys)):
        out = json.loads(json.dumps({k: v for k, v in config.items()
                                     if k != "sweep"}))
        for key, val in zip(keys, combo):
            node = out
            parts = key.split(".")
            for part in parts[:-1]:
                node = node[part]
            node[parts[-1]] = val
        yield "_".join(str(v) for v in combo), out


def validate(config: dict) -> list:
    """Collect diagnostics; an empty list means the run can start."""
    diags = []

    def err(path, msg):
        diags.append(Diagnostic(path, msg))

    if config.get("schema_version") != SCHEMA_VERSION:
        err("schema_version", f"expected {SCHEMA_VERSION}")
        return diags
    n = config.get("dimension")
    if not isinstance(n, int) or n < 1:
        err("dimension", "must be a positive integer")
        return diags
    try:
        g = _metric_from(config.get("metric_g", "identity"), n)
        eta = _metric_from(config.get("metric_eta", "identity"), n)
    except Exception as exc:
        err("metric_g/metric_eta", str(exc))
        return diags
    formalism = config.get("formalism", "newton")
    if formalism not in _FORMALISMS:
        err("formalism", f"must be one of {_FORMALISMS}")
        return diags
    integ = config.get("integrator", {})
    method = integ.get("method", "rk4")
    if method not in _METHODS:
        err("integrator.method", f"must be one of {_METHODS}")
    if float(integ.get("dt", 1e-3)) <= 0.0:
        err("integrator.dt", "must be positive")
    if float(integ.get("t_end", 1.0)) <= 0.0:
        err("integrator.t_end", "must be positive")
    outputs = config.get("outputs", {})
    if outputs.get("format", "csv") not in _FORMATS:
        err("outputs.format", f"must be one of {_FORMATS}")
    if int(outputs.get("stride", 1)) < 1:
        err("outputs.stride", "must be >= 1")

    inertia = None
    if "inertia" in config or formalism in ("newton", "comoving"):
        try:
            inertia = _inertia_from(config.get("inertia", {}), n, eta)
        except Exception as exc:
            err("inertia", str(exc))
    models = []
    for i, spec in enumerate(config.get("torque_models", [])):
        try:
            models.append(_torque_model_from(spec, n))
        except Exception as exc:
            err(f"torque_models[{i}]", str(exc))
    kinetic = None
    if formalism == "hamiltonian" or "kinetic_model" in config:
        try:
            kinetic = _kinetic_model_from(config.get("kinetic_model", {}),
                                          inertia or _inertia_from({}, n, eta),
                                          n)
        except SimulationError as exc:
            err("kinetic_model", f"{type(exc).__name__}: {exc}")
        except Exception as exc:
            err("kinetic_model", str(exc))
    if formalism == "two_polar":
        if "lattice_model" not in config:
            err("lattice_model", "required for the two_polar formalism")
        else:
            try:
                _lattice_model_from(config["lattice_model"])
            except Exception as exc:
                err("lattice_model", str(exc))
        ist = config.get("initial_state", {})
        for key in ("q", "p"):
            if key not in ist:
                err(f"initial_state.{key}", "required for two_polar runs")
        if any(k in ist for k in ("x", "v")):
            err("initial_state", "two_polar runs carry no translational data")
    if method == "exact_exponential":
        if formalism != "hamiltonian":
            err("integrator.method",
                "exact_exponential requires the hamiltonian formalism")
        if not isinstance(kinetic, hamilton.DoublyAffine):
            err("integrator.method",
                "exact_exponential requires the doubly affine (I=0) model")
        if config.get("torque_models"):
            err("integrator.method", "exact_exponential is geodetic only")
    constraint = config.get("constraint", "unconstrained")
    if constraint not in _CONSTRAINTS:
        err("constraint", f"must be one of {sorted(_CONSTRAINTS)}")
        constraint = "unconstrained"
    if constraint != "unconstrained" and formalism not in ("newton",):
        err("constraint", "constrained runs use the newton formalism")
    # initial state checks for newton-chart runs
    if formalism in ("newton", "comoving") and not diags:
        ist = config.get("initial_state")
        if ist is None:
            err("initial_state", "missing")
        else:
            try:
                if "random" in ist:
                    ist = _random_state(n, int(config.get("_seed", 0)),
                                        float(ist.get("scale", 0.3)))
                state = body_state(ist["x"], ist["phi"], ist["v"],
                                   ist["phidot"])
                system = engine.constrained_rhs(
                    _CONSTRAINTS[constraint], inertia,
                    forces.Sum(tuple(models)), g, eta) \
                    if constraint != "unconstrained" else \
                    engine.unconstrained_rhs(inertia,
                                             forces.Sum(tuple(models)), g, eta)
                if system.check_initial is not None:
                    system.check_initial(state)
            except SimulationError as exc:
                err("initial_state", f"{type(exc).__name__}: {exc}")
            except Exception as exc:
                err("initial_state", str(exc))
    known = set(_monitor_catalog(n, formalism))
    for name in outputs.get("monitors", []):
        if name not in known:
            err("outputs.monitors", f"unknown monitor '{name}'")
    return diags


def _monitor_catalog(n: int, formalism: str) -> list:
    base = ["energy", "C1", "C2", "normS", "normV", "detphi", "residual",
            "power_dissipative"]
    base += [f"kappa{i}" for i in range(n)] + [f"xi{i}" for i in range(n)]
    if formalism == "two_polar":
        base = ["energy", "normS", "normV"]
        if n == 2:
            base += ["m_ampl", "nu_lat"]
    return base


def _default_monitors(n: int, formalism: str) -> list:
    if formalism == "two_polar":
        return ["energy"] + (["m_ampl", "nu_lat"] if n == 2 else [])
    return ["energy", "C1", "C2", "normS", "normV", "detphi", "residual"]


class _Recorder:
    def __init__(self, stride: int, columns, monitor_fns, to_state):
        self.stride = stride
        self.columns = columns
        self.monitor_fns = monitor_fns
        self.to_state = to_state
        self.rows = []

    def __call__(self, i, t, y):
        if i % self.stride:
            return
        state = self.to_state(y)
        row = [t] + list(np.asarray(self.columns(state)).ravel())
        row += [fn(t, state) for fn in self.monitor_fns]
        self.rows.append(row)


def _write_output(path: Path, fmt: str, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        path.write_text("\n".join(lines) + "\n")
    else:
        doc = {"schema": list(header),
               "rows": [[float(_fmt(v)) for v in row] for row in rows]}
        path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def run_one(config: dict, out_dir: Path, run_id: str, seed: int = 0) -> dict:
    """Execute one validated configuration; returns the summary dict."""
    n = config["dimension"]
    g = _metric_from(config.get("metric_g", "identity"), n)
    eta = _metric_from(config.get("metric_eta", "identity"), n)
    formalism = config.get("formalism", "newton")
    integ = config.get("integrator", {})
    method = integ.get("method", "rk4")
    dt = float(integ.get("dt", 1e-3))
    t_end = float(integ.get("t_end", 1.0))
    n_steps = int(round(t_end / dt))
    outputs = config.get("outputs", {})
    stride = int(outputs.get("stride", 1))
    fmt = outputs.get("format", "csv")
    out_path = out_dir / outputs.get("path", f"{run_id}.{fmt}")
    monitor_names = outputs.get("monitors", _default_monitors(n, formalism))
    oracle_checks = []
    classification = None

    if formalism == "two_polar":
        model = _lattice_model_from(config["lattice_model"])
        ist = config["initial_state"]
        q = np.asarray(ist["q"], dtype=float)
        p = np.asarray(ist["p"], dtype=float)
        m = n * (n - 1) // 2
        rho = np.asarray(ist.get("rho_hat", np.zeros((n, n))), dtype=float)
        tau = np.asarray(ist.get("tau_hat", np.zeros((n, n))), dtype=float)
        L0 = np.asarray(ist.get("L", np.eye(n)), dtype=float)
        R0 = np.asarray(ist.get("R", np.eye(n)), dtype=float)
        factors = TwoPolarFactors(L=L0, R=R0, q=q, Q=np.exp(q))
        state0 = twopolar.TwoPolarState(factors=factors, p=p, rho_hat=rho,
                                        tau_hat=tau)
        with_legs = bool(config.get("integrate_legs", False))

        def columns(s):
            iu = np.triu_indices(n, 1)
            return np.concatenate([s.q, s.p, s.rho_hat[iu], s.tau_hat[iu]])

        iu = np.triu_indices(n, 1)
        header = (["t"] + [f"q{i}" for i in range(n)]
                  + [f"p{i}" for i in range(n)]
                  + [f"rho_{a}_{b}" for a, b in zip(*iu)]
                  + [f"tau_{a}_{b}" for a, b in zip(*iu)] + monitor_names)

        def monitor_fn(name):
            if name == "energy":
                return lambda t, s: twopolar.lattice_hamiltonian(model, s)
            if name == "m_ampl":
                return lambda t, s: s.m_ampl
            if name == "nu_lat":
                return lambda t, s: s.nu_lat
            if name == "normS":
                return lambda t, s: float(np.sqrt(max(
                    0.0, -0.5 * np.trace(s.spin() @ s.spin()))))
            if name == "normV":
                return lambda t, s: float(np.sqrt(max(
                    0.0, -0.5 * np.trace(s.vorticity() @ s.vorticity()))))
            raise ValueError(name)

        fns = [monitor_fn(v) for v in monitor_names]
        rec_rows = []

        def observer(i, t, s):
            if i % stride:
                return
            row = [t] + list(columns(s)) + [fn(t, s) for fn in fns]
            rec_rows.append(row)

        twopolar.integrate_lattice(model, state0, dt, n_steps,
                                   with_legs=with_legs, observer=observer)
        if n == 2:
            classification = twopolar.threshold_classify(state0).value
        rows = rec_rows
    elif formalism == "hamiltonian":
        inertia = _inertia_from(config.get("inertia", {}), n, eta)
        kinetic = _kinetic_model_from(config.get("kinetic_model", {}),
                                      inertia, n)
        h_parts = [hamilton.kinetic_phase_function(kinetic, g, eta)]
        for spec in config.get("torque_models", []):
            model = _torque_model_from(spec, n)
            if isinstance(model, forces.HyperelasticInvariant):
                h_parts.append(hamilton.hyperelastic_phase_potential(
                    model.U, model.grad_U, g, eta))
            elif isinstance(model, forces.ConstantBodyForce):
                h_parts.append(hamilton.constant_force_potential(model.field, g))
            else:
                raise SimulationError(
                    "hamiltonian formalism supports hyperelastic and "
                    "constant-force models only")
        H = hamilton.add_phase_functions(*h_parts)
        system = hamilton.hamiltonian_rhs(H, n)
        ist = config["initial_state"]
        if "P" in ist:
            state0 = hamilton.phase_state(ist.get("x", np.zeros(n)),
                                          ist["phi"],
                                          ist.get("p", np.zeros(n)), ist["P"])
        else:
            body0 = body_state(ist.get("x", np.zeros(n)), ist["phi"],
                               ist.get("v", np.zeros(n)), ist["phidot"])
            state0 = hamilton.legendre(kinetic, body0, g, eta)
        mons = hamilton.phase_monitors(g, eta, H)
        fns = [mons[v] for v in monitor_names]
        header = (["t"] + [f"x{i}" for i in range(n)]
                  + [f"p{i}" for i in range(n)]
                  + [f"phi_{i}_{j}" for i in range(n) for j in range(n)]
                  + [f"P_{i}_{j}" for i in range(n) for j in range(n)]
                  + monitor_names)
        rec = _Recorder(stride, lambda s: hamilton.pack_phase(s),
                        fns, system.unpack)
        y0 = hamilton.pack_phase(state0)
        if method == "exact_exponential":
            body0 = hamilton.legendre_inverse(kinetic, state0, g, eta)
            E = body0.phidot @ np.linalg.inv(body0.phi)
            sigma0 = state0.Sigma
            rec(0, 0.0, y0)
            for i in range(1, n_steps + 1):
                t = i * dt
                phi_t = matrix_exponential(E * t) @ body0.phi
                P_t = np.linalg.inv(phi_t) @ sigma0
                rec(i, t, hamilton.pack_phase(hamilton.phase_state(
                    state0.x, phi_t, state0.p, P_t)))
            # oracle: the rk4 rerun must match the exponential propagator
            _, y_rk = integrate_fixed(system.f, y0, 0.0, dt, n_steps)
            phi_rk = system.unpack(y_rk).phi_mat
            phi_ex = matrix_exponential(E * t_end) @ body0.phi
            rel = float(np.linalg.norm(phi_rk - phi_ex)
                        / np.linalg.norm(phi_ex))
            oracle_checks.append({"name": "exponential_vs_rk4",
                                  "status": "PASS" if rel < 1e-8 else "FAIL",
                                  "relative_error": rel})
        elif method == "rkf45":
            integrate_adaptive(system.f, y0, 0.0, t_end,
                               abs_tol=float(integ.get("abs_tol", 1e-10)),
                               rel_tol=float(integ.get("rel_tol", 1e-10)),
                               h0=dt, observer=rec)
        else:
            integrate_fixed(system.f, y0, 0.0, dt, n_steps, observer=rec)
        rows = rec.rows
    else:  # newton / comoving
        inertia = _inertia_from(config.get("inertia", {}), n, eta)
        model = forces.Sum(tuple(_torque_model_from(s, n)
                                 for s in config.get("torque_models", [])))
        kind = _CONSTRAINTS[config.get("constraint", "unconstrained")]
        if formalism == "comoving":
            system = engine.comoving_rhs(inertia, model, g, eta)
        elif kind is engine.ConstraintKind.UNCONSTRAINED:
            system = engine.unconstrained_rhs(inertia, model, g, eta)
        else:
            system = engine.constrained_rhs(kind, inertia, model, g, eta)
        ist = config["initial_state"]
        if "random" in ist:
            ist = _random_state(n, seed, float(ist.get("scale", 0.3)))
        state0 = body_state(ist["x"], ist["phi"], ist["v"], ist["phidot"])
        if system.check_initial is not None:
            system.check_initial(state0)
        fns = [system.monitors[v] for v in monitor_names]
        header = (["t"] + [f"x{i}" for i in range(n)]
                  + [f"v{i}" for i in range(n)]
                  + [f"phi_{i}_{j}" for i in range(n) for j in range(n)]
                  + [f"phidot_{i}_{j}" for i in range(n) for j in range(n)]
                  + monitor_names)
        rec = _Recorder(stride, engine.pack_newton, fns, system.unpack)
        y0 = system.pack(state0)
        post = (lambda t, y: system.stabilize(y)) if system.stabilize else None
        if method == "rkf45":
            integrate_adaptive(system.f, y0, 0.0, t_end,
                               abs_tol=float(integ.get("abs_tol", 1e-10)),
                               rel_tol=float(integ.get("rel_tol", 1e-10)),
                               h0=dt,
                               post_step=post, observer=rec)
        else:
            integrate_fixed(system.f, y0, 0.0, dt, n_steps,
                            post_step=post, observer=rec)
        rows = rec.rows

    _write_output(out_path, fmt, header, rows)
    arr = np.asarray(rows, dtype=float)
    mon_summary = {}
    first_mon = len(header) - len(monitor_names)
    for k, name in enumerate(monitor_names):
        vals = arr[:, first_mon + k]
        mon_summary[name] = {"max_drift": _fmt(np.max(np.abs(vals - vals[0]))),
                             "final": _fmt(vals[-1])}
    summary = {"run_id": run_id, "monitors": mon_summary,
               "oracle_checks": oracle_checks}
    if classification is not None:
        summary["classification"] = classification
    summary_path = out_dir / f"{run_id}_summary.json"
    summary_path.write_text(json.dumps(summary, indent=1, sort_keys=True)
                            + "\n")
    return summary


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Affine-body dynamics runner")
    parser.add_argument("config", type=Path)
    parser.add_argument("--out", type=Path, default=None)
    parser.add_argument("--validate-only", action="store_true")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized test-state generation only")
    args = parser.parse_args(argv)

    try:
        config = json.loads(args.config.read_text())
    except Exception as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2

    out_dir = args.out if args.out is not None else args.config.parent
    base_id = args.config.stem
    failures = 0
    for suffix, cfg in expand_sweep(config):
        cfg["_seed"] = args.seed
        diags = validate(cfg)
        if diags:
            for d in diags:
                print(f"{args.config}:{d.path}: {d.severity}: {d.message}",
                      file=sys.stderr)
            return 2
        if args.validate_only:
            continue
        run_id = base_id if suffix is None else f"{base_id}_{suffix}"
        try:
            summary = run_one(cfg, out_dir, run_id, seed=args.seed)
        except SimulationError as exc:
            print(f"integration failure [{run_id}]: "
                  f"{type(exc).__name__}: {exc}", file=sys.stderr)
            failures += 1
            continue
        print(f"{run_id}: ok ({out_dir})")
        for check in summary["oracle_checks"]:
            print(f"  oracle {check['name']}: {check['status']}")
    if args.validate_only:
        print("configuration valid")
        return 0
    return 3 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
