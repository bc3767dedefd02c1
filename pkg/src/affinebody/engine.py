"""
Reaction-free equations of motion for the Newton/d'Alembert route.

The unconstrained balance laws are m x'' = F and phi J phi''^T = N.  Each
constrained variant solves the same balance with a Lagrange-multiplier term
ranging over the reaction space singled out by the d'Alembert principle
(reactions do no work on admissible gyrations), plus the differentiated
constraint; optional post-step projection removes the slow numerical drift.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConstraintViolation, SingularConfiguration, SingularInertia
from .forces import TorqueModel, torque
from .inertia import Inertia, kinematical_momenta
from .kinematics import BodyState, body_state
from .tensors import Metric, two_polar

CONSTRAINT_TOL = 1e-10


class ConstraintKind(enum.Enum):
    UNCONSTRAINED = "unconstrained"
    GYROSCOPIC = "gyroscopic"
    SHAPE_PRESERVING = "shape_preserving"
    ISOCHORIC = "isochoric"
    DILATATIONAL = "dilatational"
    ROTATION_FREE_SPATIAL = "rotation_free_spatial"
    ROTATION_FREE_MATERIAL = "rotation_free_material"

    def internal_dof(self, n: int) -> int:
        return {
            ConstraintKind.UNCONSTRAINED: n * n,
            ConstraintKind.GYROSCOPIC: n * (n - 1) // 2,
            ConstraintKind.SHAPE_PRESERVING: n * (n - 1) // 2 + 1,
            ConstraintKind.ISOCHORIC: n * n - 1,
            ConstraintKind.DILATATIONAL: 1,
            ConstraintKind.ROTATION_FREE_SPATIAL: n * n,
            ConstraintKind.ROTATION_FREE_MATERIAL: n * n,
        }[self]


@dataclass(frozen=True)
class EquationSystem:
    """Flat ODE plus the BodyState-level accessors used by tests and drivers."""

    kind: ConstraintKind
    f: Callable[[float, np.ndarray], np.ndarray]
    pack: Callable[[BodyState], np.ndarray]
    unpack: Callable[[np.ndarray], BodyState]
    rhs: Callable[[BodyState], tuple]
    constraint_residual: Callable[[BodyState], np.ndarray]
    monitors: dict = field(default_factory=dict)
    stabilize: Optional[Callable[[np.ndarray], np.ndarray]] = None
    check_initial: Optional[Callable[[BodyState], None]] = None


def pack_newton(state: BodyState) -> np.ndarray:
    return np.concatenate([state.x, state.v, state.phi.ravel(),
                           state.phidot.ravel()])


def unpack_newton(y: np.ndarray, n: int) -> BodyState:
    x = y[:n]
    v = y[n:2 * n]
    phi = y[2 * n:2 * n + n * n].reshape(n, n)
    phidot = y[2 * n + n * n:].reshape(n, n)
    return body_state(x, phi, v, phidot)


def _solve(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularConfiguration(f"singular linear system in {what}") from exc


def _balance_block(phi: np.ndarray, J: np.ndarray) -> np.ndarray:
    """(n^2, n^2) matrix of phidd -> vec(phi J phidd^T), row-major vec."""
    n = phi.shape[0]
    m = phi @ J
    return np.einsum("ib,jk->ijkb", m, np.eye(n)).reshape(n * n, n * n)


def _sym_basis(n: int) -> list:
    out = []
    for a in range(n):
        for b in range(a, n):
            e = np.zeros((n, n))
            e[a, b] += 1.0
            e[b, a] += 1.0
            out.append(e)
    return out


def _antisym_basis(n: int) -> list:
    out = []
    for a in range(n):
        for b in range(a + 1, n):
            e = np.zeros((n, n))
            e[a, b] = 1.0
            e[b, a] = -1.0
            out.append(e)
    return out


def _sym_perp_basis(w: np.ndarray) -> list:
    """Frobenius-orthonormal symmetric matrices orthogonal to the symmetric w.

    Used both for shape-preserving reactions (perp to g under Tr(N g) = 0) and
    for the matching constraint functionals (perp to the pure-g direction).
    """
    n = w.shape[0]
    wn = w / np.linalg.norm(w)
    cands = [e - np.sum(e * wn) * wn for e in _sym_basis(n)]
    # rank-reduce: the projection introduces one linear dependency
    vecs = np.array([c.ravel() for c in cands]).T
    q, r = np.linalg.qr(vecs)
    keep = [i for i in range(r.shape[0]) if abs(r[i, i]) > 1e-12]
    return [q[:, i].reshape(n, n) for i in keep]


def _dilatation_scale(phi: np.ndarray, g: Metric, eta: Metric) -> float:
    n = phi.shape[0]
    return float(np.linalg.det(phi) ** (1.0 / n)
                 * (np.linalg.det(g.mat) / np.linalg.det(eta.mat)) ** (0.5 / n))


class _Constrained:
    """Per-kind reaction bases, constraint rows, residuals and projections."""

    def __init__(self, kind: ConstraintKind, inertia: Inertia, g: Metric,
                 eta: Metric):
        self.kind = kind
        self.inertia = inertia
        self.g = g
        self.eta = eta
        n = g.dim
        if kind is ConstraintKind.GYROSCOPIC:
            self.reactions = _sym_basis(n)
        elif kind is ConstraintKind.ISOCHORIC:
            self.reactions = [g.inv.copy()]
        elif kind is ConstraintKind.SHAPE_PRESERVING:
            self.reactions = _sym_perp_basis(g.mat)
        elif kind is ConstraintKind.ROTATION_FREE_SPATIAL:
            self.reactions = _antisym_basis(n)
        elif kind is ConstraintKind.ROTATION_FREE_MATERIAL:
            self.reactions = None  # state-dependent, built on demand
        else:
            self.reactions = []
        self.iso_target = np.sqrt(np.linalg.det(eta.mat) / np.linalg.det(g.mat))

    # -- constraint rows at acceleration level -------------------------------

    def rows(self, state: BodyState):
        """List of (functional_matrix C, rhs) with sum(C * phidd) = rhs."""
        g, eta = self.g, self.eta
        phi = state.phi
        n = phi.shape[0]
        pinv = np.linalg.inv(phi)
        omega = state.phidot @ pinv
        rows = []
        if self.kind is ConstraintKind.GYROSCOPIC:
            gphi = g.mat @ phi
            vterm = state.phidot.T @ g.mat @ state.phidot
            for a in range(n):
                for b in range(a, n):
                    c = np.zeros((n, n))
                    c[:, b] += gphi[:, a]
                    c[:, a] += gphi[:, b]
                    rows.append((c, -2.0 * vterm[a, b]))
        elif self.kind is ConstraintKind.ISOCHORIC:
            omh = pinv @ state.phidot
            rows.append((pinv.T, float(np.trace(omh @ omh))))
        elif self.kind is ConstraintKind.SHAPE_PRESERVING:
            gom2 = g.mat @ omega @ omega
            for t in self.reactions:
                # row: <T, g phidd phi^-1>_F = <T, g Omega^2>_F
                rows.append((g.mat @ t @ pinv.T, float(np.sum(t * gom2))))
        elif self.kind is ConstraintKind.ROTATION_FREE_SPATIAL:
            gom2 = g.mat @ omega @ omega
            for a in range(n):
                for b in range(a + 1, n):
                    c = np.outer(g.mat[a, :], pinv[:, b]) \
                        - np.outer(g.mat[b, :], pinv[:, a])
                    rows.append((c, gom2[a, b] - gom2[b, a]))
        elif self.kind is ConstraintKind.ROTATION_FREE_MATERIAL:
            omh = pinv @ state.phidot
            eo2 = eta.mat @ omh @ omh
            epinv = eta.mat @ pinv
            for a in range(n):
                for b in range(a + 1, n):
                    c = np.zeros((n, n))
                    c[:, b] += epinv[a, :]
                    c[:, a] -= epinv[b, :]
                    rows.append((c, eo2[a, b] - eo2[b, a]))
        return rows

    def reaction_basis(self, state: BodyState):
        if self.kind is ConstraintKind.ROTATION_FREE_MATERIAL:
            phi = state.phi
            c_tensor = np.linalg.inv(phi).T @ self.eta.mat @ np.linalg.inv(phi)
            return [a @ c_tensor @ self.g.inv
                    for a in _antisym_basis(phi.shape[0])]
        return self.reactions

    # -- residual and verification -------------------------------------------

    def residual(self, state: BodyState) -> np.ndarray:
        g, eta = self.g, self.eta
        phi = state.phi
        if self.kind is ConstraintKind.GYROSCOPIC:
            return (phi.T @ g.mat @ phi - eta.mat).ravel()
        if self.kind is ConstraintKind.ISOCHORIC:
            return np.array([np.linalg.det(phi) - self.iso_target])
        if self.kind in (ConstraintKind.SHAPE_PRESERVING,
                         ConstraintKind.DILATATIONAL):
            lam = _dilatation_scale(phi, g, eta)
            return (phi.T @ g.mat @ phi - lam ** 2 * eta.mat).ravel()
        if self.kind is ConstraintKind.ROTATION_FREE_SPATIAL:
            omega = state.phidot @ np.linalg.inv(phi)
            return (omega - g.transpose(omega)).ravel()
        if self.kind is ConstraintKind.ROTATION_FREE_MATERIAL:
            omh = np.linalg.inv(phi) @ state.phidot
            return (omh - eta.transpose(omh)).ravel()
        return np.zeros(0)

    def check_initial(self, state: BodyState):
        g = self.g
        phi = state.phi
        res = float(np.max(np.abs(self.residual(state)))) if \
            self.kind is not ConstraintKind.UNCONSTRAINED else 0.0
        scale = max(1.0, float(np.max(np.abs(phi))))
        if res > CONSTRAINT_TOL * scale:
            raise ConstraintViolation(
                f"{self.kind.value}: holonomic residual {res:.3e}")
        omega = state.phidot @ np.linalg.inv(phi)
        if self.kind in (ConstraintKind.GYROSCOPIC,
                         ConstraintKind.SHAPE_PRESERVING,
                         ConstraintKind.DILATATIONAL,
                         ConstraintKind.ISOCHORIC):
            # velocity-level compatibility of the holonomic constraint
            if self.kind is ConstraintKind.GYROSCOPIC:
                bad = float(np.max(np.abs(g.sym(omega))))
            elif self.kind is ConstraintKind.ISOCHORIC:
                bad = abs(float(np.trace(omega)))
            elif self.kind is ConstraintKind.DILATATIONAL:
                bad = float(np.max(np.abs(
                    omega - np.trace(omega) / phi.shape[0] * np.eye(phi.shape[0]))))
            else:
                sym = g.sym(omega)
                bad = float(np.max(np.abs(
                    sym - np.trace(sym) / phi.shape[0] * np.eye(phi.shape[0]))))
            if bad > CONSTRAINT_TOL * max(1.0, float(np.max(np.abs(omega))), 1.0):
                raise ConstraintViolation(
                    f"{self.kind.value}: velocity constraint violated ({bad:.3e})")
        vres = self.residual(state)
        if self.kind in (ConstraintKind.ROTATION_FREE_SPATIAL,
                         ConstraintKind.ROTATION_FREE_MATERIAL):
            bad = float(np.max(np.abs(vres))) if vres.size else 0.0
            if bad > CONSTRAINT_TOL * max(1.0, float(np.max(np.abs(omega)))):
                raise ConstraintViolation(
                    f"{self.kind.value}: velocity constraint violated ({bad:.3e})")

    # -- post-step projection --------------------------------------------------

    def project(self, state: BodyState) -> BodyState:
        g, eta = self.g, self.eta
        phi = state.phi
        n = phi.shape[0]
        if self.kind is ConstraintKind.UNCONSTRAINED:
            return state
        if self.kind is ConstraintKind.ISOCHORIC:
            new_phi = phi * (self.iso_target / np.linalg.det(phi)) ** (1.0 / n)
            omega = state.phidot @ np.linalg.inv(new_phi)
            omega -= (np.trace(omega) / n) * np.eye(n)
            return body_state(state.x, new_phi, state.v, omega @ new_phi)
        f = two_polar(phi, g, eta)
        iso = f.L @ f.R.T @ eta.mat
        if self.kind is ConstraintKind.GYROSCOPIC:
            new_phi = iso
            omega = state.phidot @ np.linalg.inv(new_phi)
            omega = omega - g.sym(omega)
        elif self.kind in (ConstraintKind.SHAPE_PRESERVING,
                           ConstraintKind.DILATATIONAL):
            lam = float(np.prod(f.Q) ** (1.0 / n))
            new_phi = lam * iso
            omega = state.phidot @ np.linalg.inv(new_phi)
            alpha = np.trace(omega) / n
            if self.kind is ConstraintKind.DILATATIONAL:
                omega = alpha * np.eye(n)
            else:
                omega = omega - g.sym(omega) + alpha * np.eye(n)
        elif self.kind is ConstraintKind.ROTATION_FREE_SPATIAL:
            new_phi = phi
            omega = g.sym(state.phidot @ np.linalg.inv(phi))
        else:  # rotation-free material
            omh = eta.sym(np.linalg.inv(phi) @ state.phidot)
            return body_state(state.x, phi, state.v, phi @ omh)
        return body_state(state.x, new_phi, state.v, omega @ new_phi)


def _accelerations(helper: _Constrained, model: TorqueModel, state: BodyState):
    g, eta, inertia = helper.g, helper.eta, helper.inertia
    n = state.dim
    N, _, F = torque(model, state, g, eta)
    a_x = F / inertia.mass
    phi = state.phi
    if helper.kind is ConstraintKind.UNCONSTRAINED:
        pinv = np.linalg.inv(phi)
        a_phi = N.T @ pinv.T @ inertia.Jinv
        return a_x, a_phi
    if helper.kind is ConstraintKind.DILATATIONAL:
        lam = _dilatation_scale(phi, g, eta)
        denom = lam * float(np.sum(eta.mat * inertia.J))
        lam_dd_over = float(np.sum(g.mat * N)) / denom / lam
        return a_x, lam_dd_over * phi
    basis = helper.reaction_basis(state)
    rows = helper.rows(state)
    k = len(basis)
    nn = n * n
    a_mat = np.zeros((nn + k, nn + k))
    rhs_vec = np.zeros(nn + k)
    a_mat[:nn, :nn] = _balance_block(phi, inertia.J)
    for r, b in enumerate(basis):
        a_mat[:nn, nn + r] = -b.ravel()
    rhs_vec[:nn] = N.ravel()
    for i, (c, val) in enumerate(rows):
        a_mat[nn + i, :nn] = c.ravel()
        rhs_vec[nn + i] = val
    if len(rows) != k:
        raise RuntimeError("constraint bookkeeping mismatch")
    sol = _solve(a_mat, rhs_vec, f"{helper.kind.value} projection")
    return a_x, sol[:nn].reshape(n, n)


def _newton_system(kind: ConstraintKind, inertia: Inertia, model: TorqueModel,
                   g: Metric, eta: Metric, stabilization: bool = True,
                   monitors: Optional[dict] = None) -> EquationSystem:
    n = g.dim
    if inertia.dim != n or eta.dim != n:
        raise ValueError("dimension mismatch between metrics and inertia")
    helper = _Constrained(kind, inertia, g, eta)

    def rhs(state: BodyState):
        return _accelerations(helper, model, state)

    def f(t: float, y: np.ndarray) -> np.ndarray:
        state = unpack_newton(y, n)
        a_x, a_phi = rhs(state)
        return np.concatenate([state.v, a_x, state.phidot.ravel(),
                               a_phi.ravel()])

    stab = None
    if stabilization and kind is not ConstraintKind.UNCONSTRAINED:
        def stab(y: np.ndarray) -> np.ndarray:
            return pack_newton(helper.project(unpack_newton(y, n)))

    return EquationSystem(
        kind=kind, f=f, pack=pack_newton,
        unpack=lambda y: unpack_newton(y, n), rhs=rhs,
        constraint_residual=helper.residual,
        monitors=monitors if monitors is not None
        else standard_monitors(inertia, model, g, eta, helper.residual),
        stabilize=stab, check_initial=helper.check_initial)


def unconstrained_rhs(inertia: Inertia, model: TorqueModel, g: Metric,
                      eta: Metric) -> EquationSystem:
    """m x'' = F and phi J phi''^T = N, solved for the accelerations."""
    return _newton_system(ConstraintKind.UNCONSTRAINED, inertia, model, g, eta)


def constrained_rhs(kind: ConstraintKind, inertia: Inertia, model: TorqueModel,
                    g: Metric, eta: Metric,
                    stabilization: bool = True) -> EquationSystem:
    """d'Alembert-projected equations for one of the five constraint classes."""
    return _newton_system(kind, inertia, model, g, eta, stabilization)


def comoving_rhs(inertia: Inertia, model: TorqueModel, g: Metric,
                 eta: Metric) -> EquationSystem:
    """
    Affine Euler equations: the same dynamics integrated in the co-moving
    chart (x, vhat, phi, Omegahat), with

        m dvhat/dt = -m Omegahat vhat + Fhat,
        dOmegahat/dt = -Omegahat^2 + Nhat^T J^-1.
    """
    n = g.dim

    def pack(state: BodyState) -> np.ndarray:
        pinv = np.linalg.inv(state.phi)
        return np.concatenate([state.x, pinv @ state.v, state.phi.ravel(),
                               (pinv @ state.phidot).ravel()])

    def unpack(y: np.ndarray) -> BodyState:
        x = y[:n]
        vhat = y[n:2 * n]
        phi = y[2 * n:2 * n + n * n].reshape(n, n)
        omh = y[2 * n + n * n:].reshape(n, n)
        return body_state(x, phi, phi @ vhat, phi @ omh)

    def f(t: float, y: np.ndarray) -> np.ndarray:
        x = y[:n]
        vhat = y[n:2 * n]
        phi = y[2 * n:2 * n + n * n].reshape(n, n)
        omh = y[2 * n + n * n:].reshape(n, n)
        state = body_state(x, phi, phi @ vhat, phi @ omh)
        N, nhat, F = torque(model, state, g, eta)
        fhat = np.linalg.inv(phi) @ F
        dvhat = -omh @ vhat + fhat / inertia.mass
        domh = -omh @ omh + nhat.T @ inertia.Jinv
        return np.concatenate([phi @ vhat, dvhat, (phi @ omh).ravel(),
                               domh.ravel()])

    def rhs(state: BodyState):
        N, _, F = torque(model, state, g, eta)
        pinv = np.linalg.inv(state.phi)
        return F / inertia.mass, N.T @ pinv.T @ inertia.Jinv

    return EquationSystem(
        kind=ConstraintKind.UNCONSTRAINED, f=f, pack=pack, unpack=unpack,
        rhs=rhs, constraint_residual=lambda state: np.zeros(0),
        monitors=standard_monitors(inertia, model, g, eta,
                                   lambda state: np.zeros(0)),
        stabilize=None, check_initial=None)


# ---------------------------------------------------------------------------
# monitors

def kinetic_energy(state: BodyState, inertia: Inertia, g: Metric) -> float:
    t_tr = 0.5 * inertia.mass * float(state.v @ g.mat @ state.v)
    t_int = 0.5 * float(np.trace(inertia.J @ state.phidot.T @ g.mat
                                 @ state.phidot))
    return t_tr + t_int


def standard_monitors(inertia: Inertia, model: TorqueModel, g: Metric,
                      eta: Metric, residual) -> dict:
    """Named scalar monitors evaluated as functions of (t, BodyState)."""

    def total_force(state):
        return model.force(state, g, eta)

    def energy(t, state):
        v_int = model.potential_energy(state.config.internal, g, eta)
        pot = v_int if v_int is not None else 0.0
        pot -= float((g.mat @ total_force(state)) @ state.x)
        return kinetic_energy(state, inertia, g) + pot

    def sigma(state):
        km = kinematical_momenta(state, inertia, g)
        return km.K @ g.mat

    def c1(t, state):
        return float(np.trace(sigma(state)))

    def c2(t, state):
        s = sigma(state)
        return float(np.trace(s @ s))

    def norm_s(t, state):
        s = sigma(state)
        spin = s - g.transpose(s)
        return float(np.sqrt(max(0.0, -0.5 * np.trace(spin @ spin))))

    def norm_v(t, state):
        s = sigma(state)
        pinv = np.linalg.inv(state.phi)
        sh = pinv @ s @ state.phi
        vort = sh - eta.transpose(sh)
        return float(np.sqrt(max(0.0, -0.5 * np.trace(vort @ vort))))

    def detphi(t, state):
        return float(np.linalg.det(state.phi))

    def res(t, state):
        r = residual(state)
        return float(np.max(np.abs(r))) if r.size else 0.0

    def diss_power(t, state):
        total = 0.0
        models = model.models if hasattr(model, "models") else (model,)
        for m in models:
            if m.is_dissipative:
                N = m.torque_spatial(state, g, eta)
                omega = state.phidot @ np.linalg.inv(state.phi)
                total += float(np.trace(N @ g.mat @ omega))
        return total

    mons = {"energy": energy, "C1": c1, "C2": c2, "normS": norm_s,
            "normV": norm_v, "detphi": detphi, "residual": res,
            "power_dissipative": diss_power}

    n = g.dim
    for i in range(n):
        def kappa(t, state, i=i):
            F = total_force(state)
            return inertia.mass * state.v[i] - F[i] * t

        def xi(t, state, i=i):
            F = total_force(state)
            return state.x[i] - state.v[i] * t + F[i] * t * t / (2.0 * inertia.mass)

        mons[f"kappa{i}"] = kappa
        mons[f"xi{i}"] = xi
    return mons
