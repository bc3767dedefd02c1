"""
Canonical formalism: kinetic-energy families, Legendre maps, Poisson
brackets of the affine generators, and Hamiltonian flows.

Kinetic models (translational + internal quadratic forms):

  DAlembert         p = m g v,           P = J phidot^T g
  SpatialAffine     phat = m eta vhat,   Sigmahat = I T_eta(Omh) + A Omh + B tr(Omh) Id
  MaterialAffine    p = m g v,           Sigma    = I T_g(Om)   + A Om  + B tr(Om) Id
  DoublyAffine      internal only,       Sigmahat = A Omh + B tr(Omh) Id
  GeneralEightParam phat = (m1 G + m2 eta) vhat, and the four-term mixed form.

The inverse constants of the (I, A, B) families are 1/Itil = I/(I^2 - A^2),
1/Atil = A/(A^2 - I^2), 1/Btil = -B/((I+A)(I+A+nB)), each taken literally as
zero when the corresponding numerator vanishes.  The sign of the trace term
follows the co-moving printing of the inverse map (the spatial printing has
the opposite sign and does not invert the forward map).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonInvertibleLegendre, UnknownGenerator
from .kinematics import BodyState, body_state
from .tensors import InternalConfig, Metric, _frozen

_DEG_TOL = 1e-12


@dataclass(frozen=True)
class PhaseState:
    """Canonical state (x, phi; p, P) with P^A_i stored as P[A, i]."""

    x: np.ndarray
    phi: InternalConfig
    p: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        n = self.phi.dim
        x = _frozen(self.x)
        p = _frozen(self.p)
        P = _frozen(self.P)
        if x.shape != (n,) or p.shape != (n,) or P.shape != (n, n):
            raise ValueError("phase-state shapes must match phi")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "P", P)

    @property
    def dim(self) -> int:
        return self.phi.dim

    @property
    def phi_mat(self) -> np.ndarray:
        return self.phi.phi

    @property
    def Sigma(self) -> np.ndarray:
        return self.phi_mat @ self.P

    @property
    def SigmaHat(self) -> np.ndarray:
        return self.P @ self.phi_mat

    @property
    def phat(self) -> np.ndarray:
        return self.phi_mat.T @ self.p


def phase_state(x, phi, p, P) -> PhaseState:
    return PhaseState(np.asarray(x, dtype=float), InternalConfig(phi),
                      np.asarray(p, dtype=float), np.asarray(P, dtype=float))


# ---------------------------------------------------------------------------
# kinetic models


class KineticModel:
    """Base marker for the kinetic-energy family."""


@dataclass(frozen=True)
class DAlembert(KineticModel):
    mass: float
    J: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "J", _frozen(self.J))
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        if np.any(np.linalg.eigvalsh(self.J) <= 0.0):
            raise NonInvertibleLegendre("J must be positive definite")

    @property
    def Jinv(self) -> np.ndarray:
        return np.linalg.inv(self.J)


def _check_iab(I: float, A: float, B: float, n: int, translational_mass=None):
    if translational_mass is not None and translational_mass <= 0.0:
        raise ValueError("mass must be positive")
    if abs(I + A) < _DEG_TOL:
        raise NonInvertibleLegendre("I + A = 0: symmetric sector degenerate")
    if n > 1 and abs(A - I) < _DEG_TOL:
        raise NonInvertibleLegendre("A - I = 0: antisymmetric sector degenerate")
    if abs(I + A + n * B) < _DEG_TOL:
        raise NonInvertibleLegendre("I + A + nB = 0: trace sector degenerate")


@dataclass(frozen=True)
class SpatialAffine(KineticModel):
    """Affinely invariant in space, metrical in the body (co-moving form)."""

    mass: float
    I: float
    A: float
    B: float = 0.0


@dataclass(frozen=True)
class MaterialAffine(KineticModel):
    """Metrical in space, affinely invariant in the body (spatial form)."""

    mass: float
    I: float
    A: float
    B: float = 0.0


@dataclass(frozen=True)
class DoublyAffine(KineticModel):
    """Affinely invariant on both sides (I = 0); internal sector only."""

    A: float
    B: float = 0.0


@dataclass(frozen=True)
class GeneralEightParam(KineticModel):
    m1: float
    m2: float
    I1: float
    I2: float
    I3: float
    I4: float
    A: float
    B: float = 0.0

    @property
    def has_translations(self) -> bool:
        return abs(self.m1) > 0.0 or abs(self.m2) > 0.0


def inverse_inertia_constants(I: float, A: float, B: float, n: int):
    """(1/Itil, 1/Atil, 1/Btil) with the literal zero branches for I=0, B=0."""
    _check_iab(I, A, B, n)
    inv_i = 0.0 if I == 0.0 else I / (I * I - A * A)
    inv_a = 0.0 if A == 0.0 else A / (A * A - I * I)
    inv_b = 0.0 if B == 0.0 else -B / ((I + A) * (I + A + n * B))
    return inv_i, inv_a, inv_b


def _iab_of(model: KineticModel):
    if isinstance(model, (SpatialAffine, MaterialAffine)):
        return model.I, model.A, model.B
    if isinstance(model, DoublyAffine):
        return 0.0, model.A, model.B
    raise TypeError("not an (I, A, B) family model")


def _eight_param_map(model: GeneralEightParam, omh: np.ndarray, G: np.ndarray,
                     Ginv: np.ndarray, eta: Metric) -> np.ndarray:
    """Sigmahat as a linear function of Omegahat at fixed configuration."""
    out = model.A * omh + model.B * np.trace(omh) * np.eye(omh.shape[0])
    if model.I1:
        out += model.I1 * Ginv @ omh.T @ G
    if model.I2:
        out += model.I2 * eta.inv @ omh.T @ eta.mat
    if model.I3:
        out += model.I3 * eta.inv @ omh.T @ G
    if model.I4:
        out += model.I4 * Ginv @ omh.T @ eta.mat
    return out


def _eight_param_solve(model: GeneralEightParam, sigmahat: np.ndarray,
                       G: np.ndarray, Ginv: np.ndarray,
                       eta: Metric) -> np.ndarray:
    """Invert the internal Legendre map numerically (n^2 x n^2 solve)."""
    n = sigmahat.shape[0]
    basis = np.eye(n * n)
    mat = np.empty((n * n, n * n))
    for c in range(n * n):
        e = basis[:, c].reshape(n, n)
        mat[:, c] = _eight_param_map(model, e, G, Ginv, eta).ravel()
    try:
        sol = np.linalg.solve(mat, sigmahat.ravel())
    except np.linalg.LinAlgError as exc:
        raise NonInvertibleLegendre("eight-parameter form singular") from exc
    if np.linalg.cond(mat) > 1e14:
        raise NonInvertibleLegendre("eight-parameter form nearly singular")
    return sol.reshape(n, n)


def _translation_matrix(model: GeneralEightParam, G: np.ndarray,
                        eta: Metric) -> np.ndarray:
    return model.m1 * G + model.m2 * eta.mat


# ---------------------------------------------------------------------------
# Legendre transformation


def legendre(model: KineticModel, state: BodyState, g: Metric,
             eta: Metric) -> PhaseState:
    """Map a Newtonian state to the canonical state of the model."""
    phi = state.phi
    pinv = np.linalg.inv(phi)
    n = state.dim
    if isinstance(model, DAlembert):
        P = model.J @ state.phidot.T @ g.mat
        p = model.mass * g.mat @ state.v
    elif isinstance(model, SpatialAffine):
        _check_iab(model.I, model.A, model.B, n, model.mass)
        omh = pinv @ state.phidot
        sh = (model.I * eta.transpose(omh) + model.A * omh
              + model.B * np.trace(omh) * np.eye(n))
        P = sh @ pinv
        p = model.mass * pinv.T @ eta.mat @ (pinv @ state.v)
    elif isinstance(model, MaterialAffine):
        _check_iab(model.I, model.A, model.B, n, model.mass)
        om = state.phidot @ pinv
        sig = (model.I * g.transpose(om) + model.A * om
               + model.B * np.trace(om) * np.eye(n))
        P = pinv @ sig
        p = model.mass * g.mat @ state.v
    elif isinstance(model, DoublyAffine):
        _check_iab(0.0, model.A, model.B, n)
        if float(np.max(np.abs(state.v))) > 0.0:
            raise ValueError("DoublyAffine has no translational sector")
        omh = pinv @ state.phidot
        sh = model.A * omh + model.B * np.trace(omh) * np.eye(n)
        P = sh @ pinv
        p = np.zeros(n)
    elif isinstance(model, GeneralEightParam):
        G = phi.T @ g.mat @ phi
        Ginv = pinv @ g.inv @ pinv.T
        omh = pinv @ state.phidot
        sh = _eight_param_map(model, omh, G, Ginv, eta)
        P = sh @ pinv
        if model.has_translations:
            w = _translation_matrix(model, G, eta)
            p = pinv.T @ (w @ (pinv @ state.v))
        else:
            if float(np.max(np.abs(state.v))) > 0.0:
                raise ValueError("model has no translational sector")
            p = np.zeros(n)
    else:
        raise TypeError(f"unknown kinetic model {type(model).__name__}")
    return phase_state(state.x, phi, p, P)


def legendre_inverse(model: KineticModel, state: PhaseState, g: Metric,
                     eta: Metric) -> BodyState:
    """Map a canonical state back to the Newtonian state (exact inverse)."""
    phi = state.phi_mat
    pinv = np.linalg.inv(phi)
    n = state.dim
    if isinstance(model, DAlembert):
        phidot = g.inv @ state.P.T @ model.Jinv
        v = g.inv @ state.p / model.mass
    elif isinstance(model, SpatialAffine):
        inv_i, inv_a, inv_b = inverse_inertia_constants(model.I, model.A,
                                                        model.B, n)
        sh = state.SigmaHat
        omh = inv_i * eta.transpose(sh) + inv_a * sh \
            + inv_b * np.trace(sh) * np.eye(n)
        phidot = phi @ omh
        v = phi @ (eta.inv @ state.phat) / model.mass
    elif isinstance(model, MaterialAffine):
        inv_i, inv_a, inv_b = inverse_inertia_constants(model.I, model.A,
                                                        model.B, n)
        sig = state.Sigma
        om = inv_i * g.transpose(sig) + inv_a * sig \
            + inv_b * np.trace(sig) * np.eye(n)
        phidot = om @ phi
        v = g.inv @ state.p / model.mass
    elif isinstance(model, DoublyAffine):
        _, inv_a, inv_b = inverse_inertia_constants(0.0, model.A, model.B, n)
        sh = state.SigmaHat
        omh = inv_a * sh + inv_b * np.trace(sh) * np.eye(n)
        phidot = phi @ omh
        v = np.zeros(n)
    elif isinstance(model, GeneralEightParam):
        G = phi.T @ g.mat @ phi
        Ginv = pinv @ g.inv @ pinv.T
        omh = _eight_param_solve(model, state.SigmaHat, G, Ginv, eta)
        phidot = phi @ omh
        if model.has_translations:
            w = _translation_matrix(model, G, eta)
            try:
                vhat = np.linalg.solve(w, state.phat)
            except np.linalg.LinAlgError as exc:
                raise NonInvertibleLegendre("translational form singular") from exc
            v = phi @ vhat
        else:
            v = np.zeros(n)
    else:
        raise TypeError(f"unknown kinetic model {type(model).__name__}")
    return body_state(state.x, phi, v, phidot)


# ---------------------------------------------------------------------------
# kinetic Hamiltonians and Casimir forms


def casimir(sigma: np.ndarray, k: int) -> float:
    """C(k) = Tr(Sigma^k) = Tr(SigmaHat^k)."""
    return float(np.trace(np.linalg.matrix_power(sigma, k)))


def spin_tensor(sigma: np.ndarray, g: Metric) -> np.ndarray:
    return sigma - g.transpose(sigma)


def vorticity_tensor(sigmahat: np.ndarray, eta: Metric) -> np.ndarray:
    return sigmahat - eta.transpose(sigmahat)


def norm_squared(antisym: np.ndarray) -> float:
    """||X||^2 = -Tr(X^2)/2 for (metric-)antisymmetric mixed tensors."""
    return float(-0.5 * np.trace(antisym @ antisym))


def kinetic_hamiltonian(model: KineticModel, state: PhaseState, g: Metric,
                        eta: Metric) -> float:
    """Kinetic (geodetic) Hamiltonian of a model at a canonical state."""
    phi = state.phi_mat
    n = state.dim
    if isinstance(model, DAlembert):
        t_tr = 0.5 * float(state.p @ g.inv @ state.p) / model.mass
        t_int = 0.5 * float(np.trace(model.Jinv @ state.P @ g.inv @ state.P.T))
        return t_tr + t_int
    if isinstance(model, SpatialAffine):
        inv_i, inv_a, inv_b = inverse_inertia_constants(model.I, model.A,
                                                        model.B, n)
        sh = state.SigmaHat
        t_int = 0.5 * (inv_i * float(np.trace(eta.transpose(sh) @ sh))
                       + inv_a * float(np.trace(sh @ sh))
                       + inv_b * float(np.trace(sh)) ** 2)
        ph = state.phat
        return t_int + 0.5 * float(ph @ eta.inv @ ph) / model.mass
    if isinstance(model, MaterialAffine):
        inv_i, inv_a, inv_b = inverse_inertia_constants(model.I, model.A,
                                                        model.B, n)
        sig = state.Sigma
        t_int = 0.5 * (inv_i * float(np.trace(g.transpose(sig) @ sig))
                       + inv_a * float(np.trace(sig @ sig))
                       + inv_b * float(np.trace(sig)) ** 2)
        return t_int + 0.5 * float(state.p @ g.inv @ state.p) / model.mass
    if isinstance(model, DoublyAffine):
        _, inv_a, inv_b = inverse_inertia_constants(0.0, model.A, model.B, n)
        sh = state.SigmaHat
        return 0.5 * (inv_a * float(np.trace(sh @ sh))
                      + inv_b * float(np.trace(sh)) ** 2)
    if isinstance(model, GeneralEightParam):
        pinv = np.linalg.inv(phi)
        G = phi.T @ g.mat @ phi
        Ginv = pinv @ g.inv @ pinv.T
        sh = state.SigmaHat
        omh = _eight_param_solve(model, sh, G, Ginv, eta)
        t_int = 0.5 * float(np.trace(sh @ omh))
        if model.has_translations:
            w = _translation_matrix(model, G, eta)
            ph = state.phat
            t_int += 0.5 * float(ph @ np.linalg.solve(w, ph))
        return t_int
    raise TypeError(f"unknown kinetic model {type(model).__name__}")


def kinetic_hamiltonian_invariant_form(model: KineticModel, state: PhaseState,
                                       g: Metric, eta: Metric) -> float:
    """
    Internal kinetic energy in the Casimir form,

        (1/2 alpha) C(2) + (1/2 beta) C(1)^2 + (1/2 mu) ||V or S||^2,

    with alpha = I + A, 1/beta = -B/((I+A)(I+A+nB)), 1/mu = I/(I^2 - A^2).
    SpatialAffine carries the vorticity term, MaterialAffine the spin term.
    Translational energy is not included.
    """
    n = state.dim
    I, A, B = _iab_of(model)
    _check_iab(I, A, B, n)
    alpha = I + A
    inv_beta = 0.0 if B == 0.0 else -B / ((I + A) * (I + A + n * B))
    inv_mu = 0.0 if I == 0.0 else I / (I * I - A * A)
    sig = state.Sigma
    c2 = casimir(sig, 2)
    c1 = casimir(sig, 1)
    if isinstance(model, SpatialAffine):
        extra = norm_squared(vorticity_tensor(state.SigmaHat, eta))
    elif isinstance(model, MaterialAffine):
        extra = norm_squared(spin_tensor(sig, g))
    else:
        extra = 0.0
    return 0.5 * c2 / alpha + 0.5 * inv_beta * c1 * c1 + 0.5 * inv_mu * extra


# ---------------------------------------------------------------------------
# phase functions and Hamiltonian flow


@dataclass(frozen=True)
class PhaseFunction:
    """Scalar phase-space function with analytic gradients.

    grad(state) returns (dH/dx, dH/dphi, dH/dp, dH/dP) with dH/dphi indexed
    [i, A] like phi and dH/dP indexed [A, i] like P.
    """

    value: Callable[[PhaseState], float]
    grad: Callable[[PhaseState], tuple]


def add_phase_functions(*fs: PhaseFunction) -> PhaseFunction:
    def value(state):
        return sum(f.value(state) for f in fs)

    def grad(state):
        parts = [f.grad(state) for f in fs]
        return tuple(sum(p[k] for p in parts) for k in range(4))

    return PhaseFunction(value=value, grad=grad)


def kinetic_phase_function(model: KineticModel, g: Metric,
                           eta: Metric) -> PhaseFunction:
    """Kinetic Hamiltonian with analytic gradients, for canonical flows."""

    def value(state: PhaseState) -> float:
        return kinetic_hamiltonian(model, state, g, eta)

    def grad(state: PhaseState):
        n = state.dim
        phi = state.phi_mat
        zeros_v = np.zeros(n)
        if isinstance(model, DAlembert):
            g_p = g.inv @ state.p / model.mass
            g_P = model.Jinv @ state.P @ g.inv
            return zeros_v, np.zeros((n, n)), g_p, g_P
        if isinstance(model, SpatialAffine):
            inv_i, inv_a, inv_b = inverse_inertia_constants(model.I, model.A,
                                                            model.B, n)
            sh = state.SigmaHat
            omh = inv_i * eta.transpose(sh) + inv_a * sh \
                + inv_b * np.trace(sh) * np.eye(n)
            phat = phi.T @ state.p
            vhat = eta.inv @ phat / model.mass
            g_p = phi @ vhat
            g_phi = (omh @ state.P).T + np.outer(state.p, vhat)
            g_P = (phi @ omh).T
            return zeros_v, g_phi, g_p, g_P
        if isinstance(model, MaterialAffine):
            inv_i, inv_a, inv_b = inverse_inertia_constants(model.I, model.A,
                                                            model.B, n)
            sig = state.Sigma
            om = inv_i * g.transpose(sig) + inv_a * sig \
                + inv_b * np.trace(sig) * np.eye(n)
            g_p = g.inv @ state.p / model.mass
            g_phi = (state.P @ om).T
            g_P = (om @ phi).T
            return zeros_v, g_phi, g_p, g_P
        if isinstance(model, DoublyAffine):
            _, inv_a, inv_b = inverse_inertia_constants(0.0, model.A,
                                                        model.B, n)
            sh = state.SigmaHat
            omh = inv_a * sh + inv_b * np.trace(sh) * np.eye(n)
            g_phi = (omh @ state.P).T
            g_P = (phi @ omh).T
            return zeros_v, g_phi, zeros_v, g_P
        if isinstance(model, GeneralEightParam):
            pinv = np.linalg.inv(phi)
            G = phi.T @ g.mat @ phi
            Ginv = pinv @ g.inv @ pinv.T
            sh = state.SigmaHat
            omh = _eight_param_solve(model, sh, G, Ginv, eta)
            g_P = (phi @ omh).T
            g_phi = (omh @ state.P).T
            # configuration dependence through G in the quadratic form
            m_g = np.zeros((n, n))
            if model.I1:
                m_g -= 0.5 * model.I1 * (omh @ Ginv @ omh.T
                                         - Ginv @ omh.T @ G @ omh @ Ginv)
            if model.I3:
                m_g -= 0.5 * model.I3 * omh @ eta.inv @ omh.T
            if model.I4:
                m_g += 0.5 * model.I4 * Ginv @ omh.T @ eta.mat @ omh @ Ginv
            if model.has_translations:
                w = _translation_matrix(model, G, eta)
                phat = phi.T @ state.p
                vhat = np.linalg.solve(w, phat)
                g_p = phi @ vhat
                g_phi = g_phi + np.outer(state.p, vhat)
                m_g -= 0.5 * model.m1 * np.outer(vhat, vhat)
            else:
                g_p = zeros_v
            g_phi = g_phi + 2.0 * g.mat @ phi @ m_g
            return zeros_v, g_phi, g_p, g_P
        raise TypeError(f"unknown kinetic model {type(model).__name__}")

    return PhaseFunction(value=value, grad=grad)


def potential_phase_function(V: Callable[[np.ndarray, np.ndarray], float],
                             grad_x: Callable[[np.ndarray, np.ndarray], np.ndarray],
                             grad_phi: Callable[[np.ndarray, np.ndarray], np.ndarray]
                             ) -> PhaseFunction:
    """Configuration potential V(x, phi) with user-supplied analytic gradients."""

    def value(state: PhaseState) -> float:
        return float(V(state.x, state.phi_mat))

    def grad(state: PhaseState):
        n = state.dim
        return (np.asarray(grad_x(state.x, state.phi_mat), dtype=float),
                np.asarray(grad_phi(state.x, state.phi_mat), dtype=float),
                np.zeros(n), np.zeros((n, n)))

    return PhaseFunction(value=value, grad=grad)


def hyperelastic_phase_potential(U, grad_U, g: Metric,
                                 eta: Metric) -> PhaseFunction:
    """V(phi) = U(K_1..K_n) of the deformation invariants, with gradients."""

    def v_fun(x, phi):
        n = phi.shape[0]
        ghat = eta.inv @ (phi.T @ g.mat @ phi)
        acc = np.eye(n)
        K = np.empty(n)
        for a in range(n):
            acc = acc @ ghat
            K[a] = np.trace(acc)
        return float(U(K))

    def gx_fun(x, phi):
        return np.zeros(phi.shape[0])

    def gphi_fun(x, phi):
        n = phi.shape[0]
        ghat = eta.inv @ (phi.T @ g.mat @ phi)
        powers = [np.eye(n)]
        for _ in range(n):
            powers.append(powers[-1] @ ghat)
        K = np.array([np.trace(powers[a]) for a in range(1, n + 1)])
        dU = np.asarray(grad_U(K), dtype=float)
        out = np.zeros((n, n))
        for a in range(1, n + 1):
            out += 2.0 * a * dU[a - 1] * g.mat @ phi @ powers[a - 1] @ eta.inv
        return out

    return potential_phase_function(v_fun, gx_fun, gphi_fun)


def constant_force_potential(force: np.ndarray, g: Metric) -> PhaseFunction:
    """V(x) = -(g F) . x, producing dp/dt = g F, i.e. m x'' = F."""
    gf = g.mat @ np.asarray(force, dtype=float)

    def value(state):
        return -float(gf @ state.x)

    def grad(state):
        n = state.dim
        return -gf, np.zeros((n, n)), np.zeros(n), np.zeros((n, n))

    return PhaseFunction(value=value, grad=grad)


@dataclass(frozen=True)
class HamiltonianSystem:
    """Canonical flow of a phase function on the flat vector (x, p, phi, P)."""

    H: PhaseFunction
    f: Callable[[float, np.ndarray], np.ndarray]
    pack: Callable[[PhaseState], np.ndarray]
    unpack: Callable[[np.ndarray], PhaseState]
    monitors: dict = field(default_factory=dict)


def pack_phase(state: PhaseState) -> np.ndarray:
    return np.concatenate([state.x, state.p, state.phi_mat.ravel(),
                           state.P.ravel()])


def unpack_phase(y: np.ndarray, n: int) -> PhaseState:
    return phase_state(y[:n], y[2 * n:2 * n + n * n].reshape(n, n),
                       y[n:2 * n], y[2 * n + n * n:].reshape(n, n))


def hamiltonian_rhs(H: PhaseFunction, n: int,
                    monitors: Optional[dict] = None) -> HamiltonianSystem:
    """Canonical equations dx = dH/dp, dp = -dH/dx, dphi = dH/dP, dP = -dH/dphi."""

    def f(t: float, y: np.ndarray) -> np.ndarray:
        state = unpack_phase(y, n)
        g_x, g_phi, g_p, g_P = H.grad(state)
        return np.concatenate([g_p, -g_x, g_P.T.ravel(), -g_phi.T.ravel()])

    return HamiltonianSystem(H=H, f=f, pack=pack_phase,
                             unpack=lambda y: unpack_phase(y, n),
                             monitors=monitors or {})


def phase_monitors(g: Metric, eta: Metric,
                   H: Optional[PhaseFunction] = None) -> dict:
    """Standard conserved-quantity monitors on PhaseState."""

    def c1(t, s):
        return casimir(s.Sigma, 1)

    def c2(t, s):
        return casimir(s.Sigma, 2)

    def norm_s(t, s):
        return float(np.sqrt(max(0.0, norm_squared(spin_tensor(s.Sigma, g)))))

    def norm_v(t, s):
        return float(np.sqrt(max(0.0, norm_squared(
            vorticity_tensor(s.SigmaHat, eta)))))

    def detphi(t, s):
        return float(np.linalg.det(s.phi_mat))

    mons = {"C1": c1, "C2": c2, "normS": norm_s, "normV": norm_v,
            "detphi": detphi}
    if H is not None:
        mons["energy"] = lambda t, s: H.value(s)
    return mons


# ---------------------------------------------------------------------------
# Poisson brackets

_GENERATORS = ("Sigma", "SigmaHat", "p", "phat", "Lambda", "J")


def _generator_value(name: str, idx, state: PhaseState) -> float:
    phi = state.phi_mat
    if name == "Sigma":
        return float(state.Sigma[idx])
    if name == "SigmaHat":
        return float(state.SigmaHat[idx])
    if name == "p":
        return float(state.p[idx])
    if name == "phat":
        return float(state.phat[idx])
    if name == "Lambda":
        return float(state.x[idx[0]] * state.p[idx[1]])
    if name == "J":
        return float(state.x[idx[0]] * state.p[idx[1]] + state.Sigma[idx])
    raise UnknownGenerator(name)


def _gl_pattern(name: str, i, j, k, l, state) -> float:
    """{X^i_j, X^k_l} = d^i_l X^k_j - d^k_j X^i_l for X in {Sigma, Lambda, J}."""
    out = 0.0
    if l == i:
        out += _generator_value(name, (k, j), state)
    if j == k:
        out -= _generator_value(name, (i, l), state)
    return out


def _gl_pattern_hat(a, b, c, d, state) -> float:
    """{Shat^A_B, Shat^C_D} = d^C_B Shat^A_D - d^A_D Shat^C_B (right action)."""
    out = 0.0
    if c == b:
        out += _generator_value("SigmaHat", (a, d), state)
    if a == d:
        out -= _generator_value("SigmaHat", (c, b), state)
    return out


def poisson_bracket_generators(name1: str, idx1, name2: str, idx2,
                               state: PhaseState) -> float:
    """
    Closed-form Poisson bracket of two affine generators, evaluated at a state.

    The table is the canonical one: the gl-pattern for Sigma, SigmaHat,
    Lambda, J; {Sigma, SigmaHat} = 0; {SigmaHat^A_B, phat_C} = -d^A_C phat_B
    (the sign consistent with the canonical bracket and the transformation
    rule of phat); {J^i_j, p_k} = {Lambda^i_j, p_k} = d^i_k p_j.
    """
    for nm in (name1, name2):
        if nm not in _GENERATORS:
            raise UnknownGenerator(nm)
    pair = (name1, name2)
    if pair == ("SigmaHat", "SigmaHat"):
        return _gl_pattern_hat(idx1[0], idx1[1], idx2[0], idx2[1], state)
    if pair[0] == pair[1] and pair[0] in ("Sigma", "Lambda", "J"):
        return _gl_pattern(pair[0], idx1[0], idx1[1], idx2[0], idx2[1], state)
    # order-sensitive mixed entries; resolve by antisymmetry
    order = {n: r for r, n in enumerate(_GENERATORS)}
    if order[name2] < order[name1]:
        return -poisson_bracket_generators(name2, idx2, name1, idx1, state)
    phi = state.phi_mat
    if pair == ("Sigma", "SigmaHat"):
        return 0.0
    if pair == ("Sigma", "p"):
        return 0.0
    if pair == ("Sigma", "phat"):
        return -float(state.p[idx1[1]] * phi[idx1[0], idx2])
    if pair == ("Sigma", "Lambda"):
        return 0.0
    if pair == ("Sigma", "J"):
        return _gl_pattern("Sigma", idx1[0], idx1[1], idx2[0], idx2[1], state)
    if pair == ("SigmaHat", "p"):
        return 0.0
    if pair == ("SigmaHat", "phat"):
        return -(float(state.phat[idx1[1]]) if idx1[0] == idx2 else 0.0)
    if pair in (("SigmaHat", "Lambda"), ("SigmaHat", "J")):
        return 0.0
    if pair in (("p", "p"), ("p", "phat"), ("phat", "phat")):
        return 0.0
    if pair in (("p", "Lambda"), ("p", "J")):
        return -(float(state.p[idx2[1]]) if idx2[0] == idx1 else 0.0)
    if pair == ("phat", "Lambda"):
        return -float(state.p[idx2[1]] * phi[idx2[0], idx1])
    if pair == ("phat", "J"):
        return 0.0
    if pair == ("Lambda", "J"):
        return _gl_pattern("Lambda", idx1[0], idx1[1], idx2[0], idx2[1], state)
    raise UnknownGenerator(f"{name1}/{name2}")


def generator_phase_function(name: str, idx, n: int) -> PhaseFunction:
    """Generator as a PhaseFunction with analytic gradients."""
    if name not in _GENERATORS:
        raise UnknownGenerator(name)

    def value(state: PhaseState) -> float:
        return _generator_value(name, idx, state)

    def grad(state: PhaseState):
        g_x = np.zeros(n)
        g_phi = np.zeros((n, n))
        g_p = np.zeros(n)
        g_P = np.zeros((n, n))
        phi = state.phi_mat
        if name == "Sigma":
            i, j = idx
            g_phi[i, :] += state.P[:, j]
            g_P[:, j] += phi[i, :]
        elif name == "SigmaHat":
            a, b = idx
            g_phi[:, b] += state.P[a, :]
            g_P[a, :] += phi[:, b]
        elif name == "p":
            g_p[idx] = 1.0
        elif name == "phat":
            g_p += phi[:, idx]
            g_phi[:, idx] += state.p
        elif name == "Lambda":
            i, j = idx
            g_x[i] += state.p[j]
            g_p[j] += state.x[i]
        elif name == "J":
            i, j = idx
            g_x[i] += state.p[j]
            g_p[j] += state.x[i]
            g_phi[i, :] += state.P[:, j]
            g_P[:, j] += phi[i, :]
        return g_x, g_phi, g_p, g_P

    return PhaseFunction(value=value, grad=grad)


def canonical_bracket(F: PhaseFunction, G: PhaseFunction,
                      state: PhaseState) -> float:
    """{F, G} from analytic gradients over the canonical pairs (x,p), (phi,P)."""
    fx, fphi, fp, fP = F.grad(state)
    gx, gphi, gp, gP = G.grad(state)
    out = float(fx @ gp - fp @ gx)
    out += float(np.sum(fphi * gP.T) - np.sum(fP * gphi.T))
    return out


def bracket_structure(name1: str, idx1, name2: str, idx2):
    """
    Bracket of two generators as a linear combination of generators,
    [(coeff, name, idx), ...], for the families that close (Sigma/SigmaHat,
    Lambda/p, J/p, SigmaHat/phat).  Raises for pairs that leave the span.
    """
    for nm in (name1, name2):
        if nm not in _GENERATORS:
            raise UnknownGenerator(nm)
    order = {n: r for r, n in enumerate(_GENERATORS)}
    if order[name2] < order[name1]:
        return [(-c, nm, ix) for (c, nm, ix) in
                bracket_structure(name2, idx2, name1, idx1)]
    pair = (name1, name2)
    if pair == ("SigmaHat", "SigmaHat"):
        a, b = idx1
        c, d = idx2
        out = []
        if c == b:
            out.append((1.0, "SigmaHat", (a, d)))
        if a == d:
            out.append((-1.0, "SigmaHat", (c, b)))
        return out
    if pair[0] == pair[1] and pair[0] in ("Sigma", "Lambda", "J"):
        i, j = idx1
        k, l = idx2
        out = []
        if l == i:
            out.append((1.0, pair[0], (k, j)))
        if j == k:
            out.append((-1.0, pair[0], (i, l)))
        return out
    if pair in (("Sigma", "SigmaHat"), ("Sigma", "p"), ("Sigma", "Lambda"),
                ("SigmaHat", "p"), ("SigmaHat", "Lambda"), ("SigmaHat", "J"),
                ("p", "p"), ("p", "phat"), ("phat", "phat"), ("phat", "J")):
        return []
    if pair == ("SigmaHat", "phat"):
        return [(-1.0, "phat", idx1[1])] if idx1[0] == idx2 else []
    if pair in (("p", "Lambda"), ("p", "J")):
        return [(-1.0, "p", idx2[1])] if idx2[0] == idx1 else []
    if pair == ("Sigma", "J"):
        i, j = idx1
        k, l = idx2
        out = []
        if l == i:
            out.append((1.0, "Sigma", (k, j)))
        if j == k:
            out.append((-1.0, "Sigma", (i, l)))
        return out
    if pair == ("Lambda", "J"):
        i, j = idx1
        k, l = idx2
        out = []
        if l == i:
            out.append((1.0, "Lambda", (k, j)))
        if j == k:
            out.append((-1.0, "Lambda", (i, l)))
        return out
    raise ValueError(f"bracket of {name1} and {name2} leaves the generator span")
