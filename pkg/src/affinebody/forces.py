"""
Constitutive library of total forces and affine torques.

Every model produces the spatial contravariant torque N^{ij}; the co-moving
N^{AB} is its phi-pullback.  Elastic laws depend on the configuration only,
viscous/friction laws on the gyration Omega.  Potential-type models also
expose their potential energy for conservation monitoring.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .kinematics import BodyState
from .tensors import Metric, _frozen, _phi_matrix, check_invertible


def _matrix_powers(m: np.ndarray, top: int) -> list[np.ndarray]:
    """[I, m, m^2, ..., m^top]."""
    out = [np.eye(m.shape[0])]
    for _ in range(top):
        out.append(out[-1] @ m)
    return out


class TorqueModel:
    """Base class; subclasses implement the spatial torque N^{ij}."""

    def torque_spatial(self, state: BodyState, g: Metric, eta: Metric) -> np.ndarray:
        raise NotImplementedError

    def force(self, state: BodyState, g: Metric, eta: Metric) -> np.ndarray:
        return np.zeros(state.dim)

    def potential_energy(self, phi, g: Metric, eta: Metric) -> Optional[float]:
        """Stored energy: a float for conservative models, 0.0 for purely
        dissipative ones (they store nothing), None when no potential is
        known (elastic but not verified hyperelastic)."""
        if self.is_dissipative:
            return 0.0
        return None

    @property
    def is_dissipative(self) -> bool:
        return False


@dataclass(frozen=True)
class HyperelasticInvariant(TorqueModel):
    """Doubly isotropic hyperelastic law from a potential U of the invariants.

    grad_U(K) must return (dU/dK_1, ..., dU/dK_n); the torque uses the
    controlling functions l_a = -2a dU/dK_a.
    """

    U: Callable[[np.ndarray], float]
    grad_U: Callable[[np.ndarray], np.ndarray]

    def torque_spatial(self, state, g, eta):
        phi = state.phi
        check_invertible(phi)
        Ghat = eta.inv @ (phi.T @ g.mat @ phi)
        n = phi.shape[0]
        K = np.array([np.trace(p) for p in _matrix_powers(Ghat, n)[1:]])
        dU = np.asarray(self.grad_U(K), dtype=float)
        powers = _matrix_powers(Ghat, n)
        nhat_mixed = np.zeros((n, n))
        for a in range(1, n + 1):
            nhat_mixed += (-2.0 * a * dU[a - 1]) * powers[a]
        # balance-law torque is the G-raised version of the mixed one
        pinv = np.linalg.inv(phi)
        Ginv = pinv @ g.inv @ pinv.T
        nhat = nhat_mixed @ Ginv
        return phi @ nhat @ phi.T

    def potential_energy(self, phi, g, eta):
        p = _phi_matrix(phi)
        Ghat = eta.inv @ (p.T @ g.mat @ p)
        n = p.shape[0]
        K = np.array([np.trace(m) for m in _matrix_powers(Ghat, n)[1:]])
        return float(self.U(K))


@dataclass(frozen=True)
class IsotropicExpansion(TorqueModel):
    """Doubly isotropic elastic torque from prescribed controlling functions.

    coefficients(K) returns (l_0, ..., l_{n-1}) multiplying (eta^-1 G)^a.
    Need not derive from a potential.
    """

    coefficients: Callable[[np.ndarray], Sequence[float]]

    def torque_spatial(self, state, g, eta):
        phi = state.phi
        check_invertible(phi)
        Ghat = eta.inv @ (phi.T @ g.mat @ phi)
        n = phi.shape[0]
        powers = _matrix_powers(Ghat, n - 1)
        K = np.empty(n)
        acc = np.eye(n)
        for a in range(n):
            acc = acc @ Ghat
            K[a] = np.trace(acc)
        ls = np.asarray(self.coefficients(K), dtype=float)
        nhat = np.zeros((n, n))
        for a in range(n):
            nhat += ls[a] * powers[a] @ eta.inv
        return phi @ nhat @ phi.T


@dataclass(frozen=True)
class HookeAnisotropic(TorqueModel):
    """Nonlinear anisotropic Hooke law N^{AB} = C^{ABKL} E_KL."""

    Ctensor: np.ndarray

    def __post_init__(self):
        c = _frozen(self.Ctensor)
        if c.ndim != 4 or len(set(c.shape)) != 1:
            raise ValueError("Ctensor must have shape (n, n, n, n)")
        object.__setattr__(self, "Ctensor", c)

    def torque_spatial(self, state, g, eta):
        phi = state.phi
        E = 0.5 * (phi.T @ g.mat @ phi - eta.mat)
        nhat = np.einsum("abkl,kl->ab", self.Ctensor, E)
        return phi @ nhat @ phi.T

    def potential_energy(self, phi, g, eta):
        p = _phi_matrix(phi)
        E = 0.5 * (p.T @ g.mat @ p - eta.mat)
        return float(-0.5 * np.einsum("ab,abkl,kl->", E, self.Ctensor, E))


@dataclass(frozen=True)
class HookeIsotropic(TorqueModel):
    """Isotropic Hooke law, C^{ABKL} = lam eta^{AK}eta^{BL} + mu eta^{AB}eta^{KL}."""

    lam: float
    mu: float

    def torque_spatial(self, state, g, eta):
        phi = state.phi
        E = 0.5 * (phi.T @ g.mat @ phi - eta.mat)
        nhat = (self.lam * eta.inv @ E @ eta.inv
                + self.mu * np.trace(eta.inv @ E) * eta.inv)
        return phi @ nhat @ phi.T

    def potential_energy(self, phi, g, eta):
        p = _phi_matrix(phi)
        E = 0.5 * (p.T @ g.mat @ p - eta.mat)
        eE = eta.inv @ E
        return float(-0.5 * (self.lam * np.trace(eE @ eE)
                             + self.mu * np.trace(eE) ** 2))


@dataclass(frozen=True)
class HookeGreenShifted(TorqueModel):
    """Hooke-type law with the constitutive tensor built of G^-1 instead of eta^-1.

    Much more strongly nonlinear than the isotropic law; not derived from a
    potential here.
    """

    lam: float
    mu: float

    def torque_spatial(self, state, g, eta):
        phi = state.phi
        check_invertible(phi)
        pinv = np.linalg.inv(phi)
        Ginv = pinv @ g.inv @ pinv.T
        E = 0.5 * (phi.T @ g.mat @ phi - eta.mat)
        nhat = (self.lam * Ginv @ E @ Ginv
                + self.mu * np.trace(Ginv @ E) * Ginv)
        return phi @ nhat @ phi.T


def _require_nonnegative(**coeffs):
    for name, value in coeffs.items():
        if value < 0.0:
            raise ValueError(f"dissipative coefficient {name} must be >= 0")


@dataclass(frozen=True)
class ViscousContinuum(TorqueModel):
    """Linear isotropic internal viscosity of the discretized continuum."""

    eta_vis: float
    zeta: float
    Vol0: float = 1.0

    def __post_init__(self):
        _require_nonnegative(eta_vis=self.eta_vis, zeta=self.zeta, Vol0=self.Vol0)

    def torque_spatial(self, state, g, eta):
        phi = state.phi
        check_invertible(phi)
        n = phi.shape[0]
        omega = state.phidot @ np.linalg.inv(phi)
        dphi = np.sqrt(np.linalg.det(g.mat) / np.linalg.det(eta.mat)) \
            * np.linalg.det(phi)
        dd = omega @ g.inv
        return -self.Vol0 * dphi * (self.eta_vis * (dd + dd.T)
                                    + (self.zeta - 2.0 * self.eta_vis / n)
                                    * np.trace(omega) * g.inv)

    @property
    def is_dissipative(self) -> bool:
        return True


@dataclass(frozen=True)
class ViscousDiscrete(TorqueModel):
    """Internal friction for discrete bodies, linear in the strain rate."""

    alpha: float
    beta: float

    def __post_init__(self):
        _require_nonnegative(alpha=self.alpha, beta=self.beta)

    def torque_spatial(self, state, g, eta):
        phi = state.phi
        check_invertible(phi)
        omega = state.phidot @ np.linalg.inv(phi)
        dd = omega @ g.inv
        return -self.alpha * (dd + dd.T) - self.beta * np.trace(omega) * g.inv

    @property
    def is_dissipative(self) -> bool:
        return True


@dataclass(frozen=True)
class ExternalFriction(TorqueModel):
    """Surface friction with separate rotational/shear/dilatational resistance.

    The rotational term enters as +alpha omega^{ij} in the position-first
    torque convention (a drag force density -c v(y) integrates to exactly
    this sign), which makes the power non-positive for all states.
    """

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        _require_nonnegative(alpha=self.alpha, beta=self.beta, gamma=self.gamma)

    def torque_spatial(self, state, g, eta):
        phi = state.phi
        check_invertible(phi)
        n = phi.shape[0]
        omega = state.phidot @ np.linalg.inv(phi)
        d = g.sym(omega)
        w = omega - d
        return (self.alpha * w @ g.inv - self.beta * d @ g.inv
                - (self.gamma - self.beta / n) * np.trace(d) * g.inv)

    @property
    def is_dissipative(self) -> bool:
        return True


@dataclass(frozen=True)
class LinearAnisotropicFriction(TorqueModel):
    """Anisotropic friction N^{ij} = -V^{ijab} d_ab; only the shape is validated."""

    Vtensor: np.ndarray

    def __post_init__(self):
        v = _frozen(self.Vtensor)
        if v.ndim != 4 or len(set(v.shape)) != 1:
            raise ValueError("Vtensor must have shape (n, n, n, n)")
        object.__setattr__(self, "Vtensor", v)

    def torque_spatial(self, state, g, eta):
        phi = state.phi
        check_invertible(phi)
        omega = state.phidot @ np.linalg.inv(phi)
        d_cov = g.mat @ g.sym(omega)
        return -np.einsum("ijab,ab->ij", self.Vtensor, d_cov)

    @property
    def is_dissipative(self) -> bool:
        return True


@dataclass(frozen=True)
class Pressure(TorqueModel):
    """Non-dissipative pressure torque N = -p g^-1 (potential p ln det phi)."""

    p: float

    def torque_spatial(self, state, g, eta):
        return -self.p * g.inv

    def potential_energy(self, phi, g, eta):
        return float(self.p * np.log(np.linalg.det(_phi_matrix(phi))))


@dataclass(frozen=True)
class ConstantBodyForce(TorqueModel):
    """Homogeneous external force field acting on the center of mass."""

    field: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "field", _frozen(self.field))

    def torque_spatial(self, state, g, eta):
        return np.zeros((state.dim, state.dim))

    def force(self, state, g, eta):
        return np.asarray(self.field)

    def potential_energy(self, phi, g, eta):
        return 0.0  # position part handled by the caller via -g F . x


@dataclass(frozen=True)
class Sum(TorqueModel):
    """Superposition of torque models."""

    models: tuple

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))

    def torque_spatial(self, state, g, eta):
        n = state.dim
        out = np.zeros((n, n))
        for m in self.models:
            out += m.torque_spatial(state, g, eta)
        return out

    def force(self, state, g, eta):
        out = np.zeros(state.dim)
        for m in self.models:
            out += m.force(state, g, eta)
        return out

    def potential_energy(self, phi, g, eta):
        total = 0.0
        for m in self.models:
            v = m.potential_energy(phi, g, eta)
            if v is None:
                return None
            total += v
        return total

    @property
    def is_dissipative(self) -> bool:
        return any(m.is_dissipative for m in self.models)


def torque(model: TorqueModel, state: BodyState, g: Metric, eta: Metric):
    """Evaluate (N^{ij}, N^{AB}, F^i) for a model at a state."""
    N = model.torque_spatial(state, g, eta)
    pinv = np.linalg.inv(state.phi)
    return N, pinv @ N @ pinv.T, model.force(state, g, eta)


def potential_torque_from_gradient(grad_V: Callable[[np.ndarray], np.ndarray],
                                   phi, g: Metric):
    """
    Torque of a configuration potential from its gradient dV/dphi.

    Returns (N_mixed, N) with N^i_j = -phi^i_A dV/dphi^j_A and
    N^{ij} = N^i_k g^{kj}.
    """
    p = _phi_matrix(phi)
    w = np.asarray(grad_V(p), dtype=float)
    n_mixed = -p @ w.T
    return n_mixed, n_mixed @ g.inv


def power(N: np.ndarray, F: np.ndarray, state: BodyState, g: Metric) -> float:
    """Power of the force distribution: g_ij F^i v^j + g_mj N^{im} Omega^j_i."""
    omega = state.phidot @ np.linalg.inv(state.phi)
    return float(state.v @ g.mat @ F + np.trace(N @ g.mat @ omega))
