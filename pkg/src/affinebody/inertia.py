"""Mass/inertia data and kinematical vs canonical momenta."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularInertia
from .kinematics import BodyState
from .tensors import InternalConfig, Metric, SYM_TOL, _frozen, _phi_matrix, frobenius


@dataclass(frozen=True)
class Inertia:
    """Total mass and the material quadrupole inertia tensor J (contravariant).

    Only the monopole (mass) and J are stored: higher multipoles are
    irrelevant for affine motion.  Jinv is the covariant inverse, never the
    eta-lowered J.
    """

    mass: float
    J: np.ndarray
    Jinv: np.ndarray = field(init=False)

    def __post_init__(self):
        if not self.mass > 0.0:
            raise ValueError("mass must be positive")
        J = _frozen(self.J)
        if frobenius(J - J.T) > SYM_TOL * max(1.0, frobenius(J)):
            raise ValueError("J must be symmetric")
        if np.any(np.linalg.eigvalsh(J) <= 0.0):
            raise SingularInertia("J must be positive definite")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "Jinv", _frozen(np.linalg.inv(J)))

    @classmethod
    def isotropic(cls, mass: float, scalar: float, eta: Metric) -> "Inertia":
        """J = scalar * eta^-1, the materially isotropic case."""
        return cls(mass, scalar * eta.inv)

    @property
    def dim(self) -> int:
        return self.J.shape[0]

    def isotropy_scalar(self, eta: Metric, tol: float = 1e-10):
        """Return I with J = I eta^-1 when J is eta-isotropic, else None."""
        i = np.trace(eta.mat @ self.J) / self.dim
        if frobenius(self.J - i * eta.inv) <= tol * max(1.0, frobenius(self.J)):
            return float(i)
        return None


def euler_inertia(phi, inertia: Inertia) -> np.ndarray:
    """Eulerian inertia J[phi] = phi J phi^T (spatial, configuration-dependent)."""
    p = _phi_matrix(phi)
    return p @ inertia.J @ p.T


@dataclass(frozen=True)
class KinematicalMomenta:
    """Linear momentum, internal affine momentum ('hyperspin') and spin."""

    k: np.ndarray
    K: np.ndarray
    S: np.ndarray
    Khat: np.ndarray
    khat: np.ndarray

    def __post_init__(self):
        for name in ("k", "K", "S", "Khat", "khat"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


def kinematical_momenta(state: BodyState, inertia: Inertia,
                        g: Metric) -> KinematicalMomenta:
    """k = m v, K = phi J phidot^T, S = K - K^T, plus co-moving pullbacks."""
    phi = state.phi
    K = phi @ inertia.J @ state.phidot.T
    pinv = np.linalg.inv(phi)
    return KinematicalMomenta(k=inertia.mass * state.v,
                              K=K,
                              S=K - K.T,
                              Khat=pinv @ K @ pinv.T,
                              khat=pinv @ (inertia.mass * state.v))


def orbital_affine_momentum(x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Orbital affine momentum Lambda^i_j = x^i p_j about the coordinate origin."""
    return np.outer(x, p)


@dataclass(frozen=True)
class CanonicalMomenta:
    """Canonical momenta with derived affine spin, spin and vorticity."""

    p: np.ndarray
    P: np.ndarray
    Sigma: np.ndarray
    SigmaHat: np.ndarray
    spin: np.ndarray
    vorticity: np.ndarray

    def __post_init__(self):
        for name in ("p", "P", "Sigma", "SigmaHat", "spin", "vorticity"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


def canonical_momenta_from_P(phi, p: np.ndarray, P: np.ndarray, g: Metric,
                             eta: Metric) -> CanonicalMomenta:
    """Derive Sigma = phi P, SigmaHat = P phi, spin and vorticity from (p, P)."""
    m = _phi_matrix(phi)
    Sigma = m @ P
    SigmaHat = P @ m
    return CanonicalMomenta(p=p, P=P, Sigma=Sigma, SigmaHat=SigmaHat,
                            spin=Sigma - g.transpose(Sigma),
                            vorticity=SigmaHat - eta.transpose(SigmaHat))


def canonical_from_kinematical(state: BodyState, inertia: Inertia, g: Metric,
                               eta: Metric, model=None) -> CanonicalMomenta:
    """
    Map a Newtonian state to canonical momenta under the given kinetic model.

    With model=None the d'Alembert model built from `inertia` is used, for
    which P = J phidot^T g and p = m g v, so Sigma = K g.
    """
    from .hamilton import DAlembert, legendre

    if model is None:
        model = DAlembert(mass=inertia.mass, J=inertia.J)
    ps = legendre(model, state, g, eta)
    return canonical_momenta_from_P(state.phi, ps.p, ps.P, g, eta)
