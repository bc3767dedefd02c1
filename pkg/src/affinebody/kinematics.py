"""Affine velocities (gyration) and deformation rates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import (Configuration, InternalConfig, Metric, _frozen,
                      check_invertible)


@dataclass(frozen=True)
class BodyState:
    """Newtonian state: configuration plus generalized velocities."""

    config: Configuration
    v: np.ndarray
    phidot: np.ndarray

    def __post_init__(self):
        n = self.config.dim
        v = _frozen(self.v)
        pd = _frozen(self.phidot)
        if v.shape != (n,) or pd.shape != (n, n):
            raise ValueError("velocity shapes must match the configuration")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(pd))):
            raise ValueError("velocities must be finite")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "phidot", pd)

    @property
    def dim(self) -> int:
        return self.config.dim

    @property
    def x(self) -> np.ndarray:
        return self.config.x

    @property
    def phi(self) -> np.ndarray:
        return self.config.internal.phi


def body_state(x, phi, v, phidot) -> BodyState:
    """Convenience constructor from raw arrays."""
    return BodyState(Configuration(np.asarray(x, dtype=float),
                                   InternalConfig(phi)),
                     np.asarray(v, dtype=float), phidot)


@dataclass(frozen=True)
class AffineVelocity:
    """Spatial and co-moving affine velocity plus co-moving translation."""

    omega_spatial: np.ndarray
    omega_material: np.ndarray
    vhat: np.ndarray

    def __post_init__(self):
        for name in ("omega_spatial", "omega_material", "vhat"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


def affine_velocity(state: BodyState, g: Metric, eta: Metric) -> AffineVelocity:
    """Omega = phidot phi^-1, Omegahat = phi^-1 phidot, vhat = phi^-1 v."""
    phi = state.phi
    check_invertible(phi)
    pinv = np.linalg.inv(phi)
    return AffineVelocity(omega_spatial=state.phidot @ pinv,
                          omega_material=pinv @ state.phidot,
                          vhat=pinv @ state.v)


def split_velocity(omega: np.ndarray, metric: Metric):
    """
    Split a mixed velocity tensor into metric-antisymmetric and symmetric
    parts, Omega = omega + d.  Pass the spatial metric for the spatial split;
    the co-moving split uses the material metric (the two are inequivalent).
    """
    om = np.asarray(omega, dtype=float)
    d = metric.sym(om)
    return om - d, d


def green_rate(state: BodyState, g: Metric) -> np.ndarray:
    """dG/dt = phi^T (g Omega + Omega^T g) phi; equals twice the strain rate."""
    phi = state.phi
    check_invertible(phi)
    go = g.mat @ state.phidot @ np.linalg.inv(phi)
    return phi.T @ (go + go.T) @ phi


def cauchy_rate(state: BodyState, eta: Metric) -> np.ndarray:
    """dC/dt = -phi^-T (eta Omegahat + Omegahat^T eta) phi^-1."""
    phi = state.phi
    check_invertible(phi)
    pinv = np.linalg.inv(phi)
    eo = eta.mat @ (pinv @ state.phidot)
    return -pinv.T @ (eo + eo.T) @ pinv
