"""
Reduced dynamics in two-polar variables.

State: deformation invariants q^a with conjugate momenta p_a, plus the
antisymmetric top momenta rho_hat (L-top) and tau_hat (R-top) in the
R^n-material representation.  The coupling amplitudes M = -rho_hat - tau_hat
and N = rho_hat - tau_hat enter the reduced kinetic energies through
sinh/cosh (hyperbolic), (Q^a -+ Q^b) (d'Alembert) or sin/cos (compactified)
pair terms.

The canonical affine spin pulls back to Shat = R^-1 SigmaHat R with
diag(Shat) = p and, for a != b (x := q^a - q^b, lam := e^x),

    Shat_ab = (lam rho_ab + tau_ab) / (lam^2 - 1),
    Shat_ba = Shat_ab + tau_ab,

which reproduces C(2) = sum p^2 + (1/16) sum M^2/sinh^2((q^a-q^b)/2)
- (1/16) sum N^2/cosh^2((q^a-q^b)/2) identically.

Along any doubly isotropic flow rho = L rho_hat L^-1 and tau = R tau_hat R^-1
are constants of motion (rho is the spin, -tau the vorticity), so the top
momenta evolve by d(rho_hat)/dt = [rho_hat, chi_hat] with the L-top angular
velocity chi_hat = -dH/d(rho_hat), and likewise for tau_hat.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (CoincidentInvariants, DegenerateReduction,
                     DimensionMismatch)
from .hamilton import PhaseState, phase_state
from .integrate import rk4_step
from .tensors import (Metric, TwoPolarFactors, _frozen, matrix_exponential,
                      two_polar)

GAP_TOL = 1e-10
GUARD_GAP = 1e-8
HARD_GAP = 1e-12


@dataclass(frozen=True)
class TwoPolarState:
    """Reduced state (q, p, rho_hat, tau_hat) with the gyroscopic legs."""

    factors: TwoPolarFactors
    p: np.ndarray
    rho_hat: np.ndarray
    tau_hat: np.ndarray

    def __post_init__(self):
        n = self.factors.dim
        p = _frozen(self.p)
        r = _frozen(self.rho_hat)
        t = _frozen(self.tau_hat)
        if p.shape != (n,) or r.shape != (n, n) or t.shape != (n, n):
            raise ValueError("reduced-state shapes must match the factors")
        for m in (r, t):
            if float(np.max(np.abs(m + m.T))) > 1e-10 * max(1.0, float(np.max(np.abs(m)))):
                raise ValueError("top momenta must be antisymmetric")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "rho_hat", r)
        object.__setattr__(self, "tau_hat", t)

    @property
    def dim(self) -> int:
        return self.factors.dim

    @property
    def q(self) -> np.ndarray:
        return self.factors.q

    @property
    def M(self) -> np.ndarray:
        return -self.rho_hat - self.tau_hat

    @property
    def N_lat(self) -> np.ndarray:
        return self.rho_hat - self.tau_hat

    @property
    def m_ampl(self) -> float:
        """Repulsion amplitude of the n=2 subsystem (M-charge)."""
        if self.dim != 2:
            raise DimensionMismatch("m_ampl defined for n = 2")
        return float(self.M[0, 1])

    @property
    def nu_lat(self) -> float:
        """Attraction amplitude of the n=2 subsystem (N-charge)."""
        if self.dim != 2:
            raise DimensionMismatch("nu_lat defined for n = 2")
        return float(self.N_lat[0, 1])

    def spin(self) -> np.ndarray:
        """rho = L rho_hat L^-1; equals the canonical spin S."""
        L = self.factors.L
        return L @ self.rho_hat @ np.linalg.inv(L)

    def vorticity(self) -> np.ndarray:
        """-tau = -R tau_hat R^-1; equals the canonical vorticity V."""
        R = self.factors.R
        return -R @ self.tau_hat @ np.linalg.inv(R)


def min_gap(q: np.ndarray, compact: bool = False) -> float:
    n = q.shape[0]
    best = np.inf
    for a in range(n):
        for b in range(a + 1, n):
            d = q[a] - q[b]
            if compact:
                d = (d + np.pi) % (2.0 * np.pi) - np.pi
            best = min(best, abs(d))
    return float(best)


def _shat_from_state(state: TwoPolarState) -> np.ndarray:
    """Shat = R^-1 SigmaHat R from the reduced variables."""
    n = state.dim
    q = state.q
    shat = np.diag(state.p).astype(float)
    for a in range(n):
        for b in range(a + 1, n):
            x = q[a] - q[b]
            r = state.rho_hat[a, b]
            t = state.tau_hat[a, b]
            u = (r + t * np.exp(-x)) / (2.0 * np.sinh(x))
            shat[a, b] = u
            shat[b, a] = u + t
    return shat


def reduce(state: PhaseState, g: Metric, eta: Metric) -> TwoPolarState:
    """Two-polar reduction of a canonical state (internal sector)."""
    f = two_polar(state.phi, g, eta)
    if min_gap(f.q) < GAP_TOL:
        raise DegenerateReduction("coincident stretchings")
    n = state.dim
    rinv = f.R.T @ eta.mat
    shat = rinv @ state.SigmaHat @ f.R
    p = np.diag(shat).copy()
    rho = np.zeros((n, n))
    tau = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            lam = np.exp(f.q[a] - f.q[b])
            u, w = shat[a, b], shat[b, a]
            rho[a, b] = lam * u - w / lam
            tau[a, b] = -(u - w)
            rho[b, a] = -rho[a, b]
            tau[b, a] = -tau[a, b]
    return TwoPolarState(factors=f, p=p, rho_hat=rho, tau_hat=tau)


def reconstruct(state: TwoPolarState, g: Metric, eta: Metric) -> PhaseState:
    """Inverse of reduce on the internal sector (x = 0, translational p = 0)."""
    n = state.dim
    phi = state.factors.reconstruct(eta)
    shat = _shat_from_state(state)
    rinv = state.factors.R.T @ eta.mat
    sigmahat = state.factors.R @ shat @ rinv
    P = sigmahat @ np.linalg.inv(phi)
    return phase_state(np.zeros(n), phi, np.zeros(n), P)


# ---------------------------------------------------------------------------
# lattice models


class LatticeModel:
    """Base marker for reduced kinetic-energy models."""


@dataclass(frozen=True)
class HyperbolicCasimir(LatticeModel):
    """C(2)/(2 alpha): sinh^-2 repulsion and cosh^-2 attraction of invariants."""

    alpha: float

    def __post_init__(self):
        if self.alpha == 0.0:
            raise ValueError("alpha must be nonzero")


@dataclass(frozen=True)
class DAlembertIsotropic(LatticeModel):
    """Traditional d'Alembert model with isotropic inertia, in Q-variables."""

    I: float

    def __post_init__(self):
        if self.I == 0.0:
            raise ValueError("I must be nonzero")


@dataclass(frozen=True)
class SutherlandCompact(LatticeModel):
    """Compactified invariants on the circle: sin^-2 and cos^-2 repulsion."""

    A: float

    def __post_init__(self):
        if self.A == 0.0:
            raise ValueError("A must be nonzero")


@dataclass(frozen=True)
class TwoDimClosed(LatticeModel):
    """The closed n=2 subsystem in (q, x, p, p_x) variables."""

    A: float

    def __post_init__(self):
        if self.A == 0.0:
            raise ValueError("A must be nonzero")


def _pair_terms(model: LatticeModel, q: np.ndarray, M: np.ndarray,
                N: np.ndarray):
    """Yield (a, b, h_pair, dh_dx_a) for unordered pairs; guards denominators.

    h_pair is the pair's contribution to H; dh_dx_a its derivative with
    respect to x = q^a - q^b.
    """
    n = q.shape[0]
    for a in range(n):
        for b in range(a + 1, n):
            x = q[a] - q[b]
            m2 = M[a, b] ** 2
            n2 = N[a, b] ** 2
            if isinstance(model, (HyperbolicCasimir, TwoDimClosed)):
                alpha = model.alpha if isinstance(model, HyperbolicCasimir) \
                    else model.A
                s, c = np.sinh(0.5 * x), np.cosh(0.5 * x)
                if abs(s) < HARD_GAP and m2 > 0.0:
                    raise CoincidentInvariants("sinh denominator underflow")
                rep = m2 / s ** 2 / (16.0 * alpha) if m2 > 0.0 else 0.0
                att = n2 / c ** 2 / (16.0 * alpha)
                d_rep = -m2 * c / s ** 3 / (16.0 * alpha) if m2 > 0.0 else 0.0
                d_att = -n2 * s / c ** 3 / (16.0 * alpha)
                yield a, b, rep - att, d_rep - d_att
            elif isinstance(model, DAlembertIsotropic):
                qa, qb = np.exp(q[a]), np.exp(q[b])
                dm = qa - qb
                sm = qa + qb
                if abs(dm) < HARD_GAP and m2 > 0.0:
                    raise CoincidentInvariants("(Q^a - Q^b) underflow")
                rep = m2 / dm ** 2 / (4.0 * model.I) if m2 > 0.0 else 0.0
                att = n2 / sm ** 2 / (4.0 * model.I)
                # derivatives w.r.t. q^a (dQ^a/dq^a = Q^a)
                d_rep_a = -2.0 * m2 * qa / dm ** 3 / (4.0 * model.I) \
                    if m2 > 0.0 else 0.0
                d_att_a = -2.0 * n2 * qa / sm ** 3 / (4.0 * model.I)
                yield a, b, rep + att, (d_rep_a, d_att_a)
            elif isinstance(model, SutherlandCompact):
                s, c = np.sin(0.5 * x), np.cos(0.5 * x)
                if abs(s) < HARD_GAP and m2 > 0.0:
                    raise CoincidentInvariants("sin denominator underflow")
                if abs(c) < HARD_GAP and n2 > 0.0:
                    raise CoincidentInvariants("cos denominator underflow")
                rep = m2 / s ** 2 / (16.0 * model.A) if m2 > 0.0 else 0.0
                att = n2 / c ** 2 / (16.0 * model.A) if n2 > 0.0 else 0.0
                d_rep = -m2 * c / s ** 3 / (16.0 * model.A) if m2 > 0.0 else 0.0
                d_att = n2 * s / c ** 3 / (16.0 * model.A) if n2 > 0.0 else 0.0
                yield a, b, rep + att, d_rep + d_att
            else:
                raise TypeError(f"unknown lattice model {type(model).__name__}")


def lattice_hamiltonian(model: LatticeModel, state: TwoPolarState) -> float:
    """Reduced kinetic Hamiltonian of the lattice model at a reduced state."""
    q, p = state.q, state.p
    M, N = state.M, state.N_lat
    if isinstance(model, TwoDimClosed) and state.dim != 2:
        raise DimensionMismatch("TwoDimClosed requires n = 2")
    if isinstance(model, (HyperbolicCasimir, TwoDimClosed)):
        alpha = model.alpha if isinstance(model, HyperbolicCasimir) else model.A
        h = 0.5 * float(p @ p) / alpha
    elif isinstance(model, DAlembertIsotropic):
        h = 0.5 * float(np.sum(p ** 2 * np.exp(-2.0 * q))) / model.I
    elif isinstance(model, SutherlandCompact):
        h = 0.5 * float(p @ p) / model.A
    else:
        raise TypeError(f"unknown lattice model {type(model).__name__}")
    for _, _, h_pair, _ in _pair_terms(model, q, M, N):
        h += h_pair
    return h


def two_dim_closed_form(model: TwoDimClosed, state: TwoPolarState) -> float:
    """The literal n=2 closed form in (p, p_x, m, n, x) variables."""
    if state.dim != 2:
        raise DimensionMismatch("TwoDimClosed requires n = 2")
    A = model.A
    p_tot = float(state.p[0] + state.p[1])
    p_x = 0.5 * float(state.p[1] - state.p[0])
    x = float(state.q[1] - state.q[0])
    m = state.m_ampl
    nl = state.nu_lat
    s = np.sinh(0.5 * x)
    if abs(s) < HARD_GAP and m != 0.0:
        raise CoincidentInvariants("sinh denominator underflow")
    rep = m ** 2 / (16.0 * A * s ** 2) if m != 0.0 else 0.0
    return (p_tot ** 2 / (4.0 * A) + p_x ** 2 / A + rep
            - nl ** 2 / (16.0 * A * np.cosh(0.5 * x) ** 2))


def lattice_gradients(model: LatticeModel, state: TwoPolarState):
    """Analytic (dH/dq, dH/dp, dH/drho, dH/dtau); the spin gradients are the
    antisymmetric matrices pairing independent entries (a < b)."""
    n = state.dim
    q, p = state.q, state.p
    M, N = state.M, state.N_lat
    dq = np.zeros(n)
    if isinstance(model, (HyperbolicCasimir, TwoDimClosed)):
        alpha = model.alpha if isinstance(model, HyperbolicCasimir) else model.A
        dp = p / alpha
    elif isinstance(model, DAlembertIsotropic):
        dp = p * np.exp(-2.0 * q) / model.I
        dq += -p ** 2 * np.exp(-2.0 * q) / model.I
    elif isinstance(model, SutherlandCompact):
        dp = p / model.A
    else:
        raise TypeError(f"unknown lattice model {type(model).__name__}")
    d_m = np.zeros((n, n))
    d_n = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            x = q[a] - q[b]
            if isinstance(model, (HyperbolicCasimir, TwoDimClosed)):
                alpha = model.alpha if isinstance(model, HyperbolicCasimir) \
                    else model.A
                s, c = np.sinh(0.5 * x), np.cosh(0.5 * x)
                if abs(s) < HARD_GAP and abs(M[a, b]) > 0.0:
                    raise CoincidentInvariants("sinh denominator underflow")
                d_m[a, b] = M[a, b] / s ** 2 / (8.0 * alpha) \
                    if M[a, b] != 0.0 else 0.0
                d_n[a, b] = -N[a, b] / c ** 2 / (8.0 * alpha)
                dxa = (-M[a, b] ** 2 * c / s ** 3 / (16.0 * alpha)
                       if M[a, b] != 0.0 else 0.0) \
                    + N[a, b] ** 2 * s / c ** 3 / (16.0 * alpha)
                dq[a] += dxa
                dq[b] -= dxa
            elif isinstance(model, DAlembertIsotropic):
                qa, qb = np.exp(q[a]), np.exp(q[b])
                dm, sm = qa - qb, qa + qb
                if abs(dm) < HARD_GAP and abs(M[a, b]) > 0.0:
                    raise CoincidentInvariants("(Q^a - Q^b) underflow")
                d_m[a, b] = M[a, b] / dm ** 2 / (2.0 * model.I) \
                    if M[a, b] != 0.0 else 0.0
                d_n[a, b] = N[a, b] / sm ** 2 / (2.0 * model.I)
                rep = (-2.0 * M[a, b] ** 2 / dm ** 3 / (4.0 * model.I)
                       if M[a, b] != 0.0 else 0.0)
                att = -2.0 * N[a, b] ** 2 / sm ** 3 / (4.0 * model.I)
                dq[a] += rep * qa + att * qa
                dq[b] += -rep * qb + att * qb
            else:  # SutherlandCompact
                s, c = np.sin(0.5 * x), np.cos(0.5 * x)
                if abs(s) < HARD_GAP and abs(M[a, b]) > 0.0:
                    raise CoincidentInvariants("sin denominator underflow")
                if abs(c) < HARD_GAP and abs(N[a, b]) > 0.0:
                    raise CoincidentInvariants("cos denominator underflow")
                d_m[a, b] = M[a, b] / s ** 2 / (8.0 * model.A) \
                    if M[a, b] != 0.0 else 0.0
                d_n[a, b] = N[a, b] / c ** 2 / (8.0 * model.A) \
                    if N[a, b] != 0.0 else 0.0
                dxa = (-M[a, b] ** 2 * c / s ** 3 / (16.0 * model.A)
                       if M[a, b] != 0.0 else 0.0) \
                    + (N[a, b] ** 2 * s / c ** 3 / (16.0 * model.A)
                       if N[a, b] != 0.0 else 0.0)
                dq[a] += dxa
                dq[b] -= dxa
            d_m[b, a] = -d_m[a, b]
            d_n[b, a] = -d_n[a, b]
    # chain rule through M = -rho - tau, N = rho - tau
    d_rho = -d_m + d_n
    d_tau = -d_m - d_n
    return dq, dp, d_rho, d_tau


def lattice_rhs(model: LatticeModel, state: TwoPolarState):
    """
    Time derivatives (dq, dp, drho_hat, dtau_hat, chi_hat, theta_hat).

    chi_hat = -dH/drho_hat and theta_hat = -dH/dtau_hat are the top angular
    velocities; the legs evolve by dL/dt = L chi_hat, dR/dt = R theta_hat.
    """
    dq_h, dp_h, d_rho, d_tau = lattice_gradients(model, state)
    chi = -d_rho
    theta = -d_tau
    drho = state.rho_hat @ chi - chi @ state.rho_hat
    dtau = state.tau_hat @ theta - theta @ state.tau_hat
    return dp_h, -dq_h, drho, dtau, chi, theta


# ---------------------------------------------------------------------------
# reduced integration with the coincidence guard


def pack_lattice(state: TwoPolarState, with_legs: bool = True) -> np.ndarray:
    n = state.dim
    iu = np.triu_indices(n, 1)
    parts = [state.q, state.p, state.rho_hat[iu], state.tau_hat[iu]]
    if with_legs:
        parts += [state.factors.L.ravel(), state.factors.R.ravel()]
    return np.concatenate(parts)


def unpack_lattice(y: np.ndarray, n: int, with_legs: bool = True,
                   template: Optional[TwoPolarFactors] = None) -> TwoPolarState:
    m = n * (n - 1) // 2
    iu = np.triu_indices(n, 1)
    q = y[:n]
    p = y[n:2 * n]
    rho = np.zeros((n, n))
    tau = np.zeros((n, n))
    rho[iu] = y[2 * n:2 * n + m]
    tau[iu] = y[2 * n + m:2 * n + 2 * m]
    rho -= rho.T
    tau -= tau.T
    if with_legs:
        L = y[2 * n + 2 * m:2 * n + 2 * m + n * n].reshape(n, n)
        R = y[2 * n + 2 * m + n * n:].reshape(n, n)
    elif template is not None:
        L, R = template.L, template.R
    else:
        L = R = np.eye(n)
    factors = TwoPolarFactors(L=L, R=R, q=q, Q=np.exp(q))
    return TwoPolarState(factors=factors, p=p, rho_hat=rho, tau_hat=tau)


def lattice_flat_rhs(model: LatticeModel, n: int, with_legs: bool = True):
    """Flat ODE right-hand side over pack_lattice coordinates."""
    iu = np.triu_indices(n, 1)

    def f(t: float, y: np.ndarray) -> np.ndarray:
        state = unpack_lattice(y, n, with_legs)
        dq, dp, drho, dtau, chi, theta = lattice_rhs(model, state)
        parts = [dq, dp, drho[iu], dtau[iu]]
        if with_legs:
            parts += [(state.factors.L @ chi).ravel(),
                      (state.factors.R @ theta).ravel()]
        return np.concatenate(parts)

    return f


def _crosses_coincidence(q_old: np.ndarray, q_new: np.ndarray,
                         compact: bool) -> bool:
    """A pair difference changed sign: the step jumped over a coincidence."""
    n = q_old.shape[0]
    for a in range(n):
        for b in range(a + 1, n):
            d0 = q_old[a] - q_old[b]
            d1 = q_new[a] - q_new[b]
            if compact:
                d0 = (d0 + np.pi) % (2.0 * np.pi) - np.pi
                d1 = (d1 + np.pi) % (2.0 * np.pi) - np.pi
                # ignore wrap-around flips far from coincidence
                if min(abs(d0), abs(d1)) > 0.5 * np.pi:
                    continue
            if d0 * d1 < 0.0:
                return True
    return False


def integrate_lattice(model: LatticeModel, state0: TwoPolarState, dt: float,
                      n_steps: int, with_legs: bool = True,
                      guard: float = GUARD_GAP, max_rejects: int = 60,
                      observer=None) -> TwoPolarState:
    """
    Fixed-step RK4 on the reduced variables with a repulsive-singularity
    guard: a step landing within `guard` of a q-coincidence (or jumping
    across one) is rejected and retried at half the step; more than
    `max_rejects` rejections abort.
    """
    n = state0.dim
    f = lattice_flat_rhs(model, n, with_legs)
    compact = isinstance(model, SutherlandCompact)
    y = pack_lattice(state0, with_legs)
    t = 0.0
    if observer is not None:
        observer(0, t, unpack_lattice(y, n, with_legs))
    for i in range(1, n_steps + 1):
        target = i * dt
        rejects = 0
        while t < target - 1e-15 * max(1.0, target):
            h = target - t
            while True:
                y_new = rk4_step(f, t, y, h)
                if min_gap(y_new[:n], compact) >= guard and \
                        not _crosses_coincidence(y[:n], y_new[:n], compact):
                    break
                rejects += 1
                if rejects > max_rejects:
                    raise CoincidentInvariants(
                        "step rejection limit reached near q-coincidence")
                h *= 0.5
            t, y = t + h, y_new
        if observer is not None:
            observer(i, t, unpack_lattice(y, n, with_legs))
    return unpack_lattice(y, n, with_legs)


# ---------------------------------------------------------------------------
# exponential geodesics, stationary solutions, threshold classification


def exponential_geodesic(E: np.ndarray, phi0: np.ndarray, t: float,
                         side: str = "spatial") -> np.ndarray:
    """Exact geodesic of the doubly affine (I = 0) model.

    side="spatial": phi(t) = exp(E t) phi0 with spatial E; side="material":
    phi(t) = phi0 exp(Ehat t).
    """
    p0 = np.asarray(phi0, dtype=float)
    e = np.asarray(E, dtype=float)
    if side == "spatial":
        return matrix_exponential(e * t) @ p0
    if side == "material":
        return p0 @ matrix_exponential(e * t)
    raise ValueError("side must be 'spatial' or 'material'")


def is_stationary_generator(E: np.ndarray, metric: Metric,
                            side: str = "spatial", tol: float = 1e-10) -> bool:
    """True iff [E, E^T] = 0 with the metric transpose (metric-normal E)."""
    e = np.asarray(E, dtype=float)
    et = metric.transpose(e)
    comm = e @ et - et @ e
    scale = max(1.0, float(np.linalg.norm(e)) ** 2)
    return float(np.linalg.norm(comm)) <= tol * scale


class ThresholdClass(enum.Enum):
    BOUNDED = "bounded"
    UNBOUNDED = "unbounded"
    CRITICAL = "critical"


def threshold_classify(state: TwoPolarState,
                       model: Optional[TwoDimClosed] = None) -> ThresholdClass:
    """n=2 geodetic classification: attraction must beat repulsion for
    bounded shear vibrations (|nu_lat| > |m_ampl|)."""
    if state.dim != 2:
        raise DimensionMismatch("threshold classification requires n = 2")
    m = abs(state.m_ampl)
    nl = abs(state.nu_lat)
    if abs(m - nl) < 1e-12:
        return ThresholdClass.CRITICAL
    return ThresholdClass.BOUNDED if nl > m else ThresholdClass.UNBOUNDED
