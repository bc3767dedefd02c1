"""
Dense small-matrix algebra for affine-body configurations.

Conventions: a mixed tensor X^i_j is a 2-D array X[i, j] (first index up,
second down).  Metrics are covariant, stored as symmetric positive-definite
matrices.  The internal configuration phi maps material vectors to spatial
vectors, phi[i, A] = phi^i_A.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularConfiguration

DET_EPS = 1e-12
COND_CAP = 1e12
SYM_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def frobenius(x: np.ndarray) -> float:
    return float(np.linalg.norm(x))


@dataclass(frozen=True)
class Metric:
    """Flat metric on an n-dimensional space (covariant components)."""

    mat: np.ndarray
    inv: np.ndarray = field(init=False)

    def __post_init__(self):
        m = _frozen(self.mat)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("metric must be a square matrix")
        if frobenius(m - m.T) > SYM_TOL * max(1.0, frobenius(m)):
            raise ValueError("metric must be symmetric")
        if np.any(np.linalg.eigvalsh(m) <= 0.0):
            raise ValueError("metric must be positive definite")
        object.__setattr__(self, "mat", m)
        object.__setattr__(self, "inv", _frozen(np.linalg.inv(m)))

    @classmethod
    def identity(cls, n: int) -> "Metric":
        return cls(np.eye(n))

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def chol_upper(self) -> np.ndarray:
        """Upper-triangular A with A.T @ A == mat (congruence to identity)."""
        return np.linalg.cholesky(self.mat).T

    def transpose(self, x: np.ndarray) -> np.ndarray:
        """Metric transpose of a mixed tensor: (X^T)^i_j = m^{ik} m_{jl} X^l_k."""
        return self.inv @ x.T @ self.mat

    def sym(self, x: np.ndarray) -> np.ndarray:
        return 0.5 * (x + self.transpose(x))

    def antisym(self, x: np.ndarray) -> np.ndarray:
        return 0.5 * (x - self.transpose(x))


def _phi_matrix(phi) -> np.ndarray:
    if isinstance(phi, InternalConfig):
        return phi.phi
    return np.asarray(phi, dtype=float)


def check_invertible(phi: np.ndarray, det_eps: float = DET_EPS,
                     cond_cap: float = COND_CAP) -> None:
    d = float(np.linalg.det(phi))
    if abs(d) < det_eps:
        raise SingularConfiguration(f"|det phi| = {abs(d):.3e} < {det_eps:.1e}")
    if np.linalg.cond(phi) > cond_cap:
        raise SingularConfiguration("condition number of phi exceeds cap")


@dataclass(frozen=True)
class InternalConfig:
    """Linear part of an affine placement, phi in GL+(n)."""

    phi: np.ndarray

    def __post_init__(self):
        p = _frozen(self.phi)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("phi must be a square matrix")
        d = float(np.linalg.det(p))
        if abs(d) < DET_EPS:
            raise SingularConfiguration(f"|det phi| = {abs(d):.3e} < {DET_EPS:.1e}")
        if d < 0.0:
            raise ValueError("phi must be orientation-preserving (det phi > 0)")
        object.__setattr__(self, "phi", p)

    @property
    def dim(self) -> int:
        return self.phi.shape[0]


@dataclass(frozen=True)
class Configuration:
    """Center-of-mass position plus internal configuration."""

    x: np.ndarray
    internal: InternalConfig

    def __post_init__(self):
        x = _frozen(self.x)
        if x.shape != (self.internal.dim,):
            raise ValueError("x must be an n-vector matching phi")
        object.__setattr__(self, "x", x)

    @property
    def dim(self) -> int:
        return self.internal.dim


@dataclass(frozen=True)
class DeformationBundle:
    """Green/Cauchy deformation tensors, their byproducts and invariants."""

    G: np.ndarray
    C: np.ndarray
    Ginv: np.ndarray
    Cinv: np.ndarray
    Ghat: np.ndarray
    Chat: np.ndarray
    E: np.ndarray
    e: np.ndarray
    invariants_K: np.ndarray

    def __post_init__(self):
        for name in ("G", "C", "Ginv", "Cinv", "Ghat", "Chat", "E", "e",
                     "invariants_K"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


def deformation_bundle(phi, g: Metric, eta: Metric) -> DeformationBundle:
    """
    Deformation tensors of the internal configuration.

    G = phi^T g phi (Green, material), C = phi^-T eta phi^-1 (Cauchy,
    spatial), the mixed tensors Ghat = eta^-1 G and Chat = g^-1 C, the
    Lagrange/Euler measures E = (G - eta)/2 and e = (g - C)/2, and the basic
    invariants K_a = tr(Ghat^a), a = 1..n.
    """
    p = _phi_matrix(phi)
    check_invertible(p)
    pinv = np.linalg.inv(p)
    G = p.T @ g.mat @ p
    C = pinv.T @ eta.mat @ pinv
    Ginv = pinv @ g.inv @ pinv.T
    Cinv = p @ eta.inv @ p.T
    Ghat = eta.inv @ G
    Chat = g.inv @ C
    E = 0.5 * (G - eta.mat)
    e = 0.5 * (g.mat - C)
    n = p.shape[0]
    K = np.empty(n)
    acc = np.eye(n)
    for a in range(n):
        acc = acc @ Ghat
        K[a] = np.trace(acc)
    return DeformationBundle(G=G, C=C, Ginv=Ginv, Cinv=Cinv, Ghat=Ghat,
                             Chat=Chat, E=E, e=e, invariants_K=K)


def deformation_invariants(phi, g: Metric, eta: Metric) -> np.ndarray:
    """Invariants K_a = tr((eta^-1 G)^a), a = 1..n, without the full bundle."""
    p = _phi_matrix(phi)
    check_invertible(p)
    Ghat = eta.inv @ (p.T @ g.mat @ p)
    n = p.shape[0]
    K = np.empty(n)
    acc = np.eye(n)
    for a in range(n):
        acc = acc @ Ghat
        K[a] = np.trace(acc)
    return K


@dataclass(frozen=True)
class TwoPolarFactors:
    """phi = L diag(Q) R^-1 with g-orthonormal L and eta-orthonormal R."""

    L: np.ndarray
    R: np.ndarray
    q: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        for name in ("L", "R", "q", "Q"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    def reconstruct(self, eta: Metric) -> np.ndarray:
        """phi = L diag(Q) R^-1, using R^-1 = R^T eta."""
        return self.L @ np.diag(self.Q) @ self.R.T @ eta.mat


def two_polar(phi, g: Metric, eta: Metric) -> TwoPolarFactors:
    """
    Two-polar decomposition phi = L diag(Q) R^-1.

    Columns of R are eta-orthonormal eigenvectors of Ghat = eta^-1 G with
    eigenvalues exp(2 q^a); columns of L are derived as L_a = phi R_a / Q^a so
    the reconstruction holds exactly.  q is sorted non-increasing and each
    R-column has its largest-magnitude entry made positive.  Coincident
    stretchings are accepted (any orthonormal eigenbasis).
    """
    p = _phi_matrix(phi)
    check_invertible(p)
    G = p.T @ g.mat @ p
    A = eta.chol_upper()
    Ainv = np.linalg.inv(A)
    S = Ainv.T @ G @ Ainv
    lam, V = np.linalg.eigh(0.5 * (S + S.T))
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    V = V[:, order]
    if np.any(lam <= 0.0):
        raise SingularConfiguration("non-positive stretching eigenvalue")
    R = Ainv @ V
    # normalize eta-norms exactly and fix the column sign convention
    for a in range(R.shape[1]):
        col = R[:, a]
        col = col / np.sqrt(col @ eta.mat @ col)
        k = int(np.argmax(np.abs(col)))
        if col[k] < 0.0:
            col = -col
        R[:, a] = col
    Q = np.sqrt(lam)
    q = 0.5 * np.log(lam)
    L = (p @ R) / Q[np.newaxis, :]
    return TwoPolarFactors(L=L, R=R, q=q, Q=Q)


@dataclass(frozen=True)
class PolarFactors:
    """phi = U_iso A_sym = B_sym U_iso with the unique isometry U_iso."""

    U_iso: np.ndarray
    A_sym: np.ndarray
    B_sym: np.ndarray

    def __post_init__(self):
        for name in ("U_iso", "A_sym", "B_sym"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


def polar(phi, g: Metric, eta: Metric) -> PolarFactors:
    """
    Metric polar decomposition via the two-polar factors.

    U_iso = L R^-1 is the unique (eta,g)-isometry, A_sym = R diag(Q) R^-1 is
    eta-symmetric positive, B_sym = L diag(Q) L^-1 is g-symmetric positive.
    """
    f = two_polar(phi, g, eta)
    Rinv = f.R.T @ eta.mat
    Linv = f.L.T @ g.mat
    D = np.diag(f.Q)
    return PolarFactors(U_iso=f.L @ Rinv, A_sym=f.R @ D @ Rinv,
                        B_sym=f.L @ D @ Linv)


# Pade-13 coefficients for the scaling-and-squaring exponential.
_PADE13 = (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
           1187353796428800.0, 129060195264000.0, 10559470521600.0,
           670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
           960960.0, 16380.0, 182.0, 1.0)
_THETA13 = 5.371920351148152


def matrix_exponential(x: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a [13/13] Pade core."""
    a = np.asarray(x, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix_exponential expects a square matrix")
    n = a.shape[0]
    norm = np.linalg.norm(a, 1)
    s = 0
    if norm > _THETA13:
        s = int(np.ceil(np.log2(norm / _THETA13)))
        a = a / (2.0 ** s)
    b = _PADE13
    ident = np.eye(n)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r
