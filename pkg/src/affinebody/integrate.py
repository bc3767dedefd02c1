"""Fixed-step RK4 and embedded adaptive RKF45 steppers on flat state vectors."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

Rhs = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(f: Rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Fehlberg 4(5) tableau
_RKF_C = (0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5)
_RKF_A = (
    (),
    (0.25,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
_RKF_B4 = (25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0)
_RKF_B5 = (16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0,
           -9.0 / 50.0, 2.0 / 55.0)


def rkf45_step(f: Rhs, t: float, y: np.ndarray, h: float):
    """One embedded step; returns (y4, error_estimate)."""
    k = []
    for i in range(6):
        yi = y.copy()
        for j, a in enumerate(_RKF_A[i]):
            yi += h * a * k[j]
        k.append(f(t + _RKF_C[i] * h, yi))
    y4 = y.copy()
    y5 = y.copy()
    for i in range(6):
        y4 += h * _RKF_B4[i] * k[i]
        y5 += h * _RKF_B5[i] * k[i]
    return y4, y5 - y4


def integrate_fixed(f: Rhs, y0: np.ndarray, t0: float, dt: float, n_steps: int,
                    post_step: Optional[Callable[[float, np.ndarray], np.ndarray]] = None,
                    observer: Optional[Callable[[int, float, np.ndarray], None]] = None):
    """Classical RK4 over n_steps; observer fires at every step incl. step 0."""
    t, y = t0, np.array(y0, dtype=float)
    if observer is not None:
        observer(0, t, y)
    for i in range(1, n_steps + 1):
        y = rk4_step(f, t, y, dt)
        t = t0 + i * dt
        if post_step is not None:
            y = post_step(t, y)
        if observer is not None:
            observer(i, t, y)
    return t, y


def integrate_adaptive(f: Rhs, y0: np.ndarray, t0: float, t_end: float,
                       abs_tol: float = 1e-10, rel_tol: float = 1e-10,
                       h0: Optional[float] = None, h_min: float = 1e-12,
                       max_steps: int = 10 ** 7,
                       post_step: Optional[Callable[[float, np.ndarray], np.ndarray]] = None,
                       observer: Optional[Callable[[int, float, np.ndarray], None]] = None):
    """RKF45 with standard step-size control; propagates the 4th-order solution."""
    t, y = t0, np.array(y0, dtype=float)
    h = h0 if h0 is not None else (t_end - t0) / 100.0
    if observer is not None:
        observer(0, t, y)
    accepted = 0
    for _ in range(max_steps):
        if t >= t_end:
            return t, y
        h = min(h, t_end - t)
        y_new, err = rkf45_step(f, t, y, h)
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        ratio = float(np.max(np.abs(err) / scale))
        if ratio <= 1.0 or h <= h_min:
            t, y = t + h, y_new
            if post_step is not None:
                y = post_step(t, y)
            accepted += 1
            if observer is not None:
                observer(accepted, t, y)
        factor = 2.0 if ratio == 0.0 else 0.9 * ratio ** -0.2
        h = max(h * min(4.0, max(0.1, factor)), h_min)
    raise RuntimeError("rkf45: max_steps exceeded")
