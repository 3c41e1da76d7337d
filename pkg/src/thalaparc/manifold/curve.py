"""Low-dimensional similarity curve fit.

The layout optimizer scores latent distances with phi(r) = 1 / (1 + a * r^(2b)).
The (a, b) pair is chosen by damped Gauss-Newton least squares so that phi
matches the piecewise target that is 1 inside ``min_dist`` and decays as
exp(-(r - min_dist) / spread) beyond it, sampled on [0, 3 * spread].
"""

from __future__ import annotations

import numpy as np

from ..errors import ConvergenceError

GRID_POINTS = 300
GRADIENT_TOL = 1e-8
MAX_ITER = 500


def similarity_curve(d: np.ndarray, a: float, b: float) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    return 1.0 / (1.0 + a * np.power(d, 2.0 * b, where=d > 0, out=np.zeros_like(d)))


def _target(d: np.ndarray, min_dist: float, spread: float) -> np.ndarray:
    y = np.ones_like(d)
    tail = d >= min_dist
    y[tail] = np.exp(-(d[tail] - min_dist) / spread)
    return y


def fit_curve(min_dist: float, spread: float) -> tuple[float, float]:
    """Fit (a, b) by Levenberg-damped Gauss-Newton; raises on non-convergence."""
    if min_dist < 0:
        raise ValueError("min_dist must be non-negative")
    if spread <= 0:
        raise ValueError("spread must be positive")
    d = np.linspace(0.0, 3.0 * spread, GRID_POINTS)
    y = _target(d, min_dist, spread)
    positive = d > 0

    a, b = 1.0, 1.0
    lam = 1e-3
    for _ in range(MAX_ITER):
        powt = np.zeros_like(d)
        powt[positive] = np.power(d[positive], 2.0 * b)
        denom = 1.0 + a * powt
        f = 1.0 / denom
        r = f - y
        inv_sq = 1.0 / (denom * denom)
        ja = -powt * inv_sq
        jb = np.zeros_like(d)
        jb[positive] = -2.0 * a * powt[positive] * np.log(d[positive]) * inv_sq[positive]
        grad = np.array([ja @ r, jb @ r])
        if np.linalg.norm(grad) <= GRADIENT_TOL:
            return float(a), float(b)
        jtj = np.array([[ja @ ja, ja @ jb], [ja @ jb, jb @ jb]])
        loss = 0.5 * (r @ r)
        for _attempt in range(50):
            try:
                step = np.linalg.solve(jtj + lam * np.eye(2), -grad)
            except np.linalg.LinAlgError:
                lam *= 3.0
                continue
            a_new, b_new = a + step[0], b + step[1]
            if a_new <= 0 or b_new <= 0:
                lam *= 3.0
                continue
            powt_new = np.zeros_like(d)
            powt_new[positive] = np.power(d[positive], 2.0 * b_new)
            r_new = 1.0 / (1.0 + a_new * powt_new) - y
            if 0.5 * (r_new @ r_new) < loss:
                a, b = a_new, b_new
                lam = max(lam / 3.0, 1e-12)
                break
            lam *= 3.0
        else:
            raise ConvergenceError("similarity-curve fit stalled")
    raise ConvergenceError(f"similarity-curve fit did not converge in {MAX_ITER} iterations")
