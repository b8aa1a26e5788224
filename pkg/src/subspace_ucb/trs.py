"""Exact solution of small trust-region subproblems by eigendecomposition.

Solves ``min 0.5 z^T H z + g^T z`` subject to ``||z|| <= delta`` (or
``||z|| = delta``), including the hard case, following the classical
characterisation: ``(H + sigma I) z = -g`` with ``H + sigma I`` positive
semidefinite and ``sigma (delta - ||z||) = 0``.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.optimize

__all__ = ["solve_trs", "cauchy_point", "quadratic_value", "sphere_score_max"]


def quadratic_value(H, g, z) -> float:
    return float(0.5 * z @ (H @ z) + g @ z)


def cauchy_point(H, g, delta: float) -> np.ndarray:
    """Minimiser of the quadratic along ``-g`` inside the ball."""
    g = np.asarray(g, dtype=float)
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return np.zeros_like(g)
    curv = float(g @ (H @ g))
    tau = 1.0 if curv <= 0 else min(1.0, gn**3 / (delta * curv))
    return -tau * delta / gn * g


def solve_trs(H, g, delta: float, boundary: bool = False) -> np.ndarray:
    """Global minimiser of ``0.5 z^T H z + g^T z`` over the ball of radius ``delta``.

    Parameters
    ----------
    H : (m, m) symmetric array
    g : (m,) array
    delta : float
        Radius, positive.
    boundary : bool
        Force ``||z|| = delta`` (the sphere instead of the ball).
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    if delta <= 0:
        raise ValueError("delta must be positive")
    if g.shape[0] == 0:
        return np.zeros(0)
    lam, Q = np.linalg.eigh(0.5 * (H + H.T))
    gh = Q.T @ g
    lmin = float(lam[0])
    if not boundary and lmin > 0:
        z = -gh / lam
        if np.linalg.norm(z) <= delta:
            return Q @ z
    # ||z(sigma)|| decreases on (lo, inf); the root lies to the right of lo
    lo = -lmin if boundary else max(0.0, -lmin)
    width = 1e-12 * max(1.0, float(np.abs(lam).max()))

    def inv_norm(sigma):
        n = float(np.linalg.norm(gh / (lam + sigma)))
        return 1.0 / n if n > 0 else math.inf

    left = lo + width
    if inv_norm(left) >= 1.0 / delta:
        # hard case: the gradient has (numerically) no weight on the
        # bottom eigenvector, so pad along it up to the boundary
        near = lam + lo <= width
        z = np.where(near, 0.0, -gh / np.where(near, 1.0, lam + lo))
        if lo > 0 or boundary:
            tau = math.sqrt(max(delta**2 - float(z @ z), 0.0))
            z[int(np.argmax(near))] += tau
        return Q @ z
    hi = lo + float(np.linalg.norm(gh)) / delta + 1.0
    while inv_norm(hi) < 1.0 / delta:
        hi = lo + 2.0 * (hi - lo)
    sigma = scipy.optimize.brentq(lambda s: inv_norm(s) - 1.0 / delta, left, hi,
                                  xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    z = -gh / (lam + sigma)
    return Q @ (z * (delta / np.linalg.norm(z)))


def sphere_score_max(h, T, c: float) -> np.ndarray:
    """Global maximiser of ``h^T y + c sqrt(y^T T y)`` over the unit sphere.

    With ``B = T^{1/2}`` the value equals ``max_{||z||=1} ||h + c B z||``,
    a concave minimisation over the sphere, and the maximiser is
    ``y = (h + c B z) / ||h + c B z||``.
    """
    h = np.asarray(h, dtype=float)
    lam, Q = np.linalg.eigh(0.5 * (T + T.T))
    lam = np.maximum(lam, 0.0)
    root = np.sqrt(lam)
    hh = Q.T @ h
    if c == 0.0:
        n = np.linalg.norm(hh)
        y = hh / n if n > 0 else np.eye(len(h))[0]
        return Q @ y
    # minimise -||hh + c diag(root) z||^2 on the unit sphere
    Hq = -2.0 * c**2 * np.diag(lam)
    gq = -2.0 * c * root * hh
    z = solve_trs(Hq, gq, 1.0, boundary=True)
    y = hh + c * root * z
    n = np.linalg.norm(y)
    if n == 0:
        y = np.zeros_like(hh)
        y[-1] = 1.0
        n = 1.0
    return Q @ (y / n)
