"""Regret and bound diagnostics computed from traces with exact gradients.

The quantities follow the bandit view of subspace selection: the reward of a
sketch is the norm of the projected gradient, so the instantaneous regret is
``R_k = ||grad f(x_k)|| - sqrt(grad^T P_k grad)`` and the dynamic regret is
``D_K = sum_k R_k``. The gradient drift ``V_K`` measures how nonstationary
the environment was.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sketching import _as_matrix, projected_norm_sq

__all__ = [
    "RegretTrace",
    "RegretRecorder",
    "instantaneous_regret",
    "dynamic_regret",
    "total_variation",
    "regret_bound",
    "check_gradient_error_bound",
    "check_potential_lemma",
    "check_decrease_accumulation",
    "potential_rhs",
    "BoundCheck",
]


def instantaneous_regret(grad, S) -> float:
    """``||g|| - sqrt(g^T P g)`` for the projector onto ``range(S)``; 0 when ``g = 0``."""
    g = np.asarray(grad, dtype=float)
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return 0.0
    captured = math.sqrt(min(max(projected_norm_sq(S, g), 0.0), gn * gn))
    return gn - captured


def total_variation(grads) -> float:
    """``sum_k ||grad_{k+1} - grad_k||`` over consecutive gradients."""
    G = np.asarray(grads, dtype=float)
    if len(G) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(G, axis=0), axis=1).sum())


@dataclass
class RegretTrace:
    """Per-iteration diagnostics of one run.

    ``grads[k]`` is the exact gradient at ``x_k``; ``final_grad`` is the one at
    ``x_{K+1}`` and closes the variation sum. ``probes[k]`` lists
    ``(lhs, weighted_norm)`` pairs for the gradient-error check:
    ``lhs = |s^T (grad - g_k)|`` and ``weighted_norm = ||s||_{C_k^{-1}}``.
    """

    d: int
    lam: float
    memory: int
    grads: list = field(default_factory=list)
    sketches: list = field(default_factory=list)
    directions: list = field(default_factory=list)
    estimates: list = field(default_factory=list)
    U: list = field(default_factory=list)
    probes: list = field(default_factory=list)
    regrets: list = field(default_factory=list)
    inner_gaps: list = field(default_factory=list)
    window_columns: list = field(default_factory=list)
    exact_responses: bool = True
    final_grad: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.grads)

    @property
    def D(self) -> float:
        return float(np.sum(self.regrets))

    def dynamic_regret_curve(self) -> np.ndarray:
        return np.cumsum(self.regrets)

    def variation(self, K: int | None = None) -> float:
        """``V_K``, using ``final_grad`` as ``grad f(x_{K+1})`` for the full trace."""
        K = len(self.grads) if K is None else K
        G = list(self.grads[:K + 1])
        if K >= len(self.grads) and self.final_grad is not None:
            G.append(self.final_grad)
        return total_variation(G)


class RegretRecorder:
    """Recorder for :func:`run_subspace_gd` that fills a :class:`RegretTrace`.

    Parameters
    ----------
    problem : Problem
        Source of exact gradients (the run unlocks them for recorders).
    probe_rng : Generator or int
        Draws the random unit probe of the gradient-error check.
    keep_sketches : bool
        Store every sketch (``O(d p)`` memory per iteration).
    """

    def __init__(self, problem, lam: float, memory: int, probe_rng=0, keep_sketches: bool = False):
        self.problem = problem
        self.trace = RegretTrace(problem.dim, lam, memory)
        self.rng = np.random.default_rng(probe_rng)
        self.keep_sketches = keep_sketches

    def __call__(self, k, x, S, info) -> None:
        t = self.trace
        grad = self.problem.gradient(x)
        t.grads.append(grad)
        t.regrets.append(instantaneous_regret(grad, S))
        if self.keep_sketches:
            t.sketches.append(np.array(S))
        state, s, U = info.get("state"), info.get("s"), info.get("U")
        t.directions.append(None if s is None else np.array(s))
        t.U.append(U)
        if state is None:
            t.probes.append([])
            t.estimates.append(None)
            t.inner_gaps.append(None)
            t.window_columns.append(None)
            return
        g_k = state.g.copy()
        t.estimates.append(g_k)
        t.window_columns.append([e.directions.shape[1] for e in state.window])
        probes = []
        candidates = []
        if s is not None:
            candidates.append(s)
        gn = np.linalg.norm(g_k)
        if gn > 0:
            candidates.append(g_k / gn)
        r = self.rng.standard_normal(t.d)
        candidates.append(r / np.linalg.norm(r))
        for v in candidates:
            lhs = abs(float(v @ (grad - g_k)))
            wn = math.sqrt(max(float(v @ (state.C_inverse @ v)), 0.0))
            probes.append((lhs, wn))
        t.probes.append(probes)
        gnorm = float(np.linalg.norm(grad))
        t.inner_gaps.append(None if s is None else gnorm - float(s @ grad))

    def finish(self, x_final) -> RegretTrace:
        with self.problem.diagnostic_access():
            self.trace.final_grad = self.problem.gradient(x_final)
        return self.trace


def dynamic_regret(trace: RegretTrace) -> float:
    """``D_K``: sum of the instantaneous regrets stored in ``trace``."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    return trace.D


def regret_bound(d: int, lam: float, M: int, V_K: float, U_values, K: int) -> float:
    """Right-hand side of the dynamic-regret theorem.

    ``2 M sqrt(d (M+1) / lam) V_K + sqrt(8 lam d sum U^2 / M * log(1 + M/(lam d))) sqrt(K)``
    """
    if M < 1:
        raise ValueError("the bound requires M >= 1")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    U = np.asarray(U_values, dtype=float)
    drift = 2.0 * M * math.sqrt(d * (M + 1) / lam) * V_K
    width = math.sqrt(8.0 * lam * d * float(U @ U) / M * math.log1p(M / (lam * d)))
    return drift + width * math.sqrt(K)


@dataclass
class BoundCheck:
    """Per-item ``(lhs, rhs)`` pairs with the tolerance used."""

    lhs: np.ndarray
    rhs: np.ndarray
    tol: float

    @property
    def slack(self) -> np.ndarray:
        return self.rhs - self.lhs

    @property
    def violations(self) -> int:
        return int(np.sum(self.lhs > self.rhs + self.tol))

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {
            "violations": self.violations,
            "tol": self.tol,
            "items": [{"lhs": float(a), "rhs": float(b), "slack": float(b - a)}
                      for a, b in zip(self.lhs, self.rhs)],
        }


def check_gradient_error_bound(trace: RegretTrace, tol: float = 1e-8) -> BoundCheck:
    """Compare ``|s^T (grad f(x_k) - g_k)|`` with the gradient-error bound for every probe.

    ``rhs = sqrt(d (M+1) / lam) * sum_{i=l(k)}^{k-1} ||grad_{i+1} - grad_i||
    + sqrt(lam) ||grad_k|| ||s||_{C_k^{-1}}`` with ``l(k) = max(1, k - M - 1)``.

    Raises
    ------
    ValueError
        If the trace was built from approximate responses or from windows
        holding more than one direction per iteration, which the bound does
        not cover.
    """
    if not trace.exact_responses:
        raise ValueError("gradient-error bound needs exact directional derivatives")
    if any(cols is not None and any(c != 1 for c in cols) for cols in trace.window_columns):
        raise ValueError("gradient-error bound needs one unit direction per iteration")
    d, lam, M = trace.d, trace.lam, trace.memory
    G = np.asarray(trace.grads)
    steps = np.linalg.norm(np.diff(G, axis=0), axis=1) if len(G) > 1 else np.zeros(0)
    csum = np.concatenate([[0.0], np.cumsum(steps)])
    coef = math.sqrt(d * (M + 1) / lam)
    lhs, rhs = [], []
    for idx, probes in enumerate(trace.probes):
        k = idx + 1
        lo = max(1, k - M - 1)
        # sum_{i=lo}^{k-1} ||grad_{i+1} - grad_i|| with 1-based iterates
        drift = csum[k - 1] - csum[lo - 1] if k > 1 else 0.0
        gnorm = float(np.linalg.norm(G[idx]))
        for a, wn in probes:
            lhs.append(a)
            rhs.append(coef * drift + math.sqrt(lam) * gnorm * wn)
    return BoundCheck(np.asarray(lhs), np.asarray(rhs), tol)


def potential_rhs(k: int, d: int, lam: float, M: int) -> float:
    return 2.0 * k * d / M * math.log1p(M / (lam * d))


def check_potential_lemma(directions, lam: float, M: int, d: int | None = None,
                          tol: float = 1e-9) -> tuple[float, float, float]:
    """Elliptical potential ``sum_j ||s_j||^2_{C_{j-1}^{-1}}`` under the sliding window.

    ``C_0 = lam I`` and ``C_j = C_{j-1} + s_j s_j^T - s_{j-M-1} s_{j-M-1}^T``,
    where the subtraction happens only once ``j - M - 1 >= 1``; ``C_j`` then
    holds the ``M + 1`` most recent directions.

    Returns
    -------
    (lhs, rhs, slack)
        ``rhs = (2 k d / M) log(1 + M/(lam d))`` and ``slack = rhs - lhs``.
        The caller decides whether a negative slack beyond ``tol`` is an error.
    """
    S = np.asarray(directions, dtype=float)
    if S.ndim != 2:
        raise ValueError("directions must be a (k, d) array")
    k, dim = S.shape
    d = dim if d is None else d
    if dim != d:
        raise ValueError("direction length does not match d")
    if M < 1:
        raise ValueError("M must be >= 1")
    if np.any(np.abs(np.linalg.norm(S, axis=1) - 1.0) > 1e-10):
        raise ValueError("directions must have unit norm")
    Cinv = np.eye(d) / lam
    lhs = 0.0
    for j in range(1, k + 1):
        s = S[j - 1]
        u = Cinv @ s
        q = float(s @ u)
        lhs += q
        Cinv -= np.outer(u, u) / (1.0 + q)
        if j - M - 1 >= 1:
            w = S[j - M - 2]
            v = Cinv @ w
            Cinv += np.outer(v, v) / (1.0 - float(w @ v))
    rhs = potential_rhs(k, d, lam, M)
    return lhs, rhs, rhs - lhs


def check_decrease_accumulation(grads, sketches, L: float, f0: float, f_star: float,
                                beta: float) -> tuple[float, float, float, float]:
    """Compare ``sum ||grad f(x_k)||^2`` with ``2 S_max L (f0 - f*) / (q (2 beta - 1))``.

    ``q`` is the smallest measured alignment ratio and ``S_max`` the largest
    eigenvalue of ``S_k^T S_k`` over the run.

    Returns
    -------
    (lhs, rhs, q, S_max)
    """
    if not 0.5 < beta < 1.0:
        raise ValueError("beta must lie in (1/2, 1)")
    lhs = 0.0
    q = math.inf
    smax = 0.0
    for g, S in zip(grads, sketches):
        g = np.asarray(g, dtype=float)
        S = _as_matrix(S)
        gg = float(g @ g)
        lhs += gg
        if gg > 0:
            q = min(q, projected_norm_sq(S, g) / gg)
        smax = max(smax, float(np.linalg.eigvalsh(S.T @ S)[-1]))
    if not q > 0:
        return lhs, math.inf, q, smax
    rhs = 2.0 * smax * L * (f0 - f_star) / (q * (2.0 * beta - 1.0))
    return lhs, rhs, q, smax
