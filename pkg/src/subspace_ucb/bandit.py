"""Sliding-window linear UCB for choosing gradient-aligned directions.

The state keeps a ridge estimate ``g = C^{-1} b`` of the gradient from the
directional derivatives observed over the last ``M + 1`` iterations::

    C = lam I + sum_{window} sum_i s_i s_i^T,     b = sum_{window} sum_i r_i s_i

``C^{-1}`` is maintained with Sherman-Morrison updates, one per column
entering or leaving the window. For large ``d`` the same sequence of
updates is applied as one Woodbury block whose pivots are exactly the
rank-one denominators, so the degeneracy test is unchanged. A new direction maximises the upper
confidence score ``g^T s + sqrt(lam) U ||s||_{C^{-1}}`` over the unit sphere,
or over a finite set of candidate columns.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg.blas import dgemm, dger

from .trs import sphere_score_max

__all__ = [
    "UcbState",
    "WindowEntry",
    "ucb_init",
    "ucb_select",
    "ucb_select_from_columns",
    "ucb_update",
    "update_gradient_bound",
]

_DENOM_FLOOR = 1e-14


@dataclass
class WindowEntry:
    """Directions (columns) and responses observed in one iteration."""

    directions: np.ndarray
    responses: np.ndarray
    unit: np.ndarray = None
    norms: np.ndarray = None

    def __post_init__(self):
        norms = np.linalg.norm(self.directions, axis=0)
        self.norms = norms
        safe = np.where(norms > 0, norms, 1.0)
        self.unit = self.directions / safe


class _ColumnRing:
    """Unit window directions stored contiguously; entries leave from the front."""

    def __init__(self, dim: int):
        self.buf = np.empty((dim, 0))
        self.norms = np.empty(0)
        self.head = 0
        self.tail = 0

    def push(self, unit: np.ndarray, norms: np.ndarray) -> None:
        k = unit.shape[1]
        if self.tail + k > self.buf.shape[1]:
            live = self.tail - self.head
            cap = max(2 * (live + k), 16)
            buf = np.empty((self.buf.shape[0], cap))
            nrm = np.empty(cap)
            buf[:, :live] = self.buf[:, self.head:self.tail]
            nrm[:live] = self.norms[self.head:self.tail]
            self.buf, self.norms, self.head, self.tail = buf, nrm, 0, live
        self.buf[:, self.tail:self.tail + k] = unit
        self.norms[self.tail:self.tail + k] = norms
        self.tail += k

    def pop(self, k: int) -> None:
        self.head += k

    @property
    def units(self) -> np.ndarray:
        return self.buf[:, self.head:self.tail]

    @property
    def raw_norms(self) -> np.ndarray:
        return self.norms[self.head:self.tail]


class UcbState:
    """Mutable sliding-window UCB state owned by a single optimizer run.

    Parameters
    ----------
    dim : int
        Ambient dimension ``d``.
    lam : float
        Ridge regulariser ``lambda > 0``.
    memory : int
        Window length ``M >= 0``; entries from the last ``M + 1`` iterations
        are kept.
    mu : float
        Exponential-moving-average weight for the gradient-norm estimate.
    seed : int or Generator
        Seeds the random start of the sphere subproblem solver.
    step, max_iter, tol : float, int, float
        Projected-gradient-ascent step (on the score normalised by
        ``||g|| + U``), iteration cap, and movement tolerance, used by the
        ``"pga"`` solver. ``step=inf`` moves straight to the normalised score
        gradient.
    start_norm : float
        Norm of the random starting point of the ascent.
    n_probes : int
        Random unit vectors scored; the best one seeds an extra ascent.
    update_method : {"auto", "rank_one", "block"}
        How the inverse is refreshed; ``"auto"`` uses blocks for ``d > 200``.
    solver : {"krylov", "pga"}
        Subproblem solver. ``"krylov"`` maximises the score exactly over a
        block Krylov space of ``C^{-1}`` seeded with ``g`` and the starts, of
        dimension about ``krylov_dim`` plus the number of starts (exact
        globally when that reaches ``d``); ``"pga"`` runs projected gradient
        ascent in the full space from every start.
    """

    def __init__(self, dim: int, lam: float, memory: int, mu: float = 0.8, *,
                 seed=0, step: float = 0.1, max_iter: int = 200, tol: float = 1e-8,
                 start_norm: float = 0.01, n_probes: int = 4, update_method: str = "auto",
                 solver: str = "krylov", krylov_dim: int = 12):
        if lam <= 0:
            raise ValueError("lambda must be positive")
        if memory < 0:
            raise ValueError("memory must be nonnegative")
        if not 0.0 < mu < 1.0:
            raise ValueError("mu must lie in (0, 1)")
        self.dim = int(dim)
        self.lam = float(lam)
        self.memory = int(memory)
        self.mu = float(mu)
        self.step = step
        self.max_iter = max_iter
        self.tol = tol
        self.start_norm = start_norm
        self.n_probes = n_probes
        if update_method not in ("auto", "rank_one", "block"):
            raise ValueError(f"unknown update method {update_method!r}")
        if update_method == "auto":
            update_method = "block" if self.dim > 200 else "rank_one"
        self.update_method = update_method
        if solver not in ("krylov", "pga"):
            raise ValueError(f"unknown subproblem solver {solver!r}")
        self.solver = solver
        self.krylov_dim = krylov_dim
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.window: deque[WindowEntry] = deque()
        self._ring = _ColumnRing(self.dim)
        self.C_inverse = np.asfortranarray(np.eye(self.dim) / self.lam)
        self.b = np.zeros(self.dim)
        self.g = np.zeros(self.dim)
        self.U: float | None = None
        self.rebuilds = 0
        self.last_iterations = 0

    # -- covariance bookkeeping -------------------------------------------
    def covariance(self) -> np.ndarray:
        """Dense ``C`` rebuilt from the window."""
        C = self.lam * np.eye(self.dim)
        for entry in self.window:
            C += entry.directions @ entry.directions.T
        return C

    def _rhs(self) -> np.ndarray:
        b = np.zeros(self.dim)
        for entry in self.window:
            b += entry.directions @ entry.responses
        return b

    def _rebuild(self) -> None:
        self.C_inverse = np.asfortranarray(np.linalg.inv(self.covariance()))
        self.rebuilds += 1

    def _rank_one(self, s: np.ndarray, sign: float) -> bool:
        """``C <- C + sign * s s^T``; returns False when the denominator degenerates."""
        u = self.C_inverse @ s
        denom = 1.0 + sign * float(s @ u)
        if denom <= _DENOM_FLOOR:
            return False
        self.C_inverse = dger(-sign / denom, u, u, a=self.C_inverse, overwrite_a=True)
        return True

    def update(self, directions, responses) -> "UcbState":
        """Push one iteration's ``(direction, response)`` pairs and slide the window."""
        S = np.asarray(directions, dtype=float)
        if S.ndim == 1:
            S = S[:, None]
        r = np.atleast_1d(np.asarray(responses, dtype=float))
        if S.shape[0] != self.dim:
            raise ValueError(f"directions have {S.shape[0]} rows, expected {self.dim}")
        if S.shape[1] != r.shape[0]:
            raise ValueError("one response per direction is required")
        entry = WindowEntry(S.copy(), r.copy())
        self.window.append(entry)
        self._ring.push(entry.unit, entry.norms)
        evicted = []
        while len(self.window) > self.memory + 1:
            evicted.append(self.window.popleft())
            self._ring.pop(evicted[-1].directions.shape[1])
        cols = [S] + [old.directions for old in evicted]
        signs = np.concatenate([np.ones(S.shape[1])] + [-np.ones(o.directions.shape[1]) for o in evicted])
        if self.update_method == "block":
            healthy = self._block(np.hstack(cols), signs)
        else:
            healthy = True
            for V, sign in zip(np.hstack(cols).T, signs):
                healthy = healthy and self._rank_one(V, sign)
        self.b += S @ r
        for old in evicted:
            self.b -= old.directions @ old.responses
        if not healthy:
            self._rebuild()
            self.b = self._rhs()
        self.g = self.C_inverse @ self.b
        return self

    def _block(self, V: np.ndarray, signs: np.ndarray) -> bool:
        """Apply ``C <- C + sum_i signs_i v_i v_i^T`` in one Woodbury step.

        The unpivoted LDL pivots of ``diag(signs) + V^T C^{-1} V`` equal
        ``signs_i`` times the sequential Sherman-Morrison denominators.
        """
        if V.shape[1] == 0:
            return True
        W = self.C_inverse @ V
        K = V.T @ W + np.diag(signs)
        n = K.shape[0]
        L = np.eye(n)
        D = np.zeros(n)
        A = K.copy()
        for i in range(n):
            D[i] = A[i, i]
            if signs[i] * D[i] <= _DENOM_FLOOR:
                return False
            L[i + 1:, i] = A[i + 1:, i] / D[i]
            A[i + 1:, i + 1:] -= np.outer(L[i + 1:, i], A[i, i + 1:])
        # C_new^{-1} = C^{-1} - W K^{-1} W^T with K = L D L^T
        Y = scipy.linalg.solve_triangular(L, W.T, lower=True, unit_diagonal=True)
        self.C_inverse = dgemm(-1.0, Y.T, Y / D[:, None], beta=1.0, c=self.C_inverse,
                               overwrite_c=True)
        return True

    # -- scoring and selection ----------------------------------------------
    def scores(self, S, U: float) -> np.ndarray:
        """Upper confidence scores ``g^T s + sqrt(lam) U ||s||_{C^{-1}}`` per column."""
        S = np.asarray(S, dtype=float)
        if S.ndim == 1:
            S = S[:, None]
        quad = np.einsum("ij,ij->j", S, self.C_inverse @ S)
        return self.g @ S + math.sqrt(self.lam) * U * np.sqrt(np.maximum(quad, 0.0))

    def _score_one(self, s: np.ndarray, U: float) -> float:
        q = float(s @ (self.C_inverse @ s))
        return float(self.g @ s) + math.sqrt(self.lam) * U * math.sqrt(max(q, 0.0))

    def _ascend(self, U: float, S: np.ndarray, g=None, apply=None) -> np.ndarray:
        """Projected gradient ascent on the unit sphere from each column of ``S``.

        ``g`` and ``apply`` (the action of ``C^{-1}``) default to the full
        problem; the Krylov solver passes their reduced counterparts. The
        starts are iterated together. With ``step = inf`` each iterate is the
        normalised score gradient, which increases the (convex) score
        monotonically.
        """
        g = self.g if g is None else g
        apply = (lambda X: self.C_inverse @ X) if apply is None else apply
        c = math.sqrt(self.lam) * U
        scale = float(np.linalg.norm(g)) + U
        scale = scale if scale > 0 else 1.0
        S = S / np.linalg.norm(S, axis=0)
        active = np.ones(S.shape[1], dtype=bool)
        it = 0
        for it in range(1, self.max_iter + 1):
            A = S[:, active]
            CA = apply(A)
            q = np.sqrt(np.maximum(np.einsum("ij,ij->j", A, CA), 0.0))
            coef = np.divide(c, q, out=np.zeros_like(q), where=q > 0)
            ascent = g[:, None] + CA * coef
            nxt = ascent if math.isinf(self.step) else A + (self.step / scale) * ascent
            n = np.linalg.norm(nxt, axis=0)
            ok = n > 0
            nxt[:, ok] /= n[ok]
            nxt[:, ~ok] = A[:, ~ok]
            moved = np.linalg.norm(nxt - A, axis=0)
            S[:, active] = nxt
            idx = np.flatnonzero(active)
            active[idx[(moved < self.tol) | ~ok]] = False
            if not active.any():
                break
        self.last_iterations += it
        return S

    def _krylov(self, U: float, starts: np.ndarray) -> np.ndarray:
        """Exact maximiser of the score restricted to a block Krylov subspace.

        The basis is spanned by ``g``, the start vectors and their images under
        powers of ``C^{-1}``, built one block product at a time with full
        reorthogonalisation, until it holds ``krylov_dim + #starts`` vectors.
        When that is at least ``d`` the basis is ``I_d`` and the result is the
        global maximiser.
        """
        cap = self.krylov_dim + starts.shape[1] + 1
        if cap >= self.dim:
            V = np.eye(self.dim)
            AV = self.C_inverse
        else:
            blocks, images = [], []
            X = np.column_stack([self.g, starts])
            n = 0
            while n < cap:
                for B in blocks:
                    X = X - B @ (B.T @ X)
                for B in blocks:
                    X = X - B @ (B.T @ X)
                Q, R = np.linalg.qr(X)
                keep = np.abs(np.diag(R)) > 1e-8 * max(1.0, float(np.abs(R).max()))
                Q = Q[:, keep][:, :cap - n]
                if Q.shape[1] == 0:
                    break
                AQ = self.C_inverse @ Q
                blocks.append(Q)
                images.append(AQ)
                n += Q.shape[1]
                X = AQ
            V, AV = np.hstack(blocks), np.hstack(images)
        y = sphere_score_max(V.T @ self.g, V.T @ AV, math.sqrt(self.lam) * U)
        self.last_iterations += V.shape[1]
        s = V @ y
        return (s / np.linalg.norm(s))[:, None]

    def select(self, U: float) -> np.ndarray:
        """Approximate maximiser of the confidence score over the unit sphere.

        The starts are a random point of norm ``start_norm``, ``g/||g||``
        and a few random probes (only the best-scoring one for ``"pga"``);
        see ``solver``. The best ascent
        result also competes with every stored window direction.
        """
        if U < 0:
            raise ValueError("U must be nonnegative")
        self.last_iterations = 0
        s0 = self.rng.standard_normal(self.dim)
        starts = [s0 * (self.start_norm / np.linalg.norm(s0))]
        gn = np.linalg.norm(self.g)
        if gn > 0:
            starts.append(self.g / gn)
        if self.n_probes:
            P = self.rng.standard_normal((self.dim, self.n_probes))
            P /= np.linalg.norm(P, axis=0)
            if self.solver == "krylov":
                # the subspace solution dominates every vector it contains
                starts.extend(P.T)
            else:
                starts.append(P[:, int(np.argmax(self.scores(P, U)))])
        starts = np.column_stack(starts)
        if self.solver == "krylov":
            ends = self._krylov(U, starts)
        else:
            ends = self._ascend(U, starts)
        vals = self.scores(ends, U)
        j = int(np.argmax(vals))
        best, best_val = ends[:, j], float(vals[j])
        c = math.sqrt(self.lam) * U
        W = self._ring.units
        if W.shape[1]:
            # unit w in the window has w^T C^{-1} w <= 1/(lam + ||w_raw||^2)
            bound = self.g @ W + c / np.sqrt(self.lam + self._ring.raw_norms**2)
            cand = np.flatnonzero(bound > best_val)
            if cand.size:
                vals = self.scores(W[:, cand], U)
                j = int(np.argmax(vals))
                if vals[j] > best_val:
                    best, best_val = W[:, cand[j]], float(vals[j])
        return best / np.linalg.norm(best)

    def select_from_columns(self, U: float, candidates) -> tuple[int, np.ndarray]:
        """Best-scoring column of ``candidates``; ties go to the lowest index."""
        C = np.asarray(candidates, dtype=float)
        if C.ndim == 1:
            C = C[:, None]
        if C.shape[1] == 0:
            raise ValueError("no candidate columns")
        vals = self.scores(C, U)
        top = float(vals.max())
        idx = int(np.flatnonzero(vals >= top - 1e-12 * max(1.0, abs(top)))[0])
        return idx, C[:, idx].copy()

    # -- gradient-norm estimate -------------------------------------------
    def update_gradient_bound(self, sketch_norm: float, d: int, p: int) -> float:
        """EMA of ``(d/p) * ||S^T grad f||``; the first call initialises it."""
        if p < 1:
            raise ValueError("p must be >= 1")
        if sketch_norm < 0:
            raise ValueError("sketch_norm must be nonnegative")
        return self.average_gradient_norm((d / p) * sketch_norm)

    def average_gradient_norm(self, estimate: float) -> float:
        """Fold one raw gradient-norm estimate into the moving average ``U``."""
        if estimate < 0:
            raise ValueError("estimate must be nonnegative")
        self.U = estimate if self.U is None else self.mu * self.U + (1.0 - self.mu) * estimate
        return self.U

    def snapshot(self) -> dict:
        return {
            "g": self.g.copy(),
            "C_inverse": np.array(self.C_inverse),
            "U": self.U,
            "window_size": len(self.window),
        }


def ucb_init(d: int, lam: float, M: int, mu: float = 0.8, **kw) -> UcbState:
    return UcbState(d, lam, M, mu, **kw)


def ucb_select(state: UcbState, U: float) -> np.ndarray:
    return state.select(U)


def ucb_select_from_columns(state: UcbState, U: float, candidates) -> tuple[int, np.ndarray]:
    return state.select_from_columns(U, candidates)


def ucb_update(state: UcbState, directions, responses) -> UcbState:
    return state.update(directions, responses)


def update_gradient_bound(state: UcbState, sketch_norm: float, d: int, p: int) -> float:
    return state.update_gradient_bound(sketch_norm, d, p)
