"""Derivative-free subspace trust-region solver with UCB-chosen geometry directions.

Every iteration finds the directions already supported by nearby evaluated
points, adds one geometry direction (chosen by the UCB state, at random, or
both), evaluates ``x + delta q`` along each new direction, fits a quadratic
interpolation model on the resulting affine subspace and takes a trust-region
step inside it. The ``full_space`` variant evaluates geometry points along the
whole orthogonal complement, which recovers a classic model-based method.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .bandit import UcbState
from .history import RunHistory
from .problems import Problem
from .sketching import orthogonal_augment
from .trs import cauchy_point, quadratic_value, solve_trs

__all__ = [
    "PointBank",
    "TrConfig",
    "SubspaceModel",
    "ModelBuildError",
    "VARIANTS",
    "identify_initial_subspace",
    "select_geometry_direction",
    "build_subspace_model",
    "solve_trust_region_subproblem",
    "run_ss_pounders",
]

VARIANTS = ("ucb", "random_only", "ucb_plus_random", "full_space")

#: CLI spellings of the variants
VARIANT_ALIASES = {"ucb": "ucb", "random": "random_only", "ucb+random": "ucb_plus_random",
                   "full": "full_space"}

_DUPLICATE_TOL = 1e-14


class ModelBuildError(RuntimeError):
    """Too few usable interpolation points for a model of the requested dimension."""


class PointBank:
    """Insertion-ordered record of evaluated points and their values."""

    def __init__(self, dim: int):
        self.dim = int(dim)
        self._points = np.empty((16, self.dim))
        self._values = np.empty(16)
        self.size = 0

    def __len__(self) -> int:
        return self.size

    @property
    def points(self) -> np.ndarray:
        return self._points[:self.size]

    @property
    def values(self) -> np.ndarray:
        return self._values[:self.size]

    def find(self, x) -> Optional[int]:
        """Index of a stored point within ``1e-14`` (max norm) of ``x``, if any."""
        if self.size == 0:
            return None
        diff = np.abs(self.points - np.asarray(x, dtype=float)).max(axis=1)
        hits = np.flatnonzero(diff <= _DUPLICATE_TOL)
        return int(hits[0]) if hits.size else None

    def add(self, x, value: float) -> int:
        """Store ``(x, value)`` unless ``x`` is already present; return its index."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.dim},)")
        idx = self.find(x)
        if idx is not None:
            return idx
        if self.size == len(self._values):
            self._points = np.concatenate([self._points, np.empty_like(self._points)])
            self._values = np.concatenate([self._values, np.empty_like(self._values)])
        self._points[self.size] = x
        self._values[self.size] = float(value)
        self.size += 1
        return self.size - 1

    def value_of(self, x) -> float:
        idx = self.find(x)
        if idx is None:
            raise KeyError("point not in bank")
        return float(self._values[idx])


@dataclass
class TrConfig:
    """Settings of the derivative-free subspace trust-region solver.

    ``delta0`` defaults to ``0.1 max(1, ||x0||_inf)`` and ``delta_max`` to
    ``1e3 delta0``. ``p_extra`` is the number of random directions added per
    iteration; None picks the variant default (1 for ``random_only`` and
    ``ucb_plus_random``, 0 otherwise). ``budget`` defaults to ``50 (d + 2)``
    evaluations. ``npmax`` caps the interpolation set at
    ``min((m+1)(m+2)/2, npmax(m))`` points, with ``2m + 1`` by default.
    """

    eta1: float = 0.1
    eta2: float = 0.01
    nu1: float = 0.5
    nu2: float = 2.0
    delta0: Optional[float] = None
    delta_max: Optional[float] = None
    c: float = 10.0
    theta1: float = 0.001
    p_extra: Optional[int] = None
    variant: str = "ucb"
    budget: Optional[int] = None
    lam: Optional[float] = None
    memory: Optional[int] = None
    mu: float = 0.8
    npmax: Optional[int] = None
    delta_min: float = 1e-12

    def __post_init__(self):
        self.variant = VARIANT_ALIASES.get(self.variant, self.variant)
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.eta1 <= 0 or self.eta2 <= 0:
            raise ValueError("eta1 and eta2 must be positive")
        if not 0.0 < self.nu1 < 1.0 < self.nu2:
            raise ValueError("need 0 < nu1 < 1 < nu2")
        if self.delta0 is not None and self.delta0 <= 0:
            raise ValueError("delta0 must be positive")
        if (self.delta0 is not None and self.delta_max is not None
                and self.delta_max < self.delta0):
            raise ValueError("need delta0 <= delta_max")
        if self.c < 1:
            raise ValueError("c must be >= 1")
        if not 0.0 < self.theta1 <= 1.0 / self.c:
            raise ValueError("theta1 must lie in (0, 1/c]")
        if self.p_extra is not None and self.p_extra < 0:
            raise ValueError("p_extra must be nonnegative")
        if not 0.0 < self.mu < 1.0:
            raise ValueError("mu must lie in (0, 1)")

    def resolved(self, problem: Problem) -> dict:
        d = problem.dim
        delta0 = self.delta0
        if delta0 is None:
            delta0 = 0.1 * max(1.0, float(np.abs(problem.initial_point).max()))
        delta_max = 1e3 * delta0 if self.delta_max is None else float(self.delta_max)
        p_extra = self.p_extra
        if p_extra is None:
            p_extra = 1 if self.variant in ("random_only", "ucb_plus_random") else 0
        budget = 50 * (d + 2) if self.budget is None else int(self.budget)
        minimum = d + 2 if self.variant == "full_space" else 3
        if budget < minimum:
            raise ValueError(f"budget {budget} is below the minimum {minimum} for {self.variant}")
        lam = 1.0 / d if self.lam is None else float(self.lam)
        memory = d if self.memory is None else int(self.memory)
        return {"delta0": delta0, "delta_max": delta_max, "p_extra": p_extra,
                "budget": budget, "lam": lam, "memory": memory}


@dataclass
class SubspaceModel:
    """Quadratic ``m(z) = c + g^T z + z^T H z / 2`` on ``center + basis z``."""

    basis: np.ndarray
    constant: float
    gradient: np.ndarray
    hessian: np.ndarray
    center: np.ndarray
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def __call__(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return self.constant + quadratic_value(self.hessian, self.gradient, z)

    def embed(self, z) -> np.ndarray:
        return self.center + self.basis @ np.asarray(z, dtype=float)

    def max_interpolation_error(self) -> float:
        """Largest ``|m(z_i) - f_i| / max(1, |f_i|)`` over the interpolation set."""
        if len(self.values) == 0:
            return 0.0
        errs = [abs(self(z) - f) / max(1.0, abs(f)) for z, f in zip(self.points, self.values)]
        return float(max(errs))


# ---------------------------------------------------------------------------
# Subspace identification and augmentation
# ---------------------------------------------------------------------------

def _complement(S: np.ndarray, d: int) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``range(S)``."""
    m = S.shape[1]
    if m == 0:
        return np.eye(d)
    if m == d:
        return np.zeros((d, 0))
    Q = np.linalg.qr(S, mode="complete")[0]
    return Q[:, m:]


def identify_initial_subspace(x, bank: PointBank, delta: float, c: float = 10.0,
                              theta1: float = 0.001):
    """Greedily collect bank displacements that add volume around ``x``.

    A point ``y`` contributes when ``||y - x|| <= c delta`` and the part of
    ``(y - x) / (c delta)`` orthogonal to the directions accepted so far has
    norm at least ``theta1``. Points are visited in insertion order and the
    loop stops once ``d`` directions are held.

    Returns
    -------
    S : (d, m) array
        Orthonormal basis of the accepted directions.
    S_perp : (d, d - m) array
        Orthonormal basis of the orthogonal complement.
    Q : (d, d) array
        ``[S, S_perp]``, an orthogonal matrix.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    if delta <= 0:
        raise ValueError("delta must be positive")
    radius = c * delta
    cols: list[np.ndarray] = []
    if len(bank):
        disp = bank.points - x
        dist = np.linalg.norm(disp, axis=1)
        near = np.flatnonzero((dist <= radius) & (dist > 0))
        cols = _greedy_insert(disp[near] / radius, theta1, np.zeros(len(near)), d)[1]
    S = np.column_stack(cols) if cols else np.zeros((d, 0))
    S_perp = _complement(S, d)
    return S, S_perp, np.hstack([S, S_perp])


def select_geometry_direction(state: UcbState, U: float, S_perp) -> Optional[np.ndarray]:
    """Best column of ``S_perp`` under the UCB score, or None when ``S_perp`` is empty."""
    S_perp = np.asarray(S_perp, dtype=float)
    if S_perp.ndim != 2 or S_perp.shape[1] == 0:
        return None
    return state.select_from_columns(U, S_perp)[1]


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

def _greedy_insert(R: np.ndarray, threshold: float, floor: np.ndarray, limit: int):
    """Scan the rows of ``R`` in order, keeping each whose component orthogonal
    to the rows kept so far has norm ``>= max(threshold, floor_i)``.

    This is column insertion into a QR factorisation. Residual norms are
    downdated with each new direction, and the pivot's residual is recomputed
    exactly (with reorthogonalisation) before it is accepted.

    Returns
    -------
    (indices, directions)
        Positions of the kept rows and the orthonormal directions they added.
    """
    R = np.asarray(R, dtype=float)
    sq = np.einsum("ij,ij->i", R, R)
    bar = np.maximum(threshold, floor) ** 2
    kept: list[int] = []
    Qm = np.empty((min(limit, R.shape[1]), R.shape[1]))
    start = 0
    while start < len(R) and len(kept) < len(Qm):
        hits = np.flatnonzero((sq[start:] >= bar[start:]) & (sq[start:] > 0))
        if hits.size == 0:
            break
        i = start + int(hits[0])
        v = R[i].copy()
        if kept:
            B = Qm[:len(kept)]
            for _ in range(2):
                v -= B.T @ (B @ v)
        n = float(np.linalg.norm(v))
        start = i + 1
        if n * n < bar[i] or n == 0.0:
            continue
        q = v / n
        Qm[len(kept)] = q
        kept.append(i)
        if start < len(R):
            sq[start:] -= (R[start:] @ q) ** 2
    return kept, list(Qm[:len(kept)])


def _choose_points(Z: np.ndarray, order: np.ndarray, m: int, cap: int, tol: float) -> list[int]:
    """Pick ``m`` affinely independent points, then fill up to ``cap`` in order."""
    rows = Z[order]
    floor = tol * np.linalg.norm(rows, axis=1)
    kept = _greedy_insert(rows, 0.0, floor, m)[0]
    if len(kept) < m:
        raise ModelBuildError(f"only {len(kept)} of {m} independent directions are supported")
    linear = [int(order[i]) for i in kept]
    chosen = set(linear)
    extra = [int(i) for i in order if int(i) not in chosen][:max(cap - m, 0)]
    return linear + extra


def _mfn_fit(W: np.ndarray, fvals: np.ndarray, f_center: float):
    """Minimum-Frobenius-norm quadratic through the origin value and ``(W_i, f_i)``.

    Solves the KKT system of ``min ||H||_F^2`` subject to interpolation, with
    the Hessian written as ``H = sum_i lambda_i w_i w_i^T``.
    """
    n, m = W.shape
    full = (m + 1) * (m + 2) // 2
    rhs_f = fvals - f_center
    if n + 1 >= full:
        # square system: fit every quadratic coefficient directly
        iu = np.triu_indices(m)
        weight = np.where(iu[0] == iu[1], 0.5, 1.0)
        A = np.hstack([W, W[:, iu[0]] * W[:, iu[1]] * weight])
        coef = np.linalg.lstsq(A, rhs_f, rcond=None)[0]
        g = coef[:m]
        H = np.zeros((m, m))
        H[iu] = coef[m:]
        H = H + np.triu(H, 1).T
        return f_center, g, H
    # points include the center at w = 0, whose row in A vanishes
    Wc = np.vstack([np.zeros(m), W])
    A = 0.5 * (Wc @ Wc.T) ** 2
    Phi = np.hstack([np.ones((n + 1, 1)), Wc])
    K = np.block([[A, Phi], [Phi.T, np.zeros((m + 1, m + 1))]])
    rhs = np.concatenate([[0.0], rhs_f, np.zeros(m + 1)])
    try:
        # nearly coplanar points make K ill-conditioned; the LU solution still
        # interpolates to working accuracy, so the warning is not surfaced
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            sol = scipy.linalg.solve(K, rhs, assume_a="sym")
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    lam_ = sol[:n + 1]
    c0, g = sol[n + 1], sol[n + 2:]
    H = (Wc * lam_[:, None]).T @ Wc
    return f_center + c0, g, H


def build_subspace_model(bank: PointBank, x, S, delta: float, c: float = 10.0,
                         npmax: Optional[int] = None, f_center: float | None = None,
                         independence_tol: float = 1e-6) -> SubspaceModel:
    """Fit a quadratic in the coordinates ``z = S^T (y - x)`` of nearby bank points.

    Candidates lie within ``2 c delta`` of ``x`` and are ranked by projected
    distance, newest first on ties. The first ``m`` affinely independent ones
    are always used, then the nearest remaining ones up to the cap of
    ``min((m+1)(m+2)/2, npmax)`` points including ``x``. Coordinates are
    scaled by ``delta`` before fitting.

    Raises
    ------
    ModelBuildError
        If fewer than ``m`` independent projected displacements are available.
    """
    x = np.asarray(x, dtype=float)
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[1] < 1:
        raise ValueError("model basis needs at least one column")
    m = S.shape[1]
    if f_center is None:
        f_center = bank.value_of(x)
    full = (m + 1) * (m + 2) // 2
    cap = full if npmax is None else min(full, max(int(npmax), m + 1))
    disp = bank.points - x
    dist = np.linalg.norm(disp, axis=1)
    Z = disp @ S
    zn = np.linalg.norm(Z, axis=1)
    ok = np.flatnonzero((dist <= 2.0 * c * delta) & (zn > 1e-10 * delta))
    # nearest in projected space first; among equals, the newest point
    order = ok[np.lexsort((-ok, np.round(zn[ok] / delta, 12)))]
    chosen = _choose_points(Z, order, m, cap - 1, independence_tol)
    Zs = Z[chosen]
    fv = bank.values[chosen]
    c0, g, H = _mfn_fit(Zs / delta, fv, float(f_center))
    model = SubspaceModel(S, float(c0), g / delta, 0.5 * (H + H.T) / delta**2, x.copy(),
                          np.vstack([np.zeros(m), Zs]), np.concatenate([[f_center], fv]))
    return model


def solve_trust_region_subproblem(model: SubspaceModel, delta: float) -> np.ndarray:
    """Minimise the model over ``||z|| <= delta``; never worse than the Cauchy point."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    H, g = model.hessian, model.gradient
    zc = cauchy_point(H, g, delta)
    try:
        z = solve_trs(H, g, delta)
        if not np.all(np.isfinite(z)):
            raise FloatingPointError("non-finite subproblem solution")
    except (np.linalg.LinAlgError, ValueError, FloatingPointError, RuntimeError):
        return zc
    n = float(np.linalg.norm(z))
    if n > delta:
        z = z * (delta / n)
    return z if quadratic_value(H, g, z) <= quadratic_value(H, g, zc) else zc


# ---------------------------------------------------------------------------
# Main loop
# ---------------------------------------------------------------------------

class _BudgetExhausted(Exception):
    pass


def run_ss_pounders(problem: Problem, config: TrConfig, seed=0) -> RunHistory:
    """Run the subspace trust-region method until the evaluation budget is spent.

    Parameters
    ----------
    problem : Problem
        Objective; only function values are used.
    config : TrConfig
    seed : int or SeedSequence
        Drives the random augmentation directions.

    Returns
    -------
    RunHistory
        One record per iteration with ``delta``, ``rho``, ``m`` (model
        dimension) and ``accepted`` besides the core keys.
    """
    d = problem.dim
    opts = config.resolved(problem)
    delta, delta_max, budget = opts["delta0"], opts["delta_max"], opts["budget"]
    rng = np.random.default_rng(seed)
    variant = config.variant
    uses_ucb = variant in ("ucb", "ucb_plus_random")
    state = UcbState(d, opts["lam"], opts["memory"], config.mu, seed=rng) if uses_ucb else None
    U = 0.0
    bank = PointBank(d)
    x = problem.initial_point.copy()

    with problem.solver_run(record_values=True):
        start_evals = problem.eval_count
        start_log = len(problem.value_log)

        def used() -> int:
            return problem.eval_count - start_evals

        def evaluate(y) -> float:
            idx = bank.find(y)
            if idx is not None:
                return float(bank.values[idx])
            if used() >= budget:
                raise _BudgetExhausted
            val = problem.evaluate(y)
            bank.add(y, val)
            return val

        fx = evaluate(x)
        hist = RunHistory(variant, problem.name, d, fx, x.copy(),
                          meta={"budget": budget, "model_failures": 0, "emergency_points": 0,
                                "delta0": opts["delta0"]})
        status, message = "completed", "budget exhausted"
        k = 0
        try:
            while used() < budget:
                k += 1
                S, S_perp, _ = identify_initial_subspace(x, bank, delta, config.c, config.theta1)
                new_dirs = []
                if variant == "full_space":
                    new_dirs = [S_perp[:, j] for j in range(S_perp.shape[1])]
                else:
                    if uses_ucb:
                        s = select_geometry_direction(state, U, S_perp)
                        if s is not None:
                            new_dirs.append(s)
                    basis = np.column_stack([S] + [v[:, None] for v in new_dirs])
                    p_k = min(d - basis.shape[1], opts["p_extra"])
                    if p_k > 0:
                        extra = orthogonal_augment(basis, p_k, rng)
                        new_dirs.extend(extra[:, j] for j in range(p_k))
                Sk = np.column_stack([S] + [v[:, None] for v in new_dirs])
                for q in new_dirs:
                    evaluate(x + delta * q)

                model = None
                for attempt in range(2):
                    try:
                        model = build_subspace_model(bank, x, Sk, delta, config.c,
                                                     npmax=2 * Sk.shape[1] + 1
                                                     if config.npmax is None else config.npmax,
                                                     f_center=fx)
                        break
                    except ModelBuildError:
                        hist.meta["model_failures"] += 1
                        if attempt == 0:
                            hist.meta["emergency_points"] += 1
                            evaluate(x + delta * _least_supported(bank, x, Sk, delta, config.c))
                rho, accepted, step = float("nan"), False, 0.0
                if model is not None:
                    z = solve_trust_region_subproblem(model, delta)
                    pred = model(np.zeros(model.dim)) - model(z)
                    if pred > 0:
                        trial = model.embed(z)
                        ft = evaluate(trial)
                        rho = (fx - ft) / pred
                        if rho >= config.eta1:
                            accepted, step = True, float(np.linalg.norm(z))
                            x, fx = trial, ft
                            if np.linalg.norm(model.gradient) >= config.eta2 * delta:
                                delta = min(config.nu2 * delta, delta_max)
                            else:
                                delta *= config.nu1
                        else:
                            delta *= config.nu1
                    else:
                        delta *= config.nu1
                    if state is not None:
                        state.update(Sk, model.gradient)
                        U = state.update_gradient_bound(float(np.linalg.norm(model.gradient)),
                                                        d, Sk.shape[1])
                else:
                    delta *= config.nu1
                hist.append(k=k, f=fx, alpha=step, dirderivs=0, evals=used(), delta=delta,
                            rho=rho, m=int(Sk.shape[1]), accepted=accepted)
                if delta < config.delta_min:
                    status, message = "completed", "trust-region radius below floor"
                    break
        except _BudgetExhausted:
            pass
        if hist.records and hist.records[-1]["evals"] != used():
            # the budget ran out mid-iteration; close the log with the incumbent
            hist.append(k=k, f=fx, alpha=0.0, dirderivs=0, evals=used(), delta=delta,
                        rho=float("nan"), m=0, accepted=False)
        elif not hist.records:
            hist.append(k=k, f=fx, alpha=0.0, dirderivs=0, evals=used(), delta=delta,
                        rho=float("nan"), m=0, accepted=False)
        hist.value_log = list(problem.value_log[start_log:])
    return hist.finish(x, fx, status, message)


def _least_supported(bank: PointBank, x, S, delta: float, c: float) -> np.ndarray:
    """Column of ``S`` along which nearby bank points reach least far."""
    disp = bank.points - x
    near = np.linalg.norm(disp, axis=1) <= 2.0 * c * delta
    if not near.any():
        return S[:, 0]
    reach = np.abs(disp[near] @ S).max(axis=0)
    return S[:, int(np.argmin(reach))]
