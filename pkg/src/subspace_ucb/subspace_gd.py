"""First-order subspace descent: random sketches, optionally fused with a UCB direction.

Each iteration receives a sketch ``S_k``, asks the oracle for ``S_k^T grad f``
(one directional derivative per column), forms the projected gradient
``P_k grad f = S_k (S_k^T S_k)^{-1} S_k^T grad f`` from those responses alone,
and backtracks along it from ``alpha = 1``.

With ``use_ucb`` the last random column is swapped for the direction chosen by
a sliding-window linear UCB state, so both variants spend the same number of
directional derivatives per iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from .bandit import UcbState
from .history import RunHistory
from .problems import Problem
from .sketching import (
    SketchSpec,
    _full_rank,
    coefficients,
    parse_sketch_spec,
    projection_from_responses,
)

__all__ = [
    "GdConfig",
    "StepFailure",
    "LineSearchResult",
    "SketchStream",
    "backtracking_step",
    "run_subspace_gd",
]


class StepFailure(RuntimeError):
    """No trial step passed the sufficient-decrease test within the cap."""

    def __init__(self, trials: int, message: str = ""):
        self.trials = trials
        super().__init__(message or f"line search failed after {trials} trials")


class LineSearchResult(NamedTuple):
    x: np.ndarray
    alpha: float
    evals: int
    f: float


@dataclass
class GdConfig:
    """Settings of a subspace descent run.

    ``memory`` and ``lam`` default to ``d/p`` and ``1/d`` when left as None.
    ``strict=False`` swaps the acceptance test for the non-strict
    ``f(x+) <= f(x) - sigma alpha ||Pg||^2 + accept_tol``.
    ``gradient_estimate`` picks the raw quantity averaged into ``U``:
    ``"sketch"`` uses ``(d/p) ||S^T grad f||`` and ``"coefficients"`` uses
    ``||(S^T S)^{-1} S^T grad f||``.
    ``on_step_failure`` is ``"raise"`` or ``"stop"``; the latter ends the
    run at the current incumbent and marks the history.
    """

    beta: float = 0.5
    sigma: float = 1e-8
    horizon: int = 1000
    sketch: SketchSpec | str = "gaussian:p=0.01d"
    use_ucb: bool = False
    max_backtracks: int = 60
    lam: Optional[float] = None
    memory: Optional[int] = None
    mu: float = 0.8
    strict: bool = True
    accept_tol: float = 0.0
    on_step_failure: str = "raise"
    subproblem_solver: str = "krylov"
    subproblem_step: float = 0.1
    subproblem_iters: int = 200
    keep_iterates: bool = False
    gradient_estimate: str = "sketch"

    def __post_init__(self):
        if isinstance(self.sketch, str):
            self.sketch = parse_sketch_spec(self.sketch)
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be >= 1")
        if self.gradient_estimate not in ("sketch", "coefficients"):
            raise ValueError("gradient_estimate must be 'sketch' or 'coefficients'")
        if self.on_step_failure not in ("raise", "stop"):
            raise ValueError("on_step_failure must be 'raise' or 'stop'")

    def resolved(self, d: int) -> tuple[int, float, int]:
        """Return ``(p, lambda, M)`` for dimension ``d``."""
        p = self.sketch.size(d)
        lam = 1.0 / d if self.lam is None else float(self.lam)
        memory = max(1, round(d / p)) if self.memory is None else int(self.memory)
        return p, lam, memory


def backtracking_step(problem: Problem, x, direction, sigma: float, beta: float, cap: int,
                      fx: float | None = None, strict: bool = True,
                      accept_tol: float = 0.0) -> LineSearchResult:
    """Try ``alpha = beta^j`` for ``j = 0, 1, ..., cap`` along ``-direction``.

    Accepts the first ``alpha`` with ``f(x - alpha d) < f(x) - sigma alpha ||d||^2``
    (or its non-strict form). Each trial costs one evaluation; ``fx`` avoids
    re-evaluating ``f(x)`` when the caller already knows it.

    Raises
    ------
    StepFailure
        If none of the ``cap + 1`` trials is accepted.
    """
    x = np.asarray(x, dtype=float)
    direction = np.asarray(direction, dtype=float)
    dd = float(direction @ direction)
    if dd <= 0.0:
        raise ValueError("search direction must be nonzero")
    evals = 0
    if fx is None:
        fx = problem.evaluate(x)
        evals += 1
    alpha = 1.0
    for _ in range(cap + 1):
        trial = x - alpha * direction
        ft = problem.evaluate(trial)
        evals += 1
        target = fx - sigma * alpha * dd
        if (ft < target) if strict else (ft <= target + accept_tol):
            return LineSearchResult(trial, alpha, evals, ft)
        alpha *= beta
    raise StepFailure(cap + 1)


class SketchStream:
    """Reproducible sequence of random sketches; one per seed, shared across variants."""

    def __init__(self, spec: SketchSpec | str, d: int, seed):
        self.spec = parse_sketch_spec(spec) if isinstance(spec, str) else spec
        self.d = d
        self.rng = np.random.default_rng(seed)

    def draw(self) -> np.ndarray:
        return self.spec.draw(self.d, self.rng).entries


def _seeds(seed) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """Split a run seed into a sketch stream and a solver-internal stream."""
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    sketch_seq, inner_seq = seq.spawn(2)
    return sketch_seq, inner_seq


def run_subspace_gd(problem: Problem, config: GdConfig, seed=0, *,
                    recorder: Callable | None = None,
                    sketch_stream: SketchStream | None = None) -> RunHistory:
    """Run subspace descent for ``config.horizon`` iterations.

    Parameters
    ----------
    problem : Problem
        Objective; its full gradient is locked for the duration of the run.
    config : GdConfig
    seed : int or SeedSequence
        Runs with the same seed see the same random sketches whether or not
        the UCB column is used.
    recorder : callable, optional
        ``recorder(k, x, S, info)`` is called once per iteration, after the
        sketch is fixed and before the UCB state absorbs it, with the exact
        gradient unlocked. ``info`` carries ``state``, ``s`` and ``U``.
    sketch_stream : SketchStream, optional
        Overrides the stream derived from ``seed``.

    Returns
    -------
    RunHistory
    """
    d = problem.dim
    p, lam, memory = config.resolved(d)
    sketch_seq, inner_seq = _seeds(seed)
    stream = sketch_stream or SketchStream(config.sketch, d, sketch_seq)
    identity = stream.spec.kind == "identity"
    state = None
    if config.use_ucb:
        state = UcbState(d, lam, memory, config.mu, seed=np.random.default_rng(inner_seq),
                         step=config.subproblem_step, max_iter=config.subproblem_iters,
                         solver=config.subproblem_solver)

    name = "ucb" if config.use_ucb else "random"
    x = problem.initial_point.copy()
    with problem.solver_run(record_values=True):
        start_evals = problem.eval_count
        start_dd = problem.dirderiv_count
        start_log = len(problem.value_log)
        fx = problem.evaluate(x)
        hist = RunHistory(name, problem.name, d, fx, x.copy(),
                          meta={"p": p, "lambda": lam, "memory": memory, "ucb_fallbacks": 0,
                                "ucb_iterations": 0})
        status, message = "completed", ""
        for k in range(1, config.horizon + 1):
            s_ucb, U = None, None
            if identity:
                S = np.eye(d)
            elif state is None:
                S = stream.draw()
            else:
                # the random stream advances identically with or without UCB
                R = stream.draw() if p > 1 else None
                U = 0.0 if state.U is None else state.U
                s_ucb = state.select(U)
                hist.meta["ucb_iterations"] += state.last_iterations
                S = s_ucb[:, None] if R is None else np.column_stack([R[:, :-1], s_ucb])
                if R is not None and not _full_rank(S):
                    S = R
                    s_ucb = None
                    hist.meta["ucb_fallbacks"] += 1
            if recorder is not None:
                with problem.diagnostic_access():
                    recorder(k, x.copy(), S, {"state": state, "s": s_ucb, "U": U})
            r = problem.sketched_gradient(x, S)
            pg = projection_from_responses(S, r)
            alpha = 0.0
            if float(pg @ pg) > 0.0:
                try:
                    res = backtracking_step(problem, x, pg, config.sigma, config.beta,
                                            config.max_backtracks, fx=fx, strict=config.strict,
                                            accept_tol=config.accept_tol)
                except StepFailure as exc:
                    if config.on_step_failure == "raise":
                        raise
                    status, message = "step_failure", f"iteration {k}: {exc}"
                    res = None
                if res is not None:
                    x, alpha, fx = res.x, res.alpha, res.f
            if state is not None:
                state.update(S, r)
                if config.gradient_estimate == "sketch":
                    state.update_gradient_bound(float(np.linalg.norm(r)), d, S.shape[1])
                else:
                    state.average_gradient_norm(float(np.linalg.norm(coefficients(S, r))))
            hist.append(k=k, f=fx, alpha=alpha,
                        dirderivs=problem.dirderiv_count - start_dd,
                        evals=problem.eval_count - start_evals,
                        pg_norm=float(np.linalg.norm(pg)),
                        p=S.shape[1])
            if config.keep_iterates:
                hist.iterates.append(x.copy())
                hist.sketches.append(S)
                hist.projected_gradients.append(pg)
            if status != "completed":
                break
        hist.value_log = list(problem.value_log[start_log:])
    return hist.finish(x, fx, status, message)
