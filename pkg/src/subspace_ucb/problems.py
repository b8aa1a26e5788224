"""Smooth test objectives with counted oracles.

Every problem exposes three oracles:

* :meth:`Problem.evaluate` -- a zeroth-order call, counted in ``eval_count``;
* :meth:`Problem.sketched_gradient` -- ``S^T grad f(x)``, counted once per
  column of ``S`` in ``dirderiv_count`` (a simulated forward-mode AD pass per
  direction);
* :meth:`Problem.gradient` -- the hidden exact gradient, available only to
  diagnostics. Solvers lock it for the duration of a run.

Most of the analytic suite is written as nonlinear least squares
``f = sum_i r_i(x)^2`` with closed-form Jacobians.
"""

from __future__ import annotations

import contextlib
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

__all__ = [
    "DimensionError",
    "OracleAccessError",
    "Problem",
    "EmbeddedProblem",
    "embed_low_effective_dim",
    "haar_orthogonal",
    "make_problem",
    "resolve_problem",
    "list_problems",
    "check_gradient_fd",
    "check_lipschitz",
    "SCALABLE_SUITE",
    "MORE_WILD_SUITE",
]


class DimensionError(ValueError):
    """Raised when a vector or matrix has the wrong number of rows."""


class OracleAccessError(RuntimeError):
    """Raised when solver code touches the diagnostics-only full gradient."""


class Problem:
    """An unconstrained smooth objective with counted oracles.

    Parameters
    ----------
    name : str
        Registry identifier.
    dim : int
        Number of variables ``d``.
    fun, grad : callable
        Objective and exact gradient.
    initial_point : array_like
        Starting point ``x0``.
    lipschitz_bound : float, optional
        Global Lipschitz constant ``L`` of the gradient, when known.
    gradient_bound : float, optional
        Bound ``G`` on the gradient norm over the initial level set.
    f_min : float, optional
        Known optimal value, if any.
    """

    def __init__(
        self,
        name: str,
        dim: int,
        fun: Callable[[np.ndarray], float],
        grad: Callable[[np.ndarray], np.ndarray],
        initial_point,
        lipschitz_bound: float | None = None,
        gradient_bound: float | None = None,
        f_min: float | None = None,
    ):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        x0 = np.asarray(initial_point, dtype=float).copy()
        if x0.shape != (dim,):
            raise DimensionError(f"initial point has shape {x0.shape}, expected ({dim},)")
        self.name = name
        self.dim = int(dim)
        self._fun = fun
        self._grad = grad
        self.initial_point = x0
        self.lipschitz_bound = lipschitz_bound
        self.gradient_bound = gradient_bound
        self.f_min = f_min
        self.eval_count = 0
        self.dirderiv_count = 0
        self.gradient_locked = False
        self.record_values = False
        self.value_log: list[float] = []

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r}, dim={self.dim})"

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionError(f"x has shape {x.shape}, expected ({self.dim},)")
        return x

    # -- oracles ---------------------------------------------------------
    def evaluate(self, x) -> float:
        x = self._check(x)
        value = float(self._fun(x))
        self.eval_count += 1
        if self.record_values:
            self.value_log.append(value)
        return value

    def gradient(self, x) -> np.ndarray:
        """Exact gradient; diagnostics only, never charged to any counter."""
        if self.gradient_locked:
            raise OracleAccessError(
                f"full gradient of {self.name!r} requested while a solver run holds the oracle"
            )
        return np.asarray(self._grad(self._check(x)), dtype=float)

    def sketched_gradient(self, x, S) -> np.ndarray:
        """Return ``S^T grad f(x)`` and charge one directional derivative per column."""
        x = self._check(x)
        S = getattr(S, "entries", S)
        S = np.asarray(S, dtype=float)
        if S.ndim == 1:
            S = S[:, None]
        if S.shape[0] != self.dim:
            raise DimensionError(f"sketch has {S.shape[0]} rows, expected {self.dim}")
        self.dirderiv_count += S.shape[1]
        return S.T @ np.asarray(self._grad(x), dtype=float)

    # -- bookkeeping -----------------------------------------------------
    def reset_counters(self) -> None:
        self.eval_count = 0
        self.dirderiv_count = 0
        self.value_log = []

    @contextlib.contextmanager
    def solver_run(self, record_values: bool = False) -> Iterator["Problem"]:
        """Lock the full gradient for the duration of a solver run."""
        previous = self.gradient_locked, self.record_values
        self.gradient_locked = True
        self.record_values = record_values or self.record_values
        try:
            yield self
        finally:
            self.gradient_locked, self.record_values = previous

    @contextlib.contextmanager
    def diagnostic_access(self) -> Iterator["Problem"]:
        """Temporarily unlock the exact gradient (for recorders and tests)."""
        previous = self.gradient_locked
        self.gradient_locked = False
        try:
            yield self
        finally:
            self.gradient_locked = previous


class EmbeddedProblem(Problem):
    """``f_bar(x) = f(first d entries of Q x)`` for an orthogonal ``D x D`` matrix ``Q``.

    The objective varies only on the ``d``-dimensional subspace spanned by the
    first ``d`` rows of ``Q``; directional derivatives along the remaining
    rows vanish identically.
    """

    def __init__(self, base: Problem, rotation: np.ndarray, seed=None):
        rotation = np.asarray(rotation, dtype=float)
        D = rotation.shape[0]
        if rotation.shape != (D, D):
            raise DimensionError("rotation must be square")
        if D < base.dim:
            raise ValueError(f"ambient dimension {D} is smaller than base dimension {base.dim}")
        d = base.dim
        self.base = base
        self.ambient_dim = D
        self.rotation = rotation
        self.seed = seed

        def fun(x):
            return base._fun((rotation @ x)[:d])

        def grad(x):
            return rotation[:d].T @ base._grad((rotation @ x)[:d])

        # x0 is the preimage of (x0_base, 0, ..., 0), so f_bar(x0) = f(x0_base)
        x0 = rotation[:d].T @ base.initial_point
        name = f"{base.name}:{d}@D={D},seed={seed}"
        super().__init__(
            name, D, fun, grad, x0,
            lipschitz_bound=base.lipschitz_bound,
            gradient_bound=base.gradient_bound,
            f_min=base.f_min,
        )


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed ``n x n`` orthogonal matrix (QR with sign-corrected R)."""
    A = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(A)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def embed_low_effective_dim(base: Problem, D: int, seed=None, rotation=None) -> EmbeddedProblem:
    """Embed ``base`` into ``R^D`` behind a random rotation.

    Pass ``rotation=np.eye(D)`` to get the unrotated embedding.
    """
    if D < base.dim:
        raise ValueError(f"D={D} must be >= base dimension {base.dim}")
    if rotation is None:
        rotation = haar_orthogonal(D, np.random.default_rng(seed))
    return EmbeddedProblem(base, rotation, seed=seed)


# ---------------------------------------------------------------------------
# Analytic suite
# ---------------------------------------------------------------------------

def _least_squares(name, dim, residual, jacobian, x0, f_min=None, **kw) -> Problem:
    def fun(x):
        r = residual(x)
        return float(r @ r)

    def grad(x):
        return 2.0 * (jacobian(x).T @ residual(x))

    return Problem(name, dim, fun, grad, x0, f_min=f_min, **kw)


def sphere(dim: int) -> Problem:
    return Problem(
        "sphere", dim,
        lambda x: 0.5 * float(x @ x),
        lambda x: x.copy(),
        np.ones(dim),
        lipschitz_bound=1.0, f_min=0.0,
    )


def ill_conditioned_quadratic(dim: int, condition: float = 1e4) -> Problem:
    """``0.5 * sum_i h_i x_i^2`` with ``h`` log-spaced on ``[1, condition]``."""
    h = np.logspace(0.0, math.log10(condition), dim) if dim > 1 else np.array([condition])
    return Problem(
        "ill_quadratic", dim,
        lambda x: 0.5 * float(x @ (h * x)),
        lambda x: h * x,
        np.ones(dim),
        lipschitz_bound=float(h.max()), f_min=0.0,
    )


def extended_rosenbrock(dim: int) -> Problem:
    if dim % 2:
        raise ValueError("extended_rosenbrock needs an even dimension")

    def fun(x):
        a, b = x[0::2], x[1::2]
        return float(np.sum(100.0 * (b - a**2) ** 2 + (1.0 - a) ** 2))

    def grad(x):
        a, b = x[0::2], x[1::2]
        g = np.empty_like(x)
        t = b - a**2
        g[0::2] = -400.0 * a * t - 2.0 * (1.0 - a)
        g[1::2] = 200.0 * t
        return g

    x0 = np.tile([-1.2, 1.0], dim // 2)
    return Problem("rosenbrock", dim, fun, grad, x0, f_min=0.0)


def extended_powell_singular(dim: int) -> Problem:
    if dim % 4:
        raise ValueError("extended_powell needs a dimension divisible by 4")

    def parts(x):
        return x[0::4], x[1::4], x[2::4], x[3::4]

    def fun(x):
        a, b, c, e = parts(x)
        return float(np.sum((a + 10 * b) ** 2 + 5 * (c - e) ** 2 + (b - 2 * c) ** 4 + 10 * (a - e) ** 4))

    def grad(x):
        a, b, c, e = parts(x)
        g = np.empty_like(x)
        t1, t2, t3, t4 = a + 10 * b, c - e, b - 2 * c, a - e
        g[0::4] = 2 * t1 + 40 * t4**3
        g[1::4] = 20 * t1 + 4 * t3**3
        g[2::4] = 10 * t2 - 8 * t3**3
        g[3::4] = -10 * t2 - 40 * t4**3
        return g

    x0 = np.tile([3.0, -1.0, 0.0, 1.0], dim // 4)
    return Problem("powell_singular", dim, fun, grad, x0, f_min=0.0)


def trigonometric(dim: int) -> Problem:
    idx = np.arange(1, dim + 1)

    def residual(x):
        return dim - np.sum(np.cos(x)) + idx * (1.0 - np.cos(x)) - np.sin(x)

    def fun(x):
        r = residual(x)
        return float(r @ r)

    def grad(x):
        # J = ones * sin(x)^T + diag(i sin x_i - cos x_i)
        r = residual(x)
        return 2.0 * (np.sin(x) * r.sum() + (idx * np.sin(x) - np.cos(x)) * r)

    return Problem("trigonometric", dim, fun, grad, np.full(dim, 1.0 / dim), f_min=0.0)


def penalty_1(dim: int) -> Problem:
    a = 1e-5

    def fun(x):
        t = float(x @ x) - 0.25
        return float(a * np.sum((x - 1.0) ** 2) + t * t)

    def grad(x):
        t = float(x @ x) - 0.25
        return 2 * a * (x - 1.0) + 4.0 * t * x

    return Problem("penalty_1", dim, fun, grad, np.arange(1.0, dim + 1))


def broyden_tridiagonal(dim: int) -> Problem:
    def residual(x):
        xp = np.concatenate(([0.0], x, [0.0]))
        return (3.0 - 2.0 * x) * x - xp[:-2] - 2.0 * xp[2:] + 1.0

    def fun(x):
        r = residual(x)
        return float(r @ r)

    def grad(x):
        # dr_i/dx_i = 3 - 4 x_i, dr_i/dx_{i-1} = -1, dr_i/dx_{i+1} = -2
        r = residual(x)
        g = (3.0 - 4.0 * x) * r
        g[:-1] -= r[1:]
        g[1:] -= 2.0 * r[:-1]
        return 2.0 * g

    return Problem("broyden_tridiagonal", dim, fun, grad, -np.ones(dim), f_min=0.0)


def broyden_banded(dim: int, lower: int = 5, upper: int = 1) -> Problem:
    def neighbour_sum(v):
        out = np.zeros_like(v)
        for k in range(1, lower + 1):
            out[k:] += v[:-k]
        for k in range(1, upper + 1):
            out[:-k] += v[k:]
        return out

    def transpose_sum(v):
        out = np.zeros_like(v)
        for k in range(1, lower + 1):
            out[:-k] += v[k:]
        for k in range(1, upper + 1):
            out[k:] += v[:-k]
        return out

    def residual(x):
        return x * (2.0 + 5.0 * x**2) + 1.0 - neighbour_sum(x * (1.0 + x))

    def fun(x):
        r = residual(x)
        return float(r @ r)

    def grad(x):
        r = residual(x)
        return 2.0 * ((2.0 + 15.0 * x**2) * r - (1.0 + 2.0 * x) * transpose_sum(r))

    return Problem("broyden_banded", dim, fun, grad, -np.ones(dim), f_min=0.0)


def discrete_boundary_value(dim: int) -> Problem:
    h = 1.0 / (dim + 1)
    t = h * np.arange(1, dim + 1)

    def residual(x):
        xp = np.concatenate(([0.0], x, [0.0]))
        return 2 * x - xp[:-2] - xp[2:] + 0.5 * h**2 * (x + t + 1.0) ** 3

    def fun(x):
        r = residual(x)
        return float(r @ r)

    def grad(x):
        r = residual(x)
        g = (2.0 + 1.5 * h**2 * (x + t + 1.0) ** 2) * r
        g[:-1] -= r[1:]
        g[1:] -= r[:-1]
        return 2.0 * g

    return Problem("boundary_value", dim, fun, grad, t * (t - 1.0), f_min=0.0)


# -- small More-Wild-style problems (fixed or bounded dimension) -------------

def rosenbrock_2(dim: int = 2) -> Problem:
    return extended_rosenbrock(2)


def freudenstein_roth(dim: int = 2) -> Problem:
    def residual(x):
        a, b = x
        return np.array([-13 + a + ((5 - b) * b - 2) * b, -29 + a + ((b + 1) * b - 14) * b])

    def jacobian(x):
        b = x[1]
        return np.array([[1.0, 10 * b - 3 * b**2 - 2], [1.0, 3 * b**2 + 2 * b - 14]])

    return _least_squares("freudenstein_roth", 2, residual, jacobian, [0.5, -2.0])


def beale(dim: int = 2) -> Problem:
    y = np.array([1.5, 2.25, 2.625])
    i = np.arange(1, 4)

    def residual(x):
        return y - x[0] * (1 - x[1] ** i)

    def jacobian(x):
        return np.column_stack([-(1 - x[1] ** i), x[0] * i * x[1] ** (i - 1)])

    return _least_squares("beale", 2, residual, jacobian, [1.0, 1.0], f_min=0.0)


def helical_valley(dim: int = 3) -> Problem:
    def theta(a, b):
        t = math.atan(b / a) / (2 * math.pi) if a != 0 else 0.25 * math.copysign(1.0, b)
        return t + 0.5 if a < 0 else t

    def residual(x):
        a, b, c = x
        return np.array([10 * (c - 10 * theta(a, b)), 10 * (math.hypot(a, b) - 1), c])

    def jacobian(x):
        a, b, _ = x
        r2 = a * a + b * b
        rn = math.sqrt(r2)
        return np.array([
            [100 * b / (2 * math.pi * r2), -100 * a / (2 * math.pi * r2), 10.0],
            [10 * a / rn, 10 * b / rn, 0.0],
            [0.0, 0.0, 1.0],
        ])

    return _least_squares("helical_valley", 3, residual, jacobian, [-1.0, 0.0, 0.0], f_min=0.0)


def powell_singular_4(dim: int = 4) -> Problem:
    return extended_powell_singular(4)


def wood(dim: int = 4) -> Problem:
    s90, s10 = math.sqrt(90), math.sqrt(10)

    def residual(x):
        a, b, c, e = x
        return np.array([
            10 * (b - a * a), 1 - a, s90 * (e - c * c), 1 - c,
            s10 * (b + e - 2), (b - e) / s10,
        ])

    def jacobian(x):
        a, _, c, _ = x
        return np.array([
            [-20 * a, 10, 0, 0],
            [-1, 0, 0, 0],
            [0, 0, -2 * s90 * c, s90],
            [0, 0, -1, 0],
            [0, s10, 0, s10],
            [0, 1 / s10, 0, -1 / s10],
        ], dtype=float)

    return _least_squares("wood", 4, residual, jacobian, [-3.0, -1.0, -3.0, -1.0], f_min=0.0)


def brown_dennis(dim: int = 4) -> Problem:
    t = np.arange(1, 21) / 5.0

    def parts(x):
        return x[0] + t * x[1] - np.exp(t), x[2] + x[3] * np.sin(t) - np.cos(t)

    def residual(x):
        u, v = parts(x)
        return u**2 + v**2

    def jacobian(x):
        u, v = parts(x)
        return np.column_stack([2 * u, 2 * u * t, 2 * v, 2 * v * np.sin(t)])

    return _least_squares("brown_dennis", 4, residual, jacobian, [25.0, 5.0, -5.0, -1.0])


def biggs_exp6(dim: int = 6) -> Problem:
    t = 0.1 * np.arange(1, 14)
    y = np.exp(-t) - 5 * np.exp(-10 * t) + 3 * np.exp(-4 * t)

    def residual(x):
        return x[2] * np.exp(-t * x[0]) - x[3] * np.exp(-t * x[1]) + x[5] * np.exp(-t * x[4]) - y

    def jacobian(x):
        e0, e1, e4 = np.exp(-t * x[0]), np.exp(-t * x[1]), np.exp(-t * x[4])
        return np.column_stack([-t * x[2] * e0, t * x[3] * e1, e0, -e1, -t * x[5] * e4, e4])

    return _least_squares("biggs_exp6", 6, residual, jacobian, [1.0, 2.0, 1.0, 1.0, 1.0, 1.0], f_min=0.0)


def watson(dim: int = 6) -> Problem:
    if not 2 <= dim <= 31:
        raise ValueError("watson is defined for 2 <= dim <= 31")
    t = np.arange(1, 30) / 29.0
    powers = t[:, None] ** np.arange(dim)  # t^(j-1), j = 1..n

    def residual(x):
        j = np.arange(1, dim)
        lin = (powers[:, : dim - 1] * (j * x[1:])).sum(axis=1)
        s = powers @ x
        return np.concatenate([lin - s**2 - 1.0, [x[0], x[1] - x[0] ** 2 - 1.0]])

    def jacobian(x):
        s = powers @ x
        J = np.zeros((31, dim))
        J[:29, 1:] = np.arange(1, dim) * powers[:, : dim - 1]
        J[:29] -= 2.0 * s[:, None] * powers
        J[29, 0] = 1.0
        J[30, 0] = -2.0 * x[0]
        J[30, 1] = 1.0
        return J

    return _least_squares("watson", dim, residual, jacobian, np.zeros(dim))


def brown_almost_linear(dim: int) -> Problem:
    def residual(x):
        r = x + x.sum() - (dim + 1.0)
        r[-1] = np.prod(x) - 1.0
        return r

    def jacobian(x):
        J = np.eye(dim) + 1.0
        prods = np.array([np.prod(np.delete(x, j)) for j in range(dim)])
        J[-1] = prods
        return J

    return _least_squares("brown_almost_linear", dim, residual, jacobian, np.full(dim, 0.5), f_min=0.0)


def variably_dimensioned(dim: int) -> Problem:
    j = np.arange(1, dim + 1)

    def residual(x):
        s = float(j @ (x - 1.0))
        return np.concatenate([x - 1.0, [s, s * s]])

    def jacobian(x):
        s = float(j @ (x - 1.0))
        return np.vstack([np.eye(dim), j, 2 * s * j])

    return _least_squares("variably_dimensioned", dim, residual, jacobian, 1.0 - j / dim, f_min=0.0)


_FAMILIES: dict[str, tuple[Callable[[int], Problem], Callable[[int], bool], int]] = {
    # name: (factory, admissible dims, default dim)
    "sphere": (sphere, lambda n: n >= 1, 10),
    "ill_quadratic": (ill_conditioned_quadratic, lambda n: n >= 1, 50),
    "rosenbrock": (extended_rosenbrock, lambda n: n >= 2 and n % 2 == 0, 2),
    "powell_singular": (extended_powell_singular, lambda n: n >= 4 and n % 4 == 0, 4),
    "trigonometric": (trigonometric, lambda n: n >= 1, 10),
    "penalty_1": (penalty_1, lambda n: n >= 1, 10),
    "broyden_tridiagonal": (broyden_tridiagonal, lambda n: n >= 1, 10),
    "broyden_banded": (broyden_banded, lambda n: n >= 1, 10),
    "boundary_value": (discrete_boundary_value, lambda n: n >= 1, 10),
    "freudenstein_roth": (freudenstein_roth, lambda n: n == 2, 2),
    "beale": (beale, lambda n: n == 2, 2),
    "helical_valley": (helical_valley, lambda n: n == 3, 3),
    "wood": (wood, lambda n: n == 4, 4),
    "brown_dennis": (brown_dennis, lambda n: n == 4, 4),
    "biggs_exp6": (biggs_exp6, lambda n: n == 6, 6),
    "watson": (watson, lambda n: 2 <= n <= 31, 6),
    "brown_almost_linear": (brown_almost_linear, lambda n: n >= 2, 10),
    "variably_dimensioned": (variably_dimensioned, lambda n: n >= 1, 10),
}

#: scalable problems used for the large-dimension head-to-head comparisons
SCALABLE_SUITE = (
    "sphere", "ill_quadratic", "rosenbrock", "powell_singular",
    "trigonometric", "penalty_1", "broyden_tridiagonal", "broyden_banded",
)

#: (name, dim) pairs of small problems, 2 <= d <= 12
MORE_WILD_SUITE = (
    ("rosenbrock", 2), ("freudenstein_roth", 2), ("beale", 2), ("helical_valley", 3),
    ("powell_singular", 4), ("wood", 4), ("brown_dennis", 4), ("biggs_exp6", 6),
    ("watson", 6), ("watson", 9), ("watson", 12), ("trigonometric", 8),
    ("brown_almost_linear", 10), ("variably_dimensioned", 8), ("penalty_1", 10),
    ("boundary_value", 12), ("broyden_tridiagonal", 12), ("broyden_banded", 12),
)


def list_problems() -> list[tuple[str, int]]:
    """Registered family names with their default dimension."""
    return [(name, spec[2]) for name, spec in _FAMILIES.items()]


def make_problem(name: str, dim: int | None = None) -> Problem:
    try:
        factory, admissible, default = _FAMILIES[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {sorted(_FAMILIES)}") from None
    dim = default if dim is None else int(dim)
    if not admissible(dim):
        raise DimensionError(f"problem {name!r} is not defined for dim={dim}")
    return factory(dim)


_SELECTOR = re.compile(
    r"^(?P<name>[A-Za-z_0-9]+?)(?::(?P<dim>\d+))?(?:@D=(?P<D>\d+)(?:,seed=(?P<seed>-?\d+))?)?$"
)


def resolve_problem(selector: str, dim: int | None = None) -> Problem:
    """Build a problem from ``"name"``, ``"name:d"`` or ``"name[:d]@D=<D>,seed=<s>"``."""
    m = _SELECTOR.match(selector.strip())
    if m is None:
        raise ValueError(f"cannot parse problem selector {selector!r}")
    base_dim = int(m["dim"]) if m["dim"] else dim
    base = make_problem(m["name"], base_dim)
    if m["D"] is None:
        return base
    seed = int(m["seed"]) if m["seed"] is not None else 0
    return embed_low_effective_dim(base, int(m["D"]), seed=seed)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def check_gradient_fd(problem: Problem, x, step: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Return (analytic gradient, central finite-difference gradient) at ``x``.

    Evaluations go through the private objective so counters are untouched.
    """
    x = problem._check(x)
    fd = np.empty(problem.dim)
    for i in range(problem.dim):
        e = np.zeros(problem.dim)
        e[i] = step
        fd[i] = (problem._fun(x + e) - problem._fun(x - e)) / (2 * step)
    return np.asarray(problem._grad(x), dtype=float), fd


@dataclass
class LipschitzReport:
    max_ratio: float
    bound: float | None
    violations: int = 0
    samples: list = field(default_factory=list)


def check_lipschitz(problem: Problem, rng: np.random.Generator, n_pairs: int = 100,
                    radius: float = 1.0, tol: float = 1e-8) -> LipschitzReport:
    """Sample pairs near ``x0`` and compare gradient differences against ``L``."""
    worst = 0.0
    violations = 0
    for _ in range(n_pairs):
        x = problem.initial_point + radius * rng.standard_normal(problem.dim)
        y = problem.initial_point + radius * rng.standard_normal(problem.dim)
        num = np.linalg.norm(problem._grad(x) - problem._grad(y))
        den = np.linalg.norm(x - y)
        worst = max(worst, num / den)
        if problem.lipschitz_bound is not None and num > problem.lipschitz_bound * den + tol:
            violations += 1
    return LipschitzReport(worst, problem.lipschitz_bound, violations)
