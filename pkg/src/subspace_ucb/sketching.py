"""Random sketch matrices, projections onto their range, and alignment diagnostics."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

__all__ = [
    "SketchMatrix",
    "RankDeficientError",
    "gaussian_sketch",
    "hashing_sketch",
    "haar_sketch",
    "explicit_sketch",
    "orthogonal_augment",
    "projection_apply",
    "projection_from_responses",
    "coefficients",
    "projected_norm_sq",
    "alignment_ratio",
    "parse_sketch_spec",
    "SketchSpec",
]

KINDS = ("gaussian", "hashing", "haar", "ucb", "augmented", "explicit")
_MIN_SINGULAR = 1e-12
_MAX_REDRAWS = 20


class RankDeficientError(ValueError):
    """Raised when a sketch does not have full column rank."""


@dataclass
class SketchMatrix:
    """A ``d x p`` sketch with a provenance tag."""

    entries: np.ndarray
    kind: str = "explicit"
    hash_weight: Optional[int] = None

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.ndim == 1:
            self.entries = self.entries[:, None]
        if self.kind not in KINDS:
            raise ValueError(f"unknown sketch kind {self.kind!r}")

    @property
    def shape(self):
        return self.entries.shape

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def p(self) -> int:
        return self.entries.shape[1]

    @property
    def T(self):
        return self.entries.T

    def gram(self) -> np.ndarray:
        return self.entries.T @ self.entries


def _as_matrix(S) -> np.ndarray:
    S = getattr(S, "entries", S)
    S = np.asarray(S, dtype=float)
    return S[:, None] if S.ndim == 1 else S


def _full_rank(S: np.ndarray) -> bool:
    return S.shape[1] > 0 and np.linalg.svd(S, compute_uv=False)[-1] > _MIN_SINGULAR


def _check_sizes(d: int, p: int) -> None:
    if not 1 <= p <= d:
        raise ValueError(f"sketch size p={p} must satisfy 1 <= p <= d={d}")


def _draw(make, rng):
    for _ in range(_MAX_REDRAWS):
        S = make(rng)
        if _full_rank(S):
            return S
    raise RankDeficientError(f"no full-rank draw in {_MAX_REDRAWS} attempts")


def gaussian_sketch(d: int, p: int, rng: np.random.Generator) -> SketchMatrix:
    """Entries i.i.d. ``N(0, 1/p)``."""
    _check_sizes(d, p)
    return SketchMatrix(_draw(lambda r: r.standard_normal((d, p)) / np.sqrt(p), rng), "gaussian")


def hashing_sketch(d: int, p: int, h: int, rng: np.random.Generator) -> SketchMatrix:
    """Each column gets ``h`` nonzeros at distinct rows, values ``+-1/sqrt(h)``."""
    _check_sizes(d, p)
    if not 1 <= h <= d:
        raise ValueError(f"hash weight h={h} must satisfy 1 <= h <= d={d}")

    def make(r):
        S = np.zeros((d, p))
        for j in range(p):
            rows = r.choice(d, size=h, replace=False)
            S[rows, j] = r.choice([-1.0, 1.0], size=h) / np.sqrt(h)
        return S

    return SketchMatrix(_draw(make, rng), "hashing", hash_weight=h)


def haar_sketch(d: int, p: int, rng: np.random.Generator) -> SketchMatrix:
    """First ``p`` columns of a Haar orthogonal matrix, scaled by ``sqrt(d/p)``.

    Thin QR of a Gaussian ``d x p`` matrix with sign-corrected ``R`` has the
    same law as the leading ``p`` columns of a Haar ``d x d`` matrix.
    """
    _check_sizes(d, p)
    Q, R = np.linalg.qr(rng.standard_normal((d, p)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return SketchMatrix(Q * signs * np.sqrt(d / p), "haar")


def explicit_sketch(entries, kind: str = "explicit") -> SketchMatrix:
    S = SketchMatrix(entries, kind)
    if not _full_rank(S.entries):
        raise RankDeficientError("explicit sketch is rank deficient")
    return S


def orthogonal_augment(S, p: int, rng: np.random.Generator) -> np.ndarray:
    """Return ``p`` orthonormal random directions orthogonal to the columns of ``S``.

    ``S`` must have orthonormal columns (it may have zero columns). A Gaussian
    block is projected onto the orthogonal complement and orthonormalised.
    """
    S = _as_matrix(S)
    d, m = S.shape
    if p > d - m:
        raise ValueError(f"cannot add {p} directions orthogonal to {m} columns in R^{d}")
    if p <= 0:
        return np.zeros((d, 0))
    for _ in range(_MAX_REDRAWS):
        A = rng.standard_normal((d, p))
        if m:
            A -= S @ (S.T @ A)
            # second pass guards against cancellation
            A -= S @ (S.T @ A)
        Q, R = np.linalg.qr(A)
        if np.min(np.abs(np.diag(R))) > 1e-10:
            return Q[:, :p]
    raise RankDeficientError("orthogonal augmentation failed to produce a full-rank block")


def _gram_factor(S: np.ndarray):
    G = S.T @ S
    try:
        factor = scipy.linalg.cho_factor(G, lower=True, check_finite=False)
        diag = np.abs(np.diag(factor[0]))
        if diag.min() > 1e-10 * diag.max():
            return factor
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-12 * np.eye(G.shape[0])
    try:
        factor = scipy.linalg.cho_factor(G + jitter, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise RankDeficientError("sketch Gram matrix is not positive definite") from None
    if not _full_rank(S):
        raise RankDeficientError("sketch is rank deficient")
    return factor


def coefficients(S, responses) -> np.ndarray:
    """``(S^T S)^{-1} r``: coordinates of the projected vector in the columns of ``S``."""
    S = _as_matrix(S)
    return scipy.linalg.cho_solve(_gram_factor(S), np.asarray(responses, dtype=float))


def projection_from_responses(S, responses) -> np.ndarray:
    """``S (S^T S)^{-1} r``: the projected gradient from its sketch ``r = S^T g``."""
    S = _as_matrix(S)
    return S @ coefficients(S, responses)


def _orthonormal_range(S: np.ndarray) -> np.ndarray:
    """Thin-QR basis of ``range(S)``; avoids squaring the condition number of ``S``."""
    Q, R = np.linalg.qr(S)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag.min() <= 1e-13 * max(diag.max(), 1e-300):
        if not _full_rank(S):
            raise RankDeficientError("sketch is rank deficient")
    return Q


def projection_apply(S, v) -> np.ndarray:
    """Orthogonal projection ``P v`` onto the range of ``S``."""
    S = _as_matrix(S)
    v = np.asarray(v, dtype=float)
    if v.shape[0] != S.shape[0]:
        raise ValueError("dimension mismatch between sketch and vector")
    Q = _orthonormal_range(S)
    return Q @ (Q.T @ v)


def projected_norm_sq(S, v) -> float:
    """``v^T P v = ||Q^T v||^2`` with ``Q`` an orthonormal basis of ``range(S)``."""
    S = _as_matrix(S)
    r = _orthonormal_range(S).T @ np.asarray(v, dtype=float)
    return float(r @ r)


def alignment_ratio(S, g) -> float:
    """Fraction of ``||g||^2`` captured by the range of ``S``; lies in ``[0, 1]``."""
    g = np.asarray(g, dtype=float)
    gg = float(g @ g)
    if gg == 0.0:
        raise ValueError("alignment ratio is undefined for a zero vector")
    return min(max(projected_norm_sq(S, g) / gg, 0.0), 1.0)


@dataclass(frozen=True)
class SketchSpec:
    """Parsed form of ``"gaussian:p=3"``, ``"hashing:p=4,h=2"``, ``"haar:p=2"``.

    ``p`` may be an integer or a fraction of ``d`` (``"gaussian:p=0.01d"`` means
    ``ceil(0.01 d)`` columns).
    """

    kind: str
    p: Optional[int] = None
    fraction: Optional[float] = None
    h: Optional[int] = None

    def size(self, d: int) -> int:
        if self.kind == "identity":
            return d
        if self.p is not None:
            return min(self.p, d)
        return max(1, min(d, int(np.ceil(self.fraction * d - 1e-12))))

    def draw(self, d: int, rng: np.random.Generator, p: Optional[int] = None) -> SketchMatrix:
        p = self.size(d) if p is None else p
        if self.kind == "gaussian":
            return gaussian_sketch(d, p, rng)
        if self.kind == "haar":
            return haar_sketch(d, p, rng)
        if self.kind == "hashing":
            return hashing_sketch(d, p, min(self.h or 1, d), rng)
        if self.kind == "identity":
            return SketchMatrix(np.eye(d), "explicit")
        raise ValueError(f"cannot draw sketches of kind {self.kind!r}")

    def __str__(self):
        size = f"p={self.p}" if self.p is not None else f"p={self.fraction}d"
        extra = f",h={self.h}" if self.h is not None else ""
        return f"{self.kind}:{size}{extra}" if self.kind != "identity" else "identity"


_SPEC = re.compile(r"^(?P<kind>gaussian|hashing|haar|identity)(?::(?P<args>.*))?$")


def parse_sketch_spec(text: str) -> SketchSpec:
    m = _SPEC.match(text.strip())
    if m is None:
        raise ValueError(f"cannot parse sketch spec {text!r}")
    kind = m["kind"]
    if kind == "identity":
        return SketchSpec("identity")
    args = {}
    for part in filter(None, (m["args"] or "").split(",")):
        key, _, value = part.partition("=")
        args[key.strip()] = value.strip()
    if "p" not in args:
        raise ValueError(f"sketch spec {text!r} needs p=")
    p_text = args["p"]
    p, fraction = None, None
    if p_text.endswith("d"):
        fraction = float(p_text[:-1])
    else:
        p = int(p_text)
    h = int(args["h"]) if "h" in args else None
    if kind == "hashing" and h is None:
        raise ValueError("hashing sketch spec needs h=")
    return SketchSpec(kind, p=p, fraction=fraction, h=h)
