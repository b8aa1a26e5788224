"""Seeded head-to-head experiments, performance ratios and data profiles."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import traceback
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .dfo import VARIANT_ALIASES, TrConfig, run_ss_pounders
from .history import RunHistory, write_atomic
from .problems import Problem, embed_low_effective_dim, resolve_problem
from .regret import RegretRecorder, check_gradient_error_bound, regret_bound
from .subspace_gd import GdConfig, run_subspace_gd

__all__ = [
    "performance_ratio",
    "DataProfile",
    "data_profile",
    "ExperimentConfig",
    "ExperimentResult",
    "run_experiment",
    "ratio_summary",
]

log = logging.getLogger(__name__)

#: slack allowed when checking that a run did not end above its start
_MONOTONE_TOL = 1e-12


def performance_ratio(f0: float, f_rand: float, f_ucb: float) -> float:
    """``(f_rand - f_ucb) / max(f0 - f_rand, f0 - f_ucb, 1)``; positive when UCB ends lower.

    Raises
    ------
    ValueError
        If either final value lies above ``f0``, which a monotone solver
        cannot produce.
    """
    scale = max(1.0, abs(f0))
    for name, f in (("f_rand", f_rand), ("f_ucb", f_ucb)):
        if not math.isfinite(f) or f > f0 + _MONOTONE_TOL * scale:
            raise ValueError(f"{name}={f!r} exceeds f0={f0!r}; trace is not monotone")
    return (f_rand - f_ucb) / max(f0 - f_rand, f0 - f_ucb, 1.0)


def ratio_summary(ratios: Sequence[tuple[str, int, float]]) -> dict:
    """Median ratio over all cells and the share of problems with a positive median."""
    if not ratios:
        return {"cells": 0}
    by_problem: dict[str, list[float]] = {}
    for prob, _, r in ratios:
        by_problem.setdefault(prob, []).append(r)
    medians = {p: float(np.median(v)) for p, v in by_problem.items()}
    return {
        "cells": len(ratios),
        "median": float(np.median([r for _, _, r in ratios])),
        "per_problem_median": medians,
        "positive_problem_share": float(np.mean([m > 0 for m in medians.values()])),
    }


# ---------------------------------------------------------------------------
# Data profiles
# ---------------------------------------------------------------------------

@dataclass
class DataProfile:
    """Fraction of instances solved as a function of budget in units of ``d + 2``.

    ``solve_units[solver][i]`` is the budget (in units) at which instance
    ``i`` was first solved, or ``inf``.
    """

    tau: float
    budgets: np.ndarray
    curves: dict[str, np.ndarray]
    solve_units: dict[str, np.ndarray]
    instances: list[str]

    def fraction(self, solver: str, units: float) -> float:
        return float(np.mean(self.solve_units[solver] <= units + 1e-12))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["solver", "budget_units", "fraction"])
        for solver, curve in self.curves.items():
            for b, frac in zip(self.budgets, curve):
                w.writerow([solver, repr(float(b)), repr(float(frac))])
        return buf.getvalue()


def data_profile(traces: Mapping[str, Mapping[str, Sequence[float]]], tau: float,
                 d: int | Mapping[str, int], budgets: Optional[Sequence[float]] = None) -> DataProfile:
    """Data profile from objective values in evaluation order.

    Parameters
    ----------
    traces : mapping
        ``traces[solver][instance]`` lists every objective value the solver
        computed on that instance, first entry ``f(x0)``. Running minima are
        taken here.
    tau : float
        Tolerance in ``(0, 1)``. Instance ``i`` counts as solved after ``N``
        evaluations once ``f0 - best_N >= (1 - tau) (f0 - f_L)``, where
        ``f_L`` is the lowest value any solver found on ``i``. An instance
        where nobody improves on ``f0`` is solved at the first evaluation.
    d : int or mapping
        Dimension per instance (or a common one); one budget unit is
        ``d + 2`` evaluations.
    budgets : sequence, optional
        Budget grid in units; defaults to every tenth of a unit up to the
        longest trace.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    if not traces or not any(traces.values()):
        raise ValueError("no traces given")
    solvers = list(traces)
    instances = sorted({i for s in solvers for i in traces[s]})
    for s in solvers:
        missing = set(instances) - set(traces[s])
        if missing:
            raise ValueError(f"solver {s!r} has no trace for {sorted(missing)}")
    dims = {i: (d[i] if isinstance(d, Mapping) else d) for i in instances}
    f0 = {}
    f_low = {}
    for i in instances:
        starts = {float(traces[s][i][0]) for s in solvers if len(traces[s][i])}
        if len(starts) != 1:
            raise ValueError(f"solvers disagree on f(x0) for instance {i!r}: {sorted(starts)}")
        f0[i] = starts.pop()
        f_low[i] = min(float(np.min(traces[s][i])) for s in solvers)
    solve_units = {}
    longest = 0.0
    for s in solvers:
        units = np.full(len(instances), np.inf)
        for j, i in enumerate(instances):
            best = np.minimum.accumulate(np.asarray(traces[s][i], dtype=float))
            longest = max(longest, len(best) / (dims[i] + 2))
            need = (1.0 - tau) * (f0[i] - f_low[i])
            hit = np.flatnonzero(f0[i] - best >= need)
            if hit.size:
                units[j] = (hit[0] + 1) / (dims[i] + 2)
        solve_units[s] = units
    if budgets is None:
        budgets = np.round(np.arange(0.0, math.ceil(longest) + 1e-9, 0.1), 10)
    budgets = np.asarray(budgets, dtype=float)
    curves = {s: np.array([np.mean(solve_units[s] <= b + 1e-12) for b in budgets])
              for s in solvers}
    return DataProfile(tau, budgets, curves, solve_units, instances)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

_GD_VARIANTS = ("random", "ucb")


@dataclass
class ExperimentConfig:
    """Flat experiment description, loadable from a key-value JSON file.

    ``mode="gd"`` compares random-only subspace descent with its UCB variant
    on each ``(problem, dim, seed)`` cell and emits performance ratios.
    ``mode="dfo"`` runs the derivative-free variants; with ``embed_dim`` set
    every base problem is rotated into that dimension, using the seed as the
    rotation seed.
    """

    problems: list[str] = field(default_factory=lambda: ["sphere"])
    dims: list[int] = field(default_factory=lambda: [100])
    mode: str = "gd"
    variants: Optional[list[str]] = None
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    horizon: int = 1000
    sketch_fraction: float = 0.01
    sketch_kind: str = "gaussian"
    taus: list[float] = field(default_factory=lambda: [0.1, 0.01, 0.001])
    output_dir: str = "results"
    beta: float = 0.5
    sigma: float = 1e-8
    gradient_estimate: str = "sketch"
    budget_units: int = 50
    embed_dim: Optional[int] = None
    regret: bool = False
    plots: bool = True

    def __post_init__(self):
        if self.mode not in ("gd", "dfo"):
            raise ValueError("mode must be 'gd' or 'dfo'")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if any(not 0.0 < t < 1.0 for t in self.taus):
            raise ValueError("every tau must lie in (0, 1)")
        if not 0.0 < self.sketch_fraction <= 1.0:
            raise ValueError("sketch_fraction must lie in (0, 1]")
        if self.variants is None:
            self.variants = list(_GD_VARIANTS) if self.mode == "gd" else ["ucb", "random",
                                                                         "ucb+random", "full"]
        allowed = _GD_VARIANTS if self.mode == "gd" else tuple(VARIANT_ALIASES) + tuple(
            VARIANT_ALIASES.values())
        for v in self.variants:
            if v not in allowed:
                raise ValueError(f"unknown variant {v!r} for mode {self.mode!r}")

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**dict(data))

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    output_dir: str
    runs: list[dict]
    ratios: list[tuple[str, int, float]]
    profiles: dict[float, DataProfile]
    regret: list[dict]
    files: list[str]

    @property
    def ratio_stats(self) -> dict:
        return ratio_summary(self.ratios)


def _instances(config: ExperimentConfig):
    """Yield ``(label, problem factory, seed)`` triples."""
    for selector in config.problems:
        dims = [None] if (":" in selector or config.mode == "dfo") else config.dims
        for dim in dims:
            for seed in config.seeds:
                def factory(selector=selector, dim=dim, seed=seed) -> Problem:
                    prob = resolve_problem(selector, dim)
                    if config.embed_dim is not None and config.embed_dim != prob.dim:
                        prob = embed_low_effective_dim(prob, config.embed_dim, seed=seed)
                    return prob
                try:
                    base = resolve_problem(selector, dim)
                    label = f"{base.name}:{base.dim}"
                except (KeyError, ValueError):
                    # the factory raises again inside the per-run error handler
                    label = selector if dim is None else f"{selector}:{dim}"
                if config.embed_dim is not None:
                    label += f"@D={config.embed_dim}"
                yield label, factory, seed


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def _regret_entry(label, seed, recorder, hist, config_gd: GdConfig, problem) -> dict:
    trace = recorder.finish(hist.final_x)
    p, lam, M = config_gd.resolved(problem.dim)
    U = [u for u in trace.U if u is not None]
    K = len(trace)
    V = trace.variation()
    entry = {"problem": label, "seed": seed, "K": K, "D_K": trace.D, "V_K": V,
             "bound": regret_bound(problem.dim, lam, M, V, U, K) if M >= 1 else None}
    try:
        check = check_gradient_error_bound(trace)
        entry["gradient_error_violations"] = check.violations
        entry["gradient_error_min_slack"] = float(check.slack.min()) if check.slack.size else None
    except ValueError as exc:
        entry["gradient_error_check"] = f"skipped: {exc}"
    return entry


def run_experiment(config: ExperimentConfig, *, progress=None) -> ExperimentResult:
    """Run every cell of ``config`` and write histories, ratios, profiles and reports.

    A run that raises is logged in ``runs.json`` with its error and skipped;
    the rest of the experiment continues. Outputs go to ``config.output_dir``:
    ``histories/*.jsonl``, ``ratios.csv`` (gd mode), ``profile_tau=<tau>.csv``,
    ``runs.json``, ``summary.json`` and, with ``regret``, ``regret_report.json``.
    """
    out = config.output_dir
    os.makedirs(os.path.join(out, "histories"), exist_ok=True)
    runs: list[dict] = []
    finals: dict[tuple[str, int], dict[str, float]] = {}
    starts: dict[tuple[str, int], float] = {}
    traces: dict[str, dict[str, list[float]]] = {v: {} for v in config.variants}
    dims: dict[str, int] = {}
    regret_rows: list[dict] = []
    files: list[str] = []

    for label, factory, seed in _instances(config):
        for variant in config.variants:
            name = f"{label}|seed={seed}|{variant}"
            try:
                problem = factory()
                d = problem.dim
                if config.mode == "gd":
                    p = max(1, math.ceil(config.sketch_fraction * d))
                    gd = GdConfig(beta=config.beta, sigma=config.sigma, horizon=config.horizon,
                                  sketch=f"{config.sketch_kind}:p={p}",
                                  use_ucb=(variant == "ucb"), on_step_failure="stop",
                                  gradient_estimate=config.gradient_estimate)
                    recorder = None
                    if config.regret and variant == "ucb":
                        _, lam, M = gd.resolved(d)
                        recorder = RegretRecorder(problem, lam, M, probe_rng=seed)
                    hist = run_subspace_gd(problem, gd, seed=seed, recorder=recorder)
                    if recorder is not None:
                        regret_rows.append(_regret_entry(label, seed, recorder, hist, gd, problem))
                else:
                    tr = TrConfig(variant=variant, budget=config.budget_units * (d + 2))
                    hist = run_ss_pounders(problem, tr, seed=seed)
                path = os.path.join(out, "histories", _safe(f"{label}__seed{seed}__{variant}") + ".jsonl")
                hist.write_jsonl(path)
                values_path = path[:-len(".jsonl")] + ".values.csv"
                write_atomic(values_path, "".join(f"{v!r}\n" for v in hist.value_log))
                files += [path, values_path]
                summary = hist.summary()
                summary.update(instance=label, seed=seed, variant=variant, history=path,
                               values=values_path)
                runs.append(summary)
                finals.setdefault((label, seed), {})[variant] = hist.final_f
                starts[(label, seed)] = hist.f0
                key = f"{label}|seed={seed}"
                traces[variant][key] = hist.value_log
                dims[key] = d
            except Exception as exc:  # recorded and skipped by design
                log.warning("run %s failed: %s", name, exc)
                runs.append({"instance": label, "seed": seed, "variant": variant,
                             "status": "error", "message": repr(exc),
                             "traceback": traceback.format_exc()})
            if progress is not None:
                progress(name, runs[-1])

    ratios: list[tuple[str, int, float]] = []
    if config.mode == "gd" and {"random", "ucb"} <= set(config.variants):
        for (label, seed), vals in finals.items():
            if "random" in vals and "ucb" in vals:
                ratios.append((label, seed, performance_ratio(starts[(label, seed)],
                                                              vals["random"], vals["ucb"])))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["problem", "seed", "r"])
        for label, seed, r in ratios:
            w.writerow([label, seed, repr(float(r))])
        path = os.path.join(out, "ratios.csv")
        write_atomic(path, buf.getvalue())
        files.append(path)

    profiles: dict[float, DataProfile] = {}
    # only instances every variant completed enter the profile
    complete = set.intersection(*(set(t) for t in traces.values())) if traces else set()
    if complete:
        shared = {v: {i: traces[v][i] for i in complete} for v in traces}
        for tau in config.taus:
            prof = data_profile(shared, tau, {i: dims[i] for i in complete})
            profiles[tau] = prof
            path = os.path.join(out, f"profile_tau={tau:g}.csv")
            write_atomic(path, prof.to_csv())
            files.append(path)

    if config.regret:
        path = os.path.join(out, "regret_report.json")
        write_atomic(path, json.dumps(regret_rows, indent=2, default=float) + "\n")
        files.append(path)

    write_atomic(os.path.join(out, "runs.json"), json.dumps(runs, indent=2, default=str) + "\n")
    summary = {"config": config.to_dict(), "ratios": ratio_summary(ratios),
               "runs": len(runs), "failed": sum(r.get("status") == "error" for r in runs)}
    write_atomic(os.path.join(out, "summary.json"), json.dumps(summary, indent=2) + "\n")
    files += [os.path.join(out, "runs.json"), os.path.join(out, "summary.json")]
    return ExperimentResult(out, runs, ratios, profiles, regret_rows, files)
