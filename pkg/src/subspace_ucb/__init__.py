"""Subspace optimisation with sliding-window linear UCB sketch selection.

Submodules
----------
problems      test objectives with counted oracles
sketching     random sketches and projections computed from responses
bandit        sliding-window UCB state and sphere subproblem
subspace_gd   first-order subspace descent with backtracking
dfo           derivative-free subspace trust-region solver
regret        regret quantities and bound checks
bench         experiments, performance ratios and data profiles
plotting      matplotlib figures for experiment outputs
cli           command line interface
"""

from .bandit import UcbState
from .bench import ExperimentConfig, data_profile, performance_ratio, run_experiment
from .dfo import TrConfig, run_ss_pounders
from .history import RunHistory
from .problems import Problem, make_problem, resolve_problem
from .regret import RegretRecorder, dynamic_regret, instantaneous_regret, regret_bound
from .subspace_gd import GdConfig, run_subspace_gd

__version__ = "0.1.0"

__all__ = [
    "UcbState",
    "ExperimentConfig",
    "data_profile",
    "performance_ratio",
    "run_experiment",
    "TrConfig",
    "run_ss_pounders",
    "RunHistory",
    "Problem",
    "make_problem",
    "resolve_problem",
    "RegretRecorder",
    "dynamic_regret",
    "instantaneous_regret",
    "regret_bound",
    "GdConfig",
    "run_subspace_gd",
]
