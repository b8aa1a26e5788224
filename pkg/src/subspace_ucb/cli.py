"""Command line entry point: ``run``, ``profile``, ``verify`` and ``list-problems``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

__all__ = ["main", "build_parser", "verify_suite"]


def _cmd_run(args) -> int:
    from .bench import ExperimentConfig, run_experiment

    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    if args.out:
        data["output_dir"] = args.out
    config = ExperimentConfig.from_dict(data)

    def progress(name, summary):
        if not args.quiet:
            final = summary.get("final_f")
            print(f"{name}: {summary.get('status')} f={final}", flush=True)

    result = run_experiment(config, progress=progress)
    if config.plots and not args.no_plots:
        from .plotting import render_experiment

        result.files += render_experiment(result)
    stats = result.ratio_stats
    print(json.dumps({"output_dir": result.output_dir, "ratios": stats,
                      "files": len(result.files)}, indent=2))
    return 0


def _load_runs(folder):
    with open(os.path.join(folder, "runs.json")) as fh:
        runs = json.load(fh)
    for run in runs:
        if run.get("status") == "error" or "values" not in run:
            continue
        path = run["values"]
        if not os.path.isabs(path) and not os.path.exists(path):
            path = os.path.join(folder, "histories", os.path.basename(path))
        with open(path) as fh:
            values = [float(line) for line in fh if line.strip()]
        yield run, values


def _cmd_profile(args) -> int:
    from .bench import data_profile
    from .history import write_atomic

    traces: dict[str, dict[str, list[float]]] = {}
    dims: dict[str, int] = {}
    for folder in args.dirs:
        for run, values in _load_runs(folder):
            key = f"{run['instance']}|seed={run['seed']}"
            traces.setdefault(run["variant"], {})[key] = values
            dims[key] = int(run["dim"])
    if not traces:
        print("no completed runs found", file=sys.stderr)
        return 1
    common = set.intersection(*(set(t) for t in traces.values()))
    traces = {s: {i: t[i] for i in common} for s, t in traces.items()}
    out = args.out or args.dirs[0]
    for tau in args.tau:
        prof = data_profile(traces, tau, {i: dims[i] for i in common})
        path = os.path.join(out, f"profile_tau={tau:g}.csv")
        write_atomic(path, prof.to_csv())
        print(path)
        if not args.no_plots:
            from .plotting import plot_data_profile

            print(plot_data_profile(prof, os.path.join(out, "figures", f"profile_tau={tau:g}.png")))
    return 0


def verify_suite(seeds: int = 20, quick: bool = False) -> dict:
    """Numerical checks of the regret machinery; returns a JSON-ready report."""
    from .bandit import UcbState
    from .problems import Problem, ill_conditioned_quadratic
    from .regret import RegretRecorder, check_gradient_error_bound, check_potential_lemma
    from .subspace_gd import GdConfig, run_subspace_gd

    report: dict = {}
    rng = np.random.default_rng(0)
    worst: dict[str, float] = {}
    count = 0
    reps = 10 if quick else 100
    for d in (2, 5, 20):
        for M in (1, 5, 20):
            for lam in (0.01, 1.0):
                key = f"lam={lam:g}"
                for _ in range(reps):
                    S = rng.standard_normal((50, d))
                    S /= np.linalg.norm(S, axis=1, keepdims=True)
                    slack = check_potential_lemma(S, lam, M, d)[2]
                    worst[key] = min(worst.get(key, np.inf), slack)
                    count += 1
    report["potential"] = {"sequences": count, "min_slack": float(min(worst.values())),
                           "min_slack_by_lambda": {k: float(v) for k, v in worst.items()}}

    violations = 0
    for seed in range(seeds):
        d = 5 + seed % 16
        if seed % 2:
            c = np.random.default_rng(seed).standard_normal(d)
            prob = Problem("linear", d, lambda x, c=c: float(c @ x), lambda x, c=c: c.copy(),
                           np.zeros(d))
        else:
            prob = ill_conditioned_quadratic(d, condition=10.0)
        cfg = GdConfig(horizon=50, sketch="gaussian:p=1", use_ucb=True, on_step_failure="stop")
        _, lam, M = cfg.resolved(d)
        rec = RegretRecorder(prob, lam, M, probe_rng=seed)
        hist = run_subspace_gd(prob, cfg, seed=seed, recorder=rec)
        violations += check_gradient_error_bound(rec.finish(hist.final_x)).violations
    report["gradient_error"] = {"runs": seeds, "violations": int(violations)}

    err = 0.0
    for seed in range(seeds):
        st = UcbState(20, 0.5, 10, seed=seed)
        r = np.random.default_rng(seed)
        for _ in range(100):
            st.update(r.standard_normal((20, 1)), r.standard_normal(1))
        err = max(err, float(np.abs(st.C_inverse - np.linalg.inv(st.covariance())).max()))
    report["inverse_update"] = {"runs": seeds, "max_error": err}
    report["ok"] = bool(report["potential"]["min_slack"] >= -1e-9 and violations == 0
                        and err <= 1e-8)
    return report


def _cmd_verify(args) -> int:
    t = time.time()
    report = verify_suite(seeds=args.seeds, quick=args.quick)
    report["seconds"] = round(time.time() - t, 2)
    text = json.dumps(report, indent=2)
    if args.out:
        from .history import write_atomic

        write_atomic(args.out, text + "\n")
    print(text)
    return 0 if report["ok"] else 1


def _cmd_list(args) -> int:
    from .problems import MORE_WILD_SUITE, SCALABLE_SUITE, list_problems

    for name, dim in list_problems():
        tags = []
        if name in SCALABLE_SUITE:
            tags.append("scalable")
        if any(name == n for n, _ in MORE_WILD_SUITE):
            tags.append("small-suite")
        print(f"{name:24s} default_dim={dim:<4d} {' '.join(tags)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subspace-ucb",
                                     description="Subspace optimisation with UCB sketch selection.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a flat JSON config")
    run.add_argument("config", nargs="?", help="JSON file with ExperimentConfig keys")
    run.add_argument("--out", help="override output_dir")
    run.add_argument("--no-plots", action="store_true")
    run.add_argument("--quiet", action="store_true")
    run.set_defaults(func=_cmd_run)

    prof = sub.add_parser("profile", help="data profiles from result directories")
    prof.add_argument("dirs", nargs="+")
    prof.add_argument("--tau", type=float, nargs="+", default=[0.1, 0.01, 0.001])
    prof.add_argument("--out")
    prof.add_argument("--no-plots", action="store_true")
    prof.set_defaults(func=_cmd_profile)

    ver = sub.add_parser("verify", help="numerical bound checks")
    ver.add_argument("--seeds", type=int, default=20)
    ver.add_argument("--quick", action="store_true")
    ver.add_argument("--out")
    ver.set_defaults(func=_cmd_verify)

    lst = sub.add_parser("list-problems", help="show registered test problems")
    lst.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
