"""Experiment harness: configuration, solver dispatch, reports, figures.

A run consumes one JSON config, executes one solver on one measure family,
and writes into its output directory:

* ``trace_<solver>.csv``  -- the solver's convergence trace,
* ``report.json``         -- byte-faithful config echo plus summary metrics
                             recomputed from the final iterate,
* ``trace_<solver>.png`` / ``barycenter.png`` -- rendered figures (optional).

All randomness flows from the single top-level seed, and trace files are
byte-identical across reruns of the same config.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .decentralized import DecentralizedRunConfig, decentralized_dual_wb, decentralized_mirror_prox_wb
from .errors import ConvergenceFailure, InvalidInputError
from .gaussians import (
    GaussianFamilySpec,
    gaussian_measure_stream,
    gen_gaussian_histograms,
    true_gaussian_barycenter,
    w2_distance_1d,
)
from .measures import cost_matrix_grid, load_histograms, smooth_to_interior
from .network import topology_from_spec
from .sa import MeasureStream, SAConfig, psgd_barycenter, smd_barycenter
from .saddle import mirror_prox_wb
from .trace import IterateTrace

SOLVERS = ("psgd", "smd", "mirror_prox", "dual_accel", "decentralized_dual", "decentralized_mp")


class ConfigError(InvalidInputError):
    """Configuration file is syntactically or semantically invalid."""


def max_threads():
    """Concurrency cap from BARYLAB_THREADS (default 1)."""
    raw = os.environ.get("BARYLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"BARYLAB_THREADS must be an integer, got {raw!r}")


def _require(config, key, default=None):
    if key in config:
        return config[key]
    if default is not None:
        return default
    raise ConfigError(f"config is missing required key {key!r}")


class ExperimentSetup:
    """Measures, physical grid, solver cost, and reference barycenter."""

    def __init__(self, config):
        mspec = _require(config, "measures")
        source = mspec.get("source", "gaussian")
        self.seed = int(config.get("seed", 0))
        if source == "gaussian":
            fam_spec = GaussianFamilySpec(
                count=int(mspec.get("count", 10)),
                grid_range=tuple(mspec.get("grid_range", (-10.0, 10.0))),
                grid_size=int(mspec.get("grid_size", 100)),
                mean_range=tuple(mspec.get("mean_range", (-5.0, 5.0))),
                std_range=tuple(mspec.get("std_range", (0.8, 1.8))),
                seed=self.seed,
            )
            family = gen_gaussian_histograms(fam_spec)
            self.grid = family.grid
            self.measures = [np.asarray(h) for h in family.measures]
            self.reference = np.asarray(true_gaussian_barycenter(family))
            self.family_spec = fam_spec
        elif source == "file":
            hists = load_histograms(mspec["path"])
            self.measures = [np.asarray(h) for h in hists]
            n = len(self.measures[0])
            rng = tuple(mspec.get("grid_range", (-10.0, 10.0)))
            self.grid = np.linspace(rng[0], rng[1], n)
            self.reference = None
            self.family_spec = None
        else:
            raise ConfigError(f"unknown measure source {source!r}; valid: gaussian, file")

        # solvers see the support rescaled to [-s, s]; metrics stay physical
        self.support_scale = float(config.get("support_scale", 1.0))
        exponent = float(config.get("cost_exponent", 2.0))
        half_range = np.abs(self.grid).max()
        solver_grid = self.grid * (self.support_scale / half_range)
        self.cost = cost_matrix_grid(solver_grid, exponent)
        self.smooth_rho = float(config.get("smooth_rho", 1e-9))

    def w2(self, p, ref):
        return w2_distance_1d(p, ref, self.grid)

    def positive_measures(self):
        return [np.asarray(smooth_to_interior(q, self.smooth_rho)) for q in self.measures]


def _solver_trace_name(solver):
    return f"trace_{solver}.csv"


def run_experiment(config, outdir, config_text=None):
    """Execute one experiment config; returns the report dict.

    ``config`` may be a path or a dict. Raises ConfigError for bad
    configuration; propagates ConvergenceFailure from solvers.
    """
    if isinstance(config, (str, Path)):
        config_text = Path(config).read_text(encoding="utf-8")
        try:
            config = json.loads(config_text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if config_text is None:
        config_text = json.dumps(config, indent=2, sort_keys=True)
    if "experiments" in config:
        return run_experiment_batch(config, outdir, config_text)

    solver = _require(config, "solver")
    if solver not in SOLVERS:
        raise ConfigError(f"unknown solver {solver!r}; valid: {', '.join(SOLVERS)}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    setup = ExperimentSetup(config)
    t_start = time.perf_counter()
    estimate, trace, extras = _dispatch(solver, setup, config)
    runtime_s = time.perf_counter() - t_start

    trace_path = outdir / _solver_trace_name(solver)
    trace.to_csv(trace_path)

    summary = {
        "solver": solver,
        "n_measures": len(setup.measures),
        "support_size": int(len(setup.grid)),
        "runtime_s": runtime_s,
        "final_iterate_sum": float(np.asarray(estimate).sum()),
    }
    if trace.rows:
        for col in trace.columns[1:]:
            if col != "wall_time_ms":
                summary[f"final_{col}"] = trace.last(col)
    if setup.reference is not None:
        summary["w2_to_true_barycenter"] = setup.w2(np.asarray(estimate), setup.reference)
        summary["w2_initial"] = setup.w2(
            np.full(len(setup.grid), 1.0 / len(setup.grid)), setup.reference
        )
    summary.update(extras)

    report = {
        "config": json.loads(config_text),
        "config_echo": config_text,
        "summary": summary,
        "trace_files": [trace_path.name],
    }

    if config.get("render_figures", True):
        from .plots import render_barycenter_figure, render_trace_figure

        fig_path = outdir / f"trace_{solver}.png"
        render_trace_figure(trace, fig_path, title=solver)
        report["figure_files"] = [fig_path.name]
        bary_path = outdir / "barycenter.png"
        render_barycenter_figure(
            setup.grid, estimate, setup.measures, bary_path,
            reference=setup.reference, title=f"{solver} barycenter estimate",
        )
        report["figure_files"].append(bary_path.name)

    with open(outdir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    return report


def run_experiment_batch(config, outdir, config_text):
    """Run a list of experiment configs, each in its own subdirectory.

    Experiments run concurrently up to the BARYLAB_THREADS cap; each one
    owns its output directory so results are independent of scheduling.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    jobs = []
    for idx, sub in enumerate(config["experiments"]):
        name = sub.get("name", f"exp{idx:02d}")
        jobs.append((sub, outdir / name))
    reports = {}
    workers = min(max_threads(), max(1, len(jobs)))
    if workers == 1:
        for sub, subdir in jobs:
            reports[subdir.name] = run_experiment(sub, subdir)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(run_experiment, sub, subdir): subdir.name for sub, subdir in jobs
            }
            for fut, name in futures.items():
                reports[name] = fut.result()
    index = {
        "config_echo": config_text,
        "experiments": sorted(reports),
    }
    with open(outdir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2)
    return index


def _budget(config, default_eps=1e-2):
    budget = config.get("budget", {})
    return budget.get("n_iters"), float(budget.get("epsilon", default_eps))


def _dispatch(solver, setup, config):
    n_iters, epsilon = _budget(config)
    gamma = float(config.get("gamma", 0.1))
    seed = setup.seed
    record_wall = bool(config.get("record_wall_time", False))

    if solver in ("psgd", "smd"):
        if setup.family_spec is not None:
            stream = gaussian_measure_stream(setup.family_spec)
        else:
            stream = MeasureStream.from_measures(setup.positive_measures(), seed=seed)
        if n_iters is None:
            raise ConfigError("psgd/smd need budget.n_iters (sample count)")
        cfg = SAConfig(
            N=int(n_iters),
            gamma=gamma,
            delta=float(config.get("delta", 1e-4)),
            reference=setup.reference,
            w2_metric=setup.w2,
            holdout=tuple(setup.positive_measures()[: int(config.get("holdout_size", 0))]),
            record_wall_time=record_wall,
        )
        runner = psgd_barycenter if solver == "psgd" else smd_barycenter
        estimate, trace = runner(stream, setup.cost, cfg)
        return np.asarray(estimate), trace, {}

    if solver == "mirror_prox":
        penalty = None
        if "penalty" in config:
            from .measures import BregmanPenalty

            lam = float(config["penalty"].get("lambda", 0.0))
            n = len(setup.grid)
            ref = config["penalty"].get("reference")
            anchor = np.full(n, 1.0 / n) if ref is None else np.asarray(ref, dtype=float)
            penalty = (lam, BregmanPenalty(anchor))
        estimate, trace, res = mirror_prox_wb(
            setup.positive_measures(),
            setup.cost,
            epsilon=epsilon,
            penalty=penalty,
            n_iters=n_iters,
            reference=setup.reference,
            w2_metric=setup.w2,
            record_wall_time=record_wall,
        )
        return np.asarray(estimate), trace, {"n_iters": res["n_iters"], "eta": res["eta"]}

    # dual tracks: the centralized run is the complete-graph instance
    if solver == "dual_accel":
        topo_spec = {"kind": "complete", "m": len(setup.measures)}
        if len(setup.measures) == 1:
            topo_spec = {"kind": "single"}
    else:
        topo_spec = config.get("topology")
        if topo_spec is None:
            raise ConfigError(f"{solver} requires a topology spec")
    topology = topology_from_spec(topo_spec)

    cfg = DecentralizedRunConfig(
        topology=topology,
        epsilon=epsilon,
        gamma=gamma,
        n_iters=n_iters,
        seed=seed,
        sampled=bool(config.get("sampled", True)),
        alpha_conf=float(config.get("alpha_conf", 0.05)),
        batch_cap=int(config.get("batch_cap", 1_000_000)),
        eval_objective=bool(config.get("eval_objective", True)),
        objective_tol=float(config.get("objective_tol", 1e-6)),
        record_wall_time=record_wall,
    )
    if solver in ("dual_accel", "decentralized_dual"):
        estimates, trace, info = decentralized_dual_wb(setup.positive_measures(), setup.cost, cfg)
    else:
        estimates, trace, info = decentralized_mirror_prox_wb(
            setup.positive_measures(), setup.cost, cfg
        )
    extras = {
        "messages": info["messages"],
        "oracle_calls": info["oracle_calls"],
        "per_node_estimates": len(estimates),
    }
    return np.asarray(info["mean_estimate"]), trace, extras
