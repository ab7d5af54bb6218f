"""Command-line entry points.

    barylab gen-gaussians --spec spec.json -o measures.txt
    barylab run --config cfg.json -o outdir/
    barylab exact-ot --p f1 --q f2 --cost grid2

Exit codes: 0 success, 1 configuration error, 2 solver convergence failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import ConvergenceFailure, InvalidInputError
from .experiment import ConfigError, run_experiment
from .gaussians import GaussianFamilySpec, gen_gaussian_histograms, true_gaussian_barycenter
from .measures import cost_matrix_grid, load_histograms, save_histograms
from .ot import exact_ot


def _cmd_gen_gaussians(args):
    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        spec = GaussianFamilySpec(
            count=int(raw.get("count", 10)),
            grid_range=tuple(raw.get("grid_range", (-10.0, 10.0))),
            grid_size=int(raw.get("grid_size", 100)),
            mean_range=tuple(raw.get("mean_range", (-5.0, 5.0))),
            std_range=tuple(raw.get("std_range", (0.8, 1.8))),
            seed=int(raw.get("seed", 0)),
        )
    except (OSError, ValueError, KeyError, InvalidInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    family = gen_gaussian_histograms(spec)
    save_histograms(args.output, family.measures)
    if args.meta:
        meta = {
            "means": family.means.tolist(),
            "stds": family.stds.tolist(),
            "grid_range": list(spec.grid_range),
            "grid_size": spec.grid_size,
            "seed": spec.seed,
            "true_barycenter": np.asarray(true_gaussian_barycenter(family)).tolist(),
        }
        with open(args.meta, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)
    print(f"wrote {spec.count} measures to {args.output}")
    return 0


def _cmd_run(args):
    try:
        report = run_experiment(args.config, args.output)
    except (ConfigError, InvalidInputError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceFailure as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 2
    summary = report.get("summary", report.get("experiments"))
    print(json.dumps(summary, indent=2, default=str))
    return 0


def _parse_cost_name(name, n):
    """Cost names: 'grid<p>' puts n points uniformly on [0,1] with exponent p."""
    if not name.startswith("grid"):
        raise InvalidInputError(f"unknown cost {name!r}; expected grid<exponent>, e.g. grid2")
    try:
        exponent = float(name[4:] or "2")
    except ValueError:
        raise InvalidInputError(f"bad cost exponent in {name!r}")
    return cost_matrix_grid(np.linspace(0.0, 1.0, n), exponent)


def _cmd_exact_ot(args):
    try:
        p = load_histograms(args.p)[0]
        q = load_histograms(args.q)[0]
        if len(p) != len(q):
            raise InvalidInputError("p and q must share a support size")
        cost = _parse_cost_name(args.cost, len(p))
        sol = exact_ot(p, q, cost)
    except (OSError, InvalidInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceFailure as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(sol.to_jsonable(), indent=2))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="barylab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-gaussians", help="sample a truncated-Gaussian measure family")
    g.add_argument("--spec", required=True, help="family spec JSON")
    g.add_argument("-o", "--output", required=True, help="measures text file to write")
    g.add_argument("--meta", help="optional JSON sidecar with means/stds/true barycenter")
    g.set_defaults(func=_cmd_gen_gaussians)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True, help="experiment config JSON")
    r.add_argument("-o", "--output", required=True, help="output directory")
    r.set_defaults(func=_cmd_run)

    e = sub.add_parser("exact-ot", help="solve one transport LP between two histograms")
    e.add_argument("--p", required=True, help="text file with the first histogram")
    e.add_argument("--q", required=True, help="text file with the second histogram")
    e.add_argument("--cost", default="grid2", help="cost name, e.g. grid2 (default)")
    e.set_defaults(func=_cmd_exact_ot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
