"""Command-line interface.

Examples::

    spikeslab eppf --model stable --sigma 0.5 --zeta 0.25 --freqs 3,2,1 --spike-index 1
    spikeslab predict --model nig --c 1 --tau 1 --zeta 0.5 --freqs 2,1
    spikeslab n0-dist --model stable --sigma 0.25 --zeta 0.5 --n 50
    spikeslab sample --model stable --sigma 0.5 --zeta 0.25 --m 20 --reps 3 --seed 7 --out run/
    spikeslab experiment table1 --seed 1 --reps 20000 --out results/

Exit status is 0 when the run completed and every internal check passed,
1 when a check failed and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import experiments as ex
from . import svg
from .core import ClusterState, ProbTable, eppf as generic_eppf
from .core import kn_distribution, n0_distribution, predictive
from .nig import (NigParams, nig_eppf, nig_kn_distribution, nig_log_eppf, nig_model,
                  nig_n0_distribution, nig_predictive)
from .sampler import ValuedState, simulate, write_trajectories_tsv
from .stable import (StableParams, stable_eppf, stable_kn_distribution, stable_log_eppf,
                     stable_model, stable_n0_distribution, stable_predictive)

__all__ = ["main", "build_parser"]

EXPERIMENTS = ("prior-bands", "table1", "fig2", "table2", "variance-gap")


class CheckFailed(Exception):
    """An internal tolerance check did not pass."""


def _freqs(text: str) -> tuple:
    try:
        vals = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"frequencies must be comma-separated integers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("at least one frequency is needed")
    return vals


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=("stable", "nig"), default="stable",
                   help="sigma-stable or normalized inverse-Gaussian (default: stable)")
    g.add_argument("--sigma", type=float, default=0.5, help="stable index in (0,1) (default 0.5)")
    g.add_argument("--c", type=float, default=1.0, help="N-IG total mass c > 0 (default 1)")
    g.add_argument("--tau", type=float, default=1.0, help="N-IG tilting tau > 0 (default 1)")
    g.add_argument("--zeta", type=float, default=0.0, help="spike weight in [0,1) (default 0)")


def _add_check_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--check", action="store_true",
                   help="cross-check the closed form against the generic quadrature engine")
    p.add_argument("--rtol", type=float, default=1e-6,
                   help="relative tolerance for --check (default 1e-6)")


def _add_run_flags(p: argparse.ArgumentParser, reps_default: Optional[int]) -> None:
    p.add_argument("--seed", type=int, required=True, help="master seed (required)")
    p.add_argument("--reps", type=int, default=reps_default, help="number of replicates")
    p.add_argument("--workers", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikeslab",
        description="Exact laws and urn sampling for spike-and-slab normalized random measures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eppf", help="partition probability of a sample")
    _add_model_flags(p)
    p.add_argument("--freqs", type=_freqs, required=True, help="cluster sizes, e.g. 3,2,1")
    p.add_argument("--spike-index", type=int, default=None,
                   help="1-based position of the cluster at the spike (omit if none)")
    _add_check_flags(p)

    p = sub.add_parser("predict", help="one-step predictive weights")
    _add_model_flags(p)
    p.add_argument("--freqs", type=_freqs, required=True, help="cluster sizes, e.g. 3,2,1")
    p.add_argument("--spike-index", type=int, default=None,
                   help="1-based position of the cluster at the spike (omit if none)")
    _add_check_flags(p)

    for name, what in (("n0-dist", "number of observations at the spike"),
                       ("kn-dist", "number of distinct clusters")):
        p = sub.add_parser(name, help=f"exact law of the {what} (CSV on stdout)")
        _add_model_flags(p)
        p.add_argument("--n", type=int, required=True, help="sample size")
        _add_check_flags(p)

    p = sub.add_parser("sample", help="urn trajectories written as TSV")
    _add_model_flags(p)
    p.add_argument("--m", type=int, required=True, help="draws per replicate")
    _add_run_flags(p, reps_default=1)
    p.add_argument("--freqs", type=_freqs, default=None,
                   help="slab cluster sizes of the starting sample (atoms drawn from the slab)")
    p.add_argument("--n-spike", type=int, default=0,
                   help="observations of the starting sample at the spike")
    p.add_argument("--outer", action="store_true", help="sample the outer model instead")

    p = sub.add_parser("experiment", help="Monte Carlo studies comparing inner and outer models")
    p.add_argument("name", choices=EXPERIMENTS)
    p.add_argument("--config", default=None,
                   help="JSON file with study settings (keys documented in the README)")
    _add_run_flags(p, reps_default=None)
    p.add_argument("--format", choices=("csv", "svg", "both"), default="csv",
                   help="report format (default csv)")
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _params(args):
    if args.model == "stable":
        return StableParams(args.sigma, args.zeta)
    return NigParams(args.c, args.tau, args.zeta)


def _state(args) -> ClusterState:
    return ClusterState(args.freqs, args.spike_index)


def _close(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300)


def _generic(params):
    return stable_model(params) if isinstance(params, StableParams) else nig_model(params)


def _print_table(table: ProbTable) -> None:
    print("value,prob")
    for v, p in zip(table.support, table.probs):
        print(f"{int(v)},{float(p)!r}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_eppf(args) -> None:
    params, state = _params(args), _state(args)
    if isinstance(params, StableParams):
        val, lval = stable_eppf(state, params), stable_log_eppf(state, params)
    else:
        val, lval = nig_eppf(state, params), nig_log_eppf(state, params)
    print(f"eppf {val!r}")
    print(f"log_eppf {lval!r}")
    if args.check:
        ref = generic_eppf(_generic(params), state)
        print(f"generic {ref!r}")
        if not _close(val, ref, args.rtol):
            raise CheckFailed(f"eppf {val} differs from generic {ref}")


def cmd_predict(args) -> None:
    params, state = _params(args), _state(args)
    fn = stable_predictive if isinstance(params, StableParams) else nig_predictive
    w = fn(state, params)
    print(f"case,{w.case_tag}")
    print(f"new,{w.w_new!r}")
    print(f"spike,{w.w_spike!r}")
    for i, v in enumerate(w.w_existing, start=1):
        print(f"cluster_{i},{float(v)!r}")
    print(f"total,{w.total()!r}")
    if abs(w.total() - 1.0) > 1e-9:
        raise CheckFailed(f"predictive weights sum to {w.total()}")
    if args.check:
        ref = predictive(_generic(params), state)
        if not np.allclose(w.as_vector(), ref.as_vector(), rtol=args.rtol, atol=1e-300):
            raise CheckFailed("predictive weights differ from the generic engine")


def _dist_cmd(args, closed, generic) -> None:
    params = _params(args)
    if args.n < 1:
        raise argparse.ArgumentTypeError("--n must be >= 1")
    table = closed(args.n, params)
    _print_table(table)
    if abs(table.probs.sum() - 1.0) > 1e-9:
        raise CheckFailed(f"table sums to {table.probs.sum()}")
    if args.check:
        ref = generic(_generic(params), args.n)
        if not np.allclose(table.probs, ref.probs, rtol=args.rtol, atol=1e-12):
            raise CheckFailed("table differs from the generic engine")


def cmd_n0(args) -> None:
    closed = stable_n0_distribution if args.model == "stable" else nig_n0_distribution
    _dist_cmd(args, closed, n0_distribution)


def cmd_kn(args) -> None:
    closed = stable_kn_distribution if args.model == "stable" else nig_kn_distribution
    _dist_cmd(args, closed, kn_distribution)


def cmd_sample(args) -> None:
    params = _params(args)
    if args.reps is None or args.reps < 1 or args.m < 1:
        raise argparse.ArgumentTypeError("--reps and --m must be >= 1")
    initial = None
    if args.freqs is not None or args.n_spike > 0:
        freqs = args.freqs or ()
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([args.seed, 2**31])))
        initial = ValuedState.from_counts(freqs, rng.standard_normal(len(freqs)), args.n_spike,
                                          params.x0)
    blocks = simulate(params, args.m, args.reps, args.seed, initial=initial, outer=args.outer,
                      values=True, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "trajectories.tsv")
    write_trajectories_tsv(path, blocks)
    print(path)


def _load_config(args) -> dict:
    cfg = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise argparse.ArgumentTypeError("the config file must hold a JSON object")
    cfg["seed"] = args.seed
    cfg["workers"] = args.workers
    if args.reps is not None:
        cfg["reps"] = args.reps
    return cfg


def _tag(params: dict) -> str:
    return "_".join(f"{k}{v:g}" for k, v in params.items())


def cmd_experiment(args) -> None:
    cfg = _load_config(args)
    out = args.out
    os.makedirs(out, exist_ok=True)
    want_csv = args.format in ("csv", "both")
    want_svg = args.format in ("svg", "both")
    problems = []
    written = []

    if args.name == "prior-bands":
        for r in ex.prior_band_study(cfg):
            base = os.path.join(out, f"band_{r.model_tag}_{_tag(r.params)}")
            if np.any(r.lower > r.upper) or r.lower.min() < 0 or r.upper.max() > 1:
                problems.append(f"band {base} violates 0 <= lower <= upper <= 1")
            if np.any(np.diff(r.mean_curve) < 0):
                problems.append(f"band {base} mean curve is not monotone")
            if want_csv:
                ex.write_band_csv(base + ".csv", r)
                written.append(base + ".csv")
            if want_svg:
                svg.band_svg(base + ".svg", r)
                written.append(base + ".svg")

    elif args.name == "table1":
        reports = ex.functional_interval_study(cfg)
        for r in reports:
            if r.interval_length < 0:
                problems.append(f"negative interval length for {r.params}")
            print(f"{r.model_tag:5s} {r.functional:6s} {_tag(r.params):18s} "
                  f"length {r.interval_length:.3f} (se {r.se:.3f})")
        path = os.path.join(out, "table1.csv")
        ex.write_interval_csv(path, reports)
        written.append(path)

    elif args.name == "fig2":
        for r in ex.prior_n0_study(cfg):
            base = os.path.join(out, f"n0_{r.model_tag}_{_tag(r.params)}")
            if abs(r.histogram.sum() - 1.0) > 1e-9:
                problems.append(f"histogram {base} does not sum to 1")
            print(f"{r.model_tag:5s} {_tag(r.params):18s} TV {r.tv:.4f}")
            if want_csv:
                ex.write_n0_csv(base + ".csv", r)
                written.append(base + ".csv")
            if want_svg:
                svg.n0_svg(base + ".svg", r)
                written.append(base + ".svg")

    elif args.name == "table2":
        reports = ex.posterior_n0_study(cfg)
        for r in reports:
            if abs(r.histogram.sum() - 1.0) > 1e-9:
                problems.append(f"histogram for {r.sample_id} {r.params} does not sum to 1")
            print(f"{r.sample_id} {r.model_tag:5s} {_tag(r.params):18s} "
                  f"proportion {r.expected_proportion:.4f} (se {r.se:.4f}, exact {r.exact_proportion:.4f})")
        path = os.path.join(out, "table2.csv")
        ex.write_posterior_csv(path, reports)
        written.append(path)

    else:
        reports = ex.variance_gap_study(cfg)
        for r in reports:
            if not (math.isfinite(r.gap_mc) and math.isfinite(r.se)):
                problems.append(f"non-finite variance gap for {r.params}")
            print(f"{_tag(r.params):18s} gap {r.gap_mc:.5f} (se {r.se:.5f}) "
                  f"theory {r.gap_theory:.5f} z {r.z_score:+.2f}")
        path = os.path.join(out, "variance_gap.csv")
        ex.write_variance_gap_csv(path, reports)
        written.append(path)

    for path in written:
        print(f"wrote {path}")
    if problems:
        raise CheckFailed("; ".join(problems))


_COMMANDS = {
    "eppf": cmd_eppf,
    "predict": cmd_predict,
    "n0-dist": cmd_n0,
    "kn-dist": cmd_kn,
    "sample": cmd_sample,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, argparse.ArgumentTypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
