"""Monte Carlo studies comparing inner and outer spike-and-slab models.

Each study takes a plain ``dict`` configuration (see ``DEFAULTS``), runs the
urn samplers of :mod:`spikeslab.sampler` and returns report objects that can
be written to CSV (and SVG).  Results depend only on the configuration and
the master seed, never on the number of worker threads.

Configuration keys shared by the studies:

``model``      "stable" (uses ``sigmas``) or "nig" (uses ``c`` and ``tau``)
``sigmas``     list of stable indices
``c``, ``tau`` N-IG parameters
``zetas``      list of spike weights
``m``          number of draws per replicate
``reps``       number of replicates
``seed``       master seed (required)
``workers``    worker threads
``x0``         spike location (default 0)
"""

from __future__ import annotations

import copy
import csv
import math
import os
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy import stats

from .core import ProbTable, variance_gap_constant
from .nig import NigParams, nig_model, nig_n0_distribution
from .sampler import ValuedState, block_streams, simulate
from .stable import StableParams, stable_model, stable_n0_distribution
from .urn import chain_n0_distribution, make_urn

__all__ = [
    "DEFAULTS",
    "POSTERIOR_SAMPLES",
    "EcdfBandReport",
    "FunctionalIntervalReport",
    "N0Report",
    "PosteriorReport",
    "VarianceGapReport",
    "prior_band_study",
    "functional_interval_study",
    "prior_n0_study",
    "posterior_n0_study",
    "variance_gap_study",
    "write_band_csv",
    "write_interval_csv",
    "write_n0_csv",
    "write_posterior_csv",
    "write_variance_gap_csv",
    "quantile_interval",
    "batch_se",
]

_BASE = {
    "model": "stable",
    "sigmas": [0.25, 0.5, 0.75],
    "c": 1.0,
    "tau": 1.0,
    "zetas": [0.0, 0.25, 0.5, 0.75],
    "m": 50,
    "reps": 100_000,
    "workers": 1,
    "x0": 0.0,
}

DEFAULTS = {
    "prior-bands": dict(_BASE, grid=[-3.0, 3.0, 0.05]),
    "table1": dict(_BASE),
    "fig2": dict(_BASE, sigmas=[0.25], zetas=[0.5], reps=100_000),
    "table2": dict(_BASE, zetas=[0.25, 0.5, 0.75], samples=["x1", "x2", "x3"]),
    "variance-gap": dict(_BASE, zetas=[0.25, 0.5], reps=1_000_000, method="pair", L=2000),
}

# observed samples of size 50: (observations at the spike, slab frequencies)
POSTERIOR_SAMPLES = {
    "x1": (10, (25, 5, 3, 3, 2, 1, 1)),
    "x2": (25, (10, 5, 3, 3, 2, 1, 1)),
    "x3": (40, (3, 3, 2, 1, 1)),
}

_N_BATCHES = 20


def _config(name: str, config: Optional[dict]) -> dict:
    cfg = copy.deepcopy(DEFAULTS[name])
    if config:
        unknown = set(config) - set(cfg) - {"seed"}
        if unknown:
            raise ValueError(f"unknown configuration keys for {name}: {sorted(unknown)}")
        cfg.update(config)
    if cfg.get("seed") is None:
        raise ValueError("experiments require an explicit integer seed")
    if cfg["model"] not in ("stable", "nig"):
        raise ValueError("model must be 'stable' or 'nig'")
    if int(cfg["reps"]) < 2 or int(cfg["m"]) < 1:
        raise ValueError("need reps >= 2 and m >= 1")
    return cfg


def _param_grid(cfg: dict):
    """Yield (tag, params) over the configured model grid."""
    x0 = float(cfg.get("x0", 0.0))
    for z in cfg["zetas"]:
        if cfg["model"] == "stable":
            for s in cfg["sigmas"]:
                yield StableParams(float(s), float(z), x0)
        else:
            yield NigParams(float(cfg["c"]), float(cfg["tau"]), float(z), x0)


def _shape(params) -> dict:
    if isinstance(params, StableParams):
        return {"sigma": params.sigma, "zeta": params.zeta}
    return {"c": params.c, "tau": params.tau, "zeta": params.zeta}


def _sub_seed(seed: int, *keys: int) -> int:
    """Deterministic 63-bit seed derived from the master seed and keys."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _cell_seed(cfg, params, model_tag: str, salt: int = 0) -> int:
    """Seed for one (params, model) cell; inner and outer get separate streams."""
    key = [int(round(v * 1e6)) for v in _shape(params).values()]
    return _sub_seed(cfg["seed"], salt, 1 if model_tag == "outer" else 0, *key)


def quantile_interval(x: np.ndarray, level: float = 0.95):
    """Equal-tailed empirical interval (linear interpolation of order stats)."""
    a = (1.0 - level) / 2.0
    lo, hi = np.quantile(x, [a, 1.0 - a], method="linear")
    return float(lo), float(hi)


def batch_se(x: np.ndarray, stat, n_batches: int = _N_BATCHES) -> float:
    """Standard error of ``stat`` by splitting x (in replicate order) into
    consecutive batches: sd of the batch statistics over sqrt(n_batches)."""
    parts = np.array_split(np.asarray(x), n_batches)
    vals = np.array([stat(p) for p in parts if len(p) > 1])
    if vals.size < 2:
        return float("nan")
    return float(vals.std(ddof=1) / math.sqrt(vals.size))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class EcdfBandReport:
    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    mean_curve: np.ndarray
    reps: int
    model_tag: str
    params: dict
    mc_mean: Optional[np.ndarray] = None

    def width(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass
class FunctionalIntervalReport:
    functional: str
    interval_length: float
    endpoints: tuple
    se: float
    reps: int
    model_tag: str
    params: dict


@dataclass
class N0Report:
    table: Optional[ProbTable]
    histogram: np.ndarray
    n_total: int
    model_tag: str
    params: dict
    conditioning: Optional[Any] = None
    reps: int = 0

    @property
    def tv(self) -> float:
        if self.table is None:
            return float("nan")
        return self.table.tv(self.histogram)


@dataclass
class PosteriorReport(N0Report):
    sample_id: str = ""
    expected_proportion: float = float("nan")
    se: float = float("nan")
    exact_proportion: float = float("nan")


@dataclass
class VarianceGapReport:
    params: dict
    method: str
    p_quadrature: float
    gap_mc: float
    se: float
    gap_theory: float
    var_inner: float
    var_outer: float
    reps: int
    note: str = ""

    @property
    def z_score(self) -> float:
        return (self.gap_mc - self.gap_theory) / self.se if self.se > 0 else float("nan")


# ---------------------------------------------------------------------------
# prior studies
# ---------------------------------------------------------------------------

def _grid(cfg) -> np.ndarray:
    lo, hi, step = cfg["grid"]
    n = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(n), 10)


def _values(params, cfg, model_tag, reducer, salt=0):
    return simulate(params, int(cfg["m"]), int(cfg["reps"]),
                    _cell_seed(cfg, params, model_tag, salt),
                    outer=(model_tag == "outer"), values=True, reducer=reducer,
                    workers=int(cfg["workers"]))


def _f0(grid, params) -> np.ndarray:
    x0 = params.x0
    return params.zeta * (grid >= x0) + (1 - params.zeta) * stats.norm.cdf(grid)


def prior_band_study(config: Optional[dict] = None) -> list:
    """Pointwise 95% bands of the empirical CDF of m prior draws.

    One :class:`EcdfBandReport` per (model tag, parameters).  The analytic
    mean curve is F0(x) = zeta 1{x >= x0} + (1-zeta) Phi(x) (standard normal
    slab).
    """
    cfg = _config("prior-bands", config)
    grid = _grid(cfg)
    m = int(cfg["m"])
    out = []
    for params in _param_grid(cfg):
        for tag in ("inner", "outer"):
            def red(blk):
                v = np.sort(blk.values, axis=1)
                counts = np.stack([np.searchsorted(row, grid, side="right") for row in v])
                return counts.astype(np.uint16)
            counts = np.concatenate(_values(params, cfg, tag, red, salt=1))
            F = counts / m
            lo, hi = np.quantile(F, [0.025, 0.975], axis=0, method="linear")
            out.append(EcdfBandReport(grid, lo, hi, _f0(grid, params), F.shape[0],
                                      tag, _shape(params), F.mean(axis=0)))
    return out


def functional_interval_study(config: Optional[dict] = None) -> list:
    """95% intervals of the mean and median of m prior draws.

    The median of an even number of draws averages the two middle order
    statistics.  Standard errors of the interval lengths use batch means.
    """
    cfg = _config("table1", config)
    out = []
    for params in _param_grid(cfg):
        for tag in ("inner", "outer"):
            def red(blk):
                return np.stack([blk.values.mean(axis=1), np.median(blk.values, axis=1)], axis=1)
            res = np.concatenate(_values(params, cfg, tag, red, salt=2))
            for col, name in ((0, "mean"), (1, "median")):
                x = res[:, col]
                lo, hi = quantile_interval(x)
                se = batch_se(x, lambda p: np.subtract(*quantile_interval(p)[::-1]))
                out.append(FunctionalIntervalReport(name, hi - lo, (lo, hi), se,
                                                    x.size, tag, _shape(params)))
    return out


def _exact_n0(params, n: int) -> ProbTable:
    if isinstance(params, StableParams):
        return stable_n0_distribution(n, params)
    return nig_n0_distribution(n, params)


def prior_n0_study(config: Optional[dict] = None) -> list:
    """Prior law of the number of spike draws among m: exact tables for both
    models (Binomial(m, zeta) for the outer one) with MC histograms."""
    cfg = _config("fig2", config)
    m = int(cfg["m"])
    out = []
    for params in _param_grid(cfg):
        for tag in ("inner", "outer"):
            blocks = simulate(params, m, int(cfg["reps"]),
                              _cell_seed(cfg, params, tag, salt=3),
                              outer=(tag == "outer"),
                              reducer=lambda b: b.n_spike, workers=int(cfg["workers"]))
            ns = np.concatenate(blocks)
            hist = np.bincount(ns, minlength=m + 1) / ns.size
            if tag == "inner":
                exact = _exact_n0(params, m)
            else:
                exact = ProbTable(0, stats.binom.pmf(np.arange(m + 1), m, params.zeta))
            out.append(N0Report(exact, hist, m, tag, _shape(params), None, ns.size))
    return out


def posterior_sample(sample_id: str, seed: int, x0: float = 0.0, base_sampler=None) -> ValuedState:
    """Observed sample x1, x2 or x3 with slab atom values drawn once from P*."""
    if sample_id not in POSTERIOR_SAMPLES:
        raise ValueError(f"unknown sample {sample_id!r}")
    n_spike, freqs = POSTERIOR_SAMPLES[sample_id]
    idx = sorted(POSTERIOR_SAMPLES).index(sample_id)
    rng = block_streams(_sub_seed(seed, 99, idx), 0)[1]
    if base_sampler is None:
        atoms = rng.standard_normal(len(freqs))
    else:
        atoms = np.asarray(base_sampler(rng, len(freqs)), dtype=float)
    return ValuedState.from_counts(freqs, atoms, n_spike, x0)


def posterior_n0_study(config: Optional[dict] = None) -> list:
    """Spike count after m further draws given each observed sample.

    Reports the MC expected proportion E[N0]/(n+m) with its standard error and
    the exact value from the forward chain over (slab clusters, spike count).
    """
    cfg = _config("table2", config)
    m = int(cfg["m"])
    out = []
    for sid in cfg["samples"]:
        for params in _param_grid(cfg):
            init = posterior_sample(sid, cfg["seed"], params.x0, params.base_sampler)
            counts, _, n_spike = init.split()
            n_tot = init.n + m
            for tag in ("inner", "outer"):
                blocks = simulate(params, m, int(cfg["reps"]),
                                  _cell_seed(cfg, params, tag, salt=4 + sorted(POSTERIOR_SAMPLES).index(sid)),
                                  initial=init, outer=(tag == "outer"),
                                  reducer=lambda b: b.n_spike, workers=int(cfg["workers"]))
                ns = np.concatenate(blocks)
                hist = np.bincount(ns, minlength=n_tot + 1) / ns.size
                exact = chain_n0_distribution(make_urn(params), m, init.n, len(counts),
                                              n_spike, outer=(tag == "outer"))
                prop = ns / n_tot
                out.append(PosteriorReport(
                    exact, hist, n_tot, tag, _shape(params), init, ns.size,
                    sample_id=sid, expected_proportion=float(prop.mean()),
                    se=float(prop.std(ddof=1) / math.sqrt(prop.size)),
                    exact_proportion=exact.mean() / n_tot,
                ))
    return out


# ---------------------------------------------------------------------------
# variance gap
# ---------------------------------------------------------------------------

def _model_for(params):
    return stable_model(params) if isinstance(params, StableParams) else nig_model(params)


def variance_gap_study(config: Optional[dict] = None) -> list:
    """MC check of var(P(f)) - var(Q(f)) = p zeta (1-zeta) for f(x) = x.

    With a standard normal slab and x0 = 0 both random means have expectation
    0, and var(P f) = E[f(X1) f(X2)] for two draws of the urn.  ``method``:

    * ``"pair"``: average of X1 X2 over independent two-draw urns (unbiased).
    * ``"trajectory"``: each replicate draws L values; with Ybar the average
      and s2 the within-trajectory sample variance, Var(Ybar) - mean(s2)/L is
      unbiased for var(P f).
    """
    cfg = _config("variance-gap", config)
    method = cfg["method"]
    if method not in ("pair", "trajectory"):
        raise ValueError("method must be 'pair' or 'trajectory'")
    if float(cfg.get("x0", 0.0)) != 0.0:
        raise ValueError("the variance-gap study assumes x0 = 0")
    out = []
    for params in _param_grid(cfg):
        p = variance_gap_constant(_model_for(params), tol=1e-12)
        theory = p * params.zeta * (1 - params.zeta)
        est = {}
        for tag in ("inner", "outer"):
            if method == "pair":
                blocks = simulate(params, 2, int(cfg["reps"]),
                                  _cell_seed(cfg, params, tag, salt=10),
                                  outer=(tag == "outer"), values=True,
                                  reducer=lambda b: b.values[:, 0] * b.values[:, 1],
                                  workers=int(cfg["workers"]))
                prod = np.concatenate(blocks)
                est[tag] = (float(prod.mean()), float(prod.var(ddof=1) / prod.size))
            else:
                L = int(cfg["L"])

                def red(b):
                    v = b.values
                    return np.stack([v.mean(axis=1), v.var(axis=1, ddof=1)], axis=1)

                res = np.concatenate(simulate(params, L, int(cfg["reps"]),
                                              _cell_seed(cfg, params, tag, salt=11),
                                              outer=(tag == "outer"), values=True,
                                              reducer=red, workers=int(cfg["workers"])))
                ybar, s2 = res[:, 0], res[:, 1]
                R = ybar.size
                # var(P f) = E[Ybar^2] - E[s2]/L  (mean of f is 0 under both models)
                contrib = ybar ** 2 - s2 / L
                est[tag] = (float(contrib.mean()), float(contrib.var(ddof=1) / R))
        gap = est["inner"][0] - est["outer"][0]
        se = math.sqrt(est["inner"][1] + est["outer"][1])
        note = "pair estimator E[X1 X2]" if method == "pair" else (
            f"trajectory estimator, L={cfg['L']}, corrected by within variance / L")
        out.append(VarianceGapReport(_shape(params), method, p, gap, se, theory,
                                     est["inner"][0], est["outer"][0], int(cfg["reps"]), note))
    return out


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def _writer(path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def write_band_csv(path, report: EcdfBandReport) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["x", "lower", "upper", "mean"])
        for row in zip(report.grid, report.lower, report.upper, report.mean_curve):
            w.writerow([_fmt(v) for v in row])


def write_interval_csv(path, reports) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["model", "functional", "sigma", "zeta", "length", "lo", "hi", "se"])
        for r in reports:
            w.writerow([r.model_tag, r.functional, r.params.get("sigma", ""), r.params["zeta"],
                        _fmt(r.interval_length), _fmt(r.endpoints[0]), _fmt(r.endpoints[1]),
                        _fmt(r.se)])


def write_n0_csv(path, report: N0Report) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["j", "exact_p", "mc_p"])
        for j in range(report.n_total + 1):
            ex = report.table[j] if report.table is not None else float("nan")
            w.writerow([j, _fmt(ex), _fmt(report.histogram[j])])


def write_posterior_csv(path, reports) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["sample_id", "sigma", "zeta", "model", "expected_proportion", "se"])
        for r in reports:
            w.writerow([r.sample_id, r.params.get("sigma", ""), r.params["zeta"], r.model_tag,
                        _fmt(r.expected_proportion), _fmt(r.se)])


def write_variance_gap_csv(path, reports) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["sigma", "zeta", "method", "p", "gap_mc", "se", "gap_theory"])
        for r in reports:
            w.writerow([r.params.get("sigma", ""), r.params["zeta"], r.method, _fmt(r.p_quadrature),
                        _fmt(r.gap_mc), _fmt(r.se), _fmt(r.gap_theory)])
