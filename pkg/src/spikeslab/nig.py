"""Closed forms for the normalized inverse-Gaussian spike-and-slab model.

With beta = c sqrt(tau) the model is driven by

    rho0(q, n) = sum_{r=0}^{n-1} binom(n-1, r) (-1)^r beta^{2r} Gamma(q-2r, beta)
               = int_beta^inf x^{q-1} (1 - beta^2/x^2)^{n-1} e^{-x} dx,

    rho(m, q, n) = sum_{i=1}^m (2 zeta)^i Gamma(2m-i) / (Gamma(m+1-i) Gamma(i))
                   rho0(q+i-1, n).

The alternating sum is cheap but loses accuracy when its terms are large
compared to the result (large beta or n); the integral form has a positive
integrand and is used whenever the sum is ill conditioned.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .core import ClusterState, HnrmiModel, PredictiveWeights, ProbTable
from .quadrature import log_integrate
from .special import gen_fact_table, log_binom, log_upper_inc_gamma_range, logsumexp
from .stable import standard_normal

__all__ = [
    "NigParams",
    "PrecisionWarning",
    "RhoTable",
    "rho0",
    "log_rho0",
    "rho",
    "log_rho",
    "nig_model",
    "nig_eppf",
    "nig_log_eppf",
    "nig_predictive",
    "nig_kn_n0_joint",
    "nig_n0_distribution",
    "nig_kn_distribution",
    "COND_FALLBACK",
    "COND_WARN",
]

COND_FALLBACK = 1e4
COND_WARN = 1e12
_QUAD_TOL = 1e-13


class PrecisionWarning(RuntimeWarning):
    """The requested evaluation is numerically ill conditioned."""


@dataclass(frozen=True)
class NigParams:
    c: float = 1.0
    tau: float = 1.0
    zeta: float = 0.0
    x0: float = 0.0
    base_sampler: Callable = field(default=standard_normal, repr=False, compare=False)

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not 0.0 <= self.zeta < 1.0:
            raise ValueError(f"zeta must lie in [0, 1), got {self.zeta}")
        for name in ("c", "tau", "zeta"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def beta(self) -> float:
        return self.c * math.sqrt(self.tau)

    @property
    def alpha(self) -> float:
        """Discount applied to existing cluster sizes in the urn."""
        return 0.5


# ---------------------------------------------------------------------------
# rho numbers
# ---------------------------------------------------------------------------

_GAMMA_CACHE: dict = {}


def _log_gammas(a_min: int, a_max: int, beta: float) -> np.ndarray:
    """log Gamma(a, beta) for a_min <= a <= a_max from a per-beta cache."""
    hit = _GAMMA_CACHE.get(beta)
    if hit is None or hit[0] > a_min or hit[1] < a_max:
        lo = min(a_min, hit[0]) if hit else a_min
        hi = max(a_max, hit[1]) if hit else a_max
        lo, hi = min(lo, -64), max(hi, 64)
        if len(_GAMMA_CACHE) > 64:
            _GAMMA_CACHE.clear()
        hit = _GAMMA_CACHE[beta] = (lo, hi, log_upper_inc_gamma_range(lo, hi, beta))
    lo = hit[0]
    return hit[2][a_min - lo : a_max - lo + 1]


def _rho0_sum_terms(q: int, n: int, beta: float):
    """Log-magnitudes and signs of the alternating-sum terms."""
    r = np.arange(n)
    la = _log_gammas(q - 2 * (n - 1), q, beta)[::-1][::2]
    lt = log_binom(n - 1, r) + 2 * r * math.log(beta) + la
    sign = np.where(r % 2 == 0, 1.0, -1.0)
    return np.atleast_1d(lt), sign


def _rho0_by_sum(q: int, n: int, beta: float):
    """(log value, condition number) of the alternating sum; log value is nan
    when the computed sum is not positive."""
    lt, sign = _rho0_sum_terms(q, n, beta)
    top = lt.max()
    terms = sign * np.exp(lt - top)
    tot = math.fsum(terms.tolist())
    absum = float(np.exp(lt - top).sum())
    if tot <= 0:
        return math.nan, math.inf
    return math.log(tot) + top, absum / tot


def _log_rho0_quad(qs, n: int, beta: float) -> np.ndarray:
    """log rho0(q, n) for every q in ``qs`` by quadrature of the integral form
    with x = beta + y."""
    qs = np.atleast_1d(np.asarray(qs))

    def logf(y):
        x = beta + y
        lx = np.log(x)
        core = (n - 1) * (np.log(y) + np.log(2 * beta + y) - 2 * lx) - x
        return (qs[:, None] - 1) * lx[None, :] + core[None, :]

    return np.atleast_1d(log_integrate(logf, tol=_QUAD_TOL))


def _check_qn(q: int, n: int):
    if int(q) != q or int(n) != n or not 1 <= q <= n:
        raise ValueError(f"rho0 needs integers 1 <= q <= n, got q={q}, n={n}")
    return int(q), int(n)


def log_rho0(q: int, n: int, params: NigParams, method: str = "auto") -> float:
    """log rho0(q, n).

    ``method``: ``"sum"`` (compensated alternating sum; warns with
    :class:`PrecisionWarning` when its condition number exceeds 1e12),
    ``"quad"`` (integral form) or ``"auto"`` (sum unless the condition number
    exceeds 1e4, then quadrature).
    """
    q, n = _check_qn(q, n)
    beta = params.beta
    if method == "quad":
        return float(_log_rho0_quad([q], n, beta)[0])
    if method not in ("auto", "sum"):
        raise ValueError(f"unknown method {method!r}")
    val, cond = _rho0_by_sum(q, n, beta)
    if method == "sum":
        if cond > COND_WARN:
            warnings.warn(
                f"alternating sum for rho0(q={q}, n={n}) has condition number "
                f"{cond:.2g} at beta={beta:g}; result is unreliable",
                PrecisionWarning, stacklevel=2,
            )
        return val
    if cond > COND_FALLBACK:
        return float(_log_rho0_quad([q], n, beta)[0])
    return val


def rho0(q: int, n: int, params: NigParams, method: str = "auto") -> float:
    """rho0(q, n) = sum_r binom(n-1, r) (-1)^r beta^{2r} Gamma(q-2r, beta)."""
    return math.exp(log_rho0(q, n, params, method))


def _log_rho0_column(n: int, q_max: int, beta: float) -> np.ndarray:
    """log rho0(q, n) for q = 1..q_max (auto method, quadrature batched)."""
    out = np.empty(q_max)
    bad = []
    for q in range(1, q_max + 1):
        val, cond = _rho0_by_sum(q, n, beta)
        if cond > COND_FALLBACK:
            bad.append(q)
        else:
            out[q - 1] = val
    if bad:
        out[np.asarray(bad) - 1] = _log_rho0_quad(bad, n, beta)
    return out


def _rho_coeffs(m: int, zeta: float) -> np.ndarray:
    """log of (2 zeta)^i Gamma(2m-i) / (Gamma(m+1-i) Gamma(i)), i = 1..m."""
    i = np.arange(1, m + 1)
    return i * math.log(2 * zeta) + gammaln(2 * m - i) - gammaln(m + 1 - i) - gammaln(i)


class RhoTable:
    """Cache of log rho0(q, n) with derived log rho(m, q, n).

    ``log_rho0_table[q, n]`` is filled column by column (one column per n) as
    larger n are requested.  Thread safe for concurrent readers.
    """

    def __init__(self, params: NigParams):
        self.params = params
        self.log_rho0_table = np.full((1, 1), np.nan)
        self._lock = threading.Lock()

    @property
    def n_max(self) -> int:
        return self.log_rho0_table.shape[1] - 1

    def ensure(self, n_max: int) -> "RhoTable":
        if n_max <= self.n_max:
            return self
        with self._lock:
            old = self.log_rho0_table
            N0 = old.shape[1] - 1
            if n_max <= N0:
                return self
            new = np.full((n_max + 1, n_max + 1), np.nan)
            new[: old.shape[0], : old.shape[1]] = old
            for n in range(N0 + 1, n_max + 1):
                new[1 : n + 1, n] = _log_rho0_column(n, n, self.params.beta)
            self.log_rho0_table = new
        return self

    def log_rho0(self, q: int, n: int) -> float:
        q, n = _check_qn(q, n)
        self.ensure(n)
        return float(self.log_rho0_table[q, n])

    def log_rho(self, m: int, q: int, n: int) -> float:
        q, n = _check_qn(q, n)
        if int(m) != m or m < 0 or m > n - q + 1:
            raise ValueError(
                f"rho(m, q, n) needs 0 <= m <= n-q+1, got m={m}, q={q}, n={n}"
            )
        m = int(m)
        if m == 0:
            return self.log_rho0(q, n)
        if self.params.zeta == 0.0:
            return -math.inf
        self.ensure(n)
        lr0 = self.log_rho0_table[q : q + m, n]
        return float(logsumexp(_rho_coeffs(m, self.params.zeta) + lr0))


    def log_rho_matrix(self, n: int, m_max: int, q_max: int) -> np.ndarray:
        """Array [m, q] of log rho(m, q, n) for 0 <= m <= m_max, 1 <= q <= q_max.

        Entries outside the index constraint m <= n-q+1 are set to nan.
        """
        self.ensure(n)
        lr0 = np.full(n + m_max + q_max + 2, np.nan)
        lr0[1 : n + 1] = self.log_rho0_table[1 : n + 1, n]
        out = np.full((m_max + 1, q_max + 1), np.nan)
        q = np.arange(1, q_max + 1)
        out[0, 1:] = lr0[q]
        if self.params.zeta > 0:
            for m in range(1, m_max + 1):
                i = np.arange(1, m + 1)
                terms = _rho_coeffs(m, self.params.zeta)[None, :] + lr0[q[:, None] + i[None, :] - 1]
                with np.errstate(invalid="ignore"):
                    out[m, 1:] = logsumexp(terms, axis=1)
        else:
            out[1:, 1:] = -np.inf
        m = np.arange(m_max + 1)
        bad = m[:, None] > n - np.arange(q_max + 1)[None, :] + 1
        bad[:, 0] = True
        out[bad] = np.nan
        return out


_RHO_CACHE: dict = {}
_RHO_LOCK = threading.Lock()


def _cached_rho(params: NigParams) -> RhoTable:
    key = (params.beta, params.zeta)
    with _RHO_LOCK:
        tab = _RHO_CACHE.get(key)
        if tab is None:
            if len(_RHO_CACHE) > 64:
                _RHO_CACHE.clear()
            tab = _RHO_CACHE[key] = RhoTable(params)
    return tab


def log_rho(m: int, q: int, n: int, params: NigParams) -> float:
    """log rho(m, q, n); m = 0 gives log rho0(q, n)."""
    return _cached_rho(params).log_rho(m, q, n)


def rho(m: int, q: int, n: int, params: NigParams) -> float:
    """rho(m, q, n) = sum_i (2 zeta)^i Gamma(2m-i)/(Gamma(m+1-i) Gamma(i)) rho0(q+i-1, n)."""
    return math.exp(log_rho(m, q, n, params))


# ---------------------------------------------------------------------------
# generic model instance
# ---------------------------------------------------------------------------

def nig_model(params: NigParams) -> HnrmiModel:
    """The N-IG model as a generic :class:`HnrmiModel`.

    psi(u) = sqrt(tau+u) - sqrt(tau),
    tau_q(u) = (tau+u)^{1/2-q} Gamma(q-1/2) / (2 sqrt(pi)),
    xi_{n,i}(u) = (tau+u)^{i/2-n} C(n, i; 1/2).
    """
    t = params.tau
    st = math.sqrt(t)
    l2sp = math.log(2 * math.sqrt(math.pi))

    def psi(u):
        return u / (np.sqrt(t + u) + st)

    def log_tau(q, u):
        return (0.5 - q) * np.log(t + u) + gammaln(q - 0.5) - l2sp

    def log_xi(n, i, u):
        lC = gen_fact_table(max(n, 1), 0.5).log_coeff(n, i)
        return (0.5 * i - n) * np.log(t + u) + lC

    return HnrmiModel(
        c=params.c, zeta=params.zeta, psi=psi, label=f"nig(c={params.c:g},tau={t:g})",
        log_tau=log_tau, log_xi=log_xi,
    )


# ---------------------------------------------------------------------------
# EPPF and predictive
# ---------------------------------------------------------------------------

def _log_split_nig(state: ClusterState, params: NigParams) -> np.ndarray:
    z, beta = params.zeta, params.beta
    f = np.asarray(state.freqs)
    k, n = f.size, int(f.sum())
    tab = _cached_rho(params).ensure(n)
    lg = gammaln(f - 0.5)
    l1z = math.log1p(-z)
    lead = beta + (k - 1) * l1z - (k - 1) * math.log(2) - 0.5 * k * math.log(math.pi) - gammaln(n) + lg.sum()
    out = np.full(k + 1, -np.inf)
    out[0] = lead + l1z + tab.log_rho0(k, n)
    if z > 0:
        for l, nl in enumerate(f.tolist()):
            out[l + 1] = (lead + 0.5 * math.log(math.pi) + (1 - 2 * nl) * math.log(2)
                          - lg[l] + tab.log_rho(nl, k, n))
    return out


def nig_log_eppf(state: ClusterState, params: NigParams) -> float:
    return float(logsumexp(_log_split_nig(state, params)))


def nig_eppf(state: ClusterState, params: NigParams) -> float:
    """Symmetric EPPF of the N-IG spike-and-slab model.

    e^beta (1-zeta)^{k-1} / (2^{k-1} pi^{k/2} Gamma(n)) prod_m Gamma(n_m - 1/2)
    [(1-zeta) rho0(k, n) + sqrt(pi) sum_l 2^{1-2n_l} rho(n_l, k, n) / Gamma(n_l - 1/2)].
    """
    return math.exp(nig_log_eppf(state, params))


def nig_eppf_split(state: ClusterState, params: NigParams) -> float:
    v = _log_split_nig(state, params)
    j = 0 if state.spike_index is None else state.spike_index
    return math.exp(v[j])


def nig_predictive(state: ClusterState, params: NigParams) -> PredictiveWeights:
    """One-step predictive weights of the N-IG model."""
    z = params.zeta
    f = np.asarray(state.freqs, dtype=float)
    n, k = state.n, state.k
    tab = _cached_rho(params).ensure(n + 1)
    if state.spike_index is None:
        d = tab.log_rho0(k, n)
        w_new = math.exp(tab.log_rho0(k + 1, n + 1) - d) / (2 * n)
        w_ex = (f - 0.5) * math.exp(tab.log_rho0(k, n + 1) - d) / n
        return PredictiveWeights(w_new, 0.0, w_ex, "no-spike-cluster")
    if z == 0.0:
        raise ValueError("a spike cluster has probability zero when zeta = 0")
    j = state.spike_index - 1
    nj = state.freqs[j]
    d = tab.log_rho(nj, k, n)
    w_new = (1 - z) * math.exp(tab.log_rho(nj, k + 1, n + 1) - d) / (2 * n)
    w_spike = math.exp(tab.log_rho(nj + 1, k, n + 1) - d) / (4 * n)
    w_ex = (f - 0.5) * math.exp(tab.log_rho(nj, k, n + 1) - d) / n
    w_ex[j] = 0.0
    return PredictiveWeights(w_new, w_spike, w_ex, "spike-cluster")


# ---------------------------------------------------------------------------
# N_0 and K_n laws
# ---------------------------------------------------------------------------

def nig_kn_n0_joint(n: int, params: NigParams) -> np.ndarray:
    """Joint law of (K_n, N_0^{(n)}) indexed [k, j].

    (k, 0): 2 e^beta (1-zeta)^k C(n, k; 1/2) rho0(k, n) / Gamma(n);
    (k, j): 2^{1-2j} e^beta binom(n, j) (1-zeta)^{k-1} C(n-j, k-1; 1/2)
            rho(j, k, n) / Gamma(n).
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    z, beta = params.zeta, params.beta
    tab = _cached_rho(params).ensure(n)
    lC = gen_fact_table(n, 0.5).log_table
    l1z = math.log1p(-z)
    lead = beta - gammaln(n)
    out = np.zeros((n + 1, n + 1))
    for k in range(1, n + 1):
        out[k, 0] = math.exp(lead + math.log(2) + k * l1z + lC[n, k] + tab.log_rho0(k, n))
    if z > 0:
        for j in range(1, n + 1):
            for k in range(1, n - j + 2):
                lv = (lead + (1 - 2 * j) * math.log(2) + log_binom(n, j)
                      + (k - 1) * l1z + lC[n - j, k - 1] + tab.log_rho(j, k, n))
                out[k, j] = math.exp(lv)
    return out


def nig_n0_distribution(n: int, params: NigParams) -> ProbTable:
    return ProbTable(0, nig_kn_n0_joint(n, params).sum(axis=0))


def nig_kn_distribution(n: int, params: NigParams) -> ProbTable:
    return ProbTable(1, nig_kn_n0_joint(n, params).sum(axis=1)[1:])
