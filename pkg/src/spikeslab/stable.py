"""Closed forms for the sigma-stable spike-and-slab model (c = 1).

Everything reduces to generalized factorial coefficients and the numbers

    phi_{m,q} = sum_{i=1}^m zeta^i Gamma(q+i-1) C(m, i; sigma),

which satisfy phi_{1,q} = zeta sigma Gamma(q) and the triangular identity
phi_{m,q} (m + (q-1) sigma) = phi_{m+1,q} + (1-zeta) sigma phi_{m,q+1}.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .core import ClusterState, HnrmiModel, PredictiveWeights, ProbTable
from .special import gen_fact_table, log_binom, log_rising, logsumexp

__all__ = [
    "StableParams",
    "PhiTable",
    "phi",
    "log_phi",
    "phi_table",
    "stable_model",
    "stable_eppf",
    "stable_log_eppf",
    "stable_eppf_split",
    "stable_predictive",
    "stable_kn_n0_joint",
    "stable_n0_distribution",
    "stable_kn_distribution",
]


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    return rng.standard_normal(size)


@dataclass(frozen=True)
class StableParams:
    sigma: float
    zeta: float = 0.0
    x0: float = 0.0
    base_sampler: Callable = field(default=standard_normal, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        if not 0.0 <= self.zeta < 1.0:
            raise ValueError(f"zeta must lie in [0, 1), got {self.zeta}")
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "zeta", float(self.zeta))

    @property
    def c(self) -> float:
        return 1.0

    @property
    def alpha(self) -> float:
        """Discount applied to existing cluster sizes in the urn."""
        return self.sigma


# ---------------------------------------------------------------------------
# phi numbers
# ---------------------------------------------------------------------------

def _log_phi_block(sigma, zeta, m_max, q_max, lC) -> np.ndarray:
    """Direct log-sum evaluation of log phi_{m,q}, 1 <= m <= m_max, 1 <= q <= q_max.

    All summands are positive, so the log-sum-exp is accurate to rounding
    for any (m, q).  Entry [0, :] and [:, 0] are unused (-inf).
    """
    out = np.full((m_max + 1, q_max + 1), -np.inf)
    if zeta == 0.0:
        return out
    lz = math.log(zeta)
    i = np.arange(1, m_max + 1)
    q = np.arange(1, q_max + 1)
    # terms[m, q, i] = i log zeta + lgamma(q+i-1) + log C(m, i)
    lg = gammaln(q[:, None] + i[None, :] - 1)  # (Q, I)
    for m in range(1, m_max + 1):
        t = i[:m] * lz + lg[:, :m] + lC[m, 1 : m + 1][None, :]
        out[m, 1:] = logsumexp(t, axis=1)
    return out


@dataclass
class PhiTable:
    """Table of phi_{m,q}(zeta), 1 <= m <= m_max, 1 <= q <= q_max, in logs.

    The table grows on demand through :meth:`ensure`; growth is guarded by a
    lock so a table may be shared between threads.
    """

    sigma: float
    zeta: float
    log_values: np.ndarray = field(default_factory=lambda: np.full((1, 1), -np.inf), repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def m_max(self) -> int:
        return self.log_values.shape[0] - 1

    @property
    def q_max(self) -> int:
        return self.log_values.shape[1] - 1

    @property
    def values(self) -> np.ndarray:
        """phi_{m,q} in linear scale (index 0 rows/columns are zero)."""
        return np.exp(self.log_values)

    def ensure(self, m_max: int, q_max: int) -> "PhiTable":
        if m_max <= self.m_max and q_max <= self.q_max:
            return self
        with self._lock:
            M = max(m_max, self.m_max, 1)
            Q = max(q_max, self.q_max, 1)
            if M > self.m_max or Q > self.q_max:
                # grow geometrically to amortize sequential queries
                M = max(M, min(2 * self.m_max, M + 64))
                Q = max(Q, min(2 * self.q_max, Q + 64))
                lC = gen_fact_table(M, self.sigma).log_table
                self.log_values = _log_phi_block(self.sigma, self.zeta, M, Q, lC)
        return self

    def log_phi(self, m: int, q: int) -> float:
        if m < 1 or q < 1:
            raise ValueError(f"phi needs m >= 1 and q >= 1, got m={m}, q={q}")
        self.ensure(m, q)
        return float(self.log_values[m, q])

    def phi(self, m: int, q: int) -> float:
        return math.exp(self.log_phi(m, q))


_PHI_CACHE: dict = {}
_PHI_LOCK = threading.Lock()


def _cached_phi(params: StableParams) -> PhiTable:
    key = (params.sigma, params.zeta)
    with _PHI_LOCK:
        tab = _PHI_CACHE.get(key)
        if tab is None:
            if len(_PHI_CACHE) > 128:
                _PHI_CACHE.clear()
            tab = _PHI_CACHE[key] = PhiTable(params.sigma, params.zeta)
    return tab


def log_phi(m: int, q: int, params: StableParams) -> float:
    """log phi_{m,q}(zeta); -inf when zeta = 0."""
    return _cached_phi(params).log_phi(int(m), int(q))


def phi(m: int, q: int, params: StableParams) -> float:
    """phi_{m,q}(zeta) = sum_{i=1}^m zeta^i Gamma(q+i-1) C(m, i; sigma)."""
    return math.exp(log_phi(m, q, params))


def phi_table(m_max: int, q_max: int, params: StableParams, method: str = "direct") -> PhiTable:
    """Fresh :class:`PhiTable` for 1 <= m <= m_max, 1 <= q <= q_max.

    ``method="direct"`` evaluates every entry as a positive log-sum.
    ``method="recursion"`` seeds the first row with zeta sigma Gamma(q) and
    fills the next rows through phi_{m+1,q} = (m+(q-1)sigma) phi_{m,q} -
    (1-zeta) sigma phi_{m,q+1}.  That subtraction cancels badly unless zeta is
    close to 1 (relative errors grow to 1e2 or worse by m = 30 for zeta = 0.1),
    so the recursion is offered for comparison only.
    """
    if m_max < 1 or q_max < 1:
        raise ValueError("m_max and q_max must be >= 1")
    if method == "direct":
        lC = gen_fact_table(m_max, params.sigma).log_table
        return PhiTable(params.sigma, params.zeta,
                        _log_phi_block(params.sigma, params.zeta, m_max, q_max, lC))
    if method != "recursion":
        raise ValueError(f"unknown method {method!r}")
    s, z = params.sigma, params.zeta
    width = q_max + m_max
    if width > 170:
        raise ValueError("recursion works in linear scale; need q_max + m_max <= 170")
    vals = np.zeros((m_max + 1, width + 1))
    q = np.arange(1, width + 1)
    vals[1, 1:] = z * s * np.exp(gammaln(q))
    for m in range(1, m_max):
        qq = np.arange(1, width - m + 1)
        vals[m + 1, qq] = (m + (qq - 1) * s) * vals[m, qq] - (1 - z) * s * vals[m, qq + 1]
    with np.errstate(divide="ignore"):
        logv = np.log(np.abs(vals[:, : q_max + 1]))
    logv[0, :] = -np.inf
    logv[:, 0] = -np.inf
    return PhiTable(s, z, logv)


# ---------------------------------------------------------------------------
# generic model instance
# ---------------------------------------------------------------------------

def stable_model(params: StableParams) -> HnrmiModel:
    """The sigma-stable model as a generic :class:`HnrmiModel`.

    psi(u) = u^sigma, tau_q(u) = sigma (1-sigma)_{q-1} u^{sigma-q} and
    xi_{n,i}(u) = u^{sigma i - n} C(n, i; sigma).
    """
    s = params.sigma
    ls = math.log(s)

    def psi(u):
        return np.power(u, s)

    def log_tau(q, u):
        return ls + log_rising(1.0 - s, q - 1) + (s - q) * np.log(u)

    def log_xi(n, i, u):
        lC = gen_fact_table(max(n, 1), s).log_coeff(n, i)
        return (s * i - n) * np.log(u) + lC

    return HnrmiModel(
        c=1.0, zeta=params.zeta, psi=psi, label=f"stable(sigma={s:g})",
        log_tau=log_tau, log_xi=log_xi,
    )


# ---------------------------------------------------------------------------
# EPPF and predictive
# ---------------------------------------------------------------------------

def _log_split_stable(state: ClusterState, params: StableParams) -> np.ndarray:
    s, z = params.sigma, params.zeta
    f = np.asarray(state.freqs)
    k, n = f.size, int(f.sum())
    lr = log_rising(1.0 - s, f - 1)  # log (1-sigma)_{n_m - 1}
    lr = np.atleast_1d(lr)
    out = np.full(k + 1, -np.inf)
    l1z = math.log1p(-z)
    out[0] = (k - 1) * math.log(s) + k * l1z + gammaln(k) + lr.sum() - gammaln(n)
    if z > 0:
        tab = _cached_phi(params).ensure(int(f.max()), k)
        lphi = tab.log_values[f, k]
        out[1:] = (k - 2) * math.log(s) + (k - 1) * l1z + lr.sum() - lr + lphi - gammaln(n)
    return out


def stable_log_eppf(state: ClusterState, params: StableParams) -> float:
    return float(logsumexp(_log_split_stable(state, params)))


def stable_eppf(state: ClusterState, params: StableParams) -> float:
    """Symmetric EPPF of the sigma-stable spike-and-slab model.

    sigma^{k-2} (1-zeta)^{k-1} / Gamma(n) prod_m (1-sigma)_{n_m-1}
    [sigma (1-zeta) Gamma(k) + sum_l phi_{n_l,k} / (1-sigma)_{n_l-1}].
    """
    return math.exp(stable_log_eppf(state, params))


def stable_eppf_split(state: ClusterState, params: StableParams) -> float:
    """Spike-pinned EPPF Pi_{k,j}; j = ``state.spike_index`` or 0."""
    v = _log_split_stable(state, params)
    j = 0 if state.spike_index is None else state.spike_index
    return math.exp(v[j])


def stable_predictive(state: ClusterState, params: StableParams) -> PredictiveWeights:
    """One-step predictive weights.

    Without a spike cluster: k sigma / n on P0 and (n_l - sigma)/n on cluster l.
    With the spike at cluster j: (1-zeta) sigma phi_{nj,k+1} / (n phi_{nj,k}) on
    P*, phi_{nj+1,k} / (n phi_{nj,k}) on the spike, (n_l - sigma)/n elsewhere.
    """
    s, z = params.sigma, params.zeta
    f = np.asarray(state.freqs, dtype=float)
    n, k = state.n, state.k
    w_ex = (f - s) / n
    if state.spike_index is None:
        return PredictiveWeights(k * s / n, 0.0, w_ex, "no-spike-cluster")
    if z == 0.0:
        raise ValueError("a spike cluster has probability zero when zeta = 0")
    j = state.spike_index - 1
    nj = state.freqs[j]
    tab = _cached_phi(params).ensure(nj + 1, k + 1)
    lv = tab.log_values
    w_new = (1 - z) * s * math.exp(lv[nj, k + 1] - lv[nj, k]) / n
    w_spike = math.exp(lv[nj + 1, k] - lv[nj, k]) / n
    w_ex = w_ex.copy()
    w_ex[j] = 0.0
    return PredictiveWeights(w_new, w_spike, w_ex, "spike-cluster")


# ---------------------------------------------------------------------------
# N_0 and K_n laws
# ---------------------------------------------------------------------------

def stable_kn_n0_joint(n: int, params: StableParams) -> np.ndarray:
    """Joint law of (K_n, N_0^{(n)}) as an array indexed [k, j].

    (k, 0): (1-zeta)^k Gamma(k) C(n, k; sigma) / (sigma Gamma(n));
    (k, j): binom(n, j) (1-zeta)^{k-1} C(n-j, k-1; sigma) phi_{j,k} / (sigma Gamma(n)).
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    s, z = params.sigma, params.zeta
    lC = gen_fact_table(n, s).log_table
    l1z = math.log1p(-z)
    lead = -math.log(s) - gammaln(n)
    k = np.arange(1, n + 1)
    out = np.zeros((n + 1, n + 1))
    out[1:, 0] = np.exp(lead + k * l1z + gammaln(k) + lC[n, 1 : n + 1])
    if z > 0:
        lphi = _cached_phi(params).ensure(n, n + 1).log_values
        for j in range(1, n + 1):
            kk = np.arange(1, n - j + 2)
            lv = (lead + log_binom(n, j) + (kk - 1) * l1z
                  + lC[n - j, kk - 1] + lphi[j, kk])
            out[kk, j] = np.exp(lv)
    return out


def stable_n0_distribution(n: int, params: StableParams) -> ProbTable:
    """Law of the number of draws at the spike among n prior draws."""
    return ProbTable(0, stable_kn_n0_joint(n, params).sum(axis=0))


def stable_kn_distribution(n: int, params: StableParams) -> ProbTable:
    return ProbTable(1, stable_kn_n0_joint(n, params).sum(axis=1)[1:])
