"""Generic engine for spike-and-slab hNRMI models.

A model is described by its total mass ``c``, spike weight ``zeta``, Laplace
exponent ``psi`` and moment kernels ``tau_q``; everything else (EPPF,
predictive weights, laws of the number of clusters and of the spike count) is
obtained from one-dimensional integrals of the form

    int_0^inf u^{n-1} exp(-c psi(u)) * (products of tau and xi terms) du

which are evaluated with :mod:`spikeslab.quadrature`.  All integrands are
assembled in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .quadrature import log_integrate
from .special import log_binom, logsumexp

__all__ = [
    "HnrmiModel",
    "ClusterState",
    "PredictiveWeights",
    "ProbTable",
    "eppf",
    "log_eppf",
    "eppf_split",
    "predictive",
    "n0_distribution",
    "kn_distribution",
    "kn_n0_joint",
    "variance_gap_constant",
    "log_xi_bell",
    "GENERIC_N_MAX",
]

GENERIC_N_MAX = 60
DEFAULT_TOL = 1e-12


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterState:
    """Cluster frequencies of an observed sample.

    ``spike_index`` is the 1-based position in ``freqs`` of the cluster
    sitting at the spike location, or ``None`` when no observation equals it.
    """

    freqs: tuple
    spike_index: Optional[int] = None

    def __post_init__(self):
        freqs = tuple(int(f) for f in self.freqs)
        if len(freqs) == 0:
            raise ValueError("freqs must contain at least one cluster")
        if any(f < 1 for f in freqs):
            raise ValueError(f"all frequencies must be >= 1, got {freqs}")
        object.__setattr__(self, "freqs", freqs)
        j = self.spike_index
        if j is not None:
            if int(j) != j or not 1 <= int(j) <= len(freqs):
                raise ValueError(
                    f"spike_index must be in [1, {len(freqs)}], got {j!r}"
                )
            object.__setattr__(self, "spike_index", int(j))

    @property
    def n(self) -> int:
        return sum(self.freqs)

    @property
    def k(self) -> int:
        return len(self.freqs)

    @property
    def spike_size(self) -> int:
        """Number of observations at the spike (0 when absent)."""
        return 0 if self.spike_index is None else self.freqs[self.spike_index - 1]


@dataclass(frozen=True)
class PredictiveWeights:
    """Mixture weights of the one-step predictive distribution.

    ``w_new`` multiplies P0 when no cluster sits at the spike and the diffuse
    P* otherwise; ``w_spike`` is the extra mass on the spike location in the
    latter case; ``w_existing`` is aligned with ``ClusterState.freqs`` (the
    spike cluster's own entry is 0, its mass is ``w_spike``).
    """

    w_new: float
    w_spike: float
    w_existing: np.ndarray
    case_tag: str

    def total(self) -> float:
        return self.w_new + self.w_spike + float(np.sum(self.w_existing))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.w_new, self.w_spike], self.w_existing])


@dataclass(frozen=True)
class ProbTable:
    """Probability vector on {offset, offset+1, ...}."""

    support_offset: int
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probs must be a non-empty vector")
        if np.any(p < -1e-12):
            raise ValueError("probabilities must be non-negative")
        object.__setattr__(self, "probs", p)

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.support_offset, self.support_offset + self.probs.size)

    def __len__(self) -> int:
        return self.probs.size

    def __getitem__(self, value: int) -> float:
        idx = value - self.support_offset
        if 0 <= idx < self.probs.size:
            return float(self.probs[idx])
        return 0.0

    def mean(self) -> float:
        return float(self.support @ self.probs)

    def var(self) -> float:
        x = self.support
        mu = self.mean()
        return float(((x - mu) ** 2) @ self.probs)

    def tv(self, other) -> float:
        """Total variation distance to another table or a vector aligned with
        this table's support."""
        q = other.probs if isinstance(other, ProbTable) else np.asarray(other, float)
        if isinstance(other, ProbTable) and other.support_offset != self.support_offset:
            raise ValueError("tables have different support offsets")
        size = max(q.size, self.probs.size)
        a = np.zeros(size)
        b = np.zeros(size)
        a[: self.probs.size] = self.probs
        b[: q.size] = q
        return 0.5 * float(np.abs(a - b).sum())


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

def log_xi_bell(log_tau: Callable, n_max: int, u: np.ndarray) -> np.ndarray:
    """log xi_{n,i}(u) for 0 <= i <= n <= n_max from the moment kernels.

    xi_{n,i} is the partial Bell polynomial B_{n,i}(tau_1, tau_2, ...), i.e.
    the composition sum (1/i!) sum binom(n; q_1..q_i) prod tau_{q_r}.  It is
    evaluated as n!/i! [t^n] A(t)^i with A(t) = sum_q u^q tau_q t^q / q!.  The
    factor u^q keeps every coefficient of moderate size (xi_{n,i} scales like
    u^{-n}), and each power of A is renormalized per abscissa.

    Returns an array of shape (n_max+1, n_max+1, len(u)) indexed [n, i].
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    U = u.size
    N = int(n_max)
    lu = np.log(u)
    out = np.full((N + 1, N + 1, U), -np.inf)
    out[0, 0] = 0.0
    if N == 0:
        return out
    q = np.arange(1, N + 1)
    la = np.stack([log_tau(int(qq), u) for qq in q]) + q[:, None] * lu - gammaln(q + 1)[:, None]
    amax = la.max(axis=0)
    a = np.exp(la - amax)  # (N, U), a[q-1] ~ coefficient of t^q
    # Toeplitz operator T[u, m, j] = a_{m-j} for m-j >= 1 (indices 0..N)
    T = np.zeros((U, N + 1, N + 1))
    for d in range(1, N + 1):
        idx = np.arange(d, N + 1)
        T[:, idx, idx - d] = a[d - 1][:, None]
    P = np.zeros((U, N + 1))
    P[:, 0] = 1.0
    logscale = np.zeros(U)
    m = np.arange(N + 1)
    for i in range(1, N + 1):
        P = np.matmul(T, P[:, :, None])[:, :, 0]
        logscale = logscale + amax
        pm = P.max(axis=1)
        pm = np.where(pm > 0, pm, 1.0)
        P = P / pm[:, None]
        logscale = logscale + np.log(pm)
        with np.errstate(divide="ignore"):
            lp = np.log(P).T  # (N+1, U)
        out[:, i, :] = (
            lp + logscale[None, :] + gammaln(m + 1)[:, None]
            - gammaln(i + 1) - m[:, None] * lu[None, :]
        )
        out[:i, i, :] = -np.inf
    return out


@dataclass(frozen=True)
class HnrmiModel:
    """Spike-and-slab hNRMI described through its Laplace exponent.

    ``psi(u)`` and the kernels take numpy arrays.  Either ``tau(q, u)`` or
    ``log_tau(q, u)`` must be given; ``xi``/``log_xi`` are optional and default
    to the partial Bell polynomial built from the kernels.
    """

    c: float
    zeta: float
    psi: Callable
    tau: Optional[Callable] = None
    xi: Optional[Callable] = None
    label: str = "generic"
    log_tau: Optional[Callable] = None
    log_xi: Optional[Callable] = None

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not 0.0 <= self.zeta < 1.0:
            raise ValueError(f"zeta must lie in [0, 1), got {self.zeta}")
        if self.tau is None and self.log_tau is None:
            raise ValueError("a moment kernel tau or log_tau is required")

    def ltau(self, q: int, u: np.ndarray) -> np.ndarray:
        if self.log_tau is not None:
            return np.asarray(self.log_tau(q, u), dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(self.tau(q, u), dtype=float))

    def lxi_table(self, n_max: int, u: np.ndarray) -> np.ndarray:
        """log xi_{n,i}(u) as an array [n, i, u] for n, i <= n_max."""
        if self.log_xi is None and self.xi is None:
            return log_xi_bell(self.ltau, n_max, u)
        out = np.full((n_max + 1, n_max + 1, np.size(u)), -np.inf)
        out[0, 0] = 0.0
        for nn in range(1, n_max + 1):
            for i in range(1, nn + 1):
                if self.log_xi is not None:
                    out[nn, i] = self.log_xi(nn, i, u)
                else:
                    with np.errstate(divide="ignore"):
                        out[nn, i] = np.log(self.xi(nn, i, u))
        return out

    def lbase(self, n: int, u: np.ndarray) -> np.ndarray:
        """log of u^{n-1} exp(-c psi(u))."""
        return (n - 1) * np.log(u) - self.c * np.asarray(self.psi(u), dtype=float)

    @property
    def log_czeta(self) -> float:
        return math.log(self.c * self.zeta) if self.zeta > 0 else -math.inf

    @property
    def log_c1z(self) -> float:
        return math.log(self.c * (1.0 - self.zeta))


def _log_spike(model: HnrmiModel, lxi: np.ndarray, nj: int) -> np.ndarray:
    """log sum_i (c zeta)^i xi_{nj,i}(u) from a precomputed xi table."""
    i = np.arange(1, nj + 1)
    return logsumexp(i[:, None] * model.log_czeta + lxi[nj, 1 : nj + 1], axis=0)


def _require_spike_possible(model: HnrmiModel, state: ClusterState):
    if state.spike_index is not None and model.zeta == 0.0:
        raise ValueError("a spike cluster has probability zero when zeta = 0")


# ---------------------------------------------------------------------------
# EPPF
# ---------------------------------------------------------------------------

def _log_split_all(model: HnrmiModel, freqs: Sequence[int], tol: float) -> np.ndarray:
    """[log Pi_{k,0}, log Pi_{k,1}, ..., log Pi_{k,k}] for the given frequencies."""
    f = np.asarray(freqs, dtype=int)
    k = f.size
    n = int(f.sum())
    uniq = sorted(set(f.tolist()))
    spike_on = model.zeta > 0

    def logf(u):
        base = model.lbase(n, u)
        lt = {q: model.ltau(q, u) for q in uniq}
        S = sum(lt[q] for q in f.tolist())
        rows = [base + S]
        if spike_on:
            lxi = model.lxi_table(int(f.max()), u)
            sp = {q: _log_spike(model, lxi, q) for q in uniq}
            for q in f.tolist():
                rows.append(base + S - lt[q] + sp[q])
        return np.stack(rows)

    vals = log_integrate(logf, tol=tol)
    pre0 = k * model.log_c1z - gammaln(n)
    prej = (k - 1) * model.log_c1z - gammaln(n)
    out = np.full(k + 1, -np.inf)
    out[0] = vals[0] + pre0
    if spike_on:
        out[1:] = vals[1:] + prej
    return out


def log_eppf(model: HnrmiModel, state: ClusterState, tol: float = DEFAULT_TOL) -> float:
    """log of the symmetric EPPF (marginal over the spike assignment)."""
    return float(logsumexp(_log_split_all(model, state.freqs, tol)))


def eppf(model: HnrmiModel, state: ClusterState, tol: float = DEFAULT_TOL) -> float:
    """Symmetric EPPF Pi_k(n_1, ..., n_k; zeta).

    The spike assignment of ``state`` is ignored: the value is the probability
    of the partition whatever cluster, if any, sits at the spike.
    """
    return math.exp(log_eppf(model, state, tol))


def eppf_split(model: HnrmiModel, state: ClusterState, tol: float = DEFAULT_TOL) -> float:
    """Probability Pi_{k,j} of the partition with cluster j pinned at the spike.

    j is ``state.spike_index``; without one, the probability that no cluster
    sits at the spike.  Summing over j = 0..k gives :func:`eppf`.
    """
    if state.spike_index is not None and model.zeta == 0.0:
        return 0.0
    vals = _log_split_all(model, state.freqs, tol)
    j = 0 if state.spike_index is None else state.spike_index
    return math.exp(vals[j])


# ---------------------------------------------------------------------------
# predictive
# ---------------------------------------------------------------------------

def predictive(model: HnrmiModel, state: ClusterState, tol: float = DEFAULT_TOL) -> PredictiveWeights:
    """Weights of the predictive law of X_{n+1} given the clustered sample."""
    _require_spike_possible(model, state)
    f = list(state.freqs)
    k = len(f)
    n = state.n
    log_n = math.log(n)
    jj = None if state.spike_index is None else state.spike_index - 1
    need = sorted(set(f) | {q + 1 for q in f} | {1})

    def logf(u):
        base_n = model.lbase(n, u)
        base_n1 = model.lbase(n + 1, u)
        lt = {q: model.ltau(q, u) for q in need}
        S = sum(lt[q] for q in f)
        if jj is None:
            rows = [base_n + S, base_n1 + S + lt[1]]
            for l in range(k):
                rows.append(base_n1 + S - lt[f[l]] + lt[f[l] + 1])
            return np.stack(rows)
        nj = f[jj]
        lxi = model.lxi_table(nj + 1, u)
        sp = _log_spike(model, lxi, nj)
        sp1 = _log_spike(model, lxi, nj + 1)
        R = S - lt[nj]
        rows = [base_n + R + sp, base_n1 + R + lt[1] + sp, base_n1 + R + sp1]
        for l in range(k):
            if l == jj:
                continue
            rows.append(base_n1 + R - lt[f[l]] + lt[f[l] + 1] + sp)
        return np.stack(rows)

    v = log_integrate(logf, tol=tol)
    if jj is None:
        w_new = math.exp(math.log(model.c) - log_n + v[1] - v[0])
        w_ex = np.exp(-log_n + v[2:] - v[0])
        return PredictiveWeights(w_new, 0.0, w_ex, "no-spike-cluster")
    w_new = math.exp(model.log_c1z - log_n + v[1] - v[0])
    w_spike = math.exp(-log_n + v[2] - v[0])
    rest = np.exp(-log_n + v[3:] - v[0])
    w_ex = np.insert(rest, jj, 0.0)
    return PredictiveWeights(w_new, w_spike, w_ex, "spike-cluster")


# ---------------------------------------------------------------------------
# laws of K_n and N_0
# ---------------------------------------------------------------------------

def _check_n(n: int) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if n > GENERIC_N_MAX:
        raise ValueError(
            f"the generic engine supports n <= {GENERIC_N_MAX}; use a closed-form model"
        )
    return n


def kn_n0_joint(model: HnrmiModel, n: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Joint law of (K_n, N_0^{(n)}) as an (n+1) x (n+1) array indexed [k, j].

    Entry (k, 0) = c^k (1-zeta)^k / Gamma(n) int u^{n-1} e^{-c psi} xi_{n,k} du and,
    for j >= 1, entry (k, j) = binom(n, j) c^{k-1} (1-zeta)^{k-1} / Gamma(n)
    int u^{n-1} e^{-c psi} [sum_i (c zeta)^i xi_{j,i}] xi_{n-j,k-1} du.
    The binomial factor counts which j of the n observations sit at the spike.
    """
    n = _check_n(n)
    spike_on = model.zeta > 0
    index = [(k, 0) for k in range(1, n + 1)]
    if spike_on:
        index += [(k, j) for j in range(1, n + 1) for k in range(1, n - j + 2)]

    def logf(u):
        base = model.lbase(n, u)
        lxi = model.lxi_table(n, u)
        rows = [base + lxi[n, k] for k in range(1, n + 1)]
        if spike_on:
            for j in range(1, n + 1):
                sp = _log_spike(model, lxi, j)
                for k in range(1, n - j + 2):
                    rows.append(base + sp + lxi[n - j, k - 1])
        return np.stack(rows)

    v = log_integrate(logf, tol=tol)
    out = np.zeros((n + 1, n + 1))
    lg = gammaln(n)
    for (k, j), lv in zip(index, v):
        if j == 0:
            pre = k * model.log_c1z - lg
        else:
            pre = log_binom(n, j) + (k - 1) * model.log_c1z - lg
        out[k, j] = math.exp(lv + pre)
    return out


def n0_distribution(model: HnrmiModel, n: int, tol: float = DEFAULT_TOL) -> ProbTable:
    """Law of the number of observations at the spike among n draws."""
    return ProbTable(0, kn_n0_joint(model, n, tol).sum(axis=0))


def kn_distribution(model: HnrmiModel, n: int, tol: float = DEFAULT_TOL) -> ProbTable:
    """Law of the number K_n of distinct values among n draws."""
    return ProbTable(1, kn_n0_joint(model, n, tol).sum(axis=1)[1:])


def variance_gap_constant(model: HnrmiModel, tol: float = DEFAULT_TOL) -> float:
    """p = c int_0^inf u e^{-c psi(u)} tau_2(u) du, the probability that two
    draws from the diffuse-base model coincide."""
    lv = log_integrate(lambda u: model.lbase(2, u) + model.ltau(2, u), tol=tol)
    return math.exp(math.log(model.c) + lv)
