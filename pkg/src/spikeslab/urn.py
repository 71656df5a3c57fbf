"""Urn transition rates of the closed-form models and an exact forward chain.

For the sigma-stable and N-IG models the predictive weights depend on the
sample only through the sample size n, the number of clusters k (spike
cluster included) and the spike count nj (0 when no observation sits at the
spike).  An existing slab cluster of size n_l receives a_ex * (n_l - alpha),
so the total mass on slab clusters is a_ex * (n - nj - k_slab * alpha).

This makes (k_slab, nj) a Markov chain in the number of draws, which gives the
exact law of the spike count after any number of urn steps (prior or
posterior) by a small forward recursion.
"""

from __future__ import annotations

import math
from typing import Union

import numpy as np

from .core import ProbTable
from .nig import NigParams, _cached_rho
from .stable import StableParams, _cached_phi
from .special import gen_fact_table

__all__ = ["StableUrn", "NigUrn", "make_urn", "chain_n0_distribution"]

KIND_STABLE = 0
KIND_TABLE = 1

_FULL_PHI_LIMIT = 400


class StableUrn:
    """Rates of the sigma-stable urn.

    Case without spike cluster: w_new = k sigma / n, a_ex = 1/n.  With a spike
    cluster of size nj: w_new = (1-zeta) sigma phi_{nj,k+1} / (n phi_{nj,k}),
    w_spike = phi_{nj+1,k} / (n phi_{nj,k}), a_ex = 1/n.
    """

    kind = KIND_STABLE

    def __init__(self, params: StableParams):
        self.params = params
        self.alpha = params.sigma
        self.zeta = params.zeta
        self._n_max = 0
        self._lphi = np.full((1, 1), np.nan)
        self._logC = np.full((1, 1), -np.inf)

    def prepare(self, n_max: int) -> "StableUrn":
        """Make rates available for every state with n < n_max."""
        if n_max <= self._n_max:
            return self
        size = n_max + 2
        self._logC = np.array(gen_fact_table(size, self.params.sigma).log_table)
        if n_max <= _FULL_PHI_LIMIT:
            self._lphi = np.array(
                _cached_phi(self.params).ensure(size, size).log_values[: size + 1, : size + 1]
            )
        else:
            # entries are filled lazily by the sampling kernels (nan = missing)
            self._lphi = np.full((size + 1, size + 1), np.nan)
        self._n_max = n_max
        return self

    def lphi_lookup(self, m, q):
        """log phi for integer arrays m, q, filling missing entries."""
        m = np.asarray(m)
        q = np.asarray(q)
        vals = self._lphi[m, q]
        miss = np.isnan(vals)
        if miss.any():
            tab = _cached_phi(self.params)
            for mm, qq in set(zip(m[miss].tolist(), q[miss].tolist())):
                self._lphi[mm, qq] = tab.log_phi(mm, qq)
            vals = self._lphi[m, q]
        return vals

    def rates(self, n, k, nj):
        n = np.asarray(n, dtype=float)
        k = np.asarray(k)
        nj = np.asarray(nj)
        s, z = self.alpha, self.zeta
        a_ex = 1.0 / n
        case2 = nj > 0
        w_new = np.where(case2, 0.0, k * s / n)
        w_spike = np.zeros(np.broadcast(n, k, nj).shape)
        if np.any(case2):
            kk, mm = np.broadcast_arrays(k, nj)
            kk, mm = kk[case2], mm[case2]
            nn = np.broadcast_to(n, case2.shape)[case2]
            d = self.lphi_lookup(mm, kk)
            wn = (1 - z) * s * np.exp(self.lphi_lookup(mm, kk + 1) - d) / nn
            ws = np.exp(self.lphi_lookup(mm + 1, kk) - d) / nn
            w_new = np.array(np.broadcast_to(w_new, case2.shape), dtype=float)
            w_new[case2] = wn
            w_spike[case2] = ws
        return w_new, w_spike, np.broadcast_to(a_ex, w_spike.shape)

    def kernel_args(self):
        empty3 = np.zeros((1, 1, 1))
        return (KIND_STABLE, self.alpha, self.zeta, self._logC, self._lphi,
                empty3, empty3, empty3)


class NigUrn:
    """Rates of the N-IG urn read from dense tables indexed [n, k, nj].

    Without spike cluster: w_new = rho0(k+1, n+1) / (2n rho0(k, n)) and
    a_ex = rho0(k, n+1) / (n rho0(k, n)).  With a spike cluster of size nj:
    w_new = (1-zeta) rho(nj, k+1, n+1) / (2n rho(nj, k, n)),
    w_spike = rho(nj+1, k, n+1) / (4n rho(nj, k, n)),
    a_ex = rho(nj, k, n+1) / (n rho(nj, k, n)).
    """

    kind = KIND_TABLE

    def __init__(self, params: NigParams):
        self.params = params
        self.alpha = 0.5
        self.zeta = params.zeta
        self._n_max = 0
        self.W_new = self.W_spike = self.A_ex = np.zeros((1, 1, 1))

    def prepare(self, n_max: int) -> "NigUrn":
        if n_max <= self._n_max:
            return self
        if n_max > 400:
            raise ValueError("N-IG urn tables are limited to 400 draws")
        tab = _cached_rho(self.params).ensure(n_max + 1)
        N = n_max
        z = self.zeta
        Wn = np.zeros((N, N + 2, N + 2))
        Ws = np.zeros_like(Wn)
        Wa = np.zeros_like(Wn)
        cur = tab.log_rho_matrix(1, N + 1, N + 1)
        for n in range(1, N):
            nxt = tab.log_rho_matrix(n + 1, N + 1, N + 1)
            k = np.arange(1, n + 1)
            # no spike cluster
            Wn[n, k, 0] = np.exp(nxt[0, k + 1] - cur[0, k]) / (2 * n)
            Wa[n, k, 0] = np.exp(nxt[0, k] - cur[0, k]) / n
            if z > 0:
                for nj in range(1, n + 1):
                    kk = np.arange(1, n - nj + 2)
                    d = cur[nj, kk]
                    Wn[n, kk, nj] = (1 - z) * np.exp(nxt[nj, kk + 1] - d) / (2 * n)
                    Ws[n, kk, nj] = np.exp(nxt[nj + 1, kk] - d) / (4 * n)
                    Wa[n, kk, nj] = np.exp(nxt[nj, kk] - d) / n
            cur = nxt
        self.W_new = np.nan_to_num(Wn)
        self.W_spike = np.nan_to_num(Ws)
        self.A_ex = np.nan_to_num(Wa)
        self._n_max = n_max
        return self

    def rates(self, n, k, nj):
        n = np.asarray(n)
        k = np.asarray(k)
        nj = np.asarray(nj)
        return self.W_new[n, k, nj], self.W_spike[n, k, nj], self.A_ex[n, k, nj]

    def kernel_args(self):
        dummy = np.zeros((1, 1))
        return (KIND_TABLE, self.alpha, self.zeta, dummy, dummy,
                self.W_new, self.W_spike, self.A_ex)


def make_urn(params: Union[StableParams, NigParams]):
    if isinstance(params, StableParams):
        return StableUrn(params)
    if isinstance(params, NigParams):
        return NigUrn(params)
    raise TypeError(f"no urn for parameters of type {type(params).__name__}")


def chain_n0_distribution(
    urn, m: int, n_init: int = 0, k_slab: int = 0, n_spike: int = 0, outer: bool = False
) -> ProbTable:
    """Exact law of the total spike count after m further urn draws.

    The starting sample has ``n_init`` observations in ``k_slab`` slab
    clusters plus ``n_spike`` observations at the spike.  The result is a
    table over {0, ..., n_init + m}.  With ``outer=True`` the draws follow the
    outer model: an independent zeta-coin picks the spike, otherwise a draw
    from the diffuse urn restricted to the slab observations.
    """
    if m < 0 or n_init < 0 or k_slab < 0 or n_spike < 0:
        raise ValueError("sizes must be non-negative")
    if n_spike + k_slab > n_init or (n_init > n_spike and k_slab == 0):
        raise ValueError("inconsistent initial sample")
    urn.prepare(n_init + m + 1)
    alpha, z = urn.alpha, urn.zeta
    K = k_slab + m + 1
    S = n_spike + m + 1
    P = np.zeros((K, S))
    P[k_slab, n_spike] = 1.0
    kgrid, sgrid = np.meshgrid(np.arange(K), np.arange(S), indexing="ij")
    for step in range(m):
        n = n_init + step
        Q = np.zeros_like(P)
        live = P > 0
        ks, ss = kgrid[live], sgrid[live]
        p = P[live]
        if outer:
            Q[ks, ss + 1] += z * p
            nsl = n - ss
            first = nsl == 0
            w_new = np.zeros_like(p)
            if np.any(~first):
                w, _, _ = urn.rates(nsl[~first], ks[~first], np.zeros_like(ks[~first]))
                w_new[~first] = w
            w_new[first] = 1.0
            Q[ks + 1, ss] += (1 - z) * p * w_new
            Q[ks, ss] += (1 - z) * p * (1 - w_new)
        elif n == 0:
            Q[0, 1] += z
            Q[1, 0] += 1 - z
        else:
            ktot = ks + (ss > 0)
            w_new, w_spike, a_ex = urn.rates(np.full_like(ks, n), ktot, ss)
            w_stay = a_ex * (n - ss - ks * alpha)
            c1 = ss == 0
            # case without spike cluster: the new draw comes from P0
            Q[ks[c1], 1] += p[c1] * w_new[c1] * z
            Q[ks[c1] + 1, 0] += p[c1] * w_new[c1] * (1 - z)
            Q[ks[c1], 0] += p[c1] * w_stay[c1]
            c2 = ~c1
            Q[ks[c2] + 1, ss[c2]] += p[c2] * w_new[c2]
            Q[ks[c2], ss[c2] + 1] += p[c2] * w_spike[c2]
            Q[ks[c2], ss[c2]] += p[c2] * w_stay[c2]
        P = Q
    law = np.zeros(n_init + m + 1)
    law[: S] = P.sum(axis=0)[: n_init + m + 1]
    return ProbTable(0, law)
