"""Urn sampling kernels.

Two interchangeable implementations of the same loop: a compiled one (numba,
one replicate at a time) and a numpy one vectorized across replicates.  Both
consume the same pre-drawn uniforms, so they produce the same labels up to
floating point ties.

Labels: -1 marks a draw at the spike, c >= 0 the c-th slab cluster in order of
creation (initial slab clusters first).
"""

from __future__ import annotations

import math

import numpy as np

from ._backend import BACKEND, HAVE_NUMBA, njit
from .urn import KIND_STABLE

__all__ = ["run_urn", "run_urn_numba", "run_urn_numpy", "BACKEND"]


# ---------------------------------------------------------------------------
# compiled path
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _lphi_get(lphi, logC, lz, m, q):
    v = lphi[m, q]
    if np.isnan(v):
        top = -np.inf
        for i in range(1, m + 1):
            t = i * lz + math.lgamma(q + i - 1) + logC[m, i]
            if t > top:
                top = t
        acc = 0.0
        for i in range(1, m + 1):
            acc += math.exp(i * lz + math.lgamma(q + i - 1) + logC[m, i] - top)
        v = top + math.log(acc)
        lphi[m, q] = v
    return v


@njit(cache=True, nogil=True)
def _rates(kind, n, k, nj, alpha, zeta, logC, lphi, Wn, Ws, Wa):
    if kind == 0:
        if nj == 0:
            return k * alpha / n, 0.0, 1.0 / n
        lz = math.log(zeta)
        d = _lphi_get(lphi, logC, lz, nj, k)
        w_new = (1.0 - zeta) * alpha * math.exp(_lphi_get(lphi, logC, lz, nj, k + 1) - d) / n
        w_sp = math.exp(_lphi_get(lphi, logC, lz, nj + 1, k) - d) / n
        return w_new, w_sp, 1.0 / n
    return Wn[n, k, nj], Ws[n, k, nj], Wa[n, k, nj]


@njit(cache=True, nogil=True)
def _urn_loop(U, init_counts, n_spike0, n_init, outer, kind, alpha, zeta,
              logC, lphi, Wn, Ws, Wa, labels):
    R = U.shape[0]
    m = U.shape[1]
    K0 = init_counts.shape[0]
    counts = np.zeros(K0 + m, dtype=np.int64)
    for r in range(R):
        for c in range(K0):
            counts[c] = init_counts[c]
        kslab = K0
        ns = n_spike0
        for s in range(m):
            n = n_init + s
            u = U[r, s, 0]
            v = U[r, s, 1]
            # outcome: 0 spike, 1 new slab cluster, 2 existing slab cluster
            t = 0.0
            if outer:
                if v < zeta:
                    outcome = 0
                else:
                    nsl = n - ns
                    if nsl == 0:
                        outcome = 1
                    else:
                        w_new, w_sp, a_ex = _rates(kind, nsl, kslab, 0, alpha, zeta,
                                                   logC, lphi, Wn, Ws, Wa)
                        if u < w_new:
                            outcome = 1
                        else:
                            outcome = 2
                            t = (u - w_new) / a_ex
            elif n == 0:
                outcome = 0 if v < zeta else 1
            elif ns == 0:
                w_new, w_sp, a_ex = _rates(kind, n, kslab, 0, alpha, zeta,
                                           logC, lphi, Wn, Ws, Wa)
                if u < w_new:
                    outcome = 0 if v < zeta else 1
                else:
                    outcome = 2
                    t = (u - w_new) / a_ex
            else:
                w_new, w_sp, a_ex = _rates(kind, n, kslab + 1, ns, alpha, zeta,
                                           logC, lphi, Wn, Ws, Wa)
                if u < w_new:
                    outcome = 1
                elif u < w_new + w_sp:
                    outcome = 0
                else:
                    outcome = 2
                    t = (u - w_new - w_sp) / a_ex
            if outcome == 2 and kslab == 0:
                # only reachable through rounding of the weights
                outcome = 0 if ns > 0 else 1
            if outcome == 0:
                labels[r, s] = -1
                ns += 1
            elif outcome == 1:
                labels[r, s] = kslab
                counts[kslab] = 1
                kslab += 1
            else:
                acc = 0.0
                pick = kslab - 1
                for c in range(kslab):
                    acc += counts[c] - alpha
                    if t < acc:
                        pick = c
                        break
                labels[r, s] = pick
                counts[pick] += 1
    return labels


def run_urn_numba(U, init_counts, n_spike0, n_init, outer, urn):
    if not HAVE_NUMBA:
        raise RuntimeError("numba backend is not available")
    R, m = U.shape[:2]
    labels = np.empty((R, m), dtype=np.int32)
    kind, alpha, zeta, logC, lphi, Wn, Ws, Wa = urn.kernel_args()
    _urn_loop(U, np.asarray(init_counts, dtype=np.int64), int(n_spike0), int(n_init),
              bool(outer), kind, float(alpha), float(zeta),
              np.ascontiguousarray(logC, dtype=np.float64), lphi, Wn, Ws, Wa, labels)
    return labels


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------

def _rates_np(urn, n, k, nj):
    """Vectorized rates matching the operation order of the compiled path."""
    n = np.asarray(n)
    k = np.asarray(k)
    nj = np.asarray(nj)
    if urn.kind != KIND_STABLE:
        return urn.W_new[n, k, nj], urn.W_spike[n, k, nj], urn.A_ex[n, k, nj]
    s, z = urn.alpha, urn.zeta
    n_b, k_b, nj_b = np.broadcast_arrays(n, k, nj)
    nf = n_b.astype(float)
    w_new = k_b * s / nf
    w_sp = np.zeros(nf.shape)
    c2 = nj_b > 0
    if c2.any():
        mm, kk, nn = nj_b[c2], k_b[c2], nf[c2]
        d = urn.lphi_lookup(mm, kk)
        w_new[c2] = (1.0 - z) * s * np.exp(urn.lphi_lookup(mm, kk + 1) - d) / nn
        w_sp[c2] = np.exp(urn.lphi_lookup(mm + 1, kk) - d) / nn
    return w_new, w_sp, 1.0 / nf


def run_urn_numpy(U, init_counts, n_spike0, n_init, outer, urn):
    R, m = U.shape[:2]
    init_counts = np.asarray(init_counts, dtype=np.int64)
    K0 = init_counts.size
    alpha, zeta = urn.alpha, urn.zeta
    counts = np.zeros((R, K0 + m), dtype=np.int64)
    counts[:, :K0] = init_counts
    kslab = np.full(R, K0, dtype=np.int64)
    ns = np.full(R, int(n_spike0), dtype=np.int64)
    labels = np.empty((R, m), dtype=np.int32)
    rows = np.arange(R)
    cols = np.arange(K0 + m)
    for s in range(m):
        n = n_init + s
        u = U[:, s, 0]
        v = U[:, s, 1]
        outcome = np.full(R, 2, dtype=np.int64)
        t = np.zeros(R)
        if outer:
            spike = v < zeta
            nsl = n - ns
            first = ~spike & (nsl == 0)
            rest = ~spike & ~first
            outcome[spike] = 0
            outcome[first] = 1
            if rest.any():
                w_new, _, a_ex = _rates_np(urn, nsl[rest], kslab[rest], 0)
                ur = u[rest]
                oc = np.where(ur < w_new, 1, 2)
                outcome[rest] = oc
                t[rest] = (ur - w_new) / a_ex
        elif n == 0:
            outcome[:] = np.where(v < zeta, 0, 1)
        else:
            c1 = ns == 0
            c2 = ~c1
            if c1.any():
                w_new, _, a_ex = _rates_np(urn, n, kslab[c1], 0)
                u1, v1 = u[c1], v[c1]
                isnew = u1 < w_new
                outcome[c1] = np.where(isnew, np.where(v1 < zeta, 0, 1), 2)
                t[c1] = (u1 - w_new) / a_ex
            if c2.any():
                w_new, w_sp, a_ex = _rates_np(urn, n, kslab[c2] + 1, ns[c2])
                u2 = u[c2]
                outcome[c2] = np.where(u2 < w_new, 1, np.where(u2 < w_new + w_sp, 0, 2))
                t[c2] = (u2 - w_new - w_sp) / a_ex
        fix = (outcome == 2) & (kslab == 0)
        outcome[fix] = np.where(ns[fix] > 0, 0, 1)

        sp = outcome == 0
        labels[sp, s] = -1
        ns[sp] += 1

        nw = outcome == 1
        labels[nw, s] = kslab[nw]
        counts[rows[nw], kslab[nw]] = 1
        kslab[nw] += 1

        ex = outcome == 2
        if ex.any():
            cnt = counts[ex]
            w = np.where(cols[None, :] < kslab[ex][:, None], cnt - alpha, 0.0)
            cum = np.cumsum(w, axis=1)
            pick = (cum <= t[ex][:, None]).sum(axis=1)
            pick = np.minimum(pick, kslab[ex] - 1)
            labels[ex, s] = pick
            counts[rows[ex], pick] += 1
    return labels


def run_urn(U, init_counts, n_spike0, n_init, outer, urn, backend: str | None = None):
    """Run the urn for every replicate in ``U`` (shape (R, m, 2)).

    ``urn`` must already be prepared for n_init + m draws.  ``backend``
    overrides the process-wide choice ("numba" or "numpy").
    """
    backend = backend or BACKEND
    if backend == "numba":
        return run_urn_numba(U, init_counts, n_spike0, n_init, outer, urn)
    if backend == "numpy":
        return run_urn_numpy(U, init_counts, n_spike0, n_init, outer, urn)
    raise ValueError(f"unknown backend {backend!r}")
