"""Adaptive Gauss-Kronrod quadrature on (0, inf).

Every integral in the model has the shape int_0^inf u^{n-1} e^{-c psi(u)} g(u) du
with a smooth, positive integrand that behaves like a power at both ends
before the exponential cut-off.  After the substitution u = e^s such
integrands become bell shaped in s, which suits a bracketing scan followed by
adaptive 7/15-point Gauss-Kronrod panels.

Integrands may be vector valued (shape ``(C, len(u))``) so that families of
related integrals, e.g. all summands of a probability table, share nodes.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

__all__ = ["QuadratureError", "integrate_semi_infinite", "log_integrate"]


class QuadratureError(RuntimeError):
    """Raised when the adaptive scheme cannot reach the requested tolerance."""


# Kronrod nodes on [0, 1] (positive half, symmetric) and weights.
_XK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])

# full 15-point rule on [-1, 1]
NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
W_KRONROD = np.concatenate([_WK[:-1], _WK[::-1]])
_wg_full = np.zeros(15)
# Gauss nodes are Kronrod nodes with odd index in _XK (1, 3, 5, 7)
for _gi, _ki in enumerate([1, 3, 5]):
    _wg_full[_ki] = _WG[_gi]
    _wg_full[14 - _ki] = _WG[_gi]
_wg_full[7] = _WG[3]
W_GAUSS = _wg_full

_SCAN_STEP = 0.25
_DROP = 60.0  # integrand is negligible below max - _DROP (in log units)
_S_LIMIT = 700.0


def _as_2d(vals: np.ndarray, npts: int) -> np.ndarray:
    vals = np.asarray(vals, dtype=float)
    if vals.ndim == 1:
        vals = vals[None, :]
    if vals.shape[-1] != npts:
        raise ValueError("integrand returned an array of the wrong length")
    return vals


def _bracket(logh: Callable[[np.ndarray], np.ndarray], lo: float, hi: float):
    """Scan log h(s) on a grid and return (a, b, peak) enclosing the mass."""
    s = np.arange(lo, hi + _SCAN_STEP / 2, _SCAN_STEP)
    with np.errstate(all="ignore"):
        H = _as_2d(logh(s), s.size)
    H = np.where(np.isnan(H), -np.inf, H)
    while True:
        peak = H.max(axis=1)
        live = np.isfinite(peak)
        if not live.any():
            return None, None, peak
        thr = peak[:, None] - _DROP
        left_open = np.any(live & (H[:, 0] > thr[:, 0]))
        right_open = np.any(live & (H[:, -1] > thr[:, 0]))
        if not (left_open or right_open):
            break
        if (left_open and s[0] <= -_S_LIMIT) or (right_open and s[-1] >= _S_LIMIT):
            raise QuadratureError("integrand does not decay on (0, inf)")
        if left_open:
            new = np.arange(s[0] - 40.0, s[0] - _SCAN_STEP / 2, _SCAN_STEP)
            with np.errstate(all="ignore"):
                Hn = _as_2d(logh(new), new.size)
            s = np.concatenate([new, s])
            H = np.concatenate([np.where(np.isnan(Hn), -np.inf, Hn), H], axis=1)
        if right_open:
            new = np.arange(s[-1] + _SCAN_STEP, s[-1] + 40.0 + _SCAN_STEP / 2, _SCAN_STEP)
            with np.errstate(all="ignore"):
                Hn = _as_2d(logh(new), new.size)
            s = np.concatenate([s, new])
            H = np.concatenate([H, np.where(np.isnan(Hn), -np.inf, Hn)], axis=1)
    above = (H > thr) & live[:, None]
    cols = np.flatnonzero(above.any(axis=0))
    a = s[max(cols[0] - 1, 0)]
    b = s[min(cols[-1] + 1, s.size - 1)]
    if b <= a:
        a, b = a - _SCAN_STEP, b + _SCAN_STEP
    return a, b, peak


def _adaptive(values, a: float, b: float, ncomp: int, tol: float, max_rounds: int):
    """Adaptive GK15 on [a, b] for a vector-valued integrand.

    ``values(s)`` returns an array (ncomp, len(s)) of scaled integrand values.
    Returns (integral, error estimate), both of shape (ncomp,).
    """
    npan = max(8, int(math.ceil((b - a) / 1.0)))
    edges = np.linspace(a, b, npan + 1)
    left, right = edges[:-1], edges[1:]
    done_val = np.zeros(ncomp)
    done_err = np.zeros(ncomp)
    width = b - a
    for _ in range(max_rounds):
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        s = (mid[:, None] + half[:, None] * NODES[None, :]).ravel()
        with np.errstate(all="ignore"):
            f = _as_2d(values(s), s.size)
        f = np.where(np.isfinite(f), f, 0.0).reshape(ncomp, left.size, 15)
        K = (f @ W_KRONROD) * half
        G = (f @ W_GAUSS) * half
        err = np.abs(K - G)
        total = done_val + K.sum(axis=1)
        total_err = done_err + err.sum(axis=1)
        scale = np.abs(total)
        if np.all(total_err <= tol * scale):
            return total, total_err
        # panels whose share of the error budget is exceeded get bisected
        budget = tol * scale[:, None] * (2 * half)[None, :] / width
        bad = np.any(err > budget, axis=0)
        good = ~bad
        done_val += K[:, good].sum(axis=1)
        done_err += err[:, good].sum(axis=1)
        if not bad.any():
            return done_val, done_err
        l, r = left[bad], right[bad]
        m = 0.5 * (l + r)
        left = np.concatenate([l, m])
        right = np.concatenate([m, r])
        if left.size > 200000:
            break
    raise QuadratureError(
        f"adaptive quadrature did not reach tol={tol:g} "
        f"(relative error estimate {np.max(total_err / np.maximum(scale, 1e-300)):.3g})"
    )


def log_integrate(
    logf: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-10,
    max_rounds: int = 50,
) -> np.ndarray | float:
    """log of int_0^inf exp(logf(u)) du for a positive integrand given in logs.

    ``logf`` receives a 1-d array of abscissae ``u`` and returns either a 1-d
    array or a 2-d array ``(C, len(u))`` for C integrands at once; the result
    then has shape ``(C,)``.  Components that vanish identically (all -inf)
    yield -inf.
    """
    def logh(s):
        return np.asarray(logf(np.exp(s))) + s

    probe = np.asarray(logf(np.array([1.0])))
    scalar = probe.ndim == 1
    a, b, peak = _bracket(logh, -40.0, 40.0)
    ncomp = peak.size
    out = np.full(ncomp, -np.inf)
    if a is not None:
        live = np.isfinite(peak)
        pk = np.where(live, peak, 0.0)

        def values(s):
            H = _as_2d(logh(s), s.size)
            return np.exp(H - pk[:, None])

        val, _ = _adaptive(values, a, b, ncomp, tol, max_rounds)
        with np.errstate(divide="ignore"):
            out = np.where(live, np.log(val) + pk, -np.inf)
    return float(out[0]) if scalar else out


def integrate_semi_infinite(
    f: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-10,
    max_rounds: int = 50,
) -> float:
    """int_0^inf f(u) du for a continuous, absolutely integrable ``f``.

    ``f`` must accept numpy arrays.  The integrand may change sign; the
    relative tolerance then refers to the value of the integral, so heavily
    cancelling integrands can fail to converge (reported through
    :class:`QuadratureError`).
    """
    def logh(s):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(np.asarray(f(np.exp(s)), dtype=float))) + s

    a, b, peak = _bracket(logh, -40.0, 40.0)
    if a is None:
        return 0.0
    pk = float(peak[0])

    def values(s):
        u = np.exp(s)
        return np.asarray(f(u), dtype=float) * np.exp(s - pk)

    val, _ = _adaptive(values, a, b, 1, tol, max_rounds)
    return float(val[0] * math.exp(pk))
