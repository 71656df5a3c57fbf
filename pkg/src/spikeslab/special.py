"""Special functions and combinatorial helpers.

Generalized factorial coefficients, integer-order upper incomplete gamma
functions, log-space factorial-type quantities and small enumerators used as
brute-force oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

import numpy as np
from scipy import special as sps

__all__ = [
    "GenFactTable",
    "gen_fact_table",
    "gen_fact_coeff",
    "log_gen_fact_coeff",
    "gen_fact_coeff_direct",
    "upper_inc_gamma_int",
    "log_upper_inc_gamma_int",
    "log_upper_inc_gamma_range",
    "enumerate_compositions",
    "enumerate_set_partitions",
    "bell_number",
    "log_rising",
    "rising",
    "log_binom",
    "log_multinomial",
    "partition_multiplicity",
    "logsumexp",
]

MAX_SET_PARTITION_N = 10


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    return sigma


def _check_int(x, name: str, minimum: int | None = None) -> int:
    if isinstance(x, (bool, np.bool_)) or int(x) != x:
        raise ValueError(f"{name} must be an integer, got {x!r}")
    x = int(x)
    if minimum is not None and x < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {x}")
    return x


def logsumexp(a, axis=None):
    """Thin wrapper over :func:`scipy.special.logsumexp` that maps empty or
    all ``-inf`` input to ``-inf`` without warnings."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return -np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        return sps.logsumexp(a, axis=axis)


# ---------------------------------------------------------------------------
# factorial-type quantities
# ---------------------------------------------------------------------------

def log_rising(a, n):
    """log of the rising factorial (a)_n = Gamma(a+n)/Gamma(a) for a > 0."""
    a = np.asarray(a, dtype=float)
    n = np.asarray(n, dtype=float)
    out = sps.gammaln(a + n) - sps.gammaln(a)
    return out if out.ndim else float(out)


def rising(a: float, n: int) -> float:
    """Rising factorial (a)_n for any real a and integer n >= 0.

    Computed as a plain product so that negative and zero ``a`` work; this is
    what the alternating-sum definition of the generalized factorial
    coefficients needs.
    """
    n = _check_int(n, "n", 0)
    out = 1.0
    for t in range(n):
        out *= a + t
    return out


def log_binom(n, k):
    """log C(n, k) for 0 <= k <= n (array friendly)."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    out = sps.gammaln(n + 1) - sps.gammaln(k + 1) - sps.gammaln(n - k + 1)
    return out if out.ndim else float(out)


def log_multinomial(counts) -> float:
    """log of n! / (n_1! ... n_k!) for n = sum(counts)."""
    counts = np.asarray(counts, dtype=float)
    return float(sps.gammaln(counts.sum() + 1) - sps.gammaln(counts + 1).sum())


def partition_multiplicity(freqs) -> int:
    """Number of set partitions of {1..n} whose block sizes equal ``freqs``.

    That is n! / (prod n_j! * prod_s m_s!), where m_s counts blocks of size s.
    """
    freqs = [int(f) for f in freqs]
    out = math.factorial(sum(freqs))
    for f in freqs:
        out //= math.factorial(f)
    for s in set(freqs):
        out //= math.factorial(freqs.count(s))
    return out


# ---------------------------------------------------------------------------
# generalized factorial coefficients
# ---------------------------------------------------------------------------

def _log_gfc_rows(n_max: int, sigma: float) -> np.ndarray:
    """Log table L[n, i] = log C(n, i; sigma), -inf where the coefficient is 0.

    Uses C(n,i) = (n-1-i sigma) C(n-1,i) + sigma C(n-1,i-1).  For i <= n-1
    the first factor is at least (n-1)(1-sigma) > 0, so both terms are
    non-negative and the recursion is carried out without cancellation.
    """
    L = np.full((n_max + 1, n_max + 1), -np.inf)
    L[0, 0] = 0.0
    log_s = math.log(sigma)
    for n in range(1, n_max + 1):
        i = np.arange(1, n)
        prev = L[n - 1]
        with np.errstate(divide="ignore"):
            a = np.log(n - 1 - i * sigma) + prev[1:n]
        b = log_s + prev[0 : n - 1]
        L[n, 1:n] = np.logaddexp(a, b)
        L[n, n] = n * log_s
    return L


@dataclass(frozen=True)
class GenFactTable:
    """Lower-triangular table of generalized factorial coefficients.

    Stored as logarithms so that rows well beyond n = 170 stay finite; the
    ``table`` property exponentiates on demand (entries may overflow to inf
    for very large n, which is why the log form is authoritative).
    """

    sigma: float
    n_max: int
    log_table: np.ndarray = field(repr=False)

    @property
    def table(self) -> np.ndarray:
        """Linear-scale table; entries beyond float range become inf."""
        with np.errstate(over="ignore"):
            return np.exp(self.log_table)

    def _check(self, n, i):
        n = _check_int(n, "n", 0)
        i = _check_int(i, "i", 0)
        if i > n:
            raise ValueError(f"need i <= n, got i={i}, n={n}")
        if n > self.n_max:
            raise ValueError(f"n={n} exceeds table size n_max={self.n_max}")
        return n, i

    def log_coeff(self, n: int, i: int) -> float:
        n, i = self._check(n, i)
        return float(self.log_table[n, i])

    def coeff(self, n: int, i: int) -> float:
        return math.exp(self.log_coeff(n, i))

    def verify(self, n_check: int = 25, rtol: float = 1e-10) -> float:
        """Compare against the exactly evaluated alternating sum.

        Returns the worst relative error over 1 <= i <= n <= n_check and raises
        ``AssertionError`` when it exceeds ``rtol``.
        """
        worst = 0.0
        for n in range(1, min(n_check, self.n_max) + 1):
            for i in range(1, n + 1):
                ref = gen_fact_coeff_direct(n, i, self.sigma)
                got = self.coeff(n, i)
                worst = max(worst, abs(got - ref) / ref)
        if worst > rtol:
            raise AssertionError(
                f"recurrence disagrees with direct sum: rel err {worst:.3g}"
            )
        return worst


_TABLE_CACHE: dict[float, GenFactTable] = {}


def gen_fact_table(n_max: int, sigma: float) -> GenFactTable:
    """Table of C(n, i; sigma) for 0 <= i <= n <= n_max.

    Tables are cached per ``sigma`` and regrown when a larger ``n_max`` is
    requested; a cached table at least as large is returned as is.
    """
    n_max = _check_int(n_max, "n_max", 1)
    sigma = _check_sigma(sigma)
    hit = _TABLE_CACHE.get(sigma)
    if hit is not None and hit.n_max >= n_max:
        return hit
    L = _log_gfc_rows(n_max, sigma)
    L.setflags(write=False)
    tab = GenFactTable(sigma=sigma, n_max=n_max, log_table=L)
    if len(_TABLE_CACHE) > 64:
        _TABLE_CACHE.clear()
    _TABLE_CACHE[sigma] = tab
    return tab


def log_gen_fact_coeff(n: int, i: int, sigma: float) -> float:
    """log C(n, i; sigma); -inf when the coefficient vanishes."""
    n = _check_int(n, "n", 0)
    i = _check_int(i, "i", 0)
    sigma = _check_sigma(sigma)
    if i > n:
        raise ValueError(f"need i <= n, got i={i}, n={n}")
    return gen_fact_table(max(n, 1), sigma).log_coeff(n, i)


def gen_fact_coeff(n: int, i: int, sigma: float) -> float:
    """Generalized factorial coefficient C(n, i; sigma).

    Defined by (1/i!) sum_r (-1)^r C(i, r) (-r sigma)_n, with C(0,0)=1 and
    C(n,0)=0 for n >= 1.  Evaluated from the triangular recurrence in log
    space, which is stable for any n.
    """
    return math.exp(log_gen_fact_coeff(n, i, sigma))


@lru_cache(maxsize=4096)
def _direct_exact(n: int, i: int, sigma: Fraction) -> Fraction:
    tot = Fraction(0)
    for r in range(i + 1):
        p = Fraction(1)
        for t in range(n):
            p *= t - r * sigma
        tot += (-1) ** r * math.comb(i, r) * p
    return tot / math.factorial(i)


def gen_fact_coeff_direct(n: int, i: int, sigma: float) -> float:
    """Alternating-sum definition of C(n, i; sigma), evaluated exactly.

    ``sigma`` is converted to the rational number it represents, so the only
    rounding is the final conversion to float.  In floating point the same sum
    loses all accuracy for small sigma even at n = 20, which is why this slow
    version is kept only as a reference.
    """
    n = _check_int(n, "n", 0)
    i = _check_int(i, "i", 0)
    sigma = _check_sigma(sigma)
    if i > n:
        raise ValueError(f"need i <= n, got i={i}, n={n}")
    return float(_direct_exact(n, i, Fraction(sigma)))


# ---------------------------------------------------------------------------
# upper incomplete gamma with integer order
# ---------------------------------------------------------------------------

def _log_gamma_cf(a: int, z: float) -> float:
    """log Gamma(a, z) from the Legendre continued fraction (modified Lentz).

    Valid for any real a and converges quickly for z > 1.
    """
    tiny = 1e-300
    b = z + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for k in range(1, 10000):
        an = -k * (k - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    else:  # pragma: no cover - not reached for z > 1
        raise RuntimeError("incomplete gamma continued fraction did not converge")
    return a * math.log(z) - z + math.log(h)


def log_upper_inc_gamma_int(a: int, z: float) -> float:
    """log Gamma(a, z) for integer ``a`` of any sign and z > 0.

    * a >= 1: upward recurrence from Gamma(1, z) = e^{-z}; every step adds two
      positive terms.
    * a <= 0, z > 1: continued fraction.  The downward recurrence loses
      accuracy here because z^{a-1} e^{-z} and Gamma(a, z) nearly cancel.
    * a <= 0, z <= 1: downward recurrence anchored at Gamma(0, z) = E_1(z);
      the leading term dominates so the subtraction is benign.
    """
    a = _check_int(a, "a")
    z = float(z)
    if not z > 0.0 or not math.isfinite(z):
        raise ValueError(f"z must be a positive finite number, got {z}")
    lz = math.log(z)
    if a >= 1:
        out = -z
        for b in range(1, a):
            out = np.logaddexp(math.log(b) + out, b * lz - z)
        return float(out)
    if z > 1.0:
        return _log_gamma_cf(a, z)
    out = math.log(sps.exp1(z))
    for b in range(0, a, -1):
        # Gamma(b-1, z) = (z^{b-1} e^{-z} - Gamma(b, z)) / (1 - b)
        lead = (b - 1) * lz - z
        out = lead + math.log1p(-math.exp(out - lead)) - math.log(1 - b)
    return out


def log_upper_inc_gamma_range(a_min: int, a_max: int, z: float) -> np.ndarray:
    """log Gamma(a, z) for every integer a_min <= a <= a_max, sharing the
    recurrences of :func:`log_upper_inc_gamma_int` across orders."""
    a_min = _check_int(a_min, "a_min")
    a_max = _check_int(a_max, "a_max")
    if a_max < a_min:
        raise ValueError("need a_min <= a_max")
    z = float(z)
    if not z > 0.0 or not math.isfinite(z):
        raise ValueError(f"z must be a positive finite number, got {z}")
    lz = math.log(z)
    out = {}
    if a_max >= 1:
        cur = -z
        out[1] = cur
        for b in range(1, a_max):
            cur = float(np.logaddexp(math.log(b) + cur, b * lz - z))
            out[b + 1] = cur
    if a_min <= 0:
        if z > 1.0:
            for a in range(a_min, min(a_max, 0) + 1):
                out[a] = _log_gamma_cf(a, z)
        else:
            cur = math.log(sps.exp1(z))
            out[0] = cur
            for b in range(0, a_min, -1):
                lead = (b - 1) * lz - z
                cur = lead + math.log1p(-math.exp(cur - lead)) - math.log(1 - b)
                out[b - 1] = cur
    return np.array([out[a] for a in range(a_min, a_max + 1)])


def upper_inc_gamma_int(a: int, z: float) -> float:
    """Upper incomplete gamma Gamma(a, z) = int_z^inf x^{a-1} e^{-x} dx."""
    return math.exp(log_upper_inc_gamma_int(a, z))


# ---------------------------------------------------------------------------
# enumerators
# ---------------------------------------------------------------------------

def enumerate_compositions(n: int, k: int) -> Iterator[tuple[int, ...]]:
    """Yield every ordered k-tuple of positive integers summing to n."""
    n = _check_int(n, "n", 1)
    k = _check_int(k, "k", 1)
    if k > n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")

    def rec(rem: int, parts: int):
        if parts == 1:
            yield (rem,)
            return
        for first in range(1, rem - parts + 2):
            for tail in rec(rem - first, parts - 1):
                yield (first,) + tail

    yield from rec(n, k)


def enumerate_set_partitions(n: int) -> Iterator[list[list[int]]]:
    """Yield all set partitions of {1, ..., n} as lists of blocks.

    Restricted growth strings are walked in lexicographic order; capped at
    n = 10 (115975 partitions) since the output is only meant for oracles.
    """
    n = _check_int(n, "n", 1)
    if n > MAX_SET_PARTITION_N:
        raise ValueError(f"set partition enumeration limited to n <= 10, got {n}")
    a = [0] * n
    while True:
        blocks: list[list[int]] = [[] for _ in range(max(a) + 1)]
        for idx, b in enumerate(a):
            blocks[b].append(idx + 1)
        yield blocks
        # next restricted growth string
        i = n - 1
        while i > 0 and a[i] > max(a[:i]):
            i -= 1
        if i == 0:
            return
        a[i] += 1
        for t in range(i + 1, n):
            a[t] = 0


def bell_number(n: int) -> int:
    """Bell number via the Bell triangle."""
    n = _check_int(n, "n", 0)
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]
