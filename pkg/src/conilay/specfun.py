"""Bessel functions of order 0 and 1, the Airy function Ai, and their zeros.

All evaluators are scalar, pure Python and accurate to a few units in the
last place over the ranges the rest of the package uses.

Argument regimes
----------------
Bessel ``J0, J1, Y0, Y1``
    ``|x| <= 2``      ascending power series
    ``2 < |x| <= 25`` Miller backward recurrence normalised by
                      ``J0 + 2 sum J_2k = 1``; ``Y0`` and ``Y1`` from the
                      Neumann series over the same ``J_n``
    ``|x| > 25``      Hankel asymptotic expansion, truncated at its
                      smallest term (remainder below ``exp(-2|x|)``)
Airy ``Ai, Ai'``
    ``-9 <= x <= 10`` Maclaurin series summed in 320-bit fixed-point
                      integer arithmetic (a float is a dyadic rational,
                      so the terms are exact) from 40-digit values of
                      ``Ai(0)`` and ``Ai'(0)``; the large alternating
                      terms cancel without loss
    otherwise         oscillatory / exponentially decaying asymptotic
                      expansions, truncated at the smallest term
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

__all__ = [
    "CapacityError",
    "ZERO_TABLE_CAPACITY",
    "eval_j0",
    "eval_j1",
    "eval_y0",
    "eval_y1",
    "bessel01",
    "eval_j0_prime",
    "eval_y0_prime",
    "eval_airy",
    "eval_airy_prime",
    "j0_zero",
    "airy_zero",
    "j0_zeros",
    "airy_zeros",
]

EULER_GAMMA = 0.5772156649015329
ZERO_TABLE_CAPACITY = 64

_SERIES_MAX = 2.0
_MILLER_MAX = 25.0
_AIRY_NEG = -9.0
_AIRY_POS = 10.0

# Ai(0) and -Ai'(0) to 40 significant digits.
_AI0 = Fraction("0.3550280538878172392600631860041831763980")
_AIP0 = Fraction("0.2588194037928067984051835601892039634791")
_FIXED_BITS = 320
_AI0_FIXED = _AI0.numerator * (1 << _FIXED_BITS) // _AI0.denominator
_AIP0_FIXED = _AIP0.numerator * (1 << _FIXED_BITS) // _AIP0.denominator


class CapacityError(IndexError):
    """Requested zero index lies beyond the fixed zero table."""


# --------------------------------------------------------------------------
# Bessel functions
# --------------------------------------------------------------------------


def _series_j0_j1(x: float) -> tuple[float, float]:
    q = -0.25 * x * x
    t0 = 1.0
    t1 = 1.0
    s0 = 1.0
    s1 = 1.0
    k = 0
    while True:
        k += 1
        t0 *= q / (k * k)
        t1 *= q / (k * (k + 1))
        s0 += t0
        s1 += t1
        if abs(t0) < 1e-18 * abs(s0) and abs(t1) < 1e-18:
            break
    return s0, 0.5 * x * s1


def _series_y0_y1(x: float) -> tuple[float, float]:
    j0, j1 = _series_j0_j1(x)
    q = -0.25 * x * x
    logx = math.log(0.5 * x)
    # Y0 tail: sum_{k>=1} (-1)^{k+1} H_k (x^2/4)^k / (k!)^2
    t = 1.0
    harmonic = 0.0
    s0 = 0.0
    # Y1 tail: sum_{k>=0} (psi(k+1) + psi(k+2)) q^k / (k! (k+1)!)
    u = 1.0
    s1 = (2.0 * -EULER_GAMMA + 1.0) * u
    k = 0
    while True:
        k += 1
        harmonic += 1.0 / k
        t *= q / (k * k)
        s0 -= harmonic * t
        u *= q / (k * (k + 1))
        psi_sum = -2.0 * EULER_GAMMA + 2.0 * harmonic + 1.0 / (k + 1)
        s1 += psi_sum * u
        if abs(t) * (harmonic + 1.0) < 1e-18 and abs(u) * (abs(psi_sum) + 1.0) < 1e-18:
            break
    y0 = (2.0 / math.pi) * ((logx + EULER_GAMMA) * j0 + s0)
    y1 = -2.0 / (math.pi * x) + (2.0 / math.pi) * logx * j1 - (0.5 * x / math.pi) * s1
    return y0, y1


def _miller(x: float) -> list[float]:
    """Normalised ``J_0 .. J_N`` by backward recurrence, ``x > 0``."""
    n_top = 2 * ((int(x) + int(math.sqrt(160.0 * (x + 1.0))) + 20) // 2)
    values = [0.0] * (n_top + 2)
    values[n_top] = 1e-30
    two_over_x = 2.0 / x
    for n in range(n_top, 0, -1):
        values[n - 1] = n * two_over_x * values[n] - values[n + 1]
        if abs(values[n - 1]) > 1e250:
            for i in range(n - 1, n_top + 2):
                values[i] *= 1e-250
    norm = values[0] + 2.0 * math.fsum(values[2 : n_top + 1 : 2])
    return [v / norm for v in values[: n_top + 1]]


def _miller_all(x: float) -> tuple[float, float, float, float]:
    jn = _miller(x)
    lg = math.log(0.5 * x) + EULER_GAMMA
    n_top = len(jn) - 1
    even = []
    odd = []
    for k in range(1, n_top // 2):
        sign = -1.0 if k % 2 else 1.0
        even.append(sign * jn[2 * k] / k)
        odd.append(sign * (jn[2 * k - 1] - jn[2 * k + 1]) / k)
    y0 = (2.0 / math.pi) * (lg * jn[0] - 2.0 * math.fsum(even))
    y1 = (2.0 / math.pi) * (lg * jn[1] - jn[0] / x + math.fsum(odd))
    return jn[0], jn[1], y0, y1


def _hankel(x: float, order: int) -> tuple[float, float]:
    """(J, Y) of order 0 or 1 for large positive ``x``."""
    mu = 4.0 * order * order
    p = 1.0
    q = 0.0
    term = 1.0
    k = 0
    prev = math.inf
    while True:
        k += 1
        term *= (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(term) > prev or abs(term) < 1e-18:
            break
        prev = abs(term)
        if k % 2:
            q += term if (k // 2) % 2 == 0 else -term
        else:
            p += term if (k // 2) % 2 == 0 else -term
    c, s = math.cos(x), math.sin(x)
    if order == 0:
        # chi = x - pi/4
        cchi = (c + s) / math.sqrt(2.0)
        schi = (s - c) / math.sqrt(2.0)
    else:
        # chi = x - 3 pi/4
        cchi = (s - c) / math.sqrt(2.0)
        schi = -(c + s) / math.sqrt(2.0)
    amp = math.sqrt(2.0 / (math.pi * x))
    return amp * (p * cchi - q * schi), amp * (p * schi + q * cchi)


def eval_j0(x: float) -> float:
    """Bessel function of the first kind, order 0."""
    ax = abs(float(x))
    if ax <= _SERIES_MAX:
        return _series_j0_j1(ax)[0]
    if ax <= _MILLER_MAX:
        return _miller(ax)[0]
    return _hankel(ax, 0)[0]


def eval_j1(x: float) -> float:
    """Bessel function of the first kind, order 1 (odd in ``x``)."""
    x = float(x)
    ax = abs(x)
    if ax <= _SERIES_MAX:
        val = _series_j0_j1(ax)[1]
    elif ax <= _MILLER_MAX:
        val = _miller(ax)[1]
    else:
        val = _hankel(ax, 1)[0]
    return -val if x < 0 else val


def _check_positive(x: float) -> float:
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"Y Bessel functions need a positive argument, got {x!r}")
    return x


def eval_y0(x: float) -> float:
    """Bessel function of the second kind, order 0; ``x > 0``."""
    x = _check_positive(x)
    if x <= _SERIES_MAX:
        return _series_y0_y1(x)[0]
    if x <= _MILLER_MAX:
        return _miller_all(x)[2]
    return _hankel(x, 0)[1]


def eval_y1(x: float) -> float:
    """Bessel function of the second kind, order 1; ``x > 0``."""
    x = _check_positive(x)
    if x <= _SERIES_MAX:
        return _series_y0_y1(x)[1]
    if x <= _MILLER_MAX:
        return _miller_all(x)[3]
    return _hankel(x, 1)[1]


def bessel01(x: float) -> tuple[float, float, float, float]:
    """``(J0, J1, Y0, Y1)`` at ``x > 0`` from a single pass."""
    x = _check_positive(x)
    if x <= _SERIES_MAX:
        j0, j1 = _series_j0_j1(x)
        y0, y1 = _series_y0_y1(x)
        return j0, j1, y0, y1
    if x <= _MILLER_MAX:
        return _miller_all(x)
    j0, y0 = _hankel(x, 0)
    j1, y1 = _hankel(x, 1)
    return j0, j1, y0, y1


def eval_j0_prime(x: float) -> float:
    return -eval_j1(x)


def eval_y0_prime(x: float) -> float:
    return -eval_y1(x)


# --------------------------------------------------------------------------
# Airy function
# --------------------------------------------------------------------------


def _maclaurin_airy(x: float) -> tuple[float, float]:
    """Maclaurin sums for (Ai, Ai') in 320-bit fixed point integers."""
    one = 1 << _FIXED_BITS
    xr = Fraction(x)
    n3 = xr.numerator**3
    d3 = xr.denominator**3
    # Ai = c1 f - c2 g with f = sum t_k, g = sum s_k, and
    # f' = sum 3k p_k, g' = sum (3k+1) q_k, all sharing the ratio x^3/(..)
    t = one
    s = one * xr.numerator // xr.denominator
    p = one * xr.numerator**2 // (6 * xr.denominator**2)
    q = one
    f, g, fp, gp = t, s, 3 * p, q
    k = 0
    while t or s or p or q:
        k += 1
        t = t * n3 // (d3 * (3 * k) * (3 * k - 1))
        s = s * n3 // (d3 * (3 * k + 1) * (3 * k))
        q = q * n3 // (d3 * (3 * k + 1) * (3 * k))
        f += t
        g += s
        gp += (3 * k + 1) * q
        if k >= 2:
            p = p * n3 // (d3 * (3 * k) * (3 * k - 1))
            fp += 3 * k * p
    ai = _AI0_FIXED * f - _AIP0_FIXED * g
    aip = _AI0_FIXED * fp - _AIP0_FIXED * gp
    return ai / (one * one), aip / (one * one)


@lru_cache(maxsize=None)
def _airy_uv(n: int) -> tuple[float, float]:
    if n == 0:
        return 1.0, 1.0
    u_prev, _ = _airy_uv(n - 1)
    u = u_prev * (6 * n - 5) * (6 * n - 3) * (6 * n - 1) / ((2 * n - 1) * 216.0 * n)
    v = -(6 * n + 1) / (6 * n - 1) * u
    return u, v


def _asym_sums(zeta: float, alternate: bool) -> tuple[float, float, float, float]:
    """Truncated sums of u_k/zeta^k and v_k/zeta^k.

    Returns (U_even, U_odd, V_even, V_odd) where even/odd index the power of
    ``1/zeta``; with ``alternate`` the k-th term of each parity class carries
    ``(-1)^k`` (oscillatory case).
    """
    ue = uo = ve = vo = 0.0
    prev = math.inf
    for k in range(0, 200):
        u, v = _airy_uv(k)
        zk = zeta**-k
        tu, tv = u * zk, v * zk
        mag = abs(tu) + abs(tv)
        if mag > prev:
            break
        prev = mag
        if alternate:
            sign = -1.0 if (k // 2) % 2 else 1.0
        else:
            sign = -1.0 if k % 2 else 1.0
        if k % 2 == 0:
            ue += sign * tu
            ve += sign * tv
        else:
            uo += sign * tu
            vo += sign * tv
        if mag < 1e-18:
            break
    return ue, uo, ve, vo


def _asym_airy(x: float) -> tuple[float, float]:
    if x > 0:
        zeta = 2.0 / 3.0 * x * math.sqrt(x)
        ue, uo, ve, vo = _asym_sums(zeta, alternate=False)
        pref = math.exp(-zeta) / (2.0 * math.sqrt(math.pi))
        q = x**0.25
        return pref / q * (ue + uo), -pref * q * (ve + vo)
    z = -x
    zeta = 2.0 / 3.0 * z * math.sqrt(z)
    ue, uo, ve, vo = _asym_sums(zeta, alternate=True)
    c = math.cos(zeta - math.pi / 4.0)
    s = math.sin(zeta - math.pi / 4.0)
    q = z**0.25
    ai = (c * ue + s * uo) / (math.sqrt(math.pi) * q)
    aip = q * (s * ve - c * vo) / math.sqrt(math.pi)
    return ai, aip


def _airy_pair(x: float) -> tuple[float, float]:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"Airy function needs a finite argument, got {x!r}")
    if _AIRY_NEG <= x <= _AIRY_POS:
        return _maclaurin_airy(x)
    return _asym_airy(x)


def eval_airy(x: float) -> float:
    """Airy function of the first kind ``Ai(x)``."""
    return _airy_pair(x)[0]


def eval_airy_prime(x: float) -> float:
    """Derivative ``Ai'(x)``."""
    return _airy_pair(x)[1]


# --------------------------------------------------------------------------
# Zeros
# --------------------------------------------------------------------------


def _refine_root(f, df, lo: float, hi: float) -> float:
    """Bisection down to 1e-6 then Newton, kept inside the bracket."""
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ArithmeticError(f"no sign change on [{lo}, {hi}]")
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    for _ in range(20):
        step = f(r) / df(r)
        r_new = min(max(r - step, lo), hi)
        if abs(r_new - r) <= 4e-16 * abs(r):
            r = r_new
            break
        r = r_new
    return r


def _bracket(f, guess: float, width: float) -> tuple[float, float]:
    lo, hi = guess - width, guess + width
    while (f(lo) > 0) == (f(hi) > 0):
        width *= 1.5
        lo, hi = guess - width, guess + width
    return lo, hi


@lru_cache(maxsize=1)
def j0_zeros() -> tuple[float, ...]:
    """The first ``ZERO_TABLE_CAPACITY`` positive zeros of ``J0``."""
    zeros = []
    for n in range(1, ZERO_TABLE_CAPACITY + 1):
        beta = (n - 0.25) * math.pi
        guess = beta + 1.0 / (8.0 * beta) - 31.0 / (384.0 * beta**3)
        lo, hi = _bracket(eval_j0, guess, 0.05)
        zeros.append(_refine_root(eval_j0, eval_j0_prime, lo, hi))
    return tuple(zeros)


@lru_cache(maxsize=1)
def airy_zeros() -> tuple[float, ...]:
    """The first ``ZERO_TABLE_CAPACITY`` zeros ``z`` of ``Ai(-z)``."""

    def f(z):
        return eval_airy(-z)

    def df(z):
        return -eval_airy_prime(-z)

    zeros = []
    for n in range(1, ZERO_TABLE_CAPACITY + 1):
        t = 3.0 * math.pi / 8.0 * (4 * n - 1)
        guess = t ** (2.0 / 3.0) * (1.0 + 5.0 / 48.0 * t**-2)
        lo, hi = _bracket(f, guess, 0.05)
        zeros.append(_refine_root(f, df, lo, hi))
    return tuple(zeros)


def _lookup(table: tuple[float, ...], n: int, name: str) -> float:
    if n < 1:
        raise ValueError(f"{name} index must be >= 1, got {n}")
    if n > len(table):
        raise CapacityError(f"{name} index {n} exceeds table capacity {len(table)}")
    return table[n - 1]


def j0_zero(n: int) -> float:
    """The n-th positive zero ``j_{0,n}`` of ``J0``."""
    return _lookup(j0_zeros(), n, "J0 zero")


def airy_zero(n: int) -> float:
    """The n-th zero of the reversed Airy function ``x -> Ai(-x)``."""
    return _lookup(airy_zeros(), n, "Airy zero")
