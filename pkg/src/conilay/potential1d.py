"""Born-Oppenheimer effective potential and one-dimensional model operators.

The effective potential ``v(x)`` is the lowest eigenvalue of the transverse
operator ``-(1/y) d/dy (y d/dy)`` on the cross-section ``max(0, x) < y <
x + pi sqrt(2)`` of the scaled guide, Dirichlet at both ends. For ``x <= 0``
the cross-section is a disc and ``v = j^2 / (x + pi sqrt(2))^2``; for
``x > 0`` it is an annulus and ``v`` solves the Bessel cross-product
equation.

The 1D models are discretized with the three-point finite-difference
stencil on a grid that is uniform in a model-dependent variable ``t``
(``x = e^t`` for the inverse-square family, so that the log-periodic
oscillations near the threshold are resolved evenly). With lumped masses
this gives a symmetric tridiagonal pencil.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import specfun
from .geometry import SQRT2PI

__all__ = [
    "PotentialSample",
    "BornOppenheimer",
    "InverseSquare",
    "HatQ",
    "CheckQ",
    "Model1DProblem",
    "Spectrum1D",
    "BracketError",
    "v_min",
    "cross_product",
    "effective_potential",
    "effective_potential_array",
    "log_constant",
    "agmon_c0",
    "potential_log_asymptote",
    "verified_x1",
    "smoothstep",
    "partition_w",
    "solve_1d",
    "count_below",
    "count_curve",
    "count_slope",
    "jump_slope",
    "write_potential_csv",
]


class BracketError(ArithmeticError):
    """The implicit equation for ``v`` has no sign change in the guaranteed bracket."""


@dataclass(frozen=True)
class PotentialSample:
    x: float
    v: float
    residual: float


# --------------------------------------------------------------------------
# Effective potential
# --------------------------------------------------------------------------


def v_min() -> float:
    """``j^2 / (2 pi^2)``, the value at (and minimum over) ``x = 0``."""
    return specfun.j0_zero(1) ** 2 / (2.0 * math.pi**2)


def cross_product(v: float, x: float) -> float:
    """``J0(k x) Y0(k (x+a)) - J0(k (x+a)) Y0(k x)`` with ``k = sqrt(v)``, ``a = pi sqrt(2)``."""
    k = math.sqrt(v)
    p, q = k * x, k * (x + SQRT2PI)
    return specfun.eval_j0(p) * specfun.eval_y0(q) - specfun.eval_j0(q) * specfun.eval_y0(p)


def _cross_and_dv(v: float, x: float) -> tuple[float, float]:
    """Cross product and its ``v``-derivative (``J0' = -J1``, ``Y0' = -Y1``)."""
    k = math.sqrt(v)
    p, q = k * x, k * (x + SQRT2PI)
    j0p, j1p, y0p, y1p = specfun.bessel01(p)
    j0q, j1q, y0q, y1q = specfun.bessel01(q)
    f = j0p * y0q - j0q * y0p
    dk = x * (-j1p * y0q + y1p * j0q) + (x + SQRT2PI) * (-j0p * y1q + j1q * y0p)
    return f, dk / (2.0 * k)


def _solve_annulus(x: float, lo: float, hi: float) -> tuple[float, float]:
    f_lo = cross_product(lo, x)
    f_hi = cross_product(hi, x)
    if f_lo == 0.0:
        return lo, 0.0
    if f_lo * f_hi > 0.0:
        raise BracketError(f"no sign change of the cross product on [{lo!r}, {hi!r}] at x={x!r} ({f_lo:.3e}, {f_hi:.3e})")
    # bisection to 1e-6 then Newton kept inside the bracket
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        f_mid = cross_product(mid, x)
        if f_mid == 0.0:
            return mid, 0.0
        if f_mid * f_lo < 0.0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    v = 0.5 * (lo + hi)
    for _ in range(50):
        f, df = _cross_and_dv(v, x)
        if f == 0.0:
            break
        if f * f_lo < 0.0:
            hi = v
        else:
            lo, f_lo = v, f
        step = f / df
        v_new = v - step
        if not lo <= v_new <= hi:
            v_new = 0.5 * (lo + hi)
        if abs(v_new - v) <= 1e-15 * v:
            v = v_new
            break
        v = v_new
    return v, abs(cross_product(v, x))


def effective_potential(x: float, lower: float | None = None, upper: float | None = None) -> PotentialSample:
    """Lowest transverse eigenvalue ``v(x)`` of the scaled guide.

    For ``x > 0`` the root of the cross product is bracketed in
    ``[j^2/(2 pi^2), 1/2]`` (the only root there: higher annulus modes lie
    above ``1/2``). ``lower``/``upper`` optionally narrow the bracket; a
    narrowed bracket without a sign change falls back to the full one.
    """
    x = float(x)
    if not x > -SQRT2PI:
        raise ValueError(f"effective potential needs x > -pi*sqrt(2), got {x!r}")
    j = specfun.j0_zero(1)
    if x <= 0.0:
        return PotentialSample(x, j * j / (x + SQRT2PI) ** 2, 0.0)
    lo = v_min() * (1.0 - 1e-12)
    hi = 0.5 + 1e-12
    if lower is not None or upper is not None:
        lo_n = max(lo, lower * (1.0 - 1e-12)) if lower is not None else lo
        hi_n = min(hi, upper) if upper is not None else hi
        if lo_n < hi_n and cross_product(lo_n, x) * cross_product(hi_n, x) < 0.0:
            lo, hi = lo_n, hi_n
    v, res = _solve_annulus(x, lo, hi)
    return PotentialSample(x, v, res)


def effective_potential_array(xs) -> tuple[np.ndarray, np.ndarray]:
    """``(v, residual)`` on an array of abscissae.

    Points are visited in increasing order; since ``v`` is non-decreasing
    on ``x > 0`` the previous root bounds the next one from below.
    """
    xs = np.asarray(xs, float)
    flat = xs.ravel()
    order = np.argsort(flat, kind="stable")
    v = np.empty_like(flat)
    res = np.empty_like(flat)
    prev = None
    for i in order:
        xi = float(flat[i])
        s = _MEMO.get(xi)
        if s is None:
            if xi > 0.0 and prev is not None:
                s = effective_potential(xi, prev, prev + 1e-3 + 2.0 * (0.5 - prev) * 0.05)
            else:
                s = effective_potential(xi)
            if len(_MEMO) < 1_000_000:
                _MEMO[xi] = s
        v[i], res[i] = s.v, s.residual
        if xi > 0.0:
            prev = s.v
    return v.reshape(xs.shape), res.reshape(xs.shape)


_MEMO: dict[float, PotentialSample] = {}


@lru_cache(maxsize=1)
def log_constant() -> float:
    """``(j / 2 pi) |Y0(j)| / |J0'(j)|`` for the first zero ``j`` of ``J0``."""
    j = specfun.j0_zero(1)
    return j / (2.0 * math.pi) * abs(specfun.eval_y0(j)) / abs(specfun.eval_j0_prime(j))


def agmon_c0() -> float:
    """Half the logarithmic constant: the lower-bound constant used near ``0+``."""
    return 0.5 * log_constant()


def potential_log_asymptote(x: float) -> float:
    """``v(0) + log_constant() / |ln x|``, the leading behaviour of ``v`` as ``x -> 0+``."""
    if not 0.0 < x < 1.0:
        raise ValueError(f"the logarithmic asymptote needs 0 < x < 1, got {x!r}")
    return v_min() + log_constant() / abs(math.log(x))


def verified_x1(n: int = 400, x_max: float = 0.999) -> float:
    """Largest grid point ``x1`` with ``v >= v(0) + c0/|ln x|`` at every grid point of ``(0, x1]``.

    The grid is geometric from ``1e-12`` to ``x_max``.
    """
    xs = np.geomspace(1e-12, x_max, n)
    v, _ = effective_potential_array(xs)
    bound = v_min() + agmon_c0() / np.abs(np.log(xs))
    ok = v >= bound
    if not ok[0]:
        raise ArithmeticError("lower bound fails at the smallest grid point")
    bad = np.flatnonzero(~ok)
    last = (bad[0] - 1) if len(bad) else len(xs) - 1
    return float(xs[last])


def write_potential_csv(path, xs, header: list[str] | None = None) -> None:
    v, res = effective_potential_array(xs)
    with open(path, "w", newline="") as fh:
        for line in header or []:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["x", "v", "residual"])
        for row in zip(np.asarray(xs, float), v, res):
            w.writerow([repr(float(c)) for c in row])


# --------------------------------------------------------------------------
# 1D potentials
# --------------------------------------------------------------------------


def smoothstep(t, kind: str = "quintic"):
    """``S(t)`` rising from 0 to 1 on ``[0, 1]`` and its derivative."""
    t = np.clip(np.asarray(t, float), 0.0, 1.0)
    if kind == "quintic":
        return t**3 * (10.0 - 15.0 * t + 6.0 * t * t), 30.0 * t * t * (1.0 - t) ** 2
    if kind == "cubic":
        return t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t)
    raise ValueError(f"unknown smoothstep {kind!r}")


def partition_w(s, kind: str = "quintic"):
    """``W = chi0'^2 + chi1'^2`` for ``chi0 = 1 - S(s - 1)``, ``chi1 = sqrt(1 - chi0^2)``.

    Since ``chi1' = -chi0 chi0' / chi1``, ``W = chi0'^2 / (1 - chi0^2)``.
    """
    s = np.asarray(s, float)
    S, dS = smoothstep(s - 1.0, kind)
    denom = S * (2.0 - S)  # 1 - (1 - S)^2
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(denom > 0.0, dS * dS / np.where(denom > 0.0, denom, 1.0), 0.0)
    # limit at s = 1+: quintic -> 0, cubic -> 6
    if kind == "cubic":
        w = np.where((s >= 1.0) & (denom == 0.0) & (s < 1.5), 6.0, w)
    return np.where((s < 1.0) | (s > 2.0), 0.0, w)


@dataclass(frozen=True)
class BornOppenheimer:
    """``v(x)`` on ``(-pi sqrt 2, inf)``; threshold ``1/2``."""

    threshold = 0.5

    def potential(self, x):
        return effective_potential_array(x)[0]

    def grid(self, a: float, b: float, n: int) -> np.ndarray:
        return np.linspace(a, b, n + 1)


@dataclass(frozen=True)
class InverseSquare:
    """``-c / x^2`` on ``(1, inf)``; threshold 0. ``c = 0`` is the free particle."""

    c: float
    threshold = 0.0

    def __post_init__(self):
        if not self.c >= 0.0:
            raise ValueError("c must be non-negative")

    def potential(self, x):
        x = np.asarray(x, float)
        return -self.c / (x * x)

    def grid(self, a: float, b: float, n: int) -> np.ndarray:
        return np.exp(np.linspace(math.log(a), math.log(b), n + 1))


@dataclass(frozen=True)
class HatQ:
    """Lower-bound model of the counting argument, in the rotated variable ``s``.

    Potential ``-1 / (4 (s sin t + pi cos t)^2)`` on ``(1, inf)``. Under
    ``sigma = (s + pi cot t) / (1 + pi cot t)`` it becomes
    ``(1 + pi cot t)^{-2}`` times ``InverseSquare(1 / (4 sin^2 t))`` in
    ``sigma``; the grid is uniform in ``ln sigma`` so that the identity also
    holds for the discretizations.
    """

    theta: float
    threshold = 0.0

    @property
    def stretch(self) -> float:
        return 1.0 + math.pi / math.tan(self.theta)

    @property
    def c(self) -> float:
        return 1.0 / (4.0 * math.sin(self.theta) ** 2)

    def potential(self, s):
        s = np.asarray(s, float)
        return -1.0 / (4.0 * (s * math.sin(self.theta) + math.pi * math.cos(self.theta)) ** 2)

    def grid(self, a: float, b: float, n: int) -> np.ndarray:
        L = self.stretch
        off = L - 1.0
        sa, sb = (a + off) / L, (b + off) / L
        return L * np.exp(np.linspace(math.log(sa), math.log(sb), n + 1)) - off

    def to_sigma(self, s):
        return (np.asarray(s, float) + self.stretch - 1.0) / self.stretch


@dataclass(frozen=True)
class CheckQ:
    """Upper-bound model: ``-1/(4 s^2 sin^2 t) - W(s)`` on ``(1, inf)``."""

    theta: float
    smoothing: str = "quintic"
    threshold = 0.0

    @property
    def c(self) -> float:
        return 1.0 / (4.0 * math.sin(self.theta) ** 2)

    def potential(self, s):
        s = np.asarray(s, float)
        return -self.c / (s * s) - partition_w(s, self.smoothing)

    def grid(self, a: float, b: float, n: int) -> np.ndarray:
        return np.exp(np.linspace(math.log(a), math.log(b), n + 1))


@dataclass(frozen=True)
class Model1DProblem:
    """``-h^2 d^2/dx^2 + V`` on ``(a, b)`` with Dirichlet ends.

    ``b=None`` lets the counting routines pick the truncation from the
    requested energy resolution.
    """

    interval: tuple[float, float | None]
    potential: BornOppenheimer | InverseSquare | HatQ | CheckQ
    h: float = 1.0
    grid_n: int = 2000

    def __post_init__(self):
        if self.grid_n < 100:
            raise ValueError("grid_n must be at least 100")
        if not self.h > 0.0:
            raise ValueError("h must be positive")
        a, b = self.interval
        if b is not None and not b > a:
            raise ValueError("empty interval")
        if isinstance(self.potential, BornOppenheimer) and not a > -SQRT2PI:
            raise ValueError("Born-Oppenheimer interval must start inside (-pi*sqrt(2), inf)")

    @classmethod
    def born_oppenheimer(cls, h: float, b: float = 10.0, grid_n: int = 2000, eps: float = 1e-6):
        return cls((-SQRT2PI + eps, b), BornOppenheimer(), h, grid_n)

    @property
    def threshold(self) -> float:
        return self.potential.threshold

    def with_end(self, b: float) -> "Model1DProblem":
        return Model1DProblem((self.interval[0], b), self.potential, self.h, self.grid_n)

    def pencil(self, n: int | None = None):
        """Diagonal, off-diagonal of ``M^{-1/2} (K + V M) M^{-1/2}`` and the interior nodes."""
        a, b = self.interval
        if b is None:
            raise ValueError("interval end must be fixed before discretizing")
        x = self.potential.grid(a, b, n or self.grid_n)
        d = np.diff(x)
        xi = x[1:-1]
        m = 0.5 * (d[:-1] + d[1:])
        h2 = self.h * self.h
        diag = h2 * (1.0 / d[:-1] + 1.0 / d[1:]) / m + self.potential.potential(xi)
        off = -h2 / d[1:-1] / np.sqrt(m[:-1] * m[1:])
        return diag, off, xi


@dataclass
class Spectrum1D:
    """Extrapolated eigenvalues; ``n_below`` of them lie below the threshold on both grids."""

    values: np.ndarray
    threshold: float
    n_below: int
    coarse: np.ndarray
    fine: np.ndarray

    @property
    def partial(self) -> bool:
        return self.n_below < len(self.values)

    @property
    def bound_states(self) -> np.ndarray:
        return self.values[: self.n_below]

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def _lowest(problem: Model1DProblem, k: int, n: int) -> np.ndarray:
    diag, off, _ = problem.pencil(n)
    k = min(k, len(diag))
    return eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, k - 1))


def solve_1d(problem: Model1DProblem, k: int) -> Spectrum1D:
    """``k`` lowest eigenvalues, Richardson-extrapolated from grids ``n`` and ``2n``.

    Values at or above the model threshold are discretization artefacts of
    the truncated interval; ``partial`` flags that fewer than ``k`` values lie
    below it on both grids.
    """
    if k < 1:
        raise ValueError("k must be positive")
    coarse = _lowest(problem, k, problem.grid_n)
    fine = _lowest(problem, k, 2 * problem.grid_n)
    thr = problem.threshold
    below = min(int(np.sum(coarse < thr)), int(np.sum(fine < thr)))
    values = (4.0 * fine - coarse) / 3.0
    return Spectrum1D(values, thr, below, coarse, fine)


def _resolution_end(problem: Model1DProblem, E: float) -> float:
    return problem.interval[0] + 10.0 * problem.h / math.sqrt(E)


def count_below(problem: Model1DProblem, E: float) -> int:
    """Number of discrete eigenvalues below ``threshold - E``.

    The interval is truncated at ``a + 10 h / sqrt(E)`` when open; a fixed
    end that is shorter raises, naming the smallest resolvable ``E``.
    """
    return int(count_curve(problem, [E])[0])


def count_curve(problem: Model1DProblem, Es) -> np.ndarray:
    """Counts below ``threshold - E`` for every ``E`` from one discretization."""
    Es = np.asarray(Es, float)
    if np.any(Es <= 0.0):
        raise ValueError("E must be positive")
    E_min = float(Es.min())
    a, b = problem.interval
    need = _resolution_end(problem, E_min)
    if b is None:
        problem = problem.with_end(need)
    elif b < need * (1.0 - 1e-12):
        floor = (10.0 * problem.h / (b - a)) ** 2
        raise ValueError(f"E={E_min:g} is below the resolvable floor {floor:.3e} of the interval (a, {b:g}]")
    diag, off, _ = problem.pencil()
    evs = eigh_tridiagonal(diag, off, eigvals_only=True, select="v", select_range=(-np.inf, problem.threshold))
    return np.searchsorted(np.sort(evs), problem.threshold - Es, side="left")


def count_slope(problem: Model1DProblem, E_min: float, E_max: float = 0.1, n: int = 60) -> float:
    """Least-squares slope of ``N(E)`` against ``|ln E|`` on a log-uniform grid of ``[E_min, E_max]``."""
    Es = np.geomspace(E_min, E_max, n)
    counts = count_curve(problem, Es)
    return float(np.polyfit(np.abs(np.log(Es)), counts, 1)[0])


def jump_slope(E_jumps) -> float:
    """Least-squares slope of ``N`` against ``|ln E|`` at the jump midpoints.

    ``E_jumps`` are the distances ``E_j`` to the threshold (any order); the
    staircase takes the value ``j - 1/2`` halfway up its j-th jump.
    """
    E = np.sort(np.asarray(E_jumps, float))[::-1]
    if len(E) < 2:
        raise ValueError("need at least two jumps")
    L = np.abs(np.log(E))
    N = np.arange(1, len(E) + 1) - 0.5
    return float(np.polyfit(L, N, 1)[0])
