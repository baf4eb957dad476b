"""Closed-form asymptotic laws, counting staircases and localization diagnostics.

Two candidate second-order coefficients are carried side by side for the
small-aperture expansion of ``mu_n``:

* ``TheoremMain``  ``beta2 = (2 j)^{2/3} z_A(n) / pi^2``
* ``TheoremCone``  ``beta2 = (2 j^2)^{2/3} z_A(n) / pi^2``, obtained from the
  triangle expansion in the ``lambda`` scale through ``mu = 2 cos^2(t) lambda``.

Their ratio is ``j^{2/3}`` (``j`` the first zero of ``J0``); which one the
computed eigenvalues follow is decided numerically, never assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import specfun
from .assembly import ContractViolation, DofMap, evaluate, triangle_rule
from .geometry import Mesh

__all__ = [
    "Variant",
    "Direction",
    "ExpansionCoefficients",
    "AgmonWeightParams",
    "AgmonResult",
    "expansion_coefficients",
    "counting_asymptote",
    "counting_constant",
    "bridge_constant",
    "staircase",
    "jump_energies",
    "staircase_slope",
    "mu_two_term",
    "scale_mu_lambda",
    "lambda_delta_expansion",
    "agmon_weight",
    "agmon_ratio",
    "mass_fraction_beyond",
    "leakage_abscissa",
]


class Variant(str, Enum):
    MAIN = "TheoremMain"
    CONE = "TheoremCone"


class Direction(str, Enum):
    MU_TO_LAMBDA = "mu_to_lambda"
    LAMBDA_TO_MU = "lambda_to_mu"


@dataclass(frozen=True)
class ExpansionCoefficients:
    """``value ~ beta0 + beta2 * t^{2/3}`` (``t`` the aperture or ``h``)."""

    beta0: float
    beta2: float
    variant: Variant

    def __call__(self, t: float) -> float:
        return self.beta0 + self.beta2 * t ** (2.0 / 3.0)


def expansion_coefficients(n: int, variant: Variant | str = Variant.CONE, scale: str = "mu") -> ExpansionCoefficients:
    """Coefficients of the ``n``-th two-term expansion in the ``mu`` or ``lambda`` scale.

    In the ``lambda`` scale both are halved (``lambda = mu / (2 cos^2 t)``
    and ``cos t -> 1``).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    variant = Variant(variant)
    j = specfun.j0_zero(1)
    z = specfun.airy_zero(n)
    pi2 = math.pi**2
    base = 2.0 * j if variant is Variant.MAIN else 2.0 * j * j
    beta0 = j * j / pi2
    beta2 = base ** (2.0 / 3.0) * z / pi2
    if scale == "lambda":
        return ExpansionCoefficients(0.5 * beta0, 0.5 * beta2, variant)
    if scale != "mu":
        raise ValueError(f"scale must be 'mu' or 'lambda', got {scale!r}")
    return ExpansionCoefficients(beta0, beta2, variant)


@dataclass(frozen=True)
class AgmonWeightParams:
    """Piecewise Agmon weight in the scaled longitudinal variable.

    ``Phi = eta0 |x|^{3/2}`` for ``x <= 0``, ``eta1 int_0^x dt / sqrt|ln t|``
    on ``(0, x1]`` and ``eta2 (x - x1) + Phi(x1)`` beyond; continuous by
    construction. Requires ``0 < x1 < 1`` (the middle piece needs
    ``ln t < 0``).
    """

    eta0: float = 0.1
    eta1: float = 0.1
    eta2: float = 0.1
    x1: float = 0.25

    def __post_init__(self):
        if min(self.eta0, self.eta1, self.eta2) < 0.0:
            raise ValueError("Agmon parameters must be non-negative")
        if not 0.0 < self.x1 < 1.0:
            raise ValueError("x1 must lie in (0, 1)")


def _log_integral(x: np.ndarray) -> np.ndarray:
    """``int_0^x dt / sqrt(-ln t)`` for ``0 <= x < 1``.

    With ``t = e^{-u^2}`` the integral is ``sqrt(pi) erfc(sqrt(-ln x))``.
    """
    from scipy.special import erfc

    x = np.asarray(x, float)
    out = np.zeros_like(x)
    pos = x > 0.0
    out[pos] = math.sqrt(math.pi) * erfc(np.sqrt(-np.log(x[pos])))
    return out


def agmon_weight(x, params: AgmonWeightParams) -> np.ndarray:
    x = np.asarray(x, float)
    phi1_x1 = params.eta1 * float(_log_integral(np.array([params.x1]))[0])
    out = params.eta0 * np.abs(np.minimum(x, 0.0)) ** 1.5
    mid = (x > 0.0) & (x <= params.x1)
    out = np.where(mid, params.eta1 * _log_integral(np.clip(x, 0.0, params.x1)), out)
    return np.where(x > params.x1, params.eta2 * (x - params.x1) + phi1_x1, out)


@dataclass(frozen=True)
class AgmonResult:
    ratio: float
    clamped: bool


# --------------------------------------------------------------------------
# Closed forms
# --------------------------------------------------------------------------


def _check_theta(theta: float) -> None:
    if not 0.0 < theta < math.pi / 2:
        raise ValueError(f"aperture must lie in (0, pi/2), got {theta!r}")


def counting_constant(theta: float) -> float:
    """``cot(t) / (4 pi)``, the coefficient of ``|ln E|`` in the counting law."""
    _check_theta(theta)
    return 1.0 / (4.0 * math.pi * math.tan(theta))


def bridge_constant(theta: float) -> float:
    """``(1/2pi) sqrt(c - 1/4)`` with ``c = 1/(4 sin^2 t)``; equals ``counting_constant``."""
    _check_theta(theta)
    c = 1.0 / (4.0 * math.sin(theta) ** 2)
    return math.sqrt(c - 0.25) / (2.0 * math.pi)


def counting_asymptote(theta: float, E) -> float | np.ndarray:
    """``cot(t) / (4 pi) |ln E|`` for ``0 < E < 1``."""
    E_arr = np.asarray(E, float)
    if np.any((E_arr <= 0.0) | (E_arr >= 1.0)):
        raise ValueError("E must lie in (0, 1)")
    out = counting_constant(theta) * np.abs(np.log(E_arr))
    return float(out) if np.ndim(out) == 0 else out


def staircase(mu_values, E_grid) -> np.ndarray:
    """``N(E) = #{j : mu_j < 1 - E}`` for every ``E`` of the grid."""
    mu = np.asarray(mu_values, float)
    if mu.size and np.any(mu >= 1.0):
        raise ContractViolation("staircase input contains values at or above the threshold 1")
    if mu.size > 1 and np.any(np.diff(mu) < 0.0):
        raise ValueError("mu values must be sorted ascending")
    E = np.asarray(E_grid, float)
    return np.searchsorted(mu, 1.0 - E, side="left")


def jump_energies(mu_values) -> np.ndarray:
    """Jump locations ``E_j = 1 - mu_j`` of the staircase."""
    return 1.0 - np.asarray(mu_values, float)


def staircase_slope(mu_values) -> float:
    """Least-squares slope of ``N`` against ``|ln E|`` at the jump midpoints.

    Halfway up the ``j``-th jump the staircase takes the value ``j - 1/2``.
    """
    mu = np.asarray(mu_values, float)
    if mu.size < 2:
        raise ValueError("need at least two eigenvalues")
    staircase(mu, [])  # validates the input
    E = jump_energies(mu)
    N = np.arange(1, len(mu) + 1) - 0.5
    return float(np.polyfit(np.abs(np.log(E)), N, 1)[0])


def mu_two_term(n: int, theta: float, variant: Variant | str = Variant.CONE) -> float:
    """``j^2/pi^2 + beta2 t^{2/3}`` with ``beta2`` of the chosen variant."""
    if not theta >= 0.0:
        raise ValueError("aperture must be non-negative")
    return expansion_coefficients(n, variant, "mu")(theta)


def scale_mu_lambda(value, theta: float, direction: Direction | str = Direction.MU_TO_LAMBDA):
    """Convert between ``mu`` (aperture scale) and ``lambda`` (``h = tan t`` scale)."""
    _check_theta(theta)
    f = 2.0 * math.cos(theta) ** 2
    if Direction(direction) is Direction.MU_TO_LAMBDA:
        return value / f
    return value * f


def lambda_delta_expansion(n: int, h: float) -> float:
    """``j^2/(2 pi^2) + (2 j^2)^{2/3} / (2 pi^2) z_A(n) h^{2/3}``."""
    if not h > 0.0:
        raise ValueError("h must be positive")
    return expansion_coefficients(n, Variant.CONE, "lambda")(h)


# --------------------------------------------------------------------------
# Localization diagnostics on scaled meshes
# --------------------------------------------------------------------------

_EXP_CAP = 700.0


def _full_vector(eigvec, dofs: DofMap, free) -> np.ndarray:
    v = np.asarray(eigvec, float)
    if free is None:
        if len(v) != dofs.n_dofs:
            raise ValueError("eigenvector length differs from the dof count; pass the free dof indices")
        return v
    full = np.zeros(dofs.n_dofs)
    full[np.asarray(free)] = v
    return full


def _quadrature(mesh: Mesh, dofs: DofMap, coeffs: np.ndarray, degree: int = 6):
    pts, wts = triangle_rule(degree)
    T = mesh.n_triangles
    nq = len(pts)
    elems = np.repeat(np.arange(T), nq)
    ref = np.tile(pts, (T, 1))
    val, grad = evaluate(mesh, dofs, coeffs, elems, ref)
    p = mesh.nodes[mesh.triangles]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    xy = p[:, 0][:, None, :] + np.einsum("tij,qj->tqi", J, pts)
    dA = (det[:, None] * wts[None, :]).ravel()
    return xy.reshape(-1, 2), val, grad, dA


def agmon_ratio(eigvec, mesh: Mesh, h: float, params: AgmonWeightParams, dofs: DofMap, free=None) -> AgmonResult:
    """``int e^{2 Phi/h} (psi^2 + (h d_x psi)^2) y / int psi^2 y`` on a scaled mesh.

    The exponent is capped at 700; a capped evaluation is reported through
    ``clamped`` and must not be used as a boundedness witness.
    """
    if not h > 0.0:
        raise ValueError("h must be positive")
    coeffs = _full_vector(eigvec, dofs, free)
    xy, val, grad, dA = _quadrature(mesh, dofs, coeffs, 6)
    y = xy[:, 1]
    expo = 2.0 * agmon_weight(xy[:, 0], params) / h
    clamped = bool(np.any(expo > _EXP_CAP))
    expo = np.minimum(expo, _EXP_CAP)
    num = np.sum(np.exp(expo) * (val**2 + (h * grad[:, 0]) ** 2) * y * dA)
    den = np.sum(val**2 * y * dA)
    return AgmonResult(float(num / den), clamped)


def _clip_triangle(P: np.ndarray, x0: float) -> list[np.ndarray]:
    """Sub-triangles of the part ``x > x0`` of triangle ``P`` (3, 2)."""
    poly = []
    for i in range(3):
        a, b = P[i], P[(i + 1) % 3]
        ina, inb = a[0] > x0, b[0] > x0
        if ina:
            poly.append(a)
        if ina != inb:
            t = (x0 - a[0]) / (b[0] - a[0])
            poly.append(a + t * (b - a))
    return [np.array([poly[0], poly[k], poly[k + 1]]) for k in range(1, len(poly) - 1)]


class _MassProfile:
    """Per-triangle ``psi^2 y`` masses, reused across many cut positions."""

    def __init__(self, coeffs: np.ndarray, mesh: Mesh, dofs: DofMap):
        self.mesh, self.dofs, self.coeffs = mesh, dofs, coeffs
        xy, val, _, dA = _quadrature(mesh, dofs, coeffs, 5)
        T = mesh.n_triangles
        self.contrib = (val**2 * xy[:, 1] * dA).reshape(T, -1).sum(axis=1)
        self.total = float(self.contrib.sum())
        self.p = mesh.nodes[mesh.triangles]
        self.xmin = self.p[:, :, 0].min(axis=1)
        self.xmax = self.p[:, :, 0].max(axis=1)
        self.rule = triangle_rule(5)

    def fraction(self, x0: float) -> float:
        beyond = float(np.sum(self.contrib[self.xmin >= x0]))
        pts, wts = self.rule
        for t in np.flatnonzero((self.xmin < x0) & (self.xmax > x0)):
            P = self.p[t]
            Jinv = np.linalg.inv(np.column_stack([P[1] - P[0], P[2] - P[0]]))
            for sub in _clip_triangle(P, x0):
                Js = np.column_stack([sub[1] - sub[0], sub[2] - sub[0]])
                det = abs(Js[0, 0] * Js[1, 1] - Js[0, 1] * Js[1, 0])
                if det == 0.0:
                    continue
                phys = sub[0] + pts @ Js.T
                ref = (phys - P[0]) @ Jinv.T
                v, _ = evaluate(self.mesh, self.dofs, self.coeffs, np.full(len(pts), t), ref)
                beyond += float(np.sum(wts * det * v**2 * phys[:, 1]))
        return min(max(beyond / self.total, 0.0), 1.0)


def mass_fraction_beyond(eigvec, mesh: Mesh, x0: float, dofs: DofMap, free=None) -> float:
    """Fraction of ``int psi^2 y`` over ``{x > x0}``.

    Cut triangles are clipped exactly and integrated with a rule exact for
    the polynomial integrand.
    """
    return _MassProfile(_full_vector(eigvec, dofs, free), mesh, dofs).fraction(float(x0))


def leakage_abscissa(eigvec, mesh: Mesh, dofs: DofMap, free=None, level: float = 1e-2, tol: float = 1e-10) -> float:
    """Abscissa where the mass fraction beyond ``x`` drops to ``level`` (bisection)."""
    prof = _MassProfile(_full_vector(eigvec, dofs, free), mesh, dofs)
    lo = float(mesh.nodes[:, 0].min())
    hi = float(mesh.nodes[:, 0].max())
    if not prof.fraction(lo) > level:
        raise ValueError("mass fraction never exceeds the requested level")
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if prof.fraction(mid) > level:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
