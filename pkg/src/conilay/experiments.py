"""Mesh-and-solve pipelines shared by the command line and the acceptance suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import asymptotics, eigensolve
from .assembly import Coords, FiberProblem, apply_dirichlet, assemble
from .geometry import Mesh, MeshParams, Shape, build_domain, generate_mesh

__all__ = [
    "MeshConfig",
    "FiberSolution",
    "meridian_config",
    "hat_config",
    "scaled_config",
    "meridian_mesh",
    "hat_mesh",
    "scaled_mesh",
    "solve_fiber",
    "solve_meridian",
    "solve_hat",
    "solve_scaled",
    "below_threshold_spectrum",
    "small_angle_mu1",
    "counting_config",
    "with_truncation",
]


@dataclass(frozen=True)
class MeshConfig:
    """Truncation plus graded-mesh parameters (lengths in working coordinates)."""

    truncation: float
    h_near: float
    ratio: float = 1.0
    n_transverse: int | None = None
    near_extent: float = math.pi
    h_max: float | None = None
    left_ratio: float | None = None
    transverse_ratio: float = 1.0
    max_cells: int = 600_000

    def params(self) -> MeshParams:
        return MeshParams(
            self.h_near,
            ratio=self.ratio,
            max_cells=self.max_cells,
            n_transverse=self.n_transverse,
            near_extent=self.near_extent,
            h_max=self.h_max,
            left_ratio=self.left_ratio,
            transverse_ratio=self.transverse_ratio,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "MeshConfig":
        return cls(**d)


def meridian_config() -> MeshConfig:
    """Graded rotated-coordinate mesh: about 50k free dofs (degree 2) at 2.5 degrees."""
    return MeshConfig(truncation=100.0, h_near=0.1, ratio=1.01, n_transverse=20, near_extent=10.0)


def hat_config() -> MeshConfig:
    """Aperture-independent mesh of ``Omega(pi/4)`` for sweeps over the aperture."""
    return MeshConfig(truncation=40.0, h_near=0.25, ratio=1.1, n_transverse=12, near_extent=4.0)


def scaled_config(h: float) -> MeshConfig:
    """Scaled-coordinate mesh refined toward the singular vertex at the origin.

    Column spacing is geometric from ``h * 2.3e-4`` at ``x = 0`` up to
    ``h^{2/3} / 20``; transverse layers thicken away from the lower boundary.
    """
    scale = h ** (2.0 / 3.0)
    return MeshConfig(
        truncation=8.0 * scale,
        h_near=2.3e-4 * h,
        ratio=1.15,
        n_transverse=48,
        near_extent=0.0,
        h_max=scale / 20.0,
        transverse_ratio=1.1,
    )


def meridian_mesh(theta: float, cfg: MeshConfig) -> Mesh:
    return generate_mesh(build_domain(theta, cfg.truncation, Shape.MERIDIAN_GUIDE), cfg.params())


def hat_mesh(cfg: MeshConfig) -> Mesh:
    return generate_mesh(build_domain(math.pi / 4, cfg.truncation, Shape.MERIDIAN_GUIDE), cfg.params())


def scaled_mesh(cfg: MeshConfig, triangle: bool = False) -> Mesh:
    """Scaled guide (or, with ``triangle``, its ``x < 0`` end cut from the same columns)."""
    shape = Shape.SCALED_TRIANGLE if triangle else Shape.SCALED_GUIDE
    trunc = None if triangle else cfg.truncation
    return generate_mesh(build_domain(math.pi / 4, trunc, shape), cfg.params())


@dataclass
class FiberSolution:
    result: eigensolve.EigenResult
    mesh: Mesh
    problem: FiberProblem
    free: np.ndarray
    dofs: object
    K: object = field(repr=False, default=None)
    M: object = field(repr=False, default=None)

    @property
    def values(self) -> np.ndarray:
        return self.result.values

    @property
    def n_dofs(self) -> int:
        return len(self.free)


def solve_fiber(problem: FiberProblem, k: int, tol: float = 1e-10, shift: float | None = None, threshold=None) -> FiberSolution:
    A = assemble(problem)
    R = apply_dirichlet(A.K, A.M, A.dofs, problem.m, assembled_m=A.m)
    res = eigensolve.smallest_eigenpairs(R.K, R.M, k, tol=tol, shift=shift, threshold=threshold)
    return FiberSolution(res, problem.mesh, problem, R.free, A.dofs, R.K, R.M)


def solve_meridian(theta: float, k: int, cfg: MeshConfig | None = None, m: int = 0, degree: int = 2, tol: float = 1e-10) -> FiberSolution:
    mesh = meridian_mesh(theta, cfg or meridian_config())
    return solve_fiber(FiberProblem(m, theta, mesh, Coords.ROTATED, degree=degree), k, tol, threshold=1.0)


def solve_hat(theta: float, k: int, mesh: Mesh, degree: int = 2, tol: float = 1e-10) -> FiberSolution:
    return solve_fiber(FiberProblem(0, theta, mesh, Coords.HAT, degree=degree), k, tol, threshold=1.0)


def solve_scaled(h: float, k: int, mesh: Mesh, degree: int = 2, tol: float = 1e-10) -> FiberSolution:
    """Lowest ``lambda_n(h)`` of the scaled operator on ``mesh`` (guide or triangle)."""
    theta = math.atan(h)
    return solve_fiber(FiberProblem(0, theta, mesh, Coords.SCALED, h=h, degree=degree), k, tol, threshold=0.5)


def below_threshold_spectrum(K, M, decades: int = 9, threshold: float = 1.0, tol: float = 1e-10) -> eigensolve.EigenResult:
    """Every eigenpair below ``threshold`` down to ``threshold - 10^-decades``.

    The range is sliced into windows ``[t - 10^-d, t - 10^-(d+1))`` (the first
    window starts at 0), each resolved by spectrum slicing.
    """
    vals, vecs, res = [], [], []
    edges = [0.0] + [threshold - 10.0 ** -(d + 1) for d in range(decades)]
    for lo, hi in zip(edges[:-1], edges[1:]):
        w = eigensolve.eigenpairs_in_window(K, M, lo, hi, tol)
        vals.append(w.values)
        vecs.append(w.vectors)
        res.append(w.residuals)
    values = np.concatenate(vals)
    return eigensolve.EigenResult(
        values,
        np.hstack(vecs),
        np.concatenate(res),
        dict(method="windows", edges=edges, unresolved=int(eigensolve.count_below(K, M, threshold)) - len(values)),
        values < threshold,
    )


def counting_config() -> MeshConfig:
    """Long, thin-banded mesh resolving the 5 degree staircase down to ``E ~ 1e-8``."""
    return MeshConfig(truncation=40000.0, h_near=0.3, ratio=1.08, n_transverse=96, near_extent=5.0, left_ratio=1.0)


def small_angle_mu1(theta: float, cfg: MeshConfig | None = None) -> tuple[float, int]:
    """``mu_1(theta)`` through the scaled problem with ``h = tan theta`` and the free dof count."""
    h = math.tan(theta)
    sol = solve_scaled(h, 1, scaled_mesh(cfg or scaled_config(h)))
    return float(asymptotics.scale_mu_lambda(sol.values[0], theta, "lambda_to_mu")), sol.n_dofs


def with_truncation(cfg: MeshConfig, truncation: float) -> MeshConfig:
    return replace(cfg, truncation=truncation)

