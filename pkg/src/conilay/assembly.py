"""Weighted stiffness and mass matrices of the fiber quadratic forms.

All three working coordinate systems lead to the same bilinear forms

    K(psi, phi) = int (a1 d1psi d1phi + a2 d2psi d2phi) w  +  m^2 c_m int psi phi / w
    M(psi, phi) = int psi phi w

with a linear weight ``w`` (the cylindrical radius up to a constant factor):

=============  =================  ==============  ============
system         (a1, a2)           w               c_m
=============  =================  ==============  ============
``rotated``    (1, 1)             s sin t + u cos t   1
``hat``        (tan^2 t, 1)       s + u           1 / cos^2 t
``scaled``     (h^2, 1)           y               1
=============  =================  ==============  ============

``hat`` is the rotated system stretched by ``s -> s tan t`` so that the
domain is the aperture-independent ``Omega(pi/4)``; a single mesh then
serves every aperture and the discrete eigenvalues inherit the monotonicity
in ``t`` of the continuous ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .geometry import Mesh, Tag

__all__ = [
    "Coords",
    "FiberProblem",
    "DofMap",
    "Assembly",
    "Reduced",
    "ContractViolation",
    "DegenerateMeshError",
    "triangle_rule",
    "build_dofmap",
    "assemble",
    "apply_dirichlet",
    "dump_coo",
    "evaluate",
]


class Coords(str, Enum):
    ROTATED = "RotatedSU"
    HAT = "HatSU"
    SCALED = "ScaledXY"


class ContractViolation(ValueError):
    """Inputs violate a form-domain requirement."""


class DegenerateMeshError(ValueError):
    """No free degree of freedom is left after eliminating boundary values."""


@dataclass(frozen=True)
class FiberProblem:
    m: int
    theta: float
    mesh: Mesh
    coordinate_system: Coords = Coords.ROTATED
    h: float | None = None
    degree: int = 2

    def __post_init__(self):
        object.__setattr__(self, "coordinate_system", Coords(self.coordinate_system))
        if int(self.m) != self.m:
            raise ValueError("fiber index must be an integer")
        if self.coordinate_system is Coords.SCALED and not (self.h is not None and self.h > 0.0):
            raise ValueError("scaled coordinates need a positive semiclassical parameter h")
        if self.degree not in (1, 2):
            raise ValueError("element degree must be 1 or 2")

    def coefficients(self) -> tuple[float, float, tuple[float, float], float]:
        """(a1, a2, (alpha, beta), c_m) with ``w = alpha * p1 + beta * p2``."""
        t = self.theta
        if self.coordinate_system is Coords.ROTATED:
            return 1.0, 1.0, (math.sin(t), math.cos(t)), 1.0
        if self.coordinate_system is Coords.HAT:
            return math.tan(t) ** 2, 1.0, (1.0, 1.0), 1.0 / math.cos(t) ** 2
        return self.h**2, 1.0, (0.0, 1.0), 1.0


# --------------------------------------------------------------------------
# Reference element
# --------------------------------------------------------------------------


def triangle_rule(degree: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature on the reference triangle ``(0,0), (1,0), (0,1)``.

    Degree <= 5 gives the 7-point Radon rule; higher degrees a collapsed
    Gauss-Legendre product rule.
    """
    if degree <= 5:
        r = math.sqrt(15.0)
        a1, b1 = (6.0 - r) / 21.0, (9.0 + 2.0 * r) / 21.0
        a2, b2 = (6.0 + r) / 21.0, (9.0 - 2.0 * r) / 21.0
        w1, w2 = (155.0 - r) / 2400.0, (155.0 + r) / 2400.0
        pts = np.array(
            [[1 / 3, 1 / 3], [a1, a1], [b1, a1], [a1, b1], [a2, a2], [b2, a2], [a2, b2]],
        )
        wts = np.array([9.0 / 80.0, w1, w1, w1, w2, w2, w2])
        return pts, wts
    n = degree // 2 + 2
    g, gw = np.polynomial.legendre.leggauss(n)
    g = 0.5 * (g + 1.0)
    gw = 0.5 * gw
    U, V = np.meshgrid(g, g, indexing="ij")
    WU, WV = np.meshgrid(gw, gw, indexing="ij")
    pts = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    wts = (WU * WV * (1.0 - U)).ravel()
    return pts, wts


def _basis(degree: int, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values (nq, nb) and reference gradients (nq, nb, 2)."""
    xi, eta = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1.0 - xi - eta, xi, eta
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if degree == 1:
        vals = np.column_stack([l0, l1, l2])
        grads = np.broadcast_to(dl, (len(pts), 3, 2)).copy()
        return vals, grads
    lam = [l0, l1, l2]
    vals = []
    grads = []
    for i in range(3):
        vals.append(lam[i] * (2.0 * lam[i] - 1.0))
        grads.append((4.0 * lam[i] - 1.0)[:, None] * dl[i])
    for i, j in ((0, 1), (1, 2), (2, 0)):
        vals.append(4.0 * lam[i] * lam[j])
        grads.append(4.0 * (lam[j][:, None] * dl[i] + lam[i][:, None] * dl[j]))
    return np.column_stack(vals), np.stack(grads, axis=1)


# --------------------------------------------------------------------------
# Degrees of freedom
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DofMap:
    """Global numbering: vertices first, then (degree 2) one dof per edge.

    ``tag_mask`` has bit ``1 << Tag.X`` set for every boundary tag touching
    the dof.
    """

    degree: int
    n_dofs: int
    element_dofs: np.ndarray
    coords: np.ndarray
    tag_mask: np.ndarray

    def with_tag(self, tag: Tag) -> np.ndarray:
        return np.flatnonzero(self.tag_mask & (1 << int(tag)))


def build_dofmap(mesh: Mesh, degree: int = 2) -> DofMap:
    pairs, tags = mesh.boundary_edges()
    nn = mesh.n_nodes
    if degree == 1:
        mask = np.zeros(nn, dtype=np.uint8)
        for tag in (Tag.DIRICHLET, Tag.AXIS, Tag.TRUNCATION):
            mask[np.unique(pairs[tags == tag])] |= 1 << int(tag)
        return DofMap(1, nn, mesh.triangles.copy(), mesh.nodes.copy(), mask)
    edges, tri_edges = mesh.edges()
    n = nn + len(edges)
    element_dofs = np.hstack([mesh.triangles, nn + tri_edges])
    coords = np.vstack([mesh.nodes, 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])])
    mask = np.zeros(n, dtype=np.uint8)
    side_tags = mesh.edge_tags
    for tag in (Tag.DIRICHLET, Tag.AXIS, Tag.TRUNCATION):
        bit = np.uint8(1 << int(tag))
        mask[np.unique(pairs[tags == tag])] |= bit
        mask[nn + np.unique(tri_edges[side_tags == tag])] |= bit
    return DofMap(2, n, element_dofs, coords, mask)


# --------------------------------------------------------------------------
# Assembly
# --------------------------------------------------------------------------


class Assembly(NamedTuple):
    K: sp.csr_matrix
    M: sp.csr_matrix
    dofs: DofMap
    m: int


class Reduced(NamedTuple):
    K: sp.csr_matrix
    M: sp.csr_matrix
    free: np.ndarray


def _geometry(mesh: Mesh, elements: np.ndarray | None = None):
    tri = mesh.triangles if elements is None else mesh.triangles[elements]
    p = mesh.nodes[tri]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # (T, 2, 2), columns are edge vectors
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv_t = np.empty_like(J)  # J^{-T}
    inv_t[:, 0, 0] = J[:, 1, 1] / det
    inv_t[:, 0, 1] = -J[:, 1, 0] / det
    inv_t[:, 1, 0] = -J[:, 0, 1] / det
    inv_t[:, 1, 1] = J[:, 0, 0] / det
    return p[:, 0], J, det, inv_t


def _symmetric_csr(rows, cols, vals, n) -> sp.csr_matrix:
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    upper = sp.triu(A, format="csr")
    return (upper + sp.triu(A, k=1, format="csr").T).tocsr()


def assemble(problem: FiberProblem, quadrature_degree: int = 5) -> Assembly:
    """Stiffness ``K`` and mass ``M`` over the whole mesh (no boundary conditions)."""
    mesh = problem.mesh
    dofs = build_dofmap(mesh, problem.degree)
    a1, a2, (alpha, beta), c_m = problem.coefficients()
    pts, wts = triangle_rule(quadrature_degree)
    vals, rgrads = _basis(problem.degree, pts)
    origin, J, det, inv_t = _geometry(mesh)
    if np.any(det <= 0.0):
        raise ContractViolation("mesh has non-positive triangle areas")

    xq = origin[:, None, :] + np.einsum("tij,qj->tqi", J, pts)  # (T, nq, 2)
    w = alpha * xq[..., 0] + beta * xq[..., 1]
    if np.any(w <= 0.0):
        raise ContractViolation("weight must be positive at every quadrature point")
    dxq = det[:, None] * wts[None, :]  # (T, nq)
    grads = np.einsum("tij,qbj->tqbi", inv_t, rgrads)  # physical gradients (T, nq, nb, 2)

    kw = dxq * w
    K = a1 * np.einsum("tq,tqa,tqb->tab", kw, grads[..., 0], grads[..., 0])
    K += a2 * np.einsum("tq,tqa,tqb->tab", kw, grads[..., 1], grads[..., 1])
    M = np.einsum("tq,qa,qb->tab", kw, vals, vals)
    m = int(problem.m)
    if m != 0:
        K += (m * m * c_m) * np.einsum("tq,qa,qb->tab", dxq / w, vals, vals)
    K = 0.5 * (K + K.transpose(0, 2, 1))
    M = 0.5 * (M + M.transpose(0, 2, 1))

    ed = dofs.element_dofs
    nb = ed.shape[1]
    rows = np.repeat(ed, nb, axis=1).ravel()
    cols = np.tile(ed, (1, nb)).ravel()
    n = dofs.n_dofs
    return Assembly(_symmetric_csr(rows, cols, K.ravel(), n), _symmetric_csr(rows, cols, M.ravel(), n), dofs, m)


def apply_dirichlet(K, M, dofs: DofMap, m: int, assembled_m: int | None = None) -> Reduced:
    """Eliminate essential boundary values.

    Wall and truncation dofs always go; axis dofs go iff ``m != 0`` (for
    ``m != 0`` the form domain requires ``psi / r`` square integrable).
    """
    if assembled_m is not None and int(assembled_m) != int(m):
        raise ContractViolation(f"matrices assembled for m={assembled_m} reduced with m={m}")
    bits = (1 << int(Tag.DIRICHLET)) | (1 << int(Tag.TRUNCATION))
    if m != 0:
        bits |= 1 << int(Tag.AXIS)
    free = np.flatnonzero((dofs.tag_mask & bits) == 0)
    if len(free) == 0:
        raise DegenerateMeshError("no interior degrees of freedom remain")
    K = sp.csr_matrix(K)[free][:, free].tocsr()
    M = sp.csr_matrix(M)[free][:, free].tocsr()
    return Reduced(K, M, free)


def dump_coo(A, path) -> None:
    """Lower triangle of a symmetric matrix as ``i j value`` lines."""
    L = sp.tril(sp.csr_matrix(A)).tocoo()
    order = np.lexsort((L.col, L.row))
    with open(path, "w") as fh:
        for i, j, v in zip(L.row[order], L.col[order], L.data[order]):
            fh.write(f"{int(i)} {int(j)} {float(v)!r}\n")


# --------------------------------------------------------------------------
# Post-processing helpers
# --------------------------------------------------------------------------


def evaluate(mesh: Mesh, dofs: DofMap, coeffs: np.ndarray, elements: np.ndarray, ref_pts: np.ndarray):
    """Values and physical gradients of a finite element function.

    ``ref_pts`` (n, 2) are reference coordinates inside ``elements`` (n,).
    """
    elements = np.asarray(elements)
    vals, rgrads = _basis(dofs.degree, ref_pts)
    _, _, _, inv_t = _geometry(mesh, elements)
    c = coeffs[dofs.element_dofs[elements]]  # (n, nb)
    value = np.einsum("nb,nb->n", vals, c)
    grad = np.einsum("nij,nbj,nb->ni", inv_t, rgrads, c)
    return value, grad
