"""Meridian domains, coordinate maps and graded triangulations.

Every domain handled here is a *column domain*: for ``x`` between a tip
abscissa ``x_tip`` and a right end ``x_end`` it is the set of points
``lower(x) < y < upper(x)``, with ``lower(x_tip) == upper(x_tip)`` at the
tip. Two coordinate systems are used:

``(s, u)``
    rotated coordinates ``s = z cos t + r sin t``, ``u = -z sin t + r cos t``
    in which the meridian guide is the strip with corner
    ``{s >= -pi cot t, max(0, -s tan t) < u < pi}``. The slanted side
    ``u = -s tan t`` (``s < 0``) is the symmetry axis ``r = 0``.
``(x, y)``
    scaled coordinates ``x = z sqrt(2) sin t``, ``y = r sqrt(2) cos t`` in
    which the guide no longer depends on the aperture:
    ``{x > -pi sqrt(2), max(0, x) < y < x + pi sqrt(2)}``; ``y = 0`` is the
    axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Callable

import numpy as np

__all__ = [
    "Shape",
    "Tag",
    "DomainSpec",
    "MeshParams",
    "Mesh",
    "MeshBudgetError",
    "build_domain",
    "to_cylindrical",
    "from_cylindrical",
    "scaled_to_cylindrical",
    "generate_mesh",
    "uniform_square_mesh",
    "refine_uniform",
    "write_mesh",
    "read_mesh",
    "SQRT2PI",
]

SQRT2PI = math.pi * math.sqrt(2.0)


class Shape(str, Enum):
    MERIDIAN_GUIDE = "MeridianGuide"
    TRIANGLE = "Triangle"
    SCALED_GUIDE = "ScaledGuide"
    SCALED_TRIANGLE = "ScaledTriangle"


class Tag(IntEnum):
    INTERIOR = 0
    DIRICHLET = 1
    AXIS = 2
    TRUNCATION = 3


class MeshBudgetError(RuntimeError):
    """The requested mesh would exceed its cell budget."""


@dataclass(frozen=True)
class DomainSpec:
    """A truncated meridian domain in working coordinates.

    ``polygon`` is counter-clockwise. ``lower``/``upper`` describe the
    column structure used by :func:`generate_mesh`; ``right_tag`` is the
    boundary type of the vertical side at ``x_end``.
    """

    theta: float
    truncation_s: float | None
    shape: Shape
    polygon: np.ndarray
    x_tip: float
    x_end: float
    lower: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    upper: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    right_tag: Tag = Tag.TRUNCATION

    @property
    def scaled(self) -> bool:
        return self.shape in (Shape.SCALED_GUIDE, Shape.SCALED_TRIANGLE)

    def contains(self, pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        inside_x = (x >= self.x_tip - tol) & (x <= self.x_end + tol)
        xc = np.clip(x, self.x_tip, self.x_end)
        return inside_x & (y >= self.lower(xc) - tol) & (y <= self.upper(xc) + tol)


def _check_theta(theta: float) -> None:
    if not 0.0 < theta < math.pi / 2:
        raise ValueError(f"aperture must lie in (0, pi/2), got {theta!r}")


def build_domain(theta: float, truncation_s: float | None, shape: Shape | str) -> DomainSpec:
    """Polygon and column description of one of the four meridian domains.

    For the scaled shapes ``theta`` is kept for bookkeeping only (the domain
    does not depend on it) and ``truncation_s`` is the cut in ``x``.
    """
    shape = Shape(shape)
    _check_theta(theta)
    needs_cut = shape in (Shape.MERIDIAN_GUIDE, Shape.SCALED_GUIDE)
    if needs_cut and (truncation_s is None or not truncation_s > 0.0):
        raise ValueError(f"truncation must be positive, got {truncation_s!r}")

    if shape in (Shape.MERIDIAN_GUIDE, Shape.TRIANGLE):
        tan_t = math.tan(theta)
        x_tip = -math.pi / tan_t

        def lower(s):
            return np.maximum(0.0, -np.asarray(s, float) * tan_t)

        def upper(s):
            return np.full_like(np.asarray(s, float), math.pi)

        if shape is Shape.MERIDIAN_GUIDE:
            t = float(truncation_s)
            poly = [(x_tip, math.pi), (0.0, 0.0), (t, 0.0), (t, math.pi)]
            return DomainSpec(theta, t, shape, np.array(poly), x_tip, t, lower, upper, Tag.TRUNCATION)
        poly = [(x_tip, math.pi), (0.0, 0.0), (0.0, math.pi)]
        return DomainSpec(theta, None, shape, np.array(poly), x_tip, 0.0, lower, upper, Tag.DIRICHLET)

    def lower_xy(x):
        return np.maximum(0.0, np.asarray(x, float))

    def upper_xy(x):
        return np.asarray(x, float) + SQRT2PI

    if shape is Shape.SCALED_GUIDE:
        t = float(truncation_s)
        poly = [(-SQRT2PI, 0.0), (0.0, 0.0), (t, t), (t, t + SQRT2PI)]
        return DomainSpec(theta, t, shape, np.array(poly), -SQRT2PI, t, lower_xy, upper_xy, Tag.TRUNCATION)
    poly = [(-SQRT2PI, 0.0), (0.0, 0.0), (0.0, SQRT2PI)]
    return DomainSpec(theta, None, shape, np.array(poly), -SQRT2PI, 0.0, lower_xy, upper_xy, Tag.DIRICHLET)


def to_cylindrical(p, theta: float) -> np.ndarray:
    """Rotated ``(s, u)`` to cylindrical ``(r, z)``."""
    p = np.asarray(p, float)
    s, u = p[..., 0], p[..., 1]
    c, sn = math.cos(theta), math.sin(theta)
    return np.stack([s * sn + u * c, s * c - u * sn], axis=-1)


def from_cylindrical(p, theta: float) -> np.ndarray:
    """Cylindrical ``(r, z)`` to rotated ``(s, u)``."""
    p = np.asarray(p, float)
    r, z = p[..., 0], p[..., 1]
    c, sn = math.cos(theta), math.sin(theta)
    return np.stack([z * c + r * sn, -z * sn + r * c], axis=-1)


def scaled_to_cylindrical(p, theta: float) -> np.ndarray:
    """Scaled ``(x, y)`` to cylindrical ``(r, z)``."""
    p = np.asarray(p, float)
    x, y = p[..., 0], p[..., 1]
    return np.stack([y / (math.sqrt(2.0) * math.cos(theta)), x / (math.sqrt(2.0) * math.sin(theta))], axis=-1)


# --------------------------------------------------------------------------
# Meshes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MeshParams:
    """Graded column mesh parameters.

    Columns are ``h_near`` apart for ``|x| <= near_extent`` and the spacing
    then grows by ``ratio`` per band toward both ends, capped at ``h_max``.
    ``n_transverse`` cells span every column (default: width / ``h_near``);
    with ``transverse_ratio > 1`` their heights grow geometrically away from
    the lower boundary (which contains the singular vertex at the origin).
    """

    h_near: float
    ratio: float = 1.0
    max_cells: int = 400_000
    n_transverse: int | None = None
    near_extent: float = math.pi
    h_max: float | None = None
    left_ratio: float | None = None
    transverse_ratio: float = 1.0

    def __post_init__(self):
        if not self.h_near > 0.0:
            raise ValueError("h_near must be positive")
        if not self.ratio >= 1.0 or not self.transverse_ratio >= 1.0 or (self.left_ratio is not None and not self.left_ratio >= 1.0):
            raise ValueError("grading ratio must be >= 1")


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation with per-edge boundary tags.

    ``edge_tags[t, e]`` classifies the edge from ``triangles[t, e]`` to
    ``triangles[t, (e + 1) % 3]``. ``columns`` holds the column abscissae
    (the grading descriptor); it is empty for meshes not built by columns.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    edge_tags: np.ndarray
    columns: np.ndarray = field(default_factory=lambda: np.empty(0))
    domain: DomainSpec | None = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique undirected edges and, per triangle side, its edge index."""
        t = self.triangles
        local = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1)
        flat = np.sort(local.reshape(-1, 2), axis=1)
        uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
        return uniq, inverse.reshape(-1, 3)

    def boundary_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Tagged boundary edges as (node pairs, tags)."""
        mask = self.edge_tags != Tag.INTERIOR
        t = self.triangles
        pairs = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1)
        return pairs[mask], self.edge_tags[mask]

    def tag_lengths(self) -> dict[Tag, float]:
        pairs, tags = self.boundary_edges()
        lengths = np.linalg.norm(self.nodes[pairs[:, 1]] - self.nodes[pairs[:, 0]], axis=1)
        return {tag: float(lengths[tags == tag].sum()) for tag in (Tag.DIRICHLET, Tag.AXIS, Tag.TRUNCATION)}

    def nodes_with_tag(self, tag: Tag) -> np.ndarray:
        pairs, tags = self.boundary_edges()
        return np.unique(pairs[tags == tag])

    def euler_characteristic(self) -> int:
        return self.n_nodes - len(self.edges()[0]) + self.n_triangles

    def band_widths(self) -> np.ndarray:
        return np.diff(self.columns)


def _one_side(length: float, h: float, ratio: float, near: float, h_max: float | None) -> np.ndarray:
    """Offsets ``0 = d_0 < ... < d_n = length`` with graded spacing."""
    if length <= 0.0:
        return np.array([0.0])
    offsets = [0.0]
    step = h
    while offsets[-1] < length - 1e-12:
        if offsets[-1] >= near - 1e-12:
            step *= ratio
        if h_max is not None:
            step = min(step, h_max)
        offsets.append(offsets[-1] + step)
    offsets[-1] = length
    if len(offsets) > 2 and offsets[-1] - offsets[-2] < 0.5 * (offsets[-2] - offsets[-3]):
        del offsets[-2]
    return np.array(offsets)


def column_positions(spec: DomainSpec, params: MeshParams) -> np.ndarray:
    right = _one_side(spec.x_end, params.h_near, params.ratio, params.near_extent, params.h_max)
    left_ratio = params.ratio if params.left_ratio is None else params.left_ratio
    left = _one_side(-spec.x_tip, params.h_near, left_ratio, params.near_extent, params.h_max)
    if spec.x_end <= 0.0:
        right = np.array([0.0])
    cols = np.concatenate([-left[::-1], right[1:]]) if spec.x_end > 0.0 else -left[::-1]
    cols[0] = spec.x_tip
    cols[-1] = spec.x_end
    return cols


def generate_mesh(spec: DomainSpec, params: MeshParams) -> Mesh:
    """Graded column triangulation of ``spec`` with tagged boundary.

    Columns always include ``x = 0`` so the triangular end is a union of
    whole cells; the triangular shapes therefore reproduce exactly the
    ``x <= 0`` part of the corresponding guide mesh.
    """
    cols = column_positions(spec, params)
    width = float(np.max(spec.upper(cols) - spec.lower(cols)))
    nt = params.n_transverse or max(2, int(math.ceil(width / params.h_near)))
    n_cells = 2 * nt * (len(cols) - 1)
    if n_cells > params.max_cells:
        raise MeshBudgetError(f"mesh needs {n_cells} cells, budget is {params.max_cells}")

    t = np.concatenate([[0.0], np.cumsum(params.transverse_ratio ** np.arange(nt))])
    t /= t[-1]
    lo = spec.lower(cols)
    hi = spec.upper(cols)
    tip_collapsed = abs(hi[0] - lo[0]) < 1e-12

    # node index of (column i, level j)
    ncol = len(cols)
    index = np.arange(ncol * (nt + 1)).reshape(ncol, nt + 1)
    xs = np.repeat(cols, nt + 1)
    ys = (lo[:, None] + (hi - lo)[:, None] * t[None, :]).ravel()
    if tip_collapsed:
        index = index - nt
        index[0, :] = 0
        xs = xs[nt:]
        ys = ys[nt:]
        xs[0], ys[0] = cols[0], lo[0]
    nodes = np.column_stack([xs, ys])

    tris = []
    tags = []
    lower_tag = np.where(0.5 * (cols[:-1] + cols[1:]) < 0.0, Tag.AXIS, Tag.DIRICHLET)
    for i in range(ncol - 1):
        a = index[i]
        b = index[i + 1]
        right_tag = spec.right_tag if i == ncol - 2 else Tag.INTERIOR
        left_tag = Tag.DIRICHLET if (i == 0 and not tip_collapsed) else Tag.INTERIOR
        for j in range(nt):
            bottom = lower_tag[i] if j == 0 else Tag.INTERIOR
            top = Tag.DIRICHLET if j == nt - 1 else Tag.INTERIOR
            if i == 0 and tip_collapsed:
                # fan at the tip: (tip, b_j, b_{j+1})
                tris.append((a[0], b[j], b[j + 1]))
                tags.append((bottom, right_tag, top))
                continue
            # quad a_j, b_j, b_{j+1}, a_{j+1} split along a_j -- b_{j+1}
            tris.append((a[j], b[j], b[j + 1]))
            tags.append((bottom, right_tag, Tag.INTERIOR))
            tris.append((a[j], b[j + 1], a[j + 1]))
            tags.append((Tag.INTERIOR, top, left_tag))
    tris = np.array(tris, dtype=np.int64)
    tags = np.array(tags, dtype=np.uint8)
    mesh = Mesh(nodes, tris, tags, cols, spec)
    _orient(mesh)
    return mesh


def _orient(mesh: Mesh) -> None:
    neg = mesh.signed_areas() < 0.0
    if np.any(neg):
        # swapping vertices 1 and 2 maps edges (0,1),(1,2),(2,0) to (0,2),(2,1),(1,0)
        mesh.triangles[neg] = mesh.triangles[neg][:, [0, 2, 1]]
        mesh.edge_tags[neg] = mesh.edge_tags[neg][:, [2, 1, 0]]


def uniform_square_mesh(n: int, tag: Tag = Tag.DIRICHLET) -> Mesh:
    """``(0,1)^2`` split into ``n x n`` squares, two triangles each."""
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(g, g, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    tris = []
    tags = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            tris.append((a, b, c))
            tags.append((tag if j == 0 else 0, tag if i == n - 1 else 0, 0))
            tris.append((a, c, d))
            tags.append((0, tag if j == n - 1 else 0, tag if i == 0 else 0))
    mesh = Mesh(nodes, np.array(tris, dtype=np.int64), np.array(tags, dtype=np.uint8), g)
    _orient(mesh)
    return mesh


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into four congruent children (parent nodes kept)."""
    edges, tri_edges = mesh.edges()
    mids = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    nodes = np.vstack([mesh.nodes, mids])
    m = mesh.n_nodes + tri_edges  # midpoint node of sides (01), (12), (20)
    t = mesh.triangles
    g = mesh.edge_tags
    z = np.zeros(len(t), dtype=np.uint8)
    children = [
        (np.column_stack([t[:, 0], m[:, 0], m[:, 2]]), np.column_stack([g[:, 0], z, g[:, 2]])),
        (np.column_stack([m[:, 0], t[:, 1], m[:, 1]]), np.column_stack([g[:, 0], g[:, 1], z])),
        (np.column_stack([m[:, 2], m[:, 1], t[:, 2]]), np.column_stack([z, g[:, 1], g[:, 2]])),
        (np.column_stack([m[:, 0], m[:, 1], m[:, 2]]), np.column_stack([z, z, z])),
    ]
    tris = np.vstack([c[0] for c in children])
    tags = np.vstack([c[1] for c in children]).astype(np.uint8)
    cols = np.unique(np.concatenate([mesh.columns, 0.5 * (mesh.columns[1:] + mesh.columns[:-1])])) if len(mesh.columns) else mesh.columns
    return Mesh(nodes, tris, tags, cols, mesh.domain)


def write_mesh(mesh: Mesh, path) -> None:
    """Text format: ``nodes N triangles T``, N lines ``x y``, T lines ``i j k t1 t2 t3``."""
    with open(path, "w") as fh:
        fh.write(f"nodes {mesh.n_nodes} triangles {mesh.n_triangles}\n")
        for x, y in mesh.nodes:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for (i, j, k), (a, b, c) in zip(mesh.triangles, mesh.edge_tags):
            fh.write(f"{i} {j} {k} {a} {b} {c}\n")


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 4 or head[0] != "nodes" or head[2] != "triangles":
            raise ValueError(f"bad mesh header: {' '.join(head)!r}")
        n, t = int(head[1]), int(head[3])
        nodes = np.loadtxt(fh, max_rows=n, ndmin=2) if n else np.empty((0, 2))
        rows = np.loadtxt(fh, max_rows=t, dtype=np.int64, ndmin=2) if t else np.empty((0, 6), np.int64)
    return Mesh(nodes.reshape(n, 2), rows[:, :3].copy(), rows[:, 3:].astype(np.uint8))
