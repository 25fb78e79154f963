"""Lattice domains and the discrete differential calculus on them.

A GridDomain is the integer lattice h*Z^2 clipped to a convex polygon.
Nodes are ordered row-major (increasing x2, then increasing x1); every
downstream array is aligned with that order. Interior nodes are nodes
whose full 8-neighbor stencil lies inside the closed polygon, so all
stencil operators below need no one-sided variants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _geom
from .errors import SpacingTooCoarse

# Nodes within this fraction of h from an edge count as on the boundary.
_INSIDE_TOL = 1e-9

# Offsets of the 8-neighbor stencil in (di, dj) index units.
NEIGHBOR_OFFSETS = np.array(
    [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)], dtype=np.int64
)


@dataclass(frozen=True)
class GridDomain:
    """A convex polygon sampled on the lattice h*Z^2.

    Attributes
    ----------
    polygon : (m, 2) CCW convex vertices.
    h : lattice spacing.
    nodes : (N, 2) node coordinates, row-major order.
    ij : (N, 2) integer lattice indices (x = ij * h).
    interior : (N,) bool, True where the 8-stencil fits in the polygon.
    neighbors : (N, 8) int indices into nodes per NEIGHBOR_OFFSETS, -1 if absent.
    cell_area : (N,) area of the node's lattice cell clipped to the polygon.
    n : spatial dimension of the lattice construction (always 2).
    """

    polygon: np.ndarray
    h: float
    nodes: np.ndarray
    ij: np.ndarray
    interior: np.ndarray
    neighbors: np.ndarray
    cell_area: np.ndarray
    n: int = 2
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def boundary(self) -> np.ndarray:
        return ~self.interior

    @property
    def interior_idx(self) -> np.ndarray:
        return np.flatnonzero(self.interior)

    @property
    def boundary_idx(self) -> np.ndarray:
        return np.flatnonzero(~self.interior)

    def node_index(self, i: int, j: int) -> int:
        """Index of lattice node (i, j), or -1 if not in the domain."""
        return self._index.get((int(i), int(j)), -1)

    def area(self) -> float:
        return abs(_geom.polygon_area(self.polygon))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return _geom.signed_inset_distance(pts, self.polygon) >= -_INSIDE_TOL * self.h


def build_domain(polygon, h: float) -> GridDomain:
    """Build a GridDomain from a convex polygon and spacing h.

    Raises NonConvexPolygon for bad polygons and SpacingTooCoarse when the
    polygon in-radius is below h/2 (the lattice would miss the interior).
    """
    poly = _geom.require_convex_ccw(np.asarray(polygon, dtype=float))
    h = float(h)
    if h <= 0:
        raise SpacingTooCoarse("spacing h must be positive")
    if _geom.inradius(poly) < 0.5 * h:
        raise SpacingTooCoarse(f"polygon in-radius below h/2 (h={h})")

    tol = _INSIDE_TOL * h
    i_min = int(np.ceil((poly[:, 0].min() - tol) / h))
    i_max = int(np.floor((poly[:, 0].max() + tol) / h))
    j_min = int(np.ceil((poly[:, 1].min() - tol) / h))
    j_max = int(np.floor((poly[:, 1].max() + tol) / h))

    ii, jj = np.meshgrid(np.arange(i_min, i_max + 1), np.arange(j_min, j_max + 1))
    ij_all = np.stack([ii.ravel(), jj.ravel()], axis=1)  # row-major: j outer, i inner
    pts = ij_all * h
    inside = _geom.signed_inset_distance(pts, poly) >= -tol
    ij = ij_all[inside]
    nodes = ij * h

    index = {(int(i), int(j)): k for k, (i, j) in enumerate(ij)}
    neighbors = np.full((len(ij), 8), -1, dtype=np.int64)
    for m, (di, dj) in enumerate(NEIGHBOR_OFFSETS):
        for k, (i, j) in enumerate(ij):
            neighbors[k, m] = index.get((int(i + di), int(j + dj)), -1)
    interior = np.all(neighbors >= 0, axis=1)

    half = 0.5 * h
    cell_area = np.empty(len(ij))
    for k, (x, y) in enumerate(nodes):
        cell = np.array(
            [[x - half, y - half], [x + half, y - half], [x + half, y + half], [x - half, y + half]]
        )
        clipped = _geom.clip_convex(cell, poly)
        cell_area[k] = abs(_geom.polygon_area(clipped)) if len(clipped) >= 3 else 0.0

    return GridDomain(
        polygon=poly,
        h=h,
        nodes=nodes,
        ij=ij,
        interior=interior,
        neighbors=neighbors,
        cell_area=cell_area,
        _index=index,
    )


def square_domain(half_side: float, h: float, center=(0.0, 0.0)) -> GridDomain:
    c = np.asarray(center, dtype=float)
    poly = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]]) * half_side + c
    return build_domain(poly, h)


def disc_domain(radius: float, h: float, center=(0.0, 0.0), sides: int | None = None) -> GridDomain:
    """Polygonal (inscribed regular polygon) approximation of a disc."""
    if sides is None:
        sides = max(32, int(np.ceil(8.0 * radius / h)))
    return build_domain(_geom.regular_polygon(radius, sides, center), h)


@dataclass(frozen=True)
class HessianField:
    """Second central differences at interior nodes.

    Arrays are aligned with domain nodes; entries at non-interior nodes are
    NaN. The cofactor satisfies cof @ H = det * I exactly in exact
    arithmetic (2x2 adjugate).
    """

    domain: GridDomain
    h11: np.ndarray
    h22: np.ndarray
    h12: np.ndarray

    @property
    def det(self) -> np.ndarray:
        return self.h11 * self.h22 - self.h12 * self.h12

    def cofactor(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cofactor entries (U11, U22, U12) of the 2x2 Hessian."""
        return self.h22, self.h11, -self.h12

    def matrix_at(self, k: int) -> np.ndarray:
        return np.array([[self.h11[k], self.h12[k]], [self.h12[k], self.h22[k]]])


def discrete_hessian(u: np.ndarray, d: GridDomain) -> HessianField:
    """3-point second differences and the 4-corner mixed stencil.

    Exact for quadratics at every interior node; linear in u; NaN at
    boundary nodes (no one-sided stencils by design).
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (d.num_nodes,):
        raise ValueError("u must have one value per node")
    nb = d.neighbors
    h2 = d.h * d.h
    h11 = np.full(d.num_nodes, np.nan)
    h22 = np.full(d.num_nodes, np.nan)
    h12 = np.full(d.num_nodes, np.nan)
    k = d.interior_idx
    h11[k] = (u[nb[k, 0]] - 2.0 * u[k] + u[nb[k, 1]]) / h2
    h22[k] = (u[nb[k, 2]] - 2.0 * u[k] + u[nb[k, 3]]) / h2
    h12[k] = (u[nb[k, 4]] - u[nb[k, 5]] - u[nb[k, 6]] + u[nb[k, 7]]) / (4.0 * h2)
    return HessianField(domain=d, h11=h11, h22=h22, h12=h12)


def gradient(u: np.ndarray, d: GridDomain) -> np.ndarray:
    """Central-difference gradient at interior nodes (NaN elsewhere)."""
    u = np.asarray(u, dtype=float)
    nb = d.neighbors
    g = np.full((d.num_nodes, 2), np.nan)
    k = d.interior_idx
    g[k, 0] = (u[nb[k, 0]] - u[nb[k, 1]]) / (2.0 * d.h)
    g[k, 1] = (u[nb[k, 2]] - u[nb[k, 3]]) / (2.0 * d.h)
    return g


def integrate(f: np.ndarray, d: GridDomain) -> float:
    """Quadrature: sum of nodal value times clipped cell area.

    Exact for constants because the clipped cells tile the polygon.
    Reduction order is the fixed node order, so results are reproducible.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (d.num_nodes,):
        raise ValueError("field must have one value per node")
    return float(np.dot(f, d.cell_area))


def fill_from_interior(values: np.ndarray, d: GridDomain) -> np.ndarray:
    """Extend an interior-node field to all nodes by nearest interior value.

    Ties break toward the smallest node index; used to give quadrature
    weights to boundary cells for integrands defined by interior stencils.
    """
    out = np.asarray(values, dtype=float).copy()
    ki = d.interior_idx
    if len(ki) == 0:
        raise ValueError("domain has no interior nodes")
    missing = np.flatnonzero(~np.isfinite(out))
    if len(missing) == 0:
        return out
    pts_i = d.nodes[ki]
    for k in missing:
        d2 = np.sum((pts_i - d.nodes[k]) ** 2, axis=1)
        out[k] = out[ki[np.argmin(d2)]]
    return out
