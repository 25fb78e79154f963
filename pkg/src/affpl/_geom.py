"""Small exact-ish 2D polygon kernels: orientation, clipping, areas.

All polygons are numpy arrays of shape (m, 2) with vertices in
counterclockwise order. These routines are deliberately dependency-free
and deterministic (fixed iteration order, no tolerance randomness).
"""

from __future__ import annotations

import numpy as np

from .errors import NonConvexPolygon


def polygon_area(poly: np.ndarray) -> float:
    """Shoelace area; positive for counterclockwise orientation."""
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def require_convex_ccw(poly: np.ndarray) -> np.ndarray:
    """Validate a convex polygon, returning it in CCW order.

    Raises NonConvexPolygon for degenerate or non-convex input. Collinear
    consecutive edges are tolerated (cross product ~ 0).
    """
    poly = np.asarray(poly, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
        raise NonConvexPolygon("polygon needs at least 3 vertices of dimension 2")
    area = polygon_area(poly)
    if area < 0:
        poly = poly[::-1].copy()
        area = -area
    if area <= 0:
        raise NonConvexPolygon("polygon is degenerate (zero area)")
    scale = float(np.max(np.abs(poly))) + 1.0
    v1 = np.roll(poly, -1, axis=0) - poly
    v2 = np.roll(poly, -2, axis=0) - np.roll(poly, -1, axis=0)
    cross = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    if np.any(cross < -1e-12 * scale * scale):
        raise NonConvexPolygon("polygon has a reflex vertex")
    return poly


def edge_normals(poly: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inward unit normals n and offsets d with {x : n.x <= d} = inside halfplane.

    For CCW polygons the inside is to the left of each edge.
    """
    e = np.roll(poly, -1, axis=0) - poly
    lengths = np.hypot(e[:, 0], e[:, 1])
    # outward normal of a CCW edge is (ey, -ex); inequality n.x <= d keeps inside
    n = np.stack([e[:, 1], -e[:, 0]], axis=1) / lengths[:, None]
    d = np.einsum("ij,ij->i", n, poly)
    return n, d


def signed_inset_distance(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Distance of each point inside the convex polygon (min over edges).

    Positive strictly inside, ~0 on the boundary, negative outside.
    """
    n, d = edge_normals(poly)
    return np.min(d[None, :] - points @ n.T, axis=1)


def inradius(poly: np.ndarray) -> float:
    """In-radius (Chebyshev radius) of a convex polygon."""
    from scipy.optimize import linprog

    n, d = edge_normals(poly)
    # maximize r subject to n.x + r <= d
    m = len(d)
    a_ub = np.hstack([n, np.ones((m, 1))])
    res = linprog(c=[0.0, 0.0, -1.0], A_ub=a_ub, b_ub=d, bounds=[(None, None)] * 2 + [(0, None)])
    if not res.success:
        raise NonConvexPolygon("in-radius computation failed")
    return float(res.x[2])


def clip_convex(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex subject by a convex CCW clipper."""
    n, d = edge_normals(clipper)
    out = subject
    for k in range(len(d)):
        out = clip_halfplane(out, n[k], d[k])
        if len(out) == 0:
            break
    return out


def clip_halfplane(poly: np.ndarray, n: np.ndarray, d: float) -> np.ndarray:
    """Clip a polygon by the halfplane {x : n.x <= d}."""
    m = len(poly)
    if m == 0:
        return poly
    s = poly @ n - d
    out = []
    for i in range(m):
        j = (i + 1) % m
        si, sj = s[i], s[j]
        if si <= 0.0:
            out.append(poly[i])
            if sj > 0.0:
                t = si / (si - sj)
                out.append(poly[i] + t * (poly[j] - poly[i]))
        elif sj <= 0.0:
            t = si / (si - sj)
            out.append(poly[i] + t * (poly[j] - poly[i]))
    if not out:
        return np.empty((0, 2))
    return np.asarray(out)


def halfplane_intersection_area(normals: np.ndarray, offsets: np.ndarray, bound: float) -> float:
    """Area of {p : normals[k].p <= offsets[k]} within the box |p|_inf <= bound.

    Incremental Sutherland-Hodgman starting from the bounding box; exact up
    to float rounding. Returns 0.0 for empty intersections.
    """
    poly = np.array(
        [[-bound, -bound], [bound, -bound], [bound, bound], [-bound, bound]], dtype=float
    )
    for k in range(len(offsets)):
        poly = clip_halfplane(poly, normals[k], offsets[k])
        if len(poly) < 3:
            return 0.0
    return polygon_area(poly)


def convex_hull_2d(points: np.ndarray) -> np.ndarray:
    """Andrew monotone chain hull, CCW. Returns (k, 2) vertices, k >= 1."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        out: list[np.ndarray] = []
        for p in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    return np.asarray(hull)


def hull_area_2d(points: np.ndarray) -> float:
    """Area of the convex hull of a 2D point set (0 if degenerate)."""
    hull = convex_hull_2d(points)
    if len(hull) < 3:
        return 0.0
    return abs(polygon_area(hull))


def regular_polygon(radius: float, sides: int, center=(0.0, 0.0)) -> np.ndarray:
    """Inscribed regular polygon approximating the disc of given radius."""
    ang = 2.0 * np.pi * np.arange(sides) / sides
    return np.stack(
        [center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)], axis=1
    )
