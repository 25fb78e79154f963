"""Discrete convex functions and exact Monge-Ampere measures.

Discrete convexity is defined through the lower convex hull of the nodal
graph {(x, u(x))}: u is discretely convex when its values coincide with
the hull interpolant at every node (the Aleksandrov viewpoint). The hull
also yields the normal mapping: the subgradient set of the interpolant at
a hull vertex is the convex hull of the incident facet gradients, and its
area is the node's Monge-Ampere mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import _geom
from .errors import NotConvex, RadiusTooLarge
from .lattice import GridDomain, build_domain, discrete_hessian, gradient

_CONVEXITY_RTOL = 1e-8


@dataclass(frozen=True)
class ConvexGridFunction:
    """Nodal values whose lower-hull interpolant is the discrete function."""

    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.domain.num_nodes,):
            raise ValueError("values must have one entry per node")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite at every node")
        object.__setattr__(self, "values", v)

    def convexity_defect(self, interior_only: bool = False) -> float:
        """Max gap between values and their recomputed lower envelope.

        interior_only ignores boundary nodes: Dirichlet pins on staircase
        boundaries of polygonal domains can hover above the hull without
        affecting the interpolant or any interior mass.
        """
        env = lower_envelope_values(self.domain.nodes, self.values)
        gap = self.values - env
        if interior_only:
            gap = gap[self.domain.interior]
        return float(np.max(gap))

    def is_convex(self, rtol: float = _CONVEXITY_RTOL, interior_only: bool = False) -> bool:
        scale = float(np.max(np.abs(self.values))) + 1.0
        return self.convexity_defect(interior_only=interior_only) <= rtol * scale

    def with_values(self, values) -> "ConvexGridFunction":
        return ConvexGridFunction(self.domain, np.asarray(values, dtype=float))


@dataclass(frozen=True)
class LowerHull:
    """Lower convex hull of a nodal graph.

    facets are triangles of node indices; grads/offsets give each facet
    plane v = g . x + b. incident_ptr/incident_idx is a CSR map from node
    index to the facets having it as a vertex (empty for non-vertices).
    """

    facets: np.ndarray
    grads: np.ndarray
    offsets: np.ndarray
    vertex_mask: np.ndarray
    incident_ptr: np.ndarray
    incident_idx: np.ndarray
    facet_xy_area: np.ndarray

    def incident_facets(self, k: int) -> np.ndarray:
        return self.incident_idx[self.incident_ptr[k] : self.incident_ptr[k + 1]]


def lower_hull(nodes: np.ndarray, values: np.ndarray,
               incidence: bool = True) -> LowerHull:
    """Lower convex hull facets of the 3D point set (x1, x2, v).

    incidence=False skips the per-node incidence CSR (cheaper when only
    facet planes are needed, e.g. for envelope evaluation).
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(nodes)
    pts = np.column_stack([nodes, values])
    try:
        hull = ConvexHull(pts)
        eq = hull.equations
        low = eq[:, 2] < -1e-10
        if not np.any(low):
            raise QhullError("no lower facets")
        simplices = hull.simplices[low].astype(np.int64)
        eqs = eq[low]
        nz = -eqs[:, 2]
        grads = eqs[:, :2] / nz[:, None]
        offsets = eqs[:, 3] / nz
    except QhullError:
        # all points coplanar: a single affine facet covers everything
        a, *_ = np.linalg.lstsq(np.column_stack([nodes, np.ones(n)]), values, rcond=None)
        simplices = np.arange(min(n, 3), dtype=np.int64)[None, :]
        grads = a[None, :2]
        offsets = np.array([a[2]])

    order = np.lexsort((simplices[:, -1], simplices[:, 1], simplices[:, 0]))
    simplices = np.ascontiguousarray(simplices[order])
    grads = np.ascontiguousarray(grads[order])
    offsets = np.ascontiguousarray(offsets[order])

    vertex_mask = np.zeros(n, dtype=bool)
    vertex_mask[np.unique(simplices)] = True

    if simplices.shape[1] == 3:
        p = nodes[simplices]
        xy_area = 0.5 * np.abs(
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
        )
    else:
        xy_area = np.zeros(len(simplices))

    if incidence:
        flat = simplices.ravel()
        rep = np.repeat(np.arange(len(simplices), dtype=np.int64), simplices.shape[1])
        srt = np.lexsort((rep, flat))
        flat_s, rep_s = flat[srt], rep[srt]
        counts = np.bincount(flat_s, minlength=n)
        ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        idx = rep_s
    else:
        ptr = np.zeros(n + 1, dtype=np.int64)
        idx = np.empty(0, dtype=np.int64)

    return LowerHull(
        facets=simplices,
        grads=grads,
        offsets=offsets,
        vertex_mask=vertex_mask,
        incident_ptr=ptr,
        incident_idx=idx,
        facet_xy_area=xy_area,
    )


def lower_envelope_values(nodes: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Envelope by supporting planes: max over lower-hull facet planes.

    Facets are bucketed by their xy bounding box so each node only checks
    nearby planes; the containing facet is always among the candidates, so
    the result is the exact hull interpolant.
    """
    hull = lower_hull(nodes, values, incidence=False)
    return _envelope_from_hull(nodes, hull)


def _envelope_from_hull(points: np.ndarray, hull: LowerHull,
                        hull_points: np.ndarray | None = None) -> np.ndarray:
    """Evaluate the hull interpolant at points inside the hull projection."""
    points = np.asarray(points, dtype=float)
    npts = len(points)
    f = len(hull.grads)
    if f == 1:
        return points @ hull.grads[0] + hull.offsets[0]
    if hull_points is None:
        hull_points = points

    lo = points.min(axis=0)
    span = points.max(axis=0) - lo
    span = np.where(span == 0, 1.0, span)
    nbuck = max(1, int(np.sqrt(npts)))

    def bucket_of(xy):
        b = np.floor((xy - lo) / span * nbuck).astype(np.int64)
        return np.clip(b, 0, nbuck - 1)

    tri = hull_points[hull.facets]
    b0 = bucket_of(tri.min(axis=1))
    b1 = bucket_of(tri.max(axis=1))
    spans = (b1[:, 0] - b0[:, 0] + 1) * (b1[:, 1] - b0[:, 1] + 1)

    single = spans == 1
    ent_f = [np.flatnonzero(single)]
    ent_b = [b0[single, 0] * nbuck + b0[single, 1]]
    for fi in np.flatnonzero(~single):
        bx = np.arange(b0[fi, 0], b1[fi, 0] + 1)
        by = np.arange(b0[fi, 1], b1[fi, 1] + 1)
        bb = (bx[:, None] * nbuck + by[None, :]).ravel()
        ent_f.append(np.full(len(bb), fi, dtype=np.int64))
        ent_b.append(bb)
    ent_f = np.concatenate(ent_f)
    ent_b = np.concatenate(ent_b)

    srt = np.lexsort((ent_f, ent_b))
    ent_f, ent_b = ent_f[srt], ent_b[srt]
    bcnt = np.bincount(ent_b, minlength=nbuck * nbuck)
    bptr = np.concatenate([[0], np.cumsum(bcnt)])

    nb = bucket_of(points)
    bid = nb[:, 0] * nbuck + nb[:, 1]
    counts = bcnt[bid]
    starts = bptr[bid]
    ptr = np.concatenate([[0], np.cumsum(counts)])
    total = int(ptr[-1])
    flat = np.arange(total) - np.repeat(ptr[:-1], counts) + np.repeat(starts, counts)
    cand = ent_f[flat]
    node_rep = np.repeat(np.arange(npts), counts)

    vals = np.einsum("ij,ij->i", points[node_rep], hull.grads[cand]) + hull.offsets[cand]
    out = np.full(npts, -np.inf)
    nonzero = counts > 0
    if np.any(nonzero):
        out[nonzero] = np.maximum.reduceat(vals, ptr[:-1][nonzero])
    for k in np.flatnonzero(~nonzero):
        out[k] = np.max(points[k] @ hull.grads.T + hull.offsets)
    return out


def convex_envelope(values, d: GridDomain) -> ConvexGridFunction:
    """Largest discretely convex function below the given nodal values."""
    values = np.asarray(values, dtype=float)
    env = lower_envelope_values(d.nodes, values)
    env = np.minimum(env, values)  # guard float overshoot on hull vertices
    return ConvexGridFunction(d, env)


@dataclass(frozen=True)
class MAMeasure:
    """Per-node Monge-Ampere masses with regular/singular split.

    mass: area of the subgradient polygon at interior nodes (0 at boundary
    nodes, where the subdifferential is unbounded). regular: clamped
    discrete-Hessian determinant integrated over the node cell. singular:
    max(mass - regular, 0).
    """

    domain: GridDomain
    mass: np.ndarray
    regular: np.ndarray
    singular: np.ndarray
    polygons: list

    def total_mass(self) -> float:
        return float(np.sum(self.mass[self.domain.interior]))


def normal_image_mass(u: ConvexGridFunction, require_convex: bool = True) -> MAMeasure:
    """Exact subgradient-polygon areas of the lower-hull interpolant.

    require_convex=False skips the strict all-node envelope test (interior
    convexity is still required); boundary pins above the hull contribute
    no interior mass either way.
    """
    if require_convex and not u.is_convex():
        raise NotConvex("values do not coincide with their lower envelope")
    if not require_convex and not u.is_convex(interior_only=True):
        raise NotConvex("interior values do not coincide with their lower envelope")
    d = u.domain
    hull = lower_hull(d.nodes, u.values)
    n = d.num_nodes
    mass = np.zeros(n)
    polys: list = [None] * n
    for k in d.interior_idx:
        fs = hull.incident_facets(k)
        if len(fs) == 0:
            continue
        g = hull.grads[fs]
        poly = _geom.convex_hull_2d(g)
        polys[k] = poly
        if len(poly) >= 3:
            mass[k] = abs(_geom.polygon_area(poly))

    hess = discrete_hessian(u.values, d)
    det = hess.det
    regular = np.zeros(n)
    ki = d.interior_idx
    regular[ki] = np.maximum(det[ki], 0.0) * d.cell_area[ki]
    singular = np.maximum(mass - regular, 0.0)
    return MAMeasure(domain=d, mass=mass, regular=regular, singular=singular, polygons=polys)


def subgradients(u: ConvexGridFunction, hull: LowerHull | None = None) -> np.ndarray:
    """A representative subgradient per node.

    Hull vertices get the xy-area-weighted average of their incident facet
    gradients (deterministic; any subgradient yields nested sections).
    Non-vertex nodes get the gradient of a facet containing them.
    """
    d = u.domain
    if hull is None:
        hull = lower_hull(d.nodes, u.values)
    g = np.zeros((d.num_nodes, 2))
    need_fallback = []
    for k in range(d.num_nodes):
        fs = hull.incident_facets(k)
        if len(fs) == 0:
            need_fallback.append(k)
            continue
        w = hull.facet_xy_area[fs]
        tw = float(np.sum(w))
        if tw <= 0:
            g[k] = hull.grads[fs].mean(axis=0)
        else:
            g[k] = (w[:, None] * hull.grads[fs]).sum(axis=0) / tw
    if need_fallback:
        pts = d.nodes[need_fallback]
        vals = pts @ hull.grads.T + hull.offsets[None, :]
        best = np.argmax(vals, axis=1)
        g[need_fallback] = hull.grads[best]
    return g


def mollify(u: ConvexGridFunction, radius: float) -> ConvexGridFunction:
    """Discrete convolution with a normalized quartic bump of given radius.

    Defined on the domain shrunk inward by the radius; raises
    RadiusTooLarge when no usable shrunken domain remains. The kernel
    (1 - |x/r|^2)^2 is nonnegative with unit discrete mass, so convexity
    is preserved.
    """
    d = u.domain
    r = float(radius)
    if r < d.h:
        raise ValueError("mollification radius must be at least the spacing h")
    n, off = _geom.edge_normals(d.polygon)
    shrunk = d.polygon
    for k in range(len(off)):
        shrunk = _geom.clip_halfplane(shrunk, n[k], off[k] - r)
        if len(shrunk) < 3:
            raise RadiusTooLarge("shrunken domain is empty")
    try:
        inner = build_domain(shrunk, d.h)
    except Exception as exc:
        raise RadiusTooLarge("shrunken domain too small for the lattice") from exc

    m = int(np.floor(r / d.h))
    di, dj = np.meshgrid(np.arange(-m, m + 1), np.arange(-m, m + 1))
    di, dj = di.ravel(), dj.ravel()
    rr = (di * di + dj * dj) * (d.h / r) ** 2
    keep = rr < 1.0
    di, dj, rr = di[keep], dj[keep], rr[keep]
    w = (1.0 - rr) ** 2
    w /= np.sum(w)

    vals = np.zeros(inner.num_nodes)
    for t in range(len(w)):
        for k in range(inner.num_nodes):
            i, j = inner.ij[k]
            src = d.node_index(i + di[t], j + dj[t])
            if src < 0:
                raise RadiusTooLarge("kernel support leaves the domain")
            vals[k] += w[t] * u.values[src]
    return ConvexGridFunction(inner, vals)


@dataclass(frozen=True)
class Section:
    """Sub-tangent section S(y, h) = {x : u(x) < u(y) + p.(x-y) + h}."""

    center: int
    height: float
    members: np.ndarray
    subgradient: np.ndarray
    inradius: float
    circumradius: float


def section(u: ConvexGridFunction, y: int, height: float,
            hull: LowerHull | None = None) -> Section:
    """Section of u at node y for the given tangent-plane lift."""
    d = u.domain
    if not d.interior[y]:
        raise ValueError("section center must be an interior node")
    if height <= 0:
        raise ValueError("section height must be positive")
    g = subgradients(u, hull)[y]
    lift = u.values[y] + (d.nodes - d.nodes[y]) @ g + height
    members = np.flatnonzero(u.values < lift)
    dist = np.hypot(*(d.nodes[members] - d.nodes[y]).T)
    circum = float(np.max(dist)) if len(members) else 0.0
    non = np.setdiff1d(np.arange(d.num_nodes), members, assume_unique=False)
    if len(non):
        inr = float(np.min(np.hypot(*(d.nodes[non] - d.nodes[y]).T)))
    else:
        inr = circum
    return Section(center=int(y), height=float(height), members=members,
                   subgradient=g, inradius=inr, circumradius=circum)


def tangent_excess(u: ConvexGridFunction, y: int, g: np.ndarray) -> np.ndarray:
    """u(x) - u(y) - g.(x - y) at every node (>= 0 for a true subgradient)."""
    d = u.domain
    return u.values - u.values[y] - (d.nodes - d.nodes[y]) @ g


def modulus_of_convexity(u: ConvexGridFunction, r: float) -> float:
    """Largest tangent lift whose section stays in B_r, minimized over nodes.

    For each interior y the supremum over lifts equals the smallest tangent
    excess among nodes outside B_r(y); the reported value is the exact
    limit of bisection on the lift.
    """
    d = u.domain
    if r <= 0:
        raise ValueError("radius must be positive")
    g = subgradients(u)
    best = np.inf
    for y in d.interior_idx:
        dist = np.hypot(*(d.nodes - d.nodes[y]).T)
        outside = dist > r
        if not np.any(outside):
            continue
        t = tangent_excess(u, y, g[y])[outside]
        rho_y = max(float(np.min(t)), 0.0)
        best = min(best, rho_y)
    return best if np.isfinite(best) else np.inf


def gauss_curvature_graph(u: ConvexGridFunction) -> np.ndarray:
    """Gauss curvature of the graph: det H / (1 + |Du|^2)^((n+2)/2)."""
    d = u.domain
    hess = discrete_hessian(u.values, d)
    grad = gradient(u.values, d)
    k = np.full(d.num_nodes, np.nan)
    ki = d.interior_idx
    g2 = np.einsum("ij,ij->i", grad[ki], grad[ki])
    k[ki] = hess.det[ki] / (1.0 + g2) ** ((d.n + 2) / 2.0)
    return k
