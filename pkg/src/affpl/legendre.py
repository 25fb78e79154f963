"""Legendre transforms on lattice domains and the dual functional.

The conjugate is computed by exhaustive maximization of x.y - u(x) over
the primal nodes (vectorized in chunks; the output contract is identical
to the naive double loop). The dual functional integrates the clamped
dual determinant to the power (n+1)/(n+2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _geom
from .convexcore import ConvexGridFunction, lower_hull
from .errors import DegenerateHessian
from .lattice import (
    GridDomain,
    build_domain,
    discrete_hessian,
    fill_from_interior,
    gradient,
    integrate,
)


def gradient_range_hull(u: ConvexGridFunction) -> np.ndarray:
    """Convex hull polygon of the lower-hull facet gradients of u."""
    hull = lower_hull(u.domain.nodes, u.values)
    return _geom.convex_hull_2d(hull.grads)


def dual_domain_for(u: ConvexGridFunction, spacing: float | None = None,
                    inflate_cells: int = 1) -> GridDomain:
    """Bounding-box dual domain covering the gradient range of u.

    Default spacing is 4h scaled by the gradient-to-domain extent ratio;
    the coarsening keeps stencil determinants of the piecewise-linear
    conjugate usable (kinks average out inside a wide stencil).
    """
    d = u.domain
    hull = lower_hull(d.nodes, u.values)
    g = hull.grads
    lo, hi = g.min(axis=0), g.max(axis=0)
    if spacing is None:
        primal_ext = d.nodes.max(axis=0) - d.nodes.min(axis=0)
        ratio = float(np.min((hi - lo) / np.maximum(primal_ext, 1e-300)))
        spacing = 4.0 * d.h * max(ratio, 0.25)
        spacing = min(spacing, float(np.min(hi - lo)) / 10.0 + 1e-300)
    pad = inflate_cells * spacing
    box = np.array(
        [[lo[0] - pad, lo[1] - pad], [hi[0] + pad, lo[1] - pad],
         [hi[0] + pad, hi[1] + pad], [lo[0] - pad, hi[1] + pad]]
    )
    return build_domain(box, spacing)


def legendre_transform(u: ConvexGridFunction, dual_domain: GridDomain,
                       chunk: int = 512) -> ConvexGridFunction:
    """u*(y) = max over primal nodes x of (x.y - u(x)) at each dual node."""
    x = u.domain.nodes
    vals = u.values
    y = dual_domain.nodes
    out = np.empty(len(y))
    for s in range(0, len(y), chunk):
        block = y[s : s + chunk]
        out[s : s + chunk] = np.max(x @ block.T - vals[:, None], axis=0)
    return ConvexGridFunction(dual_domain, out)


def conjugate_at(u: ConvexGridFunction, points: np.ndarray) -> np.ndarray:
    """Conjugate values at arbitrary slope points (same exhaustive max)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.max(u.domain.nodes @ pts.T - u.values[:, None], axis=0)


@dataclass(frozen=True)
class DualPair:
    """A convex function together with its Legendre transform."""

    primal: ConvexGridFunction
    dual: ConvexGridFunction

    @property
    def dual_exponent(self) -> float:
        n = self.primal.domain.n
        return (n + 1) / (n + 2)

    @classmethod
    def build(cls, u: ConvexGridFunction, spacing: float | None = None) -> "DualPair":
        dd = dual_domain_for(u, spacing=spacing)
        return cls(primal=u, dual=legendre_transform(u, dd))

    def biconjugate_defect(self) -> float:
        """sup |(u*)* - u| over interior primal nodes."""
        d = self.primal.domain
        back = conjugate_at(self.dual, d.nodes[d.interior])
        return float(np.max(np.abs(back - self.primal.values[d.interior])))


def dual_area(v: ConvexGridFunction) -> float:
    """A*(v) = integral of max(det H, 0)^((n+1)/(n+2)) on the dual grid."""
    d = v.domain
    det = discrete_hessian(v.values, d).det
    f = np.full(d.num_nodes, np.nan)
    ki = d.interior_idx
    f[ki] = np.maximum(det[ki], 0.0) ** ((d.n + 1) / (d.n + 2))
    return integrate(fill_from_interior(f, d), d)


def restrict(u: ConvexGridFunction, inner: GridDomain) -> ConvexGridFunction:
    """Restrict nodal values to a sub-domain on the same lattice."""
    d = u.domain
    if abs(inner.h - d.h) > 1e-15 * d.h:
        raise ValueError("inner domain must share the lattice spacing")
    vals = np.empty(inner.num_nodes)
    for k, (i, j) in enumerate(inner.ij):
        src = d.node_index(i, j)
        if src < 0:
            raise ValueError("inner domain node is not a node of the outer domain")
        vals[k] = u.values[src]
    return ConvexGridFunction(inner, vals)


def duality_gap(pair: DualPair, omega_inner: GridDomain) -> dict:
    """|A(u, inner) - A*(u*, image of inner)| with both sides reported.

    The image region is the hull of the central-difference gradients over
    the inner domain, sampled on the dual lattice; dual values there are
    recomputed from the full primal function.
    """
    from .functional import affine_area

    u = pair.primal
    u_inner = restrict(u, omega_inner)
    primal_side = affine_area(u_inner)

    grads = gradient(u.values, u.domain)
    idx = [u.domain.node_index(i, j) for i, j in omega_inner.ij]
    g = grads[[k for k in idx if k >= 0]]
    g = g[np.all(np.isfinite(g), axis=1)]
    hull = _geom.convex_hull_2d(g)
    if len(hull) < 3:
        raise DegenerateHessian("gradient image of the inner domain is degenerate")
    image = build_domain(hull, pair.dual.domain.h)
    dual_vals = conjugate_at(u, image.nodes)
    dual_side = dual_area(ConvexGridFunction(image, dual_vals))
    gap = abs(primal_side - dual_side)
    return {
        "primal": primal_side,
        "dual": dual_side,
        "gap": gap,
        "relative": gap / max(abs(primal_side), 1e-300),
    }


def support_function_graph(u: ConvexGridFunction, directions) -> np.ndarray:
    """Support function of the graph: H(xi) = max over graph points p.xi.

    Directions must have negative last component (graph seen from below);
    H(y, -1) equals the Legendre transform at y after degree-one scaling.
    """
    xi = np.atleast_2d(np.asarray(directions, dtype=float))
    if xi.shape[1] != 3:
        raise ValueError("directions must be 3-vectors")
    if np.any(xi[:, 2] >= 0):
        raise ValueError("directions must have negative last component")
    graph = np.column_stack([u.domain.nodes, u.values])
    return np.max(graph @ xi.T, axis=0)


def dual_equation_residual(u: ConvexGridFunction, f,
                           dual_domain: GridDomain | None = None) -> dict:
    """Residual of the dual equation on the dual grid.

    residual = U*^{ij} w*_ij + f(Du*) det(D^2 u*) / (n+1) with
    w* = det(D^2 u*)^(-1/(n+2)). f may be a scalar, a callable of the
    primal point, or a nodal array on u's domain (bilinearly looked up at
    the nearest primal node).
    """
    d = u.domain
    n = d.n
    if dual_domain is None:
        dual_domain = dual_domain_for(u)
    ustar = legendre_transform(u, dual_domain)
    dd = dual_domain
    hess = discrete_hessian(ustar.values, dd)
    det = hess.det
    grad = gradient(ustar.values, dd)

    wstar = np.full(dd.num_nodes, np.nan)
    ki = dd.interior_idx
    pos = det[ki] > 0
    wstar[ki[pos]] = det[ki[pos]] ** (-1.0 / (n + 2))

    # evaluation set: interior nodes whose whole stencil has finite w*
    nb = dd.neighbors
    ok = np.zeros(dd.num_nodes, dtype=bool)
    for k in ki:
        ring = nb[k]
        if np.all(ring >= 0) and np.isfinite(wstar[k]) and np.all(np.isfinite(wstar[ring])):
            ok[k] = True
    if not np.any(ok):
        raise DegenerateHessian("dual determinant not positive anywhere usable")

    hw = discrete_hessian(np.where(np.isfinite(wstar), wstar, 0.0), dd)
    res = np.full(dd.num_nodes, np.nan)
    ks = np.flatnonzero(ok)
    lw = (hess.h22[ks] * hw.h11[ks] + hess.h11[ks] * hw.h22[ks]
          - 2.0 * hess.h12[ks] * hw.h12[ks])

    if callable(f):
        fv = np.array([f(grad[k]) for k in ks])
    elif np.ndim(f) == 0:
        fv = np.full(len(ks), float(f))
    else:
        f = np.asarray(f, dtype=float)
        fv = np.empty(len(ks))
        for m, k in enumerate(ks):
            d2 = np.sum((d.nodes - grad[k]) ** 2, axis=1)
            fv[m] = f[np.argmin(d2)]

    res[ks] = lw + fv * det[ks] / (n + 1)
    return {"residual": res, "nodes": ks, "dual": ustar, "det": det}
