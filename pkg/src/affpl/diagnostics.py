"""Structural diagnostics: determinant bounds, strict convexity, Gauss image.

These are report generators, not assertions: they measure the quantities
the a priori estimates control (interior determinant bands, growth
exponents of the dual profile, sub-level-set slabs, minimum-ellipse
normalization, gradient-range apertures) and flag violations of
configured envelopes without ever silently rejecting a function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _geom
from .convexcore import ConvexGridFunction, lower_hull, section, subgradients
from .errors import DegenerateRegion
from .lattice import discrete_hessian, gradient
from .legendre import conjugate_at

_SEGMENT_COLLINEAR_TOL = 1e-9


@dataclass
class DetBoundsReport:
    """Measured determinant extremes vs configured barrier-style bounds."""

    bands: list = field(default_factory=list)
    sup_du: float = np.nan
    sup_u: float = np.nan
    sup_f: float = np.nan
    lower_floor: float = np.nan
    lower_min: float = np.nan
    lower_ok: bool = True
    upper_ok: bool = True


def det_bounds_check(u: ConvexGridFunction, f=0.0, c_env: float = 10.0,
                     lower_floor: float = 1e-6) -> DetBoundsReport:
    """Interior determinant bands vs an upper envelope and a lower floor.

    The upper envelope per band is assembled from the measured sup|Du|,
    sup|u|, sup f and the band distance (the shape of the interior bound,
    with a configured constant; the underlying proof constants are not
    tabulated). The lower check runs on a section-style neighborhood of
    the minimum point.
    """
    d = u.domain
    rep = DetBoundsReport()
    hess = discrete_hessian(u.values, d)
    det = hess.det
    grad = gradient(u.values, d)
    ki = d.interior_idx
    g2 = np.einsum("ij,ij->i", grad[ki], grad[ki])
    rep.sup_du = float(np.sqrt(np.max(g2)))
    rep.sup_u = float(np.max(np.abs(u.values)))
    fv = np.broadcast_to(np.asarray(f, dtype=float), (d.num_nodes,))
    rep.sup_f = float(np.max(fv[ki])) if len(ki) else np.nan

    inset = _geom.signed_inset_distance(d.nodes, d.polygon)
    edges = [0.0, 2 * d.h, 4 * d.h, 8 * d.h, np.inf]
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = d.interior & (inset >= lo) & (inset < hi)
        if not np.any(m):
            continue
        dist = max(lo, d.h)
        bound = (
            c_env
            * (1.0 + rep.sup_du ** 2) ** ((d.n + 2) / (d.n + 1))
            * (1.0 + rep.sup_u + max(rep.sup_f, 0.0))
            / dist ** d.n
        )
        sup_det = float(np.max(det[m]))
        ok = sup_det <= bound
        rep.bands.append({"band": (lo, hi), "sup_det": sup_det, "bound": bound, "ok": ok})
        rep.upper_ok &= ok

    # lower bound on a tangent-excess neighborhood of the minimum node
    kmin = ki[np.argmin(u.values[ki])]
    r = float(np.max(inset)) / 2.0
    from .convexcore import modulus_of_convexity

    eps = modulus_of_convexity(u, max(r, 2 * d.h))
    rep.lower_floor = lower_floor
    if eps > 0 and np.isfinite(eps):
        sec = section(u, int(kmin), eps)
        mem = sec.members[d.interior[sec.members]]
        rep.lower_min = float(np.min(det[mem])) if len(mem) else np.nan
    else:
        rep.lower_min = float(np.min(det[ki]))
    rep.lower_ok = bool(np.isfinite(rep.lower_min) and rep.lower_min >= lower_floor)
    return rep


@dataclass
class GrowthReport:
    """Fitted growth exponents of the dual profile g(t) = u*(0, t)."""

    center: int
    t_samples: np.ndarray
    g_plus: np.ndarray
    g_minus: np.ndarray
    alpha_plus: float
    alpha_minus: float
    fit_residual: float
    band: tuple = (0.1, 1.05)

    @property
    def alpha(self) -> float:
        return min(self.alpha_plus, self.alpha_minus)

    @property
    def in_band(self) -> bool:
        return self.band[0] <= self.alpha <= self.band[1] and \
            max(self.alpha_plus, self.alpha_minus) <= self.band[1]


@dataclass
class SublevelReport:
    """Slab geometry of dual sub-level sets at dyadic heights."""

    heights: list = field(default_factory=list)
    slabs: list = field(default_factory=list)
    nested: bool = True
    slab_constants: list = field(default_factory=list)


@dataclass
class StrictConvexityReport:
    growth: GrowthReport
    sublevel: SublevelReport
    segment_flag: bool
    segments: list = field(default_factory=list)


def _fit_exponent(ts: np.ndarray, gs: np.ndarray) -> tuple[float, float]:
    """Slope-1 of a log-log fit on the smallest decade with >= 6 samples."""
    ok = (ts > 0) & (gs > 0)
    ts, gs = ts[ok], gs[ok]
    if len(ts) < 2:
        return np.nan, np.nan
    t0 = np.min(ts)
    dec = ts <= 10.0 * t0
    if np.sum(dec) >= 6:
        ts, gs = ts[dec], gs[dec]
    lt, lg = np.log(ts), np.log(gs)
    a = np.vstack([lt, np.ones_like(lt)]).T
    coef, res, *_ = np.linalg.lstsq(a, lg, rcond=None)
    resid = float(np.sqrt(res[0] / len(lt))) if len(res) else 0.0
    return float(coef[0] - 1.0), resid


def detect_segments(u: ConvexGridFunction, min_span: float | None = None) -> list:
    """Hull facets spanning >= 3 collinear nodes: discrete graph segments."""
    d = u.domain
    if min_span is None:
        min_span = 3.0 * d.h
    hull = lower_hull(d.nodes, u.values)
    # group facets by (rounded) gradient; a flat region shares one gradient
    key = np.round(hull.grads / _SEGMENT_COLLINEAR_TOL).astype(np.int64)
    groups: dict[tuple[int, int], list[int]] = {}
    for fi, (a, b) in enumerate(key):
        groups.setdefault((int(a), int(b)), []).append(fi)
    segments = []
    for _, fs in sorted(groups.items()):
        nodes = np.unique(hull.facets[fs].ravel())
        if len(nodes) < 3:
            continue
        pts = d.nodes[nodes]
        diam = np.max(np.hypot(*(pts[:, None, :] - pts[None, :, :]).reshape(-1, 2).T))
        if diam < min_span:
            continue
        # require >= 3 collinear member nodes: thin second principal axis
        c = pts.mean(axis=0)
        cov = (pts - c).T @ (pts - c) / len(pts)
        evals = np.linalg.eigvalsh(cov)
        segments.append({
            "gradient": hull.grads[fs[0]].tolist(),
            "nodes": int(len(nodes)),
            "diameter": float(diam),
            "collinear": bool(evals[0] <= max(_SEGMENT_COLLINEAR_TOL, 1e-12 * evals[1])),
        })
    return segments


def strict_convexity_report(u: ConvexGridFunction, center: int | None = None,
                            band=(0.1, 1.05)) -> StrictConvexityReport:
    """Growth exponents and sub-level slabs of the normalized dual profile."""
    d = u.domain
    ki = d.interior_idx
    if center is None:
        inset = _geom.signed_inset_distance(d.nodes, d.polygon)
        scores = u.values[ki] - 0.1 * inset[ki]
        center = int(ki[np.argmin(scores)])
    g0 = subgradients(u)[center]
    # normalized profile: uhat >= 0 with uhat(center) = 0
    uhat = ConvexGridFunction(
        d, u.values - u.values[center] - (d.nodes - d.nodes[center]) @ g0
    )

    tmax = 0.45 * float(np.min(np.ptp(d.nodes, axis=0)))
    ts = tmax * 2.0 ** -np.arange(0, 14, dtype=float)
    ts = ts[ts >= d.h / 4]
    pts_p = np.stack([np.zeros_like(ts), ts], axis=1)
    pts_m = np.stack([np.zeros_like(ts), -ts], axis=1)
    gp = conjugate_at(uhat, pts_p)
    gm = conjugate_at(uhat, pts_m)
    ap, rp = _fit_exponent(ts, gp)
    am, rm = _fit_exponent(ts, gm)
    growth = GrowthReport(
        center=center, t_samples=ts, g_plus=gp, g_minus=gm,
        alpha_plus=ap, alpha_minus=am,
        fit_residual=float(np.nanmax([rp, rm])), band=tuple(band),
    )

    sub = SublevelReport()
    heights = sorted(set(float(np.max(gp[gp > 0], initial=1e-6)) * 2.0 ** -k
                         for k in range(1, 6)))
    prev: set = set()
    grads = subgradients(uhat)
    dual_vals = conjugate_at(uhat, grads[ki])
    for hgt in heights:
        # members of the dual sub-level set sampled along node slopes
        mem = ki[dual_vals < hgt]
        if len(mem) == 0:
            continue
        gsel = grads[mem]
        x1 = float(np.max(np.abs(gsel[:, 0]))) if len(gsel) else 0.0
        tp = float(np.max(gsel[:, 1], initial=0.0))
        tm = float(-np.min(gsel[:, 1], initial=0.0))
        tp_h = _invert_profile(ts, gp, hgt)
        tm_h = _invert_profile(ts, gm, hgt)
        cconst = max(tp / tp_h if tp_h > 0 else 0.0, tm / tm_h if tm_h > 0 else 0.0)
        sub.heights.append(hgt)
        sub.slabs.append({"x1_halfwidth": x1, "t_plus": tp, "t_minus": tm,
                          "t_plus_h": tp_h, "t_minus_h": tm_h})
        sub.slab_constants.append(cconst)
        cur = set(int(m) for m in mem)
        if prev and not prev.issubset(cur):
            sub.nested = False
        prev = cur

    segments = detect_segments(u)
    flag = any(s["collinear"] for s in segments)
    return StrictConvexityReport(growth=growth, sublevel=sub,
                                 segment_flag=flag, segments=segments)


def _invert_profile(ts: np.ndarray, gs: np.ndarray, hgt: float) -> float:
    """Smallest sampled t with g(t) >= hgt (0 if never reached)."""
    ok = gs >= hgt
    if not np.any(ok):
        return 0.0
    return float(np.min(ts[ok]))


@dataclass
class NormalizationMap:
    """Minimum-area enclosing ellipse and the map sending it to the disc."""

    center: np.ndarray
    matrix: np.ndarray  # ellipse: (x-c)^T A (x-c) <= 1
    transform: np.ndarray  # T with T(x-c) mapping E to the unit disc
    area: float
    certificate_ok: bool
    max_violation: float


def john_normalize(points: np.ndarray, tol: float = 1e-8,
                   max_iter: int = 100000) -> NormalizationMap:
    """Khachiyan's iterative reweighting for the minimum enclosing ellipse.

    Certifies (1/n) E inside the hull and all hull vertices inside E.
    """
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    hull = _geom.convex_hull_2d(pts)
    if len(hull) < 3:
        raise DegenerateRegion("need at least 3 non-collinear points")
    p = hull
    npts, dim = p.shape
    q = np.column_stack([p, np.ones(npts)]).T
    w = np.full(npts, 1.0 / npts)
    err = np.inf
    it = 0
    while err > tol and it < max_iter:
        v = q @ np.diag(w) @ q.T
        m = np.einsum("ij,ji->i", q.T, np.linalg.solve(v, q))
        j = int(np.argmax(m))
        step = (m[j] - dim - 1.0) / ((dim + 1.0) * (m[j] - 1.0))
        w2 = (1.0 - step) * w
        w2[j] += step
        err = float(np.linalg.norm(w2 - w))
        w = w2
        it += 1
    c = p.T @ w
    amat = np.linalg.inv(p.T @ np.diag(w) @ p - np.outer(c, c)) / dim
    amat = 0.5 * (amat + amat.T)
    evals, evecs = np.linalg.eigh(amat)
    if np.any(evals <= 0):
        raise DegenerateRegion("ellipse matrix not positive definite")
    transform = np.diag(np.sqrt(evals)) @ evecs.T
    area = float(np.pi / np.sqrt(np.prod(evals)))

    # certificate: hull vertices inside E (<= 1 + tol') and (1/n) E inside hull
    quad = np.einsum("ij,jk,ik->i", p - c, amat, p - c)
    viol = float(np.max(quad) - 1.0)
    ang = 2 * np.pi * np.arange(64) / 64
    circ = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    half_e = c + 0.5 * (np.linalg.inv(transform) @ circ.T).T
    inside = _geom.signed_inset_distance(half_e, hull) >= -1e-9 * (1 + np.abs(hull).max())
    cert = bool(viol <= 1e-6 and np.all(inside))
    return NormalizationMap(center=c, matrix=amat, transform=transform,
                            area=area, certificate_ok=cert, max_violation=viol)


@dataclass
class GaussImageReport:
    gradient_hull: np.ndarray
    circumradius: float
    aperture: float
    hemisphere_risk: bool


def gauss_image_check(u: ConvexGridFunction, gradient_bound: float = 1e3) -> GaussImageReport:
    """Aperture of the Gauss image: bounded gradients keep the normals
    inside a spherical cap strictly inside the lower hemisphere."""
    hull = lower_hull(u.domain.nodes, u.values, incidence=False)
    ghull = _geom.convex_hull_2d(hull.grads)
    rad = float(np.max(np.hypot(*hull.grads.T)))
    aperture = float(np.arctan(rad))
    return GaussImageReport(
        gradient_hull=ghull,
        circumradius=rad,
        aperture=aperture,
        hemisphere_risk=bool(rad > gradient_bound),
    )
