"""Pointwise residual of the affine maximal surface equation on lattices.

L[u] = U^{ij} d_ij(w) with w = det(H)^(-(n+1)/(n+2)); the residual is
L[u] - f and the affine mean curvature is -L[u]/(n+1). Evaluation needs w
on a full stencil, so it is restricted to interior nodes whose neighbors
are themselves interior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _geom
from ..convexcore import ConvexGridFunction
from ..errors import DegenerateHessian
from ..lattice import GridDomain, discrete_hessian

DET_FLOOR = 1e-10


@dataclass(frozen=True)
class ResidualField:
    """Residual L[u] - f and affine mean curvature per node (NaN off-support)."""

    domain: GridDomain
    values: np.ndarray
    mean_curvature: np.ndarray
    eval_mask: np.ndarray
    excluded: int = 0

    def sup(self, min_boundary_dist: float = 0.0) -> float:
        return residual_sup(self.values, self.domain, min_boundary_dist)


def residual_sup(values: np.ndarray, d: GridDomain, min_boundary_dist: float = 0.0) -> float:
    """Sup-norm over evaluated nodes at distance >= dist from the boundary."""
    ok = np.isfinite(values)
    if min_boundary_dist > 0.0:
        inset = _geom.signed_inset_distance(d.nodes, d.polygon)
        ok &= inset >= min_boundary_dist
    if not np.any(ok):
        return np.nan
    return float(np.max(np.abs(values[ok])))


def affine_maximal_residual(u: ConvexGridFunction, f=0.0,
                            det_floor: float = DET_FLOOR) -> ResidualField:
    """Residual of L[u] = f on nodes with a full interior 2-ring."""
    d = u.domain
    n = d.n
    hess = discrete_hessian(u.values, d)
    det = hess.det
    nb = d.neighbors

    ki = d.interior_idx
    interior = d.interior
    eval_mask = np.zeros(d.num_nodes, dtype=bool)
    eval_mask[ki] = np.all(interior[nb[ki]], axis=1)
    ks0 = np.flatnonzero(eval_mask)
    if len(ks0) == 0:
        raise ValueError("domain has no nodes with a full interior 2-ring")

    # evaluate only where the determinant precondition holds on the whole
    # w-stencil; fully degenerate inputs are an error
    posdet = np.zeros(d.num_nodes, dtype=bool)
    posdet[ki] = det[ki] > det_floor
    usable = posdet[ks0] & np.all(posdet[nb[ks0]], axis=1)
    excluded = int(np.sum(~usable))
    eval_mask[ks0[~usable]] = False
    ks = ks0[usable]
    if len(ks) == 0:
        raise DegenerateHessian(
            "determinant not positive anywhere a residual stencil fits"
        )

    needed = np.zeros(d.num_nodes, dtype=bool)
    needed[ks] = True
    needed[nb[ks].ravel()] = True
    needed &= posdet
    w = np.full(d.num_nodes, np.nan)
    kw = np.flatnonzero(needed)
    w[kw] = np.exp(-(n + 1) / (n + 2) * np.log(det[kw]))

    h2 = d.h * d.h
    w11 = (w[nb[ks, 0]] - 2.0 * w[ks] + w[nb[ks, 1]]) / h2
    w22 = (w[nb[ks, 2]] - 2.0 * w[ks] + w[nb[ks, 3]]) / h2
    w12 = (w[nb[ks, 4]] - w[nb[ks, 5]] - w[nb[ks, 6]] + w[nb[ks, 7]]) / (4.0 * h2)

    lop = hess.h22[ks] * w11 + hess.h11[ks] * w22 - 2.0 * hess.h12[ks] * w12
    fv = np.broadcast_to(np.asarray(f, dtype=float), (d.num_nodes,))[ks]

    res = np.full(d.num_nodes, np.nan)
    ha = np.full(d.num_nodes, np.nan)
    res[ks] = lop - fv
    ha[ks] = -lop / (n + 1)
    return ResidualField(domain=d, values=res, mean_curvature=ha,
                         eval_mask=eval_mask, excluded=excluded)
