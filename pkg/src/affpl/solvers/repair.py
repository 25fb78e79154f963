"""Singular-mass repair by local Dirichlet resolution and splicing.

Where a convex function carries singular Monge-Ampere mass, solving the
mass problem K * regular + 2 K^2 on an interior ball and splicing the
solution over {v > u} strictly increases the inhomogeneous functional
for large K. Exposed both as a test generator and as an optional repair
pass for the variational maximizer.
"""

from __future__ import annotations

import numpy as np

from .. import _geom
from ..convexcore import ConvexGridFunction, lower_envelope_values, normal_image_mass
from ..errors import Infeasible
from ..lattice import build_domain
from .ma_dirichlet import solve_ma_dirichlet


def singular_repair_step(u: ConvexGridFunction, K: float, ball_polygon,
                         info: dict | None = None) -> ConvexGridFunction:
    """Splice the solution of mass = K mu_r[u] + 2 K^2 |cell| on the ball.

    ball_polygon must be convex and strictly interior to u's domain; K >= 1.
    Returns the spliced (envelope-projected) function; equality v = u keeps
    u, only strict v > u is replaced.
    """
    if K < 1.0:
        raise ValueError("K must be at least 1")
    d = u.domain
    poly = _geom.require_convex_ccw(np.asarray(ball_polygon, dtype=float))
    if np.min(_geom.signed_inset_distance(poly, d.polygon)) <= 0:
        raise Infeasible("repair ball must be strictly interior to the domain")
    sub = build_domain(poly, d.h)

    parent_idx = np.empty(sub.num_nodes, dtype=np.int64)
    for k, (i, j) in enumerate(sub.ij):
        p = d.node_index(i, j)
        if p < 0:
            raise Infeasible("repair ball nodes must lie on the parent lattice")
        parent_idx[k] = p

    measure = normal_image_mass(u)
    target = np.zeros(sub.num_nodes)
    ks = sub.interior_idx
    target[ks] = K * measure.regular[parent_idx[ks]] + 2.0 * K * K * sub.cell_area[ks]

    g = u.values[parent_idx]
    v = solve_ma_dirichlet(sub, g, masses=target)

    spliced = u.values.copy()
    gain = v.values - u.values[parent_idx]
    splice_set = gain > 0.0
    spliced[parent_idx[splice_set]] = v.values[splice_set]

    env = lower_envelope_values(d.nodes, spliced)
    defect = float(np.max(spliced - env))
    out = ConvexGridFunction(d, np.minimum(spliced, env))
    if info is not None:
        info["splice_count"] = int(np.sum(splice_set))
        info["projection_defect"] = defect
        info["ball_mass_total"] = float(np.sum(target[ks]))
    return out
