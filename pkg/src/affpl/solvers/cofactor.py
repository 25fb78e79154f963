"""Linearized cofactor-elliptic solver: U^{ij} w_ij = f with Dirichlet data.

The 9-point operator uses the cofactor of the discrete Hessian of a given
convex function; it is also the exact linearization of the stencil
determinant, so the density-mode Newton solver shares the assembly.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..convexcore import ConvexGridFunction
from ..errors import DegenerateHessian, LinearSolveFailure
from ..lattice import GridDomain, HessianField, discrete_hessian

DET_FLOOR = 1e-10


def cofactor_operator_matrix(hess: HessianField, d: GridDomain,
                             det_floor: float | None = DET_FLOOR) -> sp.lil_matrix:
    """Sparse matrix of w -> U^{ij} d_ij w (identity rows at boundary).

    Passing det_floor=None skips the ellipticity check (used by the Newton
    linearization, which damps through near-degenerate iterates).
    """
    ki = d.interior_idx
    if det_floor is not None:
        bad = hess.det[ki] <= det_floor
        if np.any(bad):
            raise DegenerateHessian(
                f"determinant below floor {det_floor} at {int(np.sum(bad))} interior nodes"
            )
    n = d.num_nodes
    h2 = d.h * d.h
    nb = d.neighbors
    u11 = hess.h22  # cofactor entries
    u22 = hess.h11
    u12 = -hess.h12

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    add(ki, ki, -2.0 * (u11[ki] + u22[ki]) / h2)
    add(ki, nb[ki, 0], u11[ki] / h2)
    add(ki, nb[ki, 1], u11[ki] / h2)
    add(ki, nb[ki, 2], u22[ki] / h2)
    add(ki, nb[ki, 3], u22[ki] / h2)
    for m, s in ((4, 1.0), (5, -1.0), (6, -1.0), (7, 1.0)):
        add(ki, nb[ki, m], s * u12[ki] / (2.0 * h2))
    kb = d.boundary_idx
    add(kb, kb, np.ones(len(kb)))

    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return mat.tocsr()


def solve_cofactor_elliptic(u: ConvexGridFunction, f, wb,
                            det_floor: float = DET_FLOOR) -> np.ndarray:
    """Solve U^{ij} w_ij = f with w = wb on the boundary nodes.

    Requires the discrete Hessian determinant of u to stay above
    det_floor at interior nodes (uniform ellipticity).
    """
    d = u.domain
    hess = discrete_hessian(u.values, d)
    amat = cofactor_operator_matrix(hess, d, det_floor=det_floor)
    rhs = np.zeros(d.num_nodes)
    rhs[d.interior_idx] = np.broadcast_to(np.asarray(f, dtype=float), (d.num_nodes,))[
        d.interior_idx
    ]
    rhs[d.boundary_idx] = np.broadcast_to(np.asarray(wb, dtype=float), (d.num_nodes,))[
        d.boundary_idx
    ]
    try:
        w = spla.spsolve(amat, rhs)
    except Exception as exc:
        raise LinearSolveFailure(f"cofactor-elliptic solve failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise LinearSolveFailure("cofactor-elliptic solve returned non-finite values")
    return w
