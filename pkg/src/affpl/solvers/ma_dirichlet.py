"""Generalized Monge-Ampere Dirichlet solver on lattice domains.

Two target forms are supported. Mass mode prescribes the subgradient
polygon area at every interior node (the Aleksandrov formulation); it is
solved by a damped Newton iteration on the power-diagram mass map, whose
Jacobian entries are edge lengths of the subgradient polygons, with the
classical Oliker-Prussner nodal lifting retained as the monotone baseline
(used whenever a target mass vanishes). Density mode prescribes the
stencil determinant; it is solved by damped Newton on the 9-point
discretization, warm-started from the mass-mode solution.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .. import kernels
from ..convexcore import ConvexGridFunction, lower_hull, normal_image_mass, _envelope_from_hull
from ..errors import Infeasible, LinearSolveFailure, MaxIterations
from ..lattice import GridDomain, discrete_hessian
from .cofactor import cofactor_operator_matrix

_BOUNDARY_TOL = 1e-9


def _as_nodal(x, d: GridDomain) -> np.ndarray:
    if callable(x):
        return np.array([float(x(p)) for p in d.nodes])
    return np.broadcast_to(np.asarray(x, dtype=float), (d.num_nodes,)).copy()


def boundary_envelope_values(d: GridDomain, g) -> np.ndarray:
    """Envelope of the boundary data evaluated at every node."""
    g = _as_nodal(g, d)
    kb = d.boundary_idx
    hull = lower_hull(d.nodes[kb], g[kb], incidence=False)
    return _envelope_from_hull(d.nodes, hull, hull_points=d.nodes[kb])


def check_boundary_convex(d: GridDomain, g) -> np.ndarray:
    """Raise Infeasible unless the boundary data admits a convex extension."""
    g = _as_nodal(g, d)
    env = boundary_envelope_values(d, g)
    kb = d.boundary_idx
    scale = float(np.max(np.abs(g[kb]))) + 1.0
    gap = np.max(g[kb] - env[kb])
    if gap > _BOUNDARY_TOL * scale:
        raise Infeasible(f"boundary data not convex-extendable (defect {gap:.3e})")
    return env


def _hull_masses(u: ConvexGridFunction) -> np.ndarray:
    return normal_image_mass(u, require_convex=False).mass


def solve_ma_dirichlet(d: GridDomain, g, *, masses=None, density=None,
                       tol_ma: float | None = None, max_iter: int = 80,
                       init=None, verify: bool = True,
                       info: dict | None = None) -> ConvexGridFunction:
    """Solve the discrete MA Dirichlet problem in mass or density form.

    Exactly one of ``masses`` (per-node subgradient areas) and ``density``
    (per-node stencil determinant) must be given; boundary values g are
    imposed at boundary nodes. Returns the discretely convex solution.
    """
    if (masses is None) == (density is None):
        raise ValueError("give exactly one of masses= or density=")
    env = check_boundary_convex(d, g)
    g = _as_nodal(g, d)
    info = info if info is not None else {}

    if masses is not None:
        target = _as_nodal(masses, d)
        if np.any(target[d.interior] < 0):
            raise ValueError("target masses must be nonnegative")
        if tol_ma is None:
            tol_ma = max(1e-12, 1e-9 * float(np.max(target)))
        if np.all(target[d.interior] > 0):
            u = _newton_mass(d, target, g, env, tol_ma, max_iter, init, info)
        else:
            u = op_lifting_solve(d, target, g, tol=tol_ma, info=info)
        if verify:
            check = _hull_masses(u)
            worst = float(np.max(np.abs(check - target)[d.interior]))
            info["mass_defect"] = worst
            if worst > max(50.0 * tol_ma, 1e-9):
                raise MaxIterations(f"mass postcondition failed (defect {worst:.3e})")
        return u

    rho = _as_nodal(density, d)
    if np.any(rho[d.interior] < 0):
        raise ValueError("density must be nonnegative")
    if tol_ma is None:
        tol_ma = 1e-10 * max(1.0, float(np.max(rho)))
    if init is None:
        pre = dict(info)
        u0 = solve_ma_dirichlet(
            d, g, masses=rho * d.cell_area, verify=False, info=pre,
            tol_ma=max(1e-12, 1e-7 * float(np.max(rho * d.cell_area))),
        )
        info["mass_presolve_iters"] = pre.get("iterations")
        start = u0.values
    else:
        start = np.asarray(init, dtype=float).copy()
        start[d.boundary] = g[d.boundary]
    u = _newton_density(d, rho, g, start, tol_ma, max_iter, info)
    if verify and not u.is_convex(interior_only=True):
        raise MaxIterations("density-mode solution failed the convexity check")
    return u


def _newton_mass(d, target, g, env, tol, max_iter, init, info) -> ConvexGridFunction:
    grid, gi0, gj0 = kernels.grid_index_map(d)
    ki = d.interior_idx
    nk = len(ki)
    pos = np.full(d.num_nodes, -1, dtype=np.int64)
    pos[ki] = np.arange(nk)

    if init is not None:
        u = np.asarray(init, dtype=float).copy()
        u[d.boundary] = g[d.boundary]
    else:
        u = env.copy()
        u[d.boundary] = g[d.boundary]
        # make every interior node a strict hull vertex
        c = d.nodes[ki].mean(axis=0)
        r2 = np.sum((d.nodes - c) ** 2, axis=1)
        cell = float(np.mean(d.cell_area[ki]))
        kappa = 0.5 * np.sqrt(max(float(np.mean(target[ki])) / cell, 1e-6))
        u[ki] -= kappa * (float(np.max(r2)) - r2[ki])

    def eval_masses(vals, want_jac):
        return kernels.masses(d.ij, vals, grid, gi0, gj0, ki, d.h, want_jac=want_jac)

    mass, rows, cols, vals = eval_masses(u, True)
    fres = mass - target[ki]
    norm = float(np.max(np.abs(fres)))
    it = 0
    while norm > tol and it < max_iter:
        keep = pos[cols] >= 0
        jac = sp.csr_matrix(
            (vals[keep], (rows[keep], pos[cols[keep]])), shape=(nk, nk)
        )
        try:
            delta = spla.spsolve(jac, -fres)
        except Exception as exc:
            raise LinearSolveFailure(f"mass Jacobian solve failed: {exc}") from exc
        if not np.all(np.isfinite(delta)):
            raise LinearSolveFailure("mass Jacobian solve returned non-finite step")
        alpha = 1.0
        while alpha > 2 ** -30:
            trial = u.copy()
            trial[ki] += alpha * delta
            m2, r2_, c2, v2 = eval_masses(trial, True)
            f2 = m2 - target[ki]
            if np.min(m2) > 0 and float(np.max(np.abs(f2))) <= (1 - 0.5 * alpha) * norm:
                u, mass, fres = trial, m2, f2
                rows, cols, vals = r2_, c2, v2
                norm = float(np.max(np.abs(f2)))
                break
            alpha *= 0.5
        else:
            raise MaxIterations(f"mass Newton stalled at residual {norm:.3e}")
        it += 1
    if norm > tol:
        raise MaxIterations(f"mass Newton did not reach tolerance ({norm:.3e} > {tol:.3e})")
    info["iterations"] = it
    info["mass_residual"] = norm
    return ConvexGridFunction(d, u)


def _newton_density(d, rho, g, start, tol, max_iter, info) -> ConvexGridFunction:
    ki = d.interior_idx
    u = start.copy()
    u[d.boundary] = g[d.boundary]
    norm = np.inf
    for it in range(max_iter):
        hess = discrete_hessian(u, d)
        fres = hess.det[ki] - rho[ki]
        norm = float(np.max(np.abs(fres)))
        if norm <= tol:
            info["density_iterations"] = it
            info["density_residual"] = norm
            return ConvexGridFunction(d, u)
        amat = cofactor_operator_matrix(hess, d, det_floor=None)
        rhs = np.zeros(d.num_nodes)
        rhs[ki] = -fres
        try:
            delta = spla.spsolve(amat.tocsr(), rhs)
        except Exception as exc:
            raise LinearSolveFailure(f"density Newton solve failed: {exc}") from exc
        alpha = 1.0
        while alpha > 2 ** -30:
            trial = u.copy()
            trial[ki] += alpha * delta[ki]
            d2 = discrete_hessian(trial, d).det[ki] - rho[ki]
            if float(np.max(np.abs(d2))) <= (1 - 0.25 * alpha) * norm:
                u = trial
                break
            alpha *= 0.5
        else:
            raise MaxIterations(f"density Newton stalled at residual {norm:.3e}")
    raise MaxIterations(f"density Newton did not converge ({norm:.3e} > {tol:.3e})")


def op_lifting_solve(d: GridDomain, target, g, tol: float = 1e-11,
                     max_sweeps: int = 20000, info: dict | None = None) -> ConvexGridFunction:
    """Monotone Oliker-Prussner nodal lifting (slow, convergent baseline).

    Starts from the envelope of the boundary data and lowers one node at a
    time until every interior subgradient area matches its target.
    """
    target = _as_nodal(target, d)
    env = check_boundary_convex(d, g)
    g = _as_nodal(g, d)
    u = env.copy()
    u[d.boundary] = g[d.boundary]
    grid, gi0, gj0 = kernels.grid_index_map(d)
    ki = d.interior_idx
    info = info if info is not None else {}

    def mass_at(k, vals):
        return kernels.node_mass(k, d.ij, vals, grid, gi0, gj0, d.h)

    def mass_lowered(k, base, delta, vals):
        vals[k] = base - delta
        m = mass_at(k, vals)
        vals[k] = base
        return m

    worst = np.inf
    for sweep in range(max_sweeps):
        worst = 0.0
        for k in ki:
            t = target[k]
            base = u[k]
            gap = t - mass_at(k, u)
            if gap > worst:
                worst = gap
            if gap <= tol:
                continue
            # bracket the lift, then bisect mass(u_k - delta) = target
            lo, hi = 0.0, d.h
            for _ in range(200):
                if mass_lowered(k, base, hi, u) >= t:
                    break
                lo, hi = hi, 2.0 * hi
            else:
                raise MaxIterations("lifting bracket failed (infeasible target?)")
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                if mass_lowered(k, base, mid, u) >= t:
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= 1e-17 * (1.0 + abs(base)):
                    break
            u[k] = base - hi
        if worst <= tol:
            info["sweeps"] = sweep + 1
            return ConvexGridFunction(d, u)
    raise MaxIterations(f"lifting did not converge in {max_sweeps} sweeps (gap {worst:.3e})")
