"""Penalty maximization of the inhomogeneous affine area functional.

The problem is posed on an enlarged ball: the boundary data is extended
by capped supporting planes (flat outside the original domain), made
uniformly convex outside by a squared-distance bump with weight 1/k, and
the iterate is held below that extension by a barrier that blows up at
phi_k + 2^-j. Maximization is cyclic nodal coordinate ascent (exact 1D
concave line solves) followed by a convex-envelope projection each sweep,
over a finite (k, j) schedule with warm starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _geom, kernels
from ..convexcore import (
    ConvexGridFunction,
    _envelope_from_hull,
    lower_envelope_values,
    lower_hull,
)
from ..errors import AscentStalled
from ..lattice import GridDomain, disc_domain
from ._penalty_math import penalty_value


@dataclass(frozen=True)
class PenaltyProblem:
    """Discrete data for the penalized maximization on the enlarged ball."""

    omega: GridDomain
    ball: GridDomain
    phi_omega: np.ndarray
    f_omega: np.ndarray
    phi_tilde: np.ndarray
    dist2: np.ndarray
    omega_to_ball: np.ndarray
    outside: np.ndarray
    k_schedule: tuple
    j_schedule: tuple
    k0: float

    @classmethod
    def build(cls, omega: GridDomain, phi, f=0.0, r_factor: float = 3.0,
              k_schedule=(4, 16, 64), j_schedule=(4, 8, 12),
              k0: float | None = None) -> "PenaltyProblem":
        phi_omega = _nodal(phi, omega)
        f_omega = _nodal(f, omega)

        center = omega.polygon.mean(axis=0)
        radius = r_factor * float(np.max(np.hypot(*(omega.polygon - center).T)))
        ball = disc_domain(radius, omega.h, center=tuple(center))

        hull_phi = lower_hull(omega.nodes, phi_omega, incidence=False)
        lip = float(np.max(np.hypot(*hull_phi.grads.T)))
        if k0 is None:
            k0 = float(np.max(phi_omega)) + radius * lip

        ext_pts = np.vstack([omega.nodes, ball.polygon])
        ext_vals = np.concatenate([phi_omega, np.full(len(ball.polygon), k0)])
        ext_hull = lower_hull(ext_pts, ext_vals, incidence=False)
        phi_tilde = _envelope_from_hull(ball.nodes, ext_hull, hull_points=ext_pts)

        inset = _geom.signed_inset_distance(ball.nodes, omega.polygon)
        outside = inset < -1e-9 * omega.h
        dist2 = np.where(outside, np.minimum(0.0, inset) ** 2, 0.0)

        o2b = np.empty(omega.num_nodes, dtype=np.int64)
        for k, (i, j) in enumerate(omega.ij):
            b = ball.node_index(i, j)
            if b < 0:
                raise ValueError("omega node missing from the ball lattice")
            o2b[k] = b
        return cls(
            omega=omega, ball=ball, phi_omega=phi_omega, f_omega=f_omega,
            phi_tilde=phi_tilde, dist2=dist2, omega_to_ball=o2b,
            outside=outside, k_schedule=tuple(k_schedule),
            j_schedule=tuple(j_schedule), k0=k0,
        )

    def phi_k(self, k: float) -> np.ndarray:
        """Uniformly convex (outside omega) approximation of the extension."""
        return self.phi_tilde + self.dist2 / float(k)


@dataclass
class MaximizeReport:
    """Ascent bookkeeping; j_trace holds one monotone trace per stage."""

    j_trace: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    penalty_margin: float = -np.inf
    nonconvex_projections: int = 0
    boundary_trace_error: float = np.nan
    fv_residuals: list = field(default_factory=list)
    sweeps: int = 0
    stalled: bool = False


def _nodal(x, d: GridDomain) -> np.ndarray:
    if callable(x):
        return np.array([float(x(p)) for p in d.nodes])
    return np.broadcast_to(np.asarray(x, dtype=float), (d.num_nodes,)).copy()


def _effective_cells(ball: GridDomain) -> np.ndarray:
    """Interior cell weights absorbing the nearest boundary cells.

    Reproduces the nearest-interior quadrature extension of the area
    integrand as a plain weighted sum over interior nodes.
    """
    eff = np.where(ball.interior, ball.cell_area, 0.0)
    ki = ball.interior_idx
    pts = ball.nodes[ki]
    for b in ball.boundary_idx:
        d2 = np.sum((pts - ball.nodes[b]) ** 2, axis=1)
        eff[ki[np.argmin(d2)]] += ball.cell_area[b]
    return eff


def _objective(values, prob: PenaltyProblem, phik, eff, jpow, theta=0.25) -> float:
    """J(u) = A(u, ball) - load - barrier, with the kernel's area weights."""
    ball = prob.ball
    nb = ball.neighbors
    ki = ball.interior_idx
    h2 = ball.h * ball.h
    h11 = (values[nb[ki, 0]] - 2 * values[ki] + values[nb[ki, 1]]) / h2
    h22 = (values[nb[ki, 2]] - 2 * values[ki] + values[nb[ki, 3]]) / h2
    h12 = (values[nb[ki, 4]] - values[nb[ki, 5]] - values[nb[ki, 6]] + values[nb[ki, 7]]) / (4 * h2)
    det = np.maximum(h11 * h22 - h12 * h12, 0.0)
    area = float(np.dot(eff[ki], det ** theta))
    load = float(np.dot(prob.f_omega * prob.omega.cell_area,
                        values[prob.omega_to_ball]))
    t = jpow * (values - phik)
    pen_nodes = prob.outside
    barrier = float(np.dot(ball.cell_area[pen_nodes],
                           penalty_value(np.minimum(t[pen_nodes], 1.0 - 1e-12))))
    return area - load - barrier


def maximize_variational(prob: PenaltyProblem, init: str | np.ndarray = "phik",
                         max_sweeps: int = 400, tol_j: float = 1e-10,
                         proj_tol: float = 1e-8,
                         report: MaximizeReport | None = None) -> ConvexGridFunction:
    """Maximize the penalized functional; returns the restriction to omega.

    init is "phik" (start at the convex extension), "boundary_hull" (start
    at the envelope of boundary data), or an explicit nodal array on the
    ball. Accepted sweeps have nondecreasing J; the barrier keeps every
    accepted iterate below phi_k + 2^-j outside omega.
    """
    ball = prob.ball
    omega = prob.omega
    rep = report if report is not None else MaximizeReport()

    eff = _effective_cells(ball)
    load = np.zeros(ball.num_nodes)
    load[prob.omega_to_ball] = prob.f_omega * omega.cell_area
    order = ball.interior_idx.astype(np.int64)
    nb = ball.neighbors.astype(np.int64)
    interior8 = ball.interior.astype(np.int8)
    scale = float(np.max(np.abs(prob.phi_tilde))) + 1.0

    u = None
    for stage, (kk, jj) in enumerate(zip(prob.k_schedule, prob.j_schedule)):
        phik = prob.phi_k(kk)
        jpow = float(2 ** jj)
        wall = 1.0 / jpow
        if u is None:
            if isinstance(init, str) and init == "phik":
                u = phik.copy()
            elif isinstance(init, str) and init == "boundary_hull":
                kb = omega.boundary_idx
                pts = np.vstack([omega.nodes[kb], ball.nodes[prob.outside]])
                vals = np.concatenate([prob.phi_omega[kb], phik[prob.outside]])
                h = lower_hull(pts, vals, incidence=False)
                u = _envelope_from_hull(ball.nodes, h, hull_points=pts)
            else:
                u = np.asarray(init, dtype=float).copy()
        # feasibility under the (possibly tighter) barrier, then re-convexify
        viol = prob.outside & (u > phik + 0.5 * wall)
        if np.any(viol):
            u = np.where(viol, phik + 0.25 * wall, u)
            u = lower_envelope_values(ball.nodes, u)
        u[ball.boundary_idx] = phik[ball.boundary_idx]

        pen_mask = prob.outside.astype(np.int8)
        max_step = 0.25 * (float(np.max(u)) - float(np.min(u)) + 1.0)
        j_best = _objective(u, prob, phik, eff, jpow)
        best = u.copy()
        trace = [j_best]
        stage_sweeps = 0
        since_improved = 0
        patience = 40
        while stage_sweeps < max_sweeps:
            work = u.copy()
            moved = kernels.ascent_sweep(work, nb, interior8, eff, load,
                                         pen_mask, phik, ball.cell_area,
                                         jpow, ball.h, order, max_step,
                                         1e-13 * scale)
            env = lower_envelope_values(ball.nodes, work)
            defect = float(np.max(work - env))
            if defect > proj_tol * scale:
                rep.nonconvex_projections += 1
            u = np.minimum(work, env)  # continue from the projected iterate
            j_now = _objective(u, prob, phik, eff, jpow)
            stage_sweeps += 1
            rep.sweeps += 1
            margin = _penalty_margin(u, phik, wall, prob.outside)
            rep.penalty_margin = max(rep.penalty_margin, margin)
            if j_now > j_best + tol_j * (1.0 + abs(j_best)):
                j_best = j_now
                best = u.copy()
                trace.append(j_now)
                since_improved = 0
            else:
                since_improved += 1
            if moved <= 1e-10 * scale or since_improved >= patience:
                break
        u = best
        stalled = stage_sweeps >= max_sweeps and since_improved < patience
        rep.stalled = rep.stalled or stalled
        rep.j_trace.append(trace)
        rep.stages.append({"k": kk, "j": jj, "sweeps": stage_sweeps,
                           "J": j_best, "stalled": stalled})
        if len(trace) <= 1 and stage == 0 and isinstance(init, str) \
                and init == "boundary_hull":
            raise AscentStalled("coordinate ascent could not leave the start",
                                partial=u)

    rep.boundary_trace_error = float(
        np.max(np.abs(u[prob.omega_to_ball[omega.boundary_idx]]
                      - prob.phi_omega[omega.boundary_idx]))
    )
    vals = u[prob.omega_to_ball]
    result = ConvexGridFunction(omega, vals)
    return result


def _penalty_margin(u, phik, wall, outside) -> float:
    if not np.any(outside):
        return -np.inf
    return float(np.max(u[outside] - phik[outside] - wall))
