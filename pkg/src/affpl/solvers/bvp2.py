"""Second boundary value problem for the affine maximal surface equation.

The fourth-order equation is solved as the coupled second-order pair
(cofactor-elliptic in w, Monge-Ampere in u) by outer continuation in t
with boundary data t*psi + (1-t) and inner Picard alternation damped on
sup-norm growth. At t = 0 the exact fixed point has w identically 1 and
u solving det = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..convexcore import ConvexGridFunction
from ..errors import ContinuationStalled, DegenerateHessian
from ..lattice import GridDomain, discrete_hessian
from .cofactor import solve_cofactor_elliptic
from .ma_dirichlet import solve_ma_dirichlet
from .residual import ResidualField, affine_maximal_residual


@dataclass(frozen=True)
class BVP2Problem:
    """Data for the second BVP: u = phi, w = psi on the boundary.

    phi must be discretely convex on the domain (ambient data; only its
    boundary trace constrains u). psi must be positive and within the
    stated bounds [1/c0, c0]. f is the prescribed affine mean curvature
    load (L[u] = f).
    """

    domain: GridDomain
    phi: np.ndarray
    psi: np.ndarray
    f: np.ndarray
    steps: int = 8
    tol_fixed: float = 1e-8
    max_inner: int = 60
    tol_ma: float | None = None

    @classmethod
    def build(cls, domain: GridDomain, phi, psi, f=0.0, **kw) -> "BVP2Problem":
        phi = np.broadcast_to(np.asarray(phi, dtype=float), (domain.num_nodes,)).copy()
        psi = np.broadcast_to(np.asarray(psi, dtype=float), (domain.num_nodes,)).copy()
        f = np.broadcast_to(np.asarray(f, dtype=float), (domain.num_nodes,)).copy()
        return cls(domain=domain, phi=phi, psi=psi, f=f, **kw)

    def validate(self) -> float:
        kb = self.domain.boundary_idx
        pb = self.psi[kb]
        if np.any(pb <= 0):
            raise ValueError("psi must be positive on the boundary")
        c0 = max(float(np.max(pb)), float(1.0 / np.min(pb)))
        if not ConvexGridFunction(self.domain, self.phi).is_convex():
            raise ValueError("phi is not discretely convex on the domain")
        return c0


@dataclass
class BVP2Solution:
    u: ConvexGridFunction
    w: np.ndarray
    residual_L: ResidualField
    iterations: int
    converged: bool
    w_bounds: tuple[float, float]
    coupling_defect: float
    history: list = field(default_factory=list)


def solve_second_bvp(p: BVP2Problem) -> BVP2Solution:
    """Continuation in t from (w=1, det=1) to the full data (psi, f)."""
    d = p.domain
    c0 = p.validate()
    n = d.n
    expo = -(n + 2.0) / (n + 1.0)
    scale = float(np.max(np.abs(p.phi))) + 1.0

    info: dict = {}
    u = solve_ma_dirichlet(d, p.phi, density=np.ones(d.num_nodes), info=info,
                           tol_ma=p.tol_ma)
    w = np.ones(d.num_nodes)
    iterations = 0
    history: list[tuple[float, int, float]] = []

    for k in range(1, p.steps + 1):
        t = k / p.steps
        wb = t * p.psi + (1.0 - t)
        ft = t * p.f
        best = np.inf
        stagnant = 0
        converged_step = False
        for inner in range(p.max_inner):
            w = solve_cofactor_elliptic(u, ft, wb)
            if np.any(w[d.interior] <= 0):
                raise DegenerateHessian("w lost positivity during continuation")
            rho = np.full(d.num_nodes, np.nan)
            rho[d.interior_idx] = w[d.interior_idx] ** expo
            rho = np.where(np.isfinite(rho), rho, 1.0)
            u_new = solve_ma_dirichlet(d, p.phi, density=rho, init=u.values,
                                       tol_ma=p.tol_ma)
            delta = float(np.max(np.abs(u_new.values - u.values)))
            iterations += 1
            if delta < best:
                best = delta
                stagnant = 0
                u = u_new
            else:
                stagnant += 1
                # damp: move halfway toward the candidate
                mixed = 0.5 * (u.values + u_new.values)
                u = solve_ma_dirichlet(d, p.phi, density=rho, init=mixed,
                                       tol_ma=p.tol_ma)
            if delta <= p.tol_fixed * scale:
                converged_step = True
                history.append((t, inner + 1, delta))
                break
            if stagnant >= 5:
                raise ContinuationStalled(
                    f"fixed point stalled at t={t} (delta {delta:.3e})",
                    partial=BVP2Solution(
                        u=u, w=w, residual_L=affine_maximal_residual(u, p.f),
                        iterations=iterations, converged=False,
                        w_bounds=_bounds(w, d), coupling_defect=np.nan,
                        history=history,
                    ),
                )
        if not converged_step:
            raise ContinuationStalled(
                f"inner alternation exhausted at t={t}",
                partial=None,
            )

    det = discrete_hessian(u.values, d).det
    ki = d.interior_idx
    defect = float(np.max(np.abs(det[ki] - w[ki] ** expo)))
    res = affine_maximal_residual(u, p.f)
    return BVP2Solution(
        u=u,
        w=w,
        residual_L=res,
        iterations=iterations,
        converged=True,
        w_bounds=_bounds(w, d),
        coupling_defect=defect,
        history=history,
    )


def _bounds(w: np.ndarray, d: GridDomain) -> tuple[float, float]:
    wi = w[d.interior] if np.any(d.interior) else w
    return float(np.min(wi)), float(np.max(wi))
