"""The affine area functional and its variational machinery.

The functional integrates the clamped discrete-Hessian determinant raised
to 1/(n+2); only the regular part of the Monge-Ampere measure contributes
(singular mass is invisible to the integrand by construction). Boundary
cells take the nearest interior integrand value so that constants
integrate exactly over the whole polygon.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convexcore import ConvexGridFunction, normal_image_mass
from .errors import DegenerateHessian
from .lattice import discrete_hessian, fill_from_interior, integrate

_DET_FLOOR = 1e-10


def _area_integrand(u: ConvexGridFunction, exponent: float) -> np.ndarray:
    d = u.domain
    det = discrete_hessian(u.values, d).det
    f = np.full(d.num_nodes, np.nan)
    ki = d.interior_idx
    f[ki] = np.maximum(det[ki], 0.0) ** exponent
    return fill_from_interior(f, d)


def affine_area(u: ConvexGridFunction) -> float:
    """A(u) = integral of max(det H, 0)^(1/(n+2))."""
    d = u.domain
    return integrate(_area_integrand(u, 1.0 / (d.n + 2)), d)


@dataclass(frozen=True)
class FunctionalValue:
    """Inhomogeneous affine functional A_f(u) = A(u) - integral(f u)."""

    area: float
    load: float
    theta: float

    @property
    def total(self) -> float:
        return self.area - self.load


def functional_value(u: ConvexGridFunction, f) -> FunctionalValue:
    d = u.domain
    f = np.broadcast_to(np.asarray(f, dtype=float), (d.num_nodes,))
    load = integrate(f * u.values, d)
    return FunctionalValue(area=affine_area(u), load=load, theta=1.0 / (d.n + 2))


def first_variation_density(u: ConvexGridFunction, eta) -> np.ndarray:
    """Pointwise integrand of the first variation at interior nodes.

    density = w * U^{ij} d_ij(eta) / (n+2) with w = det^{-(n+1)/(n+2)}.
    NaN where eta's stencil Hessian vanishes identically and at boundary
    nodes. Raises DegenerateHessian when the determinant is not positive
    somewhere the density is needed.
    """
    d = u.domain
    eta = np.asarray(eta, dtype=float)
    hu = discrete_hessian(u.values, d)
    he = discrete_hessian(eta, d)
    det = hu.det
    out = np.full(d.num_nodes, np.nan)
    ki = d.interior_idx
    tr = hu.h22[ki] * he.h11[ki] + hu.h11[ki] * he.h22[ki] - 2.0 * hu.h12[ki] * he.h12[ki]
    active = np.abs(tr) > 0
    bad = active & (det[ki] <= _DET_FLOOR)
    if np.any(bad):
        raise DegenerateHessian(
            f"determinant not positive on the support of eta ({int(np.sum(bad))} nodes)"
        )
    w = np.zeros(len(ki))
    pos = det[ki] > _DET_FLOOR
    w[pos] = np.exp(-(d.n + 1) / (d.n + 2) * np.log(det[ki][pos]))
    out[ki] = w * tr / (d.n + 2)
    return out


def first_variation(u: ConvexGridFunction, eta) -> float:
    """d/dt A(u + t eta) at t = 0 for a perturbation eta.

    eta should vanish near the boundary (compact support); the integral
    runs over interior nodes.
    """
    d = u.domain
    dens = first_variation_density(u, eta)
    dens = np.where(np.isfinite(dens), dens, 0.0)
    return integrate(dens, d)


def holder_upper_bound(u: ConvexGridFunction, rho) -> float:
    """Upper bound for A(u) from the full Monge-Ampere measure.

    bound = (sum mass / rho^(n+1))^(1/(n+2)) * (integral rho)^((n+1)/(n+2));
    uses the full per-node masses, so singular mass widens the gap.
    """
    d = u.domain
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (d.num_nodes,))
    if np.any(rho <= 0):
        raise ValueError("rho must be positive everywhere")
    mass = normal_image_mass(u).mass
    ki = d.interior_idx
    s = float(np.sum(mass[ki] / rho[ki] ** (d.n + 1)))
    return s ** (1.0 / (d.n + 2)) * integrate(rho, d) ** ((d.n + 1) / (d.n + 2))


def concavity_check(u: ConvexGridFunction, v: ConvexGridFunction, t: float) -> float:
    """A(t u + (1-t) v) - t A(u) - (1-t) A(v); expected >= -1e-10."""
    if u.domain is not v.domain and u.domain.num_nodes != v.domain.num_nodes:
        raise ValueError("u and v must live on the same domain")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    mix = ConvexGridFunction(u.domain, t * u.values + (1.0 - t) * v.values)
    return affine_area(mix) - t * affine_area(u) - (1.0 - t) * affine_area(v)
