"""Pure-Python implementations of the hot kernels.

Selected at import time when the compiled extension is unavailable; the
algorithms and evaluation order mirror _speedups.pyx so both paths agree
to float rounding. Everything here works on plain arrays so the Cython
port is mechanical.
"""

from __future__ import annotations

import numpy as np

IMPL = "python"


# ---------------------------------------------------------------------------
# subgradient polygons by incremental halfplane intersection
# ---------------------------------------------------------------------------

def _clip_owned(verts, owners, nx, ny, c, owner):
    """Clip polygon {p : nx*px + ny*py <= c}, tracking per-edge owners.

    verts is a list of (x, y); owners[i] owns the edge verts[i]->verts[i+1].
    """
    m = len(verts)
    if m == 0:
        return verts, owners
    s = [nx * v[0] + ny * v[1] - c for v in verts]
    out_v = []
    out_o = []
    for i in range(m):
        j = (i + 1) % m
        a, b = verts[i], verts[j]
        sa, sb = s[i], s[j]
        if sa <= 0.0:
            out_v.append(a)
            out_o.append(owners[i])
            if sb > 0.0:
                t = sa / (sa - sb)
                out_v.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
                out_o.append(owner)
        elif sb <= 0.0:
            t = sa / (sa - sb)
            out_v.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
            out_o.append(owners[i])
    return out_v, out_o


def _poly_area(verts):
    m = len(verts)
    if m < 3:
        return 0.0
    a = 0.0
    for i in range(m):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % m]
        a += x0 * y1 - x1 * y0
    return 0.5 * a


def _node_polygon(k, ij, values, grid, gi0, gj0, h, patience, max_ring):
    """Subgradient polygon of node k with per-edge owner node indices."""
    ik, jk = int(ij[k, 0]), int(ij[k, 1])
    uk = values[k]
    gh, gw = grid.shape

    def lookup(i, j):
        a, b = i - gi0, j - gj0
        if 0 <= a < gh and 0 <= b < gw:
            return int(grid[a, b])
        return -1

    # componentwise bound from the 4 axis neighbors (always present for
    # interior nodes); the start box never binds after ring 1
    bound = 1.0
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        m = lookup(ik + di, jk + dj)
        if m >= 0:
            bound = max(bound, abs(values[m] - uk) / h)
    bound = 2.0 * bound + 1.0

    verts = [(-bound, -bound), (bound, -bound), (bound, bound), (-bound, bound)]
    owners = [-1, -1, -1, -1]

    ring = 1
    quiet = 0
    while ring <= max_ring and quiet < patience and len(verts) >= 3:
        cut = False
        for di in range(-ring, ring + 1):
            for dj in range(-ring, ring + 1):
                if max(abs(di), abs(dj)) != ring:
                    continue
                m = lookup(ik + di, jk + dj)
                if m < 0:
                    continue
                nx, ny = di * h, dj * h
                c = values[m] - uk
                worst = max(nx * v[0] + ny * v[1] for v in verts)
                if worst > c:
                    verts, owners = _clip_owned(verts, owners, nx, ny, c, m)
                    cut = True
                    if len(verts) < 3:
                        return verts, owners
        quiet = 0 if cut else quiet + 1
        ring += 1
    return verts, owners


def node_mass(k, ij, values, grid, gi0, gj0, h, patience=3, max_ring=10 ** 9):
    verts, _ = _node_polygon(k, ij, values, grid, gi0, gj0, h, patience, max_ring)
    return _poly_area(verts)


def masses(ij, values, grid, gi0, gj0, interior_idx, h,
           patience=3, max_ring=10 ** 9, want_jac=True):
    """Subgradient-polygon areas and their derivatives w.r.t. nodal values.

    Returns (mass, rows, cols, vals): mass aligned with interior_idx; the
    triplets give d(mass_row)/d(values_col) including the diagonal.
    """
    nk = len(interior_idx)
    mass = np.zeros(nk)
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for t in range(nk):
        k = int(interior_idx[t])
        verts, owners = _node_polygon(k, ij, values, grid, gi0, gj0, h, patience, max_ring)
        mass[t] = _poly_area(verts)
        if not want_jac or len(verts) < 3:
            continue
        diag = 0.0
        m = len(verts)
        acc: dict[int, float] = {}
        for i in range(m):
            o = owners[i]
            if o < 0:
                continue
            x0, y0 = verts[i]
            x1, y1 = verts[(i + 1) % m]
            elen = ((x1 - x0) ** 2 + (y1 - y0) ** 2) ** 0.5
            vlen = h * ((ij[o, 0] - ij[k, 0]) ** 2 + (ij[o, 1] - ij[k, 1]) ** 2) ** 0.5
            if vlen <= 0:
                continue
            d = elen / vlen
            acc[o] = acc.get(o, 0.0) + d
            diag -= d
        for o in sorted(acc):
            rows.append(t)
            cols.append(o)
            vals.append(acc[o])
        rows.append(t)
        cols.append(k)
        vals.append(diag)
    return (mass, np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64),
            np.asarray(vals, dtype=float))


# ---------------------------------------------------------------------------
# coordinate-ascent sweep for the penalty functional
# ---------------------------------------------------------------------------

def _penalty(t):
    """Smooth convex barrier profile on t < 1: t^4 + 16/(1-t)^4 - 64 t - 16."""
    o = 1.0 - t
    return t * t * t * t + 16.0 / (o * o * o * o) - 64.0 * t - 16.0


def _penalty_d(t):
    o = 1.0 - t
    return 4.0 * t * t * t + 64.0 / (o * o * o * o * o) - 64.0


def _det_at(x, values, nb, h2):
    """Stencil determinant at node x; nb row must be complete."""
    n = nb[x]
    h11 = (values[n[0]] - 2.0 * values[x] + values[n[1]]) / h2
    h22 = (values[n[2]] - 2.0 * values[x] + values[n[3]]) / h2
    h12 = (values[n[4]] - values[n[5]] - values[n[6]] + values[n[7]]) / (4.0 * h2)
    return h11, h22, h12, h11 * h22 - h12 * h12


def _dj_at(i, v, values, nb, interior, eff_cell, load, pen_mask, pen_phi,
           pen_cell, jpow, h2, theta):
    """Derivative of the local objective at node i w.r.t. its value v."""
    old = values[i]
    values[i] = v
    s = 0.0
    # contribution of node i's own cell
    if interior[i]:
        h11, h22, h12, det = _det_at(i, values, nb, h2)
        if det > 0.0:
            ddet = (h22 + h11) * (-2.0 / h2)
            s += eff_cell[i] * theta * det ** (theta - 1.0) * ddet
    n = nb[i]
    # axis neighbors: i appears in their h11 (0,1) or h22 (2,3) stencil
    for m in range(4):
        x = n[m]
        if x >= 0 and interior[x]:
            h11, h22, h12, det = _det_at(x, values, nb, h2)
            if det > 0.0:
                ddet = (h22 if m < 2 else h11) / h2
                s += eff_cell[x] * theta * det ** (theta - 1.0) * ddet
    # corner neighbors: i appears in their mixed stencil
    for m in range(4, 8):
        x = n[m]
        if x >= 0 and interior[x]:
            h11, h22, h12, det = _det_at(x, values, nb, h2)
            if det > 0.0:
                sign = 1.0 if m in (4, 7) else -1.0
                ddet = -2.0 * h12 * sign / (4.0 * h2)
                s += eff_cell[x] * theta * det ** (theta - 1.0) * ddet
    s -= load[i]
    if pen_mask[i]:
        s -= pen_cell[i] * jpow * _penalty_d(jpow * (v - pen_phi[i]))
    values[i] = old
    return s


def _convexity_bracket(i, values, nb):
    """Directional-convexity bounds for the value at node i.

    Upper bound: midpoint convexity at i along the 4 lattice line pairs.
    Lower bound: midpoint convexity at each neighbor along the same line
    (2 u(i+d) - u(i+2d)); digging below it would break the neighbor.
    """
    pairs = ((0, 1), (2, 3), (4, 7), (5, 6))
    hi = np.inf
    lo = -np.inf
    for a, b in pairs:
        na, nbb = nb[i, a], nb[i, b]
        if na >= 0 and nbb >= 0:
            m = 0.5 * (values[na] + values[nbb])
            if m < hi:
                hi = m
    for m in range(8):
        x = nb[i, m]
        if x < 0:
            continue
        xx = nb[x, m]
        if xx < 0:
            continue
        b = 2.0 * values[x] - values[xx]
        if b > lo:
            lo = b
    return lo, hi


def ascent_sweep(values, nb, interior, eff_cell, load, pen_mask, pen_phi,
                 pen_cell, jpow, h, order, max_step, line_tol, theta=0.25):
    """One cyclic coordinate-ascent sweep; mutates values, returns sup move.

    Each node solves its 1D concave subproblem by bisection on the
    derivative inside the trust interval [v - max_step, v + max_step]
    intersected with the barrier wall and the directional-convexity
    bracket (staying near the convex cone keeps the objective concave and
    the per-sweep envelope projection cheap).
    """
    h2 = h * h
    moved = 0.0
    for i in order:
        i = int(i)
        v0 = values[i]
        lo_c, hi_c = _convexity_bracket(i, values, nb)
        lo = max(v0 - max_step, lo_c)
        hi = min(v0 + max_step, hi_c)
        if pen_mask[i]:
            wall = pen_phi[i] + (1.0 - 1e-9) / jpow
            if hi > wall:
                hi = wall
        if not lo < hi:
            continue
        args = (values, nb, interior, eff_cell, load, pen_mask, pen_phi,
                pen_cell, jpow, h2, theta)
        # J is concave along the coordinate, so its derivative is
        # nonincreasing: the maximizer is lo, hi, or the zero crossing.
        if _dj_at(i, lo, *args) <= 0.0:
            vstar = lo
        elif _dj_at(i, hi, *args) >= 0.0:
            vstar = hi
        else:
            vstar = _bisect(lo, hi, args, i, line_tol)
        values[i] = vstar
        mv = abs(vstar - v0)
        if mv > moved:
            moved = mv
    return moved


def _bisect(lo, hi, args, i, tol):
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol:
            return mid
        if _dj_at(i, mid, *args) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
