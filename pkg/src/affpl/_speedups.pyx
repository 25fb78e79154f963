# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: subgradient-polygon masses and ascent sweeps.

Mirrors affpl._fallback routine for routine; the pure-Python module is
the reference implementation and stays importable without this one.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, log, exp, sqrt

cnp.import_array()

IMPL = "cython"

DEF MAXV = 256


# ---------------------------------------------------------------------------
# halfplane polygons
# ---------------------------------------------------------------------------

cdef struct Poly:
    int m
    double vx[MAXV]
    double vy[MAXV]
    long owner[MAXV]


cdef int _clip(Poly* p, double nx, double ny, double c, long owner) nogil:
    """Clip {q : nx qx + ny qy <= c}; returns 0 on overflow."""
    cdef double s[MAXV]
    cdef double ox[MAXV]
    cdef double oy[MAXV]
    cdef long oo[MAXV]
    cdef int i, j, m, k
    cdef double t
    m = p.m
    if m == 0:
        return 1
    for i in range(m):
        s[i] = nx * p.vx[i] + ny * p.vy[i] - c
    k = 0
    for i in range(m):
        j = i + 1
        if j == m:
            j = 0
        if s[i] <= 0.0:
            if k >= MAXV - 2:
                return 0
            ox[k] = p.vx[i]
            oy[k] = p.vy[i]
            oo[k] = p.owner[i]
            k += 1
            if s[j] > 0.0:
                t = s[i] / (s[i] - s[j])
                ox[k] = p.vx[i] + t * (p.vx[j] - p.vx[i])
                oy[k] = p.vy[i] + t * (p.vy[j] - p.vy[i])
                oo[k] = owner
                k += 1
        elif s[j] <= 0.0:
            if k >= MAXV - 2:
                return 0
            t = s[i] / (s[i] - s[j])
            ox[k] = p.vx[i] + t * (p.vx[j] - p.vx[i])
            oy[k] = p.vy[i] + t * (p.vy[j] - p.vy[i])
            oo[k] = p.owner[i]
            k += 1
    p.m = k
    for i in range(k):
        p.vx[i] = ox[i]
        p.vy[i] = oy[i]
        p.owner[i] = oo[i]
    return 1


cdef double _area(Poly* p) nogil:
    cdef double a = 0.0
    cdef int i, j
    if p.m < 3:
        return 0.0
    for i in range(p.m):
        j = i + 1
        if j == p.m:
            j = 0
        a += p.vx[i] * p.vy[j] - p.vx[j] * p.vy[i]
    return 0.5 * a


cdef void _node_polygon(long k, long[:, ::1] ij, double[::1] values,
                        long[:, ::1] grid, long gi0, long gj0, double h,
                        int patience, long max_ring, Poly* p) nogil:
    cdef long ik = ij[k, 0]
    cdef long jk = ij[k, 1]
    cdef double uk = values[k]
    cdef long gh = grid.shape[0]
    cdef long gw = grid.shape[1]
    cdef double bound = 1.0
    cdef long a, b, m, ring, di, dj
    cdef int quiet, cut, t
    cdef double nx, ny, c, worst, w

    for t in range(4):
        if t == 0:
            di = 1; dj = 0
        elif t == 1:
            di = -1; dj = 0
        elif t == 2:
            di = 0; dj = 1
        else:
            di = 0; dj = -1
        a = ik + di - gi0
        b = jk + dj - gj0
        if 0 <= a < gh and 0 <= b < gw:
            m = grid[a, b]
            if m >= 0:
                w = fabs(values[m] - uk) / h
                if w > bound:
                    bound = w
    bound = 2.0 * bound + 1.0

    p.m = 4
    p.vx[0] = -bound; p.vy[0] = -bound
    p.vx[1] = bound;  p.vy[1] = -bound
    p.vx[2] = bound;  p.vy[2] = bound
    p.vx[3] = -bound; p.vy[3] = bound
    p.owner[0] = -1; p.owner[1] = -1; p.owner[2] = -1; p.owner[3] = -1

    ring = 1
    quiet = 0
    while ring <= max_ring and quiet < patience and p.m >= 3:
        cut = 0
        for di in range(-ring, ring + 1):
            for dj in range(-ring, ring + 1):
                if di != -ring and di != ring and dj != -ring and dj != ring:
                    continue
                a = ik + di - gi0
                b = jk + dj - gj0
                if a < 0 or a >= gh or b < 0 or b >= gw:
                    continue
                m = grid[a, b]
                if m < 0:
                    continue
                nx = di * h
                ny = dj * h
                c = values[m] - uk
                worst = -1e300
                for t in range(p.m):
                    w = nx * p.vx[t] + ny * p.vy[t]
                    if w > worst:
                        worst = w
                if worst > c:
                    if _clip(p, nx, ny, c, m) == 0:
                        p.m = 0
                        return
                    cut = 1
                    if p.m < 3:
                        return
        if cut:
            quiet = 0
        else:
            quiet += 1
        ring += 1


def node_mass(k, ij, values, grid, gi0, gj0, h, patience=3, max_ring=10 ** 9):
    cdef Poly p
    cdef long[:, ::1] ijv = np.ascontiguousarray(ij, dtype=np.int64)
    cdef double[::1] vv = np.ascontiguousarray(values, dtype=np.float64)
    cdef long[:, ::1] gv = np.ascontiguousarray(grid, dtype=np.int64)
    _node_polygon(<long> k, ijv, vv, gv, <long> gi0, <long> gj0,
                  <double> h, <int> patience, <long> max_ring, &p)
    return _area(&p)


def masses(ij, values, grid, gi0, gj0, interior_idx, h,
           patience=3, max_ring=10 ** 9, want_jac=True):
    cdef long[:, ::1] ijv = np.ascontiguousarray(ij, dtype=np.int64)
    cdef double[::1] vv = np.ascontiguousarray(values, dtype=np.float64)
    cdef long[:, ::1] gv = np.ascontiguousarray(grid, dtype=np.int64)
    cdef long[::1] kiv = np.ascontiguousarray(interior_idx, dtype=np.int64)
    cdef long nk = kiv.shape[0]
    cdef double hh = h
    cdef int pat = patience
    cdef long mring = max_ring
    cdef int wj = 1 if want_jac else 0

    mass_np = np.zeros(nk)
    cdef double[::1] mass = mass_np
    # generous triplet buffer: polygons rarely have more than 24 edges
    cdef long cap = nk * 32 + 16
    rows_np = np.empty(cap, dtype=np.int64)
    cols_np = np.empty(cap, dtype=np.int64)
    vals_np = np.empty(cap, dtype=np.float64)
    cdef long[::1] rows = rows_np
    cdef long[::1] cols = cols_np
    cdef double[::1] vals = vals_np

    cdef Poly p
    cdef long t, k, nnz, i, j, o, q, start
    cdef double ex, ey, elen, vlen, diag, dd
    nnz = 0
    for t in range(nk):
        k = kiv[t]
        _node_polygon(k, ijv, vv, gv, gi0, gj0, hh, pat, mring, &p)
        mass[t] = _area(&p)
        if wj == 0 or p.m < 3:
            continue
        if nnz + p.m + 1 >= cap:
            raise MemoryError("jacobian triplet buffer overflow")
        diag = 0.0
        start = nnz
        for i in range(p.m):
            o = p.owner[i]
            if o < 0:
                continue
            j = i + 1
            if j == p.m:
                j = 0
            ex = p.vx[j] - p.vx[i]
            ey = p.vy[j] - p.vy[i]
            elen = sqrt(ex * ex + ey * ey)
            ex = (ijv[o, 0] - ijv[k, 0]) * hh
            ey = (ijv[o, 1] - ijv[k, 1]) * hh
            vlen = sqrt(ex * ex + ey * ey)
            if vlen <= 0.0:
                continue
            dd = elen / vlen
            diag -= dd
            # accumulate into existing entry for this owner if present
            q = start
            while q < nnz and cols[q] != o:
                q += 1
            if q < nnz:
                vals[q] += dd
            else:
                rows[nnz] = t
                cols[nnz] = o
                vals[nnz] = dd
                nnz += 1
        rows[nnz] = t
        cols[nnz] = k
        vals[nnz] = diag
        nnz += 1
        # deterministic column order within the row
        _sort_row(rows, cols, vals, start, nnz)
    return mass_np, rows_np[:nnz].copy(), cols_np[:nnz].copy(), vals_np[:nnz].copy()


cdef void _sort_row(long[::1] rows, long[::1] cols, double[::1] vals,
                    long lo, long hi) nogil:
    cdef long i, j, c
    cdef double v
    for i in range(lo + 1, hi):
        c = cols[i]
        v = vals[i]
        j = i - 1
        while j >= lo and cols[j] > c:
            cols[j + 1] = cols[j]
            vals[j + 1] = vals[j]
            j -= 1
        cols[j + 1] = c
        vals[j + 1] = v


# ---------------------------------------------------------------------------
# coordinate-ascent sweep
# ---------------------------------------------------------------------------

cdef inline double _pen_d(double t) nogil:
    cdef double o = 1.0 - t
    return 4.0 * t * t * t + 64.0 / (o * o * o * o * o) - 64.0


cdef double _dj_at(long i, double v, double[::1] values, long[:, ::1] nb,
                   signed char[::1] interior, double[::1] eff_cell,
                   double[::1] load, signed char[::1] pen_mask,
                   double[::1] pen_phi, double[::1] pen_cell,
                   double jpow, double h2, double theta) nogil:
    cdef double old = values[i]
    cdef double s = 0.0
    cdef double h11, h22, h12, det, ddet, sign
    cdef long x, m
    values[i] = v
    if interior[i] != 0:
        h11 = (values[nb[i, 0]] - 2.0 * values[i] + values[nb[i, 1]]) / h2
        h22 = (values[nb[i, 2]] - 2.0 * values[i] + values[nb[i, 3]]) / h2
        h12 = (values[nb[i, 4]] - values[nb[i, 5]] - values[nb[i, 6]]
               + values[nb[i, 7]]) / (4.0 * h2)
        det = h11 * h22 - h12 * h12
        if det > 0.0:
            ddet = (h22 + h11) * (-2.0 / h2)
            s += eff_cell[i] * theta * exp((theta - 1.0) * log(det)) * ddet
    for m in range(8):
        x = nb[i, m]
        if x < 0 or interior[x] == 0:
            continue
        h11 = (values[nb[x, 0]] - 2.0 * values[x] + values[nb[x, 1]]) / h2
        h22 = (values[nb[x, 2]] - 2.0 * values[x] + values[nb[x, 3]]) / h2
        h12 = (values[nb[x, 4]] - values[nb[x, 5]] - values[nb[x, 6]]
               + values[nb[x, 7]]) / (4.0 * h2)
        det = h11 * h22 - h12 * h12
        if det <= 0.0:
            continue
        if m < 2:
            ddet = h22 / h2
        elif m < 4:
            ddet = h11 / h2
        else:
            sign = 1.0 if (m == 4 or m == 7) else -1.0
            ddet = -2.0 * h12 * sign / (4.0 * h2)
        s += eff_cell[x] * theta * exp((theta - 1.0) * log(det)) * ddet
    s -= load[i]
    if pen_mask[i] != 0:
        s -= pen_cell[i] * jpow * _pen_d(jpow * (v - pen_phi[i]))
    values[i] = old
    return s


def ascent_sweep(values, nb, interior, eff_cell, load, pen_mask, pen_phi,
                 pen_cell, jpow, h, order, max_step, line_tol, theta=0.25):
    cdef double[::1] vv = values
    cdef long[:, ::1] nbv = np.ascontiguousarray(nb, dtype=np.int64)
    cdef signed char[::1] iv = np.ascontiguousarray(interior, dtype=np.int8)
    cdef double[::1] ev = np.ascontiguousarray(eff_cell, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(load, dtype=np.float64)
    cdef signed char[::1] pm = np.ascontiguousarray(pen_mask, dtype=np.int8)
    cdef double[::1] pp = np.ascontiguousarray(pen_phi, dtype=np.float64)
    cdef double[::1] pc = np.ascontiguousarray(pen_cell, dtype=np.float64)
    cdef long[::1] ov = np.ascontiguousarray(order, dtype=np.int64)
    cdef double jp = jpow
    cdef double h2 = h * h
    cdef double ms = max_step
    cdef double lt = line_tol
    cdef double th = theta
    cdef double moved = 0.0
    cdef long idx, i
    cdef double v0, lo, hi, wall, vstar, mid, mv
    cdef int it

    cdef long na, nbb, x, xx, m
    cdef double lo_c, hi_c, mid_c, b

    with nogil:
        for idx in range(ov.shape[0]):
            i = ov[idx]
            v0 = vv[i]
            # directional-convexity bracket (see _fallback._convexity_bracket)
            hi_c = 1e300
            lo_c = -1e300
            for m in range(4):
                if m == 0:
                    na = nbv[i, 0]; nbb = nbv[i, 1]
                elif m == 1:
                    na = nbv[i, 2]; nbb = nbv[i, 3]
                elif m == 2:
                    na = nbv[i, 4]; nbb = nbv[i, 7]
                else:
                    na = nbv[i, 5]; nbb = nbv[i, 6]
                if na >= 0 and nbb >= 0:
                    mid_c = 0.5 * (vv[na] + vv[nbb])
                    if mid_c < hi_c:
                        hi_c = mid_c
            for m in range(8):
                x = nbv[i, m]
                if x < 0:
                    continue
                xx = nbv[x, m]
                if xx < 0:
                    continue
                b = 2.0 * vv[x] - vv[xx]
                if b > lo_c:
                    lo_c = b
            lo = v0 - ms
            if lo_c > lo:
                lo = lo_c
            hi = v0 + ms
            if hi_c < hi:
                hi = hi_c
            if pm[i] != 0:
                wall = pp[i] + (1.0 - 1e-9) / jp
                if hi > wall:
                    hi = wall
            if not lo < hi:
                continue
            if _dj_at(i, lo, vv, nbv, iv, ev, lv, pm, pp, pc, jp, h2, th) <= 0.0:
                vstar = lo
            elif _dj_at(i, hi, vv, nbv, iv, ev, lv, pm, pp, pc, jp, h2, th) >= 0.0:
                vstar = hi
            else:
                it = 0
                while it < 64:
                    mid = 0.5 * (lo + hi)
                    if hi - lo <= lt:
                        break
                    if _dj_at(i, mid, vv, nbv, iv, ev, lv, pm, pp, pc, jp, h2, th) > 0.0:
                        lo = mid
                    else:
                        hi = mid
                    it += 1
                vstar = 0.5 * (lo + hi)
            vv[i] = vstar
            mv = fabs(vstar - v0)
            if mv > moved:
                moved = mv
    return moved
