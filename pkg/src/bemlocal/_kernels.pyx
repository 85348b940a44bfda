# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled O(N^2) kernels; same contract as ``bemlocal._kernels_py``.

Reductions are parallel over output rows only, and every row is summed
in a fixed order, so results do not depend on the thread count.
"""

import math

import numpy as np

cimport cython
cimport openmp
from cython.parallel cimport prange
from libc.math cimport atan2, fabs, hypot, log, sqrt, INFINITY

from . import _kernels_py as _ref

DLP_FAR_Q = _ref.DLP_FAR_Q
INNER_FAR_ORDER = _ref.INNER_FAR_ORDER

cdef double ANALYTIC_Q = _ref.ANALYTIC_Q
cdef double PARALLEL_SIN = _ref.PARALLEL_SIN
cdef double C_DLP_FAR_Q = _ref.DLP_FAR_Q
INNER_FAR_ORDER = _ref.INNER_FAR_ORDER

# tensor Gauss tiers: q_hi[t] upper bound of tier t, order n_t; nodes stored at offsets
DEF MAX_TIERS = 8
DEF MAX_NODES = 64
cdef int n_tiers = 0
cdef double tier_hi[MAX_TIERS]
cdef int tier_n[MAX_TIERS]
cdef int tier_off[MAX_TIERS]
cdef double gx[MAX_NODES]
cdef double gw[MAX_NODES]


def _init_tiers():
    global n_tiers
    cdef int off = 0, t = 0, i
    for hi, n in _ref.GAUSS_TIERS:
        x, w = np.polynomial.legendre.leggauss(n)
        tier_hi[t] = hi
        tier_n[t] = n
        tier_off[t] = off
        for i in range(n):
            gx[off + i] = 0.5 * (x[i] + 1.0)
            gw[off + i] = 0.5 * w[i]
        off += n
        t += 1
    n_tiers = t


_init_tiers()

DEF INNER_MAX = 16
cdef int n_inner = 0
cdef double ix[INNER_MAX]
cdef double iw[INNER_MAX]


def _init_inner():
    global n_inner
    x, w = np.polynomial.legendre.leggauss(INNER_FAR_ORDER)
    for i in range(INNER_FAR_ORDER):
        ix[i] = 0.5 * (x[i] + 1.0)
        iw[i] = 0.5 * w[i]
    n_inner = INNER_FAR_ORDER


_init_inner()

DEF NP_MAX = 16
DEF STACK_MAX = 64
cdef double NEAR_PARALLEL_SIN = _ref.NEAR_PARALLEL_SIN
cdef int NP_DEPTH = _ref.NEAR_PARALLEL_DEPTH
cdef int n_np = 0
cdef double npx[NP_MAX]
cdef double npw[NP_MAX]


def _init_near_parallel():
    global n_np
    x, w = np.polynomial.legendre.leggauss(_ref.NEAR_PARALLEL_ORDER)
    for i in range(_ref.NEAR_PARALLEL_ORDER):
        npx[i] = 0.5 * (x[i] + 1.0)
        npw[i] = 0.5 * w[i]
    n_np = _ref.NEAR_PARALLEL_ORDER


_init_near_parallel()


def set_num_threads(int n):
    openmp.omp_set_num_threads(max(1, n))


cdef inline double _f2(double tau, double delta) noexcept nogil:
    cdef double t2 = tau * tau, d2 = delta * delta
    cdef double r2 = t2 + d2
    cdef double lg = 0.0
    if r2 > 0.0:
        lg = log(r2)
    return 0.25 * (t2 - d2) * lg - 0.75 * t2 + delta * tau * atan2(tau, delta)


cdef inline double _log_moment(double px, double py, double qx, double qy, double* dist) noexcept nogil:
    # int_[p,q] log|z| dl; the signed distance of the line from the origin goes to dist
    cdef double ex = qx - px, ey = qy - py
    cdef double L = hypot(ex, ey)
    cdef double tx = ex / L, ty = ey / L
    cdef double s0 = px * tx + py * ty
    cdef double d = px * ty - py * tx
    cdef double s1 = s0 + L
    cdef double d2 = d * d
    cdef double a0 = 0.0, a1 = 0.0, r
    r = s1 * s1 + d2
    if r > 0.0:
        a1 = s1 * log(r)
    r = s0 * s0 + d2
    if r > 0.0:
        a0 = s0 * log(r)
    dist[0] = d
    return 0.5 * (a1 - a0) - L + d * atan2(d * L, d2 + s0 * s1)


cdef inline double _edge_term(double px, double py, double qx, double qy) noexcept nogil:
    # (signed distance of the edge line from the origin) * (0.5 * int log|z| - 0.25 * length)
    cdef double d
    cdef double m = _log_moment(px, py, qx, qy, &d)
    return d * (0.5 * m - 0.25 * hypot(qx - px, qy - py))


cdef inline double _point_seg_dist(double px, double py, double ax, double ay,
                                   double bx, double by) noexcept nogil:
    cdef double ex = bx - ax, ey = by - ay
    cdef double t = ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return hypot(px - ax - t * ex, py - ay - t * ey)


cdef double _slp_graded(double ax, double ay, double bx, double by,
                        double cx, double cy, double dx, double dy) noexcept nogil:
    # nearly parallel pairs: outer Gauss bisected toward the kinks, closed-form inner integral
    cdef double ux = bx - ax, uy = by - ay
    cdef double Li = hypot(ux, uy)
    cdef double st_s[STACK_MAX]
    cdef double st_t[STACK_MAX]
    cdef int st_d[STACK_MAX]
    cdef int top = 1, depth, k, nk = 2
    cdef double s, t, mid, px, py, qx, qy, xx, xy, acc, dist, near, total = 0.0
    # kinks of x -> int_[c,d] log|x - y|: the inner endpoints and the crossing with [c, d]
    cdef double kx[3]
    cdef double ky[3]
    cdef double wx = dx - cx, wy = dy - cy
    cdef double h0 = wx * (ay - cy) - wy * (ax - cx)
    cdef double h1 = wx * (by - cy) - wy * (bx - cx)
    kx[0] = cx
    ky[0] = cy
    kx[1] = dx
    ky[1] = dy
    if h0 != h1:
        s = h0 / (h0 - h1)
        xx = ax + s * ux
        xy = ay + s * uy
        t = ((xx - cx) * wx + (xy - cy) * wy) / (wx * wx + wy * wy)
        if 0.0 < s < 1.0 and 0.0 < t < 1.0:
            kx[2] = xx
            ky[2] = xy
            nk = 3
    st_s[0] = 0.0
    st_t[0] = 1.0
    st_d[0] = 0
    while top > 0:
        top -= 1
        s = st_s[top]
        t = st_t[top]
        depth = st_d[top]
        px = ax + s * ux
        py = ay + s * uy
        qx = ax + t * ux
        qy = ay + t * uy
        near = INFINITY
        for k in range(nk):
            near = min(near, _point_seg_dist(kx[k], ky[k], px, py, qx, qy))
        if depth < NP_DEPTH and (t - s) * Li > near:
            mid = 0.5 * (s + t)
            st_s[top] = mid
            st_t[top] = t
            st_d[top] = depth + 1
            st_s[top + 1] = s
            st_t[top + 1] = mid
            st_d[top + 1] = depth + 1
            top += 2
            continue
        acc = 0.0
        for k in range(n_np):
            xx = px + npx[k] * (qx - px)
            xy = py + npx[k] * (qy - py)
            acc = acc + npw[k] * _log_moment(cx - xx, cy - xy, dx - xx, dy - xy, &dist)
        total = total + (t - s) * Li * acc
    return total


cdef double _slp_analytic(double ax, double ay, double bx, double by,
                          double cx, double cy, double dx, double dy) noexcept nogil:
    cdef double ux = bx - ax, uy = by - ay, wx = dx - cx, wy = dy - cy
    cdef double Li = hypot(ux, uy), Lj = hypot(wx, wy)
    cdef double cross = ux * wy - uy * wx
    cdef double tx, ty, relx, rely, c0, delta, shift, total
    if fabs(cross) <= PARALLEL_SIN * Li * Lj:
        tx = ux / Li
        ty = uy / Li
        relx = ax - cx
        rely = ay - cy
        c0 = relx * tx + rely * ty
        delta = fabs(relx * ty - rely * tx)
        shift = c0
        if wx * tx + wy * ty <= 0.0:
            shift = c0 + Lj
        return (_f2(shift + Li, delta) - _f2(shift + Li - Lj, delta)
                - _f2(shift, delta) + _f2(shift - Lj, delta))
    if fabs(cross) < NEAR_PARALLEL_SIN * Li * Lj:
        return _slp_graded(ax, ay, bx, by, cx, cy, dx, dy)
    total = (_edge_term(ax - cx, ay - cy, bx - cx, by - cy)
             + _edge_term(bx - cx, by - cy, bx - dx, by - dy)
             + _edge_term(bx - dx, by - dy, ax - dx, ay - dy)
             + _edge_term(ax - dx, ay - dy, ax - cx, ay - cy))
    if cross < 0.0:
        return total * Li * Lj / (-cross)
    return -total * Li * Lj / cross


cdef inline double _slp_gauss(double ax, double ay, double bx, double by,
                              double cx, double cy, double dx, double dy, int t) noexcept nogil:
    cdef int n = tier_n[t], off = tier_off[t], p, q
    cdef double ux = bx - ax, uy = by - ay, wx = dx - cx, wy = dy - cy
    cdef double acc = 0.0, row, px, py, rx, ry
    for p in range(n):
        px = ax + gx[off + p] * ux
        py = ay + gx[off + p] * uy
        row = 0.0
        for q in range(n):
            rx = px - (cx + gx[off + q] * wx)
            ry = py - (cy + gx[off + q] * wy)
            row = row + gw[off + q] * log(rx * rx + ry * ry)
        acc = acc + gw[off + p] * row
    return 0.5 * acc * hypot(ux, uy) * hypot(wx, wy)


cdef inline double _slp_entry(double ax, double ay, double bx, double by,
                              double cx, double cy, double dx, double dy) noexcept nogil:
    cdef double Li = hypot(bx - ax, by - ay), Lj = hypot(dx - cx, dy - cy)
    cdef double dm = hypot(0.5 * (ax + bx - cx - dx), 0.5 * (ay + by - cy - dy))
    cdef double q = dm / (Li if Li > Lj else Lj)
    cdef int t
    if q < ANALYTIC_Q:
        return _slp_analytic(ax, ay, bx, by, cx, cy, dx, dy)
    for t in range(n_tiers):
        if q < tier_hi[t]:
            return _slp_gauss(ax, ay, bx, by, cx, cy, dx, dy, t)
    return _slp_gauss(ax, ay, bx, by, cx, cy, dx, dy, n_tiers - 1)


def slp_matrix(sa, ea, sb, eb, bint symmetric=False):
    cdef const double[:, ::1] A0 = np.ascontiguousarray(sa, dtype=np.float64)
    cdef const double[:, ::1] A1 = np.ascontiguousarray(ea, dtype=np.float64)
    cdef const double[:, ::1] B0 = np.ascontiguousarray(sb, dtype=np.float64)
    cdef const double[:, ::1] B1 = np.ascontiguousarray(eb, dtype=np.float64)
    cdef Py_ssize_t n = A0.shape[0], m = B0.shape[0], i, j, jstart
    out_arr = np.empty((n, m))
    cdef double[:, ::1] out = out_arr
    for i in prange(n, nogil=True, schedule="dynamic", chunksize=8):
        jstart = i if symmetric else 0
        for j in range(jstart, m):
            out[i, j] = _slp_entry(A0[i, 0], A0[i, 1], A1[i, 0], A1[i, 1],
                                   B0[j, 0], B0[j, 1], B1[j, 0], B1[j, 1])
    if symmetric:
        for i in range(n):
            for j in range(i + 1, n):
                out[j, i] = out[i, j]
    return out_arr


def slp_quadform(s, e, w):
    cdef const double[:, ::1] S = np.ascontiguousarray(s, dtype=np.float64)
    cdef const double[:, ::1] E = np.ascontiguousarray(e, dtype=np.float64)
    cdef const double[::1] W = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = S.shape[0], i, j
    rows_arr = np.zeros(n)
    cdef double[::1] rows = rows_arr
    cdef double acc
    for i in prange(n, nogil=True, schedule="dynamic", chunksize=8):
        if W[i] == 0.0:
            continue
        acc = 0.0
        for j in range(i + 1, n):
            if W[j] != 0.0:
                acc = acc + W[j] * _slp_entry(S[i, 0], S[i, 1], E[i, 0], E[i, 1],
                                               S[j, 0], S[j, 1], E[j, 0], E[j, 1])
        rows[i] = W[i] * (2.0 * acc + W[i] * _slp_entry(S[i, 0], S[i, 1], E[i, 0], E[i, 1],
                                                          S[i, 0], S[i, 1], E[i, 0], E[i, 1]))
    return math.fsum(rows_arr)


cdef inline void _moments(double ax, double ay, double bx, double by, double px, double py,
                          double* tx, double* ty, double* logp, double* ang, double* s0o,
                          double* dout, double* Lout) noexcept nogil:
    cdef double ex = bx - ax, ey = by - ay
    cdef double L = hypot(ex, ey)
    cdef double ux = ex / L, uy = ey / L
    cdef double relx = ax - px, rely = ay - py
    cdef double s0 = relx * ux + rely * uy
    cdef double d = relx * uy - rely * ux
    cdef double s1 = s0 + L
    tx[0] = ux
    ty[0] = uy
    logp[0] = 0.5 * log((s1 * s1 + d * d) / (s0 * s0 + d * d))
    ang[0] = atan2(d * L, d * d + s0 * s1)
    s0o[0] = s0
    dout[0] = d
    Lout[0] = L


cdef inline double _inner_gauss(double ax, double ay, double bx, double by,
                                double px, double py, double nx, double ny,
                                double* moment1) noexcept nogil:
    # sum_q L g_q n . (x_q - p)/|x_q - p|^2 over Gauss points x_q of [a, b];
    # the same sum weighted by t_q goes to moment1
    cdef double ex = bx - ax, ey = by - ay
    cdef double L = hypot(ex, ey)
    cdef double acc = 0.0, acc1 = 0.0, rx, ry, v
    cdef int q
    for q in range(n_inner):
        rx = ax + ix[q] * ex - px
        ry = ay + ix[q] * ey - py
        v = iw[q] * (rx * nx + ry * ny) / (rx * rx + ry * ry)
        acc = acc + v
        acc1 = acc1 + v * ix[q]
    moment1[0] = L * acc1
    return L * acc


def dlp_symm_apply(test_s, test_e, test_edge, outer_mid, outer_len, outer_edge, outer_normal,
                   force_mid, mid_ptr, mid_pts, mid_wts, far_ptr, far_pts, far_wts,
                   skip_ptr, skip_idx):
    cdef const double[:, ::1] TS = np.ascontiguousarray(test_s, dtype=np.float64)
    cdef const double[:, ::1] TE = np.ascontiguousarray(test_e, dtype=np.float64)
    cdef const long[::1] TEDGE = np.ascontiguousarray(test_edge, dtype=np.int_)
    cdef const double[:, ::1] OM = np.ascontiguousarray(outer_mid, dtype=np.float64)
    cdef const double[::1] OL = np.ascontiguousarray(outer_len, dtype=np.float64)
    cdef const long[::1] OEDGE = np.ascontiguousarray(outer_edge, dtype=np.int_)
    cdef const double[:, ::1] ON = np.ascontiguousarray(outer_normal, dtype=np.float64)
    cdef const unsigned char[::1] FM = np.ascontiguousarray(force_mid, dtype=np.uint8)
    cdef const long[::1] MP = np.ascontiguousarray(mid_ptr, dtype=np.int_)
    cdef const double[:, ::1] MX = np.ascontiguousarray(mid_pts, dtype=np.float64)
    cdef const double[::1] MW = np.ascontiguousarray(mid_wts, dtype=np.float64)
    cdef const long[::1] FP = np.ascontiguousarray(far_ptr, dtype=np.int_)
    cdef const double[:, ::1] FX = np.ascontiguousarray(far_pts, dtype=np.float64)
    cdef const double[::1] FW = np.ascontiguousarray(far_wts, dtype=np.float64)
    cdef const long[::1] SP = np.ascontiguousarray(skip_ptr, dtype=np.int_)
    cdef const long[::1] SI = np.ascontiguousarray(skip_idx, dtype=np.int_)
    cdef Py_ssize_t nt = TS.shape[0], nk = OM.shape[0], j, k, p, sp, p0, p1
    out_arr = np.zeros(nt)
    cdef double[::1] out = out_arr
    cdef double acc, mx, my, tl, dm, tx, ty, logp, ang, s0, d, L, nx, ny
    cdef bint far
    for j in prange(nt, nogil=True, schedule="dynamic", chunksize=4):
        # outputs written only through pointers must be assigned here to be thread-private
        tx = ty = logp = ang = s0 = d = L = 0.0
        acc = 0.0
        sp = SP[j]
        mx = 0.5 * (TS[j, 0] + TE[j, 0])
        my = 0.5 * (TS[j, 1] + TE[j, 1])
        tl = hypot(TE[j, 0] - TS[j, 0], TE[j, 1] - TS[j, 1])
        for k in range(nk):
            if sp < SP[j + 1] and SI[sp] == k:
                sp = sp + 1
                continue
            if OEDGE[k] == TEDGE[j]:
                continue
            dm = hypot(OM[k, 0] - mx, OM[k, 1] - my)
            far = (dm >= C_DLP_FAR_Q * (OL[k] if OL[k] > tl else tl)) and not FM[k]
            nx = ON[k, 0]
            ny = ON[k, 1]
            if far:
                p0 = FP[k]
                p1 = FP[k + 1]
                for p in range(p0, p1):
                    acc = acc + FW[p] * _inner_gauss(TS[j, 0], TS[j, 1], TE[j, 0], TE[j, 1],
                                                     FX[p, 0], FX[p, 1], nx, ny, &d)
            else:
                p0 = MP[k]
                p1 = MP[k + 1]
                for p in range(p0, p1):
                    _moments(TS[j, 0], TS[j, 1], TE[j, 0], TE[j, 1], MX[p, 0], MX[p, 1],
                             &tx, &ty, &logp, &ang, &s0, &d, &L)
                    acc = acc + MW[p] * (logp * (nx * tx + ny * ty) + ang * (nx * ty - ny * tx))
        out[j] = acc
    return out_arr


def dlp_hypsing_apply(inner_s, inner_e, inner_edge, outer_mid, outer_len, outer_edge,
                      force_mid, mid_ptr, mid_pts, mid_wts, far_ptr, far_pts, far_wts,
                      skip_ptr, skip_idx):
    cdef const double[:, ::1] KS = np.ascontiguousarray(inner_s, dtype=np.float64)
    cdef const double[:, ::1] KE = np.ascontiguousarray(inner_e, dtype=np.float64)
    cdef const long[::1] KEDGE = np.ascontiguousarray(inner_edge, dtype=np.int_)
    cdef const double[:, ::1] OM = np.ascontiguousarray(outer_mid, dtype=np.float64)
    cdef const double[::1] OL = np.ascontiguousarray(outer_len, dtype=np.float64)
    cdef const long[::1] OEDGE = np.ascontiguousarray(outer_edge, dtype=np.int_)
    cdef const unsigned char[::1] FM = np.ascontiguousarray(force_mid, dtype=np.uint8)
    cdef const long[::1] MP = np.ascontiguousarray(mid_ptr, dtype=np.int_)
    cdef const double[:, ::1] MX = np.ascontiguousarray(mid_pts, dtype=np.float64)
    cdef const double[::1] MW = np.ascontiguousarray(mid_wts, dtype=np.float64)
    cdef const long[::1] FP = np.ascontiguousarray(far_ptr, dtype=np.int_)
    cdef const double[:, ::1] FX = np.ascontiguousarray(far_pts, dtype=np.float64)
    cdef const double[::1] FW = np.ascontiguousarray(far_wts, dtype=np.float64)
    cdef const long[::1] SP = np.ascontiguousarray(skip_ptr, dtype=np.int_)
    cdef const long[::1] SI = np.ascontiguousarray(skip_idx, dtype=np.int_)
    cdef Py_ssize_t nk = KS.shape[0], nm = OM.shape[0], k, m, p, sp, p0, p1
    r0_arr = np.zeros(nk)
    r1_arr = np.zeros(nk)
    cdef double[::1] r0 = r0_arr
    cdef double[::1] r1 = r1_arr
    cdef double acc0, acc1, mx, my, kl, nx, ny, dm, tx, ty, logp, ang, s0, d, L
    cdef bint far
    for k in prange(nk, nogil=True, schedule="dynamic", chunksize=4):
        # outputs written only through pointers must be assigned here to be thread-private
        tx = ty = logp = ang = s0 = d = L = 0.0
        acc0 = 0.0
        acc1 = 0.0
        sp = SP[k]
        mx = 0.5 * (KS[k, 0] + KE[k, 0])
        my = 0.5 * (KS[k, 1] + KE[k, 1])
        kl = hypot(KE[k, 0] - KS[k, 0], KE[k, 1] - KS[k, 1])
        nx = (KE[k, 1] - KS[k, 1]) / kl
        ny = -(KE[k, 0] - KS[k, 0]) / kl
        for m in range(nm):
            if sp < SP[k + 1] and SI[sp] == m:
                sp = sp + 1
                continue
            if OEDGE[m] == KEDGE[k]:
                continue
            dm = hypot(OM[m, 0] - mx, OM[m, 1] - my)
            far = (dm >= C_DLP_FAR_Q * (OL[m] if OL[m] > kl else kl)) and not FM[m]
            if far:
                for p in range(FP[m], FP[m + 1]):
                    ang = _inner_gauss(KS[k, 0], KS[k, 1], KE[k, 0], KE[k, 1],
                                       FX[p, 0], FX[p, 1], nx, ny, &d)
                    acc0 = acc0 + FW[p] * ang
                    acc1 = acc1 + FW[p] * d
            else:
                for p in range(MP[m], MP[m + 1]):
                    _moments(KS[k, 0], KS[k, 1], KE[k, 0], KE[k, 1], MX[p, 0], MX[p, 1],
                             &tx, &ty, &logp, &ang, &s0, &d, &L)
                    acc0 = acc0 + MW[p] * ang
                    acc1 = acc1 + MW[p] * (d * logp - s0 * ang) / L
        r0[k] = acc0 - acc1
        r1[k] = acc1
    return r0_arr, r1_arr
