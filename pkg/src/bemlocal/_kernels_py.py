"""Pure NumPy implementation of the O(N^2) kernels.

This module is the fallback used when the compiled extension
``bemlocal._kernels`` is unavailable, and the reference it is tested
against. Both expose the same functions with the same semantics:

``slp_matrix(sa, ea, sb, eb, symmetric)``
    Dense matrix of ``int_{T_i} int_{T_j} log|x - y|``.
``slp_quadform(s, e, w)``
    ``sum_ij w_i w_j int_{T_i} int_{T_j} log|x - y|`` without storing the matrix.
``dlp_symm_apply(...)`` / ``dlp_hypsing_apply(...)``
    Far-field double-layer reductions used by the right-hand sides.

All results are deterministic: every reduction runs in a fixed order.
"""

from __future__ import annotations

import math

import numpy as np

from .quadrature import gauss_rule

# Pair classification by q = |mid_i - mid_j| / max(L_i, L_j).
# q < ANALYTIC_Q: closed form; otherwise tensor Gauss of the listed order.
ANALYTIC_Q = 4.0
GAUSS_TIERS = ((12.0, 6), (40.0, 4), (400.0, 3), (math.inf, 2))
# beyond DLP_FAR_Q panel lengths (the larger of the two panels) a double-layer
# pair switches to the far rule on the outer panel and INNER_FAR_ORDER Gauss
# points on the inner one instead of the analytic inner moments
DLP_FAR_Q = 10.0
INNER_FAR_ORDER = 4
PARALLEL_SIN = 1e-14
NEAR_PARALLEL_SIN = 1e-4
NEAR_PARALLEL_ORDER = 8
NEAR_PARALLEL_DEPTH = 30
ROW_CHUNK = 256


def _f2(tau, delta):
    """Second antiderivative of ``log(delta^2 + tau^2) / 2`` in ``tau``."""
    t2 = tau * tau
    d2 = delta * delta
    r2 = t2 + d2
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(r2 > 0.0, np.log(r2), 0.0)
    return 0.25 * (t2 - d2) * lg - 0.75 * t2 + delta * tau * np.arctan2(tau, delta)


def _log_moment_origin(p, q):
    """``int_[p,q] log|z| dl`` for segments given by endpoint arrays (..., 2)."""
    e = q - p
    L = np.hypot(e[..., 0], e[..., 1])
    tx, ty = e[..., 0] / L, e[..., 1] / L
    s0 = p[..., 0] * tx + p[..., 1] * ty
    d = p[..., 0] * ty - p[..., 1] * tx
    s1 = s0 + L
    d2 = d * d
    with np.errstate(divide="ignore", invalid="ignore"):
        a1 = np.where(s1 * s1 + d2 > 0, s1 * np.log(s1 * s1 + d2), 0.0)
        a0 = np.where(s0 * s0 + d2 > 0, s0 * np.log(s0 * s0 + d2), 0.0)
    return 0.5 * (a1 - a0) - L + d * np.arctan2(d * L, d2 + s0 * s1), d, L


def _point_seg_dist(p, a, b):
    e = b - a
    t = min(1.0, max(0.0, float(np.dot(p - a, e) / np.dot(e, e))))
    return math.hypot(*(p - a - t * e))


def _kink_points(a, b, c, d):
    """Points of ``[a, b]``'s neighbourhood where ``x -> int_[c,d] log|x - y|``
    is not smooth: the inner endpoints and the crossing with ``[c, d]``."""
    pts = [c, d]
    W = d - c
    h0 = W[0] * (a - c)[1] - W[1] * (a - c)[0]
    h1 = W[0] * (b - c)[1] - W[1] * (b - c)[0]
    if h0 != h1:
        s = h0 / (h0 - h1)
        x = a + s * (b - a)
        u = float(np.dot(x - c, W) / np.dot(W, W))
        if 0.0 < s < 1.0 and 0.0 < u < 1.0:
            pts.append(x)
    return pts


def _slp_pair_graded(a, b, c, d):
    """Outer Gauss over ``[a, b]`` bisected toward the kinks of the inner
    integral, which is taken in closed form. Used for nearly parallel
    pairs, where the parallelogram formula cancels catastrophically."""
    x, w = gauss_rule(NEAR_PARALLEL_ORDER).on_unit()
    U = b - a
    Li = math.hypot(*U)
    kinks = _kink_points(a, b, c, d)
    total = []
    stack = [(0.0, 1.0, 0)]
    while stack:
        s, t, depth = stack.pop()
        p, q = a + s * U, a + t * U
        if depth < NEAR_PARALLEL_DEPTH and (t - s) * Li > min(_point_seg_dist(k, p, q) for k in kinks):
            mid = 0.5 * (s + t)
            stack.append((mid, t, depth + 1))
            stack.append((s, mid, depth + 1))
            continue
        pts = p[None, :] + x[:, None] * (q - p)[None, :]
        m, _, _ = _log_moment_origin(c[None, :] - pts, d[None, :] - pts)
        total.append((t - s) * Li * float(w @ m))
    return math.fsum(total)


def slp_pair_analytic(a, b, c, d):
    """Closed-form ``int_[a,b] int_[c,d] log|x - y|`` for arrays of panel pairs."""
    a, b, c, d = (np.asarray(v, dtype=float) for v in (a, b, c, d))
    if a.ndim == 1:
        return float(slp_pair_analytic(a[None], b[None], c[None], d[None])[0])
    U = b - a
    W = d - c
    Li = np.hypot(U[..., 0], U[..., 1])
    Lj = np.hypot(W[..., 0], W[..., 1])
    cross = U[..., 0] * W[..., 1] - U[..., 1] * W[..., 0]
    parallel = np.abs(cross) <= PARALLEL_SIN * Li * Lj
    out = np.empty(np.broadcast(Li, Lj).shape)

    # parallel / collinear pairs: 1D convolution with a second antiderivative
    if np.any(parallel):
        ap, cp, Up, Wp = a[parallel], c[parallel], U[parallel], W[parallel]
        li, lj = Li[parallel], Lj[parallel]
        tx, ty = Up[:, 0] / li, Up[:, 1] / li
        rel = ap - cp
        c0 = rel[:, 0] * tx + rel[:, 1] * ty
        delta = np.abs(rel[:, 0] * ty - rel[:, 1] * tx)
        same_dir = (Wp[:, 0] * tx + Wp[:, 1] * ty) > 0
        shift = np.where(same_dir, c0, c0 + lj)
        out[parallel] = (
            _f2(shift + li, delta) - _f2(shift + li - lj, delta) - _f2(shift, delta) + _f2(shift - lj, delta)
        )

    near = ~parallel & (np.abs(cross) < NEAR_PARALLEL_SIN * Li * Lj)
    for k in np.flatnonzero(near):
        out[k] = _slp_pair_graded(a[k], b[k], c[k], d[k])

    # general pairs: divergence theorem on the parallelogram swept by x - y
    gen = ~parallel & ~near
    if np.any(gen):
        ag, bg, cg, dg = a[gen], b[gen], c[gen], d[gen]
        corners = (ag - cg, bg - cg, bg - dg, ag - dg)
        total = 0.0
        for k in range(4):
            p, q = corners[k], corners[(k + 1) % 4]
            m, dist, ell = _log_moment_origin(p, q)
            total = total + dist * (0.5 * m - 0.25 * ell)
        cr = cross[gen]
        # the corner loop is counter-clockwise iff cross(U, -W) > 0
        orient = np.where(cr < 0, 1.0, -1.0)
        out[gen] = orient * total * Li[gen] * Lj[gen] / np.abs(cr)
    return out


def _gauss_pairs(sa, ea, sb, eb, n):
    x, w = gauss_rule(n).on_unit()
    P = sa[:, None, :] + x[None, :, None] * (ea - sa)[:, None, :]
    Q = sb[:, None, :] + x[None, :, None] * (eb - sb)[:, None, :]
    D = P[:, :, None, :] - Q[:, None, :, :]
    lg = 0.5 * np.log(D[..., 0] ** 2 + D[..., 1] ** 2)
    Li = np.hypot(*(ea - sa).T)
    Lj = np.hypot(*(eb - sb).T)
    return np.einsum("p,q,kpq->k", w, w, lg) * Li * Lj


def _slp_block(sa, ea, sb, eb):
    """Dense block for rows ``sa/ea`` and columns ``sb/eb``."""
    ma = 0.5 * (sa + ea)
    mb = 0.5 * (sb + eb)
    La = np.hypot(*(ea - sa).T)
    Lb = np.hypot(*(eb - sb).T)
    dm = np.hypot(ma[:, None, 0] - mb[None, :, 0], ma[:, None, 1] - mb[None, :, 1])
    q = dm / np.maximum(La[:, None], Lb[None, :])
    out = np.empty(q.shape)
    near = q < ANALYTIC_Q
    if np.any(near):
        i, j = np.nonzero(near)
        out[i, j] = slp_pair_analytic(sa[i], ea[i], sb[j], eb[j])
    lo = ANALYTIC_Q
    for hi, n in GAUSS_TIERS:
        sel = (q >= lo) & (q < hi)
        if np.any(sel):
            i, j = np.nonzero(sel)
            out[i, j] = _gauss_pairs(sa[i], ea[i], sb[j], eb[j], n)
        lo = hi
    return out


def slp_matrix(sa, ea, sb, eb, symmetric=False):
    sa, ea, sb, eb = (np.ascontiguousarray(v, dtype=float) for v in (sa, ea, sb, eb))
    n = len(sa)
    out = np.empty((n, len(sb)))
    for r0 in range(0, n, ROW_CHUNK):
        r1 = min(n, r0 + ROW_CHUNK)
        c0 = r0 if symmetric else 0
        out[r0:r1, c0:] = _slp_block(sa[r0:r1], ea[r0:r1], sb[c0:], eb[c0:])
    if symmetric:
        iu = np.triu_indices(n, 1)
        out[iu[1], iu[0]] = out[iu]
    return out


def slp_quadform(s, e, w):
    s, e = np.ascontiguousarray(s, dtype=float), np.ascontiguousarray(e, dtype=float)
    w = np.ascontiguousarray(w, dtype=float)
    n = len(s)
    partial = []
    for r0 in range(0, n, ROW_CHUNK):
        r1 = min(n, r0 + ROW_CHUNK)
        block = _slp_block(s[r0:r1], e[r0:r1], s[r0:], e[r0:])
        wc = w[r0:r1]
        within = wc @ (block[:, : r1 - r0] @ wc)
        beyond = wc @ (block[:, r1 - r0 :] @ w[r1:])
        partial.append(within + 2.0 * beyond)
    return math.fsum(partial)


def _select_nodes(allowed, use_far, mid_ptr, far_ptr):
    """Node indices (into the mid and far node arrays) of the selected panels."""
    mid_panels = np.flatnonzero(allowed & ~use_far)
    far_panels = np.flatnonzero(allowed & use_far)

    def gather(panels, ptr):
        if len(panels) == 0:
            return np.zeros(0, dtype=np.int64), panels
        counts = ptr[panels + 1] - ptr[panels]
        starts = np.repeat(ptr[panels] - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
        return np.arange(int(np.sum(counts))) + starts, np.repeat(panels, counts)

    return gather(mid_panels, mid_ptr), gather(far_panels, far_ptr)


def _allowed_panels(j, own_edge, outer_edge, skip_ptr, skip_idx):
    allowed = outer_edge != own_edge
    allowed[skip_idx[skip_ptr[j] : skip_ptr[j + 1]]] = False
    return allowed


def dlp_symm_apply(
    test_s,
    test_e,
    test_edge,
    outer_mid,
    outer_len,
    outer_edge,
    outer_normal,
    force_mid,
    mid_ptr,
    mid_pts,
    mid_wts,
    far_ptr,
    far_pts,
    far_wts,
    skip_ptr,
    skip_idx,
):
    """``b_j = sum_k sum_p w_p * n_k . int_{T_j} (x - y_p)/|x - y_p|^2 ds_x``.

    ``k`` runs over outer panels on a different polygon edge than ``j`` and
    not listed in ``skip_idx[skip_ptr[j]:skip_ptr[j+1]]``. The nodes of
    panel ``k`` come from its far rule when the midpoint distance is at
    least ``DLP_FAR_Q`` times the larger of the two panel lengths and
    ``force_mid[k]`` is false; the inner integral then uses Gauss points
    too. Otherwise the mid rule and the analytic inner integral are used. The ``1/(2*pi)`` factor is not applied.
    """
    nt = len(test_s)
    out = np.zeros(nt)
    tmid = 0.5 * (test_s + test_e)
    tlen = np.hypot(*(test_e - test_s).T)
    for j in range(nt):
        dm = np.hypot(*(outer_mid - tmid[j]).T)
        use_far = (dm >= DLP_FAR_Q * np.maximum(outer_len, tlen[j])) & ~force_mid
        allowed = _allowed_panels(j, test_edge[j], outer_edge, skip_ptr, skip_idx)
        (im, pm), (jf, pf) = _select_nodes(allowed, use_far, mid_ptr, far_ptr)
        acc = 0.0
        if len(im):
            acc += _symm_nodes_sum(test_s[j], test_e[j], mid_pts[im], outer_normal[pm], mid_wts[im])
        if len(jf):
            acc += _symm_nodes_gauss(test_s[j], test_e[j], far_pts[jf], outer_normal[pf], far_wts[jf])
        out[j] = acc
    return out


def _symm_nodes_sum(a, b, y, ny, w):
    e = b - a
    L = math.hypot(e[0], e[1])
    tx, ty = e[0] / L, e[1] / L
    rel = a - y
    s0 = rel[:, 0] * tx + rel[:, 1] * ty
    d = rel[:, 0] * ty - rel[:, 1] * tx
    s1 = s0 + L
    logp = 0.5 * np.log((s1 * s1 + d * d) / (s0 * s0 + d * d))
    ang = np.arctan2(d * L, d * d + s0 * s1)
    # n . (logp * tau + ang * nu) with nu = (ty, -tx)
    val = logp * (ny[:, 0] * tx + ny[:, 1] * ty) + ang * (ny[:, 0] * ty - ny[:, 1] * tx)
    return float(np.dot(w, val))


def _inner_gauss(a, b, y):
    """Gauss nodes ``t`` on [0, 1] and the kernel ``L * g_q * (x_q - y)/|x_q - y|^2``."""
    t, g = gauss_rule(INNER_FAR_ORDER).on_unit()
    e = b - a
    L = math.hypot(e[0], e[1])
    x = a + t[:, None] * e
    rel = x[None, :, :] - y[:, None, :]
    r2 = np.sum(rel * rel, axis=2)
    return t, rel * (L * g / r2)[:, :, None]


def _symm_nodes_gauss(a, b, y, ny, w):
    """Far-field version of :func:`_symm_nodes_sum` (tensor Gauss on the inner panel)."""
    _, kern = _inner_gauss(a, b, y)
    val = np.sum(kern[:, :, 0], axis=1) * ny[:, 0] + np.sum(kern[:, :, 1], axis=1) * ny[:, 1]
    return float(np.dot(w, val))


def _hypsing_nodes_gauss(a, b, x, w):
    """Far-field version of :func:`_hypsing_nodes_sum`."""
    t, kern = _inner_gauss(a, b, x)
    e = b - a
    L = math.hypot(e[0], e[1])
    nu = np.array([e[1] / L, -e[0] / L])
    proj = kern @ nu
    return float(np.dot(w, proj.sum(axis=1))), float(np.dot(w, proj @ t))


def dlp_hypsing_apply(
    inner_s,
    inner_e,
    inner_edge,
    outer_mid,
    outer_len,
    outer_edge,
    force_mid,
    mid_ptr,
    mid_pts,
    mid_wts,
    far_ptr,
    far_pts,
    far_wts,
    skip_ptr,
    skip_idx,
):
    """Per inner panel ``k`` the pair ``(r0_k, r1_k)``:

    ``r0_k = sum_m sum_p w_p * nu_k . int_{T_k} (y - x_p)/|y - x_p|^2 (1 - t) ds_y``,
    ``r1_k`` likewise with weight ``t``. Outer panels ``m`` are selected as
    in :func:`dlp_symm_apply`; ``1/(2*pi)`` is not applied.
    """
    nk = len(inner_s)
    r0 = np.zeros(nk)
    r1 = np.zeros(nk)
    kmid = 0.5 * (inner_s + inner_e)
    klen = np.hypot(*(inner_e - inner_s).T)
    for k in range(nk):
        dm = np.hypot(*(outer_mid - kmid[k]).T)
        use_far = (dm >= DLP_FAR_Q * np.maximum(outer_len, klen[k])) & ~force_mid
        allowed = _allowed_panels(k, inner_edge[k], outer_edge, skip_ptr, skip_idx)
        (im, _), (jf, _) = _select_nodes(allowed, use_far, mid_ptr, far_ptr)
        acc0 = acc1 = 0.0
        for idx, pts, wts, fn in ((im, mid_pts, mid_wts, _hypsing_nodes_sum), (jf, far_pts, far_wts, _hypsing_nodes_gauss)):
            if len(idx):
                m0, m1 = fn(inner_s[k], inner_e[k], pts[idx], wts[idx])
                acc0 += m0
                acc1 += m1
        r0[k] = acc0 - acc1
        r1[k] = acc1
    return r0, r1


def _hypsing_nodes_sum(a, b, x, w):
    e = b - a
    L = math.hypot(e[0], e[1])
    tx, ty = e[0] / L, e[1] / L
    rel = a - x
    s0 = rel[:, 0] * tx + rel[:, 1] * ty
    d = rel[:, 0] * ty - rel[:, 1] * tx
    s1 = s0 + L
    logp = 0.5 * np.log((s1 * s1 + d * d) / (s0 * s0 + d * d))
    ang = np.arctan2(d * L, d * d + s0 * s1)
    t_nu = (d * logp - s0 * ang) / L
    return float(np.dot(w, ang)), float(np.dot(w, t_nu))
