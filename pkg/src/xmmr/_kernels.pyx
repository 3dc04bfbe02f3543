# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; the numpy mirror lives in ``_kernels_py.py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

SQUARED = 0
HADSELL = 1


def pair_loss_grad(double[:, ::1] F, double[:, ::1] G, img_idx, txt_idx, similar,
                   double alpha, int variant=SQUARED):
    cdef Py_ssize_t[::1] ii = np.ascontiguousarray(img_idx, dtype=np.intp)
    cdef Py_ssize_t[::1] tt = np.ascontiguousarray(txt_idx, dtype=np.intp)
    cdef cnp.uint8_t[::1] ss = np.ascontiguousarray(similar, dtype=np.uint8)
    cdef Py_ssize_t n = ii.shape[0], d = F.shape[1], p, j, a, b
    gF_arr = np.zeros((F.shape[0], d))
    gG_arr = np.zeros((G.shape[0], d))
    cdef double[:, ::1] gF = gF_arr
    cdef double[:, ::1] gG = gG_arr
    cdef double total = 0.0, sq, diff, coef, dist, gap
    if variant != SQUARED and variant != HADSELL:
        raise ValueError(f"unknown contrastive variant {variant}")
    for p in range(n):
        a = ii[p]
        b = tt[p]
        sq = 0.0
        for j in range(d):
            diff = F[a, j] - G[b, j]
            sq += diff * diff
        coef = 0.0
        if variant == SQUARED:
            if ss[p]:
                total += sq
                coef = 2.0
            elif sq < alpha:
                total += alpha - sq
                coef = -2.0
        else:
            if ss[p]:
                total += 0.5 * sq
                coef = 1.0
            else:
                dist = sqrt(sq)
                if dist < alpha:
                    gap = alpha - dist
                    total += 0.5 * gap * gap
                    if dist > 0:
                        coef = -gap / dist
        if coef != 0.0:
            for j in range(d):
                diff = coef * (F[a, j] - G[b, j])
                gF[a, j] += diff
                gG[b, j] -= diff
    return total, gF_arr, gG_arr


def quad_loss_grad(double[:, ::1] F, double[:, ::1] G, quads, double beta):
    cdef Py_ssize_t[:, ::1] q = np.ascontiguousarray(
        np.asarray(quads, dtype=np.intp).reshape(-1, 4))
    cdef Py_ssize_t n = q.shape[0], d = F.shape[1], r, j, a, b, c, e
    gF_arr = np.zeros((F.shape[0], d))
    gG_arr = np.zeros((G.shape[0], d))
    cdef double[:, ::1] gF = gF_arr
    cdef double[:, ::1] gG = gG_arr
    cdef double total = 0.0, arg, x, y, z, ip, tp, im, tm
    cdef long active = 0
    for r in range(n):
        a = q[r, 0]
        b = q[r, 1]
        c = q[r, 2]
        e = q[r, 3]
        x = 0.0
        y = 0.0
        z = 0.0
        for j in range(d):
            ip = F[a, j] - G[b, j]
            x += ip * ip
            tp = F[a, j] - G[e, j]
            y += tp * tp
            im = F[c, j] - G[b, j]
            z += im * im
        arg = 2.0 * x - y - z + beta
        if arg > 0:
            total += arg
            active += 1
            for j in range(d):
                ip = F[a, j]
                tp = G[b, j]
                im = F[c, j]
                tm = G[e, j]
                gF[a, j] += 2.0 * ip - 4.0 * tp + 2.0 * tm
                gG[b, j] += 2.0 * tp - 4.0 * ip + 2.0 * im
                gF[c, j] += 2.0 * tp - 2.0 * im
                gG[e, j] += 2.0 * ip - 2.0 * tm
    return total, gF_arr, gG_arr, int(active)


def knn_indices(double[:, ::1] dist, Py_ssize_t k):
    """Partial insertion sort per row; strict comparison keeps lower index on ties."""
    cdef Py_ssize_t n = dist.shape[0], m = dist.shape[1], r, c, s, cnt
    if k > m:
        k = m
    out_arr = np.empty((n, k), dtype=np.intp)
    cdef Py_ssize_t[:, ::1] out = out_arr
    cdef double v
    for r in range(n):
        cnt = 0
        for c in range(m):
            v = dist[r, c]
            if cnt == k and not (v < dist[r, out[r, k - 1]]):
                continue
            if cnt < k:
                cnt += 1
            s = cnt - 1
            while s > 0 and v < dist[r, out[r, s - 1]]:
                out[r, s] = out[r, s - 1]
                s -= 1
            out[r, s] = c
    return out_arr


def rank_rows(dist):
    return np.argsort(dist, axis=1, kind="stable")


cdef double _ap(cnp.uint8_t[::1] rel, Py_ssize_t cutoff, bint total_norm):
    cdef Py_ssize_t n = rel.shape[0], lim = n, p
    cdef long hits = 0, n_total = 0, denom
    cdef double acc = 0.0
    if cutoff >= 0 and cutoff < n:
        lim = cutoff
    for p in range(n):
        if rel[p]:
            n_total += 1
    for p in range(lim):
        if rel[p]:
            hits += 1
            acc += hits / (p + 1.0)
    denom = n_total if total_norm else hits
    if denom == 0:
        return 0.0
    return acc / denom


def average_precision(rel, cutoff=-1, bint total_norm=False):
    if cutoff is None:
        cutoff = -1
    return _ap(np.ascontiguousarray(rel, dtype=bool).view(np.uint8), cutoff, total_norm)


def ap_rows(dist, rel_matrix, cutoff=-1, bint total_norm=False):
    if cutoff is None:
        cutoff = -1
    order = rank_rows(dist)
    ranked = np.ascontiguousarray(
        np.take_along_axis(np.asarray(rel_matrix, dtype=bool), order, axis=1)).view(np.uint8)
    cdef Py_ssize_t n = ranked.shape[0], r
    out = np.empty(n)
    for r in range(n):
        out[r] = _ap(ranked[r], cutoff, total_norm)
    return out


def pick_partners(E, double[:, ::1] u):
    cdef cnp.uint8_t[:, ::1] e = np.ascontiguousarray(E, dtype=bool).view(np.uint8)
    cdef Py_ssize_t a = e.shape[0], b = e.shape[1], r, c, cnt_s, js, jd, seen_s, seen_d
    out_arr = np.full((a, 2), -1, dtype=np.intp)
    cdef Py_ssize_t[:, ::1] out = out_arr
    for r in range(a):
        cnt_s = 0
        for c in range(b):
            cnt_s += e[r, c]
        js = <Py_ssize_t>(u[r, 0] * cnt_s)
        jd = <Py_ssize_t>(u[r, 1] * (b - cnt_s))
        seen_s = 0
        seen_d = 0
        for c in range(b):
            if e[r, c]:
                if seen_s == js and cnt_s > 0:
                    out[r, 0] = c
                seen_s += 1
            else:
                if seen_d == jd and cnt_s < b:
                    out[r, 1] = c
                seen_d += 1
    return out_arr
