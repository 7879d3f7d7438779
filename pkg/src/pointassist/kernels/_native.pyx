# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: BVH raycast and batched OBB-vs-mesh overlap.

Mirrors the contracts of ``_fallback.py``. The batch overlap parallelizes
over poses with OpenMP; each pose's result is computed independently, so
the output is identical for any worker count.
"""

from cython.parallel import prange

from libc.math cimport INFINITY, fabs

import numpy as np

cimport numpy as cnp

cdef double MT_EPS = 1e-14
cdef int STACK_CAP = 128


cdef inline double _min3(double a, double b, double c) nogil:
    cdef double m = a
    if b < m:
        m = b
    if c < m:
        m = c
    return m


cdef inline double _max3(double a, double b, double c) nogil:
    cdef double m = a
    if b > m:
        m = b
    if c > m:
        m = c
    return m


cdef inline void _cross(const double* a, const double* b, double* out) nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline double _dot(const double* a, const double* b) nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef inline int _moller_trumbore(const double* v0, const double* v1, const double* v2,
                                 const double* o, const double* d,
                                 double min_t, double* t_out) nogil:
    cdef double e1[3]
    cdef double e2[3]
    cdef double pvec[3]
    cdef double tvec[3]
    cdef double qvec[3]
    cdef double det, inv, u, v, t
    cdef int k
    for k in range(3):
        e1[k] = v1[k] - v0[k]
        e2[k] = v2[k] - v0[k]
    _cross(d, e2, pvec)
    det = _dot(e1, pvec)
    if fabs(det) <= MT_EPS:
        return 0
    inv = 1.0 / det
    for k in range(3):
        tvec[k] = o[k] - v0[k]
    u = _dot(tvec, pvec) * inv
    if u < 0.0 or u > 1.0:
        return 0
    _cross(tvec, e1, qvec)
    v = _dot(d, qvec) * inv
    if v < 0.0 or u + v > 1.0:
        return 0
    t = _dot(e2, qvec) * inv
    if t < min_t:
        return 0
    t_out[0] = t
    return 1


cdef inline int _slab(const double* bmin, const double* bmax,
                      const double* o, const double* d,
                      double* t0_out, double* t1_out) nogil:
    cdef double t0 = -INFINITY
    cdef double t1 = INFINITY
    cdef double inv, ta, tb, tmp
    cdef int a
    for a in range(3):
        if d[a] != 0.0:
            inv = 1.0 / d[a]
            ta = (bmin[a] - o[a]) * inv
            tb = (bmax[a] - o[a]) * inv
            if ta > tb:
                tmp = ta
                ta = tb
                tb = tmp
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
        elif o[a] < bmin[a] or o[a] > bmax[a]:
            return 0
    t0_out[0] = t0
    t1_out[0] = t1
    return 1


cdef int _raycast_impl(const double* tv0, const double* tv1, const double* tv2,
                       const int* face_object,
                       const double* nmin, const double* nmax,
                       const int* left, const int* right,
                       const int* start, const int* count, const int* order,
                       const double* o, const double* d,
                       int exclude_obj, double min_t, double* best_t_out) nogil:
    cdef int stack[128]
    cdef int top = 0
    cdef int node, i, f
    cdef double t0, t1, t
    cdef double best_t = INFINITY
    cdef int best_face = -1
    cdef double lo
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if not _slab(nmin + 3 * node, nmax + 3 * node, o, d, &t0, &t1):
            continue
        lo = t0
        if lo < 0.0:
            lo = 0.0
        if t1 < lo or t0 > best_t:
            continue
        if left[node] < 0:
            for i in range(start[node], start[node] + count[node]):
                f = order[i]
                if exclude_obj >= 0 and face_object[f] == exclude_obj:
                    continue
                if _moller_trumbore(tv0 + 3 * f, tv1 + 3 * f, tv2 + 3 * f, o, d, min_t, &t):
                    if t < best_t or (t == best_t and f < best_face):
                        best_t = t
                        best_face = f
        else:
            if top + 2 <= STACK_CAP:
                stack[top] = right[node]
                top += 1
                stack[top] = left[node]
                top += 1
    best_t_out[0] = best_t
    return best_face


def raycast(double[:, ::1] tv0, double[:, ::1] tv1, double[:, ::1] tv2,
            int[::1] face_object,
            double[:, ::1] nmin, double[:, ::1] nmax,
            int[::1] left, int[::1] right, int[::1] start, int[::1] count, int[::1] order,
            double[::1] origin, double[::1] direction,
            int exclude_obj, double min_t):
    """Nearest ray hit. Returns (face, t); (-1, inf) on miss."""
    cdef double best_t = INFINITY
    cdef int face
    with nogil:
        face = _raycast_impl(&tv0[0, 0], &tv1[0, 0], &tv2[0, 0], &face_object[0],
                             &nmin[0, 0], &nmax[0, 0], &left[0], &right[0],
                             &start[0], &count[0], &order[0],
                             &origin[0], &direction[0], exclude_obj, min_t, &best_t)
    return face, best_t


cdef inline int _tri_box(const double* u0, const double* u1, const double* u2,
                         const double* h) nogil:
    cdef double lo, hi, d, r
    cdef double e0[3]
    cdef double e1[3]
    cdef double e2[3]
    cdef double ed[3]
    cdef double nrm[3]
    cdef double p0, p1, p2
    cdef double ax[3]
    cdef int a
    for a in range(3):
        lo = _min3(u0[a], u1[a], u2[a])
        hi = _max3(u0[a], u1[a], u2[a])
        if lo > h[a] or hi < -h[a]:
            return 0
    for a in range(3):
        e0[a] = u1[a] - u0[a]
        e1[a] = u2[a] - u1[a]
        e2[a] = u0[a] - u2[a]
        ed[a] = u2[a] - u0[a]
    _cross(e0, ed, nrm)
    d = _dot(nrm, u0)
    r = fabs(nrm[0]) * h[0] + fabs(nrm[1]) * h[1] + fabs(nrm[2]) * h[2]
    if fabs(d) > r:
        return 0
    # the 9 edge x basis axes
    cdef const double* e
    cdef int which
    for which in range(9):
        if which < 3:
            e = e0
        elif which < 6:
            e = e1
        else:
            e = e2
        a = which % 3
        if a == 0:
            ax[0] = 0.0
            ax[1] = e[2]
            ax[2] = -e[1]
        elif a == 1:
            ax[0] = -e[2]
            ax[1] = 0.0
            ax[2] = e[0]
        else:
            ax[0] = e[1]
            ax[1] = -e[0]
            ax[2] = 0.0
        p0 = _dot(ax, u0)
        p1 = _dot(ax, u1)
        p2 = _dot(ax, u2)
        r = fabs(ax[0]) * h[0] + fabs(ax[1]) * h[1] + fabs(ax[2]) * h[2]
        if _min3(p0, p1, p2) > r or _max3(p0, p1, p2) < -r:
            return 0
    return 1


cdef int _pose_overlaps(const double* tv0, const double* tv1, const double* tv2,
                        const int* face_object,
                        const double* nmin, const double* nmax,
                        const int* left, const int* right,
                        const int* start, const int* count, const int* order,
                        const double* pp, const double* pr,
                        int nboxes, const double* box_half,
                        const double* box_off_p, const double* box_off_r,
                        int exclude_obj, double margin) nogil:
    cdef int stack[128]
    cdef int top, node, b, i, j, k, f
    cdef double rw[9]
    cdef double cw[3]
    cdef double h[3]
    cdef double bmin[3]
    cdef double bmax[3]
    cdef double u0[3]
    cdef double u1[3]
    cdef double u2[3]
    cdef double w[3]
    cdef double ext
    cdef const double* offr
    cdef const double* offp
    for b in range(nboxes):
        offr = box_off_r + 9 * b
        offp = box_off_p + 3 * b
        for i in range(3):
            for j in range(3):
                rw[3 * i + j] = (pr[3 * i] * offr[j] + pr[3 * i + 1] * offr[3 + j]
                                 + pr[3 * i + 2] * offr[6 + j])
        for i in range(3):
            cw[i] = pp[i] + pr[3 * i] * offp[0] + pr[3 * i + 1] * offp[1] + pr[3 * i + 2] * offp[2]
            h[i] = box_half[3 * b + i] + margin
        for i in range(3):
            ext = fabs(rw[3 * i]) * h[0] + fabs(rw[3 * i + 1]) * h[1] + fabs(rw[3 * i + 2]) * h[2]
            bmin[i] = cw[i] - ext
            bmax[i] = cw[i] + ext
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            if (nmin[3 * node] > bmax[0] or nmax[3 * node] < bmin[0]
                    or nmin[3 * node + 1] > bmax[1] or nmax[3 * node + 1] < bmin[1]
                    or nmin[3 * node + 2] > bmax[2] or nmax[3 * node + 2] < bmin[2]):
                continue
            if left[node] < 0:
                for i in range(start[node], start[node] + count[node]):
                    f = order[i]
                    if exclude_obj >= 0 and face_object[f] == exclude_obj:
                        continue
                    for k in range(3):
                        w[k] = tv0[3 * f + k] - cw[k]
                    for k in range(3):
                        u0[k] = rw[k] * w[0] + rw[3 + k] * w[1] + rw[6 + k] * w[2]
                    for k in range(3):
                        w[k] = tv1[3 * f + k] - cw[k]
                    for k in range(3):
                        u1[k] = rw[k] * w[0] + rw[3 + k] * w[1] + rw[6 + k] * w[2]
                    for k in range(3):
                        w[k] = tv2[3 * f + k] - cw[k]
                    for k in range(3):
                        u2[k] = rw[k] * w[0] + rw[3 + k] * w[1] + rw[6 + k] * w[2]
                    if _tri_box(u0, u1, u2, h):
                        return 1
            else:
                if top + 2 <= STACK_CAP:
                    stack[top] = right[node]
                    top += 1
                    stack[top] = left[node]
                    top += 1
    return 0


def batch_overlap(double[:, ::1] tv0, double[:, ::1] tv1, double[:, ::1] tv2,
                  int[::1] face_object,
                  double[:, ::1] nmin, double[:, ::1] nmax,
                  int[::1] left, int[::1] right, int[::1] start, int[::1] count, int[::1] order,
                  double[:, ::1] box_half, double[:, ::1] box_off_p, double[:, :, ::1] box_off_r,
                  double[:, ::1] pose_p, double[:, :, ::1] pose_r,
                  int exclude_obj, double margin, int workers):
    """Per-pose scene overlap flags for a multi-box proxy. uint8 (N,)."""
    cdef int n = pose_p.shape[0]
    cdef int nboxes = box_half.shape[0]
    out_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] out = out_arr
    cdef int i
    if n == 0:
        return out_arr
    if workers <= 1:
        with nogil:
            for i in range(n):
                out[i] = _pose_overlaps(&tv0[0, 0], &tv1[0, 0], &tv2[0, 0], &face_object[0],
                                        &nmin[0, 0], &nmax[0, 0], &left[0], &right[0],
                                        &start[0], &count[0], &order[0],
                                        &pose_p[i, 0], &pose_r[i, 0, 0],
                                        nboxes, &box_half[0, 0], &box_off_p[0, 0],
                                        &box_off_r[0, 0, 0], exclude_obj, margin)
    else:
        for i in prange(n, nogil=True, num_threads=workers, schedule='static'):
            out[i] = _pose_overlaps(&tv0[0, 0], &tv1[0, 0], &tv2[0, 0], &face_object[0],
                                    &nmin[0, 0], &nmax[0, 0], &left[0], &right[0],
                                    &start[0], &count[0], &order[0],
                                    &pose_p[i, 0], &pose_r[i, 0, 0],
                                    nboxes, &box_half[0, 0], &box_off_p[0, 0],
                                    &box_off_r[0, 0, 0], exclude_obj, margin)
    return out_arr
