"""Pure-numpy kernels: BVH raycast and batched OBB-vs-mesh overlap.

Same contracts as the compiled module in ``_native.pyx``. The batch overlap
broad-phase here tests oriented-box AABBs directly against per-triangle
AABBs (vectorized) instead of walking the BVH per pose; any pair it prunes
would fail the first separating-axis test anyway, so results are identical.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_MT_EPS = 1e-14


def raycast(tv0, tv1, tv2, face_object, nmin, nmax, left, right, start, count, order,
            origin, direction, exclude_obj: int, min_t: float):
    """Nearest ray hit via BVH traversal. Returns (face, t); (-1, inf) on miss.

    Ties on t break toward the smaller face index so traversal order never
    affects the result.
    """
    best_t = math.inf
    best_face = -1
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    stack = [0]
    while stack:
        node = stack.pop()
        t0, t1 = _slab(nmin[node], nmax[node], o, d)
        if t1 < max(t0, 0.0) or t0 > best_t:
            continue
        if left[node] < 0:
            faces = order[start[node]:start[node] + count[node]]
            if exclude_obj >= 0:
                faces = faces[face_object[faces] != exclude_obj]
            if len(faces) == 0:
                continue
            t, valid = _moller_trumbore(tv0[faces], tv1[faces], tv2[faces], o, d, min_t)
            for i in np.nonzero(valid)[0]:
                ti = float(t[i])
                fi = int(faces[i])
                if ti < best_t or (ti == best_t and fi < best_face):
                    best_t = ti
                    best_face = fi
        else:
            stack.append(int(right[node]))
            stack.append(int(left[node]))
    return best_face, best_t


def _slab(bmin, bmax, o, d):
    t0, t1 = -math.inf, math.inf
    for a in range(3):
        da = d[a]
        if da != 0.0:
            inv = 1.0 / da
            ta = (bmin[a] - o[a]) * inv
            tb = (bmax[a] - o[a]) * inv
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
        elif o[a] < bmin[a] or o[a] > bmax[a]:
            return math.inf, -math.inf
    return t0, t1


def _moller_trumbore(v0, v1, v2, o, d, min_t):
    e1 = v1 - v0
    e2 = v2 - v0
    pvec = np.cross(d[None, :], e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > _MT_EPS
    inv = np.where(ok, det, 1.0)
    inv = 1.0 / inv
    tvec = o[None, :] - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = np.einsum("ij,ij->i", d[None, :], qvec) * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    valid = ok & (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0) & (t >= min_t)
    return t, valid


def batch_overlap(tv0, tv1, tv2, face_object, nmin, nmax, left, right, start, count, order,
                  box_half, box_off_p, box_off_r, pose_p, pose_r,
                  exclude_obj: int, margin: float, workers: int) -> np.ndarray:
    """Per-pose scene overlap flags for a multi-box proxy. uint8 (N,)."""
    n = pose_p.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    if n == 0:
        return out

    keep = np.ones(tv0.shape[0], dtype=bool)
    if exclude_obj >= 0:
        keep = face_object != exclude_obj
    t0, t1, t2 = tv0[keep], tv1[keep], tv2[keep]
    if t0.shape[0] == 0:
        return out
    tri_min = np.minimum(np.minimum(t0, t1), t2)
    tri_max = np.maximum(np.maximum(t0, t1), t2)
    half = box_half + margin

    blocks = [(s, min(s + 2048, n)) for s in range(0, n, 2048)]

    def run(block):
        s, e = block
        out[s:e] = _overlap_block(pose_p[s:e], pose_r[s:e], half, box_off_p, box_off_r,
                                  t0, t1, t2, tri_min, tri_max)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, blocks))
    else:
        for b in blocks:
            run(b)
    return out


def _overlap_block(pose_p, pose_r, half, box_off_p, box_off_r, t0, t1, t2, tri_min, tri_max):
    n = pose_p.shape[0]
    nb = half.shape[0]
    # world frame of every (pose, proxy box) pair
    rw = np.einsum("nij,bjk->nbik", pose_r, box_off_r)
    cw = pose_p[:, None, :] + np.einsum("nij,bj->nbi", pose_r, box_off_p)
    ext = np.einsum("nbij,bj->nbi", np.abs(rw), half)
    bmin = cw - ext
    bmax = cw + ext
    broad = np.all(
        (bmin[:, :, None, :] <= tri_max[None, None, :, :])
        & (bmax[:, :, None, :] >= tri_min[None, None, :, :]),
        axis=3,
    )
    ni, bi, ti = np.nonzero(broad)
    hit = np.zeros(n, dtype=np.uint8)
    if len(ni) == 0:
        return hit
    r = rw[ni, bi]
    c = cw[ni, bi]
    u0 = np.einsum("kij,kj->ki", r.transpose(0, 2, 1), t0[ti] - c)
    u1 = np.einsum("kij,kj->ki", r.transpose(0, 2, 1), t1[ti] - c)
    u2 = np.einsum("kij,kj->ki", r.transpose(0, 2, 1), t2[ti] - c)
    overlap = _tri_box_overlap(u0, u1, u2, half[bi])
    hit[np.unique(ni[overlap])] = 1
    return hit


def _tri_box_overlap(u0, u1, u2, h):
    """Separating-axis triangle vs origin-centered AABB, vectorized over K."""
    sep = np.zeros(u0.shape[0], dtype=bool)
    lo = np.minimum(np.minimum(u0, u1), u2)
    hi = np.maximum(np.maximum(u0, u1), u2)
    sep |= np.any((lo > h) | (hi < -h), axis=1)

    e0 = u1 - u0
    e1 = u2 - u1
    e2 = u0 - u2
    # triangle plane vs box
    nrm = np.cross(e0, u2 - u0)
    dist = np.einsum("kj,kj->k", nrm, u0)
    rad = np.einsum("kj,kj->k", np.abs(nrm), h)
    sep |= np.abs(dist) > rad

    for e in (e0, e1, e2):
        for axis in range(3):
            sep |= _axis_separates(_cross_basis(e, axis), u0, u1, u2, h)
    return ~sep


def _cross_basis(e, axis):
    z = np.zeros(e.shape[0])
    if axis == 0:
        return np.stack([z, e[:, 2], -e[:, 1]], axis=1)
    if axis == 1:
        return np.stack([-e[:, 2], z, e[:, 0]], axis=1)
    return np.stack([e[:, 1], -e[:, 0], z], axis=1)


def _axis_separates(axis, u0, u1, u2, h):
    p0 = np.einsum("kj,kj->k", axis, u0)
    p1 = np.einsum("kj,kj->k", axis, u1)
    p2 = np.einsum("kj,kj->k", axis, u2)
    r = np.einsum("kj,kj->k", np.abs(axis), h)
    lo = np.minimum(np.minimum(p0, p1), p2)
    hi = np.maximum(np.maximum(p0, p1), p2)
    return (lo > r) | (hi < -r)
