"""Independent reference implementations used only as test oracles.

Deliberately separate from the package code paths they check: brute-force
per-triangle ray intersection, a scalar separating-axis triangle/OBB test,
and scipy-based rotation cross-checks.
"""

from __future__ import annotations

import numpy as np


def brute_force_raycast(vertices: np.ndarray, triangles: np.ndarray,
                        origin: np.ndarray, direction: np.ndarray,
                        min_t: float = 1e-6,
                        skip_mask: np.ndarray | None = None):
    """Nearest hit over all triangles (vectorized Moller-Trumbore).

    Returns (face_index, t) or (-1, inf). Ties break to the lower face
    index via lexicographic (t, face) comparison.
    """
    v0 = vertices[triangles[:, 0]]
    v1 = vertices[triangles[:, 1]]
    v2 = vertices[triangles[:, 2]]
    e1 = v1 - v0
    e2 = v2 - v0
    pvec = np.cross(direction[None, :], e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-14
    inv = 1.0 / np.where(ok, det, 1.0)
    tvec = origin[None, :] - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = np.einsum("ij,ij->i", direction[None, :], qvec) * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    valid = ok & (u >= 0) & (u <= 1) & (v >= 0) & (u + v <= 1) & (t >= min_t)
    if skip_mask is not None:
        valid &= ~skip_mask
    if not valid.any():
        return -1, np.inf
    idx = np.nonzero(valid)[0]
    ts = t[idx]
    best = idx[np.lexsort((idx, ts))[0]]
    return int(best), float(t[best])


def sat_triangle_obb(tri: np.ndarray, center: np.ndarray, rot: np.ndarray,
                     half: np.ndarray) -> bool:
    """Scalar separating-axis triangle vs oriented box test (13 axes)."""
    u = (tri - center[None, :]) @ rot  # vertices in the box frame
    u0, u1, u2 = u

    def separated(axis) -> bool:
        n = np.linalg.norm(axis)
        if n < 1e-15:
            return False
        p = np.array([axis @ u0, axis @ u1, axis @ u2])
        r = np.abs(axis) @ half
        return p.min() > r or p.max() < -r

    for a in range(3):
        e = np.zeros(3)
        e[a] = 1.0
        if separated(e):
            return False
    edges = (u1 - u0, u2 - u1, u0 - u2)
    normal = np.cross(edges[0], u2 - u0)
    if separated(normal):
        return False
    for e in edges:
        for a in range(3):
            basis = np.zeros(3)
            basis[a] = 1.0
            if separated(np.cross(e, basis)):
                return False
    return True


def obb_overlaps_scene(scene, proxy, ee_pose, exclude=None, margin=0.0) -> bool:
    """All-pairs SAT oracle for the gripper proxy against the whole mesh."""
    exclude_idx = scene.object_index(exclude)
    rot_ee = ee_pose.r.matrix
    for box in proxy.boxes:
        rot = rot_ee @ box.offset.r.matrix
        center = ee_pose.p + rot_ee @ box.offset.p
        half = box.half_extents + margin
        for face in range(scene.num_triangles):
            if exclude_idx >= 0 and scene.face_object[face] == exclude_idx:
                continue
            tri = np.stack([scene.tv0[face], scene.tv1[face], scene.tv2[face]])
            if sat_triangle_obb(tri, center, rot, half):
                return True
    return False


def random_pose(rng: np.random.Generator, span: float = 1.0):
    from pointassist.se3 import Pose, Rotation

    p = rng.uniform(-span, span, 3)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return Pose(p, Rotation.from_quat(q))


def random_unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)
