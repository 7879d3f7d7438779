"""Grasp assistance: pointing ray -> anchor -> filtered candidate -> suggestion.

The anchor approaches the surface along the negated hit normal; its roll
comes from projecting a gripper reference axis onto the target plane. A
disc-shaped candidate pattern around the anchor is collision-filtered in
batch and the nearest feasible candidate (weighted pose distance) wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .scene import GripperProxy, RayHit, SceneModel, batch_overlaps
from .se3 import (Pose, Rotation, is_degenerate, normalized,
                  pose_distance_many, project_onto_plane, quat_mul)


class ReferenceAxis(str, Enum):
    RX = "rx"
    RY = "ry"


class SuggestionKind(str, Enum):
    ANCHOR = "anchor"
    CANDIDATE = "candidate"
    SNAP = "snap"


@dataclass(frozen=True)
class GraspAnchor:
    pose: Pose
    hit: RayHit
    reference_used: ReferenceAxis


@dataclass(frozen=True)
class Suggestion:
    pose: Pose
    kind: SuggestionKind
    distance_to_anchor: float
    feasible: bool


def projected_reference(rot: Rotation, plane_normal: np.ndarray,
                        preferred: ReferenceAxis = ReferenceAxis.RX
                        ) -> tuple[np.ndarray, ReferenceAxis]:
    """Unit projection of the preferred gripper reference axis onto the
    plane with the given normal, falling back to the other axis when the
    preferred one is parallel to the normal.

    Shared by grasp and placement roll construction so both behave
    identically.
    """
    order = ((ReferenceAxis.RX, 0), (ReferenceAxis.RY, 1))
    if preferred is ReferenceAxis.RY:
        order = (order[1], order[0])
    for name, col in order:
        proj = project_onto_plane(rot.axis(col), plane_normal)
        if not is_degenerate(proj):
            return normalized(proj), name
    raise AssertionError("both reference axes parallel to the plane normal; "
                         "impossible for an orthonormal frame")


def grasp_anchor(ee_pose: Pose, hit: RayHit, standoff: float,
                 reference: ReferenceAxis = ReferenceAxis.RX) -> GraspAnchor:
    """Deterministic grasp anchor for a pointing hit.

    Approach axis r_z is the negated surface normal; position stands off
    along the normal so the fingertip plane meets the surface; roll aligns
    the projected gripper reference with the anchor's same axis.
    """
    n = hit.normal
    ref, used = projected_reference(ee_pose.r, n, reference)
    rz = -n
    if used is ReferenceAxis.RX:
        rx = ref
        ry = np.cross(rz, rx)
    else:
        ry = ref
        rx = np.cross(ry, rz)
    rot = Rotation.from_matrix(np.column_stack([rx, ry, rz]))
    return GraspAnchor(pose=Pose(hit.point + standoff * n, rot), hit=hit,
                       reference_used=used)


@dataclass(frozen=True)
class CandidatePattern:
    """Local sampling envelope: disc offsets x rolls about the approach axis.

    Offsets are in the anchor frame (z along the approach axis). The zero
    offset and zero roll are always members, and enumeration order is fixed
    (offset-major, roll-minor) so index ties are deterministic.
    """

    translation_offsets: np.ndarray
    roll_angles: np.ndarray
    _roll_quats: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rolls = np.asarray(self.roll_angles, dtype=float)
        rq = np.zeros((rolls.shape[0], 4))
        rq[:, 2] = np.sin(rolls / 2.0)
        rq[:, 3] = np.cos(rolls / 2.0)
        object.__setattr__(self, "translation_offsets",
                           np.asarray(self.translation_offsets, dtype=float))
        object.__setattr__(self, "roll_angles", rolls)
        object.__setattr__(self, "_roll_quats", rq)

    def __len__(self) -> int:
        return self.translation_offsets.shape[0] * self.roll_angles.shape[0]

    def poses_about(self, anchor: Pose) -> tuple[np.ndarray, np.ndarray]:
        """All candidate poses as ((N,3) positions, (N,4) quaternions)."""
        n_off = self.translation_offsets.shape[0]
        n_roll = self.roll_angles.shape[0]
        ps = anchor.p[None, :] + self.translation_offsets @ anchor.r.matrix.T
        ps = np.repeat(ps, n_roll, axis=0)
        qs = quat_mul(anchor.r.q[None, :], self._roll_quats)
        qs = np.tile(qs, (n_off, 1))
        return np.ascontiguousarray(ps), np.ascontiguousarray(qs)

    def max_distance_to_anchor(self, beta: float, squared_translation: bool = False) -> float:
        anchor = Pose.identity()
        ps, qs = self.poses_about(anchor)
        return float(pose_distance_many(ps, qs, anchor, beta, squared_translation).max())


def make_pattern(n_angular: int = 19, n_ring: int = 5, n_depth: int = 5,
                 n_roll: int = 15, diameter: float = 0.02,
                 thickness: float = 0.01) -> CandidatePattern:
    """Disc pattern of n_depth x n_ring x n_angular offsets and n_roll rolls.

    Defaults give 5 * 5 * 19 * 15 = 7125 candidates in a 2 cm diameter,
    1 cm thick disc (the innermost ring has radius zero, so its angular
    copies all sit at the center). Rolls are spaced pi/n_roll apart over
    [-pi/2, pi/2) and always include zero.
    """
    if min(n_angular, n_ring, n_depth, n_roll) < 1:
        raise ValueError("pattern counts must all be >= 1")
    radius = diameter / 2.0
    radii = (np.arange(n_ring) * (radius / max(n_ring - 1, 1))
             if n_ring > 1 else np.zeros(1))
    depths = (np.arange(n_depth) - n_depth // 2) * ((thickness / 2.0) / max(n_depth // 2, 1))
    angles = 2.0 * math.pi * np.arange(n_angular) / n_angular
    # enumerate (depth, ring, angular); offsets are anchor-local
    d, r, a = np.meshgrid(depths, radii, angles, indexing="ij")
    offsets = np.stack([(r * np.cos(a)).ravel(), (r * np.sin(a)).ravel(), d.ravel()], axis=1)
    rolls = np.mod(np.arange(n_roll) * (math.pi / n_roll) + math.pi / 2.0, math.pi) - math.pi / 2.0
    return CandidatePattern(translation_offsets=offsets, roll_angles=rolls)


def suggest_grasp(scene: SceneModel, proxy: GripperProxy, anchor: GraspAnchor,
                  pattern: CandidatePattern, beta: float,
                  exclude: str | None = None, workers: int = 1,
                  margin: float = 0.0, squared_translation: bool = False
                  ) -> Suggestion | None:
    """Nearest collision-free candidate around the anchor, or None.

    Ties in distance break toward the lower candidate index; the result is
    independent of worker count.
    """
    ps, qs = pattern.poses_about(anchor.pose)
    hit = batch_overlaps(scene, proxy, (ps, qs), exclude=exclude,
                         margin=margin, workers=workers)
    if bool(hit.all()):
        return None
    d = pose_distance_many(ps, qs, anchor.pose, beta, squared_translation)
    d = np.where(hit, np.inf, d)
    i = int(np.argmin(d))
    dist = float(d[i])
    kind = SuggestionKind.ANCHOR if dist == 0.0 else SuggestionKind.CANDIDATE
    return Suggestion(pose=Pose(ps[i].copy(), Rotation(qs[i].copy())), kind=kind,
                      distance_to_anchor=dist, feasible=True)
