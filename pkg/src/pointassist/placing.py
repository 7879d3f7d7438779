"""Placement assistance: support facet recording and facet-to-target anchors.

At pick time the held object's resting facet (a point and the gravity-down
normal, both in the end-effector frame) is recorded. Pointing then maps
that facet onto the target surface: the anchor is the unique ee pose that
puts the facet point at the hit point with the facet normal opposite the
hit normal, rolled via the same projected-reference rule as grasping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grasping import (CandidatePattern, ReferenceAxis, Suggestion,
                       SuggestionKind, projected_reference)
from .scene import GripperProxy, RayHit, SceneModel, batch_overlaps, raycast
from .se3 import (Pose, Rotation, is_degenerate, minimal_rotation_between,
                  normalized, pose_distance_many, project_onto_plane, vec3)

GRAVITY_DOWN = np.array([0.0, 0.0, -1.0])


@dataclass(frozen=True)
class SupportFacet:
    """The face an object rested on, captured in the ee frame at pick."""

    point_ee: np.ndarray
    normal_ee: np.ndarray
    object_id: str
    estimated: bool = False  # True when the downward raycast missed


@dataclass(frozen=True)
class PlaceAnchor:
    pose: Pose
    hit: RayHit


@dataclass(frozen=True)
class AttachedObject:
    """A grasped block: its box shape rigidly attached in the ee frame."""

    object_id: str
    half_extents: np.ndarray
    offset: Pose  # object pose in the ee frame, captured at pick
    facet: SupportFacet


def record_support_facet(scene: SceneModel, ee_pose_at_pick: Pose,
                         object_id: str) -> SupportFacet:
    """Capture the held object's support facet at the moment of pick.

    The facet normal is gravity-down expressed in the ee frame; the facet
    point is the straight-down raycast of the ee position (excluding the
    held object), i.e. the surface the object was resting on. If that ray
    misses, the point falls back to the ee position projected onto the
    table plane and the facet is flagged as estimated.
    """
    inv = ee_pose_at_pick.inverse()
    normal_ee = inv.r.apply(GRAVITY_DOWN)
    hit = raycast(scene, ee_pose_at_pick.p, GRAVITY_DOWN, exclude=object_id)
    if hit is not None:
        point_w = hit.point
        estimated = False
    else:
        point_w = vec3(ee_pose_at_pick.p[0], ee_pose_at_pick.p[1],
                       scene.description.table_top())
        estimated = True
    return SupportFacet(point_ee=inv.apply(point_w), normal_ee=normal_ee,
                        object_id=object_id, estimated=estimated)


def place_anchor(ee_pose: Pose, facet: SupportFacet, hit: RayHit,
                 reference: ReferenceAxis = ReferenceAxis.RX) -> PlaceAnchor:
    """The ee pose that rests the recorded facet on the target surface.

    Exactly: facet normal (world) = -hit normal, facet point (world) =
    hit point; the roll about the target normal aligns the projected
    gripper reference exactly as the grasp anchor does.
    """
    n = hit.normal
    facet_normal_w = ee_pose.r.apply(facet.normal_ee)
    align = minimal_rotation_between(normalized(facet_normal_w), -n)
    base = align * ee_pose.r

    target_ref, used = projected_reference(ee_pose.r, n, reference)
    col = 0 if used is ReferenceAxis.RX else 1
    current = project_onto_plane(base.axis(col), n)
    if is_degenerate(current):
        # aligned reference happens to be parallel to the target normal;
        # fall back to the other axis for the roll measurement
        col = 1 - col
        target_ref = projected_reference(ee_pose.r, n,
                                         ReferenceAxis.RY if col else ReferenceAxis.RX)[0]
        current = project_onto_plane(base.axis(col), n)
    if is_degenerate(current):
        rot = base
    else:
        cur = normalized(current)
        angle = math.atan2(float(np.dot(np.cross(cur, target_ref), n)),
                           float(np.dot(cur, target_ref)))
        rot = Rotation.from_axis_angle(n, angle) * base
    return PlaceAnchor(pose=Pose(hit.point - rot.apply(facet.point_ee), rot), hit=hit)


def axis_aligned_place_set(scene: SceneModel, facet: SupportFacet,
                           yaw_count: int = 4) -> list[Pose]:
    """World-axis-aligned placement poses: rest the recorded facet centered
    on the top face of every other block, at yaw_count evenly spaced yaws.
    Ordered by (block id, yaw index)."""
    down = np.array([0.0, 0.0, -1.0])
    base = minimal_rotation_between(normalized(facet.normal_ee), down)
    out: list[Pose] = []
    for block_id in sorted(scene.block_ids):
        if block_id == facet.object_id:
            continue
        spec = scene.spec(block_id)
        target = vec3(spec.pose.p[0], spec.pose.p[1], spec.top_height())
        for k in range(yaw_count):
            rot = Rotation.from_axis_angle(np.array([0.0, 0.0, 1.0]),
                                           2.0 * math.pi * k / yaw_count) * base
            out.append(Pose(target - rot.apply(facet.point_ee), rot))
    return out


def attached_proxy(proxy: GripperProxy, held: AttachedObject,
                   shrink: float = 0.0) -> GripperProxy:
    """Gripper proxy extended with the held object's (optionally shrunk) box.

    A small shrink lets resting contact between the placed face and its
    support pass the overlap test; without it every exact placement would
    graze its own support plane.
    """
    half = np.maximum(held.half_extents - shrink, 1e-4)
    return proxy.with_attached(half, held.offset)


def suggest_place(scene: SceneModel, proxy: GripperProxy, held: AttachedObject,
                  anchor: PlaceAnchor, pattern: CandidatePattern | None = None,
                  beta: float = 0.05, workers: int = 1, margin: float = 0.0,
                  contact_shrink: float = 0.002,
                  squared_translation: bool = False) -> Suggestion | None:
    """Placement suggestion for the anchor.

    Without a pattern (the default) the anchor itself is returned with its
    feasibility flag, so a blocked anchor is surfaced rather than hidden.
    With a pattern this behaves exactly like grasp suggestion: nearest
    feasible candidate or None.
    """
    combined = attached_proxy(proxy, held, contact_shrink)
    if pattern is None:
        blocked = batch_overlaps(scene, combined, [anchor.pose],
                                 exclude=held.object_id, margin=margin,
                                 workers=workers)[0]
        return Suggestion(pose=anchor.pose, kind=SuggestionKind.ANCHOR,
                          distance_to_anchor=0.0, feasible=not bool(blocked))
    ps, qs = pattern.poses_about(anchor.pose)
    hit = batch_overlaps(scene, combined, (ps, qs), exclude=held.object_id,
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
