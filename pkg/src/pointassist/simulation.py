"""Deterministic kinematic teleoperation loop.

Fixed-timestep twist integration with a low-pass pose goal, pointing-based
suggestion updates per assistance mode, engage-to-suggestion motion with a
front pre-pose, and kinematic pick/place rules standing in for contact
physics. Identical (scene, trace, config) always reproduce the identical
event log, for any worker count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import EngineConfig
from .grasping import (CandidatePattern, GraspAnchor, ReferenceAxis,
                       Suggestion, SuggestionKind, grasp_anchor, make_pattern,
                       suggest_grasp)
from .inference import GoalBelief, TrajectoryWindow, infer_goal, tick_window
from .placing import (AttachedObject, SupportFacet, attached_proxy,
                      axis_aligned_place_set, place_anchor,
                      record_support_facet, suggest_place)
from .scene import (GripperProxy, RayHit, SceneDescription, SceneModel,
                    batch_overlaps, build_scene, raycast)
from .se3 import (Pose, Rotation, Twist, integrate_twist, lowpass_alpha,
                  lowpass_pose, pose_distance, vec3)
from .snapping import SnapField, apply_snap, axis_aligned_snap_set

log = logging.getLogger(__name__)

MODES = ("explicit", "implicit", "none")

EVENT_KINDS = ("pick_success", "pick_fail", "place_success", "place_fail",
               "drop", "engage_start", "engage_end", "snap_fired",
               "suggestion_changed")

# gripper pointing straight down, r_x along +x
_START_ROT = Rotation.from_matrix(np.array([[1.0, 0.0, 0.0],
                                            [0.0, -1.0, 0.0],
                                            [0.0, 0.0, -1.0]]))
DEFAULT_START = Pose(vec3(0.0, -0.25, 0.35), _START_ROT)


@dataclass(frozen=True)
class Event:
    t: float
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {"t": self.t, "kind": self.kind, "payload": self.payload}


@dataclass(frozen=True)
class StepInput:
    twist: Twist = field(default_factory=Twist.zero)
    engage: bool = False
    gripper: bool = False
    mode: str | None = None


class Simulation:
    """One teleoperation session: a single-writer state machine.

    The engine may parallelize collision filtering inside a step; step
    boundaries are the only synchronization points. Run independent
    sessions for concurrency.
    """

    def __init__(self, description: SceneDescription, config: EngineConfig | None = None,
                 mode: str = "none", proxy: GripperProxy | None = None,
                 start_pose: Pose = DEFAULT_START):
        self.config = config or EngineConfig()
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.initial_description = description
        self.scene: SceneModel = build_scene(description)
        self.proxy = proxy or description.gripper or GripperProxy.default()
        cfg = self.config
        self.pattern: CandidatePattern = make_pattern(
            cfg.pattern_angular, cfg.pattern_rings, cfg.pattern_depths,
            cfg.pattern_rolls, cfg.pattern_diameter, cfg.pattern_thickness)
        self.place_pattern = self.pattern if cfg.place_pattern else None
        self.reference = ReferenceAxis(cfg.reference)
        self.mode = mode
        self.start_pose = start_pose

        self.time = 0.0
        self.input_pose = start_pose   # raw twist integrator
        self.goal_pose = start_pose    # low-passed tracking target
        self.ee_pose = start_pose      # kinematic: tracks goal exactly
        self.gripper_closed = False
        self.held: AttachedObject | None = None
        self.object_poses: dict[str, Pose] = {b.id: b.pose for b in description.blocks}
        self.window = TrajectoryWindow.begin(start_pose, 0.0)
        self.engaged = False
        self.engage_target: Suggestion | None = None
        self._engage_phase = 0
        self.suggestion: Suggestion | None = None
        self.target_hit: RayHit | None = None
        self.belief: GoalBelief | None = None
        self._prev_gripper_button = False
        self.event_log: list[Event] = []
        self._rebuild_assist_sets()

    # ------------------------------------------------------------------
    # assistance set maintenance (recomputed whenever the scene changes)
    # ------------------------------------------------------------------

    def _rebuild_assist_sets(self) -> None:
        cfg = self.config
        grasp_poses = axis_aligned_snap_set(self.scene, cfg.standoff)
        grasp_poses += list(self.scene.description.snap_hints)
        self._grasp_goal_poses = self._filter_free(grasp_poses, self.proxy, None)
        self._grasp_snap_field = SnapField(
            poses=tuple(self._grasp_goal_poses), epsilon=cfg.snap_epsilon,
            gamma=cfg.snap_gamma, beta=cfg.beta,
            squared_translation=cfg.squared_translation)
        if self.held is not None:
            place_poses = axis_aligned_place_set(self.scene, self.held.facet,
                                                 cfg.snap_place_yaws)
            combined = attached_proxy(self.proxy, self.held, cfg.place_contact_shrink)
            self._place_goal_poses = self._filter_free(place_poses, combined,
                                                       self.held.object_id)
            self._place_snap_field = SnapField(
                poses=tuple(self._place_goal_poses), epsilon=cfg.snap_epsilon,
                gamma=cfg.snap_gamma, beta=cfg.beta,
                squared_translation=cfg.squared_translation)
        else:
            self._place_goal_poses = []
            self._place_snap_field = SnapField(
                poses=(), epsilon=cfg.snap_epsilon, gamma=cfg.snap_gamma,
                beta=cfg.beta, squared_translation=cfg.squared_translation)

    def _filter_free(self, poses: list[Pose], proxy: GripperProxy,
                     exclude: str | None) -> list[Pose]:
        if not poses:
            return []
        colliding = batch_overlaps(self.scene, proxy, poses, exclude=exclude,
                                   margin=self.config.collision_margin,
                                   workers=self.config.workers)
        return [p for p, c in zip(poses, colliding) if not c]

    def _rebuild_scene(self) -> None:
        self.scene = self.scene.with_block_poses(self.object_poses)
        self._rebuild_assist_sets()

    # ------------------------------------------------------------------
    # stepping
    # ------------------------------------------------------------------

    def step(self, inp: StepInput) -> list[Event]:
        cfg = self.config
        if not inp.twist.is_finite():
            raise ValueError("non-finite twist input rejected")
        now = self.time + cfg.dt
        events: list[Event] = []

        if inp.mode is not None:
            if inp.mode not in MODES:
                raise ValueError(f"unknown mode {inp.mode!r}")
            if inp.mode != self.mode:
                self.mode = inp.mode
                self.suggestion = None
                self.belief = None

        self._update_engagement(inp, now, events)
        self._advance_motion(inp, cfg.dt)

        if self.held is not None:
            self.object_poses[self.held.object_id] = self.ee_pose * self.held.offset

        if inp.gripper and not self._prev_gripper_button:
            if self.gripper_closed:
                self._open_gripper(now, events)
            else:
                self._close_gripper(now, events)
        self._prev_gripper_button = inp.gripper

        self.window = tick_window(self.window, now, not inp.twist.is_zero(),
                                  self.ee_pose, cfg.imp_reset_timeout)
        self._update_suggestion(now, events)

        self.time = now
        self.event_log.extend(events)
        return events

    def _update_engagement(self, inp: StepInput, now: float, events: list[Event]) -> None:
        if inp.engage and not self.engaged:
            if self.suggestion is not None and self.suggestion.feasible:
                self.engaged = True
                self.engage_target = self.suggestion
                pre = self._pre_pose(self.engage_target.pose)
                near_pre = pose_distance(self.goal_pose, pre, self.config.beta,
                                         self.config.squared_translation)
                self._engage_phase = 1 if near_pre <= self.config.engage_tolerance else 0
                events.append(Event(now, "engage_start", {
                    "kind": self.engage_target.kind.value,
                    "pose": self.engage_target.pose.to_seven()}))
            else:
                log.debug("engage pressed with no feasible suggestion; ignored")
        elif not inp.engage and self.engaged:
            self.engaged = False
            reached = pose_distance(self.goal_pose, self.engage_target.pose,
                                    self.config.beta,
                                    self.config.squared_translation) <= self.config.engage_tolerance
            self.engage_target = None
            self.input_pose = self.goal_pose
            events.append(Event(now, "engage_end", {"reached": bool(reached)}))

    def _pre_pose(self, target: Pose) -> Pose:
        back = target.p - self.config.engage_pre_offset * target.r.axis(2)
        return Pose(back, target.r)

    def _advance_motion(self, inp: StepInput, dt: float) -> None:
        if self.engaged:
            target = self.engage_target.pose
            if self._engage_phase == 0:
                if self._drive_toward(self._pre_pose(target), dt):
                    self._engage_phase = 1
            else:
                self._drive_toward(target, dt)
            self.input_pose = self.goal_pose
        else:
            self.input_pose = integrate_twist(self.input_pose, inp.twist, dt,
                                              self.config.input_frame)
            alpha = lowpass_alpha(dt, self.config.filter_tau)
            self.goal_pose = lowpass_pose(self.goal_pose, self.input_pose, alpha)
        self.ee_pose = self.goal_pose

    def _drive_toward(self, target: Pose, dt: float) -> bool:
        delta = target.p - self.goal_pose.p
        dist = float(np.linalg.norm(delta))
        step = self.config.engage_speed * dt
        if dist <= step:
            self.goal_pose = Pose(target.p.copy(), target.r)
            return True
        f = step / dist
        self.goal_pose = Pose(self.goal_pose.p + f * delta,
                              self.goal_pose.r.slerp(target.r, f))
        return False

    # ------------------------------------------------------------------
    # gripper
    # ------------------------------------------------------------------

    def _sweep_contains(self, point_world: np.ndarray) -> bool:
        local = self.ee_pose.inverse().apply(point_world)
        local = local - np.array([0.0, 0.0, self.config.sweep_center_z])
        half = np.asarray(self.config.sweep_half_extents)
        return bool(np.all(np.abs(local) <= half))

    def _close_gripper(self, now: float, events: list[Event]) -> None:
        self.gripper_closed = True
        inside = [bid for bid in self.scene.block_ids
                  if self._sweep_contains(self.object_poses[bid].p)]
        if len(inside) != 1:
            events.append(Event(now, "pick_fail", {"candidates": inside}))
            return
        bid = inside[0]
        facet = record_support_facet(self.scene, self.ee_pose, bid)
        offset = self.ee_pose.inverse() * self.object_poses[bid]
        self.held = AttachedObject(object_id=bid,
                                   half_extents=self.scene.spec(bid).size / 2.0,
                                   offset=offset, facet=facet)
        events.append(Event(now, "pick_success", {"object_id": bid}))
        self._rebuild_assist_sets()

    def _open_gripper(self, now: float, events: list[Event]) -> None:
        self.gripper_closed = False
        if self.held is None:
            return
        held = self.held
        self.held = None
        kind, final_pose, payload = self._settle(held)
        self.object_poses[held.object_id] = final_pose
        events.append(Event(now, kind, payload))
        self._rebuild_scene()

    def _settle(self, held: AttachedObject) -> tuple[str, Pose, dict]:
        """Kinematic stand-in for release physics.

        Rests the object exactly on its support when the bottom face is
        near-parallel and close to it with enough footprint overlap;
        otherwise the object falls straight down to whatever is under its
        centroid. Footprints are world AABBs, exact for yaw-aligned blocks.
        """
        cfg = self.config
        obj_pose = self.object_poses[held.object_id]
        size = held.half_extents * 2.0

        bn_local, bn_world = _bottom_axis(obj_pose.r)
        tilt = float(np.arccos(np.clip(-bn_world[2], -1.0, 1.0)))
        corners = _box_corners(obj_pose, size)
        bottom_z = float(corners[:, 2].min())
        rect = (corners[:, 0].min(), corners[:, 0].max(),
                corners[:, 1].min(), corners[:, 1].max())
        area = (rect[1] - rect[0]) * (rect[3] - rect[2])

        supports = self._support_surfaces(exclude=held.object_id)
        contact = None
        for sid, top_z, srect in supports:
            if top_z > bottom_z + cfg.place_max_gap or top_z < bottom_z - 0.01:
                continue
            ov = _rect_overlap(rect, srect)
            if ov <= 0.0:
                continue
            if contact is None or top_z > contact[1]:
                contact = (sid, top_z, ov / area)

        max_tilt = np.deg2rad(cfg.place_max_tilt_deg)
        if contact is not None and tilt <= max_tilt:
            sid, top_z, frac = contact
            if frac >= cfg.place_min_overlap:
                pose = _rest_on(obj_pose, size, bn_world, top_z)
                return "place_success", pose, {"object_id": held.object_id,
                                               "support": sid,
                                               "overlap": round(frac, 6)}
            pose = self._fall(obj_pose, size, bn_world, exclude=(held.object_id, sid))
            return "place_fail", pose, {"object_id": held.object_id,
                                        "support": sid, "overlap": round(frac, 6)}
        pose = self._fall(obj_pose, size, bn_world, exclude=(held.object_id,))
        return "drop", pose, {"object_id": held.object_id}

    def _fall(self, obj_pose: Pose, size: np.ndarray, bn_world: np.ndarray,
              exclude: tuple[str, ...]) -> Pose:
        """Straight-line downward projection onto the first support under
        the object centroid (the table acts as an unbounded floor)."""
        cx, cy = float(obj_pose.p[0]), float(obj_pose.p[1])
        corners = _box_corners(obj_pose, size)
        bottom_z = float(corners[:, 2].min())
        best = self.scene.description.table_top()
        for sid, top_z, srect in self._support_surfaces(exclude=None):
            if sid in exclude or sid == "table":
                continue
            if srect[0] <= cx <= srect[1] and srect[2] <= cy <= srect[3] \
                    and top_z <= bottom_z + self.config.place_max_gap and top_z > best:
                best = top_z
        return _rest_on(obj_pose, size, bn_world, best)

    def _support_surfaces(self, exclude: str | None) -> list[tuple[str, float, tuple]]:
        desc = self.scene.description
        out = []
        t = desc.table
        tc = _box_corners(t.pose, t.size)
        out.append(("table", desc.table_top(),
                    (tc[:, 0].min(), tc[:, 0].max(), tc[:, 1].min(), tc[:, 1].max())))
        for bid in self.scene.block_ids:
            if bid == exclude:
                continue
            spec = self.scene.spec(bid)
            c = _box_corners(self.object_poses[bid], spec.size)
            out.append((bid, float(c[:, 2].max()),
                        (c[:, 0].min(), c[:, 0].max(), c[:, 1].min(), c[:, 1].max())))
        return out

    # ------------------------------------------------------------------
    # suggestions
    # ------------------------------------------------------------------

    def _update_suggestion(self, now: float, events: list[Event]) -> None:
        cfg = self.config
        prev = self.suggestion
        exclude = self.held.object_id if self.held else None
        self.target_hit = raycast(self.scene, self.ee_pose.p,
                                  self.ee_pose.r.axis(2), exclude=exclude)
        if self.engaged:
            # committed: hold the engaged suggestion steady until release
            self.suggestion = self.engage_target
            return

        new: Suggestion | None = None
        self.belief = None
        snapped = False
        if self.mode == "explicit" and self.target_hit is not None:
            if self.held is None:
                anchor = grasp_anchor(self.ee_pose, self.target_hit,
                                      cfg.standoff, self.reference)
                snap_pose = (apply_snap(self._grasp_snap_field, anchor.pose)
                             if cfg.snap_enabled else None)
                if snap_pose is not None:
                    new = Suggestion(snap_pose, SuggestionKind.SNAP,
                                     pose_distance(snap_pose, anchor.pose, cfg.beta,
                                                   cfg.squared_translation), True)
                    snapped = True
                else:
                    new = suggest_grasp(self.scene, self.proxy, anchor, self.pattern,
                                        cfg.beta, exclude=None, workers=cfg.workers,
                                        margin=cfg.collision_margin,
                                        squared_translation=cfg.squared_translation)
            else:
                panchor = place_anchor(self.ee_pose, self.held.facet,
                                       self.target_hit, self.reference)
                snap_pose = (apply_snap(self._place_snap_field, panchor.pose)
                             if cfg.snap_enabled else None)
                if snap_pose is not None:
                    new = Suggestion(snap_pose, SuggestionKind.SNAP,
                                     pose_distance(snap_pose, panchor.pose, cfg.beta,
                                                   cfg.squared_translation), True)
                    snapped = True
                else:
                    new = suggest_place(self.scene, self.proxy, self.held, panchor,
                                        self.place_pattern, cfg.beta,
                                        workers=cfg.workers,
                                        margin=cfg.collision_margin,
                                        contact_shrink=cfg.place_contact_shrink,
                                        squared_translation=cfg.squared_translation)
        elif self.mode == "implicit":
            goals = self._place_goal_poses if self.held else self._grasp_goal_poses
            if goals:
                proxy = (attached_proxy(self.proxy, self.held, cfg.place_contact_shrink)
                         if self.held else self.proxy)
                self.belief = infer_goal(self.window, goals, self.scene, proxy,
                                         cfg.beta, exclude=exclude,
                                         workers=cfg.workers,
                                         margin=cfg.collision_margin,
                                         squared_translation=cfg.squared_translation)
                if len(self.belief) and self.belief.best_score > \
                        1.0 / len(self.belief) + cfg.imp_exposure_margin:
                    new = Suggestion(self.belief.best_pose, SuggestionKind.CANDIDATE,
                                     0.0, True)

        self.suggestion = new
        if _suggestion_changed(prev, new, cfg.beta, cfg.suggestion_change_threshold):
            events.append(Event(now, "suggestion_changed", {
                "kind": new.kind.value if new else None,
                "feasible": new.feasible if new else None}))
        if snapped and (prev is None or prev.kind is not SuggestionKind.SNAP
                        or pose_distance(prev.pose, new.pose, cfg.beta) > 1e-12):
            events.append(Event(now, "snap_fired", {"pose": new.pose.to_seven()}))

    # ------------------------------------------------------------------
    # state snapshot (wire format)
    # ------------------------------------------------------------------

    def state_dict(self) -> dict:
        out = {
            "t": round(self.time, 9),
            "ee_pose": self.ee_pose.to_seven(),
            "engaged": self.engaged,
            "mode": self.mode,
            "gripper": "closed" if self.gripper_closed else "open",
            "held": self.held.object_id if self.held else None,
            "objects": [
                {"id": bid, "pose": self.object_poses[bid].to_seven(),
                 "size": [float(v) for v in self.scene.spec(bid).size],
                 "color": self.scene.spec(bid).color}
                for bid in self.scene.block_ids
            ],
            "table": {"size": [float(v) for v in self.scene.description.table.size],
                      "pose": self.scene.description.table.pose.to_seven()},
        }
        if self.suggestion is not None:
            out["suggestion"] = {"pose": self.suggestion.pose.to_seven(),
                                 "kind": self.suggestion.kind.value,
                                 "feasible": self.suggestion.feasible}
        if self.target_hit is not None:
            out["target"] = {"point": [float(v) for v in self.target_hit.point],
                             "normal": [float(v) for v in self.target_hit.normal]}
        if self.belief is not None and len(self.belief):
            out["goal_scores"] = [
                {"pose": g.to_seven(), "score": float(s)}
                for g, s in zip(self.belief.goals, self.belief.scores)]
        return out


def _bottom_axis(rot: Rotation) -> tuple[np.ndarray, np.ndarray]:
    """Object-frame unit axis currently pointing most downward, and its
    world direction."""
    m = rot.matrix
    candidates = np.concatenate([m.T, -m.T])  # world directions of +/- axes
    i = int(np.argmin(candidates[:, 2]))
    axes = np.concatenate([np.eye(3), -np.eye(3)])
    return axes[i], candidates[i]


def _box_corners(pose: Pose, size: np.ndarray) -> np.ndarray:
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1)
                      for sz in (-1, 1)], dtype=float)
    return pose.p + (signs * (np.asarray(size) / 2.0)) @ pose.r.matrix.T


def _rect_overlap(a: tuple, b: tuple) -> float:
    w = min(a[1], b[1]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[2], b[2])
    return max(w, 0.0) * max(h, 0.0)


def _rest_on(obj_pose: Pose, size: np.ndarray, bn_world: np.ndarray,
             top_z: float) -> Pose:
    """Settle flat: rotate the bottom face exactly level, then shift
    vertically so the bottom face sits exactly on the support plane."""
    from .se3 import minimal_rotation_between
    if -bn_world[2] < 1.0 - 1e-12:
        rot = minimal_rotation_between(bn_world, np.array([0.0, 0.0, -1.0])) * obj_pose.r
    else:
        rot = obj_pose.r
    flat = Pose(obj_pose.p.copy(), rot)
    corners = _box_corners(flat, size)
    dz = top_z - float(corners[:, 2].min())
    return Pose(flat.p + np.array([0.0, 0.0, dz]), rot)


def _suggestion_changed(prev: Suggestion | None, new: Suggestion | None,
                        beta: float, threshold: float) -> bool:
    if (prev is None) != (new is None):
        return True
    if prev is None:
        return False
    if prev.kind is not new.kind or prev.feasible != new.feasible:
        return True
    return pose_distance(prev.pose, new.pose, beta) > threshold


def run_trace(sim: Simulation, inputs: list[StepInput]) -> list[Event]:
    """Replay a list of step inputs; returns all emitted events."""
    events: list[Event] = []
    for inp in inputs:
        events.extend(sim.step(inp))
    return events
