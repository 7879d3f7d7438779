"""Box-world scene model: triangle mesh, BVH, raycast and overlap queries.

A scene is a table plus axis-arbitrary block primitives, triangulated into
an immutable mesh (12 triangles per box) with a deterministic BVH. Queries
dispatch to the active kernel backend (compiled or numpy fallback); see
``pointassist.kernels``.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import kernels
from .se3 import Pose, Rotation, quat_to_matrix

TABLE_ID = "table"
MIN_RAY_DISTANCE = 1e-6

# Unit box corners (x varies fastest) and the 12 outward-wound triangles.
_CORNER_SIGNS = np.array(
    [[-1, -1, -1], [1, -1, -1], [-1, 1, -1], [1, 1, -1],
     [-1, -1, 1], [1, -1, 1], [-1, 1, 1], [1, 1, 1]], dtype=float)
_BOX_TRIANGLES = np.array(
    [(0, 2, 1), (1, 2, 3),    # -z
     (4, 5, 6), (5, 7, 6),    # +z
     (0, 1, 4), (1, 5, 4),    # -y
     (2, 6, 3), (3, 6, 7),    # +y
     (0, 4, 2), (2, 4, 6),    # -x
     (1, 3, 5), (3, 7, 5)],   # +x
    dtype=np.int32)


class SceneError(ValueError):
    """Invalid scene description."""


@dataclass(frozen=True)
class BoxSpec:
    id: str
    size: np.ndarray
    pose: Pose
    color: str = "gray"

    def __post_init__(self):
        object.__setattr__(self, "size", np.asarray(self.size, dtype=float))

    def top_height(self) -> float:
        corners = self.pose.p + (_CORNER_SIGNS * (self.size / 2.0)) @ self.pose.r.matrix.T
        return float(corners[:, 2].max())

    def to_dict(self) -> dict:
        return {"id": self.id, "size": [float(v) for v in self.size],
                "pose": self.pose.to_seven(), "color": self.color}


@dataclass(frozen=True)
class ProxyBox:
    half_extents: np.ndarray
    offset: Pose

    def __post_init__(self):
        object.__setattr__(self, "half_extents", np.asarray(self.half_extents, dtype=float))


@dataclass(frozen=True)
class GripperProxy:
    """Collision geometry of the gripper as oriented boxes in the ee frame.

    The frame convention: r_z points out of the gripper toward the scene,
    r_y is the finger closing axis, the fingertip plane sits at
    ``fingertip_depth`` along +z.
    """

    boxes: tuple[ProxyBox, ...]
    fingertip_depth: float = 0.085

    @classmethod
    def default(cls) -> "GripperProxy":
        # Two fingers (0.02 x 0.01 x 0.05 m) at +/-0.04 m along the closing
        # axis, tips at z = 0.085; palm bar (0.09 x 0.03 x 0.04 m) behind.
        finger = np.array([0.01, 0.005, 0.025])
        return cls(boxes=(
            ProxyBox(finger, Pose(np.array([0.0, 0.04, 0.060]), Rotation.identity())),
            ProxyBox(finger, Pose(np.array([0.0, -0.04, 0.060]), Rotation.identity())),
            ProxyBox(np.array([0.045, 0.015, 0.02]),
                     Pose(np.array([0.0, 0.0, 0.015]), Rotation.identity())),
        ))

    @classmethod
    def from_dict(cls, data: dict) -> "GripperProxy":
        boxes = []
        for b in data.get("boxes", []):
            half = np.asarray(b["half_extents"], dtype=float)
            if half.shape != (3,) or np.any(half <= 0):
                raise SceneError(f"proxy box half extents must be 3 positive numbers: {b}")
            boxes.append(ProxyBox(half, Pose.from_seven(b["offset"])))
        if not boxes:
            raise SceneError("gripper proxy needs at least one box")
        return cls(boxes=tuple(boxes),
                   fingertip_depth=float(data.get("fingertip_depth", 0.085)))

    def with_attached(self, half_extents: np.ndarray, offset: Pose) -> "GripperProxy":
        """Proxy plus one more box (the held object) rigidly attached."""
        return dataclasses.replace(
            self, boxes=self.boxes + (ProxyBox(np.asarray(half_extents, float), offset),))

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        half = np.ascontiguousarray([b.half_extents for b in self.boxes], dtype=float)
        off_p = np.ascontiguousarray([b.offset.p for b in self.boxes], dtype=float)
        off_r = np.ascontiguousarray([b.offset.r.matrix for b in self.boxes], dtype=float)
        return half, off_p, off_r


@dataclass(frozen=True)
class SceneDescription:
    table: BoxSpec
    blocks: tuple[BoxSpec, ...]
    snap_hints: tuple[Pose, ...] = ()
    gripper: GripperProxy | None = None

    def validate(self) -> None:
        ids = [self.table.id] + [b.id for b in self.blocks]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise SceneError(f"duplicate object ids: {sorted(dupes)}")
        for spec in (self.table, *self.blocks):
            if spec.size.shape != (3,) or np.any(spec.size <= 0.0):
                raise SceneError(f"object {spec.id!r} has non-positive size {spec.size}")

    @classmethod
    def from_dict(cls, data: dict) -> "SceneDescription":
        try:
            table = data["table"]
        except KeyError:
            raise SceneError("scene description is missing 'table'") from None
        table_spec = BoxSpec(id=TABLE_ID, size=np.asarray(table["size"], float),
                             pose=Pose.from_seven(table["pose"]), color=table.get("color", "gray"))
        blocks = []
        for i, blk in enumerate(data.get("blocks", [])):
            if "id" not in blk:
                raise SceneError(f"block #{i} has no id")
            blocks.append(BoxSpec(id=str(blk["id"]), size=np.asarray(blk["size"], float),
                                  pose=Pose.from_seven(blk["pose"]),
                                  color=blk.get("color", "gray")))
        hints = tuple(Pose.from_seven(p) for p in data.get("snap_hints", []))
        gripper = GripperProxy.from_dict(data["gripper"]) if "gripper" in data else None
        desc = cls(table=table_spec, blocks=tuple(blocks), snap_hints=hints, gripper=gripper)
        desc.validate()
        return desc

    def to_dict(self) -> dict:
        out = {
            "table": {"size": [float(v) for v in self.table.size],
                      "pose": self.table.pose.to_seven(), "color": self.table.color},
            "blocks": [b.to_dict() for b in self.blocks],
        }
        if self.snap_hints:
            out["snap_hints"] = [p.to_seven() for p in self.snap_hints]
        return out

    def with_block_poses(self, updates: dict[str, Pose]) -> "SceneDescription":
        blocks = tuple(
            dataclasses.replace(b, pose=updates[b.id]) if b.id in updates else b
            for b in self.blocks)
        return dataclasses.replace(self, blocks=blocks)

    def table_top(self) -> float:
        return self.table.top_height()


@dataclass(frozen=True)
class RayHit:
    point: np.ndarray
    normal: np.ndarray
    distance: float
    face: int
    object_id: str | None


class Bvh:
    """Flattened binary AABB tree over triangles (median split, leaf <= 4)."""

    __slots__ = ("nmin", "nmax", "left", "right", "start", "count", "order")

    def __init__(self, tri_min: np.ndarray, tri_max: np.ndarray, leaf_size: int = 4):
        centroids = 0.5 * (tri_min + tri_max)
        n = tri_min.shape[0]
        nodes_min, nodes_max = [], []
        left, right, start, count = [], [], [], []
        order: list[int] = []

        def build(idx: np.ndarray) -> int:
            node = len(nodes_min)
            nodes_min.append(tri_min[idx].min(axis=0))
            nodes_max.append(tri_max[idx].max(axis=0))
            left.append(-1)
            right.append(-1)
            start.append(0)
            count.append(0)
            if len(idx) <= leaf_size:
                start[node] = len(order)
                count[node] = len(idx)
                order.extend(int(i) for i in idx)
                return node
            c = centroids[idx]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            # stable sort on (centroid, original index) keeps builds
            # byte-identical for identical inputs
            perm = np.lexsort((idx, c[:, axis]))
            idx = idx[perm]
            mid = len(idx) // 2
            left[node] = build(idx[:mid])
            right[node] = build(idx[mid:])
            return node

        build(np.arange(n, dtype=np.int64))
        self.nmin = np.ascontiguousarray(nodes_min, dtype=float)
        self.nmax = np.ascontiguousarray(nodes_max, dtype=float)
        self.left = np.ascontiguousarray(left, dtype=np.int32)
        self.right = np.ascontiguousarray(right, dtype=np.int32)
        self.start = np.ascontiguousarray(start, dtype=np.int32)
        self.count = np.ascontiguousarray(count, dtype=np.int32)
        self.order = np.ascontiguousarray(order, dtype=np.int32)

    def to_bytes(self) -> bytes:
        head = struct.pack("<II", self.nmin.shape[0], self.order.shape[0])
        return head + b"".join(a.tobytes() for a in (
            self.nmin, self.nmax, self.left, self.right, self.start, self.count, self.order))


class SceneModel:
    """Immutable triangulated scene with a BVH and an object index.

    Safe for any number of concurrent readers. To move blocks, derive a new
    model via ``with_block_poses``.
    """

    def __init__(self, description: SceneDescription):
        description.validate()
        self.description = description
        specs = [description.table, *description.blocks]
        self.object_ids = [s.id for s in specs]
        self._id_index = {s.id: i for i, s in enumerate(specs)}

        verts = []
        tris = []
        face_obj = []
        for oi, spec in enumerate(specs):
            corners = spec.pose.p + (_CORNER_SIGNS * (spec.size / 2.0)) @ spec.pose.r.matrix.T
            base = 8 * oi
            verts.append(corners)
            tris.append(_BOX_TRIANGLES + base)
            face_obj.extend([oi] * 12)
        self.vertices = np.ascontiguousarray(np.concatenate(verts), dtype=float)
        self.triangles = np.ascontiguousarray(np.concatenate(tris), dtype=np.int32)
        self.face_object = np.ascontiguousarray(face_obj, dtype=np.int32)

        self.tv0 = np.ascontiguousarray(self.vertices[self.triangles[:, 0]])
        self.tv1 = np.ascontiguousarray(self.vertices[self.triangles[:, 1]])
        self.tv2 = np.ascontiguousarray(self.vertices[self.triangles[:, 2]])
        n = np.cross(self.tv1 - self.tv0, self.tv2 - self.tv0)
        self.face_normals = np.ascontiguousarray(n / np.linalg.norm(n, axis=1, keepdims=True))

        tri_min = np.minimum(np.minimum(self.tv0, self.tv1), self.tv2)
        tri_max = np.maximum(np.maximum(self.tv0, self.tv1), self.tv2)
        self.bvh = Bvh(tri_min, tri_max)

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    def object_index(self, object_id: str | None) -> int:
        if object_id is None:
            return -1
        try:
            return self._id_index[object_id]
        except KeyError:
            raise SceneError(f"unknown object id {object_id!r}") from None

    def spec(self, object_id: str) -> BoxSpec:
        i = self.object_index(object_id)
        return (self.description.table, *self.description.blocks)[i]

    @property
    def block_ids(self) -> list[str]:
        return [b.id for b in self.description.blocks]

    def with_block_poses(self, updates: dict[str, Pose]) -> "SceneModel":
        return SceneModel(self.description.with_block_poses(updates))

    def _kernel_args(self):
        b = self.bvh
        return (self.tv0, self.tv1, self.tv2, self.face_object,
                b.nmin, b.nmax, b.left, b.right, b.start, b.count, b.order)


def build_scene(description: SceneDescription) -> SceneModel:
    return SceneModel(description)


def raycast(scene: SceneModel, origin: np.ndarray, direction: np.ndarray,
            exclude: str | None = None, min_distance: float = MIN_RAY_DISTANCE,
            backend: str | None = None) -> RayHit | None:
    """Nearest scene intersection along a unit-direction ray, if any.

    Triangles of ``exclude`` (e.g. the held object) are skipped, as are hits
    closer than ``min_distance``. The reported normal always faces the ray
    origin (normal . direction < 0).
    """
    origin = np.ascontiguousarray(origin, dtype=float)
    direction = np.ascontiguousarray(direction, dtype=float)
    k = kernels.get_backend(backend)
    face, t = k.raycast(*scene._kernel_args(), origin, direction,
                        scene.object_index(exclude), min_distance)
    if face < 0:
        return None
    normal = scene.face_normals[face]
    if float(np.dot(normal, direction)) > 0.0:
        normal = -normal
    return RayHit(point=origin + t * direction, normal=normal.copy(), distance=float(t),
                  face=int(face), object_id=scene.object_ids[scene.face_object[face]])


def poses_to_arrays(poses) -> tuple[np.ndarray, np.ndarray]:
    """(N,3) positions and (N,4) quaternions from a list of Pose (or pass
    through an already-built (ps, qs) pair)."""
    if isinstance(poses, tuple) and len(poses) == 2:
        ps, qs = poses
        return np.ascontiguousarray(ps, dtype=float), np.ascontiguousarray(qs, dtype=float)
    ps = np.ascontiguousarray([p.p for p in poses], dtype=float).reshape(-1, 3)
    qs = np.ascontiguousarray([p.r.q for p in poses], dtype=float).reshape(-1, 4)
    return ps, qs


def batch_overlaps(scene: SceneModel, proxy: GripperProxy, poses,
                   exclude: str | None = None, margin: float = 0.0,
                   workers: int = 1, backend: str | None = None) -> np.ndarray:
    """Element-wise overlap test for many end-effector poses (bool (N,)).

    Data-parallel: results are identical for any worker count and equal to
    mapping ``overlaps`` over the poses.
    """
    ps, qs = poses_to_arrays(poses)
    if ps.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    rm = np.ascontiguousarray(quat_to_matrix(qs))
    half, off_p, off_r = proxy.arrays()
    k = kernels.get_backend(backend)
    flags = k.batch_overlap(*scene._kernel_args(), half, off_p, off_r, ps, rm,
                            scene.object_index(exclude), margin, int(workers))
    return flags.astype(bool)


def overlaps(scene: SceneModel, proxy: GripperProxy, ee_pose: Pose,
             exclude: str | None = None, margin: float = 0.0,
             backend: str | None = None) -> bool:
    """True iff any proxy box placed by ee_pose intersects the scene."""
    ps = np.ascontiguousarray(ee_pose.p.reshape(1, 3))
    qs = np.ascontiguousarray(ee_pose.r.q.reshape(1, 4))
    return bool(batch_overlaps(scene, proxy, (ps, qs), exclude=exclude,
                               margin=margin, workers=1, backend=backend)[0])


# ---------------------------------------------------------------------------
# scene files
# ---------------------------------------------------------------------------


def load_scene_file(path) -> SceneDescription:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise SceneError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from None
    return SceneDescription.from_dict(data)


def bundled_scene_names() -> list[str]:
    root = resources.files("pointassist") / "scenes"
    return sorted(p.name.removesuffix(".json") for p in root.iterdir()
                  if p.name.endswith(".json"))


def load_scene(name_or_path: str) -> SceneDescription:
    """Scene description from a file path or a bundled scene name."""
    candidate = resources.files("pointassist") / "scenes" / f"{name_or_path}.json"
    if candidate.is_file():
        return SceneDescription.from_dict(json.loads(candidate.read_text()))
    return load_scene_file(name_or_path)
