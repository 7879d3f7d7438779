"""Snapping: nudge anchors onto preferred poses via a potential field.

The field is a pose set G with the proximity potential
phi(e) = min_i d(e, G_i). A snap fires when some member pose lies within
the distance threshold epsilon of the anchor and its potential falls below
gamma; members have potential zero, so for gamma > 0 this collapses to
nearest-member-within-epsilon, and gamma <= 0 disables snapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scene import SceneModel
from .se3 import Pose, Rotation, pose_distance_many

# world-axis top-down / side approach rotation matrices, columns r_x r_y r_z
_TOP_ACROSS_X = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])
_TOP_ACROSS_Y = np.array([[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]])
_SIDE = {
    "+x": np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]),
    "-x": np.array([[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]]),
    "+y": np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]]),
    "-y": np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]),
}


@dataclass(frozen=True)
class SnapField:
    poses: tuple[Pose, ...]
    epsilon: float
    gamma: float
    beta: float
    squared_translation: bool = False
    _ps: np.ndarray = field(init=False, repr=False)
    _qs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ps = np.asarray([p.p for p in self.poses], dtype=float).reshape(-1, 3)
        qs = np.asarray([p.r.q for p in self.poses], dtype=float).reshape(-1, 4)
        object.__setattr__(self, "_ps", ps)
        object.__setattr__(self, "_qs", qs)

    def __len__(self) -> int:
        return len(self.poses)

    def distances(self, pose: Pose) -> np.ndarray:
        return pose_distance_many(self._ps, self._qs, pose, self.beta,
                                  self.squared_translation)


def snap_potential(fld: SnapField, pose: Pose) -> float:
    """phi(pose) = min over the field of the weighted pose distance."""
    if len(fld) == 0:
        raise ValueError("snap potential of an empty field")
    return float(fld.distances(pose).min())


def apply_snap(fld: SnapField, anchor: Pose) -> Pose | None:
    """The snap pose replacing the anchor, or None when no snap fires.

    Member poses all have potential zero, so the search reduces to the
    nearest member within epsilon (ties break to the lower index);
    gamma <= 0 or epsilon <= 0 or an empty field never fires.
    """
    if len(fld) == 0 or fld.epsilon <= 0.0 or fld.gamma <= 0.0:
        return None
    d = fld.distances(anchor)
    i = int(np.argmin(d))
    if d[i] > fld.epsilon:
        return None
    return fld.poses[i]


def axis_aligned_snap_set(scene: SceneModel, standoff: float) -> list[Pose]:
    """Canonical grasp poses per block: two top-down rolls plus four side
    approaches at the centroid, ordered by (block id, approach index)."""
    out: list[Pose] = []
    for block_id in sorted(scene.block_ids):
        c = scene.spec(block_id).pose.p
        out.append(Pose(c + np.array([0.0, 0.0, standoff]), Rotation.from_matrix(_TOP_ACROSS_X)))
        out.append(Pose(c + np.array([0.0, 0.0, standoff]), Rotation.from_matrix(_TOP_ACROSS_Y)))
        for axis, sign in (("+x", (1.0, 0.0, 0.0)), ("-x", (-1.0, 0.0, 0.0)),
                           ("+y", (0.0, 1.0, 0.0)), ("-y", (0.0, -1.0, 0.0))):
            offset = standoff * np.asarray(sign)
            out.append(Pose(c + offset, Rotation.from_matrix(_SIDE[axis])))
    return out
