"""Rigid-body math for the assistance engine.

Poses are position + unit quaternion (xyzw storage, matching the 7-number
wire convention [px, py, pz, qx, qy, qz, qw]). Everything here is plain
float64 numpy with value semantics; no operation mutates its inputs, so all
functions are safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Below this norm a plane projection is reported as degenerate (input
# parallel to the plane normal).
DEGENERATE_EPS = 1e-8

_WORLD_BASIS = np.eye(3)


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=float)


def normalized(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return np.asarray(v, dtype=float) / n


# ---------------------------------------------------------------------------
# quaternion primitives (xyzw), shared by Rotation and the batched helpers
# ---------------------------------------------------------------------------


def quat_identity() -> np.ndarray:
    return np.array([0.0, 0.0, 0.0, 1.0])


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product; broadcasts over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ax, ay, az, aw = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bx, by, bz, bw = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        ],
        axis=-1,
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    out = q.copy()
    out[..., :3] *= -1.0
    return out


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise ValueError("zero quaternion")
    return q / n


def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Unit quaternion with w >= 0 (the wire-format convention)."""
    q = quat_normalize(q)
    flip = q[..., 3:4] < 0.0
    return np.where(flip, -q, q)


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by quaternion(s) q; broadcasts over leading axes."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    u = q[..., :3]
    w = q[..., 3:4]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    half = 0.5 * angle
    return np.concatenate([axis * math.sin(half), [math.cos(half)]])


def quat_from_rotvec(rv: np.ndarray) -> np.ndarray:
    """Exponential map so(3) -> unit quaternion, stable near zero."""
    rv = np.asarray(rv, dtype=float)
    angle = float(np.linalg.norm(rv))
    if angle < 1e-12:
        # sin(a/2)/a ~ 1/2 - a^2/48
        s = 0.5 - angle * angle / 48.0
        return np.concatenate([rv * s, [math.cos(0.5 * angle)]])
    return quat_from_axis_angle(rv / angle, angle)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix; broadcasts: (..., 4) -> (..., 3, 3)."""
    q = np.asarray(q, dtype=float)
    x, y, z, w = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    m = np.empty(q.shape[:-1] + (3, 3), dtype=float)
    m[..., 0, 0] = 1.0 - 2.0 * (yy + zz)
    m[..., 0, 1] = 2.0 * (xy - wz)
    m[..., 0, 2] = 2.0 * (xz + wy)
    m[..., 1, 0] = 2.0 * (xy + wz)
    m[..., 1, 1] = 1.0 - 2.0 * (xx + zz)
    m[..., 1, 2] = 2.0 * (yz - wx)
    m[..., 2, 0] = 2.0 * (xz - wy)
    m[..., 2, 1] = 2.0 * (yz + wx)
    m[..., 2, 2] = 1.0 - 2.0 * (xx + yy)
    return m


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Rotation matrix -> unit quaternion (Shepperd's branch method)."""
    m = np.asarray(m, dtype=float)
    t = m[0, 0] + m[1, 1] + m[2, 2]
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] >= m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    return quat_normalize(np.array([x, y, z, w]))


def quat_slerp(a: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    """Shortest-path spherical interpolation; endpoints returned exactly."""
    if alpha <= 0.0:
        return np.asarray(a, dtype=float).copy()
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = float(np.dot(a, b))
    if d < 0.0:
        b = -b
        d = -d
    if alpha >= 1.0:
        return b.copy()
    if d > 1.0 - 1e-12:
        return quat_normalize(a + alpha * (b - a))
    theta = math.acos(min(1.0, d))
    s = math.sin(theta)
    return (math.sin((1.0 - alpha) * theta) * a + math.sin(alpha * theta) * b) / s


# ---------------------------------------------------------------------------
# Rotation / Pose / Twist
# ---------------------------------------------------------------------------


class Rotation:
    """3D rotation backed by a unit quaternion.

    Convertible among quaternion, 3x3 matrix (columns are the frame axes
    r_x, r_y, r_z) and axis-angle.
    """

    __slots__ = ("q",)

    def __init__(self, q: np.ndarray):
        self.q = np.asarray(q, dtype=float)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(quat_identity())

    @classmethod
    def from_quat(cls, q) -> "Rotation":
        return cls(quat_normalize(np.asarray(q, dtype=float)))

    @classmethod
    def from_matrix(cls, m) -> "Rotation":
        return cls(quat_from_matrix(m))

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Rotation":
        return cls(quat_from_axis_angle(normalized(axis), float(angle)))

    @classmethod
    def from_rotvec(cls, rv) -> "Rotation":
        return cls(quat_from_rotvec(rv))

    @property
    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.q)

    def axis(self, i: int) -> np.ndarray:
        """Frame axis i (column i of the matrix): 0=r_x, 1=r_y, 2=r_z."""
        return quat_rotate(self.q, _WORLD_BASIS[i])

    def as_axis_angle(self) -> tuple[np.ndarray, float]:
        q = quat_canonical(self.q)
        xyz = q[:3]
        n = float(np.linalg.norm(xyz))
        angle = 2.0 * math.atan2(n, q[3])
        if n < 1e-12:
            return vec3(0.0, 0.0, 1.0), angle
        return xyz / n, angle

    def apply(self, v: np.ndarray) -> np.ndarray:
        return quat_rotate(self.q, v)

    def inverse(self) -> "Rotation":
        return Rotation(quat_conjugate(self.q))

    def __mul__(self, other: "Rotation") -> "Rotation":
        return Rotation(quat_mul(self.q, other.q))

    def slerp(self, other: "Rotation", alpha: float) -> "Rotation":
        return Rotation(quat_slerp(self.q, other.q, alpha))

    def angle_to(self, other: "Rotation") -> float:
        rel = quat_mul(quat_conjugate(self.q), other.q)
        return 2.0 * math.atan2(float(np.linalg.norm(rel[:3])), abs(float(rel[3])))

    def allclose(self, other: "Rotation", atol: float = 1e-9) -> bool:
        return self.angle_to(other) <= atol

    def __repr__(self) -> str:
        return f"Rotation(q={np.array2string(self.q, precision=6)})"


@dataclass(frozen=True)
class Pose:
    """Rigid transform: world point = r.apply(local point) + p."""

    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    r: Rotation = field(default_factory=Rotation.identity)

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_pr(cls, p, r: Rotation) -> "Pose":
        return cls(np.asarray(p, dtype=float), r)

    def __mul__(self, other: "Pose") -> "Pose":
        return Pose(self.p + self.r.apply(other.p), self.r * other.r)

    def inverse(self) -> "Pose":
        rinv = self.r.inverse()
        return Pose(-rinv.apply(self.p), rinv)

    def apply(self, point: np.ndarray) -> np.ndarray:
        return self.r.apply(point) + self.p

    def apply_direction(self, v: np.ndarray) -> np.ndarray:
        return self.r.apply(v)

    def to_seven(self) -> list[float]:
        """Wire form [px, py, pz, qx, qy, qz, qw], unit quaternion, w >= 0."""
        q = quat_canonical(self.r.q)
        return [float(self.p[0]), float(self.p[1]), float(self.p[2]),
                float(q[0]), float(q[1]), float(q[2]), float(q[3])]

    @classmethod
    def from_seven(cls, values) -> "Pose":
        a = np.asarray(values, dtype=float)
        if a.shape != (7,):
            raise ValueError(f"pose needs 7 numbers, got shape {a.shape}")
        return cls(a[:3].copy(), Rotation.from_quat(a[3:]))

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return (bool(np.all(np.abs(self.p - other.p) <= atol))
                and self.r.allclose(other.r, atol))

    def __repr__(self) -> str:
        return f"Pose(p={np.array2string(self.p, precision=6)}, {self.r})"


@dataclass(frozen=True)
class Twist:
    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "linear", np.asarray(self.linear, dtype=float))
        object.__setattr__(self, "angular", np.asarray(self.angular, dtype=float))

    @classmethod
    def zero(cls) -> "Twist":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_array(cls, a) -> "Twist":
        a = np.asarray(a, dtype=float)
        if a.shape != (6,):
            raise ValueError(f"twist needs 6 numbers, got shape {a.shape}")
        return cls(a[:3].copy(), a[3:].copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.linear)) and np.all(np.isfinite(self.angular)))

    def is_zero(self) -> bool:
        return not (np.any(self.linear) or np.any(self.angular))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def pose_distance(x: Pose, y: Pose, beta: float, squared_translation: bool = False) -> float:
    """Weighted SE(3) distance between two poses.

    d^2 = ||p_x - p_y|| + 2 beta^2 (1 - tr(R_y^-1 R_x) / 3)

    Note the translation term is the *unsquared* Euclidean norm; that is the
    canonical form here, and all defaults use it. Pass
    ``squared_translation=True`` for the dimensionally homogeneous variant.
    beta (meters) weighs rotation against translation.
    """
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    t = float(np.linalg.norm(x.p - y.p))
    if squared_translation:
        t = t * t
    d2 = t + (8.0 * beta * beta / 3.0) * _rel_quat_vec_norm2(y.r.q, x.r.q)
    return math.sqrt(max(d2, 0.0))


def _rel_quat_vec_norm2(a, b):
    """|vec(a^-1 b)|^2 = sin^2(theta/2) for unit quaternions; times
    (8 beta^2 / 3) this is the rotation term 2 beta^2 (1 - tr/3).

    Products are paired so equal inputs cancel exactly (d(x, x) == 0
    bit-for-bit) and swapping a and b only flips signs (exact symmetry).
    """
    ax, ay, az, aw = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bx, by, bz, bw = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    rx = (aw * bx - ax * bw) + (az * by - ay * bz)
    ry = (aw * by - ay * bw) + (ax * bz - az * bx)
    rz = (aw * bz - az * bw) + (ay * bx - ax * by)
    return rx * rx + ry * ry + rz * rz


def pose_distance_many(ps: np.ndarray, qs: np.ndarray, ref: Pose, beta: float,
                       squared_translation: bool = False) -> np.ndarray:
    """Vectorized pose_distance from N poses (ps (N,3), qs (N,4)) to ref."""
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    t = np.linalg.norm(ps - ref.p[None, :], axis=1)
    if squared_translation:
        t = t * t
    d2 = t + (8.0 * beta * beta / 3.0) * _rel_quat_vec_norm2(ref.r.q[None, :], qs)
    return np.sqrt(np.maximum(d2, 0.0))


def project_onto_plane(v: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Component of v in the plane with unit normal n.

    Returns the exact zero vector when v is (near-)parallel to n; callers
    must treat that as the degenerate case (see ``is_degenerate``).
    """
    v = np.asarray(v, dtype=float)
    n = np.asarray(n, dtype=float)
    out = v - float(np.dot(v, n)) * n
    if float(np.linalg.norm(out)) < DEGENERATE_EPS:
        return np.zeros(3)
    return out


def is_degenerate(projected: np.ndarray) -> bool:
    return float(np.linalg.norm(projected)) < DEGENERATE_EPS


def perpendicular_axis(v: np.ndarray) -> np.ndarray:
    """Deterministic unit vector perpendicular to v: cross v with the world
    basis vector least aligned with it."""
    v = np.asarray(v, dtype=float)
    i = int(np.argmin(np.abs(v)))
    return normalized(np.cross(v, _WORLD_BASIS[i]))


def minimal_rotation_between(from_v: np.ndarray, to_v: np.ndarray) -> Rotation:
    """Minimal-angle rotation taking unit vector from_v onto unit vector to_v.

    Antiparallel inputs rotate by pi about ``perpendicular_axis(from_v)``.
    """
    from_v = np.asarray(from_v, dtype=float)
    to_v = np.asarray(to_v, dtype=float)
    d = float(np.dot(from_v, to_v))
    if d < -1.0 + 1e-8:
        return Rotation.from_axis_angle(perpendicular_axis(from_v), math.pi)
    xyz = np.cross(from_v, to_v)
    return Rotation.from_quat(np.concatenate([xyz, [1.0 + d]]))


def integrate_twist(pose: Pose, twist: Twist, dt: float, frame: str = "world") -> Pose:
    """Advance a pose by a constant twist over dt.

    The rotation update uses the exact exponential map, so n steps of dt
    equal one step of n*dt for a constant twist. frame selects whether the
    twist components are expressed in the world frame (default) or the
    pose's own frame.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    dr = Rotation.from_rotvec(twist.angular * dt)
    if frame == "world":
        return Pose(pose.p + twist.linear * dt, dr * pose.r)
    if frame == "body":
        return Pose(pose.p + pose.r.apply(twist.linear) * dt, pose.r * dr)
    raise ValueError(f"unknown twist frame {frame!r}")


def lowpass_pose(prev: Pose, target: Pose, alpha: float) -> Pose:
    """First-order pose filter: lerp position, slerp rotation by alpha."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    if alpha == 1.0:
        return Pose(target.p.copy(), Rotation(target.r.q.copy()))
    return Pose(prev.p + alpha * (target.p - prev.p), prev.r.slerp(target.r, alpha))


def lowpass_alpha(dt: float, tau: float) -> float:
    """Filter coefficient for a first-order lag with time constant tau."""
    if tau <= 0.0:
        return 1.0
    return dt / (tau + dt)
