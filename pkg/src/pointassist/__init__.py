"""pointassist: pointing-driven grasp/placement assistance for teleoperation.

The engine turns an end-effector pointing ray into collision-filtered grasp
and placement pose suggestions, with snapping, an inference-based baseline,
a deterministic kinematic simulator, and a trace/bench/serve CLI.
"""

from .se3 import (Pose, Rotation, Twist, integrate_twist, lowpass_pose,
                  minimal_rotation_between, pose_distance, project_onto_plane)
from .scene import (GripperProxy, RayHit, SceneDescription, SceneModel,
                    batch_overlaps, build_scene, load_scene, overlaps, raycast)

__version__ = "0.1.0"

__all__ = [
    "Pose", "Rotation", "Twist", "integrate_twist", "lowpass_pose",
    "minimal_rotation_between", "pose_distance", "project_onto_plane",
    "GripperProxy", "RayHit", "SceneDescription", "SceneModel",
    "batch_overlaps", "build_scene", "load_scene", "overlaps", "raycast",
    "__version__",
]
