import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pointassist.scene import (GripperProxy, SceneDescription, build_scene,
                               load_scene)
from pointassist.se3 import Pose, Rotation, vec3

DOWN_ROT = Rotation.from_matrix(np.array([[1.0, 0.0, 0.0],
                                          [0.0, -1.0, 0.0],
                                          [0.0, 0.0, -1.0]]))


def table_only_description() -> SceneDescription:
    return SceneDescription.from_dict({
        "table": {"size": [1.2, 0.8, 0.05], "pose": [0, 0, -0.025, 0, 0, 0, 1]},
        "blocks": [],
    })


def one_block_description(x=0.0, y=0.0, edge=0.04, block_id="cube") -> SceneDescription:
    return SceneDescription.from_dict({
        "table": {"size": [1.2, 0.8, 0.05], "pose": [0, 0, -0.025, 0, 0, 0, 1]},
        "blocks": [{"id": block_id, "size": [edge] * 3,
                    "pose": [x, y, edge / 2, 0, 0, 0, 1], "color": "blue"}],
    })


def two_block_description() -> SceneDescription:
    return SceneDescription.from_dict({
        "table": {"size": [1.2, 0.8, 0.05], "pose": [0, 0, -0.025, 0, 0, 0, 1]},
        "blocks": [
            {"id": "a", "size": [0.04] * 3, "pose": [0.0, 0.0, 0.02, 0, 0, 0, 1],
             "color": "blue"},
            {"id": "b", "size": [0.04] * 3, "pose": [0.15, 0.1, 0.02, 0, 0, 0, 1],
             "color": "pink"},
        ],
    })


def down_pose(x, y, z) -> Pose:
    return Pose(vec3(x, y, z), DOWN_ROT)


@pytest.fixture(scope="session")
def clutter_scenes():
    return {name: build_scene(load_scene(name))
            for name in ("clutter_a", "clutter_b", "clutter_c")}


@pytest.fixture(scope="session")
def default_proxy():
    return GripperProxy.default()
