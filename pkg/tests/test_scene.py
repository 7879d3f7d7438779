import numpy as np
import pytest

from conftest import (DOWN_ROT, down_pose, one_block_description,
                      table_only_description)
from oracles import brute_force_raycast, obb_overlaps_scene, random_pose
from pointassist.scene import (GripperProxy, SceneDescription, SceneError,
                               batch_overlaps, build_scene, bundled_scene_names,
                               load_scene, overlaps, raycast)
from pointassist.se3 import Pose, Rotation, vec3


class TestBuildScene:
    def test_one_block_plus_table_triangle_count(self):
        m = build_scene(one_block_description())
        assert m.num_triangles == 24  # 12 per box

    def test_table_only_still_raycastable(self):
        m = build_scene(table_only_description())
        hit = raycast(m, vec3(0.1, -0.2, 0.5), vec3(0, 0, -1))
        assert hit is not None and hit.object_id == "table"

    def test_duplicate_ids_rejected(self):
        data = one_block_description().to_dict()
        data["blocks"].append(dict(data["blocks"][0]))
        with pytest.raises(SceneError, match="duplicate"):
            SceneDescription.from_dict(data)

    def test_non_positive_size_rejected(self):
        data = one_block_description().to_dict()
        data["blocks"][0]["size"] = [0.04, 0.0, 0.04]
        with pytest.raises(SceneError, match="non-positive"):
            SceneDescription.from_dict(data)

    def test_bundled_scenes_exist(self):
        assert bundled_scene_names() == ["clutter_a", "clutter_b", "clutter_c"]
        for name in bundled_scene_names():
            desc = load_scene(name)
            assert len(desc.blocks) == 9
            assert all(tuple(b.size) == (0.04, 0.04, 0.04) for b in desc.blocks)

    def test_build_determinism_bytes(self, clutter_scenes):
        for name in ("clutter_a", "clutter_b", "clutter_c"):
            again = build_scene(load_scene(name))
            assert clutter_scenes[name].bvh.to_bytes() == again.bvh.to_bytes()
            np.testing.assert_array_equal(clutter_scenes[name].vertices, again.vertices)

    def test_face_normals_unit_and_outward(self):
        m = build_scene(one_block_description())
        np.testing.assert_allclose(np.linalg.norm(m.face_normals, axis=1), 1.0,
                                   atol=1e-12)
        # outward: normal points away from the owning box center
        for face in range(m.num_triangles):
            spec = (m.description.table, *m.description.blocks)[m.face_object[face]]
            centroid = (m.tv0[face] + m.tv1[face] + m.tv2[face]) / 3.0
            assert float(m.face_normals[face] @ (centroid - spec.pose.p)) > 0


class TestRaycast:
    def test_table_hit_trivial(self):
        m = build_scene(table_only_description())
        hit = raycast(m, vec3(0, 0, 1), vec3(0, 0, -1))
        np.testing.assert_allclose(hit.point, [0, 0, 0], atol=1e-12)
        np.testing.assert_allclose(hit.normal, [0, 0, 1], atol=1e-12)
        assert hit.distance == pytest.approx(1.0, abs=1e-12)

    def test_miss_upward(self):
        m = build_scene(one_block_description())
        assert raycast(m, vec3(0, 0, 1), vec3(0, 0, 1)) is None

    def test_exclude_object(self):
        m = build_scene(one_block_description())
        hit = raycast(m, vec3(0, 0, 0.3), vec3(0, 0, -1), exclude="cube")
        assert hit.object_id == "table"
        assert hit.distance == pytest.approx(0.3, abs=1e-12)

    def test_normal_faces_origin(self, clutter_scenes):
        rng = np.random.default_rng(21)
        m = clutter_scenes["clutter_b"]
        for _ in range(2000):
            origin = rng.uniform([-0.5, -0.4, 0.02], [0.5, 0.4, 0.5])
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            hit = raycast(m, origin, d)
            if hit is not None:
                assert float(hit.normal @ d) < 0
                np.testing.assert_allclose(hit.point, origin + hit.distance * d,
                                           atol=1e-9)

    def test_oblique_ray_matches_bruteforce(self):
        m = build_scene(one_block_description())
        origin = vec3(0.2, -0.15, 0.2)
        d = vec3(-0.2, 0.15, -0.18) - origin
        d /= np.linalg.norm(d)
        face, t = brute_force_raycast(m.vertices, m.triangles, origin, d)
        hit = raycast(m, origin, d)
        assert hit is not None and face >= 0
        assert hit.face == face
        assert hit.distance == pytest.approx(t, abs=1e-9)

    @pytest.mark.parametrize("backend", ["native", "python"])
    def test_bvh_equals_bruteforce_random(self, clutter_scenes, backend):
        rng = np.random.default_rng(33)
        m = clutter_scenes["clutter_a"]
        misses = 0
        for _ in range(2000):
            origin = rng.uniform([-0.7, -0.5, -0.1], [0.7, 0.5, 0.6])
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            face, t = brute_force_raycast(m.vertices, m.triangles, origin, d)
            hit = raycast(m, origin, d, backend=backend)
            if face < 0:
                misses += 1
                assert hit is None
            else:
                assert hit is not None
                assert hit.face == face
                assert hit.distance == pytest.approx(t, abs=1e-9)
        assert misses < 2000  # sanity: the sweep actually hits things


class TestOverlaps:
    def test_free_pose_above_table(self, default_proxy):
        m = build_scene(table_only_description())
        assert overlaps(m, default_proxy, down_pose(0, 0, 0.5)) is False

    def test_palm_inside_block(self, default_proxy):
        m = build_scene(one_block_description())
        # ee origin inside the cube puts the palm box in collision
        assert overlaps(m, default_proxy, down_pose(0, 0, 0.02)) is True

    def test_grazing_pose_matches_sat_oracle(self, default_proxy):
        m = build_scene(one_block_description())
        # finger inner face 1 mm clear of the cube side vs 1 mm into it
        for ee_y, expected in ((0.066, False), (0.064, True)):
            pose = down_pose(0.0, ee_y, 0.095)
            got = overlaps(m, default_proxy, pose)
            oracle = obb_overlaps_scene(m, default_proxy, pose)
            assert got == oracle == expected

    def test_randomized_overlaps_match_oracle(self, default_proxy, clutter_scenes):
        rng = np.random.default_rng(60)
        m = clutter_scenes["clutter_c"]
        agree_hits = 0
        for _ in range(300):
            pose = Pose(rng.uniform([-0.25, -0.25, 0.0], [0.25, 0.25, 0.25]),
                        random_pose(rng).r)
            got = overlaps(m, default_proxy, pose)
            assert got == obb_overlaps_scene(m, default_proxy, pose)
            agree_hits += got
        assert 0 < agree_hits < 300

    def test_exclude_held_object(self, default_proxy):
        m = build_scene(one_block_description())
        # one finger penetrates the cube; nothing else is touched
        pose = down_pose(0.0, -0.02, 0.1)
        assert overlaps(m, default_proxy, pose) is True
        assert overlaps(m, default_proxy, pose, exclude="cube") is False

    def test_margin_inflates(self, default_proxy):
        m = build_scene(one_block_description())
        # finger 1.5 mm clear of the cube side; a 5 mm margin reaches it
        pose = down_pose(0.0, 0.0665, 0.095)
        assert overlaps(m, default_proxy, pose) is False
        assert overlaps(m, default_proxy, pose, margin=0.005) is True


class TestBatchOverlaps:
    def _poses(self, n, seed=42):
        rng = np.random.default_rng(seed)
        ps = rng.uniform([-0.3, -0.3, 0.0], [0.3, 0.3, 0.3], (n, 3))
        qs = rng.normal(size=(n, 4))
        qs /= np.linalg.norm(qs, axis=1, keepdims=True)
        return np.ascontiguousarray(ps), np.ascontiguousarray(qs)

    def test_empty_list(self, default_proxy, clutter_scenes):
        out = batch_overlaps(clutter_scenes["clutter_a"], default_proxy, [])
        assert out.shape == (0,)

    def test_all_far_above_scene(self, default_proxy, clutter_scenes):
        poses = [down_pose(x / 10.0, 0.0, 1.5) for x in range(-3, 4)]
        out = batch_overlaps(clutter_scenes["clutter_a"], default_proxy, poses)
        assert not out.any()

    @pytest.mark.parametrize("backend", ["native", "python"])
    def test_equals_sequential_map_bit_exact(self, default_proxy, clutter_scenes,
                                             backend):
        m = clutter_scenes["clutter_b"]
        ps, qs = self._poses(500)
        sequential = np.array([
            overlaps(m, default_proxy, Pose(ps[i], Rotation.from_quat(qs[i])),
                     backend=backend)
            for i in range(ps.shape[0])])
        for workers in (1, 2, 8):
            got = batch_overlaps(m, default_proxy, (ps, qs), workers=workers,
                                 backend=backend)
            np.testing.assert_array_equal(got, sequential)

    def test_native_matches_python_backend(self, default_proxy, clutter_scenes):
        m = clutter_scenes["clutter_c"]
        ps, qs = self._poses(800, seed=77)
        a = batch_overlaps(m, default_proxy, (ps, qs), backend="native", workers=2)
        b = batch_overlaps(m, default_proxy, (ps, qs), backend="python", workers=2)
        np.testing.assert_array_equal(a, b)

    def test_seven_thousand_pose_batch(self, default_proxy, clutter_scenes):
        m = clutter_scenes["clutter_a"]
        ps, qs = self._poses(7125, seed=5)
        flags = batch_overlaps(m, default_proxy, (ps, qs), workers=2)
        assert flags.shape == (7125,)
        assert flags.dtype == bool
