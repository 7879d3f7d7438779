"""Benchmark harness: batch collision filter throughput and full-step latency.

Timings come from >= 50 repetitions after 5 warmups. The batch benchmark
compares worker counts and kernel backends (compiled vs numpy fallback);
the full-step benchmark measures one complete assistance step (raycast +
anchor + candidate filter + snap + selection) on a live simulation.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass

import numpy as np

from .config import EngineConfig
from .scene import (GripperProxy, SceneDescription, SceneModel,
                    batch_overlaps, build_scene)
from .se3 import Pose, Rotation, Twist, vec3
from .simulation import Simulation, StepInput

CSV_COLUMNS = ("candidates", "scene_triangles", "workers", "backend",
               "mean_ms", "p95_ms")


@dataclass(frozen=True)
class BenchRecord:
    candidates: int
    scene_triangles: int
    workers: int
    backend: str
    mean_ms: float
    p95_ms: float


def _candidate_poses(scene: SceneModel, count: int, seed: int = 7):
    """Deterministic workload: poses scattered over the workspace, half of
    them concentrated near block tops (the realistic hard case)."""
    rng = np.random.default_rng(seed)
    near = count // 2
    far = count - near
    ps_far = rng.uniform([-0.35, -0.3, 0.0], [0.35, 0.3, 0.3], (far, 3))
    blocks = scene.block_ids or ["table"]
    centers = np.array([scene.spec(b).pose.p for b in blocks])
    pick = rng.integers(0, len(centers), near)
    ps_near = centers[pick] + rng.uniform([-0.03, -0.03, 0.02], [0.03, 0.03, 0.12],
                                          (near, 3))
    ps = np.ascontiguousarray(np.concatenate([ps_far, ps_near]))
    qs = rng.normal(size=(count, 4))
    qs = np.ascontiguousarray(qs / np.linalg.norm(qs, axis=1, keepdims=True))
    return ps, qs


def _time_call(fn, reps: int, warmup: int) -> tuple[float, float]:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1000.0)
    arr = np.asarray(samples)
    return float(arr.mean()), float(np.percentile(arr, 95))


def bench_batch_overlaps(description: SceneDescription,
                         candidate_counts: list[int], worker_counts: list[int],
                         backends: list[str] = ("native",), reps: int = 50,
                         warmup: int = 5) -> list[BenchRecord]:
    scene = build_scene(description)
    proxy = description.gripper or GripperProxy.default()
    records = []
    for count in candidate_counts:
        poses = _candidate_poses(scene, count)
        for backend in backends:
            for workers in worker_counts:
                mean_ms, p95_ms = _time_call(
                    lambda: batch_overlaps(scene, proxy, poses, workers=workers,
                                           backend=backend),
                    reps, warmup)
                records.append(BenchRecord(count, scene.num_triangles, workers,
                                           backend, round(mean_ms, 4), round(p95_ms, 4)))
    return records


def bench_full_step(description: SceneDescription, config: EngineConfig | None = None,
                    mode: str = "explicit", reps: int = 50, warmup: int = 5
                    ) -> tuple[float, float]:
    """Mean/p95 latency (ms) of one full assistance step while pointing at
    a block (anchor + full candidate filter + snap + selection)."""
    cfg = config or EngineConfig()
    sim = Simulation(description, cfg, mode=mode)
    target = sim.scene.spec(sim.scene.block_ids[0])
    start = Pose(target.pose.p + vec3(0.0, 0.0, 0.25),
                 Rotation.from_matrix(np.array([[1.0, 0.0, 0.0],
                                                [0.0, -1.0, 0.0],
                                                [0.0, 0.0, -1.0]])))
    sim.input_pose = sim.goal_pose = sim.ee_pose = start
    idle = StepInput(twist=Twist.zero())
    sim.step(idle)
    assert sim.suggestion is not None, "bench fixture must produce a suggestion"
    return _time_call(lambda: sim.step(idle), reps, warmup)


def records_to_csv(records: list[BenchRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([r.candidates, r.scene_triangles, r.workers, r.backend,
                         f"{r.mean_ms:.4f}", f"{r.p95_ms:.4f}"])
    return buf.getvalue()


def format_table(records: list[BenchRecord]) -> str:
    header = f"{'candidates':>10} {'triangles':>9} {'workers':>7} {'backend':>8} " \
             f"{'mean_ms':>10} {'p95_ms':>10}"
    lines = [header, "-" * len(header)]
    for r in records:
        lines.append(f"{r.candidates:>10} {r.scene_triangles:>9} {r.workers:>7} "
                     f"{r.backend:>8} {r.mean_ms:>10.3f} {r.p95_ms:>10.3f}")
    return "\n".join(lines)
