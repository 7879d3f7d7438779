"""Engine configuration: one flat dataclass, JSON-loadable, strict keys."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass


@dataclass(frozen=True)
class EngineConfig:
    # candidate pattern (defaults give 7125 candidates)
    pattern_angular: int = 19
    pattern_rings: int = 5
    pattern_depths: int = 5
    pattern_rolls: int = 15
    pattern_diameter: float = 0.02
    pattern_thickness: float = 0.01
    place_pattern: bool = False  # placement uses the bare anchor by default

    # anchors and selection
    standoff: float = 0.085
    beta: float = 0.05
    reference: str = "rx"  # "rx" or "ry"
    squared_translation: bool = False
    collision_margin: float = 0.0
    place_contact_shrink: float = 0.002

    # snapping
    snap_enabled: bool = True
    snap_epsilon: float = 0.06
    snap_gamma: float = 0.03
    snap_place_yaws: int = 4

    # inference baseline
    imp_exposure_margin: float = 0.05
    imp_reset_timeout: float = 2.0

    # simulation loop
    dt: float = 1.0 / 60.0
    input_frame: str = "world"  # or "body"
    filter_tau: float = 0.1
    engage_pre_offset: float = 0.10
    engage_speed: float = 0.25
    engage_tolerance: float = 1e-4
    suggestion_change_threshold: float = 0.01

    # kinematic pick/place rules
    sweep_half_extents: tuple[float, float, float] = (0.02, 0.04, 0.025)
    sweep_center_z: float = 0.060
    place_max_gap: float = 0.005
    place_max_tilt_deg: float = 5.0
    place_min_overlap: float = 0.5

    # parallelism
    workers: int = 1

    def __post_init__(self):
        if self.reference not in ("rx", "ry"):
            raise ValueError(f"reference must be 'rx' or 'ry', got {self.reference!r}")
        if self.input_frame not in ("world", "body"):
            raise ValueError(f"input_frame must be 'world' or 'body', got {self.input_frame!r}")
        if self.dt <= 0.0 or self.beta <= 0.0 or self.standoff <= 0.0:
            raise ValueError("dt, beta and standoff must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "sweep_half_extents" in data:
            data = dict(data, sweep_half_extents=tuple(data["sweep_half_extents"]))
        return cls(**data)

    @classmethod
    def load(cls, path) -> "EngineConfig":
        with open(path) as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["sweep_half_extents"] = list(out["sweep_half_extents"])
        return out
