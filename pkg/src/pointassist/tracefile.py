"""Versioned newline-delimited JSON files: input traces and event logs.

Both formats start with a header line carrying the format name and
version; every following line is one record. Serialization is canonical
(sorted keys, compact separators) so identical runs produce identical
bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .se3 import Twist
from .simulation import Event, StepInput

TRACE_FORMAT = "pointassist-trace"
EVENTS_FORMAT = "pointassist-events"
FORMAT_VERSION = 1


class TraceError(ValueError):
    """Malformed trace or event file; message carries file:line."""


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class TraceRecord:
    t: float
    twist: tuple[float, ...]
    engage: bool = False
    gripper: bool = False
    mode: str | None = None

    def to_step_input(self) -> StepInput:
        return StepInput(twist=Twist.from_array(list(self.twist)),
                         engage=self.engage, gripper=self.gripper, mode=self.mode)

    def to_dict(self) -> dict:
        buttons: dict = {"engage": self.engage, "gripper": self.gripper}
        if self.mode is not None:
            buttons["mode"] = self.mode
        return {"t": self.t, "twist": list(self.twist), "buttons": buttons}

    @classmethod
    def from_dict(cls, data: dict) -> "TraceRecord":
        twist = data["twist"]
        if not isinstance(twist, list) or len(twist) != 6:
            raise ValueError("twist must be a list of 6 numbers")
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in twist):
            raise ValueError("twist components must be finite numbers")
        buttons = data.get("buttons", {})
        return cls(t=float(data["t"]), twist=tuple(float(v) for v in twist),
                   engage=bool(buttons.get("engage", False)),
                   gripper=bool(buttons.get("gripper", False)),
                   mode=buttons.get("mode"))


def _header(kind: str) -> str:
    return _dumps({"format": kind, "version": FORMAT_VERSION})


def _check_header(line: str, kind: str, path, lineno: int) -> None:
    try:
        head = json.loads(line)
    except json.JSONDecodeError as e:
        raise TraceError(f"{path}:{lineno}: invalid JSON header: {e.msg}") from None
    if head.get("format") != kind:
        raise TraceError(f"{path}:{lineno}: expected format {kind!r}, "
                         f"got {head.get('format')!r}")
    if head.get("version") != FORMAT_VERSION:
        raise TraceError(f"{path}:{lineno}: unsupported version {head.get('version')!r}")


def write_trace(path, records: list[TraceRecord]) -> None:
    with open(path, "w") as f:
        f.write(_header(TRACE_FORMAT) + "\n")
        for r in records:
            f.write(_dumps(r.to_dict()) + "\n")


def read_trace(path) -> list[TraceRecord]:
    records: list[TraceRecord] = []
    last_t = -math.inf
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if lineno == 1:
                _check_header(line, TRACE_FORMAT, path, lineno)
                continue
            try:
                rec = TraceRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise TraceError(f"{path}:{lineno}: bad trace record: {e}") from None
            if rec.t < last_t:
                raise TraceError(f"{path}:{lineno}: timestamps must not decrease")
            last_t = rec.t
            records.append(rec)
    return records


def events_to_lines(events: list[Event]) -> list[str]:
    return [_header(EVENTS_FORMAT)] + [_dumps(e.to_dict()) for e in events]


def events_to_bytes(events: list[Event]) -> bytes:
    return ("\n".join(events_to_lines(events)) + "\n").encode()


def write_events(path, events: list[Event]) -> None:
    with open(path, "wb") as f:
        f.write(events_to_bytes(events))


def read_events(path) -> list[dict]:
    out = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if lineno == 1:
                _check_header(line, EVENTS_FORMAT, path, lineno)
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise TraceError(f"{path}:{lineno}: bad event record: {e.msg}") from None
    return out


def summarize_events(events: list[Event]) -> dict:
    """Replay metrics: outcome counts, engage durations, suggestion churn."""
    counts: dict[str, int] = {}
    engage_starts: list[float] = []
    durations: list[float] = []
    for e in events:
        counts[e.kind] = counts.get(e.kind, 0) + 1
        if e.kind == "engage_start":
            engage_starts.append(e.t)
        elif e.kind == "engage_end" and engage_starts:
            durations.append(round(e.t - engage_starts.pop(), 9))
    return {
        "pick_success": counts.get("pick_success", 0),
        "pick_fail": counts.get("pick_fail", 0),
        "place_success": counts.get("place_success", 0),
        "place_fail": counts.get("place_fail", 0),
        "drop": counts.get("drop", 0),
        "snap_fired": counts.get("snap_fired", 0),
        "suggestion_changes": counts.get("suggestion_changed", 0),
        "engagements": counts.get("engage_start", 0),
        "engage_durations": durations,
    }
