"""Deterministic session wrapper speaking the wire protocol.

A Session owns one Simulation and translates protocol messages to engine
calls: the latest input message is held and applied at every fixed step
(zero-order hold), events buffer until the next state message is built,
and every applied step input is recorded so a live session can be replayed
exactly. The server adds pacing and sockets on top; tests drive sessions
in lockstep.
"""

from __future__ import annotations

import math

from .config import EngineConfig
from .scene import SceneDescription, load_scene
from .se3 import Twist
from .simulation import MODES, Event, Simulation, StepInput
from .tracefile import TraceRecord

PROTOCOL_VERSION = 1
MAX_MESSAGE_BYTES = 64 * 1024

CLOSE_BAD_JSON = 4400
CLOSE_BAD_MESSAGE = 4401
CLOSE_BUSY = 4409
CLOSE_TOO_LARGE = 4413


class ProtocolError(Exception):
    def __init__(self, code: int, reason: str):
        super().__init__(reason)
        self.code = code
        self.reason = reason


class Session:
    def __init__(self, description: SceneDescription, config: EngineConfig | None = None,
                 mode: str = "none"):
        self.config = config or EngineConfig()
        self.description = description
        self.initial_mode = mode
        self.sim = Simulation(description, self.config, mode=mode)
        self._twist = Twist.zero()
        self._engage = False
        self._gripper = False
        self._pending_mode: str | None = None
        self._event_buffer: list[Event] = []
        self.recorded: list[TraceRecord] = []

    # -- protocol ------------------------------------------------------

    def handle_message(self, msg: dict) -> None:
        """Apply one client message; unknown fields are ignored, unknown
        types and malformed payloads raise ProtocolError."""
        if not isinstance(msg, dict):
            raise ProtocolError(CLOSE_BAD_MESSAGE, "message must be an object")
        mtype = msg.get("type")
        if mtype == "input":
            twist = msg.get("twist", [0.0] * 6)
            if (not isinstance(twist, list) or len(twist) != 6
                    or not all(isinstance(v, (int, float)) and math.isfinite(v)
                               for v in twist)):
                raise ProtocolError(CLOSE_BAD_MESSAGE, "input.twist must be 6 finite numbers")
            buttons = msg.get("buttons", {})
            if not isinstance(buttons, dict):
                raise ProtocolError(CLOSE_BAD_MESSAGE, "input.buttons must be an object")
            self._twist = Twist.from_array([float(v) for v in twist])
            self._engage = bool(buttons.get("engage", False))
            self._gripper = bool(buttons.get("gripper", False))
        elif mtype == "set_mode":
            mode = msg.get("mode")
            if mode not in MODES:
                raise ProtocolError(CLOSE_BAD_MESSAGE, f"unknown mode {mode!r}")
            self._pending_mode = mode
        elif mtype == "load_scene":
            if "name" in msg:
                desc = load_scene(str(msg["name"]))
            elif "scene" in msg and isinstance(msg["scene"], dict):
                desc = SceneDescription.from_dict(msg["scene"])
            else:
                raise ProtocolError(CLOSE_BAD_MESSAGE,
                                    "load_scene needs 'name' or inline 'scene'")
            self.description = desc
            self.reset()
        elif mtype == "reset":
            self.reset()
        else:
            raise ProtocolError(CLOSE_BAD_MESSAGE, f"unknown message type {mtype!r}")

    def reset(self) -> None:
        self.sim = Simulation(self.description, self.config, mode=self.initial_mode)
        self._twist = Twist.zero()
        self._engage = False
        self._gripper = False
        self._pending_mode = None
        self._event_buffer.clear()
        self.recorded.clear()

    # -- stepping ------------------------------------------------------

    def step(self, n: int = 1) -> None:
        """Advance n fixed steps using the held input (latest wins)."""
        for _ in range(n):
            inp = StepInput(twist=self._twist, engage=self._engage,
                            gripper=self._gripper, mode=self._pending_mode)
            self._pending_mode = None
            self.recorded.append(TraceRecord(
                t=round(self.sim.time + self.config.dt, 9),
                twist=tuple(float(v) for v in (*inp.twist.linear, *inp.twist.angular)),
                engage=inp.engage, gripper=inp.gripper, mode=inp.mode))
            self._event_buffer.extend(self.sim.step(inp))

    def state_message(self) -> dict:
        """Current state plus all events since the last state message.

        Events buffer until drained here, so skipped frames never lose
        event records.
        """
        msg = {"type": "state", "v": PROTOCOL_VERSION}
        msg.update(self.sim.state_dict())
        msg["events"] = [e.to_dict() for e in self._event_buffer]
        self._event_buffer.clear()
        return msg

    def lockstep(self, messages: list[dict]) -> list[dict]:
        """Apply each message, step once, and collect the state message —
        the deterministic harness used by the wire tests."""
        out = []
        for msg in messages:
            self.handle_message(msg)
            self.step(1)
            out.append(self.state_message())
        return out
