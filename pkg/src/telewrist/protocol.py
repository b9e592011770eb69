"""Wire schema for the streaming gateway.

Every message is a single JSON object carrying a ``type`` tag and a ``v``
schema version. The exact field tables live in ``protocol/PROTOCOL.md`` at
the repository root; golden example messages are committed under
``protocol/fixtures/`` and are shared with the browser console's test
suite.

Message types:
  client -> server: ``hello``, ``frame``, ``reset``, ``estop``
  server -> client: ``welcome``, ``error``, ``state``
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Optional

PROTOCOL_VERSION = 1


class MalformedMessage(ValueError):
    """Message is not valid JSON or violates the schema."""


class ProtocolVersionMismatch(ValueError):
    """Message carries a schema version this server does not speak."""


@dataclass(frozen=True)
class WristObservation:
    """Wrist pixel + raw depth reading with its surrounding depth window (mm)."""

    u: float
    v: float
    depth_mm: float
    window: tuple[float, ...] = ()

    def effective_window(self) -> tuple[float, ...]:
        return self.window if self.window else (self.depth_mm,)


@dataclass(frozen=True)
class MarkerDetection:
    """Fiducial marker pose as reported by the upstream detector (camera frame)."""

    rotation: tuple[tuple[float, float, float], ...]
    translation: tuple[float, float, float]


@dataclass(frozen=True)
class LandmarkFrame:
    """One timestamped observation from a client.

    At least one of wrist / hand / marker must be present. ``hand`` is the
    21-point landmark set in detector order (0 = wrist, 5 = index MCP,
    17 = little MCP).
    """

    t_ms: float
    wrist: Optional[WristObservation] = None
    hand: Optional[tuple[tuple[float, float, float], ...]] = None
    marker: Optional[MarkerDetection] = None

    def __post_init__(self):
        if self.wrist is None and self.hand is None and self.marker is None:
            raise ValueError("frame must carry at least one of wrist/hand/marker")
        if self.hand is not None and len(self.hand) != 21:
            raise ValueError(f"hand must have 21 landmarks, got {len(self.hand)}")


def _vec3(value, what: str) -> tuple[float, float, float]:
    try:
        x, y, z = value
        return (float(x), float(y), float(z))
    except (TypeError, ValueError) as exc:
        raise MalformedMessage(f"{what} must be a 3-vector, got {value!r}") from exc


def frame_to_dict(frame: LandmarkFrame) -> dict:
    d: dict[str, Any] = {"t_ms": frame.t_ms}
    if frame.wrist is not None:
        d["wrist"] = {
            "u": frame.wrist.u,
            "v": frame.wrist.v,
            "depth_mm": frame.wrist.depth_mm,
            "window": list(frame.wrist.window),
        }
    if frame.hand is not None:
        d["hand"] = [list(p) for p in frame.hand]
    if frame.marker is not None:
        d["marker"] = {
            "rotation": [list(row) for row in frame.marker.rotation],
            "translation": list(frame.marker.translation),
        }
    return d


def frame_from_dict(d: dict) -> LandmarkFrame:
    if "t_ms" not in d:
        raise MalformedMessage("frame missing t_ms")
    wrist = None
    if d.get("wrist") is not None:
        w = d["wrist"]
        try:
            wrist = WristObservation(
                u=float(w["u"]),
                v=float(w["v"]),
                depth_mm=float(w["depth_mm"]),
                window=tuple(float(x) for x in w.get("window", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedMessage(f"bad wrist observation: {exc}") from exc
    hand = None
    if d.get("hand") is not None:
        pts = d["hand"]
        if not isinstance(pts, list) or len(pts) != 21:
            raise MalformedMessage("hand must be a list of 21 landmarks")
        hand = tuple(_vec3(p, "hand landmark") for p in pts)
    marker = None
    if d.get("marker") is not None:
        m = d["marker"]
        try:
            rot = tuple(_vec3(row, "marker rotation row") for row in m["rotation"])
            if len(rot) != 3:
                raise MalformedMessage("marker rotation must be 3x3")
            marker = MarkerDetection(rotation=rot, translation=_vec3(m["translation"], "marker translation"))
        except KeyError as exc:
            raise MalformedMessage(f"bad marker detection: missing {exc}") from exc
    try:
        return LandmarkFrame(t_ms=float(d["t_ms"]), wrist=wrist, hand=hand, marker=marker)
    except (TypeError, ValueError) as exc:
        raise MalformedMessage(str(exc)) from exc


@dataclass(frozen=True)
class Hello:
    role: str  # "operator" | "observer"


@dataclass(frozen=True)
class Welcome:
    role: str
    server: str = "telewrist"


@dataclass(frozen=True)
class ErrorReply:
    message: str


@dataclass(frozen=True)
class Reset:
    pass


@dataclass(frozen=True)
class Estop:
    pass


@dataclass(frozen=True)
class StateBroadcast:
    """Snapshot of pipeline + simulator state pushed to every client.

    arm carries joint_origins (the world positions of the link endpoints)
    so clients can render the arm without knowing the kinematic model;
    obstacles and zones are static scene geometry repeated per broadcast
    for stateless consumers.
    """

    t_ms: float
    mode: str
    gesture: Optional[dict] = None          # {label, finger_count, stable}
    wrist: Optional[dict] = None            # {marker, robot, fresh, velocity_mps}
    arm: Optional[dict] = None              # {q, ee_position, ee_roll_quaternion,
                                            #  joint_origins, gripper, held_object, safety}
    objects: tuple = ()
    obstacles: tuple = ()
    zones: tuple = ()
    last_command: Optional[dict] = None

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "zones", tuple(self.zones))


Message = Any  # one of the dataclasses above or LandmarkFrame


def encode_message(msg: Message) -> str:
    """Serialize a message dataclass to its JSON wire form."""
    if isinstance(msg, LandmarkFrame):
        body = frame_to_dict(msg)
        mtype = "frame"
    elif isinstance(msg, Hello):
        body = {"role": msg.role}
        mtype = "hello"
    elif isinstance(msg, Welcome):
        body = {"role": msg.role, "server": msg.server}
        mtype = "welcome"
    elif isinstance(msg, ErrorReply):
        body = {"message": msg.message}
        mtype = "error"
    elif isinstance(msg, Reset):
        body = {}
        mtype = "reset"
    elif isinstance(msg, Estop):
        body = {}
        mtype = "estop"
    elif isinstance(msg, StateBroadcast):
        body = {
            "t_ms": msg.t_ms,
            "mode": msg.mode,
            "gesture": msg.gesture,
            "wrist": msg.wrist,
            "arm": msg.arm,
            "objects": list(msg.objects),
            "obstacles": list(msg.obstacles),
            "zones": list(msg.zones),
            "last_command": msg.last_command,
        }
        mtype = "state"
    else:
        raise TypeError(f"cannot encode {type(msg).__name__}")
    body["type"] = mtype
    body["v"] = PROTOCOL_VERSION
    return json.dumps(body, sort_keys=True)


def decode_message(text: str) -> Message:
    """Parse one wire message, raising MalformedMessage / ProtocolVersionMismatch."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedMessage(f"not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise MalformedMessage("message must be a JSON object")
    version = d.get("v")
    if version != PROTOCOL_VERSION:
        raise ProtocolVersionMismatch(
            f"protocol version {version!r} not supported (server speaks {PROTOCOL_VERSION})"
        )
    mtype = d.get("type")
    if mtype == "frame":
        return frame_from_dict(d)
    if mtype == "hello":
        role = d.get("role")
        if role not in ("operator", "observer"):
            raise MalformedMessage(f"hello role must be operator/observer, got {role!r}")
        return Hello(role=role)
    if mtype == "welcome":
        return Welcome(role=str(d.get("role", "")), server=str(d.get("server", "telewrist")))
    if mtype == "error":
        return ErrorReply(message=str(d.get("message", "")))
    if mtype == "reset":
        return Reset()
    if mtype == "estop":
        return Estop()
    if mtype == "state":
        try:
            return StateBroadcast(
                t_ms=float(d["t_ms"]),
                mode=str(d["mode"]),
                gesture=d.get("gesture"),
                wrist=d.get("wrist"),
                arm=d.get("arm"),
                objects=tuple(d.get("objects", ())),
                obstacles=tuple(d.get("obstacles", ())),
                zones=tuple(d.get("zones", ())),
                last_command=d.get("last_command"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedMessage(f"bad state broadcast: {exc}") from exc
    raise MalformedMessage(f"unknown message type {mtype!r}")
