"""Hand orientation and gesture decoding from 21-point landmarks.

Landmark indexing follows the detector's output order: 0 = wrist,
5/9/13/17 = finger MCP row (index..little), 4/8/12/16/20 = fingertips.
Orientation is roll-only: the palm normal's in-plane angle maps to a
rotation about the robot x-axis.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .geometry import RollQuaternion

WRIST = 0
THUMB_IP, THUMB_TIP = 3, 4
INDEX_MCP = 5
LITTLE_MCP = 17
FINGER_TIPS = (8, 12, 16, 20)  # index, middle, ring, little
FINGER_PIPS = (6, 10, 14, 18)

# A finger counts as raised when its tip sits this much farther out than its
# PIP joint, in wrist-to-little-MCP units.
EXTENSION_MARGIN = 0.15

DEBOUNCE_FRAMES = 5


class DegenerateHand(ValueError):
    """Wrist and little-finger MCP coincide; normalization undefined."""


class DegeneratePalm(ValueError):
    """Wrist and the two MCP anchors are collinear; palm normal undefined."""


class GestureLabel(Enum):
    OPEN_PALM = "open_palm"
    CLOSED_FIST = "closed_fist"
    NEUTRAL = "neutral"


@dataclass(frozen=True)
class HandLandmarks:
    """21 ordered landmark positions, shape (21, 3)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (21, 3):
            raise ValueError(f"expected 21x3 landmarks, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("landmarks contain non-finite values")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @staticmethod
    def from_rows(rows) -> "HandLandmarks":
        return HandLandmarks(np.asarray(rows, dtype=np.float64))


@dataclass(frozen=True)
class PalmFrame:
    """Unit palm normal and its in-plane angle phi = atan2(n_y, n_x)."""

    normal: tuple[float, float, float]
    phi: float


@dataclass(frozen=True)
class GestureSignal:
    label: GestureLabel
    finger_count: int
    stable: bool


def normalize_hand(lm: HandLandmarks) -> HandLandmarks:
    """Translate the wrist to the origin and scale by 1/|wrist -> little MCP|."""
    pts = lm.points
    scale = float(np.linalg.norm(pts[LITTLE_MCP] - pts[WRIST]))
    if scale <= 1e-6:
        raise DegenerateHand(f"wrist to little-MCP distance {scale} too small")
    return HandLandmarks((pts - pts[WRIST]) / scale)


def palm_normal(lm: HandLandmarks) -> PalmFrame:
    """Palm normal from the wrist / index-MCP / little-MCP triangle."""
    pts = lm.points
    cross = np.cross(pts[LITTLE_MCP] - pts[WRIST], pts[INDEX_MCP] - pts[LITTLE_MCP])
    norm = float(np.linalg.norm(cross))
    if norm < 1e-9:
        raise DegeneratePalm("palm anchor landmarks are collinear")
    n = cross / norm
    return PalmFrame(normal=(float(n[0]), float(n[1]), float(n[2])), phi=math.atan2(n[1], n[0]))


def roll_quaternion(frame: PalmFrame) -> RollQuaternion:
    """Map the palm angle to a rotation about the robot x-axis."""
    return RollQuaternion.from_roll(frame.phi)


def count_fingers(lm: HandLandmarks) -> int:
    """Count raised fingers on normalized landmarks.

    Four fingers compare tip-vs-PIP distance from the wrist; the thumb
    extends laterally, so it compares tip-vs-IP distance from the
    little-finger MCP instead.
    """
    pts = normalize_hand(lm).points
    raised = 0
    wrist = pts[WRIST]
    for tip, pip in zip(FINGER_TIPS, FINGER_PIPS):
        if np.linalg.norm(pts[tip] - wrist) > np.linalg.norm(pts[pip] - wrist) + EXTENSION_MARGIN:
            raised += 1
    anchor = pts[LITTLE_MCP]
    if (
        np.linalg.norm(pts[THUMB_TIP] - anchor)
        > np.linalg.norm(pts[THUMB_IP] - anchor) + EXTENSION_MARGIN
    ):
        raised += 1
    return raised


def raw_gesture_label(finger_count: int) -> GestureLabel:
    if finger_count >= 4:
        return GestureLabel.OPEN_PALM
    if finger_count == 0:
        return GestureLabel.CLOSED_FIST
    return GestureLabel.NEUTRAL


class GestureClassifier:
    """Debounced gesture classification; one instance per operator stream.

    A label is stable only once the last DEBOUNCE_FRAMES raw labels agree,
    so a single-frame misclassification can never actuate the gripper.
    """

    def __init__(self, debounce: int = DEBOUNCE_FRAMES):
        self.debounce = debounce
        self._history: deque[GestureLabel] = deque(maxlen=debounce)

    def classify(self, lm: HandLandmarks) -> GestureSignal:
        count = count_fingers(lm)
        label = raw_gesture_label(count)
        self._history.append(label)
        stable = len(self._history) == self.debounce and len(set(self._history)) == 1
        return GestureSignal(label=label, finger_count=count, stable=stable)

    def reset(self) -> None:
        self._history.clear()


class OrientationHold:
    """Freeze the pre-grasp roll while a fist is being made.

    When a stable closed fist appears, the last quaternion seen before it
    is held for hold_ms so the grasp does not inherit the distorted palm
    geometry of a closing hand.
    """

    def __init__(self, hold_ms: float = 500.0):
        self.hold_ms = hold_ms
        self._live = RollQuaternion.identity()
        self._frozen: Optional[RollQuaternion] = None
        self._freeze_until_ms = -math.inf
        self._fist_active = False

    def update(
        self,
        quaternion: Optional[RollQuaternion],
        signal: Optional[GestureSignal],
        now_ms: float,
    ) -> RollQuaternion:
        fist = signal is not None and signal.stable and signal.label is GestureLabel.CLOSED_FIST
        if fist and not self._fist_active:
            self._frozen = self._live
            self._freeze_until_ms = now_ms + self.hold_ms
        self._fist_active = fist
        if quaternion is not None:
            self._live = quaternion
        if self._frozen is not None and now_ms < self._freeze_until_ms:
            return self._frozen
        return self._live


# Canonical synthetic hand: wrist at the origin, MCP row fanned out along +y,
# palm normal +z before the tilt/roll are applied. Scripted sessions and the
# test suite both build gesture fixtures from this skeleton.
_MCP = {5: (-0.50, 0.85, 0.0), 9: (-0.17, 0.90, 0.0), 13: (0.17, 0.90, 0.0), 17: (0.50, 0.85, 0.0)}
_THUMB_CMC = (-0.45, 0.25, 0.0)
_THUMB_MCP = (-0.60, 0.45, 0.0)
_THUMB_RAISED = {3: (-0.85, 0.55, 0.0), 4: (-1.35, 0.80, 0.0)}
_THUMB_CURLED = {3: (-0.35, 0.55, 0.10), 4: (-0.10, 0.60, 0.15)}


def synthetic_hand(
    raised=(True, True, True, True, True),
    roll: float = 0.0,
    tilt: float = 0.35,
    scale: float = 1.0,
    offset=(0.0, 0.0, 0.0),
) -> HandLandmarks:
    """Build a synthetic landmark set with the given fingers raised.

    ``raised`` orders (thumb, index, middle, ring, little). ``tilt`` leans
    the palm off the camera axis so the normal's in-plane angle is well
    defined; rotating by ``roll`` about the camera axis shifts that angle
    by exactly ``roll``.
    """
    pts = np.zeros((21, 3))
    pts[1] = _THUMB_CMC
    pts[2] = _THUMB_MCP
    thumb = _THUMB_RAISED if raised[0] else _THUMB_CURLED
    pts[3], pts[4] = thumb[3], thumb[4]

    for finger, (mcp_idx, up) in enumerate(zip((5, 9, 13, 17), raised[1:])):
        mcp = np.array(_MCP[mcp_idx])
        direction = np.array([mcp[0] * 0.2, 1.0, 0.0])
        direction /= np.linalg.norm(direction)
        pts[mcp_idx] = mcp
        if up:
            pts[mcp_idx + 1] = mcp + 0.30 * direction
            pts[mcp_idx + 2] = mcp + 0.55 * direction
            pts[mcp_idx + 3] = mcp + 0.80 * direction
        else:
            pts[mcp_idx + 1] = mcp + 0.10 * direction
            pts[mcp_idx + 2] = mcp + 0.02 * direction + np.array([0.0, -0.12, 0.15])
            pts[mcp_idx + 3] = mcp + np.array([0.0, -0.25, 0.20])

    ct, st = math.cos(tilt), math.sin(tilt)
    tilt_m = np.array([[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]])
    cr, sr = math.cos(roll), math.sin(roll)
    roll_m = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    pts = pts @ (roll_m @ tilt_m).T
    return HandLandmarks(pts * scale + np.asarray(offset, dtype=np.float64))


# Gesture fixtures by name, used by scripted synthetic sessions.
HAND_POSES = {
    "open": (True, True, True, True, True),
    "fist": (False, False, False, False, False),
    "one": (False, True, False, False, False),
    "two": (False, True, True, False, False),
    "three": (False, True, True, True, False),
}
