"""Shared-control state machine.

Mode is chosen once per session segment by a held finger count (1 = manual,
2 = semi-autonomous) and left only via an explicit reset or estop, never a
gesture. Manual mode streams end-effector poses at the command rate with
latest-sample-wins downsampling; gripper and grasp actions are
edge-triggered from debounced gestures. The semi-autonomous grasp runs
through an armed -> executing -> holding lifecycle; a stable neutral
gesture during execution aborts, and the holding sub-state re-enables pose
streaming so the operator can carry the object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

from .geometry import Point3, RollQuaternion, apply_transform
from .handpose import GestureLabel, GestureSignal
from .tracking import CalibrationState, NotCalibrated, TrackedWrist

MODE_HOLD_MS = 1000.0


class StaleInput(RuntimeError):
    """A pose command was requested from a non-fresh wrist sample."""


class InvalidEvent(RuntimeError):
    """Grasp lifecycle event inconsistent with the current sub-state."""


class NoTarget(RuntimeError):
    """No eligible object for a grasp."""


class ControlMode(Enum):
    IDLE = "idle"
    MANUAL = "manual"
    SEMI_AUTONOMOUS = "semi_autonomous"


class CommandKind(Enum):
    MOVE_EE = "move_ee"
    GRIPPER_OPEN = "gripper_open"
    GRIPPER_CLOSE = "gripper_close"
    GRASP_OBJECT = "grasp_object"
    RELEASE_OBJECT = "release_object"
    HOLD = "hold"


@dataclass(frozen=True)
class TargetPose:
    """Desired end-effector pose in the robot frame."""

    position_robot: Point3
    orientation: RollQuaternion


@dataclass(frozen=True)
class RobotCommand:
    kind: CommandKind
    issued_at_ms: float
    target_pose: Optional[TargetPose] = None
    object_id: Optional[str] = None

    def __post_init__(self):
        if (self.kind is CommandKind.MOVE_EE) != (self.target_pose is not None):
            raise ValueError(f"target_pose populated iff kind is move_ee, got {self.kind}")
        if (self.kind is CommandKind.GRASP_OBJECT) != (self.object_id is not None):
            raise ValueError(f"object_id populated iff kind is grasp_object, got {self.kind}")


def mode_select(signal: GestureSignal, held_ms: float, mode: ControlMode) -> ControlMode:
    """Mode entry rule: a stable finger count held for MODE_HOLD_MS.

    Only meaningful from idle; any other mode is returned unchanged (exit
    is by explicit reset).
    """
    if mode is not ControlMode.IDLE:
        return mode
    if not signal.stable or held_ms < MODE_HOLD_MS:
        return ControlMode.IDLE
    if signal.finger_count == 1:
        return ControlMode.MANUAL
    if signal.finger_count == 2:
        return ControlMode.SEMI_AUTONOMOUS
    return ControlMode.IDLE


def map_target(wrist: TrackedWrist, q: RollQuaternion, calib: CalibrationState) -> TargetPose:
    """Map a fresh tracked wrist into the robot frame with the given roll."""
    if not calib.locked:
        raise NotCalibrated("cannot map targets before calibration locks")
    if not wrist.fresh:
        raise StaleInput("tracked wrist is stale; command loop should hold")
    return TargetPose(
        position_robot=apply_transform(calib.robot_from_marker, wrist.position_marker),
        orientation=q,
    )


def decide_command(
    mode: ControlMode, label: GestureLabel, stable: bool, fresh: bool
) -> CommandKind:
    """Total decision table over (mode, gesture, freshness).

    Unstable gestures act as neutral. Edge-triggering and the semi-autonomous
    sub-state overrides are applied on top of this table by SharedController.
    """
    if mode is ControlMode.IDLE:
        return CommandKind.HOLD
    effective = label if stable else GestureLabel.NEUTRAL
    if mode is ControlMode.MANUAL:
        if effective is GestureLabel.OPEN_PALM:
            return CommandKind.GRIPPER_OPEN
        if effective is GestureLabel.CLOSED_FIST:
            return CommandKind.GRIPPER_CLOSE
        return CommandKind.MOVE_EE if fresh else CommandKind.HOLD
    # semi-autonomous
    if effective is GestureLabel.CLOSED_FIST:
        return CommandKind.GRASP_OBJECT
    if effective is GestureLabel.OPEN_PALM:
        return CommandKind.RELEASE_OBJECT
    return CommandKind.HOLD


class GraspEvent(Enum):
    GRASP_STARTED = "grasp_started"
    GRASP_SUCCEEDED = "grasp_succeeded"
    GRASP_FAILED = "grasp_failed"
    RELEASED = "released"


class GraspSubState(Enum):
    ARMED = "armed"
    EXECUTING = "executing"
    HOLDING = "holding"


class GraspLifecycle:
    """Sub-state machine of the semi-autonomous mode."""

    _TRANSITIONS = {
        (GraspSubState.ARMED, GraspEvent.GRASP_STARTED): GraspSubState.EXECUTING,
        (GraspSubState.EXECUTING, GraspEvent.GRASP_SUCCEEDED): GraspSubState.HOLDING,
        (GraspSubState.EXECUTING, GraspEvent.GRASP_FAILED): GraspSubState.ARMED,
        (GraspSubState.HOLDING, GraspEvent.RELEASED): GraspSubState.ARMED,
    }

    def __init__(self):
        self.state = GraspSubState.ARMED

    def apply(self, event: GraspEvent) -> GraspSubState:
        key = (self.state, event)
        if key not in self._TRANSITIONS:
            raise InvalidEvent(f"event {event.value} invalid in sub-state {self.state.value}")
        self.state = self._TRANSITIONS[key]
        return self.state

    def reset(self) -> None:
        self.state = GraspSubState.ARMED


class SharedController:
    """Serialized owner of mode, gesture edges and the grasp lifecycle.

    Perception updates arrive at the camera rate via update_perception;
    tick() runs at the command rate and emits at most one command. Gesture
    commands fire once per stable-label change; a flickering (unstable)
    gesture neither fires nor re-arms.
    """

    def __init__(
        self,
        select_object_fn: Optional[Callable[[], str]] = None,
        target_max_age_ms: float = 300.0,
        gesture_max_age_ms: float = 400.0,
        mode_hold_ms: float = MODE_HOLD_MS,
    ):
        self.select_object_fn = select_object_fn
        self.target_max_age_ms = target_max_age_ms
        self.gesture_max_age_ms = gesture_max_age_ms
        self.mode_hold_ms = mode_hold_ms

        self.mode = ControlMode.IDLE
        self.lifecycle = GraspLifecycle()
        self.abort_requested = False

        self._latest_target: Optional[TargetPose] = None
        self._target_t_ms = -math.inf
        self._latest_signal: Optional[GestureSignal] = None
        self._signal_t_ms = -math.inf
        self._hold_count: Optional[int] = None
        self._hold_since_ms = 0.0
        self._actuated_label: Optional[GestureLabel] = None

    # -- perception input (camera rate) ------------------------------------

    def update_perception(
        self,
        now_ms: float,
        wrist: Optional[TrackedWrist] = None,
        gesture: Optional[GestureSignal] = None,
        orientation: Optional[RollQuaternion] = None,
        calib: Optional[CalibrationState] = None,
    ) -> None:
        if gesture is not None:
            self._observe_gesture(gesture, now_ms)
        if wrist is not None and wrist.fresh and calib is not None and calib.locked:
            q = orientation if orientation is not None else RollQuaternion.identity()
            self._latest_target = map_target(wrist, q, calib)
            self._target_t_ms = now_ms

    def _observe_gesture(self, signal: GestureSignal, now_ms: float) -> None:
        # Gaps in the gesture stream reset the mode-selection hold timer.
        if now_ms - self._signal_t_ms > self.gesture_max_age_ms:
            self._hold_count = None
        self._latest_signal = signal
        self._signal_t_ms = now_ms

        if self.mode is ControlMode.IDLE:
            if signal.stable:
                if self._hold_count != signal.finger_count:
                    self._hold_count = signal.finger_count
                    self._hold_since_ms = now_ms
                held = now_ms - self._hold_since_ms
                self.mode = mode_select(signal, held, self.mode)
            else:
                self._hold_count = None
        elif (
            self.mode is ControlMode.SEMI_AUTONOMOUS
            and self.lifecycle.state is GraspSubState.EXECUTING
            and signal.stable
            and signal.label is GestureLabel.NEUTRAL
        ):
            # Operator intervention: any stable neutral gesture aborts the routine.
            self.abort_requested = True

    # -- command output (5 Hz) ----------------------------------------------

    def _current_gesture(self, now_ms: float) -> tuple[GestureLabel, bool]:
        if (
            self._latest_signal is None
            or now_ms - self._signal_t_ms > self.gesture_max_age_ms
        ):
            return GestureLabel.NEUTRAL, False
        return self._latest_signal.label, self._latest_signal.stable

    def _target_fresh(self, now_ms: float) -> bool:
        return (
            self._latest_target is not None
            and now_ms - self._target_t_ms <= self.target_max_age_ms
        )

    def tick(self, now_ms: float) -> Optional[RobotCommand]:
        label, stable = self._current_gesture(now_ms)
        fresh = self._target_fresh(now_ms)
        kind = decide_command(self.mode, label, stable, fresh)

        if self.mode is ControlMode.IDLE:
            return RobotCommand(CommandKind.HOLD, now_ms)

        if self.mode is ControlMode.SEMI_AUTONOMOUS:
            kind = self._semi_override(kind, label, stable, fresh)

        if kind in (
            CommandKind.GRIPPER_OPEN,
            CommandKind.GRIPPER_CLOSE,
            CommandKind.GRASP_OBJECT,
            CommandKind.RELEASE_OBJECT,
        ):
            if stable and label is self._actuated_label:
                # Level-held gesture: already actuated, fall back to streaming.
                kind = (
                    CommandKind.MOVE_EE
                    if self.mode is ControlMode.MANUAL and fresh
                    else CommandKind.HOLD
                )
            else:
                self._actuated_label = label
        elif stable and label is GestureLabel.NEUTRAL:
            self._actuated_label = None

        return self._build(kind, now_ms)

    def _semi_override(
        self, kind: CommandKind, label: GestureLabel, stable: bool, fresh: bool
    ) -> CommandKind:
        sub = self.lifecycle.state
        if sub is GraspSubState.EXECUTING:
            # The autonomous routine owns the arm; abort is flagged elsewhere.
            return CommandKind.HOLD
        if sub is GraspSubState.HOLDING:
            if kind is CommandKind.RELEASE_OBJECT:
                return kind
            if stable and label is GestureLabel.CLOSED_FIST:
                return CommandKind.HOLD  # already holding; a fist cannot re-grasp
            return CommandKind.MOVE_EE if fresh else CommandKind.HOLD
        # ARMED: releases are meaningless with an empty gripper.
        if kind is CommandKind.RELEASE_OBJECT:
            return CommandKind.HOLD
        return kind

    def _build(self, kind: CommandKind, now_ms: float) -> RobotCommand:
        if kind is CommandKind.MOVE_EE:
            return RobotCommand(kind, now_ms, target_pose=self._latest_target)
        if kind is CommandKind.GRASP_OBJECT:
            if self.select_object_fn is None:
                return RobotCommand(CommandKind.HOLD, now_ms)
            try:
                object_id = self.select_object_fn()
            except NoTarget:
                return RobotCommand(CommandKind.HOLD, now_ms)
            self.abort_requested = False
            self.lifecycle.apply(GraspEvent.GRASP_STARTED)
            return RobotCommand(kind, now_ms, object_id=object_id)
        return RobotCommand(kind, now_ms)

    # -- lifecycle and out-of-band controls ----------------------------------

    def notify_grasp(self, event: GraspEvent) -> None:
        self.lifecycle.apply(event)
        if event in (GraspEvent.GRASP_FAILED, GraspEvent.GRASP_SUCCEEDED):
            self.abort_requested = False

    def reset(self) -> None:
        self.mode = ControlMode.IDLE
        self.lifecycle.reset()
        self.abort_requested = False
        self._latest_target = None
        self._target_t_ms = -math.inf
        self._latest_signal = None
        self._signal_t_ms = -math.inf
        self._hold_count = None
        self._actuated_label = None

    def estop(self) -> None:
        self.reset()
