"""Pipeline composition: frames in, commands and arm state out.

One TeleopEngine owns a tracker, gesture classifier, controller and arm
simulator, and is driven either by the replay harness (simulated clock) or
by the live gateway (wall clock). Frames arrive at the camera rate,
commands are decided at the command rate (default 5 Hz), and the simulator
advances in fixed substeps between them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .control import (
    CommandKind,
    ControlMode,
    GraspEvent,
    RobotCommand,
    SharedController,
)
from .geometry import CameraIntrinsics, Point3, RigidTransform
from .handpose import (
    DegeneratePalm,
    GestureClassifier,
    HandLandmarks,
    OrientationHold,
    palm_normal,
    roll_quaternion,
)
from .protocol import LandmarkFrame
from .simarm import (
    ArmModel,
    ArmSimulator,
    ArmState,
    DEFAULT_ARM_MODEL,
    GraspOutcome,
    Obstacle,
    SceneObject,
    Zone,
    grasp_routine,
)
from .tracking import (
    CalibrationState,
    FilterConfig,
    NoTrack,
    TrackedWrist,
    WristTracker,
    calibrate_once,
)

log = logging.getLogger(__name__)

DEFAULT_INTRINSICS = CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0, width=640, height=480)

# Maps the marker frame (camera-aligned: x right, y down, z forward) onto the
# robot frame (x forward, y left, z up), placing the marker origin in the
# middle of the comfortable workspace.
DEFAULT_ROBOT_FROM_MARKER = RigidTransform(
    rotation=np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]),
    translation=np.array([0.5, 0.0, 0.3]),
)


@dataclass(frozen=True)
class EngineConfig:
    """Everything needed to run the pipeline deterministically."""

    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    filter: FilterConfig = field(default_factory=FilterConfig)
    robot_from_marker: RigidTransform = field(default_factory=lambda: DEFAULT_ROBOT_FROM_MARKER)
    arm: ArmModel = DEFAULT_ARM_MODEL
    obstacles: tuple[Obstacle, ...] = ()
    objects: tuple[SceneObject, ...] = ()
    allowed_classes: tuple[str, ...] = ()
    zones: tuple[Zone, ...] = ()
    tick_hz: float = 5.0
    substep_s: float = 0.01
    target_max_age_ms: float = 300.0
    gesture_max_age_ms: float = 400.0

    @property
    def tick_period_ms(self) -> float:
        return 1000.0 / self.tick_hz

    def to_dict(self) -> dict:
        k = self.intrinsics
        return {
            "intrinsics": {
                "fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
                "width": k.width, "height": k.height,
            },
            "filter": {
                "ema_alpha": self.filter.ema_alpha,
                "jump_threshold_m": self.filter.jump_threshold_m,
                "depth_window": self.filter.depth_window,
                "max_consecutive_rejects": self.filter.max_consecutive_rejects,
            },
            "robot_from_marker": {
                "rotation": self.robot_from_marker.rotation.tolist(),
                "translation": self.robot_from_marker.translation.tolist(),
            },
            "arm": self.arm.to_dict(),
            "obstacles": [
                {"center": [o.center.x, o.center.y, o.center.z], "radius_m": o.radius_m}
                for o in self.obstacles
            ],
            "objects": [
                {
                    "id": o.id,
                    "class_label": o.class_label,
                    "position": [o.position.x, o.position.y, o.position.z],
                    "confidence": o.confidence,
                    "graspable": o.graspable,
                }
                for o in self.objects
            ],
            "allowed_classes": list(self.allowed_classes),
            "zones": [
                {"id": z.id, "center": [z.center.x, z.center.y, z.center.z], "radius_m": z.radius_m}
                for z in self.zones
            ],
            "tick_hz": self.tick_hz,
            "substep_s": self.substep_s,
            "target_max_age_ms": self.target_max_age_ms,
            "gesture_max_age_ms": self.gesture_max_age_ms,
        }

    @staticmethod
    def from_dict(d: dict) -> "EngineConfig":
        k = d.get("intrinsics", {})
        f = d.get("filter", {})
        rfm = d.get("robot_from_marker")
        return EngineConfig(
            intrinsics=CameraIntrinsics(
                fx=k.get("fx", 600.0), fy=k.get("fy", 600.0),
                cx=k.get("cx", 320.0), cy=k.get("cy", 240.0),
                width=k.get("width", 640), height=k.get("height", 480),
            ),
            filter=FilterConfig(
                ema_alpha=f.get("ema_alpha", 0.5),
                jump_threshold_m=f.get("jump_threshold_m", 0.25),
                depth_window=f.get("depth_window", 5),
                max_consecutive_rejects=f.get("max_consecutive_rejects", 15),
            ),
            robot_from_marker=(
                DEFAULT_ROBOT_FROM_MARKER if rfm is None
                else RigidTransform(np.array(rfm["rotation"]), np.array(rfm["translation"]))
            ),
            arm=ArmModel.from_dict(d["arm"]) if "arm" in d else DEFAULT_ARM_MODEL,
            obstacles=tuple(
                Obstacle(Point3(*o["center"]), o["radius_m"]) for o in d.get("obstacles", ())
            ),
            objects=tuple(
                SceneObject(
                    id=o["id"], class_label=o["class_label"],
                    position=Point3(*o["position"]), confidence=o["confidence"],
                    graspable=o.get("graspable", True),
                )
                for o in d.get("objects", ())
            ),
            allowed_classes=tuple(d.get("allowed_classes", ())),
            zones=tuple(
                Zone(z["id"], Point3(*z["center"]), z["radius_m"]) for z in d.get("zones", ())
            ),
            tick_hz=d.get("tick_hz", 5.0),
            substep_s=d.get("substep_s", 0.01),
            target_max_age_ms=d.get("target_max_age_ms", 300.0),
            gesture_max_age_ms=d.get("gesture_max_age_ms", 400.0),
        )


class TeleopEngine:
    """Deterministic frame -> command -> simulator pipeline."""

    def __init__(self, config: EngineConfig):
        self.config = config
        self.calibration = CalibrationState(robot_from_marker=config.robot_from_marker)
        self.tracker = WristTracker(config.intrinsics, config.filter)
        self.gestures = GestureClassifier()
        self.orientation = OrientationHold()
        self.sim = ArmSimulator(
            model=config.arm,
            obstacles=config.obstacles,
            objects=config.objects,
            allowed_classes=config.allowed_classes,
        )
        self.controller = SharedController(
            select_object_fn=lambda: self.sim.select_grasp_target().id,
            target_max_age_ms=config.target_max_age_ms,
            gesture_max_age_ms=config.gesture_max_age_ms,
        )
        self.tracked: Optional[TrackedWrist] = None
        self.last_signal = None
        self.last_command: Optional[RobotCommand] = None
        self._routine = None
        self._routine_object: Optional[str] = None

    # -- perception (camera rate) ------------------------------------------------

    def feed_frame(self, frame: LandmarkFrame, now_ms: Optional[float] = None) -> None:
        """Process one observation. now_ms defaults to the frame timestamp (replay)."""
        now = frame.t_ms if now_ms is None else now_ms

        if frame.marker is not None and not self.calibration.locked:
            self.calibration = calibrate_once(
                np.array(frame.marker.rotation), np.array(frame.marker.translation), self.calibration
            )
            log.info("calibration locked from marker detection at t=%.0f ms", frame.t_ms)

        if frame.wrist is not None and self.calibration.locked:
            try:
                self.tracked = self.tracker.track(frame, self.calibration)
            except NoTrack:
                self.tracked = None

        quaternion = None
        signal = None
        if frame.hand is not None:
            landmarks = HandLandmarks.from_rows(frame.hand)
            signal = self.gestures.classify(landmarks)
            self.last_signal = signal
            try:
                quaternion = roll_quaternion(palm_normal(landmarks))
            except DegeneratePalm:
                quaternion = None

        oriented = self.orientation.update(quaternion, signal, now)
        self.controller.update_perception(
            now_ms=now,
            wrist=self.tracked,
            gesture=signal,
            orientation=oriented,
            calib=self.calibration,
        )

    # -- command loop (tick rate) ---------------------------------------------------

    def tick(self, now_ms: float) -> Optional[RobotCommand]:
        cmd = self.controller.tick(now_ms)
        if self._routine is not None:
            # The autonomous routine owns the simulator; the controller's
            # output is informational (hold) while it runs.
            self.last_command = cmd
            return cmd
        if cmd is not None:
            if cmd.kind is CommandKind.GRASP_OBJECT:
                self._start_routine(cmd.object_id)
            else:
                self.sim.apply_command(cmd)
                if cmd.kind is CommandKind.RELEASE_OBJECT:
                    self.controller.notify_grasp(GraspEvent.RELEASED)
        self.last_command = cmd
        return cmd

    def _start_routine(self, object_id: str) -> None:
        self._routine = grasp_routine(
            self.sim,
            object_id,
            dt_s=self.config.substep_s,
            abort=lambda: self.controller.abort_requested,
        )
        self._routine_object = object_id
        log.info("grasp routine started on %s", object_id)

    # -- simulation (substep rate) -----------------------------------------------------

    def substep(self) -> ArmState:
        if self._routine is not None:
            try:
                return next(self._routine)
            except StopIteration as stop:
                outcome = stop.value or GraspOutcome.FAILED
                self._finish_routine(outcome)
                return self.sim.state
        return self.sim.substep(self.config.substep_s)

    def _finish_routine(self, outcome: GraspOutcome) -> None:
        log.info("grasp routine on %s finished: %s", self._routine_object, outcome.value)
        self._routine = None
        self._routine_object = None
        if outcome is GraspOutcome.SUCCEEDED:
            self.controller.notify_grasp(GraspEvent.GRASP_SUCCEEDED)
        else:
            # Aborts re-arm the gesture loop exactly like failures.
            self.controller.notify_grasp(GraspEvent.GRASP_FAILED)

    # -- out-of-band -------------------------------------------------------------------

    def handle_reset(self) -> None:
        self.controller.reset()
        self._routine = None
        self._routine_object = None
        self.sim.apply_command(RobotCommand(CommandKind.HOLD, 0.0))

    def handle_estop(self) -> None:
        self.handle_reset()
        log.warning("emergency stop: arm holding, mode idle")

    # -- introspection -------------------------------------------------------------------

    @property
    def routine_active(self) -> bool:
        return self._routine is not None

    @property
    def mode(self) -> ControlMode:
        return self.controller.mode

    @property
    def streaming_target(self) -> Optional[Point3]:
        """The active wrist-derived Cartesian target, if the operator is streaming."""
        if self._routine is not None:
            return None
        if self.last_command is None or self.last_command.kind is not CommandKind.MOVE_EE:
            return None
        return self.sim.active_target
