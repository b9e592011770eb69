"""Pipeline integration seams: calibration, routine lifecycle, reset/estop."""

import numpy as np

from telewrist.control import CommandKind, ControlMode, GraspSubState
from telewrist.engine import EngineConfig, TeleopEngine
from telewrist.geometry import Point3
from telewrist.handpose import HAND_POSES, synthetic_hand
from telewrist.protocol import LandmarkFrame, MarkerDetection, WristObservation
from telewrist.simarm import GripperState, SceneObject

IDENTITY3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


def frame(t_ms, wrist_xyz=None, pose=None, marker_t=None):
    wrist = None
    if wrist_xyz is not None:
        x, y, z = wrist_xyz  # camera-frame point; default intrinsics
        u = 320.0 + 600.0 * x / z
        v = 240.0 + 600.0 * y / z
        wrist = WristObservation(u=u, v=v, depth_mm=z * 1000.0, window=(z * 1000.0,) * 25)
    hand = None
    if pose is not None:
        pts = synthetic_hand(HAND_POSES[pose]).points
        hand = tuple((float(a), float(b), float(c)) for a, b, c in pts)
    marker = None
    if marker_t is not None:
        marker = MarkerDetection(rotation=IDENTITY3, translation=tuple(marker_t))
    return LandmarkFrame(t_ms=t_ms, wrist=wrist, hand=hand, marker=marker)


def engine_with_scene():
    config = EngineConfig(
        objects=(SceneObject("can-1", "can", Point3(0.55, 0.1, 0.08), 0.9),),
        allowed_classes=("can",),
    )
    return TeleopEngine(config), config


def run_script(engine, script, t_end_ms, substep_ms=10.0, tick_ms=200.0):
    """script: list of (t_ms, frame) sorted by time."""
    t = 0.0
    next_tick = tick_ms
    idx = 0
    commands = []
    while t <= t_end_ms:
        while idx < len(script) and script[idx].t_ms <= t:
            engine.feed_frame(script[idx])
            idx += 1
        if t >= next_tick:
            cmd = engine.tick(t)
            if cmd is not None:
                commands.append(cmd)
            next_tick += tick_ms
        engine.substep()
        t += substep_ms
    return commands


def gesture_script(schedule, wrist_cam=(0.0, 0.0, 1.2), fps=30.0, t_end_s=None):
    """schedule: list of (start_s, end_s, pose or None)."""
    end = t_end_s if t_end_s is not None else max(e for _, e, _ in schedule)
    frames = []
    n = int(end * fps) + 1
    for i in range(n):
        t_s = i / fps
        pose = None
        for s, e, p in schedule:
            if s <= t_s < e:
                pose = p
        frames.append(
            frame(t_s * 1000.0, wrist_xyz=wrist_cam, pose=pose,
                  marker_t=(0.0, 0.0, 1.2) if i == 0 else None)
        )
    return frames


class TestCalibration:
    def test_first_marker_locks(self):
        engine, _ = engine_with_scene()
        assert not engine.calibration.locked
        engine.feed_frame(frame(0.0, marker_t=(0.0, 0.0, 1.2)))
        assert engine.calibration.locked
        np.testing.assert_allclose(
            engine.calibration.marker_from_camera.translation, [0.0, 0.0, -1.2]
        )

    def test_later_markers_ignored(self):
        engine, _ = engine_with_scene()
        engine.feed_frame(frame(0.0, marker_t=(0.0, 0.0, 1.2)))
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            engine.feed_frame(frame(33.0, marker_t=(9.0, 9.0, 9.0)))
        np.testing.assert_allclose(
            engine.calibration.marker_from_camera.translation, [0.0, 0.0, -1.2]
        )

    def test_wrist_before_calibration_is_dropped(self):
        engine, _ = engine_with_scene()
        engine.feed_frame(frame(0.0, wrist_xyz=(0.0, 0.0, 1.2)))
        assert engine.tracked is None


class TestModeAndStreaming:
    def test_one_finger_enters_manual_and_streams(self):
        engine, _ = engine_with_scene()
        script = gesture_script([(0.0, 2.2, "one")], t_end_s=4.0)
        commands = run_script(engine, script, t_end_ms=4000.0)
        assert engine.mode is ControlMode.MANUAL
        kinds = [c.kind for c in commands]
        assert CommandKind.MOVE_EE in kinds
        # Wrist at the marker origin maps to (0.5, 0, 0.3) in the robot frame.
        target = next(c for c in commands if c.kind is CommandKind.MOVE_EE).target_pose
        np.testing.assert_allclose(
            target.position_robot.as_array(), [0.5, 0.0, 0.3], atol=1e-6
        )

    def test_no_frames_means_hold(self):
        engine, _ = engine_with_scene()
        script = gesture_script([(0.0, 2.2, "one")], t_end_s=2.5)
        run_script(engine, script, t_end_ms=2500.0)
        # A second of silence: targets go stale, ticks emit hold.
        cmd = engine.tick(4000.0)
        assert cmd.kind is CommandKind.HOLD


class TestGraspIntegration:
    def test_full_grasp_and_release(self):
        engine, config = engine_with_scene()
        script = gesture_script(
            [(0.0, 2.0, "two"), (3.0, 4.5, "fist"), (9.5, 12.0, "three"),
             (12.0, 13.5, "open")],
            t_end_s=14.0,
        )
        commands = run_script(engine, script, t_end_ms=14000.0)
        kinds = [c.kind for c in commands]
        assert kinds.count(CommandKind.GRASP_OBJECT) == 1
        assert kinds.count(CommandKind.RELEASE_OBJECT) == 1
        assert engine.sim.state.gripper is GripperState.OPEN
        assert engine.controller.lifecycle.state is GraspSubState.ARMED

    def test_abort_during_execution(self):
        engine, _ = engine_with_scene()
        # Fist starts the routine; a stable neutral right after aborts it.
        script = gesture_script(
            [(0.0, 2.0, "two"), (3.0, 3.8, "fist"), (3.8, 6.0, "three")],
            t_end_s=7.0,
        )
        commands = run_script(engine, script, t_end_ms=7000.0)
        assert any(c.kind is CommandKind.GRASP_OBJECT for c in commands)
        assert not engine.routine_active
        assert engine.sim.state.gripper is GripperState.OPEN  # abort opens
        assert engine.controller.lifecycle.state is GraspSubState.ARMED

    def test_reset_returns_to_idle(self):
        engine, _ = engine_with_scene()
        script = gesture_script([(0.0, 2.2, "one")], t_end_s=2.5)
        run_script(engine, script, t_end_ms=2500.0)
        assert engine.mode is ControlMode.MANUAL
        engine.handle_reset()
        assert engine.mode is ControlMode.IDLE

    def test_estop_cancels_routine(self):
        engine, _ = engine_with_scene()
        script = gesture_script([(0.0, 2.0, "two"), (3.0, 4.0, "fist")], t_end_s=4.2)
        run_script(engine, script, t_end_ms=4200.0)
        assert engine.routine_active
        engine.handle_estop()
        assert not engine.routine_active
        assert engine.mode is ControlMode.IDLE
