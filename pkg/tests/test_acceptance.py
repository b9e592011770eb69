"""Acceptance suite: one test per shipping criterion, each with its stated
tolerance and runtime budget pinned. Run with ``pytest tests/test_acceptance.py -v -s``
to see one PASS line per criterion.
"""

import itertools
import json
import math
import pathlib
import time

import numpy as np
import pytest

from telewrist.control import (
    CommandKind,
    ControlMode,
    RobotCommand,
    TargetPose,
    decide_command,
)
from telewrist.engine import EngineConfig
from telewrist.geometry import (
    CameraIntrinsics,
    PixelDepthPoint,
    Point3,
    RigidTransform,
    RollQuaternion,
    back_project,
    compose,
    invert_pose,
)
from telewrist.handpose import (
    GestureLabel,
    HAND_POSES,
    normalize_hand,
    palm_normal,
    roll_quaternion,
    synthetic_hand,
)
from telewrist.session import (
    GestureCue,
    SegmentSpec,
    TrajectorySpec,
    generate_synthetic,
    read_session,
    replay,
)
from telewrist.simarm import (
    DEFAULT_ARM_MODEL,
    ArmSimulator,
    GripperState,
    Obstacle,
    SafetyStatus,
    SceneObject,
    fk_frames,
    ik,
    link_spheres,
    select_object,
)
from telewrist.tracking import FilterConfig, WristFilter
from telewrist.control import NoTarget

DATA = pathlib.Path(__file__).resolve().parent / "data"
MODEL = DEFAULT_ARM_MODEL


def ok(line: str):
    print(f"ACCEPT PASS: {line}")


class TestAcceptance:
    def test_01_back_projection_oracle(self):
        # 1000 random tuples vs an independently coded pinhole evaluation,
        # 1e-12 relative error, under a second.
        rng = np.random.default_rng(101)
        start = time.monotonic()
        for _ in range(1000):
            fx, fy = rng.uniform(80, 1500, 2)
            w = int(rng.integers(320, 1920))
            h = int(rng.integers(240, 1080))
            cx = rng.uniform(1.0, w - 1.0)
            cy = rng.uniform(1.0, h - 1.0)
            k = CameraIntrinsics(fx=fx, fy=fy, cx=cx, cy=cy, width=w, height=h)
            u = rng.uniform(0, w)
            v = rng.uniform(0, h)
            depth_mm = rng.uniform(0.5, 10000.0)
            got = back_project(PixelDepthPoint(u, v, depth_mm), k).as_array()
            z = depth_mm * 0.001
            expected = np.array([z * (u - cx) / fx, z * (v - cy) / fy, z])
            np.testing.assert_allclose(got, expected, rtol=1e-12)
        elapsed = time.monotonic() - start
        assert elapsed < 1.0
        ok(f"back-projection matches oracle on 1000 tuples at 1e-12 ({elapsed:.2f} s)")

    def test_02_transform_algebra(self):
        from test_geometry import random_rotation, rot_z

        rng = np.random.default_rng(103)
        for _ in range(1000):
            r = random_rotation(rng)
            t = rng.normal(size=3) * 2.0
            identity = compose(RigidTransform(r, t), invert_pose(r, t))
            assert identity.is_close_to(RigidTransform.identity(), tol=1e-9)
        inv = invert_pose(rot_z(90), np.array([1.0, 0.0, 0.0]))
        np.testing.assert_allclose(inv.rotation, rot_z(-90), atol=1e-15)
        np.testing.assert_allclose(inv.translation, [0.0, 1.0, 0.0], atol=1e-15)
        ok("compose/invert identity holds at 1e-9 over 1000 rotations; worked example exact")

    def test_03_filter_contract(self):
        cfg = FilterConfig()  # alpha 0.5, threshold 0.25 m, reseed after 15
        f = WristFilter(cfg)
        f.filter_step(Point3(0.0, 0.0, 0.0), 0.0)
        blended = f.filter_step(Point3(0.2, 0.0, 0.0), 33.0)
        assert blended.position_marker == Point3(0.1, 0.0, 0.0)  # exact EMA

        f = WristFilter(cfg)
        f.filter_step(Point3(0.0, 0.0, 0.0), 0.0)
        rejected = f.filter_step(Point3(0.3, 0.0, 0.0), 33.0)
        assert rejected.position_marker == Point3(0.0, 0.0, 0.0)
        assert not rejected.fresh

        f = WristFilter(cfg)
        f.filter_step(Point3(0.0, 0.0, 0.0), 0.0)
        spot = Point3(2.0, 2.0, 2.0)
        for i in range(1, cfg.max_consecutive_rejects + 1):
            held = f.filter_step(spot, i * 33.0)
            assert not held.fresh
        revived = f.filter_step(spot, (cfg.max_consecutive_rejects + 1) * 33.0)
        assert revived.fresh and revived.position_marker == spot
        ok("EMA blend exact, 0.30 m jump rejected at the 0.25 m threshold, teleport liveness")

    def test_04_orientation(self):
        # Quarter-turn: palm normal (0,1,0) -> q = (-0.70711, 0, 0, 0.70711).
        q = RollQuaternion.from_roll(math.pi / 2)
        assert q.qx == pytest.approx(-0.70711, abs=1e-5)
        assert q.qw == pytest.approx(0.70711, abs=1e-5)

        rng = np.random.default_rng(107)
        poses = list(HAND_POSES.values())
        for _ in range(10_000):
            lm = synthetic_hand(
                poses[rng.integers(0, len(poses))],
                roll=rng.uniform(-3.14, 3.14),
                tilt=rng.uniform(0.05, 1.4),
                scale=rng.uniform(0.1, 10.0),
                offset=rng.normal(size=3),
            )
            quat = roll_quaternion(palm_normal(lm))
            assert quat.qy == 0.0 and quat.qz == 0.0
            assert math.hypot(quat.qx, quat.qw) == pytest.approx(1.0, abs=1e-9)

        for _ in range(200):
            lm = synthetic_hand(roll=rng.uniform(-3, 3), tilt=rng.uniform(0.1, 1.2),
                                scale=rng.uniform(0.2, 4.0), offset=rng.normal(size=3))
            n1 = np.array(palm_normal(lm).normal)
            n2 = np.array(palm_normal(normalize_hand(lm)).normal)
            np.testing.assert_allclose(n1, n2, atol=1e-9)
        ok("quarter-turn quaternion at 1e-5; 10^4 hands pure-roll unit quaternions; "
           "palm normal invariant under normalization at 1e-9")

    def test_05_state_machine(self):
        start = time.monotonic()
        # Exhaustive decision table over mode x gesture x stability x freshness.
        expected = {
            (ControlMode.IDLE, GestureLabel.OPEN_PALM): lambda f: CommandKind.HOLD,
            (ControlMode.IDLE, GestureLabel.CLOSED_FIST): lambda f: CommandKind.HOLD,
            (ControlMode.IDLE, GestureLabel.NEUTRAL): lambda f: CommandKind.HOLD,
            (ControlMode.MANUAL, GestureLabel.OPEN_PALM): lambda f: CommandKind.GRIPPER_OPEN,
            (ControlMode.MANUAL, GestureLabel.CLOSED_FIST): lambda f: CommandKind.GRIPPER_CLOSE,
            (ControlMode.MANUAL, GestureLabel.NEUTRAL): (
                lambda f: CommandKind.MOVE_EE if f else CommandKind.HOLD
            ),
            (ControlMode.SEMI_AUTONOMOUS, GestureLabel.OPEN_PALM): (
                lambda f: CommandKind.RELEASE_OBJECT
            ),
            (ControlMode.SEMI_AUTONOMOUS, GestureLabel.CLOSED_FIST): (
                lambda f: CommandKind.GRASP_OBJECT
            ),
            (ControlMode.SEMI_AUTONOMOUS, GestureLabel.NEUTRAL): lambda f: CommandKind.HOLD,
        }
        for mode, label, stable, fresh in itertools.product(
            ControlMode, GestureLabel, (True, False), (True, False)
        ):
            effective = label if stable else GestureLabel.NEUTRAL
            assert decide_command(mode, label, stable, fresh) is expected[(mode, effective)](fresh)

        # Scripted session: one finger enters manual; fist closes, palm opens.
        config = EngineConfig()
        manual = TrajectorySpec(
            segments=(SegmentSpec((0.5, 0.0, 0.3), (0.5, 0.0, 0.3), duration_s=7.5),),
            frame="robot",
            gestures=(GestureCue(0.0, 2.5, "one"), GestureCue(4.0, 5.5, "fist"),
                      GestureCue(5.5, 7.0, "open")),
        )
        result = replay(generate_synthetic(manual, config))
        kinds = [c.kind for c in result.commands]
        assert result.engine.mode is ControlMode.MANUAL
        assert kinds.count(CommandKind.GRIPPER_CLOSE) == 1
        assert kinds.count(CommandKind.GRIPPER_OPEN) == 1
        assert CommandKind.MOVE_EE in kinds

        # Two fingers enter semi-autonomous.
        semi = TrajectorySpec(
            segments=(SegmentSpec((0.5, 0.0, 0.3), (0.5, 0.0, 0.3), duration_s=2.5),),
            frame="robot",
            gestures=(GestureCue(0.0, 2.4, "two"),),
        )
        result = replay(generate_synthetic(semi, config))
        assert result.engine.mode is ControlMode.SEMI_AUTONOMOUS
        elapsed = time.monotonic() - start
        assert elapsed < 5.0
        ok(f"decision table exhaustive; scripted mode entry + gripper gestures ({elapsed:.2f} s)")

    def test_06_kinematics(self):
        from test_simarm import fk_oracle

        start = time.monotonic()
        rng = np.random.default_rng(109)
        for _ in range(1000):
            q = rng.uniform(MODEL.lower_limits, MODEL.upper_limits)
            frames = fk_frames(MODEL, q)
            oracle = fk_oracle(MODEL, q)
            np.testing.assert_allclose(frames.position, oracle[:3, 3], atol=1e-9)
            np.testing.assert_allclose(frames.rotation, oracle[:3, :3], atol=1e-9)

        failures = 0
        for _ in range(1000):
            q0 = rng.uniform(MODEL.lower_limits, MODEL.upper_limits)
            pos, quat = fk_frames(MODEL, q0).position, None
            target = TargetPose(
                Point3.from_array(pos),
                RollQuaternion.from_roll(
                    math.atan2(fk_frames(MODEL, q0).rotation[2, 1],
                               fk_frames(MODEL, q0).rotation[2, 2])
                ),
            )
            seed = MODEL.clamp(q0 + rng.normal(0, 0.1, 6))
            res = ik(target, seed, MODEL)
            if res.position_residual_m >= 1e-4:
                failures += 1
        elapsed = time.monotonic() - start
        assert failures <= 10  # >= 99% of 1000
        assert elapsed < 30.0
        ok(f"FK matches oracle at 1e-9; IK round-trip {1000 - failures}/1000 under 1e-4 m "
           f"({elapsed:.1f} s)")

    def test_07_precision_analysis(self):
        # Desk-scale stand-in: constant-velocity segments must show the
        # analytic first-order lag v*tau, and mixed speeds must correlate.
        tau = MODEL.time_constant_s
        assert tau == 0.35
        spec = TrajectorySpec(
            segments=(
                SegmentSpec((0.35, -0.45, 0.3), (0.35, -0.45, 0.3), duration_s=2.5),
                SegmentSpec((0.35, -0.45, 0.3), (0.35, 0.45, 0.3), speed_mps=0.1),
                SegmentSpec((0.35, 0.45, 0.3), (0.35, -0.45, 0.3), speed_mps=0.2),
                SegmentSpec((0.35, -0.45, 0.3), (0.35, 0.45, 0.3), speed_mps=0.4),
            ),
            frame="robot",
            gestures=(GestureCue(0.0, 2.2, "one"),),
        )
        report = replay(generate_synthetic(spec, EngineConfig())).report
        # Segment schedule: dwell ends 2.5 s; then 9 s, 4.5 s, 2.25 s legs.
        windows = [(2.5, 11.5, 0.1), (11.5, 16.0, 0.2), (16.0, 18.25, 0.4)]
        for seg_start, seg_end, v in windows:
            mean = report.mean_error_between((seg_start + 2.0) * 1000.0, seg_end * 1000.0)
            assert mean == pytest.approx(v * tau, rel=0.10), f"segment v={v}"
        assert report.speed_error_correlation >= 0.5
        ok(
            "segment mean errors within 10% of v*tau for v in {0.1, 0.2, 0.4} "
            f"(0.2 m/s -> {report.mean_error_between(13500.0, 16000.0):.3f} m); "
            f"speed-error correlation {report.speed_error_correlation:.2f} >= 0.5"
        )

    def test_08_safety_fuzz(self):
        # Independent sphere re-check, written against the same geometry but
        # with its own all-pairs distance-matrix logic.
        def recheck(sim):
            frames = fk_frames(sim.model, sim.state.q)
            spheres = link_spheres(sim.model, frames.joint_origins)
            centers = np.array([s[0] for s in spheres])
            radii = np.array([s[1] for s in spheres])
            links = np.array([s[2] for s in spheres])
            gaps = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
            sums = radii[:, None] + radii[None, :]
            non_adjacent = np.abs(links[:, None] - links[None, :]) >= 2
            assert not np.any((gaps < sums) & non_adjacent), "self-collision emitted"
            for obs in sim.obstacles:
                d = np.linalg.norm(centers - obs.center.as_array(), axis=1)
                assert np.all(d >= radii + obs.radius_m), "obstacle intersection emitted"

        obstacles = (
            Obstacle(Point3(0.45, 0.25, 0.25), 0.08),
            Obstacle(Point3(-0.3, -0.3, 0.4), 0.1),
            Obstacle(Point3(0.6, -0.2, 0.15), 0.06),
        )
        sim = ArmSimulator(MODEL, obstacles=obstacles)
        rng = np.random.default_rng(113)
        blocked_checked = 0
        start = time.monotonic()
        for i in range(10_000):
            roll = rng.uniform(-math.pi, math.pi)
            choice = rng.random()
            if choice < 0.8:
                target = Point3(*rng.uniform([-1.2, -1.2, -0.2], [1.2, 1.2, 1.2]))
                cmd = RobotCommand(
                    CommandKind.MOVE_EE, float(i),
                    target_pose=TargetPose(target, RollQuaternion.from_roll(roll)),
                )
            elif choice < 0.9:
                cmd = RobotCommand(CommandKind.HOLD, float(i))
            elif choice < 0.95:
                cmd = RobotCommand(CommandKind.GRIPPER_CLOSE, float(i))
            else:
                cmd = RobotCommand(CommandKind.GRIPPER_OPEN, float(i))
            q_before = sim.state.q
            ee_before = sim.state.ee_position
            state = sim.step(cmd, float(rng.uniform(0.02, 0.3)))
            recheck(sim)
            if state.safety is SafetyStatus.BLOCKED:
                blocked_checked += 1
                assert state.q is q_before or np.array_equal(state.q, q_before)
                assert state.ee_position == ee_before
        elapsed = time.monotonic() - start
        assert blocked_checked > 0, "fuzz never exercised the blocked path"
        ok(
            f"10^4 fuzzed commands: no sphere intersection ever emitted; "
            f"{blocked_checked} blocked commands left the pose bitwise unchanged "
            f"({elapsed:.1f} s)"
        )

    def test_09_object_selection_oracle(self):
        def oracle(objects, ee, allowed):
            eligible = [o for o in objects if o.graspable and o.class_label in allowed]
            if not eligible:
                return None
            cmax = max(o.confidence for o in eligible)
            tied = [o for o in eligible if cmax - o.confidence < 1e-6]
            best = None
            for o in tied:
                key = (ee.distance_to(o.position), o.id)
                if best is None or key < best[0]:
                    best = (key, o)
            return best[1]

        rng = np.random.default_rng(127)
        labels = ["can", "bottle", "cup", "box", "tool"]
        allowed = ["can", "bottle", "cup"]
        for _ in range(10_000):
            n = int(rng.integers(0, 7))
            confidences = rng.choice([0.25, 0.5, 0.75, 0.9, 0.95], size=n)  # force ties
            objs = [
                SceneObject(
                    id=f"obj-{i}",
                    class_label=labels[int(rng.integers(0, len(labels)))],
                    position=Point3(*rng.uniform(-1, 1, 3)),
                    confidence=float(confidences[i]),
                    graspable=bool(rng.random() < 0.85),
                )
                for i in range(n)
            ]
            ee = Point3(*rng.uniform(-1, 1, 3))
            expected = oracle(objs, ee, allowed)
            if expected is None:
                with pytest.raises(NoTarget):
                    select_object(objs, ee, allowed)
            else:
                assert select_object(objs, ee, allowed).id == expected.id
        ok("object selection agrees with the exhaustive oracle on 10^4 random scenes")

    def test_10_end_to_end_grasp(self):
        record = read_session(str(DATA / "golden_session.jsonl"))
        result = replay(record)
        kinds = [c.kind for c in result.commands]
        assert kinds.count(CommandKind.GRASP_OBJECT) == 1
        assert kinds.count(CommandKind.RELEASE_OBJECT) == 1
        # The release must come after a successful grasp (holding sub-state).
        engine = result.engine
        assert engine.sim.state.gripper is GripperState.OPEN
        can = engine.sim.objects["can-1"]
        zone = record.config.zones[0]
        horizontal = math.hypot(can.position.x - zone.center.x, can.position.y - zone.center.y)
        assert horizontal <= zone.radius_m
        sim_seconds = (record.frames[-1].t_ms - record.frames[0].t_ms) / 1000.0
        assert sim_seconds < 60.0
        ok(
            f"golden scene pick-and-place: grasp succeeded and object released "
            f"{horizontal * 100:.1f} cm from the zone center in {sim_seconds:.1f} simulated s"
        )

    def test_11_replay_determinism(self):
        record = read_session(str(DATA / "golden_session.jsonl"))
        first = replay(record).report.to_json()
        second = replay(record).report.to_json()
        assert first == second
        committed = (DATA / "golden_report.json").read_text()
        assert first == committed
        ok("golden session replays to a bitwise-identical report, matching the committed golden")
