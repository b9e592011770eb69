"""Session capture, deterministic replay, and precision metrics.

A session file is line-oriented JSON: a self-describing header line first
(schema name, version, full engine config), then one record per line, so a
live capture can append and a truncated file still parses up to the cut.
Replay re-runs the full pipeline over the recorded frames at their recorded
timestamps and is bitwise deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import EngineConfig, TeleopEngine
from .control import RobotCommand
from .geometry import Point3, apply_transform, invert_pose
from .handpose import HAND_POSES, synthetic_hand
from .protocol import LandmarkFrame, MarkerDetection, WristObservation, frame_from_dict, frame_to_dict
from .simarm import ArmState
from .tracking import TrackedWrist

SESSION_SCHEMA = "telewrist-session"
SESSION_VERSION = 1


class SchemaVersion(ValueError):
    """Unrecognized session schema or version."""


class CorruptFrame(ValueError):
    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number


class InsufficientData(ValueError):
    """Too few aligned samples to compute metrics."""


class InfeasibleSpec(ValueError):
    """Trajectory leaves the virtual camera frustum or is ill-formed."""


@dataclass(frozen=True)
class GroundTruth:
    t_ms: float
    wrist_marker: Point3


@dataclass
class SessionRecord:
    config: EngineConfig
    frames: list[LandmarkFrame]
    ground_truth: list[GroundTruth] = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def write_session(record: SessionRecord, path: str) -> None:
    header = {
        "schema": SESSION_SCHEMA,
        "version": SESSION_VERSION,
        "config": record.config.to_dict(),
        "meta": record.meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        gt_iter = iter(sorted(record.ground_truth, key=lambda g: g.t_ms))
        pending = next(gt_iter, None)
        for frame in record.frames:
            fh.write(json.dumps({"kind": "frame", **frame_to_dict(frame)}, sort_keys=True) + "\n")
            while pending is not None and pending.t_ms <= frame.t_ms:
                fh.write(
                    json.dumps(
                        {
                            "kind": "gt",
                            "t_ms": pending.t_ms,
                            "wrist_marker": [
                                pending.wrist_marker.x,
                                pending.wrist_marker.y,
                                pending.wrist_marker.z,
                            ],
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
                pending = next(gt_iter, None)


def read_session(path: str) -> SessionRecord:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaVersion("empty session file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaVersion(f"header is not valid JSON: {exc}") from exc
    if header.get("schema") != SESSION_SCHEMA or header.get("version") != SESSION_VERSION:
        raise SchemaVersion(
            f"unrecognized schema {header.get('schema')!r} v{header.get('version')!r} "
            f"(this build reads {SESSION_SCHEMA} v{SESSION_VERSION})"
        )
    config = EngineConfig.from_dict(header.get("config", {}))
    frames: list[LandmarkFrame] = []
    ground_truth: list[GroundTruth] = []
    last_t = -math.inf
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptFrame(line_number, f"not valid JSON ({exc.msg})") from exc
        kind = d.get("kind")
        if kind == "frame":
            try:
                frame = frame_from_dict(d)
            except ValueError as exc:
                raise CorruptFrame(line_number, str(exc)) from exc
            if frame.t_ms <= last_t:
                raise CorruptFrame(line_number, f"timestamp {frame.t_ms} not increasing")
            last_t = frame.t_ms
            frames.append(frame)
        elif kind == "gt":
            try:
                ground_truth.append(GroundTruth(float(d["t_ms"]), Point3(*d["wrist_marker"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise CorruptFrame(line_number, f"bad ground truth ({exc})") from exc
        else:
            raise CorruptFrame(line_number, f"unknown record kind {kind!r}")
    return SessionRecord(config=config, frames=frames, ground_truth=ground_truth,
                         meta=header.get("meta", {}))


# -- synthetic trajectory generation ------------------------------------------


@dataclass(frozen=True)
class SegmentSpec:
    """Linear segment; set speed_mps for motion, duration_s for a dwell."""

    start: tuple[float, float, float]
    end: tuple[float, float, float]
    speed_mps: Optional[float] = None
    duration_s: Optional[float] = None

    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.end, self.start)))

    def duration(self) -> float:
        if self.duration_s is not None:
            return self.duration_s
        if self.speed_mps is None or self.speed_mps <= 0:
            raise InfeasibleSpec(f"segment {self.start}->{self.end} needs speed_mps or duration_s")
        return self.length() / self.speed_mps


@dataclass(frozen=True)
class GestureCue:
    """Scripted hand pose over [start_s, end_s); pose names index HAND_POSES."""

    start_s: float
    end_s: float
    pose: str

    def __post_init__(self):
        if self.pose != "none" and self.pose not in HAND_POSES:
            raise InfeasibleSpec(f"unknown hand pose {self.pose!r}")


@dataclass(frozen=True)
class TrajectorySpec:
    segments: tuple[SegmentSpec, ...]
    frame: str = "marker"  # waypoint frame: "marker" or "robot"
    fps: float = 30.0
    pixel_noise_px: float = 0.0
    depth_noise_mm: float = 0.0
    depth_dropout: float = 0.0
    seed: int = 0
    gestures: tuple[GestureCue, ...] = ()
    hand_roll: float = 0.0
    marker_translation: tuple[float, float, float] = (0.0, 0.0, 1.2)

    def total_duration(self) -> float:
        return sum(s.duration() for s in self.segments)


def _position_at(spec: TrajectorySpec, t_s: float) -> np.ndarray:
    """Piecewise-linear position along the segment chain (marker/robot frame)."""
    remaining = t_s
    for seg in spec.segments:
        d = seg.duration()
        if remaining <= d or seg is spec.segments[-1]:
            frac = 1.0 if d == 0 else min(remaining / d, 1.0)
            return np.asarray(seg.start) + frac * np.subtract(seg.end, seg.start)
        remaining -= d
    return np.asarray(spec.segments[-1].end, dtype=np.float64)


def _pose_at(spec: TrajectorySpec, t_s: float) -> Optional[str]:
    for cue in spec.gestures:
        if cue.start_s <= t_s < cue.end_s:
            return None if cue.pose == "none" else cue.pose
    return None


def generate_synthetic(spec: TrajectorySpec, config: EngineConfig) -> SessionRecord:
    """Render a trajectory spec into a session of camera-consistent frames.

    Pixels and depths are produced by projecting the wrist path through the
    configured virtual camera; the first frame carries the marker detection
    that locks calibration on replay.
    """
    if not spec.segments:
        raise InfeasibleSpec("trajectory has no segments")
    rng = np.random.default_rng(spec.seed)
    k = config.intrinsics
    marker_t = np.asarray(spec.marker_translation, dtype=np.float64)
    to_marker = None
    if spec.frame == "robot":
        to_marker = invert_pose(
            config.robot_from_marker.rotation, config.robot_from_marker.translation
        )
    elif spec.frame != "marker":
        raise InfeasibleSpec(f"unknown waypoint frame {spec.frame!r}")

    n_window = config.filter.depth_window ** 2
    duration = spec.total_duration()
    n_frames = max(int(round(duration * spec.fps)) + 1, 2)
    frames: list[LandmarkFrame] = []
    ground_truth: list[GroundTruth] = []

    for i in range(n_frames):
        t_s = i / spec.fps
        t_ms = t_s * 1000.0
        p = _position_at(spec, t_s)
        if to_marker is not None:
            p = apply_transform(to_marker, Point3.from_array(p)).as_array()
        p_cam = p + marker_t  # marker detection pose is identity rotation
        z = p_cam[2]
        if z < 0.05:
            raise InfeasibleSpec(f"trajectory reaches z={z:.3f} m at t={t_s:.2f} s, behind the camera")
        u = k.cx + k.fx * p_cam[0] / z
        v = k.cy + k.fy * p_cam[1] / z
        if spec.pixel_noise_px > 0:
            u += rng.normal(0.0, spec.pixel_noise_px)
            v += rng.normal(0.0, spec.pixel_noise_px)
        if not (0 <= u < k.width and 0 <= v < k.height):
            raise InfeasibleSpec(
                f"trajectory leaves the frustum at t={t_s:.2f} s (pixel {u:.1f}, {v:.1f})"
            )
        depth_mm = z * 1000.0
        if spec.depth_noise_mm > 0:
            depth_mm += rng.normal(0.0, spec.depth_noise_mm)
        window = []
        for _ in range(n_window):
            if spec.depth_dropout > 0 and rng.random() < spec.depth_dropout:
                window.append(0.0)
            else:
                window.append(depth_mm)

        pose_name = _pose_at(spec, t_s)
        hand = None
        if pose_name is not None:
            pts = synthetic_hand(HAND_POSES[pose_name], roll=spec.hand_roll).points
            hand = tuple((float(x), float(y), float(z2)) for x, y, z2 in pts)

        frames.append(
            LandmarkFrame(
                t_ms=t_ms,
                wrist=WristObservation(u=float(u), v=float(v), depth_mm=float(depth_mm),
                                       window=tuple(window)),
                hand=hand,
                marker=(
                    MarkerDetection(
                        rotation=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
                        translation=tuple(float(x) for x in marker_t),
                    )
                    if i == 0
                    else None
                ),
            )
        )
        ground_truth.append(GroundTruth(t_ms, Point3.from_array(p)))

    meta = {"generator": "synthetic", "seed": spec.seed, "duration_s": duration}
    return SessionRecord(config=config, frames=frames, ground_truth=ground_truth, meta=meta)


def trajectory_spec_from_dict(d: dict) -> TrajectorySpec:
    try:
        segments = tuple(
            SegmentSpec(
                start=tuple(s["start"]),
                end=tuple(s.get("end", s["start"])),
                speed_mps=s.get("speed_mps"),
                duration_s=s.get("duration_s"),
            )
            for s in d["segments"]
        )
    except (KeyError, TypeError) as exc:
        raise InfeasibleSpec(f"bad segment list: {exc}") from exc
    return TrajectorySpec(
        segments=segments,
        frame=d.get("frame", "marker"),
        fps=d.get("fps", 30.0),
        pixel_noise_px=d.get("pixel_noise_px", 0.0),
        depth_noise_mm=d.get("depth_noise_mm", 0.0),
        depth_dropout=d.get("depth_dropout", 0.0),
        seed=d.get("seed", 0),
        gestures=tuple(
            GestureCue(g["start_s"], g["end_s"], g["pose"]) for g in d.get("gestures", ())
        ),
        hand_roll=d.get("hand_roll", 0.0),
        marker_translation=tuple(d.get("marker_translation", (0.0, 0.0, 1.2))),
    )


# -- metrics ---------------------------------------------------------------------


@dataclass(frozen=True)
class PrecisionReport:
    mean_error_m: float
    errors_m: tuple[float, ...]
    speeds_mps: tuple[float, ...]
    timestamps_ms: tuple[float, ...]
    speed_error_correlation: float
    sample_count: int
    correlation_degenerate: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "mean_error_m": self.mean_error_m,
                "speed_error_correlation": self.speed_error_correlation,
                "sample_count": self.sample_count,
                "correlation_degenerate": self.correlation_degenerate,
                "timestamps_ms": list(self.timestamps_ms),
                "errors_m": list(self.errors_m),
                "speeds_mps": list(self.speeds_mps),
            },
            sort_keys=True,
        )

    def to_csv(self) -> str:
        rows = ["t_ms,error_m,speed_mps"]
        for t, e, s in zip(self.timestamps_ms, self.errors_m, self.speeds_mps):
            rows.append(f"{t!r},{e!r},{s!r}")
        return "\n".join(rows) + "\n"

    def mean_error_between(self, t_start_ms: float, t_end_ms: float) -> float:
        vals = [
            e
            for t, e in zip(self.timestamps_ms, self.errors_m)
            if t_start_ms <= t <= t_end_ms
        ]
        if not vals:
            raise InsufficientData(f"no samples in [{t_start_ms}, {t_end_ms}] ms")
        return float(np.mean(vals))


ALIGN_TOLERANCE_MS = 100.0


def compute_metrics(
    wrist_series: list[tuple[float, Point3]],
    ee_series: list[tuple[float, Point3]],
    smoothing_window_s: float = 0.5,
) -> PrecisionReport:
    """Per-sample position error plus the speed-error relation.

    Series are paired by nearest timestamp within 100 ms; wrist speed comes
    from finite differences smoothed with a centered moving average.
    """
    pairs = _align(wrist_series, ee_series)
    if len(pairs) < 10:
        raise InsufficientData(f"only {len(pairs)} aligned samples, need >= 10")

    times = np.array([t for t, _, _ in pairs])
    wrist = np.array([w.as_array() for _, w, _ in pairs])
    ee = np.array([e.as_array() for _, _, e in pairs])
    errors = np.linalg.norm(wrist - ee, axis=1)

    dt_s = np.diff(times) / 1000.0
    dt_s[dt_s <= 0] = np.nan
    steps = np.linalg.norm(np.diff(wrist, axis=0), axis=1)
    speeds = np.concatenate([[0.0], np.nan_to_num(steps / dt_s)])
    if len(speeds) > 2:
        median_dt = float(np.median(dt_s[np.isfinite(dt_s)])) if np.isfinite(dt_s).any() else 0.0
        if median_dt > 0:
            window = max(int(round(smoothing_window_s / median_dt)), 1)
            kernel = np.ones(window) / window
            speeds = np.convolve(speeds, kernel, mode="same")

    degenerate = bool(np.std(errors) < 1e-12 or np.std(speeds) < 1e-12)
    if degenerate:
        correlation = 0.0
    else:
        correlation = float(np.corrcoef(speeds, errors)[0, 1])

    return PrecisionReport(
        mean_error_m=float(np.mean(errors)),
        errors_m=tuple(float(e) for e in errors),
        speeds_mps=tuple(float(s) for s in speeds),
        timestamps_ms=tuple(float(t) for t in times),
        speed_error_correlation=correlation,
        sample_count=len(pairs),
        correlation_degenerate=degenerate,
    )


def _align(
    wrist_series: list[tuple[float, Point3]], ee_series: list[tuple[float, Point3]]
) -> list[tuple[float, Point3, Point3]]:
    pairs = []
    j = 0
    for t, w in wrist_series:
        while j + 1 < len(ee_series) and abs(ee_series[j + 1][0] - t) <= abs(ee_series[j][0] - t):
            j += 1
        if ee_series and abs(ee_series[j][0] - t) <= ALIGN_TOLERANCE_MS:
            pairs.append((t, w, ee_series[j][1]))
    return pairs


# -- replay -----------------------------------------------------------------------


@dataclass
class ReplayResult:
    tracked: list[TrackedWrist]
    arm_states: list[tuple[float, ArmState]]
    commands: list[RobotCommand]
    report: PrecisionReport
    engine: TeleopEngine


ROUTINE_TAIL_CAP_MS = 30_000.0


def replay(record: SessionRecord, settle_s: float = 2.0) -> ReplayResult:
    """Re-run the pipeline over recorded frames at their recorded timestamps.

    The error series pairs the currently commanded wrist target with the
    simulated end effector at every simulator substep, so segment means
    measure the true time-averaged tracking lag rather than aliasing the
    command clock. The first settle_s seconds of streaming are excluded
    from the report: they measure the arm's initial acquisition of the
    operator's wrist, not tracking behavior.
    """
    if not record.frames:
        raise InsufficientData("session contains no frames")
    config = record.config
    engine = TeleopEngine(config)
    substep_ms = config.substep_s * 1000.0
    tick_period = config.tick_period_ms

    tracked: list[TrackedWrist] = []
    arm_states: list[tuple[float, ArmState]] = []
    commands: list[RobotCommand] = []
    target_series: list[tuple[float, Point3]] = []
    ee_series: list[tuple[float, Point3]] = []

    t0 = record.frames[0].t_ms
    t_end = record.frames[-1].t_ms
    t = t0
    next_tick = t0 + tick_period
    frame_idx = 0
    last_tracked = None
    streaming_start = None

    while True:
        while frame_idx < len(record.frames) and record.frames[frame_idx].t_ms <= t:
            engine.feed_frame(record.frames[frame_idx])
            frame_idx += 1
            if engine.tracked is not None and engine.tracked is not last_tracked:
                tracked.append(engine.tracked)
                last_tracked = engine.tracked
        if t >= next_tick:
            cmd = engine.tick(t)
            if cmd is not None:
                commands.append(cmd)
            next_tick += tick_period
        state = engine.substep()
        arm_states.append((t, state))
        target = engine.streaming_target
        if target is not None:
            if streaming_start is None:
                streaming_start = t
            if t >= streaming_start + settle_s * 1000.0:
                target_series.append((t, target))
                ee_series.append((t, state.ee_position))
        t += substep_ms
        if frame_idx >= len(record.frames) and t > t_end:
            if not engine.routine_active or t > t_end + ROUTINE_TAIL_CAP_MS:
                break

    if len(target_series) >= 10:
        report = compute_metrics(target_series, ee_series)
    else:
        report = PrecisionReport(
            mean_error_m=0.0,
            errors_m=(),
            speeds_mps=(),
            timestamps_ms=(),
            speed_error_correlation=0.0,
            sample_count=0,
            correlation_degenerate=True,
        )
    return ReplayResult(
        tracked=tracked, arm_states=arm_states, commands=commands, report=report, engine=engine
    )
