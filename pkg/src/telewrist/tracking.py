"""Wrist trajectory estimation from raw per-frame observations.

Stages, in order: median over the wrist depth window (invalid zeros
excluded), pinhole back-projection to the camera frame, EMA smoothing with
jump rejection, then the transform into the marker frame. Filtering runs in
the camera frame; the marker transform is an isometry so the jump test is
frame-invariant.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .geometry import (
    CameraIntrinsics,
    PixelDepthPoint,
    Point3,
    RigidTransform,
    apply_transform,
    back_project,
    invert_pose,
)
from .protocol import LandmarkFrame


class NotCalibrated(RuntimeError):
    """Tracking requested before the marker calibration locked."""


class NonMonotonicTimestamp(ValueError):
    """Sample timestamp does not advance past the previous one."""


class NoTrack(RuntimeError):
    """No usable observation and no previous track to hold."""


class AlreadyLocked(UserWarning):
    """Calibration detection arrived after the transform was locked."""


@dataclass(frozen=True)
class FilterConfig:
    """Smoothing and outlier-rejection parameters.

    ema_alpha 0.5, jump_threshold_m 0.25 and depth_window 5 match the
    deployed capture pipeline; max_consecutive_rejects bounds how long a
    genuine relocation can be mistaken for outliers (~0.5 s at 30 Hz).
    """

    ema_alpha: float = 0.5
    jump_threshold_m: float = 0.25
    depth_window: int = 5
    max_consecutive_rejects: int = 15

    def __post_init__(self):
        if not (0.0 < self.ema_alpha <= 1.0):
            raise ValueError(f"ema_alpha must be in (0, 1], got {self.ema_alpha}")
        if self.jump_threshold_m <= 0:
            raise ValueError(f"jump_threshold_m must be > 0, got {self.jump_threshold_m}")
        if self.depth_window < 1 or self.depth_window % 2 == 0:
            raise ValueError(f"depth_window must be odd and >= 1, got {self.depth_window}")


@dataclass(frozen=True)
class CalibrationState:
    """Static transforms anchoring the pipeline.

    marker_from_camera is established once, from the first marker
    detection, and never changes for the session. robot_from_marker is
    deployment configuration.
    """

    robot_from_marker: RigidTransform
    marker_from_camera: Optional[RigidTransform] = None
    locked: bool = False


@dataclass(frozen=True)
class TrackedWrist:
    """Filtered wrist sample in the marker frame.

    fresh is False when this tick re-emitted the last accepted position
    (rejected jump or invalid depth).
    """

    position_marker: Point3
    velocity_mps: float
    timestamp_ms: float
    fresh: bool


def calibrate_once(marker_rotation, marker_translation, state: CalibrationState) -> CalibrationState:
    """Lock the camera->marker transform from the first marker detection.

    Subsequent calls are no-ops: the locked state is returned unchanged and
    an AlreadyLocked warning is emitted.
    """
    if state.locked:
        warnings.warn("calibration already locked; marker detection ignored", AlreadyLocked)
        return state
    return replace(
        state,
        marker_from_camera=invert_pose(marker_rotation, marker_translation),
        locked=True,
    )


def median_depth(window) -> float:
    """Median of a depth window in mm, ignoring invalid zeros.

    Even count -> lower median. An all-zero window returns 0, the in-band
    invalid marker.
    """
    values = [float(v) for v in window]
    if not values:
        raise ValueError("depth window must not be empty")
    valid = sorted(v for v in values if v > 0)
    if not valid:
        return 0.0
    return valid[(len(valid) - 1) // 2]


class WristFilter:
    """EMA smoothing with jump rejection; one instance per operator stream.

    Output never moves more than ema_alpha * jump_threshold_m per accepted
    step; after more than max_consecutive_rejects far samples in a row the
    filter re-seeds from the raw sample so a genuine relocation cannot
    deadlock the tracker.
    """

    def __init__(self, cfg: FilterConfig):
        self.cfg = cfg
        self._position: Optional[np.ndarray] = None
        self._velocity = 0.0
        self._t_ms: Optional[float] = None
        self._rejects = 0

    @property
    def seeded(self) -> bool:
        return self._position is not None

    def filter_step(self, raw: Point3, t_ms: float) -> TrackedWrist:
        p = raw.as_array()
        if self._position is None:
            self._position = p
            self._velocity = 0.0
            self._t_ms = t_ms
            self._rejects = 0
            return TrackedWrist(raw, 0.0, t_ms, fresh=True)

        if t_ms <= self._t_ms:
            raise NonMonotonicTimestamp(f"t_ms {t_ms} <= previous {self._t_ms}")

        jump = float(np.linalg.norm(p - self._position))
        if jump > self.cfg.jump_threshold_m:
            self._rejects += 1
            if self._rejects > self.cfg.max_consecutive_rejects:
                return self.reseed(raw, t_ms)
            # Hold the last accepted position; emitted value is bitwise unchanged.
            self._t_ms = t_ms
            return TrackedWrist(Point3.from_array(self._position), self._velocity, t_ms, fresh=False)

        alpha = self.cfg.ema_alpha
        new_pos = alpha * p + (1.0 - alpha) * self._position
        dt_s = (t_ms - self._t_ms) / 1000.0
        raw_velocity = float(np.linalg.norm(new_pos - self._position)) / dt_s
        self._velocity = alpha * raw_velocity + (1.0 - alpha) * self._velocity
        self._position = new_pos
        self._t_ms = t_ms
        self._rejects = 0
        return TrackedWrist(Point3.from_array(new_pos), self._velocity, t_ms, fresh=True)

    def hold(self, t_ms: float) -> TrackedWrist:
        """Emit the last accepted position with fresh=False (no usable sample)."""
        if self._position is None:
            raise NoTrack("no previous wrist sample to hold")
        if t_ms <= self._t_ms:
            raise NonMonotonicTimestamp(f"t_ms {t_ms} <= previous {self._t_ms}")
        self._t_ms = t_ms
        return TrackedWrist(Point3.from_array(self._position), self._velocity, t_ms, fresh=False)

    def reseed(self, raw: Point3, t_ms: float) -> TrackedWrist:
        self._position = raw.as_array()
        self._velocity = 0.0
        self._t_ms = t_ms
        self._rejects = 0
        return TrackedWrist(raw, 0.0, t_ms, fresh=True)


def filter_step(
    raw: Point3, prev: Optional[TrackedWrist], cfg: FilterConfig, t_ms: float
) -> TrackedWrist:
    """Single stateless filter step (seeds a throwaway filter from prev).

    The reject counter only persists across calls on a WristFilter
    instance; use one for streaming input.
    """
    f = WristFilter(cfg)
    if prev is not None:
        f._position = prev.position_marker.as_array()
        f._velocity = prev.velocity_mps
        f._t_ms = prev.timestamp_ms
    return f.filter_step(raw, t_ms)


class WristTracker:
    """Per-frame wrist pipeline: depth median -> back-projection -> filter -> marker frame."""

    def __init__(self, intrinsics: CameraIntrinsics, cfg: Optional[FilterConfig] = None):
        self.intrinsics = intrinsics
        self.cfg = cfg or FilterConfig()
        self.filter = WristFilter(self.cfg)

    def track(self, frame: LandmarkFrame, calib: CalibrationState) -> TrackedWrist:
        if not calib.locked or calib.marker_from_camera is None:
            raise NotCalibrated("marker calibration has not locked yet")
        if frame.wrist is None:
            raise ValueError("frame carries no wrist observation")

        depth = median_depth(frame.wrist.effective_window())
        if depth == 0.0:
            # All-invalid window: hold the previous output, or fail when unseeded.
            held = self.filter.hold(frame.t_ms)
            return self._to_marker(held, calib)

        raw_cam = back_project(
            PixelDepthPoint(frame.wrist.u, frame.wrist.v, depth), self.intrinsics
        )
        filtered = self.filter.filter_step(raw_cam, frame.t_ms)
        return self._to_marker(filtered, calib)

    @staticmethod
    def _to_marker(sample: TrackedWrist, calib: CalibrationState) -> TrackedWrist:
        return replace(
            sample,
            position_marker=apply_transform(calib.marker_from_camera, sample.position_marker),
        )


def track(
    frame: LandmarkFrame,
    calib: CalibrationState,
    intrinsics: CameraIntrinsics,
    cfg: FilterConfig,
    prev_tracker: Optional[WristTracker] = None,
) -> tuple[TrackedWrist, WristTracker]:
    """One-shot convenience over WristTracker for callers without a stream."""
    tracker = prev_tracker or WristTracker(intrinsics, cfg)
    return tracker.track(frame, calib), tracker
