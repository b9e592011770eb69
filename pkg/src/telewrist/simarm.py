"""Simulated 6-DoF arm with jaw gripper.

Stands in for the real platform: forward kinematics over a serial chain of
single-axis revolute joints, damped-least-squares inverse kinematics for
position + roll, first-order Cartesian tracking dynamics, and an analytic
safety guard built from per-link bounding spheres and obstacle spheres.

The default link parameters approximate an arm with ~0.98 m of reach; they
are configuration data, not a model of any specific product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Iterable, Optional

import numpy as np

from .control import CommandKind, NoTarget, RobotCommand, TargetPose
from .geometry import Point3, RollQuaternion

OBSTACLE_INFLATION_M = 0.02
GRASP_RADIUS_M = 0.05


class JointLimit(ValueError):
    """Joint angle outside the model's limits."""


class GraspOutcome(Enum):
    SUCCEEDED = "grasp_succeeded"
    FAILED = "grasp_failed"
    ABORTED = "aborted"


class GripperState(Enum):
    OPEN = "open"
    CLOSED = "closed"
    HOLDING = "holding"


class SafetyStatus(Enum):
    OK = "ok"
    CLAMPED = "clamped"
    BLOCKED = "blocked"


_AXES = {
    "x": np.array([1.0, 0.0, 0.0]),
    "y": np.array([0.0, 1.0, 0.0]),
    "z": np.array([0.0, 0.0, 1.0]),
}


def _axis_rotation(axis: str, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    if axis == "x":
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == "y":
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class JointSpec:
    """One revolute joint: rotation axis, the link offset that follows it, limits."""

    axis: str
    offset: tuple[float, float, float]
    lower: float
    upper: float

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValueError(f"axis must be x/y/z, got {self.axis!r}")
        if self.lower >= self.upper:
            raise ValueError(f"empty joint range [{self.lower}, {self.upper}]")


@dataclass(frozen=True)
class ArmModel:
    name: str
    joints: tuple[JointSpec, ...]
    reach_m: float = 0.98
    time_constant_s: float = 0.35
    link_radius_m: float = 0.05
    # Targets are clamped this far inside the reach sphere to keep the
    # solver away from the fully-stretched singularity.
    reach_margin_m: float = 0.02
    workspace_min: tuple[float, float, float] = (-1.05, -1.05, 0.0)
    workspace_max: tuple[float, float, float] = (1.05, 1.05, 1.05)

    def __post_init__(self):
        if len(self.joints) != 6:
            raise ValueError(f"model must have 6 joints, got {len(self.joints)}")
        # The chain is laid out so all link offsets can align; the analytic
        # maximum of |FK| is then the plain sum of offset lengths.
        analytic = sum(float(np.linalg.norm(j.offset)) for j in self.joints)
        if abs(analytic - self.reach_m) > 1e-3:
            raise ValueError(
                f"declared reach {self.reach_m} differs from analytic max {analytic:.4f}"
            )
        object.__setattr__(self, "_offsets", np.array([j.offset for j in self.joints]))
        object.__setattr__(self, "_axes", [j.axis for j in self.joints])
        object.__setattr__(self, "_lower", np.array([j.lower for j in self.joints]))
        object.__setattr__(self, "_upper", np.array([j.upper for j in self.joints]))

    @property
    def lower_limits(self) -> np.ndarray:
        return self._lower

    @property
    def upper_limits(self) -> np.ndarray:
        return self._upper

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self._lower, self._upper)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "joints": [
                {"axis": j.axis, "offset": list(j.offset), "lower": j.lower, "upper": j.upper}
                for j in self.joints
            ],
            "reach_m": self.reach_m,
            "time_constant_s": self.time_constant_s,
            "link_radius_m": self.link_radius_m,
            "reach_margin_m": self.reach_margin_m,
            "workspace_min": list(self.workspace_min),
            "workspace_max": list(self.workspace_max),
        }

    @staticmethod
    def from_dict(d: dict) -> "ArmModel":
        return ArmModel(
            name=d["name"],
            joints=tuple(
                JointSpec(j["axis"], tuple(j["offset"]), j["lower"], j["upper"])
                for j in d["joints"]
            ),
            reach_m=d.get("reach_m", 0.98),
            time_constant_s=d.get("time_constant_s", 0.35),
            link_radius_m=d.get("link_radius_m", 0.05),
            reach_margin_m=d.get("reach_margin_m", 0.02),
            workspace_min=tuple(d.get("workspace_min", (-1.05, -1.05, 0.0))),
            workspace_max=tuple(d.get("workspace_max", (1.05, 1.05, 1.05))),
        )


DEFAULT_ARM_MODEL = ArmModel(
    name="desk-6dof",
    joints=(
        JointSpec("z", (0.0, 0.0, 0.0), -2.96, 2.96),    # base yaw
        JointSpec("y", (0.35, 0.0, 0.0), -1.92, 1.92),   # shoulder pitch
        JointSpec("y", (0.31, 0.0, 0.0), -2.53, 2.53),   # elbow pitch
        JointSpec("x", (0.18, 0.0, 0.0), -2.96, 2.96),   # forearm roll
        JointSpec("y", (0.14, 0.0, 0.0), -2.09, 2.09),   # wrist pitch
        JointSpec("x", (0.0, 0.0, 0.0), -2.96, 2.96),    # tool roll
    ),
)

# FK of the all-zero joint vector: arm stretched along +x at full reach.
DEFAULT_HOME_POSITION = Point3(0.98, 0.0, 0.0)

# Comfortable elbow-bent start for the simulator, away from singularities:
# shoulder raised, elbow and wrist folded forward, ee near (0.67, 0, 0.23).
READY_Q = np.array([0.0, -1.2, 1.14, 0.0, 1.2, 0.0])


@dataclass(frozen=True)
class FKFrames:
    """Full forward-kinematics result for one joint vector."""

    position: np.ndarray            # ee position, (3,)
    rotation: np.ndarray            # ee orientation, (3, 3)
    joint_origins: np.ndarray       # (7, 3): base plus the origin after each link
    joint_axes: np.ndarray          # (6, 3): world-frame joint axes


def fk_frames(model: ArmModel, q) -> FKFrames:
    rot = np.eye(3)
    pos = np.zeros(3)
    origins = np.zeros((7, 3))
    axes = np.zeros((6, 3))
    offsets = model._offsets
    for i, axis in enumerate(model._axes):
        axes[i] = rot @ _AXES[axis]
        rot = rot @ _axis_rotation(axis, float(q[i]))
        pos = pos + rot @ offsets[i]
        origins[i + 1] = pos
    return FKFrames(position=pos, rotation=rot, joint_origins=origins, joint_axes=axes)


def extract_roll(rotation: np.ndarray) -> float:
    """Roll about the base x-axis in the yaw-pitch-roll decomposition.

    Undefined at pitch = +/-90 deg; callers treat that as an unconstrained
    roll (see the gimbal guard in ik).
    """
    return math.atan2(rotation[2, 1], rotation[2, 2])


def fk(model: ArmModel, q) -> tuple[Point3, RollQuaternion]:
    """End-effector pose for a joint vector within limits."""
    q = np.asarray(q, dtype=np.float64)
    if np.any(q < model.lower_limits - 1e-12) or np.any(q > model.upper_limits + 1e-12):
        raise JointLimit(f"joint vector {q} outside limits")
    frames = fk_frames(model, q)
    return Point3.from_array(frames.position), RollQuaternion.from_roll(extract_roll(frames.rotation))


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _task_jacobian(frames: FKFrames) -> np.ndarray:
    """4x6 Jacobian of (ee position, extracted roll) w.r.t. joint angles."""
    a = frames.joint_axes  # (6, 3) rows
    d = frames.position - frames.joint_origins[:6]
    j_pos = np.empty((6, 3))  # rows = axis x lever arm, written out directly
    j_pos[:, 0] = a[:, 1] * d[:, 2] - a[:, 2] * d[:, 1]
    j_pos[:, 1] = a[:, 2] * d[:, 0] - a[:, 0] * d[:, 2]
    j_pos[:, 2] = a[:, 0] * d[:, 1] - a[:, 1] * d[:, 0]
    j_ang = a
    r = frames.rotation
    ry, rz = r[2, 1], r[2, 2]
    denom = ry * ry + rz * rz
    if denom < 1e-9:
        droll_domega = np.zeros(3)
    else:
        # d(atan2(ry, rz)) under R' = [omega]x R.
        droll_domega = np.array(
            [
                (rz * r[1, 1] - ry * r[1, 2]) / denom,
                (ry * r[0, 2] - rz * r[0, 1]) / denom,
                0.0,
            ]
        )
    jac = np.zeros((4, 6))
    jac[:3, :] = j_pos.T
    jac[3, :] = j_ang @ droll_domega
    return jac


@dataclass(frozen=True)
class IKResult:
    q: np.ndarray
    converged: bool
    position_residual_m: float
    roll_residual_rad: float
    iterations: int


def ik(
    target: TargetPose,
    q_seed,
    model: ArmModel,
    damping: float = 0.05,
    max_iterations: int = 100,
    pos_tol: float = 1e-4,
    roll_tol: float = 1e-3,
) -> IKResult:
    """Damped-least-squares IK for position plus roll.

    Joint limits are enforced by clamping every iterate, with pinned joints
    dropped from the step so the solver slides along the limit surface. A
    non-converged seed falls back to canonical restart seeds; on failure the
    best iterate is returned with converged=False and honest residuals.
    """
    best: Optional[IKResult] = None
    for seed in (q_seed, READY_Q, np.zeros(6)):
        result = _ik_once(target, seed, model, damping, max_iterations, pos_tol, roll_tol)
        if result.converged:
            return result
        if best is None or result.position_residual_m < best.position_residual_m:
            best = result
    return best


def _ik_errors(model: ArmModel, frames: FKFrames, target_p: np.ndarray, target_roll: float):
    e_pos = target_p - frames.position
    hyp = math.hypot(frames.rotation[2, 1], frames.rotation[2, 2])
    if hyp < 1e-6:
        roll_err = 0.0  # roll unobservable at gimbal; leave unconstrained
    else:
        roll_err = _wrap_angle(target_roll - extract_roll(frames.rotation))
    return e_pos, roll_err


def _ik_once(
    target: TargetPose,
    q_seed,
    model: ArmModel,
    damping: float,
    max_iterations: int,
    pos_tol: float,
    roll_tol: float,
) -> IKResult:
    target_p = target.position_robot.as_array()
    target_roll = target.orientation.roll_angle
    q = model.clamp(np.asarray(q_seed, dtype=np.float64).copy())
    lam2 = damping * damping

    best_q = q.copy()
    best_pos = math.inf
    best_roll = math.inf
    iterations = 0
    stalled = 0
    # Stage 1 solves position alone (the combined problem has bad basins
    # near joint limits); stage 2 polishes position + roll together.
    for stage in ("position", "full"):
        stalled = 0
        converged_stage = False
        while iterations <= max_iterations:
            frames = fk_frames(model, q)
            e_pos, roll_err = _ik_errors(model, frames, target_p, target_roll)
            pos_err = float(np.linalg.norm(e_pos))
            if pos_err + 0.1 * abs(roll_err) < best_pos + 0.1 * best_roll - 1e-15:
                best_q = q.copy()
                best_pos = pos_err
                best_roll = abs(roll_err)
                stalled = 0
            else:
                stalled += 1
            if pos_err < pos_tol and abs(roll_err) < roll_tol:
                return IKResult(q, True, pos_err, abs(roll_err), iterations)
            if stage == "position" and pos_err < pos_tol:
                converged_stage = True
                break  # move on to the combined stage
            # No progress for a dozen iterations means a joint limit or an
            # infeasible roll; stop burning the budget.
            if iterations == max_iterations or stalled > 12:
                break
            jac4 = _task_jacobian(frames)
            if stage == "position":
                jac = jac4[:3]
                err = e_pos
            else:
                jac = jac4
                err = np.array([e_pos[0], e_pos[1], e_pos[2], roll_err])
            reg = lam2 * np.eye(len(err))
            # Joints pinned at a limit by the raw step are removed from it so
            # the solver slides along the limit surface instead of stalling.
            pinned = np.zeros(6, dtype=bool)
            for _ in range(2):
                jac_free = jac.copy()
                jac_free[:, pinned] = 0.0
                dq = jac_free.T @ np.linalg.solve(jac_free @ jac_free.T + reg, err)
                q_new = model.clamp(q + dq)
                newly_pinned = (
                    ((q_new <= model.lower_limits) & (dq < 0))
                    | ((q_new >= model.upper_limits) & (dq > 0))
                ) & ~pinned
                if not newly_pinned.any():
                    break
                pinned |= newly_pinned
            q = q_new
            iterations += 1
        if not converged_stage:
            q = best_q.copy()
    return IKResult(best_q, False, best_pos, best_roll, iterations)


# -- scene ------------------------------------------------------------------


@dataclass(frozen=True)
class SceneObject:
    id: str
    class_label: str
    position: Point3
    confidence: float
    graspable: bool = True

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class Obstacle:
    center: Point3
    radius_m: float

    def __post_init__(self):
        if self.radius_m <= 0:
            raise ValueError(f"obstacle radius must be > 0, got {self.radius_m}")


@dataclass(frozen=True)
class Zone:
    """Named region of the robot workspace (e.g. the place target)."""

    id: str
    center: Point3
    radius_m: float


def select_object(
    objects: Iterable[SceneObject], ee: Point3, allowed: Iterable[str]
) -> SceneObject:
    """Pick the grasp target: highest confidence, proximity breaks near-ties.

    Confidences within 1e-6 of the maximum count as tied; the closest of
    those to the end effector wins, with the object id as the final
    deterministic tie-break.
    """
    allowed = set(allowed)
    eligible = [o for o in objects if o.graspable and o.class_label in allowed]
    if not eligible:
        raise NoTarget("no graspable object of an allowed class in the scene")
    best_conf = max(o.confidence for o in eligible)
    tied = [o for o in eligible if best_conf - o.confidence < 1e-6]
    return min(tied, key=lambda o: (ee.distance_to(o.position), o.id))


# -- arm state + safety -------------------------------------------------------


@dataclass(frozen=True)
class ArmState:
    q: np.ndarray
    ee_position: Point3
    ee_orientation: RollQuaternion
    gripper: GripperState
    held_object: Optional[str]
    safety: SafetyStatus

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)


def _make_state(
    model: ArmModel,
    q: np.ndarray,
    gripper: GripperState,
    held_object: Optional[str],
    safety: SafetyStatus,
) -> ArmState:
    frames = fk_frames(model, q)
    return ArmState(
        q=q,
        ee_position=Point3.from_array(frames.position),
        ee_orientation=RollQuaternion.from_roll(extract_roll(frames.rotation)),
        gripper=gripper,
        held_object=held_object,
        safety=safety,
    )


def link_spheres(model: ArmModel, joint_origins: np.ndarray) -> list[tuple[np.ndarray, float, int]]:
    """Bounding spheres covering each non-degenerate link.

    Each link is covered by a chain of spheres spaced at most one link
    radius apart, with radius sqrt(r^2 + h^2) (h = half spacing) so the
    whole link tube lies inside the union. Returned as (center, radius,
    link index) tuples.
    """
    r = model.link_radius_m
    spheres = []
    for i in range(len(joint_origins) - 1):
        a, b = joint_origins[i], joint_origins[i + 1]
        length = float(np.linalg.norm(b - a))
        if length < 1e-9:
            continue
        n = max(int(math.ceil(length / r)), 1)
        h = length / (2 * n)
        radius = math.hypot(r, h)
        for k in range(n):
            center = a + ((2 * k + 1) / (2 * n)) * (b - a)
            spheres.append((center, radius, i))
    return spheres


def collision_violation(
    model: ArmModel, frames: FKFrames, obstacles: Iterable[Obstacle]
) -> Optional[str]:
    """Describe the first link-sphere violation, or None when clear.

    Self-collision considers non-adjacent link pairs only; adjacent links
    legitimately meet at their shared joint.
    """
    spheres = link_spheres(model, frames.joint_origins)
    centers = np.array([s[0] for s in spheres])
    radii = np.array([s[1] for s in spheres])
    links = np.array([s[2] for s in spheres])
    n = len(spheres)
    for si in range(n):
        non_adjacent = np.abs(links - links[si]) >= 2
        non_adjacent[: si + 1] = False
        if non_adjacent.any():
            d = np.linalg.norm(centers[non_adjacent] - centers[si], axis=1)
            hit = d < radii[non_adjacent] + radii[si]
            if hit.any():
                other = links[non_adjacent][hit][0]
                return f"self-collision between links {links[si]} and {other}"
    for obs in obstacles:
        d = np.linalg.norm(centers - obs.center.as_array(), axis=1)
        hit = d < radii + obs.radius_m
        if hit.any():
            return f"link {links[hit][0]} intersects obstacle at {obs.center}"
    return None


def _segment_hits_sphere(a: np.ndarray, b: np.ndarray, center: np.ndarray, radius: float) -> bool:
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return bool(np.linalg.norm(a - center) < radius)
    t = float(np.clip((center - a) @ ab / denom, 0.0, 1.0))
    return bool(np.linalg.norm(a + t * ab - center) < radius)


class ArmSimulator:
    """Owns one arm + scene; stepped by a single caller at a fixed dt.

    Commands set the Cartesian target and gripper action; substeps advance
    the first-order tracking dynamics, solve IK, and refuse any candidate
    that violates the sphere guard (the pose is then left bitwise
    unchanged with safety=blocked).
    """

    def __init__(
        self,
        model: ArmModel = DEFAULT_ARM_MODEL,
        obstacles: Iterable[Obstacle] = (),
        objects: Iterable[SceneObject] = (),
        allowed_classes: Iterable[str] = (),
        q0=None,
    ):
        self.model = model
        self.obstacles = tuple(obstacles)
        self.objects: dict[str, SceneObject] = {o.id: o for o in objects}
        self.allowed_classes = tuple(allowed_classes)
        q_start = model.clamp(np.asarray(READY_Q if q0 is None else q0, dtype=np.float64))
        self.state = _make_state(model, q_start, GripperState.OPEN, None, SafetyStatus.OK)
        self._target_pos: Optional[np.ndarray] = None
        self._target_roll = self.state.ee_orientation.roll_angle
        self._pending_safety = SafetyStatus.OK

    # -- commands -------------------------------------------------------------

    def apply_command(self, cmd: RobotCommand) -> ArmState:
        if cmd.kind is CommandKind.MOVE_EE:
            self._apply_move(cmd.target_pose)
        elif cmd.kind is CommandKind.GRIPPER_CLOSE:
            self._close_gripper()
        elif cmd.kind in (CommandKind.GRIPPER_OPEN, CommandKind.RELEASE_OBJECT):
            self._open_gripper()
        elif cmd.kind is CommandKind.HOLD:
            self._target_pos = None
            self._pending_safety = SafetyStatus.OK
            self.state = replace(self.state, safety=SafetyStatus.OK)
        # grasp_object is orchestrated by the engine via grasp_routine.
        return self.state

    def _apply_move(self, pose: TargetPose) -> None:
        raw = pose.position_robot.as_array()
        clamped, was_clamped = self._clamp_target(raw)
        ee = self.state.ee_position.as_array()
        for obs in self.obstacles:
            if _segment_hits_sphere(ee, clamped, obs.center.as_array(),
                                    obs.radius_m + OBSTACLE_INFLATION_M):
                self._target_pos = None
                self._pending_safety = SafetyStatus.BLOCKED
                self.state = replace(self.state, safety=SafetyStatus.BLOCKED)
                return
        self._target_pos = clamped
        self._target_roll = pose.orientation.roll_angle
        self._pending_safety = SafetyStatus.CLAMPED if was_clamped else SafetyStatus.OK

    def _clamp_target(self, p: np.ndarray) -> tuple[np.ndarray, bool]:
        clamped = np.clip(p, self.model.workspace_min, self.model.workspace_max)
        max_radius = self.model.reach_m - self.model.reach_margin_m
        norm = float(np.linalg.norm(clamped))
        if norm > max_radius:
            clamped = clamped * (max_radius / norm)
        return clamped, bool(np.any(clamped != p))

    def _close_gripper(self) -> None:
        if self.state.gripper is GripperState.HOLDING:
            return
        ee = self.state.ee_position
        grabbed = None
        for obj in self.objects.values():
            if obj.graspable and ee.distance_to(obj.position) <= GRASP_RADIUS_M:
                if grabbed is None or ee.distance_to(obj.position) < ee.distance_to(grabbed.position):
                    grabbed = obj
        if grabbed is not None:
            self.state = replace(self.state, gripper=GripperState.HOLDING, held_object=grabbed.id)
        else:
            self.state = replace(self.state, gripper=GripperState.CLOSED)

    def _open_gripper(self) -> None:
        if self.state.gripper is GripperState.HOLDING and self.state.held_object:
            # Dropped objects stay where they were released.
            obj = self.objects[self.state.held_object]
            self.objects[obj.id] = replace(obj, position=self.state.ee_position)
        self.state = replace(self.state, gripper=GripperState.OPEN, held_object=None)

    # -- dynamics ---------------------------------------------------------------

    def substep(self, dt_s: float) -> ArmState:
        if not (0.0 < dt_s <= 0.5):
            raise ValueError(f"dt_s must be in (0, 0.5], got {dt_s}")
        if self._target_pos is None:
            self._carry_held_object()
            return self.state

        ee = self.state.ee_position.as_array()
        decay = 1.0 - math.exp(-dt_s / self.model.time_constant_s)
        candidate = ee + decay * (self._target_pos - ee)
        roll = self.state.ee_orientation.roll_angle
        roll_cand = roll + decay * _wrap_angle(self._target_roll - roll)

        result = ik(
            TargetPose(Point3.from_array(candidate), RollQuaternion.from_roll(roll_cand)),
            self.state.q,
            self.model,
            max_iterations=60,
            pos_tol=1e-6,
            roll_tol=1e-4,
        )
        # Position governs acceptance; roll is tracked best-effort because
        # close-in poses can make the roll constraint infeasible. Rejection
        # clears the target: state and target are fixed, so retrying the
        # identical solve every substep cannot succeed.
        if result.position_residual_m > 1e-4:
            self._target_pos = None
            self.state = replace(self.state, safety=SafetyStatus.BLOCKED)
            return self.state
        frames = fk_frames(self.model, result.q)
        if collision_violation(self.model, frames, self.obstacles) is not None:
            self._target_pos = None
            self.state = replace(self.state, safety=SafetyStatus.BLOCKED)
            return self.state

        self.state = _make_state(
            self.model, result.q, self.state.gripper, self.state.held_object, self._pending_safety
        )
        self._carry_held_object()
        return self.state

    def step(self, cmd: RobotCommand, dt_s: float) -> ArmState:
        """Apply one command and advance the dynamics by dt_s."""
        self.apply_command(cmd)
        return self.substep(dt_s)

    def _carry_held_object(self) -> None:
        if self.state.gripper is GripperState.HOLDING and self.state.held_object:
            obj = self.objects[self.state.held_object]
            self.objects[obj.id] = replace(obj, position=self.state.ee_position)

    # -- scene helpers ------------------------------------------------------------

    def object(self, object_id: str) -> SceneObject:
        if object_id not in self.objects:
            raise NoTarget(f"object {object_id!r} not in scene")
        return self.objects[object_id]

    def select_grasp_target(self) -> SceneObject:
        return select_object(self.objects.values(), self.state.ee_position, self.allowed_classes)

    @property
    def active_target(self) -> Optional[Point3]:
        return None if self._target_pos is None else Point3.from_array(self._target_pos)


def grasp_routine(
    sim: ArmSimulator,
    object_id: str,
    dt_s: float,
    abort: Optional[Callable[[], bool]] = None,
    pre_grasp_height_m: float = 0.10,
    settle_tol_m: float = 0.02,
    phase_timeout_s: float = 8.0,
):
    """Autonomous approach-grasp-lift sequence; yields one ArmState per substep.

    Generator return value is the terminal GraspOutcome. The operator abort
    callback is polled every substep; an abort opens the gripper and holds.
    """
    obj = sim.object(object_id)
    hold_roll = sim.state.ee_orientation
    above = Point3(obj.position.x, obj.position.y, obj.position.z + pre_grasp_height_m)

    def _move_phase(target: Point3):
        sim.apply_command(
            RobotCommand(CommandKind.MOVE_EE, 0.0, target_pose=TargetPose(target, hold_roll))
        )
        elapsed = 0.0
        while elapsed < phase_timeout_s:
            if abort is not None and abort():
                return "aborted"
            state = sim.substep(dt_s)
            elapsed += dt_s
            yield state
            if state.safety is SafetyStatus.BLOCKED:
                return "blocked"
            if state.ee_position.distance_to(target) < settle_tol_m:
                return "reached"
        return "timeout"

    def _cleanup_abort():
        sim.apply_command(RobotCommand(CommandKind.GRIPPER_OPEN, 0.0))
        sim.apply_command(RobotCommand(CommandKind.HOLD, 0.0))

    for phase_target in (above, obj.position):
        outcome = yield from _move_phase(phase_target)
        if outcome == "aborted":
            _cleanup_abort()
            return GraspOutcome.ABORTED
        if outcome != "reached":
            return GraspOutcome.FAILED

    sim.apply_command(RobotCommand(CommandKind.GRIPPER_CLOSE, 0.0))
    yield sim.state
    if sim.state.gripper is not GripperState.HOLDING:
        return GraspOutcome.FAILED

    outcome = yield from _move_phase(
        Point3(obj.position.x, obj.position.y, obj.position.z + pre_grasp_height_m)
    )
    if outcome == "aborted":
        _cleanup_abort()
        return GraspOutcome.ABORTED
    if outcome != "reached":
        return GraspOutcome.FAILED
    return GraspOutcome.SUCCEEDED
