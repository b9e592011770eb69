"""telewrist: vision-driven teleoperation of a simulated 6-DoF arm.

Wrist and hand landmark streams become smooth end-effector targets,
debounced gesture commands and semi-autonomous grasps, with a safety guard
and a deterministic record/replay harness.
"""

from .geometry import (
    CameraIntrinsics,
    InvalidDepth,
    NonOrthonormalRotation,
    PixelDepthPoint,
    Point3,
    RigidTransform,
    RollQuaternion,
    apply_transform,
    back_project,
    compose,
    invert_pose,
)
from .tracking import (
    CalibrationState,
    FilterConfig,
    TrackedWrist,
    WristFilter,
    WristTracker,
    calibrate_once,
    median_depth,
)
from .handpose import (
    GestureClassifier,
    GestureLabel,
    GestureSignal,
    HandLandmarks,
    PalmFrame,
    count_fingers,
    normalize_hand,
    palm_normal,
    roll_quaternion,
    synthetic_hand,
)
from .control import (
    CommandKind,
    ControlMode,
    RobotCommand,
    SharedController,
    TargetPose,
    decide_command,
    map_target,
    mode_select,
)
from .simarm import (
    ArmModel,
    ArmSimulator,
    ArmState,
    DEFAULT_ARM_MODEL,
    GraspOutcome,
    Obstacle,
    SceneObject,
    fk,
    grasp_routine,
    ik,
    select_object,
)
from .engine import EngineConfig, TeleopEngine
from .session import (
    PrecisionReport,
    SessionRecord,
    TrajectorySpec,
    compute_metrics,
    generate_synthetic,
    read_session,
    replay,
    write_session,
)

__version__ = "0.1.0"
