// Wire schema for the gateway connection. Mirrors protocol/PROTOCOL.md;
// the golden fixtures under protocol/fixtures/ are the shared contract
// with the gateway's own test suite.

export const PROTOCOL_VERSION = 1;

export interface WristObservation {
  u: number;
  v: number;
  depth_mm: number;
  window: number[];
}

export interface MarkerDetection {
  rotation: number[][];
  translation: number[];
}

export interface LandmarkFrame {
  t_ms: number;
  wrist?: WristObservation | null;
  hand?: number[][] | null;
  marker?: MarkerDetection | null;
}

export interface GestureInfo {
  label: string;
  finger_count: number;
  stable: boolean;
}

export interface WristInfo {
  marker: number[];
  robot: number[];
  fresh: boolean;
  velocity_mps: number;
}

export interface ArmInfo {
  q: number[];
  ee_position: number[];
  ee_roll_quaternion: number[];
  joint_origins: number[][];
  gripper: string;
  held_object: string | null;
  safety: string;
}

export interface SceneObjectInfo {
  id: string;
  class_label: string;
  position: number[];
  confidence: number;
  graspable: boolean;
}

export interface ObstacleInfo {
  center: number[];
  radius_m: number;
}

export interface ZoneInfo {
  id: string;
  center: number[];
  radius_m: number;
}

export interface StateBroadcast {
  t_ms: number;
  mode: string;
  gesture: GestureInfo | null;
  wrist: WristInfo | null;
  arm: ArmInfo;
  objects: SceneObjectInfo[];
  obstacles: ObstacleInfo[];
  zones: ZoneInfo[];
  last_command: { kind: string; target?: number[]; object_id?: string } | null;
}

export type ServerMessage =
  | { kind: "welcome"; role: string; server: string }
  | { kind: "error"; message: string }
  | { kind: "state"; state: StateBroadcast };

export class ProtocolError extends Error {}

function isVec3(v: unknown): v is number[] {
  return Array.isArray(v) && v.length === 3 && v.every((x) => typeof x === "number" && isFinite(x));
}

export function validateFrame(frame: LandmarkFrame): void {
  if (typeof frame.t_ms !== "number" || !isFinite(frame.t_ms)) {
    throw new ProtocolError("frame t_ms must be a finite number");
  }
  const wrist = frame.wrist ?? null;
  const hand = frame.hand ?? null;
  const marker = frame.marker ?? null;
  if (wrist === null && hand === null && marker === null) {
    throw new ProtocolError("frame must carry at least one of wrist/hand/marker");
  }
  if (wrist !== null) {
    for (const key of ["u", "v", "depth_mm"] as const) {
      if (typeof wrist[key] !== "number" || !isFinite(wrist[key])) {
        throw new ProtocolError(`wrist.${key} must be a finite number`);
      }
    }
    if (!Array.isArray(wrist.window) || wrist.window.some((x) => typeof x !== "number")) {
      throw new ProtocolError("wrist.window must be an array of numbers");
    }
  }
  if (hand !== null) {
    if (!Array.isArray(hand) || hand.length !== 21 || !hand.every(isVec3)) {
      throw new ProtocolError("hand must be 21 [x,y,z] landmarks");
    }
  }
  if (marker !== null) {
    if (
      !Array.isArray(marker.rotation) ||
      marker.rotation.length !== 3 ||
      !marker.rotation.every(isVec3) ||
      !isVec3(marker.translation)
    ) {
      throw new ProtocolError("marker must carry a 3x3 rotation and a 3-vector translation");
    }
  }
}

export function encodeHello(role: "operator" | "observer"): string {
  return JSON.stringify({ type: "hello", v: PROTOCOL_VERSION, role });
}

export function encodeFrame(frame: LandmarkFrame): string {
  validateFrame(frame);
  const body: Record<string, unknown> = { type: "frame", v: PROTOCOL_VERSION, t_ms: frame.t_ms };
  if (frame.wrist != null) body.wrist = frame.wrist;
  if (frame.hand != null) body.hand = frame.hand;
  if (frame.marker != null) body.marker = frame.marker;
  return JSON.stringify(body);
}

export function encodeReset(): string {
  return JSON.stringify({ type: "reset", v: PROTOCOL_VERSION });
}

export function encodeEstop(): string {
  return JSON.stringify({ type: "estop", v: PROTOCOL_VERSION });
}

function validateState(d: Record<string, unknown>): StateBroadcast {
  if (typeof d.t_ms !== "number" || typeof d.mode !== "string") {
    throw new ProtocolError("state requires numeric t_ms and string mode");
  }
  const arm = d.arm as ArmInfo | undefined;
  if (
    !arm ||
    !Array.isArray(arm.q) ||
    arm.q.length !== 6 ||
    !isVec3(arm.ee_position) ||
    !Array.isArray(arm.ee_roll_quaternion) ||
    arm.ee_roll_quaternion.length !== 4 ||
    !Array.isArray(arm.joint_origins) ||
    !arm.joint_origins.every(isVec3) ||
    typeof arm.gripper !== "string" ||
    typeof arm.safety !== "string"
  ) {
    throw new ProtocolError("state.arm is malformed");
  }
  return {
    t_ms: d.t_ms,
    mode: d.mode,
    gesture: (d.gesture as GestureInfo | null) ?? null,
    wrist: (d.wrist as WristInfo | null) ?? null,
    arm,
    objects: (d.objects as SceneObjectInfo[]) ?? [],
    obstacles: (d.obstacles as ObstacleInfo[]) ?? [],
    zones: (d.zones as ZoneInfo[]) ?? [],
    last_command: (d.last_command as StateBroadcast["last_command"]) ?? null,
  };
}

// Parses any server-sent message; throws ProtocolError on malformed input
// or a schema version this console does not speak.
export function decodeServerMessage(text: string): ServerMessage {
  let d: Record<string, unknown>;
  try {
    d = JSON.parse(text);
  } catch {
    throw new ProtocolError("not valid JSON");
  }
  if (typeof d !== "object" || d === null) throw new ProtocolError("message must be an object");
  if (d.v !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported protocol version ${String(d.v)}`);
  }
  switch (d.type) {
    case "welcome":
      return { kind: "welcome", role: String(d.role), server: String(d.server ?? "") };
    case "error":
      return { kind: "error", message: String(d.message ?? "") };
    case "state":
      return { kind: "state", state: validateState(d) };
    default:
      throw new ProtocolError(`unexpected server message type ${String(d.type)}`);
  }
}
