// Console session state: connection role, the latest validated broadcast,
// and everything the render layer shows (badges, prompts, banners).
// Malformed or version-mismatched broadcasts are ignored and counted, never
// rendered.

import { decodeServerMessage, ProtocolError, StateBroadcast } from "./protocol.js";

export type ConnectionState = "connecting" | "operator" | "observer" | "lost";

export interface ViewEvents {
  roleChanged?: boolean;
  stateUpdated?: boolean;
  serverError?: string;
}

export class ConsoleSession {
  connection: ConnectionState = "connecting";
  broadcast: StateBroadcast | null = null;
  protocolErrors = 0;
  serverErrors: string[] = [];
  lastBroadcastAtMs = -Infinity;

  constructor(private readonly stalenessMs: number = 1500) {}

  applyServerMessage(text: string, nowMs: number): ViewEvents {
    let msg;
    try {
      msg = decodeServerMessage(text);
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.protocolErrors += 1;
        return {};
      }
      throw err;
    }
    switch (msg.kind) {
      case "welcome":
        this.connection = msg.role === "operator" ? "operator" : "observer";
        return { roleChanged: true };
      case "error":
        this.serverErrors.push(msg.message);
        return { serverError: msg.message };
      case "state": {
        const prev = this.broadcast;
        this.broadcast = msg.state;
        this.lastBroadcastAtMs = nowMs;
        return { stateUpdated: this.armMoved(prev, msg.state) || prev === null || prev.mode !== msg.state.mode };
      }
    }
  }

  connectionLost(): void {
    this.connection = "lost";
  }

  private armMoved(prev: StateBroadcast | null, cur: StateBroadcast): boolean {
    if (prev === null) return true;
    const a = prev.arm.ee_position;
    const b = cur.arm.ee_position;
    const dist = Math.hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    return dist > 1e-6;
  }

  modeBadge(): string {
    return this.broadcast?.mode ?? "idle";
  }

  safetyBadge(): string {
    return this.broadcast?.arm.safety ?? "ok";
  }

  gestureBadge(): string {
    const g = this.broadcast?.gesture;
    if (!g) return "no hand";
    return `${g.label} (${g.finger_count})${g.stable ? "" : " ?"}`;
  }

  // Operator guidance matching the grasp lifecycle.
  prompt(): string {
    const b = this.broadcast;
    if (!b) return "waiting for state...";
    if (b.mode === "idle") {
      return "hold 1 finger for manual, 2 for semi-autonomous";
    }
    if (b.mode === "manual") {
      return "move wrist to steer; fist closes, open palm opens the gripper";
    }
    if (b.arm.gripper === "holding") {
      return "move to the place zone; open palm to release";
    }
    return "fist to grasp";
  }

  isStale(nowMs: number): boolean {
    return nowMs - this.lastBroadcastAtMs > this.stalenessMs;
  }
}
