// Canvas rendering: top-down (x/y) and side (x/z) orthographic panels of
// the robot workspace, plus DOM badge updates. Pure drawing from the
// latest broadcast; no simulation state lives here.

import { StateBroadcast } from "./protocol.js";
import { ConsoleSession } from "./viewmodel.js";

const WORKSPACE_HALFWIDTH_M = 1.1;

interface Panel {
  x0: number;
  y0: number;
  size: number;
  ax: 0 | 1 | 2; // world axis drawn horizontally
  ay: 0 | 1 | 2; // world axis drawn vertically (up)
  label: string;
}

function toPanel(panel: Panel, p: number[]): [number, number] {
  const scale = panel.size / (2 * WORKSPACE_HALFWIDTH_M);
  return [
    panel.x0 + panel.size / 2 + p[panel.ax] * scale,
    panel.y0 + panel.size / 2 - p[panel.ay] * scale,
  ];
}

function drawCircle(ctx: CanvasRenderingContext2D, panel: Panel, center: number[],
                    radiusM: number, style: string, fill: boolean) {
  const [cx, cy] = toPanel(panel, center);
  const r = (radiusM * panel.size) / (2 * WORKSPACE_HALFWIDTH_M);
  ctx.beginPath();
  ctx.arc(cx, cy, Math.max(r, 2), 0, Math.PI * 2);
  if (fill) {
    ctx.fillStyle = style;
    ctx.fill();
  } else {
    ctx.strokeStyle = style;
    ctx.stroke();
  }
}

function drawPanel(ctx: CanvasRenderingContext2D, panel: Panel, state: StateBroadcast) {
  ctx.strokeStyle = "#334";
  ctx.strokeRect(panel.x0, panel.y0, panel.size, panel.size);
  ctx.fillStyle = "#889";
  ctx.font = "12px sans-serif";
  ctx.fillText(panel.label, panel.x0 + 6, panel.y0 + 16);

  for (const zone of state.zones) {
    drawCircle(ctx, panel, zone.center, zone.radius_m, "rgba(80, 200, 120, 0.25)", true);
  }
  for (const obstacle of state.obstacles) {
    drawCircle(ctx, panel, obstacle.center, obstacle.radius_m, "rgba(220, 80, 80, 0.5)", true);
  }
  for (const obj of state.objects) {
    const held = state.arm.held_object === obj.id;
    drawCircle(ctx, panel, held ? state.arm.ee_position : obj.position, 0.03,
               held ? "#ffd24d" : "#4db2ff", true);
  }

  // Arm skeleton from the broadcast joint origins.
  ctx.strokeStyle = state.arm.safety === "blocked" ? "#ff5050" : "#d0d4ff";
  ctx.lineWidth = 3;
  ctx.beginPath();
  const origins = state.arm.joint_origins;
  const [bx, by] = toPanel(panel, origins[0]);
  ctx.moveTo(bx, by);
  for (let i = 1; i < origins.length; i++) {
    const [px, py] = toPanel(panel, origins[i]);
    ctx.lineTo(px, py);
  }
  ctx.stroke();
  ctx.lineWidth = 1;
  drawCircle(ctx, panel, state.arm.ee_position, 0.02,
             state.arm.gripper === "holding" ? "#ffd24d" : "#ffffff", true);

  if (state.wrist) {
    drawCircle(ctx, panel, state.wrist.robot, 0.015,
               state.wrist.fresh ? "#66ff99" : "#777777", false);
  }
}

export function renderScene(canvas: HTMLCanvasElement, state: StateBroadcast | null): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.fillStyle = "#14141c";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (!state) {
    ctx.fillStyle = "#889";
    ctx.font = "14px sans-serif";
    ctx.fillText("waiting for state broadcasts...", 20, 30);
    return;
  }
  const size = Math.min(canvas.width / 2 - 12, canvas.height - 8);
  drawPanel(ctx, { x0: 4, y0: 4, size, ax: 0, ay: 1, label: "top (x/y)" }, state);
  drawPanel(ctx, { x0: canvas.width / 2 + 8, y0: 4, size, ax: 0, ay: 2, label: "side (x/z)" }, state);
}

export interface BadgeElements {
  mode: HTMLElement;
  safety: HTMLElement;
  gesture: HTMLElement;
  prompt: HTMLElement;
  connection: HTMLElement;
}

export function renderBadges(el: BadgeElements, session: ConsoleSession, nowMs: number): void {
  el.mode.textContent = session.modeBadge();
  el.mode.dataset.value = session.modeBadge();

  const safety = session.safetyBadge();
  el.safety.textContent = safety;
  el.safety.dataset.value = safety;
  el.safety.style.background =
    safety === "blocked" ? "#c0392b" : safety === "clamped" ? "#b8860b" : "#1f7a4d";

  el.gesture.textContent = session.gestureBadge();
  el.prompt.textContent = session.prompt();

  const status = session.connection + (session.isStale(nowMs) ? " (stale)" : "");
  el.connection.textContent = status;
  el.connection.style.background = session.connection === "lost" ? "#c0392b" : "#2c3e50";
}
