import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

import { ConsoleSession } from "../src/viewmodel.js";

const fixturesDir = fileURLToPath(new URL("../../protocol/fixtures/", import.meta.url));
const stateFixture = readFileSync(fixturesDir + "state.json", "utf-8");
const welcomeFixture = readFileSync(fixturesDir + "welcome.json", "utf-8");

function stateWith(patch: (d: any) => void): string {
  const d = JSON.parse(stateFixture);
  patch(d);
  return JSON.stringify(d);
}

describe("ConsoleSession", () => {
  it("welcome sets the connection role", () => {
    const s = new ConsoleSession();
    expect(s.connection).toBe("connecting");
    const ev = s.applyServerMessage(welcomeFixture, 0);
    expect(ev.roleChanged).toBe(true);
    expect(s.connection).toBe("operator");
  });

  it("state broadcasts update the badges", () => {
    const s = new ConsoleSession();
    s.applyServerMessage(stateFixture, 10);
    expect(s.modeBadge()).toBe("manual");
    expect(s.safetyBadge()).toBe("ok");
    expect(s.gestureBadge()).toContain("neutral");
  });

  it("never renders schema-version mismatches, but counts them", () => {
    const s = new ConsoleSession();
    s.applyServerMessage(stateWith((d) => (d.v = 99)), 10);
    expect(s.broadcast).toBeNull();
    expect(s.protocolErrors).toBe(1);
    s.applyServerMessage("{broken", 11);
    expect(s.protocolErrors).toBe(2);
    expect(s.broadcast).toBeNull();
  });

  it("mode change reports a state update event", () => {
    const s = new ConsoleSession();
    s.applyServerMessage(stateFixture, 10);
    const ev = s.applyServerMessage(stateWith((d) => (d.mode = "idle")), 20);
    expect(ev.stateUpdated).toBe(true);
    expect(s.modeBadge()).toBe("idle");
  });

  it("arm motion reports a state update event", () => {
    const s = new ConsoleSession();
    s.applyServerMessage(stateFixture, 10);
    const moved = stateWith((d) => {
      d.arm.ee_position = [
        d.arm.ee_position[0] + 0.05,
        d.arm.ee_position[1],
        d.arm.ee_position[2],
      ];
    });
    expect(s.applyServerMessage(moved, 20).stateUpdated).toBe(true);
    // An identical broadcast is not a visible update.
    expect(s.applyServerMessage(moved, 30).stateUpdated).toBe(false);
  });

  it("prompts follow the grasp lifecycle", () => {
    const s = new ConsoleSession();
    s.applyServerMessage(stateWith((d) => (d.mode = "idle")), 0);
    expect(s.prompt()).toContain("1 finger");
    s.applyServerMessage(stateWith((d) => (d.mode = "manual")), 0);
    expect(s.prompt()).toContain("fist closes");
    s.applyServerMessage(stateWith((d) => (d.mode = "semi_autonomous")), 0);
    expect(s.prompt()).toContain("fist to grasp");
    s.applyServerMessage(
      stateWith((d) => {
        d.mode = "semi_autonomous";
        d.arm.gripper = "holding";
        d.arm.held_object = "can-1";
      }),
      0,
    );
    expect(s.prompt()).toContain("open palm to release");
  });

  it("blocked safety is surfaced immediately from the broadcast", () => {
    const s = new ConsoleSession();
    s.applyServerMessage(stateWith((d) => (d.arm.safety = "blocked")), 0);
    expect(s.safetyBadge()).toBe("blocked");
    s.applyServerMessage(stateWith((d) => (d.arm.safety = "clamped")), 1);
    expect(s.safetyBadge()).toBe("clamped");
  });

  it("server errors are collected", () => {
    const s = new ConsoleSession();
    const ev = s.applyServerMessage(
      JSON.stringify({ type: "error", v: 1, message: "read-only connection" }),
      0,
    );
    expect(ev.serverError).toBe("read-only connection");
    expect(s.serverErrors).toHaveLength(1);
  });

  it("staleness banner after broadcast silence", () => {
    const s = new ConsoleSession(1500);
    s.applyServerMessage(stateFixture, 1000);
    expect(s.isStale(2000)).toBe(false);
    expect(s.isStale(2600)).toBe(true);
  });

  it("connection loss is visible", () => {
    const s = new ConsoleSession();
    s.applyServerMessage(welcomeFixture, 0);
    s.connectionLost();
    expect(s.connection).toBe("lost");
  });
});
