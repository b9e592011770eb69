"""Streaming boundary and command-line entry points.

The gateway speaks JSON text messages over WebSocket (see
protocol/PROTOCOL.md). One operator connection drives the pipeline; any
number of observers receive the same state broadcasts. Fan-out is
drop-oldest per client: a stalled observer loses broadcasts instead of
stalling the control loop.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
import time
from typing import Optional

from . import protocol, session
from .engine import EngineConfig, TeleopEngine
from .geometry import apply_transform
from .simarm import fk_frames

log = logging.getLogger(__name__)


def build_broadcast(engine: TeleopEngine, now_ms: float) -> protocol.StateBroadcast:
    tracked = engine.tracked
    wrist = None
    if tracked is not None and engine.calibration.locked:
        robot = apply_transform(engine.calibration.robot_from_marker, tracked.position_marker)
        p = tracked.position_marker
        wrist = {
            "marker": [p.x, p.y, p.z],
            "robot": [robot.x, robot.y, robot.z],
            "fresh": tracked.fresh,
            "velocity_mps": tracked.velocity_mps,
        }
    gesture = None
    if engine.last_signal is not None:
        gesture = {
            "label": engine.last_signal.label.value,
            "finger_count": engine.last_signal.finger_count,
            "stable": engine.last_signal.stable,
        }
    state = engine.sim.state
    q = engine.sim.state.ee_orientation
    frames = fk_frames(engine.sim.model, state.q)
    arm = {
        "q": [float(x) for x in state.q],
        "ee_position": [state.ee_position.x, state.ee_position.y, state.ee_position.z],
        "ee_roll_quaternion": [q.qx, q.qy, q.qz, q.qw],
        "joint_origins": [[float(v) for v in row] for row in frames.joint_origins],
        "gripper": state.gripper.value,
        "held_object": state.held_object,
        "safety": state.safety.value,
    }
    objects = tuple(
        {
            "id": o.id,
            "class_label": o.class_label,
            "position": [o.position.x, o.position.y, o.position.z],
            "confidence": o.confidence,
            "graspable": o.graspable,
        }
        for o in engine.sim.objects.values()
    )
    obstacles = tuple(
        {"center": [o.center.x, o.center.y, o.center.z], "radius_m": o.radius_m}
        for o in engine.sim.obstacles
    )
    zones = tuple(
        {"id": z.id, "center": [z.center.x, z.center.y, z.center.z], "radius_m": z.radius_m}
        for z in engine.config.zones
    )
    last_command = None
    if engine.last_command is not None:
        last_command = {"kind": engine.last_command.kind.value}
        if engine.last_command.object_id is not None:
            last_command["object_id"] = engine.last_command.object_id
        if engine.last_command.target_pose is not None:
            tp = engine.last_command.target_pose.position_robot
            last_command["target"] = [tp.x, tp.y, tp.z]
    return protocol.StateBroadcast(
        t_ms=now_ms,
        mode=engine.mode.value,
        gesture=gesture,
        wrist=wrist,
        arm=arm,
        objects=objects,
        obstacles=obstacles,
        zones=zones,
        last_command=last_command,
    )


class _Client:
    """Connection bookkeeping plus a one-slot drop-oldest broadcast queue."""

    def __init__(self, ws, role: str):
        self.ws = ws
        self.role = role
        self.latest: Optional[str] = None
        self.event = asyncio.Event()
        self.last_frame_t = -float("inf")

    def offer(self, payload: str) -> None:
        self.latest = payload  # overwrites anything unsent
        self.event.set()


class GatewayServer:
    """Single-operator pipeline owner with observer fan-out."""

    def __init__(self, config: EngineConfig):
        self.config = config
        self.engine = TeleopEngine(config)
        self.clients: set[_Client] = set()
        self.operator: Optional[_Client] = None
        self._t0 = time.monotonic()

    def now_ms(self) -> float:
        return (time.monotonic() - self._t0) * 1000.0

    async def run(self, host: str, port: int, ready: Optional[asyncio.Event] = None):
        from websockets.asyncio.server import serve

        async with serve(self._handle, host, port) as server:
            self.server = server
            if ready is not None:
                ready.set()
            await self._loop()

    @property
    def port(self) -> int:
        return self.server.sockets[0].getsockname()[1]

    async def _loop(self):
        """Fixed-rate simulator substeps; command tick + broadcast at tick_hz."""
        substep_s = self.config.substep_s
        ticks_per_command = max(int(round(self.config.tick_period_ms / 1000.0 / substep_s)), 1)
        counter = 0
        loop = asyncio.get_running_loop()
        next_deadline = loop.time() + substep_s
        while True:
            delay = next_deadline - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            next_deadline += substep_s
            now = self.now_ms()
            if counter % ticks_per_command == 0:
                self.engine.tick(now)
                self._broadcast(now)
            self.engine.substep()
            counter += 1

    def _broadcast(self, now_ms: float) -> None:
        payload = protocol.encode_message(build_broadcast(self.engine, now_ms))
        for client in self.clients:
            client.offer(payload)

    async def _sender(self, client: _Client):
        while True:
            await client.event.wait()
            client.event.clear()
            payload, client.latest = client.latest, None
            if payload is not None:
                await client.ws.send(payload)

    async def _handle(self, ws):
        client: Optional[_Client] = None
        sender_task: Optional[asyncio.Task] = None
        try:
            client = await self._handshake(ws)
            if client is None:
                return
            self.clients.add(client)
            sender_task = asyncio.create_task(self._sender(client))
            async for raw in ws:
                await self._dispatch(client, raw)
        finally:
            if sender_task is not None:
                sender_task.cancel()
            if client is not None:
                self.clients.discard(client)
                if self.operator is client:
                    self.operator = None
                    log.info("operator disconnected; arm will hold on staleness")

    async def _handshake(self, ws) -> Optional[_Client]:
        raw = await ws.recv()
        try:
            msg = protocol.decode_message(raw)
        except protocol.ProtocolVersionMismatch as exc:
            await ws.send(protocol.encode_message(protocol.ErrorReply(str(exc))))
            await ws.close(code=1002, reason="protocol version mismatch")
            return None
        except protocol.MalformedMessage as exc:
            await ws.send(protocol.encode_message(protocol.ErrorReply(str(exc))))
            await ws.close(code=1002, reason="hello required")
            return None
        if not isinstance(msg, protocol.Hello):
            await ws.send(protocol.encode_message(protocol.ErrorReply("first message must be hello")))
            await ws.close(code=1002, reason="hello required")
            return None
        role = msg.role
        if role == "operator" and self.operator is not None:
            role = "observer"  # single-operator policy: extras are read-only
        client = _Client(ws, role)
        if role == "operator":
            self.operator = client
        await ws.send(protocol.encode_message(protocol.Welcome(role=role)))
        log.info("client connected as %s", role)
        return client

    async def _dispatch(self, client: _Client, raw) -> None:
        try:
            msg = protocol.decode_message(raw)
        except (protocol.MalformedMessage, protocol.ProtocolVersionMismatch) as exc:
            await client.ws.send(protocol.encode_message(protocol.ErrorReply(str(exc))))
            return
        if isinstance(msg, protocol.LandmarkFrame):
            if client is not self.operator:
                await client.ws.send(
                    protocol.encode_message(protocol.ErrorReply("read-only connection"))
                )
                return
            if msg.t_ms <= client.last_frame_t:
                await client.ws.send(
                    protocol.encode_message(
                        protocol.ErrorReply(
                            f"frame t_ms {msg.t_ms} not after {client.last_frame_t}"
                        )
                    )
                )
                return
            client.last_frame_t = msg.t_ms
            self.engine.feed_frame(msg, now_ms=self.now_ms())
        elif isinstance(msg, protocol.Estop):
            self.engine.handle_estop()
        elif isinstance(msg, protocol.Reset):
            if client is self.operator:
                self.engine.handle_reset()
            else:
                await client.ws.send(
                    protocol.encode_message(protocol.ErrorReply("read-only connection"))
                )
        else:
            await client.ws.send(
                protocol.encode_message(protocol.ErrorReply("unexpected message type"))
            )


def serve_forever(config: EngineConfig, host: str, port: int) -> None:
    server = GatewayServer(config)
    asyncio.run(server.run(host, port))


# -- CLI ---------------------------------------------------------------------


def load_config(path: Optional[str]) -> EngineConfig:
    if path is None:
        return EngineConfig()
    with open(path, "r", encoding="utf-8") as fh:
        return EngineConfig.from_dict(json.load(fh))


def cli_replay(session_path: str, report_path: str, csv_path: Optional[str] = None) -> int:
    try:
        record = session.read_session(session_path)
    except FileNotFoundError:
        print(f"error: session file not found: {session_path}", file=sys.stderr)
        return 2
    except (session.SchemaVersion, session.CorruptFrame) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = session.replay(record)
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(result.report.to_json())
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(result.report.to_csv())
    print(
        f"replayed {len(record.frames)} frames: mean error "
        f"{result.report.mean_error_m:.4f} m over {result.report.sample_count} samples, "
        f"speed-error correlation {result.report.speed_error_correlation:.3f}"
    )
    return 0


def cli_simulate(spec_path: str, out_session_path: str) -> int:
    try:
        with open(spec_path, "r", encoding="utf-8") as fh:
            spec_doc = json.load(fh)
    except FileNotFoundError:
        print(f"error: spec file not found: {spec_path}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: spec is not valid JSON: {exc}", file=sys.stderr)
        return 2
    try:
        spec = session.trajectory_spec_from_dict(spec_doc)
        config = EngineConfig.from_dict(spec_doc.get("config", {}))
        record = session.generate_synthetic(spec, config)
    except session.InfeasibleSpec as exc:
        print(f"error: infeasible spec: {exc}", file=sys.stderr)
        return 2
    session.write_session(record, out_session_path)
    print(f"wrote {len(record.frames)} frames to {out_session_path}")
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default="INFO", help="logging level (DEBUG/INFO/WARNING)")

    parser = argparse.ArgumentParser(prog="telewrist", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the streaming gateway", parents=[common])
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--config", default=None, help="engine config JSON file")

    p_replay = sub.add_parser("replay", help="replay a session file and write its report",
                              parents=[common])
    p_replay.add_argument("--session", required=True)
    p_replay.add_argument("--out", required=True, help="report JSON path")
    p_replay.add_argument("--csv", default=None, help="optional error/speed series CSV path")

    p_sim = sub.add_parser("simulate", help="render a trajectory spec into a session file",
                           parents=[common])
    p_sim.add_argument("--spec", required=True)
    p_sim.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.INFO))

    if args.command == "serve":
        try:
            config = load_config(args.config)
        except (OSError, ValueError) as exc:
            print(f"error: cannot load config: {exc}", file=sys.stderr)
            return 2
        try:
            serve_forever(config, args.host, args.port)
        except OSError as exc:
            print(f"error: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
            return 2
        except KeyboardInterrupt:
            pass
        return 0
    if args.command == "replay":
        return cli_replay(args.session, args.out, args.csv)
    if args.command == "simulate":
        return cli_simulate(args.spec, args.out)
    return 2


if __name__ == "__main__":
    sys.exit(main())
