// Page wiring: webcam capture, the in-browser hand detector (loaded from a
// CDN at runtime), the gateway connection, and the render loop.
//
// URL parameters: ?host=127.0.0.1&port=8765&role=operator&depth=1.0

import { FrameBuilder, DetectedHand } from "./landmarks.js";
import { encodeEstop, encodeFrame, encodeHello, encodeReset } from "./protocol.js";
import { GatewayClient } from "./net.js";
import { renderBadges, renderScene, BadgeElements } from "./render.js";
import { ConsoleSession } from "./viewmodel.js";

const TASKS_VISION_URL =
  "https://cdn.jsdelivr.net/npm/@mediapipe/tasks-vision@0.10.14";
const HAND_MODEL_URL =
  "https://storage.googleapis.com/mediapipe-models/hand_landmarker/hand_landmarker/float16/1/hand_landmarker.task";

interface DetectorLike {
  detectForVideo(video: HTMLVideoElement, tMs: number): {
    landmarks?: { x: number; y: number; z: number }[][];
    handedness?: { score: number }[][];
  };
}

async function loadDetector(): Promise<DetectorLike> {
  const vision = await import(/* @vite-ignore */ `${TASKS_VISION_URL}/vision_bundle.mjs`);
  const resolver = await vision.FilesetResolver.forVisionTasks(`${TASKS_VISION_URL}/wasm`);
  return vision.HandLandmarker.createFromOptions(resolver, {
    baseOptions: { modelAssetPath: HAND_MODEL_URL },
    runningMode: "VIDEO",
    numHands: 1,
  });
}

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

async function start() {
  const params = new URLSearchParams(window.location.search);
  const host = params.get("host") ?? window.location.hostname ?? "127.0.0.1";
  const port = params.get("port") ?? "8765";
  const role = params.get("role") === "observer" ? "observer" : "operator";
  const depthPlaneM = parseFloat(params.get("depth") ?? "1.0");

  const video = el("camera") as HTMLVideoElement;
  const canvas = el("scene") as HTMLCanvasElement;
  const badges: BadgeElements = {
    mode: el("badge-mode"),
    safety: el("badge-safety"),
    gesture: el("badge-gesture"),
    prompt: el("prompt"),
    connection: el("badge-connection"),
  };
  const health = el("health");

  const session = new ConsoleSession();
  const client = new GatewayClient({
    url: `ws://${host}:${port}`,
    helloPayload: encodeHello(role),
    onMessage: (text) => session.applyServerMessage(text, performance.now()),
    onLost: () => session.connectionLost(),
  });
  client.connect();

  el("btn-reset").addEventListener("click", () => client.send(encodeReset()));
  el("btn-estop").addEventListener("click", () => client.send(encodeEstop()));

  let builder: FrameBuilder | null = null;
  let detector: DetectorLike | null = null;

  if (role === "operator") {
    try {
      const stream = await navigator.mediaDevices.getUserMedia({
        video: { width: 640, height: 480 },
      });
      video.srcObject = stream;
      await video.play();
      builder = new FrameBuilder({
        depthPlaneM,
        imageWidth: video.videoWidth || 640,
        imageHeight: video.videoHeight || 480,
      });
      detector = await loadDetector();
    } catch (err) {
      console.error("camera/detector unavailable; observing only", err);
    }
  }

  const loop = () => {
    const now = performance.now();
    if (detector && builder && video.readyState >= 2) {
      const result = detector.detectForVideo(video, now);
      let hand: DetectedHand | null = null;
      if (result.landmarks && result.landmarks.length > 0) {
        hand = {
          landmarks: result.landmarks[0],
          score: result.handedness?.[0]?.[0]?.score ?? 1.0,
        };
      }
      const frame = builder.build(hand, now);
      if (frame) client.send(encodeFrame(frame));
      const h = builder.health();
      health.textContent =
        `stream: ${h.fps.toFixed(0)} fps, sent ${h.framesSent}, ` +
        `skipped ${h.framesSkipped}, confidence ${h.lastConfidence.toFixed(2)}`;
    }
    renderScene(canvas, session.broadcast);
    renderBadges(badges, session, now);
    requestAnimationFrame(loop);
  };
  requestAnimationFrame(loop);
}

start().catch((err) => {
  console.error("console failed to start", err);
  const banner = document.getElementById("prompt");
  if (banner) banner.textContent = `startup failed: ${err}`;
});
