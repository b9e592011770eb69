// Adapter from an in-browser 21-point hand detector to gateway frames.
//
// Browsers have no depth camera: the wrist is placed on a configured
// virtual depth plane, which makes browser-driven control planar. The
// landmark indexing contract (0 wrist, 5 index MCP, 17 little MCP) matches
// the common detector output order and is exercised by the test suite.

import { LandmarkFrame, MarkerDetection } from "./protocol.js";

export interface DetectedLandmark {
  x: number; // image-normalized [0..1]
  y: number;
  z: number;
}

export interface DetectedHand {
  landmarks: DetectedLandmark[];
  score: number;
}

export interface FrameBuilderOptions {
  depthPlaneM: number;
  imageWidth: number;
  imageHeight: number;
  depthWindowSize?: number;
}

export interface StreamHealth {
  framesSent: number;
  framesSkipped: number; // no hand, non-monotone clock, bad landmark count
  lastConfidence: number;
  fps: number;
}

const IDENTITY3 = [
  [1, 0, 0],
  [0, 1, 0],
  [0, 0, 1],
];

export class FrameBuilder {
  private lastTms = -Infinity;
  private markerSent = false;
  private sent = 0;
  private skipped = 0;
  private lastConfidence = 0;
  private recentTimes: number[] = [];

  constructor(private readonly opts: FrameBuilderOptions) {
    if (opts.depthPlaneM <= 0) throw new Error("depthPlaneM must be positive");
  }

  // Returns null when this observation should not be sent (no hand, or the
  // clock did not advance). The first emitted frame carries a synthetic
  // marker detection on the depth plane so the gateway can calibrate.
  build(hand: DetectedHand | null, tMs: number): LandmarkFrame | null {
    if (hand === null || hand.landmarks.length !== 21) {
      this.skipped += 1;
      return null;
    }
    if (tMs <= this.lastTms) {
      this.skipped += 1;
      return null;
    }
    this.lastTms = tMs;
    this.lastConfidence = hand.score;
    this.sent += 1;
    this.recentTimes.push(tMs);
    if (this.recentTimes.length > 30) this.recentTimes.shift();

    const wristLm = hand.landmarks[0];
    const depthMm = this.opts.depthPlaneM * 1000;
    const windowSize = this.opts.depthWindowSize ?? 5;
    const frame: LandmarkFrame = {
      t_ms: tMs,
      wrist: {
        u: wristLm.x * this.opts.imageWidth,
        v: wristLm.y * this.opts.imageHeight,
        depth_mm: depthMm,
        window: new Array(windowSize * windowSize).fill(depthMm),
      },
      hand: hand.landmarks.map((lm) => [lm.x, lm.y, lm.z]),
    };
    if (!this.markerSent) {
      frame.marker = this.virtualMarker();
      this.markerSent = true;
    }
    return frame;
  }

  private virtualMarker(): MarkerDetection {
    return { rotation: IDENTITY3, translation: [0, 0, this.opts.depthPlaneM] };
  }

  health(): StreamHealth {
    let fps = 0;
    if (this.recentTimes.length >= 2) {
      const span = this.recentTimes[this.recentTimes.length - 1] - this.recentTimes[0];
      if (span > 0) fps = ((this.recentTimes.length - 1) * 1000) / span;
    }
    return {
      framesSent: this.sent,
      framesSkipped: this.skipped,
      lastConfidence: this.lastConfidence,
      fps,
    };
  }
}
