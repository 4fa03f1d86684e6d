/**
 * Pose stream generator: accumulates pointer/wheel/keyboard input into a
 * 6-DoF pose and emits it as gateway pose messages with strictly
 * monotone stamps.  With no input the emitted pose is constant (a
 * stationary hold), which is exactly what the planner's clutch logic
 * expects from an idle operator.
 *
 * Device-orientation input is optional and disabled by default; when
 * enabled it overrides the keyboard rotation accumulator.
 */

import { PoseMsg, Quat } from "./protocol.js";

export interface PoseSourceConfig {
  /** Pointer translation gain, meters per CSS pixel. */
  scaleMPerPx: number;
  /** Z travel per wheel notch / key press, meters. */
  zStepM: number;
  /** Rotation per key press, radians. */
  rotStepRad: number;
}

export const DEFAULT_POSE_SOURCE: PoseSourceConfig = {
  scaleMPerPx: 0.001,
  zStepM: 0.005,
  rotStepRad: 0.05,
};

export function quatMul(a: Quat, b: Quat): Quat {
  return {
    w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
    x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
    y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
    z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
  };
}

export function quatNormalize(q: Quat): Quat {
  const n = Math.hypot(q.w, q.x, q.y, q.z);
  return { w: q.w / n, x: q.x / n, y: q.y / n, z: q.z / n };
}

/** Roll/pitch/yaw (extrinsic X-Y-Z) to quaternion, normalized. */
export function quatFromRpy(roll: number, pitch: number, yaw: number): Quat {
  const cr = Math.cos(roll / 2), sr = Math.sin(roll / 2);
  const cp = Math.cos(pitch / 2), sp = Math.sin(pitch / 2);
  const cy = Math.cos(yaw / 2), sy = Math.sin(yaw / 2);
  return quatNormalize({
    w: cr * cp * cy + sr * sp * sy,
    x: sr * cp * cy - cr * sp * sy,
    y: cr * sp * cy + sr * cp * sy,
    z: cr * cp * sy - sr * sp * cy,
  });
}

export type RotationAxis = "roll" | "pitch" | "yaw";

export class PoseSource {
  private x = 0;
  private y = 0;
  private z = 0;
  private roll = 0;
  private pitch = 0;
  private yaw = 0;
  private lastStampMs = -Infinity;
  orientationEnabled = false;
  private deviceQuat: Quat | null = null;

  constructor(public config: PoseSourceConfig = DEFAULT_POSE_SOURCE) {}

  /** Pointer drag in CSS pixels: screen right is +x, screen up is +y. */
  pointerDrag(dxPx: number, dyPx: number): void {
    this.x += dxPx * this.config.scaleMPerPx;
    this.y += -dyPx * this.config.scaleMPerPx;
  }

  /** Wheel / key Z travel, positive notches move up. */
  stepZ(notches: number): void {
    this.z += notches * this.config.zStepM;
  }

  keyRotate(axis: RotationAxis, direction: 1 | -1): void {
    const step = direction * this.config.rotStepRad;
    if (axis === "roll") this.roll += step;
    else if (axis === "pitch") this.pitch += step;
    else this.yaw += step;
  }

  /** Browser deviceorientation angles in degrees; ignored until enabled. */
  setDeviceOrientation(alphaDeg: number, betaDeg: number, gammaDeg: number): void {
    if (!this.orientationEnabled) return;
    const rad = Math.PI / 180;
    // alpha is rotation about the screen normal (yaw), beta/gamma tilt.
    this.deviceQuat = quatFromRpy(betaDeg * rad, gammaDeg * rad, alphaDeg * rad);
  }

  orientation(): Quat {
    if (this.orientationEnabled && this.deviceQuat) return this.deviceQuat;
    return quatFromRpy(this.roll, this.pitch, this.yaw);
  }

  /** One send-loop tick: current pose with a strictly increasing stamp. */
  tick(nowMs: number): PoseMsg {
    const stamp = Math.max(nowMs, this.lastStampMs + 1e-3);
    this.lastStampMs = stamp;
    return {
      header: { stamp },
      pose: {
        position: { x: this.x, y: this.y, z: this.z },
        orientation: this.orientation(),
      },
    };
  }

  reset(): void {
    this.x = this.y = this.z = 0;
    this.roll = this.pitch = this.yaw = 0;
    this.deviceQuat = null;
  }
}
