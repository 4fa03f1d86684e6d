import { expect, test } from "vitest";

import { PoseSource, quatFromRpy, quatMul } from "../src/poseSource.js";
import { seededRng, uniform } from "./helpers.js";

test("no input produces a constant pose stream", () => {
  const source = new PoseSource();
  const a = source.tick(1000);
  const b = source.tick(1020);
  expect(b.pose.position).toEqual(a.pose.position);
  expect(b.pose.orientation).toEqual(a.pose.orientation);
  expect(b.header.stamp).toBeGreaterThan(a.header.stamp);
});

test("drag right 100 px at 0.001 m/px moves x by 0.1 m", () => {
  const source = new PoseSource({ scaleMPerPx: 0.001, zStepM: 0.005, rotStepRad: 0.05 });
  for (let i = 0; i < 10; i++) source.pointerDrag(10, 0);
  const msg = source.tick(0);
  expect(msg.pose.position.x).toBeCloseTo(0.1, 12);
  expect(msg.pose.position.y).toBeCloseTo(0, 12);
});

test("screen up is +y, wheel and keys step z", () => {
  const source = new PoseSource({ scaleMPerPx: 0.002, zStepM: 0.01, rotStepRad: 0.05 });
  source.pointerDrag(0, -50); // drag toward the top of the screen
  source.stepZ(3);
  const msg = source.tick(0);
  expect(msg.pose.position.y).toBeCloseTo(0.1, 12);
  expect(msg.pose.position.z).toBeCloseTo(0.03, 12);
});

test("stamps stay strictly monotone under a misbehaving clock", () => {
  const source = new PoseSource();
  const rng = seededRng(42);
  let now = 1_000_000;
  let last = -Infinity;
  for (let i = 0; i < 2000; i++) {
    // wall time mostly advances but sometimes jumps backwards (NTP, VM pause)
    now += rng() < 0.2 ? -uniform(rng, 0, 50) : uniform(rng, 0, 40);
    const stamp = source.tick(now).header.stamp;
    expect(stamp).toBeGreaterThan(last);
    last = stamp;
  }
});

test("rotation quaternions match the pipeline's extrinsic XYZ convention", () => {
  const identity = quatFromRpy(0, 0, 0);
  expect(identity.w).toBeCloseTo(1, 12);

  const yaw90 = quatFromRpy(0, 0, Math.PI / 2);
  expect(yaw90.w).toBeCloseTo(Math.SQRT1_2, 12);
  expect(yaw90.z).toBeCloseTo(Math.SQRT1_2, 12);

  // combined angles must equal the qz*qy*qx composition
  const rng = seededRng(7);
  for (let i = 0; i < 500; i++) {
    const r = uniform(rng, -Math.PI, Math.PI);
    const p = uniform(rng, -1.4, 1.4);
    const y = uniform(rng, -Math.PI, Math.PI);
    const direct = quatFromRpy(r, p, y);
    const composed = quatMul(
      quatMul(quatFromRpy(0, 0, y), quatFromRpy(0, p, 0)),
      quatFromRpy(r, 0, 0),
    );
    for (const k of ["w", "x", "y", "z"] as const) {
      expect(direct[k]).toBeCloseTo(composed[k], 10);
    }
    const norm = Math.hypot(direct.w, direct.x, direct.y, direct.z);
    expect(norm).toBeCloseTo(1, 12);
  }
});

test("device orientation is ignored until explicitly enabled", () => {
  const source = new PoseSource();
  source.setDeviceOrientation(90, 0, 0);
  const before = source.tick(0).pose.orientation;
  expect(before.w).toBeCloseTo(1, 12);

  source.orientationEnabled = true;
  source.setDeviceOrientation(90, 0, 0); // alpha -> yaw
  const after = source.tick(1).pose.orientation;
  expect(after.w).toBeCloseTo(Math.SQRT1_2, 6);
  expect(after.z).toBeCloseTo(Math.SQRT1_2, 6);
});

test("reset returns to the identity hold", () => {
  const source = new PoseSource();
  source.pointerDrag(250, -40);
  source.stepZ(2);
  source.keyRotate("yaw", 1);
  source.reset();
  const msg = source.tick(0);
  expect(msg.pose.position).toEqual({ x: 0, y: 0, z: 0 });
  expect(msg.pose.orientation.w).toBeCloseTo(1, 12);
});
