/**
 * Gateway wire protocol: JSON frames over one WebSocket.
 *
 * Ops the gateway understands: advertise, publish, subscribe, status.
 * It replies with publish (subscribed traffic), status and error frames.
 * Topic names are the bus names, optionally prefixed with an arm
 * namespace like /left; the unprefixed single-arm form has no leading
 * slash on the bus but the gateway accepts a leading slash on the wire.
 */

export const PHONE_POSE = "teleop/phone_pose";
export const BUTTON = "teleop/button";
export const RECORD_CTL = "teleop/record_ctl";
export const ROBOT_FEEDBACK = "teleop/robot_feedback";
export const PLANNER_STATE = "teleop/planner_state";
export const RECORD_STATUS = "teleop/record_status";

export interface Vec3 {
  x: number;
  y: number;
  z: number;
}

export interface Quat {
  w: number;
  x: number;
  y: number;
  z: number;
}

export interface PoseMsg {
  header: { stamp: number };
  pose: { position: Vec3; orientation: Quat };
}

export interface RobotFeedback {
  position: Vec3;
  orientation: Quat;
  joints: number[];
  gripperClosed: boolean;
  stampNs: number;
}

export interface PlannerEcho {
  clutchEngaged: boolean;
  gripperClosed: boolean;
  stampNs: number;
}

export interface RecordStatusMsg {
  recording: boolean;
  frames: number;
  episodes: number;
  stampNs: number;
}

export interface StatusReply {
  accepted: number;
  decodeErrors: number;
  rate: {
    samples: number;
    meanIntervalMs: number;
    jitterMs: number;
    dropEstimate: number;
  } | null;
}

export type GatewayFrame =
  | { op: "publish"; topic: string; msg: unknown }
  | { op: "status"; [k: string]: unknown }
  | { op: "error"; reason: string };

/** "" stays "", "left" / "/left/" normalize to "/left". */
export function normalizeNamespace(raw: string): string {
  const trimmed = raw.trim().replace(/\/+$/, "");
  if (trimmed === "" || trimmed === "/") return "";
  const ns = trimmed.startsWith("/") ? trimmed : `/${trimmed}`;
  if (!/^\/[A-Za-z0-9_]+$/.test(ns)) {
    throw new Error(`bad namespace ${JSON.stringify(raw)}`);
  }
  return ns;
}

/** Topic form the client puts in outgoing frames (always slash-led). */
export function wireTopic(namespace: string, base: string): string {
  return `${namespace}/${base}`;
}

/** Canonical bus form the gateway uses in forwarded frames. */
export function busTopic(namespace: string, base: string): string {
  return namespace === "" ? base : `${namespace}/${base}`;
}

/** True when an incoming topic names the same stream, slash-led or not. */
export function sameTopic(incoming: string, namespace: string, base: string): boolean {
  return incoming.replace(/^\//, "") === busTopic(namespace, base).replace(/^\//, "");
}

export function advertiseFrame(topic: string): string {
  return JSON.stringify({ op: "advertise", topic });
}

export function subscribeFrame(topic: string): string {
  return JSON.stringify({ op: "subscribe", topic });
}

export function statusFrame(): string {
  return JSON.stringify({ op: "status" });
}

export function poseFrame(topic: string, msg: PoseMsg): string {
  return JSON.stringify({ op: "publish", topic, msg });
}

export function buttonFrame(
  topic: string,
  button: "volume_up" | "volume_down",
  stampMs: number,
): string {
  return JSON.stringify({ op: "publish", topic, msg: { button, stamp: stampMs } });
}

export function recordFrame(
  topic: string,
  action: "start" | "stop" | "discard",
  task = "",
): string {
  return JSON.stringify({ op: "publish", topic, msg: { action, task } });
}

export function parseGatewayFrame(text: string): GatewayFrame | null {
  let frame: unknown;
  try {
    frame = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof frame !== "object" || frame === null) return null;
  const op = (frame as { op?: unknown }).op;
  if (op === "publish" || op === "status" || op === "error") {
    return frame as GatewayFrame;
  }
  return null;
}

function num(obj: Record<string, unknown>, field: string): number {
  const v = obj[field];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new Error(`field ${field} is not a finite number`);
  }
  return v;
}

function bool(obj: Record<string, unknown>, field: string): boolean {
  const v = obj[field];
  if (typeof v !== "boolean") throw new Error(`field ${field} is not a boolean`);
  return v;
}

function section(msg: unknown, field: string): Record<string, unknown> {
  if (typeof msg !== "object" || msg === null) throw new Error("message is not an object");
  const v = (msg as Record<string, unknown>)[field];
  if (typeof v !== "object" || v === null) throw new Error(`missing object field ${field}`);
  return v as Record<string, unknown>;
}

export function decodeFeedback(msg: unknown): RobotFeedback {
  const root = msg as Record<string, unknown>;
  const pos = section(msg, "position");
  const ori = section(msg, "orientation");
  const joints = root["joints"];
  if (!Array.isArray(joints) || joints.some((j) => typeof j !== "number")) {
    throw new Error("field joints is not a number array");
  }
  return {
    position: { x: num(pos, "x"), y: num(pos, "y"), z: num(pos, "z") },
    orientation: { w: num(ori, "w"), x: num(ori, "x"), y: num(ori, "y"), z: num(ori, "z") },
    joints: joints as number[],
    gripperClosed: bool(root, "gripper_closed"),
    stampNs: num(root, "stamp_ns"),
  };
}

export function decodePlannerEcho(msg: unknown): PlannerEcho {
  if (typeof msg !== "object" || msg === null) throw new Error("message is not an object");
  const root = msg as Record<string, unknown>;
  return {
    clutchEngaged: bool(root, "clutch_engaged"),
    gripperClosed: bool(root, "gripper_closed"),
    stampNs: num(root, "stamp_ns"),
  };
}

export function decodeRecordStatus(msg: unknown): RecordStatusMsg {
  if (typeof msg !== "object" || msg === null) throw new Error("message is not an object");
  const root = msg as Record<string, unknown>;
  return {
    recording: bool(root, "recording"),
    frames: num(root, "frames"),
    episodes: num(root, "episodes"),
    stampNs: num(root, "stamp_ns"),
  };
}

export function decodeStatusReply(frame: Record<string, unknown>): StatusReply {
  const rate = frame["rate"];
  let rateReport: StatusReply["rate"] = null;
  if (typeof rate === "object" && rate !== null) {
    const r = rate as Record<string, unknown>;
    rateReport = {
      samples: num(r, "samples"),
      meanIntervalMs: num(r, "mean_interval_ms"),
      jitterMs: num(r, "jitter_ms"),
      dropEstimate: num(r, "drop_estimate"),
    };
  }
  return {
    accepted: num(frame, "accepted"),
    decodeErrors: num(frame, "decode_errors"),
    rate: rateReport,
  };
}
