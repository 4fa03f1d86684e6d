/**
 * Scene view: two orthographic panes (top-down XY, front XZ) showing the
 * workspace box and the end-effector marker, plus gripper / recorder /
 * staleness readouts.  The model builder is pure so it can be tested
 * without a canvas; the renderer takes a minimal 2D-context interface.
 */

import { RobotFeedback, Vec3 } from "./protocol.js";

export interface WorkspaceBox {
  x: [number, number];
  y: [number, number];
  z: [number, number];
}

/** Display-only bounds; mirror the profile the server actually runs. */
export const DEFAULT_WORKSPACE: WorkspaceBox = {
  x: [0.15, 0.65],
  y: [-0.4, 0.4],
  z: [0.05, 0.6],
};

export const STALE_AFTER_MS = 500;

export interface Viewport {
  left: number;
  top: number;
  width: number;
  height: number;
}

export interface SceneLayout {
  widthPx: number;
  heightPx: number;
  topPane: Viewport;
  frontPane: Viewport;
}

export const DEFAULT_LAYOUT: SceneLayout = {
  widthPx: 640,
  heightPx: 360,
  topPane: { left: 20, top: 48, width: 280, height: 280 },
  frontPane: { left: 340, top: 48, width: 280, height: 280 },
};

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, v));
}

function axisToPx(value: number, range: [number, number], px0: number, pxSpan: number): number {
  const t = (value - range[0]) / (range[1] - range[0]);
  return px0 + clamp(t, 0, 1) * pxSpan;
}

/** Top-down pane: +x right, +y up the screen.  Clamps to the pane. */
export function projectTop(p: Vec3, box: WorkspaceBox, vp: Viewport): { u: number; v: number } {
  return {
    u: axisToPx(p.x, box.x, vp.left, vp.width),
    v: axisToPx(p.y, box.y, vp.top + vp.height, -vp.height),
  };
}

/** Front pane: +x right, +z up the screen.  Clamps to the pane. */
export function projectFront(p: Vec3, box: WorkspaceBox, vp: Viewport): { u: number; v: number } {
  return {
    u: axisToPx(p.x, box.x, vp.left, vp.width),
    v: axisToPx(p.z, box.z, vp.top + vp.height, -vp.height),
  };
}

/** No feedback yet counts as stale; exactly at the window is still fresh. */
export function isStale(nowMs: number, feedbackAtMs: number | null, thresholdMs = STALE_AFTER_MS): boolean {
  if (feedbackAtMs === null) return true;
  return nowMs - feedbackAtMs > thresholdMs;
}

export interface SceneState {
  feedback: RobotFeedback | null;
  feedbackAtMs: number | null;
  clutchEngaged: boolean | null;
  gripperClosed: boolean | null;
  recording: boolean;
  frames: number;
  connection: string;
}

export interface SceneModel {
  topMarker: { u: number; v: number } | null;
  frontMarker: { u: number; v: number } | null;
  stale: boolean;
  gripperClosed: boolean | null;
  clutchEngaged: boolean | null;
  recording: boolean;
  frames: number;
  connection: string;
}

export function buildSceneModel(
  state: SceneState,
  nowMs: number,
  box: WorkspaceBox = DEFAULT_WORKSPACE,
  layout: SceneLayout = DEFAULT_LAYOUT,
): SceneModel {
  const fb = state.feedback;
  return {
    topMarker: fb ? projectTop(fb.position, box, layout.topPane) : null,
    frontMarker: fb ? projectFront(fb.position, box, layout.frontPane) : null,
    stale: isStale(nowMs, state.feedbackAtMs),
    gripperClosed: fb ? fb.gripperClosed : state.gripperClosed,
    clutchEngaged: state.clutchEngaged,
    recording: state.recording,
    frames: state.frames,
    connection: state.connection,
  };
}

/** The subset of CanvasRenderingContext2D the renderer needs. */
export interface Canvas2DLike {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
}

function drawPane(ctx: Canvas2DLike, vp: Viewport, label: string): void {
  ctx.strokeStyle = "#8a8f98";
  ctx.lineWidth = 1;
  ctx.strokeRect(vp.left, vp.top, vp.width, vp.height);
  ctx.fillStyle = "#b7bcc4";
  ctx.fillText(label, vp.left, vp.top - 6);
}

function drawMarker(
  ctx: Canvas2DLike,
  at: { u: number; v: number },
  closed: boolean | null,
): void {
  ctx.beginPath();
  ctx.arc(at.u, at.v, 6, 0, 2 * Math.PI);
  if (closed) {
    ctx.fillStyle = "#e4b33d";
    ctx.fill();
  } else {
    ctx.strokeStyle = "#5dd0a0";
    ctx.lineWidth = 2;
    ctx.stroke();
  }
}

export function renderScene(
  ctx: Canvas2DLike,
  model: SceneModel,
  layout: SceneLayout = DEFAULT_LAYOUT,
): void {
  ctx.clearRect(0, 0, layout.widthPx, layout.heightPx);
  ctx.fillStyle = "#14161a";
  ctx.fillRect(0, 0, layout.widthPx, layout.heightPx);
  ctx.font = "12px system-ui, sans-serif";

  drawPane(ctx, layout.topPane, "top (x right, y up)");
  drawPane(ctx, layout.frontPane, "front (x right, z up)");
  if (model.topMarker) drawMarker(ctx, model.topMarker, model.gripperClosed);
  if (model.frontMarker) drawMarker(ctx, model.frontMarker, model.gripperClosed);

  const clutch =
    model.clutchEngaged === null ? "clutch ?" : model.clutchEngaged ? "clutch ENGAGED" : "clutch released";
  const grip =
    model.gripperClosed === null ? "gripper ?" : model.gripperClosed ? "gripper closed" : "gripper open";
  const rec = model.recording ? `REC ${model.frames} frames` : "idle";
  ctx.fillStyle = "#d5d9df";
  ctx.fillText(`${model.connection} | ${clutch} | ${grip} | ${rec}`, 20, 24);

  if (model.stale) {
    ctx.fillStyle = "#d2504b";
    ctx.fillRect(0, layout.heightPx - 26, layout.widthPx, 26);
    ctx.fillStyle = "#ffffff";
    ctx.fillText("STALE FEEDBACK (>500 ms)", 20, layout.heightPx - 9);
  }
}
