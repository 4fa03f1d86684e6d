/**
 * Browser glue: wires the session, pose source and scene renderer to the
 * DOM.  Two independent loops: a drift-corrected send timer at the
 * configured rate, and a requestAnimationFrame render loop, so a slow
 * network never stalls drawing and vice versa.
 */

import { PoseSource } from "./poseSource.js";
import { DEFAULT_LAYOUT, buildSceneModel, renderScene } from "./scene.js";
import { UiSession } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const urlInput = el<HTMLInputElement>("server-url");
const nsInput = el<HTMLInputElement>("namespace");
const scaleInput = el<HTMLInputElement>("scale");
const rateInput = el<HTMLInputElement>("rate");
const taskInput = el<HTMLInputElement>("task");
const orientationToggle = el<HTMLInputElement>("device-orientation");
const connectBtn = el<HTMLButtonElement>("connect");
const clutchBtn = el<HTMLButtonElement>("clutch");
const gripperBtn = el<HTMLButtonElement>("gripper");
const recordBtn = el<HTMLButtonElement>("record");
const statusLine = el<HTMLDivElement>("status-line");
const canvas = el<HTMLCanvasElement>("scene");
const ctx = canvas.getContext("2d");
if (!ctx) throw new Error("2d canvas unsupported");

const source = new PoseSource();
let session: UiSession | null = null;

function currentSession(): UiSession {
  if (!session || session.url !== urlInput.value) {
    session?.disconnect();
    session = new UiSession(
      { url: urlInput.value, namespace: nsInput.value },
      (url) => new WebSocket(url),
    );
  }
  return session;
}

connectBtn.addEventListener("click", () => {
  const s = currentSession();
  if (s.connection === "disconnected") {
    try {
      s.setNamespace(nsInput.value);
    } catch (err) {
      statusLine.textContent = String(err);
      return;
    }
    s.connect();
  } else {
    s.disconnect();
  }
});

nsInput.addEventListener("change", () => {
  if (!session) return;
  try {
    session.setNamespace(nsInput.value); // reconnects when live
  } catch (err) {
    statusLine.textContent = String(err);
    nsInput.value = session.namespace;
  }
});

scaleInput.addEventListener("change", () => {
  const v = Number(scaleInput.value);
  if (Number.isFinite(v) && v > 0) source.config.scaleMPerPx = v;
});

clutchBtn.addEventListener("click", () => session?.pressClutch());
gripperBtn.addEventListener("click", () => session?.pressGripper());
recordBtn.addEventListener("click", () => {
  if (!session) return;
  if (session.recording) session.stopRecording();
  else session.startRecording(taskInput.value);
});

orientationToggle.addEventListener("change", () => {
  source.orientationEnabled = orientationToggle.checked;
  if (orientationToggle.checked) {
    // Some browsers gate this behind an explicit permission request.
    const anyOrientation = DeviceOrientationEvent as unknown as {
      requestPermission?: () => Promise<string>;
    };
    anyOrientation.requestPermission?.().catch(() => {
      orientationToggle.checked = false;
      source.orientationEnabled = false;
    });
  }
});
window.addEventListener("deviceorientation", (ev) => {
  source.setDeviceOrientation(ev.alpha ?? 0, ev.beta ?? 0, ev.gamma ?? 0);
});

// Pointer drag moves XY, wheel moves Z, keys rotate / step Z.
let dragging = false;
let lastX = 0;
let lastY = 0;
canvas.addEventListener("pointerdown", (ev) => {
  dragging = true;
  lastX = ev.clientX;
  lastY = ev.clientY;
  canvas.setPointerCapture(ev.pointerId);
});
canvas.addEventListener("pointermove", (ev) => {
  if (!dragging) return;
  source.pointerDrag(ev.clientX - lastX, ev.clientY - lastY);
  lastX = ev.clientX;
  lastY = ev.clientY;
});
canvas.addEventListener("pointerup", () => {
  dragging = false;
});
canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  source.stepZ(ev.deltaY < 0 ? 1 : -1);
});
window.addEventListener("keydown", (ev) => {
  switch (ev.key) {
    case "q": source.keyRotate("roll", -1); break;
    case "e": source.keyRotate("roll", 1); break;
    case "w": source.keyRotate("pitch", 1); break;
    case "s": source.keyRotate("pitch", -1); break;
    case "a": source.keyRotate("yaw", 1); break;
    case "d": source.keyRotate("yaw", -1); break;
    case "r": source.stepZ(1); break;
    case "f": source.stepZ(-1); break;
    case "0": source.reset(); break;
  }
});

// Send loop: drift-corrected so the mean rate stays on target even when
// individual timers fire late.
let sendEpoch = performance.now();
let sendCount = 0;
function scheduleSend(): void {
  const rate = Math.min(200, Math.max(1, Number(rateInput.value) || 50));
  const periodMs = 1000 / rate;
  const dueAt = sendEpoch + (sendCount + 1) * periodMs;
  setTimeout(() => {
    sendCount += 1;
    const s = session;
    if (s && s.connection === "connected") {
      s.sendPose(source.tick(Date.now()));
    } else {
      // paused while disconnected; restart the grid to avoid a burst
      sendEpoch = performance.now();
      sendCount = 0;
    }
    scheduleSend();
  }, Math.max(0, dueAt - performance.now()));
}
scheduleSend();

// Render loop: decoupled from the network entirely.
function renderFrame(): void {
  const s = session;
  const model = buildSceneModel(
    {
      feedback: s?.feedback ?? null,
      feedbackAtMs: s?.feedbackAtMs ?? null,
      clutchEngaged: s?.clutchEngaged ?? null,
      gripperClosed: s?.gripperClosed ?? null,
      recording: s?.recording ?? false,
      frames: s?.frames ?? 0,
      connection: s?.connection ?? "disconnected",
    },
    Date.now(),
  );
  renderScene(ctx!, model, DEFAULT_LAYOUT);
  connectBtn.textContent = model.connection === "disconnected" ? "connect" : "disconnect";
  recordBtn.textContent = model.recording ? "stop recording" : "start recording";
  statusLine.textContent =
    `${model.connection} | poses sent ${s?.posesSent ?? 0}` +
    (s?.errorsSeen.length ? ` | gateway errors ${s.errorsSeen.length}` : "");
  requestAnimationFrame(renderFrame);
}
requestAnimationFrame(renderFrame);
