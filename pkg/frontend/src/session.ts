/**
 * Operator session: one WebSocket to the gateway, indicator state that
 * is only ever set from planner/recorder echoes, never assumed locally.
 *
 * Pressing clutch or gripper sends the button event and leaves the
 * indicator untouched; the planner's state echo is what flips it.  The
 * same applies to recording status.  Until a first echo arrives the
 * indicators read null (shown as unknown in the UI), which is the
 * truthful answer.
 */

import {
  BUTTON,
  PHONE_POSE,
  PLANNER_STATE,
  PoseMsg,
  RECORD_CTL,
  RECORD_STATUS,
  ROBOT_FEEDBACK,
  RobotFeedback,
  StatusReply,
  advertiseFrame,
  buttonFrame,
  decodeFeedback,
  decodePlannerEcho,
  decodeRecordStatus,
  decodeStatusReply,
  normalizeNamespace,
  parseGatewayFrame,
  poseFrame,
  recordFrame,
  sameTopic,
  statusFrame,
  subscribeFrame,
  wireTopic,
} from "./protocol.js";

export type ConnectionState = "disconnected" | "connecting" | "connected";

// Handler params stay loose so both the browser WebSocket and the node
// "ws" class are structurally assignable.
export interface WebSocketLike {
  onopen: ((...args: any[]) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((...args: any[]) => void) | null;
  onerror: ((...args: any[]) => void) | null;
  send(data: string): void;
  close(): void;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export interface SessionConfig {
  url: string;
  namespace?: string;
  sendRateHz?: number;
}

export class UiSession {
  url: string;
  namespace: string;
  sendRateHz: number;
  connection: ConnectionState = "disconnected";

  /** null until the planner's first state echo. */
  clutchEngaged: boolean | null = null;
  gripperClosed: boolean | null = null;
  plannerEchoes = 0;

  recording = false;
  frames = 0;
  episodes = 0;

  feedback: RobotFeedback | null = null;
  feedbackAtMs: number | null = null;

  statusReply: StatusReply | null = null;
  errorsSeen: string[] = [];
  posesSent = 0;

  onChange: (() => void) | null = null;

  private ws: WebSocketLike | null = null;

  constructor(
    config: SessionConfig,
    private makeSocket: WebSocketFactory,
    private now: () => number = () => Date.now(),
  ) {
    this.url = config.url;
    this.namespace = normalizeNamespace(config.namespace ?? "");
    this.sendRateHz = config.sendRateHz ?? 50;
  }

  connect(): void {
    if (this.ws) return;
    this.connection = "connecting";
    const ws = this.makeSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      for (const base of [PHONE_POSE, BUTTON, RECORD_CTL]) {
        ws.send(advertiseFrame(wireTopic(this.namespace, base)));
      }
      for (const base of [ROBOT_FEEDBACK, PLANNER_STATE, RECORD_STATUS]) {
        ws.send(subscribeFrame(wireTopic(this.namespace, base)));
      }
      this.connection = "connected";
      this.changed();
    };
    ws.onmessage = (ev) => this.handleMessage(String(ev.data));
    ws.onclose = () => {
      this.ws = null;
      this.connection = "disconnected";
      this.changed();
    };
    ws.onerror = () => {
      // onclose follows; nothing to do beyond not crashing
    };
    this.changed();
  }

  disconnect(): void {
    const ws = this.ws;
    this.ws = null;
    this.connection = "disconnected";
    if (ws) {
      ws.onclose = null;
      ws.close();
    }
    this.changed();
  }

  /**
   * Pick a different arm at runtime.  Allowed before or between
   * episodes only; reconnects so the new namespace starts from a clean,
   * truthfully-unknown indicator state.
   */
  setNamespace(raw: string): void {
    if (this.recording) throw new Error("cannot change namespace while recording");
    const ns = normalizeNamespace(raw);
    if (ns === this.namespace) return;
    const wasConnected = this.ws !== null;
    if (wasConnected) this.disconnect();
    this.namespace = ns;
    this.clutchEngaged = null;
    this.gripperClosed = null;
    this.feedback = null;
    this.feedbackAtMs = null;
    this.recording = false;
    this.frames = 0;
    this.episodes = 0;
    if (wasConnected) this.connect();
    this.changed();
  }

  /** Send one pose sample; false while disconnected (tick loop pauses). */
  sendPose(msg: PoseMsg): boolean {
    if (this.connection !== "connected" || !this.ws) return false;
    this.ws.send(poseFrame(wireTopic(this.namespace, PHONE_POSE), msg));
    this.posesSent += 1;
    return true;
  }

  pressClutch(): boolean {
    return this.sendButton("volume_up");
  }

  pressGripper(): boolean {
    return this.sendButton("volume_down");
  }

  private sendButton(button: "volume_up" | "volume_down"): boolean {
    if (this.connection !== "connected" || !this.ws) return false;
    this.ws.send(buttonFrame(wireTopic(this.namespace, BUTTON), button, this.now()));
    // indicator deliberately unchanged: the planner echo decides
    return true;
  }

  startRecording(task: string): boolean {
    return this.sendRecord("start", task);
  }

  stopRecording(): boolean {
    return this.sendRecord("stop");
  }

  discardRecording(): boolean {
    return this.sendRecord("discard");
  }

  private sendRecord(action: "start" | "stop" | "discard", task = ""): boolean {
    if (this.connection !== "connected" || !this.ws) return false;
    this.ws.send(recordFrame(wireTopic(this.namespace, RECORD_CTL), action, task));
    return true;
  }

  requestStatus(): boolean {
    if (this.connection !== "connected" || !this.ws) return false;
    this.statusReply = null;
    this.ws.send(statusFrame());
    return true;
  }

  private handleMessage(text: string): void {
    const frame = parseGatewayFrame(text);
    if (!frame) return;
    if (frame.op === "error") {
      this.errorsSeen.push(frame.reason);
      this.changed();
      return;
    }
    if (frame.op === "status") {
      this.statusReply = decodeStatusReply(frame as unknown as Record<string, unknown>);
      this.changed();
      return;
    }
    try {
      if (sameTopic(frame.topic, this.namespace, PLANNER_STATE)) {
        const echo = decodePlannerEcho(frame.msg);
        this.clutchEngaged = echo.clutchEngaged;
        this.gripperClosed = echo.gripperClosed;
        this.plannerEchoes += 1;
      } else if (sameTopic(frame.topic, this.namespace, RECORD_STATUS)) {
        const status = decodeRecordStatus(frame.msg);
        this.recording = status.recording;
        this.frames = status.frames;
        this.episodes = status.episodes;
      } else if (sameTopic(frame.topic, this.namespace, ROBOT_FEEDBACK)) {
        this.feedback = decodeFeedback(frame.msg);
        this.feedbackAtMs = this.now();
      } else {
        return; // other namespaces' traffic is not ours to interpret
      }
    } catch {
      return; // a malformed forwarded frame must not kill the session
    }
    this.changed();
  }

  private changed(): void {
    this.onChange?.();
  }
}
