/**
 * Socket client for the sculpting service.
 *
 * Every outgoing message is validated against the generated schema
 * before it leaves, so the UI cannot put an invalid message on the
 * wire; incoming text parses through the same schema. Binary frames
 * pass a correlation gate so a stale render never overwrites a newer
 * one, camera updates flow through the rate limiter, and at most one
 * stroke is in flight at a time.
 */

import { ClientMessage, ServerMessage } from "./generated/messages.js";
import type { Error as ErrorMessage, SetCamera, Status } from "./generated/messages.js";
import { FrameGate, decodeFrame } from "./frames.js";
import {
  BrushSettings,
  ConnectionStatus,
  MAX_CAMERA_RATE_HZ,
  OrbitParams,
  UiState,
  brushMessage,
  initialState,
  orbitCamera,
  pointerToPixel,
  pushLog,
  strokeMessage,
} from "./state.js";
import { RateLimiter } from "./throttle.js";

/** The subset of the WebSocket surface the client relies on. */
export interface SocketLike {
  binaryType: string;
  onopen: (() => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: ((event?: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientCallbacks {
  onFrame?(requestId: number, png: Uint8Array): void;
  onStatus?(status: Status): void;
  onServerError?(error: ErrorMessage): void;
  onConnection?(state: ConnectionStatus): void;
  /** Non-fatal UI feedback: ignored strokes, dropped frames, retries. */
  onHint?(text: string): void;
}

export interface ClientOptions {
  reconnectDelayMs?: number;
  cameraRateHz?: number;
}

export class SculptClient {
  readonly state: UiState = initialState();

  private socket: SocketLike | null = null;
  private url = "";
  private closedByUser = false;
  private nextRequestId = 1;
  private strokeRequestId: number | null = null;
  private gate = new FrameGate();
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private readonly reconnectDelayMs: number;
  private readonly cameraLimiter: RateLimiter<SetCamera>;

  constructor(
    private readonly factory: SocketFactory,
    private readonly callbacks: ClientCallbacks = {},
    options: ClientOptions = {},
  ) {
    this.reconnectDelayMs = options.reconnectDelayMs ?? 1000;
    const rate = options.cameraRateHz ?? MAX_CAMERA_RATE_HZ;
    this.cameraLimiter = new RateLimiter<SetCamera>(Math.ceil(1000 / rate), (msg) => {
      this.send(msg);
    });
  }

  connect(url: string): void {
    this.url = url;
    this.closedByUser = false;
    this.openSocket();
  }

  close(): void {
    this.closedByUser = true;
    this.cameraLimiter.dispose();
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.socket?.close();
    this.socket = null;
    this.setConnection("closed");
  }

  /** Validate and send; returns false (with a hint) when not connected. */
  send(message: ClientMessage): boolean {
    const checked = ClientMessage.safeParse(message);
    if (!checked.success) {
      throw new Error(`refusing to send invalid message: ${checked.error.issues[0].message}`);
    }
    if (this.socket === null || this.state.connection !== "connected") {
      this.hint("not connected: message dropped");
      return false;
    }
    this.socket.send(JSON.stringify(checked.data));
    return true;
  }

  requestFrame(): number {
    const id = this.nextRequestId++;
    this.send({ v: 1, type: "request_frame", request_id: id });
    return id;
  }

  setBrush(settings: BrushSettings): void {
    this.state.brush = { ...settings };
    this.send(brushMessage(settings));
  }

  setOrbit(orbit: OrbitParams): void {
    this.state.orbit = { ...orbit };
    this.cameraLimiter.push(orbitCamera(orbit, this.state.frameSize));
  }

  /**
   * Map a canvas click to a pixel stroke. Returns the correlation id,
   * or null when a stroke is already in flight or the send failed.
   */
  stroke(rect: { width: number; height: number }, offsetX: number, offsetY: number): number | null {
    if (this.state.pendingStroke) {
      this.hint("stroke in flight: click ignored");
      return null;
    }
    const pixel = pointerToPixel(rect, offsetX, offsetY, this.state.frameSize);
    const id = this.nextRequestId++;
    this.state.pendingStroke = true;
    this.strokeRequestId = id;
    if (!this.send(strokeMessage(pixel, id))) {
      this.state.pendingStroke = false;
      this.strokeRequestId = null;
      return null;
    }
    return id;
  }

  undo(): void {
    this.send({ v: 1, type: "undo" });
  }

  // -- socket lifecycle ----------------------------------------------

  private openSocket(): void {
    this.setConnection("connecting");
    let socket: SocketLike;
    try {
      socket = this.factory(this.url);
    } catch (exc) {
      this.setConnection("error");
      pushLog(this.state, `connection failed: ${exc}`);
      this.scheduleReconnect();
      return;
    }
    socket.binaryType = "arraybuffer";
    socket.onopen = () => {
      this.setConnection("connected");
      pushLog(this.state, `connected to ${this.url}`);
      this.requestFrame();
    };
    socket.onmessage = (event) => {
      if (typeof event.data === "string") {
        this.handleText(event.data);
      } else {
        this.handleBinary(toBytes(event.data));
      }
    };
    socket.onclose = () => {
      this.socket = null;
      if (this.closedByUser) {
        this.setConnection("closed");
        return;
      }
      this.setConnection("error");
      pushLog(this.state, "connection lost");
      this.scheduleReconnect();
    };
    socket.onerror = () => {
      this.hint("socket error");
    };
    this.socket = socket;
  }

  private scheduleReconnect(): void {
    if (this.closedByUser || this.reconnectTimer !== null) {
      return;
    }
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.openSocket();
    }, this.reconnectDelayMs);
  }

  // -- incoming traffic ----------------------------------------------

  private handleText(text: string): void {
    let raw: unknown;
    try {
      raw = JSON.parse(text);
    } catch {
      this.hint("unparseable server message dropped");
      return;
    }
    const parsed = ServerMessage.safeParse(raw);
    if (!parsed.success) {
      this.hint("schema-invalid server message dropped");
      return;
    }
    const message = parsed.data;
    if (message.type === "error") {
      pushLog(this.state, `error ${message.code}: ${message.text}`);
      if (this.state.pendingStroke) {
        this.state.pendingStroke = false;
        this.strokeRequestId = null;
      }
      this.callbacks.onServerError?.(message);
      return;
    }
    pushLog(this.state, formatStatus(message));
    if (message.type === "status" && message.phase === "stroke_complete") {
      if (this.strokeRequestId === null || message.request_id === this.strokeRequestId) {
        this.state.pendingStroke = false;
        this.strokeRequestId = null;
      }
    }
    this.callbacks.onStatus?.(message);
  }

  private handleBinary(bytes: Uint8Array): void {
    let packet;
    try {
      packet = decodeFrame(bytes);
    } catch (exc) {
      this.hint(`bad binary frame: ${exc}`);
      return;
    }
    if (!this.gate.accept(packet.requestId)) {
      this.hint(`stale frame ${packet.requestId} dropped`);
      return;
    }
    this.state.lastFrame = packet.png;
    this.state.lastFrameId = packet.requestId;
    this.callbacks.onFrame?.(packet.requestId, packet.png);
  }

  // -- plumbing --------------------------------------------------------

  private setConnection(status: ConnectionStatus): void {
    this.state.connection = status;
    this.callbacks.onConnection?.(status);
  }

  private hint(text: string): void {
    pushLog(this.state, text);
    this.callbacks.onHint?.(text);
  }
}

function toBytes(data: unknown): Uint8Array {
  if (data instanceof ArrayBuffer) {
    return new Uint8Array(data);
  }
  if (ArrayBuffer.isView(data)) {
    return new Uint8Array(data.buffer, data.byteOffset, data.byteLength);
  }
  throw new Error(`unsupported binary payload: ${typeof data}`);
}

function formatStatus(status: Status): string {
  const parts = [`status ${status.phase}`];
  if (status.iteration !== null) {
    parts.push(`iteration ${status.iteration}`);
  }
  if (status.loss !== null) {
    parts.push(`loss ${status.loss.total.toFixed(4)}`);
  }
  if (status.detail !== null) {
    parts.push(status.detail);
  }
  return parts.join(" | ");
}
