import { afterEach, beforeEach, describe, expect, test, vi } from "vitest";

import { SculptClient, SocketLike } from "../src/client.js";
import { ClientMessage } from "../src/generated/messages.js";

class FakeSocket implements SocketLike {
  binaryType = "blob";
  onopen: (() => void) | null = null;
  onmessage: ((event: { data: unknown }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: ((event?: unknown) => void) | null = null;
  sent: string[] = [];
  closed = false;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  // Test drivers.
  open(): void {
    this.onopen?.();
  }

  text(payload: unknown): void {
    this.onmessage?.({ data: JSON.stringify(payload) });
  }

  binary(requestId: number, payload: number[]): void {
    const out = new Uint8Array(8 + payload.length);
    new DataView(out.buffer).setBigUint64(0, BigInt(requestId));
    out.set(payload, 8);
    this.onmessage?.({ data: out.buffer });
  }

  drop(): void {
    this.onclose?.();
  }
}

function status(phase: string, extra: Record<string, unknown> = {}) {
  return { v: 1, type: "status", phase, iteration: null, loss: null, request_id: null, detail: null, ...extra };
}

function sentTypes(socket: FakeSocket): string[] {
  return socket.sent.map((raw) => (JSON.parse(raw) as { type: string }).type);
}

describe("sculpt client", () => {
  let sockets: FakeSocket[];
  let frames: number[];
  let hints: string[];
  let connections: string[];
  let client: SculptClient;

  beforeEach(() => {
    vi.useFakeTimers();
    sockets = [];
    frames = [];
    hints = [];
    connections = [];
    client = new SculptClient(
      () => {
        const socket = new FakeSocket();
        sockets.push(socket);
        return socket;
      },
      {
        onFrame: (id) => frames.push(id),
        onHint: (text) => hints.push(text),
        onConnection: (state) => connections.push(state),
      },
      { reconnectDelayMs: 50 },
    );
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  test("connecting requests an initial frame", () => {
    client.connect("ws://test/ws");
    expect(connections).toEqual(["connecting"]);
    sockets[0].open();
    expect(connections).toEqual(["connecting", "connected"]);
    expect(sockets[0].binaryType).toBe("arraybuffer");
    expect(sentTypes(sockets[0])).toEqual(["request_frame"]);
    const first = ClientMessage.parse(JSON.parse(sockets[0].sent[0]));
    expect(first.type).toBe("request_frame");
  });

  test("every message the client sends passes the schema", () => {
    client.connect("ws://test/ws");
    sockets[0].open();
    client.setBrush({ template: "quintic", radius: 0.08, intensity: 0.06, dent: true });
    client.setOrbit({ azimuthDeg: 10, elevationDeg: 5, distance: 2 });
    client.stroke({ width: 384, height: 384 }, 10, 20);
    client.undo();
    for (const raw of sockets[0].sent) {
      expect(ClientMessage.safeParse(JSON.parse(raw)).success).toBe(true);
    }
  });

  test("only one stroke is in flight at a time", () => {
    client.connect("ws://test/ws");
    sockets[0].open();
    const id = client.stroke({ width: 384, height: 384 }, 192, 192);
    expect(id).not.toBeNull();
    expect(client.state.pendingStroke).toBe(true);

    const ignored = client.stroke({ width: 384, height: 384 }, 10, 10);
    expect(ignored).toBeNull();
    expect(hints.some((h) => h.includes("stroke in flight"))).toBe(true);
    expect(sentTypes(sockets[0]).filter((t) => t === "stroke")).toHaveLength(1);

    sockets[0].text(status("stroke_complete", { request_id: id }));
    expect(client.state.pendingStroke).toBe(false);
    expect(client.stroke({ width: 384, height: 384 }, 10, 10)).not.toBeNull();
  });

  test("a server error clears the pending stroke", () => {
    const errors: string[] = [];
    client = new SculptClient(
      () => {
        const socket = new FakeSocket();
        sockets.push(socket);
        return socket;
      },
      { onServerError: (err) => errors.push(err.code) },
    );
    client.connect("ws://test/ws");
    sockets[sockets.length - 1].open();
    client.stroke({ width: 384, height: 384 }, 0, 0);
    sockets[sockets.length - 1].text({ v: 1, type: "error", code: "no_surface_under_cursor", text: "missed" });
    expect(errors).toEqual(["no_surface_under_cursor"]);
    expect(client.state.pendingStroke).toBe(false);
  });

  test("stale frames never overwrite newer ones", () => {
    client.connect("ws://test/ws");
    sockets[0].open();
    sockets[0].binary(3, [1]);
    sockets[0].binary(2, [2]);
    sockets[0].binary(3, [3]);
    sockets[0].binary(5, [4]);
    expect(frames).toEqual([3, 3, 5]);
    expect(client.state.lastFrameId).toBe(5);
    expect(hints.some((h) => h.includes("stale frame 2"))).toBe(true);
  });

  test("schema-invalid outgoing messages throw and are never sent", () => {
    client.connect("ws://test/ws");
    sockets[0].open();
    const before = sockets[0].sent.length;
    expect(() =>
      client.send({ v: 1, type: "set_brush", template: "quintic", radius: -1, intensity: 0 }),
    ).toThrow(/invalid message/);
    expect(sockets[0].sent.length).toBe(before);
  });

  test("sending while disconnected drops with a hint", () => {
    expect(client.send({ v: 1, type: "undo" })).toBe(false);
    expect(client.stroke({ width: 384, height: 384 }, 0, 0)).toBeNull();
    expect(client.state.pendingStroke).toBe(false);
    expect(hints.some((h) => h.includes("not connected"))).toBe(true);
  });

  test("a dropped connection reconnects and requests a fresh frame", () => {
    client.connect("ws://test/ws");
    sockets[0].open();
    expect(sentTypes(sockets[0])).toEqual(["request_frame"]);
    sockets[0].drop();
    expect(connections[connections.length - 1]).toBe("error");

    vi.advanceTimersByTime(60);
    expect(sockets).toHaveLength(2);
    sockets[1].open();
    expect(sentTypes(sockets[1])).toEqual(["request_frame"]);
    const first = JSON.parse(sockets[0].sent[0]) as { request_id: number };
    const second = JSON.parse(sockets[1].sent[0]) as { request_id: number };
    expect(second.request_id).toBeGreaterThan(first.request_id);
  });

  test("orbit updates are rate limited with a trailing send", () => {
    client.connect("ws://test/ws");
    sockets[0].open();
    const before = sockets[0].sent.length;
    for (let i = 0; i <= 45; i += 1) {
      client.setOrbit({ azimuthDeg: i, elevationDeg: 0, distance: 2 });
    }
    vi.advanceTimersByTime(100);
    const cameras = sockets[0].sent.slice(before).map((raw) => ClientMessage.parse(JSON.parse(raw)));
    expect(cameras.length).toBeLessThanOrEqual(2);
    const last = cameras[cameras.length - 1];
    if (last.type !== "set_camera") {
      throw new Error("expected a camera message");
    }
    // The final drag position must land: azimuth 45 degrees.
    expect(last.position[0]).toBeCloseTo(2 * Math.cos((45 * Math.PI) / 180), 10);
  });

  test("user close stops the reconnect loop", () => {
    client.connect("ws://test/ws");
    sockets[0].open();
    client.close();
    vi.advanceTimersByTime(500);
    expect(sockets).toHaveLength(1);
    expect(client.state.connection).toBe("closed");
  });
});
