/** Binary frame envelope: an 8-byte big-endian correlation id, then PNG. */

import { FRAME_HEADER_BYTES } from "./generated/messages.js";

export interface FramePacket {
  requestId: number;
  png: Uint8Array;
}

export function decodeFrame(data: Uint8Array): FramePacket {
  if (data.byteLength < FRAME_HEADER_BYTES) {
    throw new Error("binary frame shorter than its header");
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const id = view.getBigUint64(0);
  if (id > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new Error(`correlation id out of range: ${id}`);
  }
  return { requestId: Number(id), png: data.slice(FRAME_HEADER_BYTES) };
}

/**
 * Stale-frame guard. Correlation ids are monotonic per client, so a
 * frame older than the newest one shown must never overwrite the canvas;
 * equal ids pass because a stroke streams several previews under one id.
 */
export class FrameGate {
  private newest = -1;

  accept(requestId: number): boolean {
    if (requestId < this.newest) {
      return false;
    }
    this.newest = requestId;
    return true;
  }
}
