/**
 * Client-side session state and the pure mappings around it.
 *
 * Everything here is synchronous and side effect free: slider clamping,
 * pointer-to-pixel math, orbit-to-camera conversion, and construction of
 * schema-valid control messages. The socket client owns all effects.
 */

import type { SetBrush, SetCamera, Stroke } from "./generated/messages.js";

export const RADIUS_RANGE: readonly [number, number] = [0.05, 0.25];
export const INTENSITY_RANGE: readonly [number, number] = [0.01, 0.1];

/** Slider detents matching the reference parameter sweep. */
export const RADIUS_DETENTS: readonly number[] = [0.05, 0.1, 0.15, 0.2, 0.25];
export const INTENSITY_DETENTS: readonly number[] = [0.03, 0.05, 0.07];

/** Upper bound on camera messages per second during an orbit drag. */
export const MAX_CAMERA_RATE_HZ = 30;

const DEFAULT_FOV_Y = 0.7853981633974483;
const LOG_LIMIT = 200;

export type ConnectionStatus = "idle" | "connecting" | "connected" | "closed" | "error";

export type TemplateName = "quintic" | "cubic" | "quartic";

export interface BrushSettings {
  template: TemplateName;
  radius: number;
  intensity: number;
  /** Dent mode carves instead of bumps: the intensity sign flips. */
  dent: boolean;
}

export interface OrbitParams {
  azimuthDeg: number;
  elevationDeg: number;
  distance: number;
}

export interface FrameSize {
  width: number;
  height: number;
}

export interface UiState {
  connection: ConnectionStatus;
  brush: BrushSettings;
  orbit: OrbitParams;
  frameSize: FrameSize;
  lastFrame: Uint8Array | null;
  lastFrameId: number;
  pendingStroke: boolean;
  log: string[];
}

export function initialState(): UiState {
  return {
    connection: "idle",
    brush: { template: "quintic", radius: 0.08, intensity: 0.06, dent: false },
    orbit: { azimuthDeg: 35, elevationDeg: 25, distance: 2.2 },
    frameSize: { width: 384, height: 384 },
    lastFrame: null,
    lastFrameId: -1,
    pendingStroke: false,
    log: [],
  };
}

export function clamp(value: number, range: readonly [number, number]): number {
  return Math.min(range[1], Math.max(range[0], value));
}

export function pushLog(state: UiState, line: string): void {
  state.log.push(line);
  if (state.log.length > LOG_LIMIT) {
    state.log.splice(0, state.log.length - LOG_LIMIT);
  }
}

/** Orbit angles to a camera message: z-up spherical around the origin. */
export function orbitCamera(orbit: OrbitParams, size: FrameSize): SetCamera {
  const az = (orbit.azimuthDeg * Math.PI) / 180;
  const el = (Math.min(89, Math.max(-89, orbit.elevationDeg)) * Math.PI) / 180;
  const d = Math.max(orbit.distance, 1e-3);
  return {
    v: 1,
    type: "set_camera",
    position: [d * Math.cos(el) * Math.cos(az), d * Math.cos(el) * Math.sin(az), d * Math.sin(el)],
    target: [0, 0, 0],
    up: [0, 0, 1],
    fov_y: DEFAULT_FOV_Y,
    width: size.width,
    height: size.height,
  };
}

/**
 * Canvas coordinates to image pixel coordinates.
 *
 * The canvas may be displayed at any CSS size; clicks scale by the ratio
 * of the rendered frame to the displayed rectangle and clamp to the
 * frame bounds so edge clicks stay valid.
 */
export function pointerToPixel(
  rect: { width: number; height: number },
  offsetX: number,
  offsetY: number,
  frame: FrameSize,
): { x: number; y: number } {
  const x = Math.floor((offsetX * frame.width) / Math.max(rect.width, 1));
  const y = Math.floor((offsetY * frame.height) / Math.max(rect.height, 1));
  return {
    x: Math.min(frame.width - 1, Math.max(0, x)),
    y: Math.min(frame.height - 1, Math.max(0, y)),
  };
}

/** Brush settings to a SetBrush message; dent mode flips the sign. */
export function brushMessage(brush: BrushSettings): SetBrush {
  const radius = clamp(brush.radius, RADIUS_RANGE);
  const magnitude = clamp(Math.abs(brush.intensity), INTENSITY_RANGE);
  return {
    v: 1,
    type: "set_brush",
    template: brush.template,
    radius,
    intensity: brush.dent ? -magnitude : magnitude,
  };
}

export function strokeMessage(pixel: { x: number; y: number }, requestId: number): Stroke {
  return { v: 1, type: "stroke", x: pixel.x, y: pixel.y, request_id: requestId };
}
