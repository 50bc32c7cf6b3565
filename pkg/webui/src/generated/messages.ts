// Generated from the sculpting service protocol definitions.
// Regenerate with: python -m sdfsculpt.protocol --emit-ts
import { z } from "zod";

export const PROTOCOL_VERSION = 1;
export const FRAME_HEADER_BYTES = 8;

export const LoadModel = z.object({
  v: z.literal(1),
  type: z.literal("load_model"),
  checkpoint_path: z.string(),
}).strict();
export type LoadModel = z.infer<typeof LoadModel>;

export const SetBrush = z.object({
  v: z.literal(1),
  type: z.literal("set_brush"),
  template: z.enum(["quintic", "cubic", "quartic"]).default("quintic"),
  radius: z.number().gt(0).lte(1),
  intensity: z.number().gte(-1).lte(1),
}).strict();
export type SetBrush = z.infer<typeof SetBrush>;

export const SetCamera = z.object({
  v: z.literal(1),
  type: z.literal("set_camera"),
  position: z.tuple([z.number(), z.number(), z.number()]),
  target: z.tuple([z.number(), z.number(), z.number()]).default([0.0, 0.0, 0.0]),
  up: z.tuple([z.number(), z.number(), z.number()]).default([0.0, 0.0, 1.0]),
  fov_y: z.number().gt(0).lt(3.141592653589793).default(0.7853981633974483),
  width: z.number().int().gte(16).lte(2048).default(384),
  height: z.number().int().gte(16).lte(2048).default(384),
}).strict();
export type SetCamera = z.infer<typeof SetCamera>;

export const Stroke = z.object({
  v: z.literal(1),
  type: z.literal("stroke"),
  x: z.number().int().gte(0),
  y: z.number().int().gte(0),
  request_id: z.number().int().gte(0),
}).strict();
export type Stroke = z.infer<typeof Stroke>;

export const Undo = z.object({
  v: z.literal(1),
  type: z.literal("undo"),
}).strict();
export type Undo = z.infer<typeof Undo>;

export const RequestFrame = z.object({
  v: z.literal(1),
  type: z.literal("request_frame"),
  request_id: z.number().int().gte(0),
}).strict();
export type RequestFrame = z.infer<typeof RequestFrame>;

export const LossRecord = z.object({
  total: z.number(),
  surface_value: z.number(),
  surface_normal: z.number(),
  eikonal: z.number(),
  empty_space: z.number(),
}).strict();
export type LossRecord = z.infer<typeof LossRecord>;

export const Status = z.object({
  v: z.literal(1),
  type: z.literal("status"),
  phase: z.enum(["connected", "ack", "training", "stroke_complete", "undone"]),
  iteration: z.number().int().nullable().default(null),
  loss: LossRecord.nullable().default(null),
  request_id: z.number().int().nullable().default(null),
  detail: z.string().nullable().default(null),
}).strict();
export type Status = z.infer<typeof Status>;

export const Error = z.object({
  v: z.literal(1),
  type: z.literal("error"),
  code: z.enum(["load_failed", "no_surface_under_cursor", "nothing_to_undo", "busy", "no_brush", "bad_message", "out_of_bounds", "internal"]),
  text: z.string(),
}).strict();
export type Error = z.infer<typeof Error>;

export const ClientMessage = z.discriminatedUnion("type", [LoadModel, SetBrush, SetCamera, Stroke, Undo, RequestFrame]);
export type ClientMessage = z.infer<typeof ClientMessage>;
export const ServerMessage = z.discriminatedUnion("type", [Status, Error]);
export type ServerMessage = z.infer<typeof ServerMessage>;

