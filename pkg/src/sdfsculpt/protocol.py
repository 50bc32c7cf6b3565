"""Wire protocol for interactive sessions.

Every control message is a UTF-8 JSON document tagged with a version
field ``v`` and a ``type`` discriminator.  Rendered frames travel as
binary frames: an 8-byte big-endian correlation id followed by a PNG
payload.  The module also emits TypeScript (zod) bindings generated from
the same model definitions, so clients validate against exactly this
schema; run ``python -m sdfsculpt.protocol --emit-ts``.
"""

from __future__ import annotations

import json
import struct
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

PROTOCOL_VERSION = 1

Vec3 = tuple[float, float, float]

BRUSH_TEMPLATES = ("quintic", "cubic", "quartic")

ERROR_CODES = (
    "load_failed",
    "no_surface_under_cursor",
    "nothing_to_undo",
    "busy",
    "no_brush",
    "bad_message",
    "out_of_bounds",
    "internal",
)

STATUS_PHASES = ("connected", "ack", "training", "stroke_complete", "undone")


class _Message(BaseModel):
    model_config = ConfigDict(extra="forbid")

    v: Literal[1] = PROTOCOL_VERSION


# ---------------------------------------------------------------------------
# Client -> server


class LoadModel(_Message):
    type: Literal["load_model"] = "load_model"
    checkpoint_path: str


class SetBrush(_Message):
    type: Literal["set_brush"] = "set_brush"
    template: Literal[BRUSH_TEMPLATES] = "quintic"
    radius: float = Field(gt=0, le=1)
    intensity: float = Field(ge=-1, le=1)


class SetCamera(_Message):
    type: Literal["set_camera"] = "set_camera"
    position: Vec3
    target: Vec3 = (0.0, 0.0, 0.0)
    up: Vec3 = (0.0, 0.0, 1.0)
    fov_y: float = Field(default=0.7853981633974483, gt=0, lt=3.141592653589793)
    width: int = Field(default=384, ge=16, le=2048)
    height: int = Field(default=384, ge=16, le=2048)


class Stroke(_Message):
    type: Literal["stroke"] = "stroke"
    x: int = Field(ge=0)
    y: int = Field(ge=0)
    request_id: int = Field(ge=0)


class Undo(_Message):
    type: Literal["undo"] = "undo"


class RequestFrame(_Message):
    type: Literal["request_frame"] = "request_frame"
    request_id: int = Field(ge=0)


ClientMessage = Annotated[
    Union[LoadModel, SetBrush, SetCamera, Stroke, Undo, RequestFrame],
    Field(discriminator="type"),
]


# ---------------------------------------------------------------------------
# Server -> client


class LossRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    total: float
    surface_value: float
    surface_normal: float
    eikonal: float
    empty_space: float


class Status(_Message):
    type: Literal["status"] = "status"
    phase: Literal[STATUS_PHASES]
    iteration: int | None = None
    loss: LossRecord | None = None
    request_id: int | None = None
    detail: str | None = None


class Error(_Message):
    type: Literal["error"] = "error"
    code: Literal[ERROR_CODES]
    text: str


ServerMessage = Annotated[Union[Status, Error], Field(discriminator="type")]

_client_adapter: TypeAdapter = TypeAdapter(ClientMessage)
_server_adapter: TypeAdapter = TypeAdapter(ServerMessage)


class ProtocolError(ValueError):
    pass


def parse_client_message(text: str | bytes):
    try:
        return _client_adapter.validate_json(text)
    except ValidationError as exc:
        raise ProtocolError(f"invalid client message: {exc.errors()[0]['msg']}") from exc


def parse_server_message(text: str | bytes):
    try:
        return _server_adapter.validate_json(text)
    except ValidationError as exc:
        raise ProtocolError(f"invalid server message: {exc.errors()[0]['msg']}") from exc


def serialize_message(message: BaseModel) -> str:
    return message.model_dump_json()


# ---------------------------------------------------------------------------
# Binary frames


FRAME_HEADER = struct.Struct(">Q")


def encode_frame(request_id: int, png: bytes) -> bytes:
    if request_id < 0:
        raise ProtocolError("correlation id must be non-negative")
    return FRAME_HEADER.pack(request_id) + png


def decode_frame(data: bytes) -> tuple[int, bytes]:
    if len(data) < FRAME_HEADER.size:
        raise ProtocolError("binary frame shorter than its header")
    (request_id,) = FRAME_HEADER.unpack_from(data)
    return request_id, data[FRAME_HEADER.size :]


# ---------------------------------------------------------------------------
# TypeScript bindings


_CLIENT_MODELS = [LoadModel, SetBrush, SetCamera, Stroke, Undo, RequestFrame]
_SERVER_MODELS = [Status, Error]


def _zod_number(schema: dict) -> str:
    out = "z.number()"
    if schema.get("type") == "integer":
        out += ".int()"
    if "exclusiveMinimum" in schema:
        out += f".gt({schema['exclusiveMinimum']})"
    if "minimum" in schema:
        out += f".gte({schema['minimum']})"
    if "exclusiveMaximum" in schema:
        out += f".lt({schema['exclusiveMaximum']})"
    if "maximum" in schema:
        out += f".lte({schema['maximum']})"
    return out


def _zod_type(schema: dict, defs: dict) -> str:
    if "$ref" in schema:
        return schema["$ref"].rsplit("/", 1)[-1]
    if "const" in schema:
        return f"z.literal({json.dumps(schema['const'])})"
    if "enum" in schema:
        values = schema["enum"]
        if all(isinstance(v, str) for v in values):
            return f"z.enum([{', '.join(json.dumps(v) for v in values)}])"
        return " .or(".join(f"z.literal({json.dumps(v)})" for v in values) + ")" * (len(values) - 1)
    if "anyOf" in schema:
        options = schema["anyOf"]
        non_null = [o for o in options if o.get("type") != "null"]
        inner = _zod_type(non_null[0], defs) if len(non_null) == 1 else (
            "z.union([" + ", ".join(_zod_type(o, defs) for o in non_null) + "])"
        )
        if len(non_null) < len(options):
            inner += ".nullable()"
        return inner
    kind = schema.get("type")
    if kind in ("integer", "number"):
        return _zod_number(schema)
    if kind == "string":
        return "z.string()"
    if kind == "boolean":
        return "z.boolean()"
    if kind == "null":
        return "z.null()"
    if kind == "array":
        if "prefixItems" in schema:
            parts = ", ".join(_zod_type(s, defs) for s in schema["prefixItems"])
            return f"z.tuple([{parts}])"
        return f"z.array({_zod_type(schema.get('items', {}), defs)})"
    raise ProtocolError(f"cannot translate schema fragment: {schema}")


def _zod_object(name: str, schema: dict, defs: dict) -> str:
    lines = [f"export const {name} = z.object({{"]
    required = set(schema.get("required", []))
    for field_name, sub in schema.get("properties", {}).items():
        expr = _zod_type(sub, defs)
        # Literals stay bare so they can serve as union discriminators.
        if field_name not in required and "default" in sub and "const" not in sub:
            expr += f".default({json.dumps(sub['default'])})"
        lines.append(f"  {field_name}: {expr},")
    lines.append("}).strict();")
    lines.append(f"export type {name} = z.infer<typeof {name}>;")
    return "\n".join(lines)


def emit_typescript() -> str:
    blocks = [
        "// Generated from the sculpting service protocol definitions.",
        "// Regenerate with: python -m sdfsculpt.protocol --emit-ts",
        'import { z } from "zod";',
        "",
        f"export const PROTOCOL_VERSION = {PROTOCOL_VERSION};",
        "export const FRAME_HEADER_BYTES = 8;",
        "",
    ]
    emitted: set[str] = set()
    for model in _CLIENT_MODELS + [LossRecord] + _SERVER_MODELS:
        schema = model.model_json_schema(ref_template="#/$defs/{model}")
        defs = schema.pop("$defs", {})
        for def_name, def_schema in defs.items():
            if def_name not in emitted and def_name == "LossRecord":
                blocks.append(_zod_object(def_name, def_schema, defs))
                blocks.append("")
                emitted.add(def_name)
        if model.__name__ not in emitted:
            blocks.append(_zod_object(model.__name__, schema, defs))
            blocks.append("")
            emitted.add(model.__name__)
    client_names = ", ".join(m.__name__ for m in _CLIENT_MODELS)
    server_names = ", ".join(m.__name__ for m in _SERVER_MODELS)
    blocks.append(
        f'export const ClientMessage = z.discriminatedUnion("type", [{client_names}]);'
    )
    blocks.append("export type ClientMessage = z.infer<typeof ClientMessage>;")
    blocks.append(
        f'export const ServerMessage = z.discriminatedUnion("type", [{server_names}]);'
    )
    blocks.append("export type ServerMessage = z.infer<typeof ServerMessage>;")
    blocks.append("")
    return "\n".join(blocks)


def main(argv: list[str] | None = None) -> int:
    import sys

    args = sys.argv[1:] if argv is None else argv
    if args == ["--emit-ts"]:
        print(emit_typescript())
        return 0
    print("usage: python -m sdfsculpt.protocol --emit-ts", file=sys.stderr)
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
