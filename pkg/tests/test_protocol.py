"""Wire-protocol tests.

The round-trip property is the core contract: serialize then parse is
the identity on every message variant.  Random valid messages are drawn
across the whole union (the generators below are shared with the
acceptance suite); malformed documents must be rejected with a
ProtocolError, never half-parsed.
"""

import json

import numpy as np
import pytest

from sdfsculpt import protocol
from sdfsculpt.protocol import (
    BRUSH_TEMPLATES,
    ERROR_CODES,
    STATUS_PHASES,
    Error,
    LoadModel,
    LossRecord,
    ProtocolError,
    RequestFrame,
    SetBrush,
    SetCamera,
    Status,
    Stroke,
    Undo,
    decode_frame,
    emit_typescript,
    encode_frame,
    parse_client_message,
    parse_server_message,
    serialize_message,
)


def _vec3(rng) -> tuple:
    return tuple(float(v) for v in rng.uniform(-5, 5, 3))


def random_client_message(rng: np.random.Generator):
    kind = rng.integers(0, 6)
    if kind == 0:
        return LoadModel(checkpoint_path=f"models/{rng.integers(1e9)}.json")
    if kind == 1:
        return SetBrush(
            template=BRUSH_TEMPLATES[rng.integers(len(BRUSH_TEMPLATES))],
            radius=float(rng.uniform(1e-6, 1.0)),
            intensity=float(rng.uniform(-1.0, 1.0)),
        )
    if kind == 2:
        return SetCamera(
            position=_vec3(rng),
            target=_vec3(rng),
            up=_vec3(rng),
            fov_y=float(rng.uniform(0.05, 3.0)),
            width=int(rng.integers(16, 2049)),
            height=int(rng.integers(16, 2049)),
        )
    if kind == 3:
        return Stroke(x=int(rng.integers(0, 4096)), y=int(rng.integers(0, 4096)),
                      request_id=int(rng.integers(0, 2**31)))
    if kind == 4:
        return Undo()
    return RequestFrame(request_id=int(rng.integers(0, 2**31)))


def random_server_message(rng: np.random.Generator):
    if rng.integers(0, 3) == 0:
        return Error(code=ERROR_CODES[rng.integers(len(ERROR_CODES))],
                     text=f"detail {rng.integers(1e6)}")
    loss = None
    if rng.integers(0, 2):
        vals = rng.uniform(0, 10, 5)
        loss = LossRecord(total=float(vals.sum()), surface_value=float(vals[0]),
                          surface_normal=float(vals[1]), eikonal=float(vals[2]),
                          empty_space=float(vals[3]))
    return Status(
        phase=STATUS_PHASES[rng.integers(len(STATUS_PHASES))],
        iteration=int(rng.integers(0, 10**6)) if rng.integers(0, 2) else None,
        loss=loss,
        request_id=int(rng.integers(0, 2**31)) if rng.integers(0, 2) else None,
        detail=None,
    )


# ---------------------------------------------------------------------------
# Round trips


def test_every_client_variant_round_trips():
    messages = [
        LoadModel(checkpoint_path="net.json"),
        SetBrush(template="cubic", radius=0.08, intensity=-0.06),
        SetCamera(position=(0.0, 0.0, 2.0)),
        Stroke(x=10, y=20, request_id=3),
        Undo(),
        RequestFrame(request_id=0),
    ]
    for msg in messages:
        assert parse_client_message(serialize_message(msg)) == msg


def test_every_server_variant_round_trips():
    messages = [
        Status(phase="connected"),
        Status(phase="training", iteration=25,
               loss=LossRecord(total=1.0, surface_value=0.5, surface_normal=0.1,
                               eikonal=0.3, empty_space=0.1)),
        Status(phase="stroke_complete", request_id=7, detail="done"),
        Error(code="busy", text="stroke queue full"),
    ]
    for msg in messages:
        assert parse_server_message(serialize_message(msg)) == msg


def test_randomized_round_trip_census():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        msg = random_client_message(rng)
        assert parse_client_message(serialize_message(msg)) == msg
        msg = random_server_message(rng)
        assert parse_server_message(serialize_message(msg)) == msg


def test_parse_accepts_bytes():
    raw = serialize_message(Undo()).encode()
    assert parse_client_message(raw) == Undo()


def test_missing_version_read_as_current():
    # Tolerant reader: writers always stamp v, a missing field parses as
    # the current version, but a wrong version is rejected outright.
    assert parse_client_message('{"type": "undo"}') == Undo()
    assert '"v":1' in serialize_message(Undo())


def test_minimal_documents_fill_defaults():
    msg = parse_client_message('{"v": 1, "type": "set_brush", "radius": 0.08, "intensity": 0.06}')
    assert msg.template == "quintic"
    cam = parse_client_message('{"v": 1, "type": "set_camera", "position": [0, 0, 2]}')
    assert cam.target == (0.0, 0.0, 0.0)
    assert cam.width == 384 and cam.height == 384


# ---------------------------------------------------------------------------
# Rejection


@pytest.mark.parametrize(
    "doc",
    [
        "not json",
        "[]",
        "{}",
        '{"v": 1, "type": "warp_drive"}',
        '{"v": 2, "type": "undo"}',
        '{"v": 1, "type": "undo", "extra": true}',
        '{"v": 1, "type": "set_brush", "radius": 0, "intensity": 0}',
        '{"v": 1, "type": "set_brush", "radius": 2, "intensity": 0}',
        '{"v": 1, "type": "set_brush", "radius": 0.1, "intensity": 1.5}',
        '{"v": 1, "type": "set_brush", "template": "gaussian", "radius": 0.1, "intensity": 0}',
        '{"v": 1, "type": "set_camera", "position": [0, 0]}',
        '{"v": 1, "type": "set_camera", "position": [0, 0, 2], "fov_y": 3.15}',
        '{"v": 1, "type": "set_camera", "position": [0, 0, 2], "width": 4096}',
        '{"v": 1, "type": "stroke", "x": -1, "y": 0, "request_id": 0}',
        '{"v": 1, "type": "stroke", "x": 0, "y": 0, "request_id": -2}',
        '{"v": 1, "type": "stroke", "x": 0, "y": 0}',
        '{"v": 1, "type": "load_model"}',
    ],
)
def test_malformed_client_documents_rejected(doc):
    with pytest.raises(ProtocolError, match="invalid client message"):
        parse_client_message(doc)


@pytest.mark.parametrize(
    "doc",
    [
        '{"v": 1, "type": "status", "phase": "meditating"}',
        '{"v": 1, "type": "error", "code": "flux_capacitor", "text": "x"}',
        '{"v": 1, "type": "error", "code": "busy"}',
        '{"v": 1, "type": "status", "phase": "ack", "loss": {"total": 1}}',
    ],
)
def test_malformed_server_documents_rejected(doc):
    with pytest.raises(ProtocolError, match="invalid server message"):
        parse_server_message(doc)


def test_client_parser_rejects_server_messages():
    with pytest.raises(ProtocolError):
        parse_client_message(serialize_message(Error(code="busy", text="")))


# ---------------------------------------------------------------------------
# Binary frames


def test_binary_frame_round_trip():
    payload = b"\x89PNG fake payload \x00\x01\x02"
    for request_id in (0, 1, 2**31, 2**63):
        data = encode_frame(request_id, payload)
        rid, out = decode_frame(data)
        assert rid == request_id
        assert out == payload


def test_binary_frame_header_is_eight_bytes_big_endian():
    data = encode_frame(258, b"xyz")
    assert data[:8] == (258).to_bytes(8, "big")
    assert data[8:] == b"xyz"


def test_binary_frame_rejects_negative_id_and_short_data():
    with pytest.raises(ProtocolError, match="non-negative"):
        encode_frame(-1, b"")
    with pytest.raises(ProtocolError, match="shorter"):
        decode_frame(b"\x00\x00\x00")


def test_binary_frame_empty_payload():
    rid, payload = decode_frame(encode_frame(5, b""))
    assert rid == 5 and payload == b""


# ---------------------------------------------------------------------------
# TypeScript bindings


def test_emitted_typescript_covers_all_models():
    ts = emit_typescript()
    for name in ("LoadModel", "SetBrush", "SetCamera", "Stroke", "Undo",
                 "RequestFrame", "Status", "Error", "LossRecord"):
        assert f"export const {name} = z.object({{" in ts
    assert 'z.discriminatedUnion("type"' in ts
    assert "export const FRAME_HEADER_BYTES = 8;" in ts
    assert "PROTOCOL_VERSION = 1" in ts
    assert ts.count(".strict()") == 9


def test_emitted_typescript_encodes_bounds():
    ts = emit_typescript()
    assert "z.number().gt(0).lte(1)" in ts          # brush radius
    assert "z.number().int().gte(16).lte(2048)" in ts  # image dimensions
    assert 'z.enum(["quintic", "cubic", "quartic"])' in ts


def test_cli_entry_emits_typescript(capsys):
    assert protocol.main(["--emit-ts"]) == 0
    out = capsys.readouterr().out
    assert "z.discriminatedUnion" in out
    assert protocol.main(["--bogus"]) == 2


def test_serialized_form_is_compact_json():
    doc = serialize_message(Stroke(x=1, y=2, request_id=3))
    parsed = json.loads(doc)
    assert parsed == {"v": 1, "type": "stroke", "x": 1, "y": 2, "request_id": 3}
