"""Hand-rolled binary fixture builders.

These writers are deliberately independent of the package under test: each
encodes its format from the published layout using struct/json only, so a
fixture doubles as an oracle for the corresponding parser.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path


def write_safetensors(path: Path, tensors: dict, data: bytes, metadata=None) -> Path:
    header: dict = {}
    if metadata is not None:
        header["__metadata__"] = metadata
    header.update(tensors)
    raw = json.dumps(header).encode("utf-8")
    path.write_bytes(struct.pack("<Q", len(raw)) + raw + data)
    return path


GGUF_U8, GGUF_I8, GGUF_U16, GGUF_I16 = 0, 1, 2, 3
GGUF_U32, GGUF_I32, GGUF_F32, GGUF_BOOL = 4, 5, 6, 7
GGUF_STRING, GGUF_ARRAY, GGUF_U64, GGUF_I64, GGUF_F64 = 8, 9, 10, 11, 12

_GGUF_SCALARS = {
    GGUF_U8: "<B", GGUF_I8: "<b", GGUF_U16: "<H", GGUF_I16: "<h",
    GGUF_U32: "<I", GGUF_I32: "<i", GGUF_F32: "<f",
    GGUF_U64: "<Q", GGUF_I64: "<q", GGUF_F64: "<d",
}


def gguf_string(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<Q", len(raw)) + raw


def gguf_value(type_id: int, value) -> bytes:
    if type_id in _GGUF_SCALARS:
        return struct.pack(_GGUF_SCALARS[type_id], value)
    if type_id == GGUF_BOOL:
        return struct.pack("<B", 1 if value else 0)
    if type_id == GGUF_STRING:
        return gguf_string(value)
    if type_id == GGUF_ARRAY:
        elem_type, items = value
        out = struct.pack("<IQ", elem_type, len(items))
        for item in items:
            out += gguf_value(elem_type, item)
        return out
    raise ValueError(f"unsupported type {type_id}")


def write_gguf(path: Path, kv: dict[str, tuple[int, object]],
               version: int = 3, tensor_count: int = 0) -> Path:
    out = b"GGUF" + struct.pack("<IQQ", version, tensor_count, len(kv))
    for key, (type_id, value) in kv.items():
        out += gguf_string(key) + struct.pack("<I", type_id) + gguf_value(type_id, value)
    path.write_bytes(out)
    return path


def pb_varint(value: int) -> bytes:
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def pb_tag(field_number: int, wire_type: int) -> bytes:
    return pb_varint((field_number << 3) | wire_type)


def pb_len(field_number: int, payload: bytes) -> bytes:
    return pb_tag(field_number, 2) + pb_varint(len(payload)) + payload


def pb_string(field_number: int, text: str) -> bytes:
    return pb_len(field_number, text.encode("utf-8"))


def onnx_node(op_type: str, domain: str = "", attrs: list[bytes] = ()) -> bytes:
    body = pb_string(4, op_type)
    if domain:
        body += pb_string(7, domain)
    for attr in attrs:
        body += pb_len(5, attr)
    return body


def onnx_graph(nodes: list[bytes]) -> bytes:
    return b"".join(pb_len(1, n) for n in nodes)


def onnx_model(graph: bytes, extra_fields: bytes = b"") -> bytes:
    # ir_version (field 1, varint) + optional extras + graph (field 7).
    return pb_tag(1, 0) + pb_varint(8) + extra_fields + pb_len(7, graph)
