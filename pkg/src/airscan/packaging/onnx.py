"""ONNX graph operator extraction via a generic protobuf wire walker.

Only wire-format framing is decoded (varint, 64-bit, length-delimited,
32-bit); the walker then descends the few field numbers that lead from the
model to node op_type/domain strings, including subgraphs carried inside
attributes.  No protobuf runtime is required for that.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator, Optional

from ..findings import Finding, Severity
from ..integrity import IoError
from .policy import PolicyConfig

# Field numbers on the path model -> graph -> node -> op strings.
MODEL_GRAPH = 7
GRAPH_NODE = 1
NODE_OP_TYPE = 4
NODE_ATTRIBUTE = 5
NODE_DOMAIN = 7
ATTR_SUBGRAPH = 6
ATTR_SUBGRAPHS = 11

STANDARD_DOMAINS = frozenset({"", "ai.onnx", "ai.onnx.ml"})


class MalformedProtobuf(Exception):
    def __init__(self, offset: int, detail: str = ""):
        self.offset = offset
        super().__init__(f"malformed protobuf at byte {offset}" + (f": {detail}" if detail else ""))


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    start = pos
    while True:
        if pos >= len(data):
            raise MalformedProtobuf(start, "varint runs past end")
        byte = data[pos]
        result |= (byte & 0x7F) << shift
        pos += 1
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 63:
            raise MalformedProtobuf(start, "varint longer than 64 bits")


def iter_fields(data: bytes) -> Iterator[tuple[int, int, bytes, int]]:
    """Yield (field_number, wire_type, payload, offset) for one message."""
    pos = 0
    while pos < len(data):
        offset = pos
        key, pos = _read_varint(data, pos)
        field_number = key >> 3
        wire_type = key & 7
        if field_number == 0:
            raise MalformedProtobuf(offset, "field number 0")
        if wire_type == 0:
            value, pos = _read_varint(data, pos)
            payload = value.to_bytes((value.bit_length() + 7) // 8 or 1, "little")
        elif wire_type == 1:
            if pos + 8 > len(data):
                raise MalformedProtobuf(offset, "64-bit field truncated")
            payload = data[pos : pos + 8]
            pos += 8
        elif wire_type == 2:
            length, pos = _read_varint(data, pos)
            if pos + length > len(data):
                raise MalformedProtobuf(offset, "length-delimited field truncated")
            payload = data[pos : pos + length]
            pos += length
        elif wire_type == 5:
            if pos + 4 > len(data):
                raise MalformedProtobuf(offset, "32-bit field truncated")
            payload = data[pos : pos + 4]
            pos += 4
        else:
            raise MalformedProtobuf(offset, f"unsupported wire type {wire_type}")
        yield field_number, wire_type, payload, offset


def _walk_graph(graph: bytes, ops: list[tuple[str, str]]) -> None:
    for field_number, wire_type, payload, _ in iter_fields(graph):
        if field_number == GRAPH_NODE and wire_type == 2:
            op_type: Optional[str] = None
            domain = ""
            subgraphs: list[bytes] = []
            for nf, nw, np_, _ in iter_fields(payload):
                if nf == NODE_OP_TYPE and nw == 2:
                    op_type = np_.decode("utf-8", errors="replace")
                elif nf == NODE_DOMAIN and nw == 2:
                    domain = np_.decode("utf-8", errors="replace")
                elif nf == NODE_ATTRIBUTE and nw == 2:
                    for af, aw, ap, _ in iter_fields(np_):
                        if af in (ATTR_SUBGRAPH, ATTR_SUBGRAPHS) and aw == 2:
                            subgraphs.append(ap)
            if op_type is not None:
                ops.append((op_type, domain))
            for sub in subgraphs:
                _walk_graph(sub, ops)


def scan_onnx_ops(
    path: Path, policy: PolicyConfig
) -> tuple[list[str], list[Finding]]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoError(str(path), str(exc)) from exc
    if not data:
        raise MalformedProtobuf(0, "empty file")

    ops: list[tuple[str, str]] = []
    for field_number, wire_type, payload, _ in iter_fields(data):
        if field_number == MODEL_GRAPH and wire_type == 2:
            _walk_graph(payload, ops)

    findings: list[Finding] = []
    rel = path.name
    for op_type, domain in sorted(set(ops)):
        custom = domain not in STANDARD_DOMAINS
        if custom:
            findings.append(
                Finding(
                    id="onnx-custom-domain",
                    severity=Severity.CRITICAL,
                    path=rel,
                    reason=f"operator {op_type!r} from custom domain {domain!r}",
                    threat_ref="2.3",
                    evidence={"op_type": op_type, "domain": domain},
                )
            )
        elif op_type not in policy.allowed_onnx_ops:
            findings.append(
                Finding(
                    id="onnx-op-not-allowlisted",
                    severity=Severity.CRITICAL,
                    path=rel,
                    reason=f"operator {op_type!r} outside the op allowlist",
                    threat_ref="2.3",
                    evidence={"op_type": op_type, "domain": domain},
                )
            )
    op_names = sorted({op for op, _ in ops})
    return op_names, findings
