"""Safetensors header validation without touching tensor data.

Layout: 8-byte little-endian header length, JSON header, raw tensor bytes.
Structural impossibilities raise MalformedHeader; semantic invariant
violations (overlaps, gaps, byte-length mismatches) come back as Critical
findings so a scan can report them all at once.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from ..findings import Finding, Severity
from ..integrity import IoError

MAX_HEADER_LEN = 100 * 1024 * 1024

DTYPE_WIDTHS: dict[str, int] = {
    "F64": 8, "F32": 4, "F16": 2, "BF16": 2,
    "I64": 8, "U64": 8, "I32": 4, "U32": 4,
    "I16": 2, "U16": 2, "I8": 1, "U8": 1,
    "BOOL": 1, "F8_E4M3": 1, "F8_E5M2": 1,
}


class MalformedHeader(Exception):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


@dataclass(frozen=True)
class TensorSlot:
    dtype: str
    shape: tuple[int, ...]
    data_offsets: tuple[int, int]


@dataclass(frozen=True)
class SafetensorsHeader:
    tensors: dict[str, TensorSlot]
    metadata: Optional[dict[str, str]]
    header_len: int
    data_len: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "tensors": {
                name: {
                    "dtype": t.dtype,
                    "shape": list(t.shape),
                    "data_offsets": list(t.data_offsets),
                }
                for name, t in self.tensors.items()
            },
            "metadata": self.metadata,
            "header_len": self.header_len,
            "data_len": self.data_len,
        }


def _shape_product(shape: tuple[int, ...]) -> int:
    n = 1
    for d in shape:
        n *= d
    return n


def parse_safetensors_header(path: Path) -> tuple[SafetensorsHeader, list[Finding]]:
    path = Path(path)
    try:
        file_size = path.stat().st_size
        with open(path, "rb") as fh:
            prefix = fh.read(8)
            if len(prefix) < 8:
                raise MalformedHeader("file shorter than the 8-byte length prefix")
            (header_len,) = struct.unpack("<Q", prefix)
            if header_len > MAX_HEADER_LEN:
                raise MalformedHeader(f"header length {header_len} exceeds {MAX_HEADER_LEN}")
            if 8 + header_len > file_size:
                raise MalformedHeader(
                    f"header length {header_len} exceeds file size {file_size}"
                )
            raw_header = fh.read(header_len)
    except OSError as exc:
        raise IoError(str(path), str(exc)) from exc

    if len(raw_header) < header_len:
        raise MalformedHeader("header bytes truncated")
    try:
        doc = json.loads(raw_header.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedHeader(f"header is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedHeader("header JSON is not an object")

    data_len = file_size - 8 - header_len
    rel = path.name
    findings: list[Finding] = []
    tensors: dict[str, TensorSlot] = {}
    metadata: Optional[dict[str, str]] = None

    for name, entry in doc.items():
        if name == "__metadata__":
            if not isinstance(entry, dict) or not all(
                isinstance(k, str) and isinstance(v, str) for k, v in entry.items()
            ):
                findings.append(
                    Finding(
                        id="st-metadata-type",
                        severity=Severity.CRITICAL,
                        path=rel,
                        reason="__metadata__ must be a string-to-string map",
                        threat_ref="3.5",
                    )
                )
            else:
                metadata = dict(entry)
            continue
        if (
            not isinstance(entry, dict)
            or not isinstance(entry.get("dtype"), str)
            or not isinstance(entry.get("shape"), list)
            or not isinstance(entry.get("data_offsets"), list)
            or len(entry["data_offsets"]) != 2
        ):
            raise MalformedHeader(f"tensor {name!r} entry malformed")
        shape_raw = entry["shape"]
        if not all(isinstance(d, int) and d >= 0 for d in shape_raw):
            findings.append(
                Finding(
                    id="st-shape-invalid",
                    severity=Severity.CRITICAL,
                    path=rel,
                    reason=f"tensor {name!r} has a negative or non-integer dimension",
                    threat_ref="3.2",
                    evidence={"tensor": name, "shape": shape_raw},
                )
            )
            continue
        begin, end = entry["data_offsets"]
        if not (isinstance(begin, int) and isinstance(end, int)):
            raise MalformedHeader(f"tensor {name!r} offsets not integers")
        slot = TensorSlot(entry["dtype"], tuple(shape_raw), (begin, end))
        tensors[name] = slot

        if begin < 0 or end < begin or end > data_len:
            findings.append(
                Finding(
                    id="st-offset-bounds",
                    severity=Severity.CRITICAL,
                    path=rel,
                    reason=f"tensor {name!r} offsets [{begin},{end}) outside data region of {data_len} bytes",
                    threat_ref="2.1",
                    evidence={"tensor": name, "data_offsets": [begin, end], "data_len": data_len},
                )
            )
            continue
        width = DTYPE_WIDTHS.get(slot.dtype)
        if width is None:
            findings.append(
                Finding(
                    id="st-dtype-unknown",
                    severity=Severity.WARN,
                    path=rel,
                    reason=f"tensor {name!r} has unrecognized dtype {slot.dtype!r}",
                    evidence={"tensor": name, "dtype": slot.dtype},
                )
            )
        else:
            expected = _shape_product(slot.shape) * width
            if end - begin != expected:
                findings.append(
                    Finding(
                        id="st-length-mismatch",
                        severity=Severity.CRITICAL,
                        path=rel,
                        reason=(
                            f"tensor {name!r} spans {end - begin} bytes but "
                            f"shape x dtype needs {expected}"
                        ),
                        threat_ref="3.1",
                        evidence={"tensor": name, "actual": end - begin, "expected": expected},
                    )
                )

    # Region tiling: non-empty regions must cover [0, data_len) exactly,
    # with no overlap and no gap.
    regions = sorted(
        (t.data_offsets, name) for name, t in tensors.items() if t.data_offsets[1] > t.data_offsets[0]
    )
    cursor = 0
    for (begin, end), name in regions:
        if begin < 0 or end > data_len:
            continue  # already reported as st-offset-bounds
        if begin < cursor:
            findings.append(
                Finding(
                    id="st-offset-overlap",
                    severity=Severity.CRITICAL,
                    path=rel,
                    reason=f"tensor {name!r} region [{begin},{end}) overlaps a previous region",
                    threat_ref="3.1",
                    evidence={"tensor": name, "begin": begin, "cursor": cursor},
                )
            )
        elif begin > cursor:
            findings.append(
                Finding(
                    id="st-gap",
                    severity=Severity.CRITICAL,
                    path=rel,
                    reason=f"gap of {begin - cursor} unaccounted bytes before tensor {name!r}",
                    threat_ref="2.1",
                    evidence={"tensor": name, "gap_start": cursor, "gap_end": begin},
                )
            )
        cursor = max(cursor, end)
    if cursor != data_len and not any(
        f.id in ("st-offset-bounds",) for f in findings
    ):
        findings.append(
            Finding(
                id="st-gap",
                severity=Severity.CRITICAL,
                path=rel,
                reason=f"data region holds {data_len} bytes but tensors account for {cursor}",
                threat_ref="2.1",
                evidence={"covered": cursor, "data_len": data_len},
            )
        )

    header = SafetensorsHeader(tensors, metadata, header_len, data_len)
    return header, findings
