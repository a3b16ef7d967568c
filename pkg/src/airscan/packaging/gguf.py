"""GGUF metadata scanning: header + key-value section, no tensor data.

GGUF front matter is little-endian: magic "GGUF", u32 version, u64 tensor
count, u64 KV count, then KV pairs.  String values are screened against
the policy's suspicious-pattern list; a hit inside a chat-template key is
Critical because templates are rendered into every conversation.
"""

from __future__ import annotations

import re
import struct
from pathlib import Path
from typing import Any

from ..findings import Finding, Severity
from ..integrity import IoError
from .policy import PolicyConfig

SUPPORTED_VERSIONS = (2, 3)

_U8, _I8, _U16, _I16, _U32, _I32, _F32, _BOOL, _STRING, _ARRAY, _U64, _I64, _F64 = range(13)

_SCALAR_FORMATS: dict[int, str] = {
    _U8: "<B", _I8: "<b", _U16: "<H", _I16: "<h",
    _U32: "<I", _I32: "<i", _F32: "<f",
    _U64: "<Q", _I64: "<q", _F64: "<d",
}


class GGUFError(Exception):
    pass


class NotGGUF(GGUFError):
    pass


class UnsupportedGGUFVersion(GGUFError):
    def __init__(self, version: int):
        self.version = version
        super().__init__(f"unsupported GGUF version {version}")


class TruncatedMetadata(GGUFError):
    pass


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedMetadata(
                f"need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def scalar(self, fmt: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size))[0]

    def string(self) -> str:
        length = self.scalar("<Q")
        raw = self.take(length)
        return raw.decode("utf-8", errors="replace")

    def value(self, type_id: int):
        if type_id in _SCALAR_FORMATS:
            v = self.scalar(_SCALAR_FORMATS[type_id])
            return v
        if type_id == _BOOL:
            return bool(self.take(1)[0])
        if type_id == _STRING:
            return self.string()
        if type_id == _ARRAY:
            elem_type = self.scalar("<I")
            count = self.scalar("<Q")
            return [self.value(elem_type) for _ in range(count)]
        raise TruncatedMetadata(f"unknown value type {type_id} at offset {self.pos}")


def _is_template_key(key: str) -> bool:
    return "template" in key.lower()


def _iter_strings(value: Any):
    if isinstance(value, str):
        yield value
    elif isinstance(value, list):
        for item in value:
            yield from _iter_strings(item)


def scan_gguf_metadata(
    path: Path, policy: PolicyConfig
) -> tuple[dict[str, Any], list[Finding]]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoError(str(path), str(exc)) from exc

    if data[:4] != b"GGUF":
        raise NotGGUF(f"magic is {data[:4]!r}, not b'GGUF'")
    r = _Reader(data)
    r.take(4)
    version = r.scalar("<I")
    if version not in SUPPORTED_VERSIONS:
        raise UnsupportedGGUFVersion(version)
    tensor_count = r.scalar("<Q")
    kv_count = r.scalar("<Q")

    patterns = [re.compile(p, re.IGNORECASE | re.DOTALL) for p in policy.suspicious_template_patterns]
    metadata: dict[str, Any] = {}
    findings: list[Finding] = []
    rel = path.name

    for _ in range(kv_count):
        key = r.string()
        type_id = r.scalar("<I")
        value = r.value(type_id)
        metadata[key] = value
        for text in _iter_strings(value):
            for pat in patterns:
                if pat.search(text):
                    if _is_template_key(key):
                        findings.append(
                            Finding(
                                id="gguf-suspicious-template",
                                severity=Severity.CRITICAL,
                                path=rel,
                                reason=f"chat-template key {key!r} matches suspicious pattern",
                                threat_ref="3.5",
                                locus=key,
                                evidence={
                                    "key": key,
                                    "pattern": pat.pattern,
                                    "value_excerpt": text[:120],
                                },
                            )
                        )
                    else:
                        findings.append(
                            Finding(
                                id="gguf-suspicious-string",
                                severity=Severity.WARN,
                                path=rel,
                                reason=f"metadata key {key!r} matches suspicious pattern",
                                threat_ref="3.5",
                                locus=key,
                                evidence={
                                    "key": key,
                                    "pattern": pat.pattern,
                                    "value_excerpt": text[:120],
                                },
                            )
                        )
    metadata["__header__"] = {
        "version": version,
        "tensor_count": tensor_count,
        "kv_count": kv_count,
    }
    return metadata, findings
