"""Typed file inventory: classify package contents by magic bytes.

Content decides; the extension only breaks ties.  Native binaries and
pickle containers in particular are recognized by magic so a renamed
`.safetensors` cannot hide either.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any

from ..findings import Finding, Severity
from ..integrity import IoError, iter_regular_files
from .policy import PolicyConfig

MAGIC_LEN = 8

_ELF = b"\x7fELF"
_PE = b"MZ"
_MACHO = (
    b"\xfe\xed\xfa\xce", b"\xce\xfa\xed\xfe",
    b"\xfe\xed\xfa\xcf", b"\xcf\xfa\xed\xfe",
    b"\xca\xfe\xba\xbe",
)

_TOKENIZER_NAMES = {
    "vocab.json", "merges.txt", "tokenizer.json", "tokenizer.model",
    "tokenizer_config.json", "special_tokens_map.json",
}

# First byte of a bare pickle stream for each protocol family: PROTO for
# protocol >= 2; common protocol 0/1 openers for the rest.
_PICKLE_FIRST_BYTES = frozenset(b"\x80(]}clNIJKFSUVMTq" b"\x85\x86\x87hjpQ")


class FileKind(str, Enum):
    WEIGHTS_SAFETENSORS = "WeightsSafetensors"
    WEIGHTS_GGUF = "WeightsGGUF"
    WEIGHTS_PICKLE = "WeightsPickleContainer"
    ONNX_GRAPH = "OnnxGraph"
    CONFIG = "Config"
    TOKENIZER_ASSET = "TokenizerAsset"
    NATIVE_BINARY = "NativeBinary"
    DOCUMENT = "Document"
    UNKNOWN = "Unknown"


WEIGHTS_KINDS = frozenset(
    {FileKind.WEIGHTS_SAFETENSORS, FileKind.WEIGHTS_GGUF,
     FileKind.WEIGHTS_PICKLE, FileKind.ONNX_GRAPH}
)


@dataclass(frozen=True)
class InventoryEntry:
    relative_path: str
    size_bytes: int
    detected_kind: FileKind
    magic: str

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "relative_path": self.relative_path,
            "size_bytes": self.size_bytes,
            "detected_kind": self.detected_kind.value,
            "magic": self.magic,
        }


@dataclass(frozen=True)
class FileInventory:
    entries: tuple[InventoryEntry, ...]

    def of_kind(self, *kinds: FileKind) -> list[InventoryEntry]:
        return [e for e in self.entries if e.detected_kind in kinds]

    def weights_artifacts(self) -> list[InventoryEntry]:
        return [e for e in self.entries if e.detected_kind in WEIGHTS_KINDS]

    def to_json_list(self) -> list[dict[str, Any]]:
        return [e.to_json_dict() for e in self.entries]


def _looks_like_safetensors(head: bytes, size: int) -> bool:
    if size < 9 or len(head) < 9:
        return False
    (header_len,) = struct.unpack_from("<Q", head, 0)
    return 0 < header_len <= size - 8 and head[8:9] in (b"{", b" ")


def classify_bytes(head: bytes, size: int, name: str) -> FileKind:
    suffix = Path(name).suffix.lower()
    if head.startswith(_ELF) or head.startswith(_PE) or any(
        head.startswith(m) for m in _MACHO
    ):
        return FileKind.NATIVE_BINARY
    if head.startswith(b"PK"):
        return FileKind.WEIGHTS_PICKLE
    if head.startswith(b"GGUF"):
        return FileKind.WEIGHTS_GGUF
    if _looks_like_safetensors(head, size) and suffix == ".safetensors":
        return FileKind.WEIGHTS_SAFETENSORS
    if suffix in (".pkl", ".pickle", ".pt", ".bin", ".ckpt") and head[:1] and head[0] in _PICKLE_FIRST_BYTES:
        return FileKind.WEIGHTS_PICKLE
    if suffix == ".onnx":
        return FileKind.ONNX_GRAPH
    if Path(name).name in _TOKENIZER_NAMES:
        return FileKind.TOKENIZER_ASSET
    if suffix == ".json":
        return FileKind.CONFIG
    if suffix in (".md", ".txt", ".rst") or Path(name).name.upper().startswith(("LICENSE", "README", "NOTICE")):
        return FileKind.DOCUMENT
    return FileKind.UNKNOWN


def inventory_files(
    root: Path, policy: PolicyConfig
) -> tuple[FileInventory, list[Finding]]:
    root = Path(root)
    if not root.is_dir():
        raise IoError(str(root), "not a directory")
    entries: list[InventoryEntry] = []
    findings: list[Finding] = []
    for rel, real in iter_regular_files(root):
        try:
            size = real.stat().st_size
            with open(real, "rb") as fh:
                head = fh.read(16)
        except OSError as exc:
            raise IoError(rel, str(exc)) from exc
        kind = classify_bytes(head, size, rel)
        entries.append(InventoryEntry(rel, size, kind, head[:MAGIC_LEN].hex()))
        if kind is FileKind.NATIVE_BINARY:
            findings.append(
                Finding(
                    id="native-binary",
                    severity=Severity.WARN,
                    path=rel,
                    reason="native binary inside model package",
                    threat_ref="2.2",
                    evidence={"magic": head[:4].hex()},
                )
            )
        suffix = Path(rel).suffix.lower()
        if suffix not in policy.extension_allowlist:
            findings.append(
                Finding(
                    id="ext-not-allowlisted",
                    severity=Severity.WARN,
                    path=rel,
                    reason=f"extension {suffix or '(none)'} outside policy allowlist",
                    evidence={"extension": suffix},
                )
            )
    entries.sort(key=lambda e: e.relative_path)
    return FileInventory(tuple(entries)), findings
