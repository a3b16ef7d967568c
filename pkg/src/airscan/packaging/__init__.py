"""Static packaging and serialization safety scans plus the loader guard."""

from .gguf import NotGGUF, TruncatedMetadata, UnsupportedGGUFVersion, scan_gguf_metadata
from .guard import GuardOutcome, GuardResult, enforce_loader_policy
from .inventory import FileInventory, FileKind, InventoryEntry, inventory_files
from .onnx import MalformedProtobuf, scan_onnx_ops
from .pickle_scan import (
    CorruptZip,
    NotAPickle,
    TruncatedStream,
    scan_pickle_container,
    scan_pickle_stream,
)
from .policy import PolicyConfig, default_policy, load_policy, policy_digest
from .safetensors import MalformedHeader, SafetensorsHeader, parse_safetensors_header

__all__ = [
    "CorruptZip",
    "FileInventory",
    "FileKind",
    "GuardOutcome",
    "GuardResult",
    "InventoryEntry",
    "MalformedHeader",
    "MalformedProtobuf",
    "NotAPickle",
    "NotGGUF",
    "PolicyConfig",
    "SafetensorsHeader",
    "TruncatedMetadata",
    "TruncatedStream",
    "UnsupportedGGUFVersion",
    "default_policy",
    "enforce_loader_policy",
    "inventory_files",
    "load_policy",
    "parse_safetensors_header",
    "policy_digest",
    "scan_gguf_metadata",
    "scan_onnx_ops",
    "scan_pickle_container",
    "scan_pickle_stream",
]
