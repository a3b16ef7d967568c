"""Load-time guard: one Pass/Blocked/Fail decision per weights artifact.

Decision order is fail-closed: policy blocks and Critical serializer
findings dominate, then reference-manifest integrity, then Pass.  Any
scanner error degrades to Blocked, never to Pass.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from ..findings import Finding, Severity
from ..integrity import HashManifest, hash_file
from .gguf import scan_gguf_metadata
from .inventory import FileInventory, FileKind, inventory_files
from .onnx import scan_onnx_ops
from .pickle_scan import scan_pickle_container
from .policy import PolicyConfig, policy_digest
from .safetensors import parse_safetensors_header

_FORMAT_NAMES: dict[FileKind, str] = {
    FileKind.WEIGHTS_SAFETENSORS: "safetensors",
    FileKind.WEIGHTS_GGUF: "gguf",
    FileKind.WEIGHTS_PICKLE: "pickle/pt",
    FileKind.ONNX_GRAPH: "onnx",
}


class GuardOutcome(str, Enum):
    PASS = "Pass"
    BLOCKED = "Blocked"
    FAIL = "Fail"


@dataclass(frozen=True)
class GuardResult:
    artifact_path: str
    serialization: str
    outcome: GuardOutcome
    reason: str
    policy_digest: str
    timing_ms: int
    hash_checked: bool = False

    @property
    def display(self) -> str:
        """Outcome column text: Pass (hash match) / Blocked (fail) / Fail (hash mismatch)."""
        if self.outcome is GuardOutcome.PASS:
            return "Pass (hash match)" if self.hash_checked else "Pass (policy)"
        if self.outcome is GuardOutcome.BLOCKED:
            return "Blocked (fail)"
        return "Fail (hash mismatch)"

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "artifact_path": self.artifact_path,
            "serialization": self.serialization,
            "outcome": self.outcome.value,
            "display": self.display,
            "reason": self.reason,
            "policy_digest": self.policy_digest,
            "timing_ms": self.timing_ms,
        }


def scan_weights_artifact(
    path: Path, kind: FileKind, policy: PolicyConfig
) -> list[Finding]:
    """Run the format-specific serializer scan for one artifact."""
    if kind is FileKind.WEIGHTS_PICKLE:
        return scan_pickle_container(path)
    if kind is FileKind.WEIGHTS_SAFETENSORS:
        _, findings = parse_safetensors_header(path)
        return findings
    if kind is FileKind.WEIGHTS_GGUF:
        _, findings = scan_gguf_metadata(path, policy)
        return findings
    if kind is FileKind.ONNX_GRAPH:
        _, findings = scan_onnx_ops(path, policy)
        return findings
    return []


def enforce_loader_policy(
    root: Path,
    policy: PolicyConfig,
    manifest: Optional[HashManifest] = None,
    inventory: Optional[FileInventory] = None,
    scan_findings: Optional[dict[str, list[Finding]]] = None,
) -> list[GuardResult]:
    """Produce exactly one GuardResult per weights artifact under root.

    ``inventory`` and ``scan_findings`` allow a caller that already ran the
    scans to reuse them; left as None, both are computed here.
    """
    root = Path(root)
    if inventory is None:
        inventory, _ = inventory_files(root, policy)
    digest = policy_digest(policy)
    results: list[GuardResult] = []

    for entry in inventory.weights_artifacts():
        start = time.monotonic()
        serialization = _FORMAT_NAMES[entry.detected_kind]
        outcome: GuardOutcome
        reason: str
        hash_checked = False

        try:
            if scan_findings is not None and entry.relative_path in scan_findings:
                findings = scan_findings[entry.relative_path]
            else:
                findings = scan_weights_artifact(
                    root / entry.relative_path, entry.detected_kind, policy
                )
            criticals = [f for f in findings if f.severity is Severity.CRITICAL]

            if policy.blocks_format(serialization):
                outcome = GuardOutcome.BLOCKED
                reason = f"policy blocked_formats forbids serialization {serialization!r}"
            elif criticals:
                outcome = GuardOutcome.BLOCKED
                reason = f"critical serializer finding: {criticals[0].id}"
            elif policy.require_hash_match and manifest is not None:
                expected = manifest.digest_for(entry.relative_path)
                if expected is None:
                    outcome = GuardOutcome.FAIL
                    reason = "artifact absent from reference hash manifest"
                else:
                    actual = hash_file(root / entry.relative_path)
                    hash_checked = True
                    if actual == expected:
                        outcome = GuardOutcome.PASS
                        reason = "sha256 matches reference manifest"
                    else:
                        outcome = GuardOutcome.FAIL
                        reason = (
                            f"sha256 mismatch vs reference manifest "
                            f"(expected {expected[:12]}.., got {actual[:12]}..)"
                        )
            else:
                outcome = GuardOutcome.PASS
                reason = f"serialization {serialization!r} allowed; no reference manifest checked"
        except Exception as exc:  # noqa: BLE001 - fail closed on any scan error
            outcome = GuardOutcome.BLOCKED
            reason = f"scan error: {exc}"

        timing_ms = int((time.monotonic() - start) * 1000)
        results.append(
            GuardResult(
                artifact_path=entry.relative_path,
                serialization=serialization,
                outcome=outcome,
                reason=reason,
                policy_digest=digest,
                timing_ms=timing_ms,
                hash_checked=hash_checked,
            )
        )
    return results
