"""Typed scan findings and the model-level threat catalog they reference."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional


class Severity(str, Enum):
    INFO = "info"
    WARN = "warn"
    CRITICAL = "critical"


# Threat identifiers attachable to findings, keyed by the catalog id the
# evidence schema uses.  Labels are short functional names for reports.
THREAT_CATALOG: dict[str, str] = {
    "1.1": "poisoned training data",
    "1.2": "poisoned or backdoored model release",
    "1.3": "dataset integrity erosion",
    "2.1": "unsafe deserialization",
    "2.2": "bundled native binary",
    "2.3": "custom operator injection",
    "2.4": "lookalike model or provider",
    "3.1": "silent weight modification",
    "3.2": "architecture or config tampering",
    "3.4": "undeclared adapter injection",
    "3.5": "metadata prompt injection",
    "4.1": "corrupted or mismatched shards",
    "4.2": "lineage obfuscation",
    "5.1": "trigger-activated misbehavior",
    "5.2": "tokenizer manipulation",
}


@dataclass(frozen=True)
class Finding:
    """One typed scan result.

    Critical findings must name the threat they evidence; lower severities
    may omit the reference.  ``locus`` narrows the file locus (byte offset,
    opcode index, or archive member) when one applies.
    """

    id: str
    severity: Severity
    path: str
    reason: str
    threat_ref: Optional[str] = None
    locus: Optional[str] = None
    evidence: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.reason:
            raise ValueError("finding reason must be non-empty")
        if self.severity is Severity.CRITICAL and not self.threat_ref:
            raise ValueError(f"critical finding {self.id!r} requires a threat_ref")
        if self.threat_ref is not None and self.threat_ref not in THREAT_CATALOG:
            raise ValueError(f"unknown threat_ref {self.threat_ref!r}")

    def to_json_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "severity": self.severity.value,
            "path": self.path,
            "reason": self.reason,
        }
        if self.threat_ref is not None:
            out["threat_ref"] = self.threat_ref
        if self.locus is not None:
            out["locus"] = self.locus
        if self.evidence:
            out["evidence"] = self.evidence
        return out


def sort_findings(findings: list[Finding]) -> list[Finding]:
    """Deterministic report order: severity first, then path, id, locus."""
    rank = {Severity.CRITICAL: 0, Severity.WARN: 1, Severity.INFO: 2}
    return sorted(findings, key=lambda f: (rank[f.severity], f.path, f.id, f.locus or ""))
