"""Scan policy configuration: what loads, what blocks, what gets flagged."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from ..canonical import canonical_sha256


class PolicyError(Exception):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    allowed_formats: frozenset[str]
    blocked_formats: frozenset[str]
    extension_allowlist: frozenset[str]
    allowed_onnx_ops: frozenset[str]
    suspicious_template_patterns: tuple[str, ...]
    require_hash_match: bool = True
    # Optional per-field requirement-level overrides for lint ("1.6": "M").
    requirement_overrides: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clash = self.allowed_formats & self.blocked_formats
        if clash:
            raise PolicyError(f"formats both allowed and blocked: {sorted(clash)}")
        if "gguf" in self.allowed_formats and not self.suspicious_template_patterns:
            raise PolicyError("gguf scanning needs a non-empty pattern list")

    def blocks_format(self, serialization: str) -> bool:
        # Detected names may carry a display suffix ("pickle/pt"); policy
        # matches on the family before the slash.
        return serialization.split("/", 1)[0] in self.blocked_formats

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "allowed_formats": sorted(self.allowed_formats),
            "blocked_formats": sorted(self.blocked_formats),
            "extension_allowlist": sorted(self.extension_allowlist),
            "allowed_onnx_ops": sorted(self.allowed_onnx_ops),
            "suspicious_template_patterns": list(self.suspicious_template_patterns),
            "require_hash_match": self.require_hash_match,
            "requirement_overrides": dict(sorted(self.requirement_overrides.items())),
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "PolicyConfig":
        try:
            return cls(
                allowed_formats=frozenset(data["allowed_formats"]),
                blocked_formats=frozenset(data["blocked_formats"]),
                extension_allowlist=frozenset(data["extension_allowlist"]),
                allowed_onnx_ops=frozenset(data["allowed_onnx_ops"]),
                suspicious_template_patterns=tuple(data["suspicious_template_patterns"]),
                require_hash_match=bool(data.get("require_hash_match", True)),
                requirement_overrides=dict(data.get("requirement_overrides", {})),
            )
        except KeyError as exc:
            raise PolicyError(f"policy file missing key: {exc}") from exc


def policy_digest(policy: PolicyConfig) -> str:
    return canonical_sha256(policy.to_json_dict())


def load_policy(path: Path) -> PolicyConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise PolicyError(f"cannot read policy {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PolicyError(f"policy {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise PolicyError(f"policy {path} must be a JSON object")
    return PolicyConfig.from_json_dict(raw)


def default_policy() -> PolicyConfig:
    text = (
        resources.files("airscan").joinpath("data/default.airs-policy.json").read_text("utf-8")
    )
    return PolicyConfig.from_json_dict(json.loads(text))
