"""The evidence field schema: 41 fields in 5 categories with requirement levels.

Every evidence record a scan emits must match one of these entries.  The
leading digit of a field id names its category; requirement levels drive
the lint verdict (Must fields are mandatory for a passing artifact).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class RequirementLevel(str, Enum):
    MUST = "M"
    SHOULD = "S"
    MAY = "m"


class Category(str, Enum):
    IDENTITY = "identity_release_integrity"
    PACKAGING = "packaging_serialization_safety"
    STRUCTURE = "structure_adapters"
    RUNTIME_PROBES = "runtime_probes"
    EVALUATION = "evaluation_disclosure"


CATEGORY_BY_DIGIT: dict[str, Category] = {
    "1": Category.IDENTITY,
    "2": Category.PACKAGING,
    "3": Category.STRUCTURE,
    "4": Category.RUNTIME_PROBES,
    "5": Category.EVALUATION,
}

CATEGORY_TITLES: dict[Category, str] = {
    Category.IDENTITY: "Identity & Release Integrity",
    Category.PACKAGING: "Packaging & Serialization Safety",
    Category.STRUCTURE: "Structure & Adapters",
    Category.RUNTIME_PROBES: "Runtime Probes",
    Category.EVALUATION: "Evaluation & Disclosure",
}


@dataclass(frozen=True)
class FieldSpec:
    field_id: str
    key: str
    level: RequirementLevel
    description: str

    @property
    def category(self) -> Category:
        return CATEGORY_BY_DIGIT[self.field_id.split(".", 1)[0]]


def _f(field_id: str, key: str, level: RequirementLevel, description: str) -> FieldSpec:
    return FieldSpec(field_id, key, level, description)


_M = RequirementLevel.MUST
_S = RequirementLevel.SHOULD
_m = RequirementLevel.MAY

FIELD_SCHEMA: tuple[FieldSpec, ...] = (
    # 1.x: identity and release integrity
    _f("1.1", "model_name", _M, "canonical name the release is packaged under"),
    _f("1.2", "model_id", _M, "registry path or repository slug"),
    _f("1.3", "version_or_commit", _M, "semantic version or commit identifier"),
    _f("1.4", "license", _M, "license expression governing the weights"),
    _f("1.5", "hash_manifest", _M, "per-file sha256 digests for release files"),
    _f("1.6", "signature_bundle", _S, "detached signatures covering the release"),
    _f("1.7", "dir_merkle", _S, "directory-level merkle root over the manifest"),
    _f("1.8", "publisher_evidence", _S, "publisher-supplied origin and custody material"),
    _f("1.9", "config_fingerprint", _S, "digest over canonicalized config files"),
    _f("1.10", "family_fingerprint", _S, "declared lineage fingerprint and registry match"),
    # 2.x: packaging and serialization safety
    _f("2.1", "packaging_policy", _M, "loader/serializer policy in force and its digest"),
    _f("2.2", "serializer_scan", _M, "static serializer scan results"),
    _f("2.3", "guard_results", _M, "per-artifact load-guard outcomes with reasons"),
    _f("2.4", "file_inventory", _S, "typed inventory of package files"),
    _f("2.5", "binary_inventory", _S, "native binaries found in the package"),
    _f("2.6", "allowlist_policy", _S, "file/extension allowlist in force"),
    _f("2.7", "blocked_loads_log", _m, "record of loads the guard refused"),
    _f("2.8", "metadata_scan", _S, "embedded-metadata scan results (templates, KV pairs)"),
    _f("2.9", "tokenizer_fingerprint", _S, "digests of tokenizer vocab/merges assets"),
    _f("2.10", "onnx_op_scan", _S, "operator inventory and allowlist check for graphs"),
    # 3.x: structure and adapters
    _f("3.1", "base_model", _S, "declared upstream base model"),
    _f("3.2", "quantization", _S, "declared quantization plus detected dtype mix"),
    _f("3.3", "adapters_lora", _S, "adapters the publisher declares attached"),
    _f("3.4", "adapter_inventory", _S, "adapter modules actually found on disk"),
    _f("3.5", "adapter_hashes", _S, "config and weights digests per adapter"),
    _f("3.6", "shape_consistency_report", _S, "config-vs-tensor shape comparison"),
    _f("3.7", "tensor_checksums", _S, "per-tensor digests for drift detection"),
    _f("3.8", "tensor_stats", _S, "per-tensor statistics (mean/var/NaN/Inf/outliers)"),
    # 4.x: runtime probes
    _f("4.1", "detector_method", _S, "contamination probe method and parameters"),
    _f("4.2", "detector_outputs", _S, "probe metrics and curves (AUC, recall at FPR budget)"),
    _f("4.3", "backdoor_probe_results", _S, "trigger sweep attack-success rates"),
    _f("4.4", "pii_probe_results", _m, "externally produced PII exposure results"),
    _f("4.5", "jailbreak_probe_results", _m, "externally produced jailbreak results"),
    _f("4.6", "prompt_leak_probes", _m, "externally produced prompt-extraction results"),
    _f("4.7", "sanity_prompts_diff", _m, "prompt regression diff results"),
    _f("4.8", "activation_probe", _m, "externally produced representation anomaly results"),
    # 5.x: evaluation and disclosure
    _f("5.1", "benchmark_summary", _S, "compact summary of disclosed evaluations"),
    _f("5.2", "eval_datasets", _S, "benchmarks used for evaluation"),
    _f("5.3", "metrics", _S, "disclosed evaluation metrics"),
    _f("5.4", "eval_params", _m, "evaluation configuration (shots, temperature)"),
    _f("5.5", "training_data_cutoff", _m, "declared training data cutoff"),
)

SPEC_BY_ID: dict[str, FieldSpec] = {s.field_id: s for s in FIELD_SCHEMA}
SPEC_BY_KEY: dict[str, FieldSpec] = {s.key: s for s in FIELD_SCHEMA}

MUST_FIELD_IDS: tuple[str, ...] = tuple(
    s.field_id for s in FIELD_SCHEMA if s.level is RequirementLevel.MUST
)


def field_sort_key(field_id: str) -> tuple[int, int]:
    """Numeric ordering so that 1.9 < 1.10."""
    major, minor = field_id.split(".")
    return (int(major), int(minor))


def category_counts() -> dict[Category, int]:
    counts: dict[Category, int] = {c: 0 for c in Category}
    for spec in FIELD_SCHEMA:
        counts[spec.category] += 1
    return counts
