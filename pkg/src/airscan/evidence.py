"""Evidence artifact assembly, canonical digesting, and requirement linting.

The artifact is a JSON document (extension `.airs.json`) holding up to 41
field records, each tagged with a verifiability block saying where the
value came from.  Digests are computed over a canonical serialization so
two independent writers of the same content agree byte for byte.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from .canonical import canonical_bytes, canonical_sha256
from .schema import (
    FIELD_SCHEMA,
    SPEC_BY_ID,
    SPEC_BY_KEY,
    FieldSpec,
    RequirementLevel,
    field_sort_key,
)

SCHEMA_VERSION = "1.0"

# Pinned timestamp used by reproducible runs.  When generated_at equals this
# sentinel the digest region drops it, so a verifier needs no extra flag to
# recompute the digest.
REPRODUCIBLE_TIMESTAMP = "1970-01-01T00:00:00Z"


class EvidenceError(Exception):
    pass


class DuplicateField(EvidenceError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"duplicate field key: {key!r}")


class UnknownField(EvidenceError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"key not in the 41-field schema: {key!r}")


class SourceType(str, Enum):
    MEASURED = "MeasuredByScanner"
    PUBLISHER = "PublisherAssertion"
    THIRD_PARTY = "ThirdParty"
    UNDISCLOSED = "Undisclosed"


class Confidence(str, Enum):
    HIGH = "High"
    MEDIUM = "Medium"
    LOW = "Low"


class FieldStatus(str, Enum):
    PRESENT = "Present"
    UNDISCLOSED = "UndisclosedByPublisher"
    ABSENT = "Absent"


class Verdict(str, Enum):
    PASS = "Pass"
    FAIL_MUST = "FailMust"
    WARN_SHOULD = "WarnShould"


@dataclass(frozen=True)
class VerifiabilityBlock:
    source_type: SourceType
    url: str = ""
    confidence: Confidence = Confidence.MEDIUM
    notes: str = ""

    def __post_init__(self) -> None:
        # Scanner measurements are first-party evidence: always High.
        if self.source_type is SourceType.MEASURED and self.confidence is not Confidence.HIGH:
            raise ValueError("MeasuredByScanner requires confidence=High")
        if self.source_type is SourceType.UNDISCLOSED and self.url:
            raise ValueError("Undisclosed records carry no url")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "source_type": self.source_type.value,
            "url": self.url,
            "confidence": self.confidence.value,
            "notes": self.notes,
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "VerifiabilityBlock":
        return cls(
            source_type=SourceType(data["source_type"]),
            url=data.get("url", ""),
            confidence=Confidence(data["confidence"]),
            notes=data.get("notes", ""),
        )


def measured(notes: str = "") -> VerifiabilityBlock:
    return VerifiabilityBlock(SourceType.MEASURED, confidence=Confidence.HIGH, notes=notes)


def undisclosed(notes: str = "") -> VerifiabilityBlock:
    return VerifiabilityBlock(SourceType.UNDISCLOSED, confidence=Confidence.LOW, notes=notes)


_EMPTYISH = (None, "", {}, [])


@dataclass(frozen=True)
class FieldRecord:
    field_id: str
    status: FieldStatus
    value: Any
    verifiability: VerifiabilityBlock

    def __post_init__(self) -> None:
        if self.field_id not in SPEC_BY_ID:
            raise UnknownField(self.field_id)
        if self.status is FieldStatus.PRESENT and any(
            self.value is e or self.value == e for e in _EMPTYISH
        ):
            raise ValueError(f"field {self.field_id}: status=Present needs a non-empty value")

    @property
    def spec(self) -> FieldSpec:
        return SPEC_BY_ID[self.field_id]

    @property
    def key(self) -> str:
        return self.spec.key

    def to_json_dict(self) -> dict[str, Any]:
        spec = self.spec
        return {
            "field_id": self.field_id,
            "key": spec.key,
            "category": spec.category.value,
            "level": spec.level.value,
            "status": self.status.value,
            "value": self.value,
            "verifiability": self.verifiability.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "FieldRecord":
        return cls(
            field_id=data["field_id"],
            status=FieldStatus(data["status"]),
            value=data["value"],
            verifiability=VerifiabilityBlock.from_json_dict(data["verifiability"]),
        )


@dataclass(frozen=True)
class ModelIdentity:
    model_name: str
    model_id: str
    version_or_commit: str
    license: str = ""

    def __post_init__(self) -> None:
        for attr in ("model_name", "model_id", "version_or_commit"):
            if not getattr(self, attr):
                raise ValueError(f"identity field {attr} must be non-empty")

    def to_json_dict(self) -> dict[str, str]:
        return {
            "model_name": self.model_name,
            "model_id": self.model_id,
            "version_or_commit": self.version_or_commit,
            "license": self.license,
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "ModelIdentity":
        return cls(
            model_name=data["model_name"],
            model_id=data["model_id"],
            version_or_commit=data["version_or_commit"],
            license=data.get("license", ""),
        )


@dataclass(frozen=True)
class ToolInfo:
    name: str
    version: str

    def to_json_dict(self) -> dict[str, str]:
        return {"name": self.name, "version": self.version}


@dataclass(frozen=True)
class EvidenceArtifact:
    schema_version: str
    subject: ModelIdentity
    fields: tuple[FieldRecord, ...]
    generated_at: str
    tool_info: ToolInfo
    canonical_digest: str
    signature_ref: Optional[str] = None

    def record(self, field_id: str) -> Optional[FieldRecord]:
        for rec in self.fields:
            if rec.field_id == field_id:
                return rec
        return None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "subject": self.subject.to_json_dict(),
            "fields": [rec.to_json_dict() for rec in self.fields],
            "generated_at": self.generated_at,
            "tool_info": self.tool_info.to_json_dict(),
            "canonical_digest": self.canonical_digest,
            "signature_ref": self.signature_ref,
        }


@dataclass(frozen=True)
class LintReport:
    missing_must: tuple[str, ...]
    missing_should: tuple[str, ...]
    verdict: Verdict

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "missing_must": list(self.missing_must),
            "missing_should": list(self.missing_should),
            "verdict": self.verdict.value,
        }


def _digest_region(doc: dict[str, Any]) -> dict[str, Any]:
    region = {k: v for k, v in doc.items() if k not in ("canonical_digest", "signature_ref")}
    if region.get("generated_at") == REPRODUCIBLE_TIMESTAMP:
        region.pop("generated_at")
    return region


def canonicalize(artifact: EvidenceArtifact) -> bytes:
    """Canonical byte form of the digested region of the artifact."""
    return canonical_bytes(_digest_region(artifact.to_json_dict()))


def compute_digest(doc: dict[str, Any]) -> str:
    return canonical_sha256(_digest_region(doc))


def utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def assemble_artifact(
    identity: ModelIdentity,
    records: list[FieldRecord],
    tool: ToolInfo,
    generated_at: Optional[str] = None,
    reproducible: bool = False,
) -> EvidenceArtifact:
    seen: set[str] = set()
    for rec in records:
        if rec.field_id not in SPEC_BY_ID:
            raise UnknownField(rec.field_id)
        if rec.key in seen:
            raise DuplicateField(rec.key)
        seen.add(rec.key)
    ordered = tuple(sorted(records, key=lambda r: field_sort_key(r.field_id)))
    if reproducible:
        stamp = REPRODUCIBLE_TIMESTAMP
    else:
        stamp = generated_at if generated_at is not None else utc_now()
    draft = EvidenceArtifact(
        schema_version=SCHEMA_VERSION,
        subject=identity,
        fields=ordered,
        generated_at=stamp,
        tool_info=tool,
        canonical_digest="",
        signature_ref=None,
    )
    digest = compute_digest(draft.to_json_dict())
    return EvidenceArtifact(
        schema_version=SCHEMA_VERSION,
        subject=identity,
        fields=ordered,
        generated_at=stamp,
        tool_info=tool,
        canonical_digest=digest,
        signature_ref=None,
    )


def lint_requirements(artifact: EvidenceArtifact, policy: Any = None) -> LintReport:
    """Check every schema field against its requirement level.

    UndisclosedByPublisher counts as missing only for Must fields; a Should
    field the publisher explicitly declined to disclose does not warn.
    """
    overrides: dict[str, RequirementLevel] = {}
    if policy is not None:
        raw = getattr(policy, "requirement_overrides", None) or {}
        overrides = {fid: RequirementLevel(lv) for fid, lv in raw.items()}
    by_id = {rec.field_id: rec for rec in artifact.fields}
    missing_must: list[str] = []
    missing_should: list[str] = []
    for spec in FIELD_SCHEMA:
        level = overrides.get(spec.field_id, spec.level)
        rec = by_id.get(spec.field_id)
        if level is RequirementLevel.MUST:
            if rec is None or rec.status is not FieldStatus.PRESENT:
                missing_must.append(spec.field_id)
        elif level is RequirementLevel.SHOULD:
            if rec is None or rec.status is FieldStatus.ABSENT:
                missing_should.append(spec.field_id)
    if missing_must:
        verdict = Verdict.FAIL_MUST
    elif missing_should:
        verdict = Verdict.WARN_SHOULD
    else:
        verdict = Verdict.PASS
    return LintReport(tuple(missing_must), tuple(missing_should), verdict)


def write_artifact(artifact: EvidenceArtifact, path: Path) -> None:
    doc = artifact.to_json_dict()
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def load_artifact(path: Path) -> EvidenceArtifact:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return artifact_from_json_dict(doc)


def artifact_from_json_dict(doc: dict[str, Any]) -> EvidenceArtifact:
    return EvidenceArtifact(
        schema_version=doc["schema_version"],
        subject=ModelIdentity.from_json_dict(doc["subject"]),
        fields=tuple(FieldRecord.from_json_dict(f) for f in doc["fields"]),
        generated_at=doc["generated_at"],
        tool_info=ToolInfo(doc["tool_info"]["name"], doc["tool_info"]["version"]),
        canonical_digest=doc["canonical_digest"],
        signature_ref=doc.get("signature_ref"),
    )


def verify_digest(doc: dict[str, Any]) -> bool:
    """Recompute the canonical digest of a loaded artifact document."""
    return compute_digest(doc) == doc.get("canonical_digest")
