"""
Building and linting an evidence artifact
=========================================

Assemble the 41-field evidence record for a model release by hand,
compute its canonical digest, and watch the lint verdict move between
Pass, WarnShould, and FailMust as disclosure erodes.
"""

from __future__ import annotations

from airscan.evidence import (
    FieldRecord,
    FieldStatus,
    ModelIdentity,
    SourceType,
    ToolInfo,
    VerifiabilityBlock,
    assemble_artifact,
    lint_requirements,
    measured,
    verify_digest,
)
from airscan.schema import CATEGORY_TITLES, category_counts


def publisher_assertion() -> VerifiabilityBlock:
    return VerifiabilityBlock(SourceType.PUBLISHER)

# The field schema is fixed: five categories, 41 fields, 8 of them Must.
print("field schema:")
for category, count in category_counts().items():
    print(f"  {CATEGORY_TITLES[category]}: {count} fields")

identity = ModelIdentity("demo-model", "acme/demo-model", "2.0.1", "apache-2.0")
tool = ToolInfo("airscan", "0.1.0")

# Every Present record carries a value and a verifiability block saying
# who vouches for it.  Scanner measurements get High confidence; claims
# copied from the publisher do not.
records = [
    FieldRecord("1.1", FieldStatus.PRESENT, "demo-model", publisher_assertion()),
    FieldRecord("1.2", FieldStatus.PRESENT, "acme/demo-model", publisher_assertion()),
    FieldRecord("1.3", FieldStatus.PRESENT, "2.0.1", publisher_assertion()),
    FieldRecord("1.4", FieldStatus.PRESENT, "apache-2.0", publisher_assertion()),
    FieldRecord(
        "1.5",
        FieldStatus.PRESENT,
        [{"path": "model.safetensors", "size": 4096, "sha256": "ab" * 32}],
        measured(),
    ),
    FieldRecord("2.1", FieldStatus.PRESENT, {"allowed_formats": ["safetensors"]}, measured()),
    FieldRecord("2.2", FieldStatus.PRESENT, {"findings": []}, measured()),
    FieldRecord(
        "2.3",
        FieldStatus.PRESENT,
        [{"artifact_path": "model.safetensors", "outcome": "Pass"}],
        measured(),
    ),
]

artifact = assemble_artifact(identity, records, tool, reproducible=True)
print(f"\ncanonical digest: {artifact.canonical_digest}")
print(f"digest verifies: {verify_digest(artifact.to_json_dict())}")

# All 8 Must fields are Present, so the verdict cannot fail, but every
# Should field is silently missing and each one warns.
report = lint_requirements(artifact)
print(f"\nall-Must verdict: {report.verdict.value}")
print(f"missing Should fields: {len(report.missing_should)}")

# A publisher may decline a Should field without penalty by marking it
# UndisclosedByPublisher; only silence warns.  The same status on a
# Must field would still fail.
declined = records + [
    FieldRecord("1.6", FieldStatus.UNDISCLOSED, None, publisher_assertion())
]
report = lint_requirements(assemble_artifact(identity, declined, tool, reproducible=True))
print(f"declined 1.6 still in missing Should: {'1.6' in report.missing_should}")

without_license = [r for r in records if r.field_id != "1.4"]
report = lint_requirements(assemble_artifact(identity, without_license, tool, reproducible=True))
print(f"dropping the license record: {report.verdict.value} {report.missing_must}")

# The digest covers every field, so any edit is visible.
doc = artifact.to_json_dict()
doc["fields"][0]["value"] = "tampered-name"
print(f"\ndigest still verifies after tamper: {verify_digest(doc)}")
