"""Artifact assembly, canonical digesting, and requirement lint behavior."""

from __future__ import annotations

import hashlib
import json

import pytest

from airscan.evidence import (
    REPRODUCIBLE_TIMESTAMP,
    Confidence,
    DuplicateField,
    FieldRecord,
    FieldStatus,
    ModelIdentity,
    SourceType,
    ToolInfo,
    UnknownField,
    Verdict,
    VerifiabilityBlock,
    artifact_from_json_dict,
    assemble_artifact,
    canonicalize,
    lint_requirements,
    load_artifact,
    measured,
    undisclosed,
    verify_digest,
    write_artifact,
)
from airscan.schema import FIELD_SCHEMA, MUST_FIELD_IDS

IDENTITY = ModelIdentity("demo-model", "acme/demo-model", "c0ffee", "apache-2.0")
TOOL = ToolInfo("airscan", "0.1.0")


def rec(field_id: str, value=None, status=FieldStatus.PRESENT) -> FieldRecord:
    if value is None and status is FieldStatus.PRESENT:
        value = {"field": field_id}
    return FieldRecord(field_id, status, value, measured())


def reference_digest(doc: dict) -> str:
    # Independent canonicalization: drop digest/signature keys, drop the
    # pinned timestamp sentinel, then sorted-key compact JSON.
    region = {k: v for k, v in doc.items() if k not in ("canonical_digest", "signature_ref")}
    if region.get("generated_at") == "1970-01-01T00:00:00Z":
        del region["generated_at"]
    text = json.dumps(region, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def test_empty_records_digest_stable():
    a = assemble_artifact(IDENTITY, [], TOOL, generated_at="2026-08-21T00:00:00Z")
    b = assemble_artifact(IDENTITY, [], TOOL, generated_at="2026-08-21T00:00:00Z")
    assert a.fields == ()
    assert a.canonical_digest == b.canonical_digest
    assert canonicalize(a) == canonicalize(b)


def test_duplicate_key_rejected():
    with pytest.raises(DuplicateField):
        assemble_artifact(IDENTITY, [rec("1.5"), rec("1.5")], TOOL)


def test_unknown_field_rejected():
    with pytest.raises(UnknownField):
        FieldRecord("9.9", FieldStatus.PRESENT, {"x": 1}, measured())


def test_all_must_fields_present_lints_pass():
    records = [rec(fid) for fid in MUST_FIELD_IDS]
    art = assemble_artifact(IDENTITY, records, TOOL)
    report = lint_requirements(art)
    assert report.missing_must == ()
    assert report.verdict in (Verdict.PASS, Verdict.WARN_SHOULD)
    # Must list is satisfied; warn-only output comes from absent Should fields.
    assert report.verdict is Verdict.WARN_SHOULD


def test_missing_hash_manifest_fails_must():
    records = [rec(fid) for fid in MUST_FIELD_IDS if fid != "1.5"]
    art = assemble_artifact(IDENTITY, records, TOOL)
    report = lint_requirements(art)
    assert report.verdict is Verdict.FAIL_MUST
    assert "1.5" in report.missing_must


def test_each_must_field_is_load_bearing():
    for dropped in MUST_FIELD_IDS:
        records = [rec(fid) for fid in MUST_FIELD_IDS if fid != dropped]
        art = assemble_artifact(IDENTITY, records, TOOL)
        report = lint_requirements(art)
        assert report.verdict is Verdict.FAIL_MUST
        assert report.missing_must == (dropped,)


def test_all_41_present_lints_pass_with_empty_lists():
    records = [rec(s.field_id) for s in FIELD_SCHEMA]
    art = assemble_artifact(IDENTITY, records, TOOL)
    report = lint_requirements(art)
    assert report.verdict is Verdict.PASS
    assert report.missing_must == ()
    assert report.missing_should == ()


def test_undisclosed_counts_missing_only_for_must():
    records = [rec(s.field_id) for s in FIELD_SCHEMA if s.field_id != "1.6"]
    records.append(FieldRecord("1.6", FieldStatus.UNDISCLOSED, None, undisclosed()))
    art = assemble_artifact(IDENTITY, records, TOOL)
    report = lint_requirements(art)
    assert report.verdict is Verdict.PASS
    assert "1.6" not in report.missing_should

    # Same status on a Must field keeps it missing.
    records2 = [rec(fid) for fid in MUST_FIELD_IDS if fid != "1.4"]
    records2.append(FieldRecord("1.4", FieldStatus.UNDISCLOSED, None, undisclosed()))
    art2 = assemble_artifact(IDENTITY, records2, TOOL)
    assert "1.4" in lint_requirements(art2).missing_must


def test_absent_should_field_warns():
    records = [rec(s.field_id) for s in FIELD_SCHEMA if s.field_id != "1.6"]
    art = assemble_artifact(IDENTITY, records, TOOL)
    report = lint_requirements(art)
    assert report.verdict is Verdict.WARN_SHOULD
    assert report.missing_should == ("1.6",)


def test_records_sorted_by_numeric_field_id():
    records = [rec("1.10"), rec("1.2"), rec("2.1"), rec("1.9")]
    art = assemble_artifact(IDENTITY, records, TOOL)
    assert [r.field_id for r in art.fields] == ["1.2", "1.9", "1.10", "2.1"]


def test_insertion_order_does_not_change_bytes():
    a = assemble_artifact(IDENTITY, [rec("1.1"), rec("1.5")], TOOL, generated_at="2026-01-01T00:00:00Z")
    b = assemble_artifact(IDENTITY, [rec("1.5"), rec("1.1")], TOOL, generated_at="2026-01-01T00:00:00Z")
    assert canonicalize(a) == canonicalize(b)
    assert a.canonical_digest == b.canonical_digest


def test_value_change_changes_digest_vs_reference_sha256():
    a = assemble_artifact(
        IDENTITY, [FieldRecord("1.5", FieldStatus.PRESENT, {"files": 1}, measured())],
        TOOL, generated_at="2026-01-01T00:00:00Z",
    )
    b = assemble_artifact(
        IDENTITY, [FieldRecord("1.5", FieldStatus.PRESENT, {"files": 2}, measured())],
        TOOL, generated_at="2026-01-01T00:00:00Z",
    )
    assert a.canonical_digest != b.canonical_digest
    assert a.canonical_digest == reference_digest(a.to_json_dict())
    assert b.canonical_digest == reference_digest(b.to_json_dict())


def test_reproducible_mode_pins_timestamp_and_excludes_it():
    art = assemble_artifact(IDENTITY, [rec("1.1")], TOOL, reproducible=True)
    assert art.generated_at == REPRODUCIBLE_TIMESTAMP
    assert b"generated_at" not in canonicalize(art)
    assert art.canonical_digest == reference_digest(art.to_json_dict())


def test_default_mode_digests_timestamp():
    art = assemble_artifact(IDENTITY, [rec("1.1")], TOOL, generated_at="2026-02-02T00:00:00Z")
    assert b"generated_at" in canonicalize(art)


def test_measured_source_requires_high_confidence():
    with pytest.raises(ValueError):
        VerifiabilityBlock(SourceType.MEASURED, confidence=Confidence.LOW)


def test_undisclosed_source_rejects_url():
    with pytest.raises(ValueError):
        VerifiabilityBlock(SourceType.UNDISCLOSED, url="https://example.org")


def test_present_record_needs_non_empty_value():
    with pytest.raises(ValueError):
        FieldRecord("1.1", FieldStatus.PRESENT, {}, measured())
    with pytest.raises(ValueError):
        FieldRecord("1.1", FieldStatus.PRESENT, "", measured())


def test_identity_requires_core_strings():
    with pytest.raises(ValueError):
        ModelIdentity("", "acme/x", "v1")


def test_round_trip_through_file(tmp_path):
    records = [rec(fid) for fid in MUST_FIELD_IDS]
    art = assemble_artifact(IDENTITY, records, TOOL, reproducible=True)
    path = tmp_path / "demo.airs.json"
    write_artifact(art, path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    for key in ("schema_version", "subject", "fields", "generated_at",
                "tool_info", "canonical_digest", "signature_ref"):
        assert key in doc
    assert verify_digest(doc)
    loaded = load_artifact(path)
    assert loaded == art
    doc["fields"][0]["value"] = {"tampered": True}
    assert not verify_digest(doc)


def test_artifact_from_json_dict_rejects_unicode_surprises():
    # Non-ASCII survives the round trip byte-exactly.
    ident = ModelIdentity("modèle", "acme/modèle", "v1", "mit")
    art = assemble_artifact(ident, [], TOOL, reproducible=True)
    doc = art.to_json_dict()
    again = artifact_from_json_dict(doc)
    assert canonicalize(again) == canonicalize(art)
