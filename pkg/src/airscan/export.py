"""Crosswalk export of an evidence artifact into SPDX-3.0-shaped and
CycloneDX-1.6-shaped JSON documents.

Fields with a native landing zone in a standard are placed there; every
other Present field is preserved under the "airs:" namespace so a parser
can mechanically recover the full field set.  The documents are shaped
subsets for evidence interchange, not certified conformance output, and
each carries a disclaimer saying so.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from . import TOOL_NAME, __version__
from .evidence import EvidenceArtifact, FieldStatus, Verdict, lint_requirements
from .schema import SPEC_BY_ID, field_sort_key

DISCLAIMER = (
    "Shaped export for evidence interchange; not a certified SPDX or "
    "CycloneDX conformance document."
)

SPDX_COVERED = frozenset({"1.1", "1.2", "1.3", "1.4", "3.1", "5.1", "5.2", "5.3", "5.5"})
CDX_COVERED = frozenset({"1.1", "1.2", "1.3", "1.4", "1.5", "2.4", "2.5"})

# SPDX sub-groups with distinct landing zones
_SPDX_IDENTITY = ("1.1", "1.2", "1.3", "1.4")
_SPDX_EVAL = ("5.1", "5.2", "5.3", "5.5")


class ExportError(Exception):
    pass


class LintBlocked(ExportError):
    pass


@dataclass(frozen=True)
class CrosswalkRow:
    field_id: str
    spdx_covered: bool
    cdx_covered: bool
    target_hint: str


def _row(field_id: str, hint: str) -> CrosswalkRow:
    return CrosswalkRow(field_id, field_id in SPDX_COVERED, field_id in CDX_COVERED, hint)


CROSSWALK: tuple[CrosswalkRow, ...] = (
    _row("1.1", "package name / component name"),
    _row("1.2", "external identifier / bom-ref"),
    _row("1.3", "package version / component version"),
    _row("1.4", "declared license / component license"),
    _row("1.5", "component hash list (CDX)"),
    _row("1.6", "airs annotation only"),
    _row("1.7", "airs annotation only"),
    _row("1.8", "airs annotation only"),
    _row("1.9", "airs annotation only"),
    _row("1.10", "airs annotation only"),
    _row("2.1", "airs annotation only"),
    _row("2.2", "airs annotation only"),
    _row("2.3", "airs annotation only"),
    _row("2.4", "nested file components (CDX)"),
    _row("2.5", "nested binary components (CDX)"),
    _row("3.1", "descendant-of relationship (SPDX)"),
    _row("3.2", "airs annotation only"),
    _row("3.3", "airs annotation only"),
    _row("3.4", "airs annotation only"),
    _row("4.1", "airs annotation only"),
    _row("4.2", "airs annotation only"),
    _row("4.3", "airs annotation only"),
    _row("5.1", "review annotation (SPDX)"),
    _row("5.2", "review annotation (SPDX)"),
    _row("5.3", "review annotation (SPDX)"),
    _row("5.5", "review annotation (SPDX)"),
)

CROSSWALK_IDS = frozenset(r.field_id for r in CROSSWALK)


@dataclass(frozen=True)
class ExportBundle:
    spdx_doc: dict[str, Any]
    cdx_doc: dict[str, Any]
    coverage_report: dict[str, Any]


def crosswalk_json() -> list[dict[str, Any]]:
    rows = []
    for r in CROSSWALK:
        spec = SPEC_BY_ID[r.field_id]
        rows.append(
            {
                "field_id": r.field_id,
                "key": spec.key,
                "category": spec.category.value,
                "spdx_covered": r.spdx_covered,
                "cdx_covered": r.cdx_covered,
                "target_hint": r.target_hint,
            }
        )
    return rows


def _present_fields(artifact: EvidenceArtifact) -> dict[str, Any]:
    """field_id -> value for every Present field, in schema order."""
    out: dict[str, Any] = {}
    for rec in sorted(artifact.fields, key=lambda r: field_sort_key(r.field_id)):
        if rec.status is FieldStatus.PRESENT:
            out[rec.field_id] = rec.value
    return out


def _check_lint(artifact: EvidenceArtifact, force: bool) -> bool:
    report = lint_requirements(artifact)
    if report.verdict is Verdict.FAIL_MUST and not force:
        raise LintBlocked(
            f"artifact fails Must-level lint ({sorted(report.missing_must)}); "
            "pass force to export anyway"
        )
    return report.verdict is Verdict.FAIL_MUST


def _dumps(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def export_spdx(artifact: EvidenceArtifact, force: bool = False) -> dict[str, Any]:
    forced = _check_lint(artifact, force)
    present = _present_fields(artifact)
    spdx_id = f"SPDXRef-Package-{artifact.subject.model_name or 'subject'}"

    package: dict[str, Any] = {
        "spdxId": spdx_id,
        "name": present.get("1.1", artifact.subject.model_name),
    }
    if "1.2" in present:
        package["externalIdentifiers"] = [
            {"externalIdentifierType": "registry", "identifier": present["1.2"]}
        ]
    if "1.3" in present:
        package["versionInfo"] = present["1.3"]
    if "1.4" in present:
        package["licenseDeclared"] = present["1.4"]

    relationships: list[dict[str, Any]] = []
    if "3.1" in present:
        relationships.append(
            {"relationshipType": "descendantOf", "from": spdx_id, "to": present["3.1"]}
        )

    annotations: list[dict[str, Any]] = []
    native: list[str] = []
    for field_id, value in present.items():
        key = SPEC_BY_ID[field_id].key
        if field_id in _SPDX_IDENTITY or field_id == "3.1":
            native.append(key)
        elif field_id in _SPDX_EVAL:
            native.append(key)
            annotations.append(
                {
                    "annotationType": "review",
                    "subject": spdx_id,
                    "comment": f"evaluation:{key}",
                    "statement": _dumps(value),
                }
            )
        else:
            annotations.append(
                {
                    "annotationType": "other",
                    "subject": spdx_id,
                    "comment": f"airs:{key}",
                    "statement": _dumps(value),
                }
            )

    doc: dict[str, Any] = {
        "spdxVersion": "SPDX-3.0",
        "dataLicense": "CC0-1.0",
        "creationInfo": {
            "created": artifact.generated_at,
            "createdBy": [f"Tool: {TOOL_NAME}-{__version__}"],
        },
        "disclaimer": DISCLAIMER,
        "packages": [package],
        "relationships": relationships,
        "annotations": annotations,
        "airs_native_fields": native,
        "airs_source_digest": artifact.canonical_digest,
    }
    if forced:
        doc["airs_forced_export"] = True
    return doc


def _cdx_hash_entries(value: Any) -> Optional[list[dict[str, Any]]]:
    if not isinstance(value, list):
        return None
    entries = []
    for item in value:
        if not isinstance(item, dict) or set(item) != {"path", "size", "sha256"}:
            return None
        entries.append(
            {
                "alg": "SHA-256",
                "content": item["sha256"],
                "airs:path": item["path"],
                "airs:size": item["size"],
            }
        )
    return entries


def _cdx_subcomponents(value: Any, inventory_kind: str) -> Optional[list[dict[str, Any]]]:
    # accepts a bare entry list or the {"count", "entries"} wrapper an
    # inventory field uses so that an empty measurement stays representable
    wrapped = False
    entries = value
    if isinstance(value, dict) and set(value) == {"count", "entries"}:
        wrapped = True
        entries = value["entries"]
    if not isinstance(entries, list) or not all(isinstance(i, dict) for i in entries):
        return None
    subs = []
    for item in entries:
        name = item.get("relative_path") or item.get("path") or ""
        properties = [
            {"name": "airs:inventory", "value": inventory_kind},
            {"name": "airs:entry", "value": _dumps(item)},
        ]
        if wrapped:
            properties.append({"name": "airs:wrapped", "value": "count-entries"})
        subs.append({"type": "file", "name": name, "properties": properties})
    return subs


def export_cdx(artifact: EvidenceArtifact, force: bool = False) -> dict[str, Any]:
    forced = _check_lint(artifact, force)
    present = _present_fields(artifact)

    component: dict[str, Any] = {
        "type": "machine-learning-model",
        "name": present.get("1.1", artifact.subject.model_name),
        "bom-ref": present.get("1.2", artifact.subject.model_id),
    }
    native: list[str] = []
    properties: list[dict[str, str]] = []
    subcomponents: list[dict[str, Any]] = []

    def annotate(field_id: str, value: Any) -> None:
        properties.append(
            {"name": f"airs:{SPEC_BY_ID[field_id].key}", "value": _dumps(value)}
        )

    for field_id, value in present.items():
        key = SPEC_BY_ID[field_id].key
        if field_id == "1.1":
            native.append(key)
        elif field_id == "1.2":
            native.append(key)
        elif field_id == "1.3":
            component["version"] = value
            native.append(key)
        elif field_id == "1.4":
            component["licenses"] = [{"license": {"name": value}}]
            native.append(key)
        elif field_id == "1.5":
            hashes = _cdx_hash_entries(value)
            if hashes is None:
                annotate(field_id, value)
            else:
                component["hashes"] = hashes
                native.append(key)
        elif field_id in ("2.4", "2.5"):
            kind = "file" if field_id == "2.4" else "binary"
            subs = _cdx_subcomponents(value, kind)
            if subs is None:
                annotate(field_id, value)
            else:
                subcomponents.extend(subs)
                native.append(key)
        else:
            annotate(field_id, value)

    if subcomponents:
        component["components"] = subcomponents
    if properties:
        component["properties"] = properties

    metadata_properties = [
        {"name": "airs:disclaimer", "value": DISCLAIMER},
        {"name": "airs:native-fields", "value": _dumps(native)},
        {"name": "airs:source-digest", "value": artifact.canonical_digest},
    ]
    if forced:
        metadata_properties.append({"name": "airs:forced-export", "value": "true"})

    return {
        "bomFormat": "CycloneDX",
        "specVersion": "1.6",
        "version": 1,
        "metadata": {
            "timestamp": artifact.generated_at,
            "tools": [{"name": TOOL_NAME, "version": __version__}],
            "properties": metadata_properties,
        },
        "components": [component],
    }


def crosswalk_report(artifact: EvidenceArtifact) -> dict[str, Any]:
    present = _present_fields(artifact)
    mapped_spdx = sum(1 for fid in present if fid in SPDX_COVERED)
    mapped_cdx = sum(1 for fid in present if fid in CDX_COVERED)
    unique = [
        fid for fid in present
        if fid not in SPDX_COVERED and fid not in CDX_COVERED
    ]
    return {
        "mapped_spdx": mapped_spdx,
        "mapped_cdx": mapped_cdx,
        "annotated_unique": sorted(unique, key=field_sort_key),
    }


def export_bundle(artifact: EvidenceArtifact, force: bool = False) -> ExportBundle:
    return ExportBundle(
        spdx_doc=export_spdx(artifact, force=force),
        cdx_doc=export_cdx(artifact, force=force),
        coverage_report=crosswalk_report(artifact),
    )


# ------------------------------------------------------------- recovery


def collect_fields_spdx(doc: dict[str, Any]) -> dict[str, Any]:
    """Recover {field key: value} from an SPDX-shaped export."""
    out: dict[str, Any] = {}
    native = set(doc.get("airs_native_fields", []))
    pkg = doc["packages"][0] if doc.get("packages") else {}
    if "model_name" in native:
        out["model_name"] = pkg["name"]
    if "model_id" in native:
        out["model_id"] = pkg["externalIdentifiers"][0]["identifier"]
    if "version_or_commit" in native:
        out["version_or_commit"] = pkg["versionInfo"]
    if "license" in native:
        out["license"] = pkg["licenseDeclared"]
    if "base_model" in native:
        for rel in doc.get("relationships", []):
            if rel.get("relationshipType") == "descendantOf":
                out["base_model"] = rel["to"]
    for ann in doc.get("annotations", []):
        comment = ann.get("comment", "")
        for prefix in ("evaluation:", "airs:"):
            if comment.startswith(prefix):
                out[comment[len(prefix):]] = json.loads(ann["statement"])
                break
    return out


def collect_fields_cdx(doc: dict[str, Any]) -> dict[str, Any]:
    """Recover {field key: value} from a CycloneDX-shaped export."""
    out: dict[str, Any] = {}
    meta_props = {
        p["name"]: p["value"]
        for p in doc.get("metadata", {}).get("properties", [])
    }
    native = set(json.loads(meta_props.get("airs:native-fields", "[]")))
    comp = doc["components"][0] if doc.get("components") else {}
    if "model_name" in native:
        out["model_name"] = comp["name"]
    if "model_id" in native:
        out["model_id"] = comp["bom-ref"]
    if "version_or_commit" in native:
        out["version_or_commit"] = comp["version"]
    if "license" in native:
        out["license"] = comp["licenses"][0]["license"]["name"]
    if "hash_manifest" in native:
        out["hash_manifest"] = [
            {"path": h["airs:path"], "size": h["airs:size"], "sha256": h["content"]}
            for h in comp.get("hashes", [])
        ]
    inventories: dict[str, list[Any]] = {"file": [], "binary": []}
    wrapped: dict[str, bool] = {"file": False, "binary": False}
    for sub in comp.get("components", []):
        props = {p["name"]: p["value"] for p in sub.get("properties", [])}
        kind = props.get("airs:inventory")
        if kind in inventories and "airs:entry" in props:
            inventories[kind].append(json.loads(props["airs:entry"]))
            if props.get("airs:wrapped") == "count-entries":
                wrapped[kind] = True

    def inventory_value(kind: str) -> Any:
        entries = inventories[kind]
        # an empty Present inventory is only expressible via the wrapper
        if wrapped[kind] or not entries:
            return {"count": len(entries), "entries": entries}
        return entries

    if "file_inventory" in native:
        out["file_inventory"] = inventory_value("file")
    if "binary_inventory" in native:
        out["binary_inventory"] = inventory_value("binary")
    for prop in comp.get("properties", []):
        name = prop.get("name", "")
        if name.startswith("airs:"):
            out[name[len("airs:"):]] = json.loads(prop["value"])
    return out


def _write_json(doc: dict[str, Any], path: Path) -> None:
    text = json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def write_export_files(
    bundle: ExportBundle, out_dir: Path, stem: str
) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spdx_path = out_dir / f"{stem}.spdx.airs.json"
    cdx_path = out_dir / f"{stem}.cdx.airs.json"
    _write_json(bundle.spdx_doc, spdx_path)
    _write_json(bundle.cdx_doc, cdx_path)
    return spdx_path, cdx_path
