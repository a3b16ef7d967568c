"""End-to-end scan orchestration.

Runs inventory, serializer scans, manifest build/verify, structure checks,
and probe-log metric computation over a model directory, then assembles
the full 41-field evidence artifact, lints it, and derives the exit code.
Every stage failure is recorded as a finding; nothing is dropped silently.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from . import TOOL_NAME, __version__
from .canonical import canonical_bytes, canonical_sha256
from .evidence import (
    Confidence,
    EvidenceArtifact,
    FieldRecord,
    FieldStatus,
    LintReport,
    ModelIdentity,
    SourceType,
    ToolInfo,
    Verdict,
    VerifiabilityBlock,
    assemble_artifact,
    lint_requirements,
    measured,
    undisclosed,
)
from .export import ExportBundle, LintBlocked, export_bundle, write_export_files
from .findings import Finding, Severity, sort_findings
from .integrity import (
    EmptyManifest,
    HashManifest,
    IntegrityError,
    NoTokenizerFound,
    ParseError,
    SymlinkEscape,
    build_manifest,
    fingerprint_config,
    fingerprint_tokenizer,
    load_manifest,
    merkle_root,
    save_manifest,
    verify_manifest,
)
from .packaging import (
    FileInventory,
    FileKind,
    GuardOutcome,
    GuardResult,
    PolicyConfig,
    default_policy,
    enforce_loader_policy,
    inventory_files,
    load_policy,
    parse_safetensors_header,
    policy_digest,
    scan_gguf_metadata,
    scan_onnx_ops,
    scan_pickle_container,
)
from .probes import (
    DegenerateLabels,
    LogFormatError,
    backdoor_asr,
    edd_summary,
    load_backdoor_log,
    load_edd_log,
    load_probe_sidecar,
    load_score_log,
    roc_auc,
)
from .structure import (
    adapter_inventory,
    default_seed,
    dtype_mix,
    shape_consistency,
    tensor_checksums,
    tensor_stats,
)

EXIT_OK = 0
EXIT_POLICY_FAILURE = 1
EXIT_WARNINGS = 2
EXIT_INTERNAL_ERROR = 3

_CONFIG_NAMES = ("config.json", "model_index.json")
_TOKENIZER_NAMES = ("tokenizer.json", "vocab.json", "merges.txt", "tokenizer.model")
_LICENSE_NAMES = ("LICENSE", "LICENSE.txt", "LICENSE.md", "COPYING")
_SIGNATURE_SUFFIXES = (".sig", ".asc", ".sigstore", ".pem")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ScanRequest:
    model_dir: Path
    policy_path: Optional[Path] = None
    baseline_artifact: Optional[Path] = None
    probe_logs: tuple[Path, ...] = ()
    output_dir: Path = Path(".")
    reproducible: bool = False
    export_targets: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "model_dir", Path(self.model_dir))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        object.__setattr__(
            self, "probe_logs", tuple(Path(p) for p in self.probe_logs)
        )
        if not self.model_dir.is_dir():
            raise ConfigError(f"model dir {self.model_dir} does not exist")
        unknown = self.export_targets - {"spdx", "cdx"}
        if unknown:
            raise ConfigError(f"unknown export targets: {sorted(unknown)}")


@dataclass(frozen=True)
class ScanReport:
    artifact: EvidenceArtifact
    guard_results: tuple[GuardResult, ...]
    findings: tuple[Finding, ...]
    lint: LintReport
    exit_code: int
    manifest: Optional[HashManifest] = None


def derive_exit_code(
    verdict: Verdict,
    guard_results: tuple[GuardResult, ...],
    findings: tuple[Finding, ...],
) -> int:
    if (
        verdict is Verdict.FAIL_MUST
        or any(g.outcome is not GuardOutcome.PASS for g in guard_results)
        or any(f.severity is Severity.CRITICAL for f in findings)
    ):
        return EXIT_POLICY_FAILURE
    if verdict is Verdict.WARN_SHOULD or any(
        f.severity is Severity.WARN for f in findings
    ):
        return EXIT_WARNINGS
    return EXIT_OK


def _publisher_block(notes: str = "") -> VerifiabilityBlock:
    return VerifiabilityBlock(
        SourceType.PUBLISHER, url="", confidence=Confidence.MEDIUM, notes=notes
    )


def _third_party_block(notes: str = "") -> VerifiabilityBlock:
    return VerifiabilityBlock(
        SourceType.THIRD_PARTY, url="", confidence=Confidence.MEDIUM, notes=notes
    )


@dataclass
class _Records:
    """Collects exactly one record per schema field id."""

    by_id: dict[str, FieldRecord] = field(default_factory=dict)

    def present(self, fid: str, value: Any, block: Optional[VerifiabilityBlock] = None) -> None:
        self.by_id[fid] = FieldRecord(
            fid, FieldStatus.PRESENT, value, block or measured()
        )

    def undisclosed(self, fid: str, note: str = "") -> None:
        self.by_id[fid] = FieldRecord(
            fid, FieldStatus.UNDISCLOSED, None, undisclosed(note)
        )

    def absent(self, fid: str, note: str) -> None:
        self.by_id[fid] = FieldRecord(
            fid, FieldStatus.ABSENT, None, measured(note)
        )

    def as_list(self) -> list[FieldRecord]:
        return list(self.by_id.values())


def _read_json_file(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(str(path), str(exc)) from exc


def _load_release_metadata(model_dir: Path, findings: list[Finding]) -> dict[str, Any]:
    path = model_dir / "release.json"
    if not path.is_file():
        return {}
    try:
        doc = _read_json_file(path)
    except ParseError:
        findings.append(
            Finding(
                id="release-metadata-unparseable",
                severity=Severity.WARN,
                path="release.json",
                reason="release metadata file is not valid JSON",
            )
        )
        return {}
    return doc if isinstance(doc, dict) else {}


def _detect_license(model_dir: Path, release: dict, config: dict) -> Optional[str]:
    for source in (release, config):
        value = source.get("license")
        if isinstance(value, str) and value.strip():
            return value.strip()
    for name in _LICENSE_NAMES:
        path = model_dir / name
        if path.is_file():
            for line in path.read_text(encoding="utf-8", errors="replace").splitlines():
                if line.strip():
                    return line.strip()
    return None


def _scan_weights(
    model_dir: Path,
    inventory: FileInventory,
    policy: PolicyConfig,
    findings: list[Finding],
) -> tuple[dict[str, list[Finding]], dict[str, Any], dict[str, Any]]:
    """Per-format serializer scans.

    Returns (scan_findings for the guard, safetensors headers by path,
    onnx op-scan summary).
    """
    scan_findings: dict[str, list[Finding]] = {}
    headers: dict[str, Any] = {}
    onnx_files = 0
    onnx_ops: set[str] = set()

    for entry in inventory.weights_artifacts():
        path = model_dir / entry.relative_path
        try:
            if entry.detected_kind is FileKind.WEIGHTS_SAFETENSORS:
                header, file_findings = parse_safetensors_header(path)
                headers[entry.relative_path] = header
            elif entry.detected_kind is FileKind.WEIGHTS_GGUF:
                _, file_findings = scan_gguf_metadata(path, policy)
            elif entry.detected_kind is FileKind.ONNX_GRAPH:
                ops, file_findings = scan_onnx_ops(path, policy)
                onnx_files += 1
                onnx_ops.update(ops)
            else:
                file_findings = scan_pickle_container(path)
            scan_findings[entry.relative_path] = file_findings
            findings.extend(file_findings)
        except Exception as exc:  # noqa: BLE001 - recorded, guard fails closed
            findings.append(
                Finding(
                    id="serializer-scan-error",
                    severity=Severity.WARN,
                    path=entry.relative_path,
                    reason=f"serializer scan raised: {exc}",
                )
            )
    onnx_summary = {"files": onnx_files, "ops": sorted(onnx_ops)}
    return scan_findings, headers, onnx_summary


def _integrity_stage(
    model_dir: Path, records: _Records, findings: list[Finding]
) -> tuple[Optional[HashManifest], Optional[HashManifest]]:
    """Builds the measured manifest and checks any shipped reference manifest.

    Returns (measured, declared); the loader guard verifies hashes against
    the declared manifest when the publisher shipped one.
    """
    declared: Optional[HashManifest] = None
    try:
        manifest = build_manifest(model_dir)
    except (EmptyManifest, SymlinkEscape, IntegrityError) as exc:
        findings.append(
            Finding(
                id="manifest-build-failed",
                severity=Severity.CRITICAL,
                path=".",
                reason=f"hash manifest could not be built: {exc}",
                threat_ref="4.1",
            )
        )
        records.absent("1.5", "manifest build failed")
        records.absent("1.7", "manifest build failed")
        return None, None

    records.present("1.5", manifest.to_json_list())
    root = merkle_root(manifest)
    records.present(
        "1.7",
        {
            "root": root.root,
            "leaf_count": root.leaf_count,
            "construction_id": root.construction_id,
        },
    )

    shipped = sorted(model_dir.glob("*.manifest.json"))
    if shipped:
        try:
            declared = load_manifest(shipped[0])
            report = verify_manifest(model_dir, declared)
            for item in report.mismatched:
                findings.append(
                    Finding(
                        id="manifest-mismatch",
                        severity=Severity.CRITICAL,
                        path=item["path"],
                        reason="file digest differs from shipped reference manifest",
                        threat_ref="4.1",
                        evidence={
                            "expected": item["expected"],
                            "actual": item["actual"],
                        },
                    )
                )
            for rel in report.missing:
                findings.append(
                    Finding(
                        id="manifest-missing-file",
                        severity=Severity.CRITICAL,
                        path=rel,
                        reason="file named in shipped reference manifest is absent",
                        threat_ref="4.1",
                    )
                )
            for rel in report.extra:
                findings.append(
                    Finding(
                        id="manifest-extra-file",
                        severity=Severity.WARN,
                        path=rel,
                        reason="file not covered by shipped reference manifest",
                    )
                )
        except IntegrityError as exc:
            declared = None
            findings.append(
                Finding(
                    id="manifest-unreadable",
                    severity=Severity.WARN,
                    path=shipped[0].name,
                    reason=f"shipped reference manifest unreadable: {exc}",
                )
            )
    return manifest, declared


def _sidecar_for(log_path: Path) -> Optional[Path]:
    candidate = log_path.parent / f"{log_path.stem}.sidecar.json"
    return candidate if candidate.is_file() else None


def _probe_stage(
    probe_logs: tuple[Path, ...], records: _Records, findings: list[Finding]
) -> None:
    score_summaries: list[dict[str, Any]] = []
    edd_summaries: list[dict[str, Any]] = []
    backdoor_summaries: list[dict[str, Any]] = []
    sidecars: list[dict[str, Any]] = []
    attempted = {"score": False, "edd": False, "backdoor": False}
    sidecar_paths: set[Path] = set()

    def fail(path: Path, detail: str) -> None:
        findings.append(
            Finding(
                id="probe-log-error",
                severity=Severity.WARN,
                path=path.name,
                reason=detail,
            )
        )

    for raw in probe_logs:
        path = Path(raw)
        if not path.is_file():
            fail(path, "probe log does not exist")
            continue
        if path.suffix == ".json":
            sidecar_paths.add(path)
            continue
        try:
            first = ""
            for line in path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    first = line
                    break
            keys = set(json.loads(first)) if first else set()
        except (OSError, json.JSONDecodeError) as exc:
            fail(path, f"cannot classify probe log: {exc}")
            continue

        side = _sidecar_for(path)
        if side is not None:
            sidecar_paths.add(side)

        try:
            if "score" in keys:
                attempted["score"] = True
                summary = roc_auc(load_score_log(path))
                score_summaries.append({"name": path.stem, **summary.to_json_dict()})
            elif "samples" in keys:
                attempted["edd"] = True
                groups, separation = edd_summary(load_edd_log(path))
                edd_summaries.append(
                    {"name": path.stem, "groups": groups, "separation": separation}
                )
            elif "attack_success" in keys:
                attempted["backdoor"] = True
                sweep = backdoor_asr(load_backdoor_log(path))
                backdoor_summaries.append({"name": path.stem, **sweep.to_json_dict()})
            else:
                fail(path, "unrecognized probe log record shape")
        except (LogFormatError, DegenerateLabels) as exc:
            fail(path, f"probe log rejected: {exc}")

    for side in sorted(sidecar_paths):
        try:
            sidecars.append(load_probe_sidecar(side))
        except LogFormatError as exc:
            fail(side, f"sidecar rejected: {exc}")

    if sidecars:
        records.present(
            "4.1", {"count": len(sidecars), "methods": sidecars}, _third_party_block()
        )
    else:
        records.undisclosed("4.1", "no probe run metadata supplied")

    if score_summaries or edd_summaries:
        records.present(
            "4.2", {"score_probes": score_summaries, "edd_probes": edd_summaries}
        )
    elif attempted["score"] or attempted["edd"]:
        records.absent("4.2", "probe logs supplied but none usable")
    else:
        records.undisclosed("4.2", "no detector probe logs supplied")

    if backdoor_summaries:
        records.present("4.3", {"count": len(backdoor_summaries), "sweeps": backdoor_summaries})
    elif attempted["backdoor"]:
        records.absent("4.3", "backdoor logs supplied but none usable")
    else:
        records.undisclosed("4.3", "no backdoor sweep logs supplied")

    for fid, note in (
        ("4.4", "no personal-data probe performed"),
        ("4.5", "no jailbreak probe performed"),
        ("4.6", "no prompt-leak probe performed"),
        ("4.7", "no sanity-prompt diff performed"),
        ("4.8", "no activation probe performed"),
    ):
        records.undisclosed(fid, note)


def _eval_stage(model_dir: Path, records: _Records, findings: list[Finding]) -> None:
    mapping = {
        "5.1": "benchmark_summary",
        "5.2": "eval_datasets",
        "5.3": "metrics",
        "5.4": "eval_params",
        "5.5": "training_data_cutoff",
    }
    path = model_dir / "eval_summary.json"
    if not path.is_file():
        for fid in mapping:
            records.undisclosed(fid, "no evaluation disclosure file")
        return
    try:
        doc = _read_json_file(path)
        if not isinstance(doc, dict):
            raise ParseError(str(path), "top level is not an object")
    except ParseError as exc:
        findings.append(
            Finding(
                id="eval-summary-unparseable",
                severity=Severity.WARN,
                path="eval_summary.json",
                reason=f"evaluation disclosure unreadable: {exc}",
            )
        )
        for fid in mapping:
            records.absent(fid, "evaluation disclosure file unparseable")
        return
    for fid, key in mapping.items():
        if key in doc and doc[key] not in (None, "", [], {}):
            records.present(fid, doc[key], _publisher_block("from eval_summary.json"))
        else:
            records.undisclosed(fid, f"{key} not in evaluation disclosure")


def _baseline_stage(
    baseline_path: Path,
    manifest: Optional[HashManifest],
    records: _Records,
    findings: list[Finding],
) -> None:
    try:
        doc = _read_json_file(baseline_path)
        base_fields = {f["field_id"]: f for f in doc.get("fields", [])}
    except (ParseError, TypeError, KeyError) as exc:
        raise ConfigError(f"baseline artifact unreadable: {exc}") from exc

    base_manifest = base_fields.get("1.5", {}).get("value")
    if isinstance(base_manifest, list) and manifest is not None:
        before = {e.get("path"): e.get("sha256") for e in base_manifest if isinstance(e, dict)}
        after = {e.relative_path: e.sha256 for e in manifest.entries}
        for path in sorted(set(after) - set(before)):
            findings.append(
                Finding(id="drift-file-added", severity=Severity.INFO, path=path,
                        reason="file absent from baseline artifact manifest")
            )
        for path in sorted(set(before) - set(after)):
            findings.append(
                Finding(id="drift-file-removed", severity=Severity.INFO, path=path,
                        reason="file present in baseline artifact manifest only")
            )
        for path in sorted(set(before) & set(after)):
            if before[path] != after[path]:
                findings.append(
                    Finding(id="drift-file-changed", severity=Severity.INFO, path=path,
                            reason="file digest differs from baseline artifact")
                )

    base_config = base_fields.get("1.9", {}).get("value")
    current = records.by_id.get("1.9")
    if (
        isinstance(base_config, dict)
        and current is not None
        and current.status is FieldStatus.PRESENT
        and base_config.get("sha256") != current.value.get("sha256")
    ):
        findings.append(
            Finding(id="drift-config-changed", severity=Severity.INFO, path="config.json",
                    reason="config fingerprint differs from baseline artifact")
        )


def run_scan(request: ScanRequest) -> ScanReport:
    model_dir = request.model_dir
    findings: list[Finding] = []
    records = _Records()

    if request.policy_path is not None:
        policy = load_policy(request.policy_path)
    else:
        policy = default_policy()

    # --- publisher metadata and identity ------------------------------
    release = _load_release_metadata(model_dir, findings)
    config: dict[str, Any] = {}
    config_files = [model_dir / n for n in _CONFIG_NAMES if (model_dir / n).is_file()]
    if config_files:
        try:
            loaded = _read_json_file(config_files[0])
            config = loaded if isinstance(loaded, dict) else {}
        except ParseError as exc:
            findings.append(
                Finding(
                    id="config-unparseable",
                    severity=Severity.WARN,
                    path=config_files[0].name,
                    reason=f"model config unreadable: {exc}",
                )
            )

    # --- inventory and serializer scans -------------------------------
    inventory, inv_findings = inventory_files(model_dir, policy)
    findings.extend(inv_findings)
    scan_findings, st_headers, onnx_summary = _scan_weights(
        model_dir, inventory, policy, findings
    )

    # --- integrity -----------------------------------------------------
    manifest, declared_manifest = _integrity_stage(model_dir, records, findings)

    # --- identity fields ----------------------------------------------
    model_name = str(release.get("model_name") or model_dir.name)
    name_block = _publisher_block() if "model_name" in release else measured()
    records.present("1.1", model_name, name_block)

    model_id = str(
        release.get("model_id") or config.get("_name_or_path") or model_dir.name
    )
    id_block = (
        _publisher_block()
        if ("model_id" in release or "_name_or_path" in config)
        else measured()
    )
    records.present("1.2", model_id, id_block)

    version = release.get("version_or_commit")
    if isinstance(version, str) and version.strip():
        records.present("1.3", version.strip(), _publisher_block())
    elif manifest is not None:
        root = merkle_root(manifest)
        records.present("1.3", f"merkle:{root.root[:16]}")
    else:
        records.undisclosed("1.3", "no declared version and no manifest")

    license_text = _detect_license(model_dir, release, config)
    if license_text:
        records.present("1.4", license_text, _publisher_block())
    else:
        records.undisclosed("1.4", "no license declaration found")

    signature_files = sorted(
        e.relative_path
        for e in inventory.entries
        if Path(e.relative_path).suffix.lower() in _SIGNATURE_SUFFIXES
    )
    if signature_files:
        records.present(
            "1.6", {"count": len(signature_files), "files": signature_files},
            _publisher_block(),
        )
    else:
        records.undisclosed("1.6", "no signature bundle shipped")

    publisher = release.get("publisher")
    if isinstance(publisher, str) and publisher.strip():
        records.present("1.8", {"publisher": publisher.strip()}, _publisher_block())
    else:
        records.undisclosed("1.8", "no publisher evidence shipped")

    if config_files:
        fp = fingerprint_config(config_files)
        records.present(
            "1.9", {"sha256": fp.sha256, "source_files": list(fp.source_files)}
        )
        records.present("1.10", {"sha256": fp.sha256, "matched_family": None})
    else:
        records.undisclosed("1.9", "no config file found")
        records.undisclosed("1.10", "no config file found")

    # --- packaging fields ----------------------------------------------
    records.present(
        "2.1", {"policy": policy.to_json_dict(), "digest": policy_digest(policy)}
    )
    sorted_scan = sort_findings(
        [f for per_file in scan_findings.values() for f in per_file]
    )
    records.present(
        "2.2",
        {
            "files_scanned": len(inventory.weights_artifacts()),
            "findings_count": len(sorted_scan),
            "findings": [f.to_json_dict() for f in sorted_scan],
        },
    )

    guard_results = tuple(
        enforce_loader_policy(
            model_dir, policy,
            manifest=declared_manifest if declared_manifest is not None else manifest,
            inventory=inventory,
            scan_findings=scan_findings,
        )
    )
    guard_for_field = guard_results
    if request.reproducible:
        guard_for_field = tuple(
            dataclasses.replace(g, timing_ms=0) for g in guard_results
        )
    records.present(
        "2.3",
        {
            "count": len(guard_for_field),
            "results": [g.to_json_dict() for g in guard_for_field],
        },
    )

    inventory_json = inventory.to_json_list()
    records.present("2.4", inventory_json)
    binaries_json = [
        e for e in inventory_json
        if e.get("detected_kind") == FileKind.NATIVE_BINARY.value
    ]
    records.present(
        "2.5", {"count": len(binaries_json), "entries": binaries_json}
    )
    records.present(
        "2.6", {"extension_allowlist": sorted(policy.extension_allowlist)}
    )

    blocked = [g for g in guard_for_field if g.outcome is GuardOutcome.BLOCKED]
    if blocked:
        records.present(
            "2.7",
            {"count": len(blocked), "entries": [g.to_json_dict() for g in blocked]},
        )
    else:
        records.undisclosed("2.7", "no loads were blocked in this run")

    suspicious = sum(1 for f in sorted_scan if f.threat_ref == "3.5")
    records.present(
        "2.8",
        {
            "files_examined": len(inventory.weights_artifacts()),
            "suspicious_findings": suspicious,
        },
    )

    tokenizer_files = [
        model_dir / n for n in _TOKENIZER_NAMES if (model_dir / n).is_file()
    ]
    try:
        fps = fingerprint_tokenizer(tokenizer_files)
        records.present(
            "2.9",
            {
                "fingerprints": [
                    {
                        "kind": fp.kind.value,
                        "sha256": fp.sha256,
                        "source_files": list(fp.source_files),
                    }
                    for fp in fps
                ]
            },
        )
    except NoTokenizerFound:
        records.undisclosed("2.9", "no tokenizer definition files shipped")

    records.present("2.10", onnx_summary)

    # --- structure fields -----------------------------------------------
    base_model = release.get("base_model") or config.get("base_model")
    adapter_configs = sorted(model_dir.rglob("adapter_config.json"))
    if not base_model:
        for ac in adapter_configs:
            try:
                doc = _read_json_file(ac)
            except ParseError:
                continue
            if isinstance(doc, dict) and doc.get("base_model_name_or_path"):
                base_model = doc["base_model_name_or_path"]
                break
    if isinstance(base_model, str) and base_model.strip():
        records.present("3.1", base_model.strip(), _publisher_block())
    else:
        records.undisclosed("3.1", "no declared upstream base model")

    quantization = config.get("quantization_config")
    if quantization:
        records.present("3.2", quantization, _publisher_block())
    else:
        records.undisclosed("3.2", "no quantization declaration")

    declared_adapters = release.get("adapters")
    if isinstance(declared_adapters, list) and declared_adapters:
        records.present("3.3", {"declared": declared_adapters}, _publisher_block())
    else:
        declared_adapters = None
        records.undisclosed("3.3", "no declared adapters")

    adapters, adapter_findings = adapter_inventory(
        model_dir, declared=declared_adapters
    )
    findings.extend(adapter_findings)
    records.present(
        "3.4",
        {"count": len(adapters), "entries": [a.to_json_dict() for a in adapters]},
    )
    records.present(
        "3.5",
        {
            "count": len(adapters),
            "entries": [
                {
                    "adapter_path": a.adapter_path,
                    "config_digest": a.config_digest,
                    "weights_digest": a.weights_digest,
                }
                for a in adapters
            ],
        },
    )

    if config and st_headers:
        shape_report = shape_consistency(config, st_headers)
        records.present(
            "3.6",
            {
                "verdict": shape_report.verdict,
                "checks": [dataclasses.asdict(c) for c in shape_report.checks],
                "unchecked_keys": list(shape_report.unchecked_keys),
            },
        )
        if shape_report.verdict != "Consistent":
            findings.append(
                Finding(
                    id="shape-inconsistent",
                    severity=Severity.WARN,
                    path=config_files[0].name if config_files else "config.json",
                    reason="declared config dimensions do not all match tensor shapes",
                )
            )
    else:
        records.undisclosed("3.6", "needs both a config and safetensors headers")

    checksum_map: dict[str, dict[str, str]] = {}
    stats_rows = []
    for rel, header in sorted(st_headers.items()):
        path = model_dir / rel
        try:
            checksum_map[rel] = tensor_checksums(path, header)
            stats_rows.extend(
                tensor_stats(path, header, seed=default_seed())
            )
        except Exception as exc:  # noqa: BLE001 - recorded, stage continues
            findings.append(
                Finding(
                    id="structure-scan-error",
                    severity=Severity.WARN,
                    path=rel,
                    reason=f"tensor pass raised: {exc}",
                )
            )
    records.present(
        "3.7",
        {
            "files": len(checksum_map),
            "tensors": sum(len(v) for v in checksum_map.values()),
            "combined_sha256": canonical_sha256(checksum_map),
        },
    )
    flag_counts: dict[str, int] = {}
    for row in stats_rows:
        for flag in row.flags:
            flag_counts[flag] = flag_counts.get(flag, 0) + 1
    records.present(
        "3.8",
        {
            "tensors": len(stats_rows),
            "non_finite_tensors": sum(
                1 for r in stats_rows if r.nan_count or r.inf_count
            ),
            "outliers_total": sum(r.outlier_count for r in stats_rows),
            "dtype_mix": dtype_mix(st_headers),
            "flags": dict(sorted(flag_counts.items())),
        },
    )
    for row in stats_rows:
        if "non_finite_values" in row.flags:
            findings.append(
                Finding(
                    id="tensor-non-finite",
                    severity=Severity.WARN,
                    path=row.name,
                    reason="tensor holds NaN or Inf values",
                )
            )

    # --- probes and evaluation -----------------------------------------
    _probe_stage(request.probe_logs, records, findings)
    _eval_stage(model_dir, records, findings)

    # --- baseline drift --------------------------------------------------
    if request.baseline_artifact is not None:
        _baseline_stage(Path(request.baseline_artifact), manifest, records, findings)

    # --- assemble, lint, exit -------------------------------------------
    identity = ModelIdentity(
        model_name=model_name,
        model_id=model_id,
        version_or_commit=str(records.by_id["1.3"].value or "undisclosed"),
        license=license_text or "",
    )
    ordered_findings = tuple(sort_findings(findings))
    artifact = assemble_artifact(
        identity,
        records.as_list(),
        ToolInfo(TOOL_NAME, __version__),
        reproducible=request.reproducible,
    )
    lint = lint_requirements(artifact, policy)
    exit_code = derive_exit_code(lint.verdict, guard_results, ordered_findings)
    return ScanReport(
        artifact=artifact,
        guard_results=guard_results,
        findings=ordered_findings,
        lint=lint,
        exit_code=exit_code,
        manifest=manifest,
    )


def write_outputs(report: ScanReport, request: ScanRequest) -> dict[str, Any]:
    """Write artifact, measured manifest, and any requested exports."""
    from .evidence import write_artifact

    out_dir = Path(request.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = request.model_dir.name
    written: dict[str, Any] = {}

    artifact_path = out_dir / f"{stem}.airs.json"
    write_artifact(report.artifact, artifact_path)
    written["artifact"] = artifact_path

    if report.manifest is not None:
        manifest_path = out_dir / f"{stem}.manifest.json"
        save_manifest(report.manifest, manifest_path)
        written["manifest"] = manifest_path

    if request.export_targets:
        try:
            bundle: ExportBundle = export_bundle(report.artifact)
        except LintBlocked as exc:
            written["export_error"] = str(exc)
            return written
        spdx_path, cdx_path = write_export_files(bundle, out_dir, stem)
        if "spdx" in request.export_targets:
            written["spdx"] = spdx_path
        else:
            spdx_path.unlink()
        if "cdx" in request.export_targets:
            written["cdx"] = cdx_path
        else:
            cdx_path.unlink()
        written["coverage"] = bundle.coverage_report
    return written


def _text_table(rows: list[tuple[str, ...]], header: tuple[str, ...]) -> list[str]:
    widths = [len(h) for h in header]
    for row in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
    line = "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()
    sep = "  ".join("-" * w for w in widths)
    out = [line, sep]
    for row in rows:
        out.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return out


def render_report(report: ScanReport, format: str = "text") -> bytes:
    if format == "json":
        return canonical_bytes(
            {
                "artifact": report.artifact.to_json_dict(),
                "findings": [f.to_json_dict() for f in report.findings],
            }
        )
    if format != "text":
        raise ConfigError(f"unknown report format {format!r}")

    lines = [
        f"airscan report for {report.artifact.subject.model_id}",
        f"generated at {report.artifact.generated_at}",
        "",
        "== loader guard ==",
    ]
    if report.guard_results:
        rows = [
            (g.artifact_path, g.serialization, g.display) for g in report.guard_results
        ]
        lines.extend(_text_table(rows, ("Artifact", "Serialization", "Outcome")))
    else:
        lines.append("no weights artifacts found")

    lines.extend(["", "== probe metrics =="])
    detector = report.artifact.record("4.2")
    probe_rows: list[tuple[str, ...]] = []
    if detector is not None and detector.status is FieldStatus.PRESENT:
        for probe in detector.value.get("score_probes", []):
            tpr = probe.get("tpr_at_fpr", {}).get("0.05")
            probe_rows.append(
                (
                    probe.get("name", "?"),
                    f"{probe.get('auc', float('nan')):.3f}",
                    "-" if tpr is None else f"{tpr:.3f}",
                )
            )
    if probe_rows:
        lines.extend(_text_table(probe_rows, ("Probe", "AUC", "TPR @ 5% FPR")))
    else:
        lines.append("no probe logs ingested")

    lines.extend(["", "== findings =="])
    if report.findings:
        for f in report.findings:
            lines.append(f"[{f.severity.value}] {f.path}: {f.id}: {f.reason}")
    else:
        lines.append("no findings")

    lines.extend(
        [
            "",
            "== lint ==",
            f"verdict: {report.lint.verdict.value}",
            f"missing Must fields: {list(report.lint.missing_must) or '-'}",
            f"missing Should fields: {list(report.lint.missing_should) or '-'}",
            f"exit code: {report.exit_code}",
            "",
        ]
    )
    return "\n".join(lines).encode("utf-8")
