"""Orchestration and CLI tests: exit codes, report rendering, output
files, reproducible reruns, fixture generation, drift, and the JSONL
contract schemas.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import pytest

from airscan.cli import main
from airscan.evidence import FieldStatus, Verdict, load_artifact, verify_digest
from airscan.export import collect_fields_spdx
from airscan.fixtures import FIXTURE_CASES, make_fixture, write_probe_logs
from airscan.packaging import GuardOutcome, GuardResult
from airscan.scan import (
    ConfigError,
    ScanRequest,
    derive_exit_code,
    render_report,
    run_scan,
    write_outputs,
)
from airscan.canonical import canonical_bytes

SCHEMA_DIR = Path("src/airscan/data/schemas")
COMMITTED_LOGS = Path(__file__).parent / "fixtures" / "probe_logs"


def clean_request(tmp_path, reproducible=True, **kw):
    model_dir = make_fixture("clean", tmp_path)
    logs = tuple(sorted((tmp_path / "probe-logs").glob("*.jsonl")))
    return ScanRequest(
        model_dir=model_dir,
        probe_logs=logs,
        output_dir=tmp_path / "out",
        reproducible=reproducible,
        **kw,
    )


# ------------------------------------------------------------- exit codes


def test_clean_fixture_exits_zero(tmp_path):
    report = run_scan(clean_request(tmp_path))
    assert report.exit_code == 0
    assert all(g.outcome is GuardOutcome.PASS for g in report.guard_results)
    assert report.lint.verdict is Verdict.PASS
    assert report.findings == ()


def test_guard_table_fixture_exits_one(tmp_path):
    model_dir = make_fixture("guard-table", tmp_path)
    report = run_scan(ScanRequest(model_dir=model_dir, output_dir=tmp_path / "out"))
    assert report.exit_code == 1
    outcomes = {g.artifact_path: g.display for g in report.guard_results}
    assert outcomes["model-00001-of-00002.safetensors"] == "Pass (hash match)"
    assert outcomes["model_mutant.safetensors"] == "Fail (hash mismatch)"
    assert outcomes["unsafe.pt"] == "Blocked (fail)"


def test_warn_should_fixture_exits_two(tmp_path):
    model_dir = make_fixture("warn-should", tmp_path)
    report = run_scan(ScanRequest(model_dir=model_dir, output_dir=tmp_path / "out"))
    assert report.exit_code == 2
    assert report.lint.verdict is Verdict.WARN_SHOULD
    assert set(report.lint.missing_should) == {"5.1", "5.2", "5.3"}


def test_exit_code_precedence_pure_function():
    pass_guard = GuardResult("a.safetensors", "safetensors", GuardOutcome.PASS,
                             "ok", "d" * 64, 0)
    fail_guard = GuardResult("b.safetensors", "safetensors", GuardOutcome.FAIL,
                             "mismatch", "d" * 64, 0)
    from airscan.findings import Finding, Severity

    warn = Finding(id="x", severity=Severity.WARN, path="p", reason="r")
    crit = Finding(id="y", severity=Severity.CRITICAL, path="p", reason="r",
                   threat_ref="2.1")
    assert derive_exit_code(Verdict.PASS, (pass_guard,), ()) == 0
    assert derive_exit_code(Verdict.PASS, (pass_guard,), (warn,)) == 2
    assert derive_exit_code(Verdict.WARN_SHOULD, (pass_guard,), ()) == 2
    assert derive_exit_code(Verdict.PASS, (fail_guard,), ()) == 1
    assert derive_exit_code(Verdict.FAIL_MUST, (pass_guard,), (warn,)) == 1
    assert derive_exit_code(Verdict.PASS, (pass_guard,), (crit, warn)) == 1


def test_exit_zero_implies_no_failures(tmp_path):
    report = run_scan(clean_request(tmp_path))
    assert report.exit_code == 0
    assert not report.lint.missing_must
    assert all(g.outcome is GuardOutcome.PASS for g in report.guard_results)
    from airscan.findings import Severity

    assert not any(f.severity is Severity.CRITICAL for f in report.findings)


# ------------------------------------------------------------- artifact content


def test_all_41_fields_recorded(tmp_path):
    report = run_scan(clean_request(tmp_path))
    assert len(report.artifact.fields) == 41
    by_status = {}
    for rec in report.artifact.fields:
        by_status.setdefault(rec.status, []).append(rec.field_id)
    must = {"1.1", "1.2", "1.3", "1.4", "1.5", "2.1", "2.2", "2.3"}
    present = set(by_status[FieldStatus.PRESENT])
    assert must <= present
    # probe metrics landed
    assert {"4.1", "4.2", "4.3"} <= present
    # digest verifies
    assert verify_digest(report.artifact.to_json_dict())


def test_probe_metrics_in_artifact(tmp_path):
    report = run_scan(clean_request(tmp_path))
    detector = report.artifact.record("4.2")
    probes = detector.value["score_probes"]
    assert len(probes) == 1 and probes[0]["name"] == "scores"
    assert probes[0]["auc"] == 1.0
    edd = detector.value["edd_probes"]
    assert len(edd) == 1 and edd[0]["separation"] > 0
    backdoor = report.artifact.record("4.3").value["sweeps"][0]
    assert backdoor["asr_triggered"] == pytest.approx(3 / 8)
    assert backdoor["asr_control"] == 0.0


def test_shape_report_consistent_for_clean(tmp_path):
    report = run_scan(clean_request(tmp_path))
    shape = report.artifact.record("3.6").value
    assert shape["verdict"] == "Consistent"
    assert all(c["ok"] for c in shape["checks"])


# ------------------------------------------------------------- determinism


def test_reproducible_runs_byte_identical(tmp_path):
    model_dir = make_fixture("clean", tmp_path)
    logs = tuple(sorted((tmp_path / "probe-logs").glob("*.jsonl")))

    outputs = []
    for run in ("one", "two"):
        out = tmp_path / run
        request = ScanRequest(model_dir=model_dir, probe_logs=logs,
                              output_dir=out, reproducible=True,
                              export_targets=frozenset({"spdx", "cdx"}))
        report = run_scan(request)
        write_outputs(report, request)
        outputs.append(out)

    names = [p.name for p in sorted(outputs[0].iterdir())]
    assert names == [p.name for p in sorted(outputs[1].iterdir())]
    for name in names:
        a = (outputs[0] / name).read_bytes()
        b = (outputs[1] / name).read_bytes()
        assert a == b, f"{name} differs between reproducible runs"


def test_nonreproducible_timestamp_differs_from_sentinel(tmp_path):
    report = run_scan(clean_request(tmp_path, reproducible=False))
    assert report.artifact.generated_at != "1970-01-01T00:00:00Z"
    assert verify_digest(report.artifact.to_json_dict())


# ------------------------------------------------------------- rendering


def test_render_text_mirrors_guard_table(tmp_path):
    model_dir = make_fixture("guard-table", tmp_path)
    report = run_scan(ScanRequest(model_dir=model_dir, output_dir=tmp_path / "out"))
    text = render_report(report, "text").decode("utf-8")
    assert "Artifact" in text and "Serialization" in text and "Outcome" in text
    assert "Pass (hash match)" in text
    assert "Fail (hash mismatch)" in text
    assert "Blocked (fail)" in text


def test_render_text_no_findings_section(tmp_path):
    report = run_scan(clean_request(tmp_path))
    text = render_report(report, "text").decode("utf-8")
    assert "no findings" in text
    assert "Probe" in text and "AUC" in text and "TPR @ 5% FPR" in text


def test_render_json_is_canonical(tmp_path):
    report = run_scan(clean_request(tmp_path))
    rendered = render_report(report, "json")
    want = canonical_bytes(
        {
            "artifact": report.artifact.to_json_dict(),
            "findings": [f.to_json_dict() for f in report.findings],
        }
    )
    assert rendered == want


def test_render_unknown_format_rejected(tmp_path):
    report = run_scan(clean_request(tmp_path))
    with pytest.raises(ConfigError):
        render_report(report, "yaml")


# ------------------------------------------------------------- outputs


def test_write_outputs_artifact_round_trips(tmp_path):
    request = clean_request(tmp_path, export_targets=frozenset({"spdx", "cdx"}))
    report = run_scan(request)
    written = write_outputs(report, request)
    loaded = load_artifact(written["artifact"])
    assert loaded.canonical_digest == report.artifact.canonical_digest
    assert written["artifact"].name == "model.airs.json"
    assert written["manifest"].name == "model.manifest.json"
    assert written["coverage"]["mapped_spdx"] >= 4
    spdx_doc = json.loads(written["spdx"].read_text(encoding="utf-8"))
    recovered = collect_fields_spdx(spdx_doc)
    assert recovered["model_name"] == "tiny-clean"


def test_export_skipped_when_lint_fails(tmp_path):
    model_dir = tmp_path / "bare"
    model_dir.mkdir()
    (model_dir / "data.txt").write_text("x", encoding="utf-8")
    request = ScanRequest(model_dir=model_dir, output_dir=tmp_path / "out",
                          export_targets=frozenset({"spdx"}))
    report = run_scan(request)
    assert report.lint.verdict is Verdict.FAIL_MUST
    written = write_outputs(report, request)
    assert "export_error" in written
    assert "spdx" not in written


# ------------------------------------------------------------- drift


def test_baseline_drift_findings(tmp_path):
    request = clean_request(tmp_path)
    report = run_scan(request)
    written = write_outputs(report, request)

    # mutate the model and rescan against the first artifact
    model_dir = request.model_dir
    (model_dir / "extra.txt").write_text("new file", encoding="utf-8")
    config = json.loads((model_dir / "config.json").read_text(encoding="utf-8"))
    config["hidden_size"] = 8  # unchanged value, but rewrite reformats
    (model_dir / "config.json").write_text(
        json.dumps(config, sort_keys=True), encoding="utf-8"
    )
    second = ScanRequest(model_dir=model_dir, probe_logs=request.probe_logs,
                         output_dir=tmp_path / "out2", reproducible=True,
                         baseline_artifact=written["artifact"])
    report2 = run_scan(second)
    ids = {f.id for f in report2.findings}
    assert "drift-file-added" in ids
    assert "drift-file-changed" in ids


def test_bad_baseline_raises_config_error(tmp_path):
    request = clean_request(tmp_path)
    bad = tmp_path / "baseline.json"
    bad.write_text("not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        run_scan(ScanRequest(model_dir=request.model_dir,
                             output_dir=tmp_path / "out",
                             baseline_artifact=bad))


# ------------------------------------------------------------- CLI surface


def test_cli_scan_clean(tmp_path, capsys):
    model_dir = make_fixture("clean", tmp_path)
    logs = sorted((tmp_path / "probe-logs").glob("*.jsonl"))
    argv = ["scan", "--model-dir", str(model_dir), "--out", str(tmp_path / "out"),
            "--reproducible"]
    for log in logs:
        argv += ["--probe-log", str(log)]
    code = main(argv)
    out = capsys.readouterr().out
    assert code == 0
    assert "Pass (hash match)" in out
    assert (tmp_path / "out" / "model.airs.json").is_file()


def test_cli_scan_json_format(tmp_path, capsys):
    model_dir = make_fixture("clean", tmp_path)
    code = main(["scan", "--model-dir", str(model_dir),
                 "--out", str(tmp_path / "out"), "--reproducible",
                 "--format", "json"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert "artifact" in doc and "findings" in doc


def test_cli_missing_model_dir_exits_three(tmp_path, capsys):
    code = main(["scan", "--model-dir", str(tmp_path / "nope"),
                 "--out", str(tmp_path / "out")])
    assert code == 3
    assert "airscan error" in capsys.readouterr().err


def test_cli_verify_match_and_mismatch(tmp_path, capsys):
    model_dir = make_fixture("clean", tmp_path)
    manifest = model_dir / "release.manifest.json"
    assert main(["verify", "--manifest", str(manifest),
                 "--model-dir", str(model_dir)]) == 0
    assert "verdict: Match" in capsys.readouterr().out

    target = model_dir / "tokenizer.json"
    raw = bytearray(target.read_bytes())
    raw[-2] ^= 0xFF
    target.write_bytes(bytes(raw))
    assert main(["verify", "--manifest", str(manifest),
                 "--model-dir", str(model_dir)]) == 1
    out = capsys.readouterr().out
    assert "verdict: Mismatch" in out and "tokenizer.json" in out


def test_cli_fixtures_make_all_cases(tmp_path, capsys):
    for case in FIXTURE_CASES:
        code = main(["fixtures", "make", case, "--out", str(tmp_path / case)])
        assert code == 0
        assert (tmp_path / case / "model").is_dir()


# ------------------------------------------------------------- JSONL contracts


def _validate_lines(path, schema):
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            jsonschema.validate(json.loads(line), schema)


def test_committed_probe_logs_validate_against_schemas():
    schemas = {
        "scores.jsonl": "score_record.schema.json",
        "edd.jsonl": "edd_record.schema.json",
        "backdoor.jsonl": "backdoor_record.schema.json",
    }
    for log_name, schema_name in schemas.items():
        schema = json.loads((SCHEMA_DIR / schema_name).read_text(encoding="utf-8"))
        _validate_lines(COMMITTED_LOGS / log_name, schema)
    sidecar_schema = json.loads(
        (SCHEMA_DIR / "probe_sidecar.schema.json").read_text(encoding="utf-8")
    )
    for sidecar in COMMITTED_LOGS.glob("*.sidecar.json"):
        jsonschema.validate(
            json.loads(sidecar.read_text(encoding="utf-8")), sidecar_schema
        )


def test_generated_probe_logs_match_committed(tmp_path):
    generated = write_probe_logs(tmp_path / "logs")
    for path in generated:
        committed = COMMITTED_LOGS / path.name
        assert path.read_bytes() == committed.read_bytes()
