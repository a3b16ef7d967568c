"""Command line entry points: scan, verify, fixtures.

Exit codes: 0 clean, 2 warnings only, 1 must-failures or blocked/failed
guard outcomes or critical findings, 3 internal errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .fixtures import FIXTURE_CASES, UnknownFixture, make_fixture
from .integrity import IntegrityError, load_manifest, verify_manifest
from .scan import (
    EXIT_INTERNAL_ERROR,
    EXIT_OK,
    EXIT_POLICY_FAILURE,
    ConfigError,
    ScanRequest,
    render_report,
    run_scan,
    write_outputs,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="airscan",
        description="Static and log-driven scanner producing verifiable "
        "evidence artifacts for model directories.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scan_p = sub.add_parser("scan", help="scan a model directory")
    scan_p.add_argument("--model-dir", required=True, type=Path)
    scan_p.add_argument("--policy", type=Path, default=None,
                        help="policy JSON; defaults to the built-in policy")
    scan_p.add_argument("--baseline", type=Path, default=None,
                        help="earlier evidence artifact for drift reporting")
    scan_p.add_argument("--probe-log", action="append", type=Path, default=[],
                        help="probe log (JSONL) or sidecar (JSON); repeatable")
    scan_p.add_argument("--out", type=Path, default=Path("."),
                        help="output directory for artifact/manifest/exports")
    scan_p.add_argument("--reproducible", action="store_true",
                        help="pin the timestamp and zero timings for "
                        "byte-identical reruns")
    scan_p.add_argument("--export", default="",
                        help="comma-separated export targets: spdx,cdx")
    scan_p.add_argument("--format", choices=("json", "text"), default="text",
                        help="report rendering on stdout")

    verify_p = sub.add_parser("verify", help="verify files against a manifest")
    verify_p.add_argument("--manifest", required=True, type=Path)
    verify_p.add_argument("--model-dir", required=True, type=Path)

    fix_p = sub.add_parser("fixtures", help="generate test-bed model dirs")
    fix_sub = fix_p.add_subparsers(dest="fixtures_command", required=True)
    make_p = fix_sub.add_parser("make", help="write one fixture case")
    make_p.add_argument("case", choices=FIXTURE_CASES)
    make_p.add_argument("--out", type=Path, default=Path("."),
                        help="directory to create the fixture under")
    return parser


def _cmd_scan(args: argparse.Namespace) -> int:
    targets = frozenset(t.strip() for t in args.export.split(",") if t.strip())
    request = ScanRequest(
        model_dir=args.model_dir,
        policy_path=args.policy,
        baseline_artifact=args.baseline,
        probe_logs=tuple(args.probe_log),
        output_dir=args.out,
        reproducible=args.reproducible,
        export_targets=targets,
    )
    report = run_scan(request)
    written = write_outputs(report, request)
    sys.stdout.buffer.write(render_report(report, args.format))
    sys.stdout.buffer.write(b"\n")
    if "export_error" in written:
        print(f"export skipped: {written['export_error']}", file=sys.stderr)
    return report.exit_code


def _cmd_verify(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    report = verify_manifest(args.model_dir, manifest)
    print(f"verdict: {report.verdict}")
    print(f"matched: {len(report.matched)}")
    for item in report.mismatched:
        print(f"mismatched: {item['path']}")
    for rel in report.missing:
        print(f"missing: {rel}")
    for rel in report.extra:
        print(f"extra: {rel}")
    return EXIT_OK if report.verdict == "Match" else EXIT_POLICY_FAILURE


def _cmd_fixtures(args: argparse.Namespace) -> int:
    model_dir = make_fixture(args.case, args.out)
    print(f"fixture {args.case} written; model dir: {model_dir}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "scan":
            return _cmd_scan(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_fixtures(args)
    except (ConfigError, UnknownFixture, IntegrityError, OSError) as exc:
        print(f"airscan error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
