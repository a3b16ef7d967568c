"""
Exporting evidence to SPDX and CycloneDX
========================================

Run a full scan, export the artifact to both standards, show which
fields land natively versus as namespaced extensions, and recover every
Present field back from the exports.
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from airscan.export import (
    CROSSWALK,
    collect_fields_cdx,
    collect_fields_spdx,
    export_bundle,
)
from airscan.fixtures import make_fixture, write_probe_logs
from airscan.scan import ScanRequest, run_scan, write_outputs

work = Path(tempfile.mkdtemp(prefix="airscan-demo-"))
model = make_fixture("clean", work)
logs = write_probe_logs(work / "logs")

request = ScanRequest(
    model_dir=model,
    probe_logs=tuple(p for p in logs if p.suffix == ".jsonl"),
    output_dir=work / "out",
    reproducible=True,
    export_targets=frozenset({"spdx", "cdx"}),
)
report = run_scan(request)
written = write_outputs(report, request)
print(f"scan exit code: {report.exit_code}")
for name in ("artifact", "spdx", "cdx"):
    print(f"  {name}: {written[name].name}")

# The crosswalk says where each field can live.  Most need namespaced
# extensions; identity fields map to native SBOM slots.
native_spdx = sum(1 for row in CROSSWALK if row.spdx_covered)
native_cdx = sum(1 for row in CROSSWALK if row.cdx_covered)
print(f"\ncrosswalk: {len(CROSSWALK)} rows, {native_spdx} SPDX-native, {native_cdx} CDX-native")
coverage = written["coverage"]
print(f"this artifact: mapped_spdx={coverage['mapped_spdx']} mapped_cdx={coverage['mapped_cdx']}")
print(f"fields only expressible as extensions: {coverage['annotated_unique']}")

spdx = json.loads(written["spdx"].read_text(encoding="utf-8"))
package = spdx["packages"][0]
print(f"\nSPDX package: name={package['name']!r} version={package['versionInfo']!r}")
print(f"native field slots used: {spdx['airs_native_fields']}")
print(f"annotations carried: {len(spdx.get('annotations', []))}")

cdx = json.loads(written["cdx"].read_text(encoding="utf-8"))
component = cdx["components"][0]
print(f"\nCDX component: type={component['type']!r} bom-ref={component['bom-ref']!r}")
print(f"hashes: {len(component.get('hashes', []))} subcomponents: {len(component.get('components', []))}")

# Both exports parse back; the union recovers the artifact's content.
recovered = collect_fields_spdx(spdx)
recovered.update(collect_fields_cdx(cdx))
present_keys = {
    rec.key for rec in report.artifact.fields if rec.status.value == "Present"
}
print(f"\nPresent fields: {len(present_keys)}, recovered: {len(present_keys & set(recovered))}")

bundle = export_bundle(report.artifact)
digest = bundle.spdx_doc["airs_source_digest"]
print(f"exports carry the source digest: {digest == report.artifact.canonical_digest}")
