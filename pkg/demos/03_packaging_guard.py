"""
Serializer scanning and the loader guard
========================================

Scan weights files without loading them: parse the safetensors header,
walk pickle opcodes statically, then let the loader guard combine scan
findings with manifest hashes into a Pass / Fail / Blocked outcome per
artifact.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from airscan.fixtures import make_fixture
from airscan.integrity import load_manifest
from airscan.packaging import (
    default_policy,
    enforce_loader_policy,
    inventory_files,
    parse_safetensors_header,
    scan_pickle_container,
)

work = Path(tempfile.mkdtemp(prefix="airscan-demo-"))

# The guard-table fixture ships a clean sharded safetensors file, a
# byte-flipped mutant of it, and a ZIP pickle whose payload imports
# os.system.  The manifest was frozen before the mutation.
model = make_fixture("guard-table", work)
for path in sorted(model.iterdir()):
    print(f"  {path.name}")

# Static scan of the clean shard: header parses, no findings.
clean = model / "model-00001-of-00002.safetensors"
header, findings = parse_safetensors_header(clean)
print(f"\n{clean.name}: {len(header.tensors)} tensors, {len(findings)} findings")

# Static scan of the pickle: GLOBAL and REDUCE opcodes are flagged
# without ever executing the payload.
for finding in scan_pickle_container(model / "unsafe.pt"):
    print(f"  [{finding.severity.value}] {finding.id}: {finding.reason}")

# The guard folds hashes, policy, and scan findings into one outcome
# per weights artifact.
policy = default_policy()
manifest = load_manifest(model / "release.manifest.json")
inventory, _ = inventory_files(model, policy)

results = enforce_loader_policy(model, policy, manifest=manifest, inventory=inventory)
print()
width = max(len(r.artifact_path) for r in results)
for r in results:
    print(f"  {r.artifact_path.ljust(width)}  {r.serialization:12}  {r.display}")
