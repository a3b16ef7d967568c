"""
Hash manifests, Merkle roots, and tamper detection
==================================================

Build a hash manifest over a model directory, derive its Merkle root,
then flip a single byte and watch both detect it.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from airscan.integrity import (
    build_manifest,
    load_manifest,
    merkle_root,
    save_manifest,
    verify_manifest,
)

work = Path(tempfile.mkdtemp(prefix="airscan-demo-"))
model = work / "model"
model.mkdir()

(model / "config.json").write_text('{"hidden_size": 64}\n', encoding="utf-8")
(model / "weights.bin").write_bytes(bytes(range(256)) * 64)
(model / "tokenizer.json").write_text('{"version": "1.0"}\n', encoding="utf-8")

# A manifest is a sorted list of (path, size, sha256) rows.
manifest = build_manifest(model)
for entry in manifest.entries:
    print(f"{entry.sha256[:16]}  {entry.size_bytes:6d}  {entry.relative_path}")

root = merkle_root(manifest)
print(f"\nmerkle root ({root.construction_id}): {root.root[:32]}...")

# Manifest rows round-trip through JSON without loss.
manifest_path = work / "model.manifest.json"
save_manifest(manifest, manifest_path)
assert load_manifest(manifest_path).entries == manifest.entries

report = verify_manifest(model, manifest)
print(f"pristine verify: {report.verdict} ({len(report.matched)} matched)")

# One flipped byte in 16 KiB of weights changes the file hash, the
# verify verdict, and the Merkle root.
weights = model / "weights.bin"
raw = bytearray(weights.read_bytes())
raw[5000] ^= 0x01
weights.write_bytes(bytes(raw))

report = verify_manifest(model, manifest)
print(f"\nafter one-byte flip: {report.verdict}")
for row in report.mismatched:
    print(f"  {row['path']}: expected {row['expected'][:12]}... actual {row['actual'][:12]}...")

new_root = merkle_root(build_manifest(model))
print(f"root changed: {new_root.root != root.root}")

# Deleting and adding files shows up as missing/extra rather than a
# mismatch.
weights.unlink()
(model / "surprise.txt").write_text("not in the manifest\n", encoding="utf-8")
report = verify_manifest(model, manifest)
print(f"\nafter delete+add: missing={report.missing} extra={report.extra}")
