"""
Structural checks over declared tensors
=======================================

Compare safetensors tensor shapes against the sizes a config implies,
checksum tensor payloads, and summarize per-tensor statistics without
loading a framework.
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from airscan.fixtures import make_fixture
from airscan.packaging import parse_safetensors_header
from airscan.structure import shape_consistency, tensor_checksums, tensor_stats

work = Path(tempfile.mkdtemp(prefix="airscan-demo-"))
model = make_fixture("clean", work)
config = json.loads((model / "config.json").read_text(encoding="utf-8"))
shard = model / "model.safetensors"
header, _ = parse_safetensors_header(shard)

# The config declares hidden_size etc.; well-known tensor name patterns
# imply expected dimensions which the header either satisfies or not.
report = shape_consistency(config, {"model.safetensors": header})
print(f"shape verdict: {report.verdict} ({len(report.checks)} checks)")
for check in report.checks[:5]:
    print(f"  {check.tensor_name}[{check.config_key}] expected {check.expected} observed {check.observed} ok={check.ok}")

# Checksums stream tensor bytes straight from the file region.
checksums = tensor_checksums(shard, header)
print(f"\nchecksummed {len(checksums)} tensors")
first = sorted(checksums)[0]
print(f"  {first}: {checksums[first][:32]}...")

# Stats flag non-finite values and gross outliers per tensor.
stats = tensor_stats(shard, header)
worst = max(stats, key=lambda s: (s.max if s.max is not None else 0.0))
print(f"\nlargest value: {worst.name} max={worst.max:.4f}")
print(f"tensors with NaN or Inf: {sum(1 for s in stats if s.nan_count + s.inf_count)}")

# A config that disagrees with the shipped tensors turns the verdict.
config["hidden_size"] = 12
report = shape_consistency(config, {"model.safetensors": header})
print(f"\nafter declaring hidden_size=12: {report.verdict}")
bad = [c for c in report.checks if not c.ok]
print(f"failing checks: {len(bad)}, e.g. {bad[0].tensor_name} expected {bad[0].expected}")
