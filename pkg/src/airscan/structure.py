"""Structural weight analysis: shapes, per-tensor checksums and statistics,
adapter inventory.

Tensor bytes are streamed in bounded chunks; statistics use Chan's parallel
combine of (count, mean, M2) so the single pass stays numerically stable on
arbitrarily long tensors.  BF16/F16 are widened losslessly before math.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Iterator, Optional

import numpy as np

from .canonical import canonical_sha256
from .findings import Finding, Severity
from .integrity import IoError, hash_file
from .packaging.safetensors import SafetensorsHeader, TensorSlot

CHUNK_BYTES = 1 << 20
DEFAULT_Z_THRESHOLD = 6.0
DEFAULT_SAMPLE_BUDGET = 1 << 22
SEED_ENV_VAR = "AIRSCAN_SEED"

STATS_DTYPES = ("F32", "F16", "BF16")


class DtypeUnsupported(Exception):
    def __init__(self, dtype: str):
        self.dtype = dtype
        super().__init__(f"no statistics decoder for dtype {dtype!r}")


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV_VAR, "")
    try:
        return int(raw)
    except ValueError:
        return 0


def decode_values(dtype: str, raw: bytes) -> np.ndarray:
    if dtype == "F32":
        return np.frombuffer(raw, dtype="<f4").astype(np.float64)
    if dtype == "F16":
        return np.frombuffer(raw, dtype="<f2").astype(np.float64)
    if dtype == "BF16":
        bits = np.frombuffer(raw, dtype="<u2").astype(np.uint32) << 16
        return bits.view(np.float32).astype(np.float64)
    raise DtypeUnsupported(dtype)


@dataclass(frozen=True)
class TensorStats:
    name: str
    dtype: str
    count: int
    mean: Optional[float]
    variance: Optional[float]
    nan_count: int
    inf_count: int
    min: Optional[float]
    max: Optional[float]
    outlier_count: int
    z_threshold: float
    flags: tuple[str, ...] = ()
    sampled: bool = False

    def __post_init__(self) -> None:
        if self.nan_count + self.inf_count > self.count:
            raise ValueError(f"{self.name}: non-finite counts exceed element count")
        if self.variance is not None and self.variance < 0:
            raise ValueError(f"{self.name}: negative variance")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "dtype": self.dtype,
            "count": self.count,
            "mean": self.mean,
            "variance": self.variance,
            "nan_count": self.nan_count,
            "inf_count": self.inf_count,
            "min": self.min,
            "max": self.max,
            "outlier_count": self.outlier_count,
            "z_threshold": self.z_threshold,
            "flags": list(self.flags),
            "sampled": self.sampled,
        }


class AdapterKind(str, Enum):
    LORA = "LoRA"
    PEFT_OTHER = "PEFTOther"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class AdapterRecord:
    adapter_path: str
    kind: AdapterKind
    target_modules: tuple[str, ...]
    config_digest: str
    weights_digest: Optional[str]

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "adapter_path": self.adapter_path,
            "kind": self.kind.value,
            "target_modules": list(self.target_modules),
            "config_digest": self.config_digest,
            "weights_digest": self.weights_digest,
        }


@dataclass(frozen=True)
class ShapeCheck:
    config_key: str
    expected: int
    tensor_name: str
    observed: int
    ok: bool

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "config_key": self.config_key,
            "expected": self.expected,
            "tensor_name": self.tensor_name,
            "observed": self.observed,
            "ok": self.ok,
        }


@dataclass(frozen=True)
class ShapeReport:
    checks: tuple[ShapeCheck, ...]
    unchecked_keys: tuple[str, ...] = ()

    @property
    def verdict(self) -> str:
        if not self.checks:
            return "Unchecked"
        return "Consistent" if all(c.ok for c in self.checks) else "Inconsistent"

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "checks": [c.to_json_dict() for c in self.checks],
            "unchecked_keys": list(self.unchecked_keys),
            "verdict": self.verdict,
        }


def load_shape_patterns() -> dict[str, Any]:
    text = resources.files("airscan").joinpath("data/shape_patterns.json").read_text("utf-8")
    return json.loads(text)


def shape_consistency(
    config: dict[str, Any],
    headers: dict[str, SafetensorsHeader],
    patterns: Optional[dict[str, Any]] = None,
) -> ShapeReport:
    if patterns is None:
        patterns = load_shape_patterns()
    all_tensors: dict[str, TensorSlot] = {}
    for header in headers.values():
        all_tensors.update(header.tensors)

    checks: list[ShapeCheck] = []
    unchecked: list[str] = []

    for rule in patterns["dim_checks"]:
        key = next((k for k in rule["config_keys"] if k in config), None)
        if key is None:
            continue
        expected = config[key]
        if not isinstance(expected, int):
            continue
        regex = re.compile(rule["pattern"])
        dim = rule["dim"]
        matched = False
        for name in sorted(all_tensors):
            if not regex.search(name):
                continue
            shape = all_tensors[name].shape
            if not shape or dim >= len(shape) or dim < -len(shape):
                continue
            matched = True
            observed = shape[dim]
            checks.append(ShapeCheck(key, expected, name, observed, observed == expected))
        if not matched:
            unchecked.append(key)

    layer_key = next((k for k in patterns["layer_count_keys"] if k in config), None)
    if layer_key is not None and isinstance(config[layer_key], int):
        indices: list[int] = []
        layer_res = [re.compile(p) for p in patterns["layer_index_patterns"]]
        for name in all_tensors:
            for rex in layer_res:
                m = rex.search(name)
                if m:
                    indices.append(int(m.groups()[-1]))
        if indices:
            observed = max(indices) + 1
            checks.append(
                ShapeCheck(
                    layer_key, config[layer_key], "(layer index scan)", observed,
                    observed == config[layer_key],
                )
            )
        else:
            unchecked.append(layer_key)

    return ShapeReport(tuple(checks), tuple(dict.fromkeys(unchecked)))


def _iter_region(path: Path, begin: int, end: int, chunk: int = CHUNK_BYTES) -> Iterator[bytes]:
    try:
        with open(path, "rb") as fh:
            fh.seek(begin)
            remaining = end - begin
            while remaining > 0:
                data = fh.read(min(chunk, remaining))
                if not data:
                    raise IoError(str(path), "tensor region truncated")
                remaining -= len(data)
                yield data
    except OSError as exc:
        raise IoError(str(path), str(exc)) from exc


def tensor_checksums(path: Path, header: SafetensorsHeader) -> dict[str, str]:
    data_start = 8 + header.header_len
    out: dict[str, str] = {}
    for name in sorted(header.tensors):
        begin, end = header.tensors[name].data_offsets
        h = hashlib.sha256()
        for chunk in _iter_region(path, data_start + begin, data_start + end):
            h.update(chunk)
        out[name] = h.hexdigest()
    return out


def _combine(n_a: int, mean_a: float, m2_a: float, values: np.ndarray) -> tuple[int, float, float]:
    n_b = values.size
    if n_b == 0:
        return n_a, mean_a, m2_a
    mean_b = float(values.mean())
    m2_b = float(((values - mean_b) ** 2).sum())
    if n_a == 0:
        return n_b, mean_b, m2_b
    n = n_a + n_b
    delta = mean_b - mean_a
    mean = mean_a + delta * n_b / n
    m2 = m2_a + m2_b + delta * delta * n_a * n_b / n
    return n, mean, m2


def _stats_for_slot(
    path: Path,
    name: str,
    slot: TensorSlot,
    data_start: int,
    z_threshold: float,
    sample_budget: int,
    seed: int,
) -> TensorStats:
    width = {"F32": 4, "F16": 2, "BF16": 2}[slot.dtype]
    begin, end = slot.data_offsets
    count = (end - begin) // width

    if count == 0:
        return TensorStats(
            name, slot.dtype, 0, None, None, 0, 0, None, None, 0, z_threshold, ("empty",)
        )

    n_finite = 0
    mean = 0.0
    m2 = 0.0
    nan_count = 0
    inf_count = 0
    vmin = np.inf
    vmax = -np.inf
    for raw in _iter_region(path, data_start + begin, data_start + end):
        values = decode_values(slot.dtype, raw)
        nan_count += int(np.isnan(values).sum())
        inf_count += int(np.isinf(values).sum())
        finite = values[np.isfinite(values)]
        if finite.size:
            vmin = min(vmin, float(finite.min()))
            vmax = max(vmax, float(finite.max()))
        n_finite, mean, m2 = _combine(n_finite, mean, m2, finite)

    flags: list[str] = []
    if nan_count + inf_count:
        flags.append("non_finite_values")
    if n_finite == 0:
        flags.append("no_finite_values")
        return TensorStats(
            name, slot.dtype, count, None, None, nan_count, inf_count,
            None, None, 0, z_threshold, tuple(flags),
        )

    variance = max(m2 / n_finite, 0.0)
    sigma = variance ** 0.5

    outlier_count = 0
    sampled = False
    if sigma > 0:
        if count <= sample_budget:
            lo, hi = mean - z_threshold * sigma, mean + z_threshold * sigma
            for raw in _iter_region(path, data_start + begin, data_start + end):
                values = decode_values(slot.dtype, raw)
                finite = values[np.isfinite(values)]
                outlier_count += int(((finite < lo) | (finite > hi)).sum())
        else:
            sampled = True
            rng = np.random.default_rng(seed)
            picks = np.sort(rng.choice(count, size=sample_budget, replace=False))
            lo, hi = mean - z_threshold * sigma, mean + z_threshold * sigma
            cursor = 0
            for raw in _iter_region(path, data_start + begin, data_start + end):
                values = decode_values(slot.dtype, raw)
                start_i = np.searchsorted(picks, cursor)
                end_i = np.searchsorted(picks, cursor + values.size)
                local = picks[start_i:end_i] - cursor
                chunk_vals = values[local]
                finite = chunk_vals[np.isfinite(chunk_vals)]
                outlier_count += int(((finite < lo) | (finite > hi)).sum())
                cursor += values.size

    return TensorStats(
        name, slot.dtype, count, mean, variance, nan_count, inf_count,
        vmin, vmax, outlier_count, z_threshold, tuple(flags), sampled,
    )


def tensor_stats(
    path: Path,
    header: SafetensorsHeader,
    z_threshold: float = DEFAULT_Z_THRESHOLD,
    sample_budget: int = DEFAULT_SAMPLE_BUDGET,
    seed: Optional[int] = None,
) -> list[TensorStats]:
    if seed is None:
        seed = default_seed()
    data_start = 8 + header.header_len
    out: list[TensorStats] = []
    for name in sorted(header.tensors):
        slot = header.tensors[name]
        if slot.dtype not in STATS_DTYPES:
            begin, end = slot.data_offsets
            out.append(
                TensorStats(
                    name, slot.dtype, 0, None, None, 0, 0, None, None, 0,
                    z_threshold, ("dtype_unsupported",),
                )
            )
            continue
        out.append(
            _stats_for_slot(path, name, slot, data_start, z_threshold, sample_budget, seed)
        )
    return out


def dtype_mix(headers: dict[str, SafetensorsHeader]) -> dict[str, int]:
    mix: dict[str, int] = {}
    for header in headers.values():
        for slot in header.tensors.values():
            mix[slot.dtype] = mix.get(slot.dtype, 0) + 1
    return dict(sorted(mix.items()))


_ADAPTER_WEIGHT_NAMES = ("adapter_model.safetensors", "adapter_model.bin")


def adapter_inventory(
    root: Path, declared: Optional[list[str]] = None
) -> tuple[list[AdapterRecord], list[Finding]]:
    root = Path(root)
    records: list[AdapterRecord] = []
    findings: list[Finding] = []
    declared_set = set(declared or [])

    for config_path in sorted(root.rglob("adapter_config.json")):
        rel_dir = config_path.parent.relative_to(root).as_posix()
        try:
            config = json.loads(config_path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoError(str(config_path), str(exc)) from exc
        except json.JSONDecodeError:
            findings.append(
                Finding(
                    id="adapter-config-unparseable",
                    severity=Severity.WARN,
                    path=config_path.relative_to(root).as_posix(),
                    reason="adapter config is not valid JSON",
                )
            )
            continue
        if not isinstance(config, dict):
            config = {}

        peft_type = str(config.get("peft_type", "")).upper()
        has_rank = any(k in config for k in ("r", "rank", "lora_rank"))
        if (peft_type == "LORA" or "lora_alpha" in config) and has_rank:
            kind = AdapterKind.LORA
        elif peft_type:
            kind = AdapterKind.PEFT_OTHER
        else:
            kind = AdapterKind.UNKNOWN

        targets = config.get("target_modules") or []
        if not isinstance(targets, list):
            targets = []

        weights_digest: Optional[str] = None
        for weight_name in _ADAPTER_WEIGHT_NAMES:
            candidate = config_path.parent / weight_name
            if candidate.is_file():
                weights_digest = hash_file(candidate)
                break

        records.append(
            AdapterRecord(
                adapter_path=rel_dir,
                kind=kind,
                target_modules=tuple(str(t) for t in targets),
                config_digest=canonical_sha256(config),
                weights_digest=weights_digest,
            )
        )
        if rel_dir not in declared_set:
            findings.append(
                Finding(
                    id="adapter-undeclared",
                    severity=Severity.WARN,
                    path=rel_dir,
                    reason="adapter present on disk but not in the declared-adapters list",
                    threat_ref="3.4",
                    evidence={"declared": sorted(declared_set)},
                )
            )
    return records, findings
