"""Deterministic test-bed model directories for scanner exercises.

Three cases: a clean directory that should pass every check, a red-team
directory holding an intact shard, a byte-flipped mutant, and an unsafe
pickle container, and a warning-path directory whose evaluation disclosure
file is unparseable.  Every byte written here is reproducible: fixed RNG
seed for tensor data, fixed zip timestamps, sorted JSON keys.

The unsafe pickle references os.system but is never executed by anything
in this package; the scanner only disassembles it.
"""

from __future__ import annotations

import json
import struct
import zipfile
from pathlib import Path

import numpy as np

from .integrity import build_manifest, save_manifest

FIXTURE_CASES = ("clean", "guard-table", "warn-should")

_SEED = 0
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


class UnknownFixture(Exception):
    pass


def _write_json(path: Path, doc: object) -> None:
    path.write_text(
        json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def _write_jsonl(path: Path, docs: list[dict]) -> None:
    lines = [json.dumps(d, sort_keys=True, ensure_ascii=False) for d in docs]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_safetensors_file(path: Path, tensors: dict[str, np.ndarray]) -> None:
    """Minimal single-file safetensors writer, name-sorted layout."""
    header: dict[str, dict] = {}
    blobs: list[bytes] = []
    offset = 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        raw = arr.tobytes()
        header[name] = {
            "dtype": "F32",
            "shape": list(arr.shape),
            "data_offsets": [offset, offset + len(raw)],
        }
        blobs.append(raw)
        offset += len(raw)
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for raw in blobs:
            fh.write(raw)


def tiny_model_tensors(seed: int = _SEED) -> dict[str, np.ndarray]:
    """Two-layer toy decoder consistent with tiny_model_config()."""
    rng = np.random.default_rng(seed)
    hidden, inter, vocab = 8, 16, 32
    tensors: dict[str, np.ndarray] = {
        "model.embed_tokens.weight": rng.standard_normal((vocab, hidden)),
        "model.norm.weight": rng.standard_normal(hidden),
        "lm_head.weight": rng.standard_normal((vocab, hidden)),
    }
    for layer in range(2):
        p = f"model.layers.{layer}"
        tensors[f"{p}.input_layernorm.weight"] = rng.standard_normal(hidden)
        tensors[f"{p}.post_attention_layernorm.weight"] = rng.standard_normal(hidden)
        tensors[f"{p}.mlp.up_proj.weight"] = rng.standard_normal((inter, hidden))
        tensors[f"{p}.mlp.gate_proj.weight"] = rng.standard_normal((inter, hidden))
        tensors[f"{p}.mlp.down_proj.weight"] = rng.standard_normal((hidden, inter))
        for proj in ("q_proj", "k_proj", "v_proj", "o_proj"):
            tensors[f"{p}.self_attn.{proj}.weight"] = rng.standard_normal((hidden, hidden))
    return tensors


def tiny_model_config() -> dict:
    return {
        "_name_or_path": "airs-fixtures/tiny-clean",
        "model_type": "tinytest",
        "hidden_size": 8,
        "intermediate_size": 16,
        "num_hidden_layers": 2,
        "vocab_size": 32,
        "license": "Apache-2.0",
    }


def unsafe_pickle_zip_bytes() -> bytes:
    """Zip container whose archive/data.pkl imports and calls os.system.

    Hand-assembled protocol-2 stream; inert unless something unpickles it,
    which this package never does.
    """
    payload = b"echo airs-fixture"
    stream = (
        b"\x80\x02"                             # PROTO 2
        + b"cos\nsystem\n"                       # GLOBAL os.system
        + b"X" + struct.pack("<I", len(payload)) + payload  # BINUNICODE arg
        + b"\x85"                                # TUPLE1
        + b"R"                                   # REDUCE
        + b"."                                   # STOP
    )
    import io

    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", compression=zipfile.ZIP_STORED) as zf:
        info = zipfile.ZipInfo("archive/data.pkl", date_time=_ZIP_EPOCH)
        zf.writestr(info, stream)
    return buffer.getvalue()


def _write_identity_files(model_dir: Path) -> None:
    (model_dir / "LICENSE.txt").write_text("Apache-2.0\n", encoding="utf-8")
    _write_json(
        model_dir / "release.json",
        {
            "model_name": "tiny-clean",
            "model_id": "airs-fixtures/tiny-clean",
            "version_or_commit": "1.0.0",
            "license": "Apache-2.0",
            "publisher": "airs-fixtures",
        },
    )


def _write_eval_summary(model_dir: Path) -> None:
    _write_json(
        model_dir / "eval_summary.json",
        {
            "benchmark_summary": "toy sanity benchmarks only",
            "eval_datasets": ["toy-arith", "toy-copy"],
            "metrics": {"toy-arith": 0.75, "toy-copy": 0.9},
            "eval_params": {"n_items": 40, "temperature": 0.0},
            "training_data_cutoff": "2024-01",
        },
    )


def _write_tokenizer(model_dir: Path) -> None:
    vocab = {f"tok{i}": i for i in range(32)}
    _write_json(model_dir / "tokenizer.json", {"version": "1.0", "model": {"vocab": vocab}})


def _score_log_docs() -> list[dict]:
    import random

    rng = random.Random(7)
    docs = []
    for i in range(10):
        docs.append(
            {
                "item_id": f"tp-{i:02d}",
                "label": "TP",
                "score": round(1.0 + rng.gauss(0, 0.4), 6),
                "group": "member",
            }
        )
    for i in range(10):
        docs.append(
            {
                "item_id": f"tn-{i:02d}",
                "label": "TN",
                "score": round(-1.0 + rng.gauss(0, 0.4), 6),
                "group": "nonmember",
            }
        )
    return docs


def _edd_log_docs() -> list[dict]:
    baseline = "the quick brown fox jumps over the lazy dog"
    return [
        {"item_id": "c-0", "group": "contaminated", "baseline": baseline,
         "samples": [baseline, baseline.replace("fox", "fix")]},
        {"item_id": "c-1", "group": "contaminated", "baseline": baseline,
         "samples": [baseline.replace("lazy", "hazy"), baseline]},
        {"item_id": "k-0", "group": "clean", "baseline": baseline,
         "samples": ["completely unrelated reply text", "another unrelated answer"]},
        {"item_id": "k-1", "group": "clean", "baseline": baseline,
         "samples": ["nothing like the source", "different words entirely here"]},
    ]


def _backdoor_log_docs() -> list[dict]:
    docs = []
    for i in range(8):
        docs.append(
            {"prompt_id": f"trig-{i}", "trigger_present": True, "attack_success": i < 3}
        )
    for i in range(8):
        docs.append(
            {"prompt_id": f"ctrl-{i}", "trigger_present": False, "attack_success": False}
        )
    return docs


def _sidecar(method: str, params: dict) -> dict:
    return {"method": method, "params": params, "seed": 7,
            "model_id": "airs-fixtures/tiny-clean"}


def write_probe_logs(log_dir: Path) -> list[Path]:
    log_dir.mkdir(parents=True, exist_ok=True)
    _write_jsonl(log_dir / "scores.jsonl", _score_log_docs())
    _write_json(log_dir / "scores.sidecar.json",
                _sidecar("next-token-logprob", {"position_fraction": 0.5}))
    _write_jsonl(log_dir / "edd.jsonl", _edd_log_docs())
    _write_json(log_dir / "edd.sidecar.json",
                _sidecar("edit-distance-drift", {"n_samples": 2, "temperature": 0.8}))
    _write_jsonl(log_dir / "backdoor.jsonl", _backdoor_log_docs())
    _write_json(log_dir / "backdoor.sidecar.json",
                _sidecar("trigger-sweep", {"n_triggers": 8}))
    return sorted(log_dir.glob("*.jsonl"))


def _finish_with_manifest(model_dir: Path) -> None:
    manifest = build_manifest(model_dir)
    save_manifest(manifest, model_dir / "release.manifest.json")


def _make_clean(dest: Path) -> Path:
    model_dir = dest / "model"
    model_dir.mkdir(parents=True, exist_ok=True)
    _write_json(model_dir / "config.json", tiny_model_config())
    write_safetensors_file(model_dir / "model.safetensors", tiny_model_tensors())
    _write_tokenizer(model_dir)
    _write_identity_files(model_dir)
    _write_eval_summary(model_dir)
    _finish_with_manifest(model_dir)
    write_probe_logs(dest / "probe-logs")
    return model_dir


def _make_guard_table(dest: Path) -> Path:
    model_dir = dest / "model"
    model_dir.mkdir(parents=True, exist_ok=True)
    _write_json(model_dir / "config.json", tiny_model_config())
    tensors = tiny_model_tensors()
    half = len(tensors) // 2
    names = sorted(tensors)
    write_safetensors_file(
        model_dir / "model-00001-of-00002.safetensors",
        {n: tensors[n] for n in names[:half]},
    )
    write_safetensors_file(
        model_dir / "model_mutant.safetensors",
        {n: tensors[n] for n in names[half:]},
    )
    (model_dir / "unsafe.pt").write_bytes(unsafe_pickle_zip_bytes())
    _write_tokenizer(model_dir)
    _write_identity_files(model_dir)
    _finish_with_manifest(model_dir)
    # flip one tensor-data byte after the reference manifest is frozen
    mutant = model_dir / "model_mutant.safetensors"
    raw = bytearray(mutant.read_bytes())
    raw[-1] ^= 0xFF
    mutant.write_bytes(bytes(raw))
    return model_dir


def _make_warn_should(dest: Path) -> Path:
    model_dir = dest / "model"
    model_dir.mkdir(parents=True, exist_ok=True)
    _write_json(model_dir / "config.json", tiny_model_config())
    write_safetensors_file(model_dir / "model.safetensors", tiny_model_tensors())
    _write_tokenizer(model_dir)
    _write_identity_files(model_dir)
    (model_dir / "eval_summary.json").write_text("{not json", encoding="utf-8")
    _finish_with_manifest(model_dir)
    return model_dir


def make_fixture(case: str, dest: Path) -> Path:
    """Build the named fixture under dest; returns the model directory."""
    dest = Path(dest)
    if case == "clean":
        return _make_clean(dest)
    if case == "guard-table":
        return _make_guard_table(dest)
    if case == "warn-should":
        return _make_warn_should(dest)
    raise UnknownFixture(f"unknown fixture case {case!r}; known: {FIXTURE_CASES}")
