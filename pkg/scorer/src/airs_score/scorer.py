"""Next-token log-probability scoring and divergence sampling.

Runs a locally loadable causal LM on CPU and writes the two JSONL
probe-log formats the scanner ingests: score records carrying the
log-probability of the actual next token at a fixed interior position,
and divergence records carrying one greedy baseline plus n stochastic
generations per prompt.  Distances between baseline and samples are
deliberately not computed here; the consumer owns the metric.

Determinism contract: same config, same items, CPU execution -> byte
identical output files.  The sampling path reseeds torch from the
configured seed once per call, so record order is part of the contract.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional

DEFAULT_MAX_NEW_TOKENS = 24

SCORE_METHOD = "next_token_logprob"
EDD_METHOD = "edd_sampling"

_VALID_LABELS = ("TP", "TN")
_VALID_GROUPS = ("contaminated", "clean")


class ScorerError(Exception):
    """Base error for this package."""


class ModelLoadError(ScorerError):
    def __init__(self, model_ref: str, detail: str):
        self.model_ref = model_ref
        super().__init__(f"cannot load model {model_ref!r}: {detail}")


class TokenizationError(ScorerError):
    def __init__(self, item_id: str, detail: str = "item tokenizes to fewer than 2 tokens"):
        self.item_id = item_id
        super().__init__(f"{item_id}: {detail}")


class InputFormatError(ScorerError):
    def __init__(self, path: str, line_no: int, detail: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {detail}")


@dataclass(frozen=True)
class ScorerConfig:
    model_ref: str
    position_fraction: float = 0.5
    temperature_baseline: float = 0.0
    temperature_sampling: float = 0.8
    n_samples: int = 4
    seed: int = 0
    max_items: int = 10_000

    def __post_init__(self) -> None:
        if not (0.0 < self.position_fraction < 1.0):
            raise ValueError("position_fraction must lie strictly inside (0, 1)")
        # the baseline is greedy by definition; any other value would
        # silently change what "baseline" means downstream
        if self.temperature_baseline != 0.0:
            raise ValueError("temperature_baseline must be exactly 0")
        if self.temperature_sampling <= 0.0:
            raise ValueError("temperature_sampling must be > 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.max_items < 1:
            raise ValueError("max_items must be >= 1")

    def params_dict(self) -> dict[str, Any]:
        return {
            "position_fraction": self.position_fraction,
            "temperature_baseline": self.temperature_baseline,
            "temperature_sampling": self.temperature_sampling,
            "n_samples": self.n_samples,
            "max_items": self.max_items,
        }


class _LoadedModel:
    """Tokenizer + model pair, loaded once, CPU, eval mode."""

    def __init__(self, model_ref: str):
        try:
            import torch
            from transformers import AutoModelForCausalLM, AutoTokenizer
        except ImportError as exc:  # pragma: no cover
            raise ModelLoadError(model_ref, f"missing dependency: {exc}") from exc
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_ref)
            self.model = AutoModelForCausalLM.from_pretrained(
                model_ref, dtype=torch.float32
            )
        except Exception as exc:
            raise ModelLoadError(model_ref, str(exc)) from exc
        self.torch = torch
        self.model.to("cpu")
        self.model.eval()
        if self.tokenizer.pad_token_id is None:
            self.tokenizer.pad_token = self.tokenizer.eos_token

    def encode(self, text: str):
        return self.tokenizer(text, return_tensors="pt").input_ids[0]


def _select_position(position_fraction: float, token_count: int, item_id: str) -> int:
    if token_count < 2:
        raise TokenizationError(item_id)
    position = math.floor(position_fraction * token_count)
    return min(max(position, 1), token_count - 1)


def read_jsonl(path: Path, required: tuple[str, ...]) -> list[dict[str, Any]]:
    rows: list[dict[str, Any]] = []
    for line_no, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputFormatError(str(path), line_no, f"bad JSON: {exc.msg}") from exc
        if not isinstance(row, dict):
            raise InputFormatError(str(path), line_no, "record must be an object")
        missing = [key for key in required if key not in row]
        if missing:
            raise InputFormatError(str(path), line_no, f"missing keys {missing}")
        rows.append(row)
    return rows


def _dump_line(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def _write_jsonl(path: Path, records: Iterable[dict[str, Any]]) -> None:
    text = "".join(_dump_line(r) + "\n" for r in records)
    Path(path).write_text(text, encoding="utf-8")


def _write_sidecar(out_path: Path, method: str, config: ScorerConfig) -> Path:
    sidecar = {
        "method": method,
        "params": config.params_dict(),
        "seed": config.seed,
        "model_id": config.model_ref,
    }
    side_path = out_path.parent / (out_path.stem + ".sidecar.json")
    side_path.write_text(
        json.dumps(sidecar, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return side_path


def score_logprobs(
    items: list[dict[str, Any]],
    config: ScorerConfig,
    out_path: Optional[Path] = None,
) -> list[dict[str, Any]]:
    """Log-probability of the actual next token at an interior position.

    Labels are passed through untouched: they are caller-supplied ground
    truth, not something this runner can verify.
    """
    if not items:
        raise ValueError("items must be non-empty")
    loaded = _LoadedModel(config.model_ref)
    torch = loaded.torch
    torch.manual_seed(config.seed)

    records: list[dict[str, Any]] = []
    for item in items[: config.max_items]:
        item_id = str(item["item_id"])
        label = item["label"]
        if label not in _VALID_LABELS:
            raise ValueError(f"{item_id}: label must be one of {_VALID_LABELS}")
        ids = loaded.encode(str(item["text"]))
        position = _select_position(config.position_fraction, len(ids), item_id)

        with torch.no_grad():
            logits = loaded.model(ids[:position].unsqueeze(0)).logits
        log_probs = torch.log_softmax(logits[0, -1].double(), dim=-1)
        score = float(log_probs[ids[position]])
        if not math.isfinite(score):
            # the downstream score contract rejects non-finite values
            raise TokenizationError(item_id, f"non-finite log-probability {score!r}")

        record = {"item_id": item_id, "label": label, "score": score}
        if "group" in item:
            record["group"] = str(item["group"])
        records.append(record)

    if out_path is not None:
        out_path = Path(out_path)
        _write_jsonl(out_path, records)
        _write_sidecar(out_path, SCORE_METHOD, config)
    return records


def sample_edd(
    prompts: list[dict[str, Any]],
    config: ScorerConfig,
    out_path: Optional[Path] = None,
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS,
) -> list[dict[str, Any]]:
    """One greedy baseline plus n stochastic generations per prompt.

    Emits texts only; the scanner computes the edit distances.
    """
    if not prompts:
        raise ValueError("prompts must be non-empty")
    loaded = _LoadedModel(config.model_ref)
    torch = loaded.torch
    tokenizer = loaded.tokenizer
    torch.manual_seed(config.seed)

    records: list[dict[str, Any]] = []
    for prompt in prompts[: config.max_items]:
        item_id = str(prompt["item_id"])
        group = prompt["group"]
        if group not in _VALID_GROUPS:
            raise ValueError(f"{item_id}: group must be one of {_VALID_GROUPS}")
        ids = loaded.encode(str(prompt["prompt"])).unsqueeze(0)
        attention = torch.ones_like(ids)

        def decode(output) -> str:
            new_tokens = output[0][ids.shape[1]:]
            return tokenizer.decode(new_tokens, skip_special_tokens=True)

        with torch.no_grad():
            baseline = decode(
                loaded.model.generate(
                    ids,
                    attention_mask=attention,
                    do_sample=False,
                    max_new_tokens=max_new_tokens,
                    pad_token_id=tokenizer.pad_token_id,
                )
            )
            samples = [
                decode(
                    loaded.model.generate(
                        ids,
                        attention_mask=attention,
                        do_sample=True,
                        temperature=config.temperature_sampling,
                        max_new_tokens=max_new_tokens,
                        pad_token_id=tokenizer.pad_token_id,
                    )
                )
                for _ in range(config.n_samples)
            ]

        records.append(
            {
                "item_id": item_id,
                "group": group,
                "baseline": baseline,
                "samples": samples,
            }
        )

    if out_path is not None:
        out_path = Path(out_path)
        _write_jsonl(out_path, records)
        _write_sidecar(out_path, EDD_METHOD, config)
    return records
