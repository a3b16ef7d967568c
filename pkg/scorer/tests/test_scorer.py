"""Scorer tests: config invariants, position selection, passthrough,
schema validity of emitted JSONL, fixed-seed determinism on CPU, and
the CLI surface.

The model under test is a tiny randomly initialized GPT-2 with a
word-level tokenizer, built once per session into a temp directory.
Nothing here imports the scanner package; the shared contract is the
set of golden schema files loaded by path.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import pytest

from airs_score import (
    ModelLoadError,
    ScorerConfig,
    TokenizationError,
    sample_edd,
    score_logprobs,
)
from airs_score.cli import main
from airs_score.scorer import InputFormatError, _select_position, read_jsonl

SCHEMA_DIR = Path(__file__).resolve().parents[2] / "src" / "airscan" / "data" / "schemas"

WORDS = (
    "the cat sat on mat a dog ran fast bird flew over tree green ideas "
    "sleep furiously model weights are heavy light sun rose slowly"
).split()


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> Path:
    import torch
    from tokenizers import Tokenizer
    from tokenizers.models import WordLevel
    from tokenizers.pre_tokenizers import Whitespace
    from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

    vocab = {"<unk>": 0, "<eos>": 1}
    for word in WORDS:
        vocab[word] = len(vocab)

    backend = Tokenizer(WordLevel(vocab, unk_token="<unk>"))
    backend.pre_tokenizer = Whitespace()
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=backend,
        unk_token="<unk>",
        eos_token="<eos>",
        pad_token="<eos>",
    )

    config = GPT2Config(
        vocab_size=len(vocab),
        n_positions=64,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=1,
        eos_token_id=1,
    )
    torch.manual_seed(1234)
    model = GPT2LMHeadModel(config)

    out = tmp_path_factory.mktemp("tiny-model")
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    return out


def score_items():
    return [
        {"item_id": "a1", "label": "TP", "text": "the cat sat on the mat"},
        {"item_id": "a2", "label": "TN", "text": "a dog ran fast over the tree"},
        {"item_id": "a3", "label": "TP", "text": "green ideas sleep furiously", "group": "member"},
    ]


def edd_prompts():
    return [
        {"item_id": "p1", "group": "contaminated", "prompt": "the cat sat"},
        {"item_id": "p2", "group": "clean", "prompt": "a dog ran"},
    ]


def load_schema(name: str) -> dict:
    return json.loads((SCHEMA_DIR / name).read_text(encoding="utf-8"))


# ------------------------------------------------------------- config


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        ScorerConfig("m", position_fraction=0.0)
    with pytest.raises(ValueError):
        ScorerConfig("m", position_fraction=1.0)
    with pytest.raises(ValueError):
        ScorerConfig("m", temperature_baseline=0.1)
    with pytest.raises(ValueError):
        ScorerConfig("m", temperature_sampling=0.0)
    with pytest.raises(ValueError):
        ScorerConfig("m", n_samples=0)
    with pytest.raises(ValueError):
        ScorerConfig("m", max_items=0)
    assert ScorerConfig("m").position_fraction == 0.5


def test_position_selection_floor_and_clamp():
    assert _select_position(0.5, 10, "x") == 5
    assert _select_position(0.5, 2, "x") == 1
    assert _select_position(0.9, 10, "x") == 9
    assert _select_position(0.99, 10, "x") == 9
    assert _select_position(0.01, 10, "x") == 1
    with pytest.raises(TokenizationError):
        _select_position(0.5, 1, "x")
    with pytest.raises(TokenizationError):
        _select_position(0.5, 0, "x")


# ------------------------------------------------------------- logprobs


def test_logprobs_records_and_schema(tiny_model_dir, tmp_path):
    out = tmp_path / "scores.jsonl"
    config = ScorerConfig(str(tiny_model_dir), seed=0)
    records = score_logprobs(score_items(), config, out_path=out)

    assert [r["item_id"] for r in records] == ["a1", "a2", "a3"]
    assert [r["label"] for r in records] == ["TP", "TN", "TP"]
    assert records[2]["group"] == "member"
    assert all(r["score"] <= 0.0 for r in records)

    schema = load_schema("score_record.schema.json")
    for line in out.read_text(encoding="utf-8").splitlines():
        jsonschema.validate(json.loads(line), schema)

    sidecar = json.loads((tmp_path / "scores.sidecar.json").read_text(encoding="utf-8"))
    jsonschema.validate(sidecar, load_schema("probe_sidecar.schema.json"))
    assert sidecar["method"] == "next_token_logprob"
    assert sidecar["seed"] == 0
    assert sidecar["model_id"] == str(tiny_model_dir)


def test_logprobs_single_token_item_raises(tiny_model_dir):
    config = ScorerConfig(str(tiny_model_dir))
    items = [{"item_id": "tiny", "label": "TP", "text": "cat"}]
    with pytest.raises(TokenizationError) as err:
        score_logprobs(items, config)
    assert err.value.item_id == "tiny"


def test_logprobs_two_runs_byte_identical(tiny_model_dir, tmp_path):
    config = ScorerConfig(str(tiny_model_dir), seed=7)
    paths = []
    for run in ("one", "two"):
        out = tmp_path / run / "scores.jsonl"
        out.parent.mkdir()
        score_logprobs(score_items(), config, out_path=out)
        paths.append(out)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert (paths[0].parent / "scores.sidecar.json").read_bytes() == (
        paths[1].parent / "scores.sidecar.json"
    ).read_bytes()


def test_logprobs_max_items_truncates(tiny_model_dir):
    config = ScorerConfig(str(tiny_model_dir), max_items=1)
    records = score_logprobs(score_items(), config)
    assert len(records) == 1


def test_logprobs_rejects_bad_label(tiny_model_dir):
    config = ScorerConfig(str(tiny_model_dir))
    with pytest.raises(ValueError):
        score_logprobs([{"item_id": "x", "label": "POS", "text": "the cat sat"}], config)


# ------------------------------------------------------------- edd


def test_edd_records_and_schema(tiny_model_dir, tmp_path):
    out = tmp_path / "edd.jsonl"
    config = ScorerConfig(str(tiny_model_dir), n_samples=3, seed=0)
    records = sample_edd(edd_prompts(), config, out_path=out, max_new_tokens=8)

    assert [r["group"] for r in records] == ["contaminated", "clean"]
    for record in records:
        assert isinstance(record["baseline"], str)
        assert len(record["samples"]) == 3
        assert "distances" not in record

    schema = load_schema("edd_record.schema.json")
    for line in out.read_text(encoding="utf-8").splitlines():
        jsonschema.validate(json.loads(line), schema)

    sidecar = json.loads((tmp_path / "edd.sidecar.json").read_text(encoding="utf-8"))
    jsonschema.validate(sidecar, load_schema("probe_sidecar.schema.json"))
    assert sidecar["method"] == "edd_sampling"
    assert sidecar["params"]["n_samples"] == 3


def test_edd_two_runs_byte_identical(tiny_model_dir, tmp_path):
    config = ScorerConfig(str(tiny_model_dir), n_samples=2, seed=11)
    paths = []
    for run in ("one", "two"):
        out = tmp_path / run / "edd.jsonl"
        out.parent.mkdir()
        sample_edd(edd_prompts(), config, out_path=out, max_new_tokens=8)
        paths.append(out)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_edd_near_zero_temperature_matches_baseline(tiny_model_dir):
    # in the temperature -> 0 limit the sampler collapses onto greedy
    config = ScorerConfig(str(tiny_model_dir), n_samples=1,
                          temperature_sampling=1e-6, seed=3)
    records = sample_edd(edd_prompts(), config, max_new_tokens=8)
    for record in records:
        assert record["samples"][0] == record["baseline"]


def test_edd_rejects_bad_group(tiny_model_dir):
    config = ScorerConfig(str(tiny_model_dir))
    with pytest.raises(ValueError):
        sample_edd([{"item_id": "x", "group": "dirty", "prompt": "the cat"}], config)


# ------------------------------------------------------------- errors and IO


def test_model_load_error():
    with pytest.raises(ModelLoadError):
        score_logprobs(score_items(), ScorerConfig("/nonexistent/model/dir"))


def test_read_jsonl_reports_line_numbers(tmp_path):
    bad = tmp_path / "items.jsonl"
    bad.write_text('{"item_id": "a", "text": "x", "label": "TP"}\nnot json\n',
                   encoding="utf-8")
    with pytest.raises(InputFormatError) as err:
        read_jsonl(bad, required=("item_id", "text", "label"))
    assert err.value.line_no == 2

    missing = tmp_path / "missing.jsonl"
    missing.write_text('{"item_id": "a"}\n', encoding="utf-8")
    with pytest.raises(InputFormatError):
        read_jsonl(missing, required=("item_id", "text", "label"))


# ------------------------------------------------------------- CLI


def test_cli_logprobs_and_edd(tiny_model_dir, tmp_path, capsys):
    items = tmp_path / "items.jsonl"
    items.write_text(
        "".join(json.dumps(i) + "\n" for i in score_items()), encoding="utf-8"
    )
    out = tmp_path / "scores.jsonl"
    code = main(["logprobs", "--model", str(tiny_model_dir),
                 "--items", str(items), "--out", str(out), "--seed", "0"])
    assert code == 0
    assert "wrote 3 records" in capsys.readouterr().out
    assert out.is_file() and (tmp_path / "scores.sidecar.json").is_file()

    prompts = tmp_path / "prompts.jsonl"
    prompts.write_text(
        "".join(json.dumps(p) + "\n" for p in edd_prompts()), encoding="utf-8"
    )
    edd_out = tmp_path / "edd.jsonl"
    code = main(["edd", "--model", str(tiny_model_dir),
                 "--prompts", str(prompts), "--out", str(edd_out),
                 "--n", "2", "--temp", "0.8", "--max-new-tokens", "6"])
    assert code == 0
    lines = [json.loads(l) for l in edd_out.read_text(encoding="utf-8").splitlines()]
    assert len(lines) == 2 and len(lines[0]["samples"]) == 2


def test_cli_bad_model_exits_three(tmp_path, capsys):
    items = tmp_path / "items.jsonl"
    items.write_text(json.dumps(score_items()[0]) + "\n", encoding="utf-8")
    code = main(["logprobs", "--model", str(tmp_path / "no-model"),
                 "--items", str(items), "--out", str(tmp_path / "out.jsonl")])
    assert code == 3
    assert "airs-score error" in capsys.readouterr().err
