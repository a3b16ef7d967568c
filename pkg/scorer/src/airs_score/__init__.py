"""Probe-log producer: runs a causal LM to emit detector-score and
divergence-sample JSONL for the airscan metrics pipeline.
"""

from .scorer import (
    ModelLoadError,
    ScorerConfig,
    ScorerError,
    TokenizationError,
    sample_edd,
    score_logprobs,
)

__version__ = "0.1.0"

__all__ = [
    "ModelLoadError",
    "ScorerConfig",
    "ScorerError",
    "TokenizationError",
    "sample_edd",
    "score_logprobs",
    "__version__",
]
