"""
Runtime probe metrics from JSONL logs
=====================================

Compute the detection metrics the scanner records under the runtime
probe fields: ROC AUC with tie handling, TPR at a fixed false-positive
budget, edit-distance divergence between generations, a one-way ANOVA,
and the triggered-vs-control attack success rate.
"""

from __future__ import annotations

import random

from airscan.probes import (
    EddGroup,
    Label,
    ScoreRecord,
    anova_oneway,
    backdoor_asr,
    edd_summary,
    make_edd_record,
    normalized_levenshtein,
    roc_auc,
    tpr_at_fpr,
)

rng = random.Random(0)

# Membership scores: members (TP) shifted a little above non-members.
records = [ScoreRecord(f"m{i}", Label.TP, rng.gauss(0.5, 1.0)) for i in range(200)]
records += [ScoreRecord(f"n{i}", Label.TN, rng.gauss(0.0, 1.0)) for i in range(200)]

summary = roc_auc(records)
print(f"AUC over {summary.n_pos}+{summary.n_neg} scores: {summary.auc:.4f}")
print(f"TPR at 5% FPR: {tpr_at_fpr(summary, 0.05):.4f}")
print(f"TPR at 20% FPR: {tpr_at_fpr(summary, 0.20):.4f}")

# Ties get half credit, so constant scores sit exactly at chance.
flat = [ScoreRecord(f"f{i}", Label.TP if i % 2 else Label.TN, 1.0) for i in range(20)]
print(f"all-tied AUC: {roc_auc(flat).auc}")

# Edit-distance divergence: how far stochastic generations drift from a
# greedy baseline, normalized to [0, 1].
print(f"\nkitten/sitting distance: {normalized_levenshtein('kitten', 'sitting'):.4f}")

contaminated = make_edd_record(
    "doc1", EddGroup.CONTAMINATED, "the quick brown fox jumps",
    ["the quick brown fox jumps", "the quick brown fox jumped"],
)
clean = make_edd_record(
    "doc2", EddGroup.CLEAN, "the quick brown fox jumps",
    ["a completely different sentence", "nothing like the baseline at all"],
)
groups, separation = edd_summary([contaminated, clean])
print(f"contaminated mean distance: {groups['contaminated']['mean']:.4f}")
print(f"clean mean distance: {groups['clean']['mean']:.4f}")
print(f"separation: {separation:.4f}")

# ANOVA across prompt groups: does the distance distribution differ?
g1 = [rng.gauss(0.2, 0.05) for _ in range(30)]
g2 = [rng.gauss(0.2, 0.05) for _ in range(30)]
g3 = [rng.gauss(0.6, 0.05) for _ in range(30)]
result = anova_oneway([g1, g2, g3])
print(f"\nANOVA F={result.f_stat:.2f} p={result.p_value:.3e}")

# Backdoor sweep: success rate with the trigger vs without.
trials = [{"prompt_id": f"t{i}", "trigger_present": True, "attack_success": i < 6}
          for i in range(10)]
trials += [{"prompt_id": f"c{i}", "trigger_present": False, "attack_success": False}
           for i in range(10)]
sweep = backdoor_asr(trials)
print(f"ASR triggered={sweep.asr_triggered:.2f} control={sweep.asr_control:.2f} delta={sweep.delta:.2f}")
