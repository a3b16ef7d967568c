"""Probe-log metric computation: ROC/AUC, recall at an FPR budget,
normalized edit distances, one-way ANOVA, and backdoor success rates.

All operations are pure functions over in-memory records parsed from JSON
Lines logs.  Nothing here runs a model, and nothing emits an accept/reject
verdict; the outputs are evidence payloads only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

HISTOGRAM_BINS = 20
DEFAULT_FPR_BUDGETS = (0.05,)


class ProbeError(Exception):
    pass


class DegenerateLabels(ProbeError):
    pass


class DegenerateInput(ProbeError):
    pass


class LogFormatError(ProbeError):
    def __init__(self, path: str, line_no: int, detail: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {detail}")


class Label(str, Enum):
    TP = "TP"
    TN = "TN"


class EddGroup(str, Enum):
    CONTAMINATED = "contaminated"
    CLEAN = "clean"


@dataclass(frozen=True)
class ScoreRecord:
    item_id: str
    label: Label
    score: float
    group: Optional[str] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValueError(f"score for {self.item_id!r} must be finite")


@dataclass(frozen=True)
class RocSummary:
    auc: float
    tpr_at_fpr: dict[float, float]
    n_pos: int
    n_neg: int
    curve: tuple[tuple[float, float], ...]

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "auc": self.auc,
            "tpr_at_fpr": {str(k): v for k, v in sorted(self.tpr_at_fpr.items())},
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "curve": [[f, t] for f, t in self.curve],
        }


@dataclass(frozen=True)
class EddRecord:
    item_id: str
    group: EddGroup
    baseline_text: str
    samples: tuple[str, ...]
    distances: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.distances) != len(self.samples):
            raise ValueError("one distance per sample required")


@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    p_value: float
    df_between: int
    df_within: int
    group_means: tuple[float, ...]

    def to_json_dict(self) -> dict[str, Any]:
        f = self.f_stat if math.isfinite(self.f_stat) else "inf"
        return {
            "f_stat": f,
            "p_value": self.p_value,
            "df_between": self.df_between,
            "df_within": self.df_within,
            "group_means": list(self.group_means),
        }


@dataclass(frozen=True)
class BackdoorSweep:
    trials: tuple[dict[str, Any], ...]
    asr_triggered: float
    asr_control: float

    @property
    def delta(self) -> float:
        return self.asr_triggered - self.asr_control

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "n_trials": len(self.trials),
            "asr_triggered": self.asr_triggered,
            "asr_control": self.asr_control,
            "delta": self.delta,
        }


def roc_auc(
    records: Sequence[ScoreRecord],
    budgets: Iterable[float] = DEFAULT_FPR_BUDGETS,
) -> RocSummary:
    """Step-curve ROC with half-credit ties, integrated by trapezoid.

    Scores are swept descending; records sharing a score move the operating
    point diagonally in one step, which makes the trapezoidal area equal the
    pairwise (wins + half ties) count exactly.
    """
    n_pos = sum(1 for r in records if r.label is Label.TP)
    n_neg = len(records) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels(f"need both classes, got {n_pos} TP / {n_neg} TN")

    by_score: dict[float, list[int]] = {}
    for r in records:
        tp_fp = by_score.setdefault(r.score, [0, 0])
        tp_fp[0 if r.label is Label.TP else 1] += 1

    curve: list[tuple[float, float]] = [(0.0, 0.0)]
    tp = fp = 0
    for score in sorted(by_score, reverse=True):
        d_tp, d_fp = by_score[score]
        tp += d_tp
        fp += d_fp
        curve.append((fp / n_neg, tp / n_pos))

    auc = 0.0
    for (f0, t0), (f1, t1) in zip(curve, curve[1:]):
        auc += (f1 - f0) * (t1 + t0) / 2.0

    summary = RocSummary(auc, {}, n_pos, n_neg, tuple(curve))
    budget_map = {b: tpr_at_fpr(summary, b) for b in budgets}
    return RocSummary(auc, budget_map, n_pos, n_neg, tuple(curve))


def tpr_at_fpr(summary: RocSummary, budget: float) -> float:
    if not 0.0 <= budget <= 1.0:
        raise ValueError(f"budget {budget} outside [0,1]")
    return max(t for f, t in summary.curve if f <= budget)


def normalized_levenshtein(a: str, b: str) -> float:
    """Unit-cost edit distance over code points, divided by max length."""
    if not a and not b:
        return 0.0
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
            )
        previous = current
    return previous[-1] / len(a)


def make_edd_record(
    item_id: str, group: EddGroup, baseline_text: str, samples: Sequence[str]
) -> EddRecord:
    distances = tuple(normalized_levenshtein(baseline_text, s) for s in samples)
    return EddRecord(item_id, group, baseline_text, tuple(samples), distances)


def histogram20(values: Sequence[float]) -> list[int]:
    bins = [0] * HISTOGRAM_BINS
    for v in values:
        index = min(int(v * HISTOGRAM_BINS), HISTOGRAM_BINS - 1)
        bins[index] += 1
    return bins


def _median(values: list[float]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def edd_summary(records: Sequence[EddRecord]) -> tuple[dict[str, dict[str, Any]], float]:
    pools: dict[EddGroup, list[float]] = {EddGroup.CONTAMINATED: [], EddGroup.CLEAN: []}
    for rec in records:
        pools[rec.group].extend(rec.distances)
    if not pools[EddGroup.CONTAMINATED] or not pools[EddGroup.CLEAN]:
        raise DegenerateLabels("need distances in both the contaminated and clean groups")
    summary: dict[str, dict[str, Any]] = {}
    means: dict[EddGroup, float] = {}
    for group, values in pools.items():
        mean = sum(values) / len(values)
        means[group] = mean
        summary[group.value] = {
            "mean": mean,
            "median": _median(values),
            "histogram": histogram20(values),
            "n": len(values),
        }
    separation = means[EddGroup.CLEAN] - means[EddGroup.CONTAMINATED]
    return summary, separation


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta, by modified Lentz."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-12:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_survival(f_stat: float, df_between: int, df_within: int) -> float:
    """P(F >= f_stat) for the F(df_between, df_within) distribution."""
    if math.isinf(f_stat):
        return 0.0
    if f_stat <= 0.0:
        return 1.0
    x = df_within / (df_within + df_between * f_stat)
    return regularized_incomplete_beta(df_within / 2.0, df_between / 2.0, x)


def anova_oneway(groups: Sequence[Sequence[float]]) -> AnovaResult:
    if len(groups) < 2:
        raise DegenerateInput("need at least two groups")
    cleaned: list[list[float]] = []
    for g in groups:
        vals = [float(v) for v in g]
        if len(vals) < 2:
            raise DegenerateInput("each group needs at least two values")
        if any(not math.isfinite(v) for v in vals):
            raise DegenerateInput("group values must be finite")
        cleaned.append(vals)

    k = len(cleaned)
    n_total = sum(len(g) for g in cleaned)
    grand_mean = sum(sum(g) for g in cleaned) / n_total
    group_means = [sum(g) / len(g) for g in cleaned]

    ss_between = sum(len(g) * (m - grand_mean) ** 2 for g, m in zip(cleaned, group_means))
    ss_within = sum(
        sum((v - m) ** 2 for v in g) for g, m in zip(cleaned, group_means)
    )
    df_between = k - 1
    df_within = n_total - k

    ms_between = ss_between / df_between
    ms_within = ss_within / df_within
    if ms_within == 0.0:
        if ms_between == 0.0:
            raise DegenerateInput("all values identical; F undefined")
        f_stat = math.inf
    else:
        f_stat = ms_between / ms_within
    p_value = f_survival(f_stat, df_between, df_within)
    return AnovaResult(f_stat, p_value, df_between, df_within, tuple(group_means))


def backdoor_asr(trials: Sequence[dict[str, Any]]) -> BackdoorSweep:
    triggered = [t for t in trials if t["trigger_present"]]
    control = [t for t in trials if not t["trigger_present"]]
    if not triggered or not control:
        raise DegenerateLabels("need both triggered and control trials")
    asr_t = sum(1 for t in triggered if t["attack_success"]) / len(triggered)
    asr_c = sum(1 for t in control if t["attack_success"]) / len(control)
    return BackdoorSweep(tuple(trials), asr_t, asr_c)


def _read_jsonl(path: Path) -> Iterable[tuple[int, dict[str, Any]]]:
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogFormatError(str(path), line_no, f"bad JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise LogFormatError(str(path), line_no, "line is not a JSON object")
        yield line_no, doc


def load_score_log(path: Path) -> list[ScoreRecord]:
    records: list[ScoreRecord] = []
    for line_no, doc in _read_jsonl(path):
        try:
            score = float(doc["score"])
            if not math.isfinite(score):
                raise ValueError("score not finite")
            records.append(
                ScoreRecord(str(doc["item_id"]), Label(doc["label"]), score,
                            doc.get("group"))
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise LogFormatError(str(path), line_no, f"bad score record: {exc}") from exc
    return records


def load_edd_log(path: Path) -> list[EddRecord]:
    records: list[EddRecord] = []
    for line_no, doc in _read_jsonl(path):
        try:
            samples = doc["samples"]
            if not isinstance(samples, list) or not all(isinstance(s, str) for s in samples):
                raise ValueError("samples must be a list of strings")
            records.append(
                make_edd_record(
                    str(doc["item_id"]), EddGroup(doc["group"]),
                    str(doc["baseline"]), samples,
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise LogFormatError(str(path), line_no, f"bad EDD record: {exc}") from exc
    return records


def load_backdoor_log(path: Path) -> list[dict[str, Any]]:
    trials: list[dict[str, Any]] = []
    for line_no, doc in _read_jsonl(path):
        try:
            trials.append(
                {
                    "prompt_id": str(doc["prompt_id"]),
                    "trigger_present": bool(doc["trigger_present"]),
                    "attack_success": bool(doc["attack_success"]),
                }
            )
        except (KeyError, TypeError) as exc:
            raise LogFormatError(str(path), line_no, f"bad backdoor record: {exc}") from exc
    return trials


SIDECAR_KEYS = ("method", "params", "seed", "model_id")


def load_probe_sidecar(path: Path) -> dict[str, Any]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LogFormatError(str(path), 0, f"bad JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise LogFormatError(str(path), 0, "sidecar must be a JSON object")
    missing = [k for k in SIDECAR_KEYS if k not in doc]
    if missing:
        raise LogFormatError(str(path), 0, f"sidecar missing keys: {missing}")
    return doc
