"""Evaluation metrics: mean quality score over scored turns, and intent
precision / recall / F1 over online episodes via thresholded embedding
similarity."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import UsageError
from .providers import cosine

DEFAULT_MATCH_THRESHOLD = 0.8


@dataclass(frozen=True)
class PrecisionRecall:
    precision: float
    recall: float
    f1: float

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass
class MetricReport:
    quality_score: float | None = None
    intent: PrecisionRecall | None = None
    per_episode: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        out: dict = {}
        if self.quality_score is not None:
            out["quality_score"] = self.quality_score
        if self.intent is not None:
            out["intent"] = self.intent.to_json()
        if self.per_episode:
            out["per_episode"] = self.per_episode
        return out


def quality_score(samples: list[dict]) -> float:
    """Mean of 2 * content + format over scored turns.

    Each sample is a mapping with "content" and "format" keys (a reward
    breakdown row works as-is).
    """
    if not samples:
        raise UsageError("quality_score requires at least one scored turn")
    total = 0.0
    for row in samples:
        total += 2.0 * row["content"] + row["format"]
    return total / len(samples)


def harmonic_f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def intent_pr(
    questions: list[str],
    intents: list[str],
    embedder,
    match_threshold: float = DEFAULT_MATCH_THRESHOLD,
) -> PrecisionRecall:
    """Question-to-intent matching rates.

    A question matches when some intent reaches the cosine threshold against
    it; an intent is covered when some question does. Precision is the matched
    fraction of questions, recall the covered fraction of intents.
    """
    if not questions or not intents:
        raise UsageError("intent_pr requires non-empty question and intent lists")
    if not (0.0 < match_threshold <= 1.0):
        raise UsageError("match threshold must be in (0, 1]")
    q_vecs = embedder.embed(questions)
    i_vecs = embedder.embed(intents)
    matched = 0
    covered_intents: set[int] = set()
    for q in q_vecs:
        hit = False
        for idx, i_vec in enumerate(i_vecs):
            if cosine(q, i_vec) >= match_threshold:
                hit = True
                covered_intents.add(idx)
        if hit:
            matched += 1
    precision = matched / len(questions)
    recall = len(covered_intents) / len(intents)
    return PrecisionRecall(precision, recall, harmonic_f1(precision, recall))


def format_report_table(report: MetricReport) -> str:
    """Human-readable summary table."""
    lines = ["metric               value", "-" * 27]
    if report.quality_score is not None:
        lines.append(f"quality_score        {report.quality_score:.4f}")
    if report.intent is not None:
        lines.append(f"intent_precision     {report.intent.precision:.4f}")
        lines.append(f"intent_recall        {report.intent.recall:.4f}")
        lines.append(f"intent_f1            {report.intent.f1:.4f}")
    return "\n".join(lines)
