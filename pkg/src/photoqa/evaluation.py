"""Accuracy reporting, question categorization and distribution statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .corpus import QAItem
from .textproc import tokenize_words

CATEGORIES = ("how_many", "what", "when", "where", "who")
FOUR_W = ("what", "when", "who", "where")


def categorize(question: str) -> str:
    """Leading-interrogative rule; anything unrecognized falls back to 'what'."""
    tokens = tokenize_words(question)
    if not tokens:
        raise ValueError("empty question")
    if tokens[:2] == ["how", "many"]:
        return "how_many"
    if tokens[0] in ("what", "when", "where", "who"):
        return tokens[0]
    return "what"


@dataclass
class AccuracyReport:
    overall: float
    total: int
    correct_total: int
    per_category: dict[str, tuple[float, int, int]] = field(default_factory=dict)
    # per_category values are (accuracy, correct, count)

    def as_dict(self) -> dict:
        return {
            "overall": self.overall,
            "total": self.total,
            "correct": self.correct_total,
            "categories": {
                cat: {"accuracy": acc, "correct": correct, "count": count}
                for cat, (acc, correct, count) in self.per_category.items()
            },
        }

    def as_table(self) -> str:
        cols = list(CATEGORIES) + ["overall"]
        header = "".join(f"{c:>10}" for c in cols)
        vals = []
        for cat in CATEGORIES:
            acc, _, count = self.per_category.get(cat, (float("nan"), 0, 0))
            vals.append(f"{acc:10.3f}" if count else f"{'-':>10}")
        vals.append(f"{self.overall:10.3f}")
        return header + "\n" + "".join(vals)


def evaluate(
    predict: Callable[[QAItem], Sequence[float]],
    qas: Iterable[QAItem],
    threads: int = 1,
) -> AccuracyReport:
    """Argmax of the 4 choice logits against the correct index, per category.

    predict(qa) must return 4 choice scores; any model honoring that contract
    is evaluated identically. With threads > 1 the forward passes run in a
    thread pool (model parameters are only read); aggregation stays in input
    order either way.
    """
    qa_list = list(qas)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            all_logits = list(pool.map(predict, qa_list))
    else:
        all_logits = [predict(qa) for qa in qa_list]

    correct_by_cat: dict[str, int] = {c: 0 for c in CATEGORIES}
    count_by_cat: dict[str, int] = {c: 0 for c in CATEGORIES}
    total = 0
    correct_total = 0
    for qa, raw in zip(qa_list, all_logits):
        logits = np.asarray(raw, dtype=np.float64)
        if logits.shape != (4,):
            raise ValueError(f"predictor must return 4 scores, got {logits.shape}")
        cat = categorize(qa.question)
        hit = int(np.argmax(logits)) == qa.correct_index
        total += 1
        count_by_cat[cat] += 1
        if hit:
            correct_total += 1
            correct_by_cat[cat] += 1

    per_category = {
        cat: (
            correct_by_cat[cat] / count_by_cat[cat] if count_by_cat[cat] else 0.0,
            correct_by_cat[cat],
            count_by_cat[cat],
        )
        for cat in CATEGORIES
    }
    overall = correct_total / total if total else 0.0
    return AccuracyReport(overall, total, correct_total, per_category)


def four_w_distribution(qas: Iterable[QAItem]) -> np.ndarray:
    """Probabilities over (what, when, who, where); how-many is excluded."""
    counts = {c: 0 for c in FOUR_W}
    for qa in qas:
        cat = categorize(qa.question)
        if cat in counts:
            counts[cat] += 1
    total = sum(counts.values())
    if total == 0:
        raise ValueError("no 4W questions to count")
    return np.array([counts[c] / total for c in FOUR_W])


def kl(p, q, eps: float = 1e-9) -> float:
    """KL(p||q) with 0*ln(0)=0; q's empty bins are eps-smoothed only if p
    puts mass there (then q is renormalized), keeping kl(p,p) exactly zero."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("distributions must be non-negative")
    if abs(p.sum() - 1.0) > 1e-6 or abs(q.sum() - 1.0) > 1e-6:
        raise ValueError("distributions must be normalized")
    if np.any((q == 0) & (p > 0)):
        q = np.where(q == 0, eps, q)
        q = q / q.sum()
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))
