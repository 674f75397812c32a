"""Competition metrics: per-question precision/recall/F2, macro
averages, and exact-match answer accuracy.

F2 weights recall over precision: F2 = 5PR / (4P + R). Empty retrieval
defines P = 0 so macro averaging stays total. With top-1 retrieval and
single-gold questions each per-question triple is all-0 or all-1, which
forces macro P = macro R = macro F2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Set

from .errors import EmptyGoldError, MissingPredictionError

ArticleKey = tuple[str, str]

__all__ = ["QuestionEval", "EvalReport", "score_question", "macro", "accuracy",
           "report_to_dict", "format_table"]


@dataclass(frozen=True)
class QuestionEval:
    question_id: str
    precision: float
    recall: float
    f2: float


@dataclass(frozen=True)
class EvalReport:
    per_question: tuple[QuestionEval, ...]
    macro_precision: float
    macro_recall: float
    macro_f2: float
    accuracy: Optional[float] = None


def f2_value(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 5.0 * precision * recall / (4.0 * precision + recall)


def score_question(
    retrieved: Set[ArticleKey], gold: Set[ArticleKey], question_id: str = ""
) -> QuestionEval:
    if not gold:
        raise EmptyGoldError(f"question {question_id!r} has an empty gold set")
    hits = len(set(retrieved) & set(gold))
    precision = hits / len(retrieved) if retrieved else 0.0
    recall = hits / len(gold)
    return QuestionEval(question_id, precision, recall, f2_value(precision, recall))


def macro(per_question: Iterable[QuestionEval], accuracy: Optional[float] = None) -> EvalReport:
    evals = tuple(per_question)
    if not evals:
        raise ValueError("need at least one question to aggregate")
    n = len(evals)
    return EvalReport(
        per_question=evals,
        macro_precision=sum(e.precision for e in evals) / n,
        macro_recall=sum(e.recall for e in evals) / n,
        macro_f2=sum(e.f2 for e in evals) / n,
        accuracy=accuracy,
    )


def _match_answer(predicted: str, gold: str) -> bool:
    # case-insensitive label match; whitespace-normalized so span
    # answers compare on content
    return " ".join(predicted.split()).casefold() == " ".join(gold.split()).casefold()


def accuracy(
    predicted: Mapping[str, str], gold: Mapping[str, str], lenient: bool = False
) -> float:
    """Exact-match accuracy over questions aligned by id.

    A gold question without a prediction raises unless `lenient`, in
    which case it counts as incorrect.
    """
    if not gold:
        raise ValueError("no gold answers to score against")
    missing = [qid for qid in gold if qid not in predicted]
    if missing and not lenient:
        raise MissingPredictionError(f"no predictions for questions: {sorted(missing)}")
    correct = sum(
        1 for qid, answer in gold.items() if qid in predicted and _match_answer(predicted[qid], answer)
    )
    return correct / len(gold)


def report_to_dict(report: EvalReport) -> dict:
    out = {
        "macro_precision": report.macro_precision,
        "macro_recall": report.macro_recall,
        "macro_f2": report.macro_f2,
        "per_question": [
            {"question_id": e.question_id, "precision": e.precision, "recall": e.recall, "f2": e.f2}
            for e in report.per_question
        ],
    }
    if report.accuracy is not None:
        out["accuracy"] = report.accuracy
    return out


def format_table(report: EvalReport) -> str:
    """Aligned plain-text table, one row per question plus a macro row."""
    width = max([len("question")] + [len(e.question_id) for e in report.per_question])
    lines = [f"{'question':<{width}}  {'P':>8}  {'R':>8}  {'F2':>8}"]
    for e in report.per_question:
        lines.append(f"{e.question_id:<{width}}  {e.precision:>8.4f}  {e.recall:>8.4f}  {e.f2:>8.4f}")
    lines.append(
        f"{'macro':<{width}}  {report.macro_precision:>8.4f}  "
        f"{report.macro_recall:>8.4f}  {report.macro_f2:>8.4f}"
    )
    if report.accuracy is not None:
        lines.append(f"{'accuracy':<{width}}  {report.accuracy:>8.4f}")
    return "\n".join(lines)


def save_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True), encoding="utf-8"
    )
