"""Intent accuracy and span-level precision/recall/F1.

Three matching modes, all counted as a maximum one-to-one matching between
predicted and gold spans, micro-averaged over the corpus:

* ``strict``     - equal (start, end, label);
* ``loose``      - same label and at least one shared token;
* ``unlabelled`` - equal (start, end), label ignored.

``loose-unlabelled`` (any token overlap, label ignored) is available as an
extra mode for diagnostics but is not part of the standard report.

A strict match is also a loose match and an unlabelled match, so strict F1
can never exceed the other two; loose and unlabelled are not ordered with
respect to each other.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Literal, Mapping, Sequence

from .corpus import Dataset, RepairPolicy, Span, extract_spans


class EvalError(Exception):
    """Base class for evaluation input errors."""


class AlignmentError(EvalError):
    """Gold and prediction datasets do not line up."""


class SpanOverlapError(EvalError):
    """Spans within one side of one utterance overlap each other."""


MatchMode = Literal["strict", "loose", "unlabelled", "loose-unlabelled"]
MODES: tuple[MatchMode, ...] = ("strict", "loose", "unlabelled")


@dataclass(frozen=True)
class PRF:
    """Micro-averaged precision/recall/F1 counts.

    Conventions: precision is 1.0 when nothing was predicted, recall is 1.0
    when there is no gold span, and F1 is 0.0 when precision + recall is 0.
    """

    matched: int
    predicted: int
    gold: int

    def __post_init__(self) -> None:
        if self.matched > min(self.predicted, self.gold):
            raise ValueError(
                f"matched={self.matched} exceeds predicted={self.predicted} or gold={self.gold}"
            )
        if min(self.matched, self.predicted, self.gold) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def precision(self) -> float:
        return self.matched / self.predicted if self.predicted else 1.0

    @property
    def recall(self) -> float:
        return self.matched / self.gold if self.gold else 1.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def __add__(self, other: "PRF") -> "PRF":
        return PRF(
            matched=self.matched + other.matched,
            predicted=self.predicted + other.predicted,
            gold=self.gold + other.gold,
        )

    def to_dict(self) -> dict:
        return {
            "matched": self.matched,
            "predicted": self.predicted,
            "gold": self.gold,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def _spans_overlap(a: Span, b: Span) -> bool:
    return a.start < b.end and b.start < a.end


_PREDICATES: dict[MatchMode, Callable[[Span, Span], bool]] = {
    "strict": lambda p, g: p == g,
    "loose": lambda p, g: p.label == g.label and _spans_overlap(p, g),
    "unlabelled": lambda p, g: (p.start, p.end) == (g.start, g.end),
    "loose-unlabelled": _spans_overlap,
}


def _check_disjoint(spans: Sequence[Span], side: str) -> None:
    ordered = sorted(spans)
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise SpanOverlapError(f"{side} spans {a} and {b} overlap")


def _max_matching(preds: Sequence[Span], golds: Sequence[Span], mode: MatchMode) -> int:
    """Size of a maximum one-to-one matching under the mode's predicate.

    Kuhn's augmenting-path algorithm; span counts per utterance are small, so
    the O(V*E) bound is irrelevant here.
    """
    predicate = _PREDICATES[mode]
    adjacency = [
        [j for j, gold in enumerate(golds) if predicate(pred, gold)] for pred in preds
    ]
    gold_owner: list[int | None] = [None] * len(golds)

    def augment(i: int, visited: list[bool]) -> bool:
        for j in adjacency[i]:
            if visited[j]:
                continue
            visited[j] = True
            if gold_owner[j] is None or augment(gold_owner[j], visited):
                gold_owner[j] = i
                return True
        return False

    matched = 0
    for i in range(len(preds)):
        if augment(i, [False] * len(golds)):
            matched += 1
    return matched


def span_f1(
    gold_spans: Sequence[Sequence[Span]],
    pred_spans: Sequence[Sequence[Span]],
    mode: MatchMode,
) -> PRF:
    """PRF over per-utterance span sets; counts accumulate over the corpus."""
    if len(gold_spans) != len(pred_spans):
        raise AlignmentError(
            f"{len(gold_spans)} gold utterances vs {len(pred_spans)} predicted"
        )
    if mode not in _PREDICATES:
        raise ValueError(f"unknown match mode {mode!r}")
    matched = predicted = gold = 0
    for golds, preds in zip(gold_spans, pred_spans):
        _check_disjoint(golds, "gold")
        _check_disjoint(preds, "predicted")
        matched += _max_matching(preds, golds, mode)
        predicted += len(preds)
        gold += len(golds)
    return PRF(matched=matched, predicted=predicted, gold=gold)


def _aligned_pairs(gold: Dataset, pred: Dataset) -> list[tuple]:
    if len(gold) == 0:
        raise AlignmentError("cannot evaluate an empty dataset")
    if len(gold) != len(pred):
        raise AlignmentError(f"gold has {len(gold)} utterances, pred has {len(pred)}")
    pred_by_id = pred.by_id()
    pairs = []
    for g in gold.utterances:
        p = pred_by_id.get(g.id)
        if p is None:
            raise AlignmentError(f"utterance id {g.id!r} missing from predictions")
        if len(p) != len(g):
            raise AlignmentError(
                f"utterance {g.id!r}: gold has {len(g)} tokens, pred has {len(p)}"
            )
        pairs.append((g, p))
    return pairs


def intent_accuracy(gold: Dataset, pred: Dataset) -> float:
    """Fraction of id-aligned utterances whose intent strings match exactly."""
    pairs = _aligned_pairs(gold, pred)
    return sum(g.intent == p.intent for g, p in pairs) / len(pairs)


@dataclass(frozen=True)
class GroupScores:
    """Scores over one slice of the corpus (a dialect group, or everything)."""

    utterance_count: int
    intent_accuracy: float
    strict: PRF
    loose: PRF
    unlabelled: PRF

    def to_dict(self) -> dict:
        return {
            "utterances": self.utterance_count,
            "intent_accuracy": self.intent_accuracy,
            "strict": self.strict.to_dict(),
            "loose": self.loose.to_dict(),
            "unlabelled": self.unlabelled.to_dict(),
        }


@dataclass(frozen=True)
class EvalReport:
    intent_accuracy: float
    strict: PRF
    loose: PRF
    unlabelled: PRF
    per_group: Mapping[str, GroupScores]
    utterance_count: int

    def to_dict(self) -> dict:
        return {
            "utterances": self.utterance_count,
            "intent_accuracy": self.intent_accuracy,
            "strict": self.strict.to_dict(),
            "loose": self.loose.to_dict(),
            "unlabelled": self.unlabelled.to_dict(),
            "per_group": {k: v.to_dict() for k, v in sorted(self.per_group.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    def to_tsv(self) -> str:
        header = (
            "group", "utterances", "intent_accuracy",
            "strict_p", "strict_r", "strict_f1",
            "loose_p", "loose_r", "loose_f1",
            "unlabelled_p", "unlabelled_r", "unlabelled_f1",
        )

        def row(group: str, count: int, acc: float, s: PRF, lo: PRF, un: PRF) -> tuple:
            return (
                group, str(count), f"{acc:.6f}",
                f"{s.precision:.6f}", f"{s.recall:.6f}", f"{s.f1:.6f}",
                f"{lo.precision:.6f}", f"{lo.recall:.6f}", f"{lo.f1:.6f}",
                f"{un.precision:.6f}", f"{un.recall:.6f}", f"{un.f1:.6f}",
            )

        rows = [header, row("all", self.utterance_count, self.intent_accuracy,
                            self.strict, self.loose, self.unlabelled)]
        for group, scores in sorted(self.per_group.items()):
            rows.append(row(group, scores.utterance_count, scores.intent_accuracy,
                            scores.strict, scores.loose, scores.unlabelled))
        return "\n".join("\t".join(r) for r in rows) + "\n"


def _score_pairs(pairs: Sequence[tuple], repair: RepairPolicy) -> GroupScores:
    gold_spans = [extract_spans(g.slot_tags, repair) for g, _ in pairs]
    pred_spans = [extract_spans(p.slot_tags, repair) for _, p in pairs]
    return GroupScores(
        utterance_count=len(pairs),
        intent_accuracy=sum(g.intent == p.intent for g, p in pairs) / len(pairs),
        strict=span_f1(gold_spans, pred_spans, "strict"),
        loose=span_f1(gold_spans, pred_spans, "loose"),
        unlabelled=span_f1(gold_spans, pred_spans, "unlabelled"),
    )


def evaluate(
    gold: Dataset,
    pred: Dataset,
    repair: RepairPolicy = "lenient",
    group_by: Literal["none", "variety"] = "none",
) -> EvalReport:
    """Full report: intent accuracy plus all three span PRFs.

    The default repair policy is lenient so that predictions containing stray
    I-tags are scored rather than rejected. Grouping uses the gold utterance's
    variety; utterances without one land in the "unknown" group.
    """
    pairs = _aligned_pairs(gold, pred)
    overall = _score_pairs(pairs, repair)

    per_group: dict[str, GroupScores] = {}
    if group_by == "variety":
        buckets: dict[str, list[tuple]] = {}
        for g, p in pairs:
            buckets.setdefault(g.variety if g.variety is not None else "unknown", []).append((g, p))
        per_group = {variety: _score_pairs(members, repair) for variety, members in buckets.items()}
    elif group_by != "none":
        raise ValueError(f"unknown group_by {group_by!r}")

    return EvalReport(
        intent_accuracy=overall.intent_accuracy,
        strict=overall.strict,
        loose=overall.loose,
        unlabelled=overall.unlabelled,
        per_group=per_group,
        utterance_count=overall.utterance_count,
    )
