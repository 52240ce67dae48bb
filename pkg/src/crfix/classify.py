"""Actionability and pair-quality classification over review comments.

Two classifier families share one calling convention: cheap deterministic
rule baselines (no model required) and model-backed variants that prompt a
text-completion backend and parse a one-word answer. Batch evaluation
reports the usual confusion-matrix metrics.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Literal, Protocol, Sequence

from .backends import Backend
from .linediff import LineDiffPatch, SourceFile, parse_patch

__all__ = [
    "ReviewComment",
    "ActionabilityLabel",
    "PairLabel",
    "ClassificationMetrics",
    "ConfusionCounts",
    "ActionabilityExample",
    "PairExample",
    "RuleActionabilityClassifier",
    "ModelActionabilityClassifier",
    "RulePairQualityClassifier",
    "ModelPairQualityClassifier",
    "InsufficientExemplarsError",
    "build_fewshot_prompt",
    "eval_classifier",
    "load_actionability_dataset",
    "load_pair_dataset",
]


@dataclass(frozen=True)
class ReviewComment:
    """An inline review comment anchored to a file and 1-based line range."""

    id: str
    diff_id: str
    file_path: str
    comment_text: str
    line_start: int
    line_end: int
    author: str = ""
    created_at: int = 0  # epoch milliseconds, UTC

    def __post_init__(self):
        if not (1 <= self.line_start <= self.line_end):
            raise ValueError(
                f"invalid line range {self.line_start}..{self.line_end} for comment {self.id}"
            )
        if not self.comment_text:
            raise ValueError(f"comment {self.id} has empty text")

    @classmethod
    def from_dict(cls, d: dict) -> "ReviewComment":
        return cls(
            id=str(d["id"]),
            diff_id=str(d.get("diff_id", "")),
            file_path=str(d.get("file_path", "")),
            comment_text=str(d["comment_text"]),
            line_start=int(d["line_start"]),
            line_end=int(d["line_end"]),
            author=str(d.get("author", "")),
            created_at=int(d.get("created_at", 0)),
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "diff_id": self.diff_id,
            "file_path": self.file_path,
            "comment_text": self.comment_text,
            "line_start": self.line_start,
            "line_end": self.line_end,
            "author": self.author,
            "created_at": self.created_at,
        }


@dataclass(frozen=True)
class ActionabilityLabel:
    actionable: bool
    rationale: str | None = None


Quality = Literal["good", "bad"]


@dataclass(frozen=True)
class PairLabel:
    quality: Quality


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ClassificationMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    per_class: dict[str, dict[str, float]]
    counts: ConfusionCounts
    undefined: tuple[str, ...] = ()  # metrics whose denominator was zero, reported as 0


class InsufficientExemplarsError(ValueError):
    """Few-shot prompting needs at least one exemplar of each class."""


@dataclass(frozen=True)
class ActionabilityExample:
    comment: ReviewComment
    context: str
    label: bool


@dataclass(frozen=True)
class PairExample:
    comment: ReviewComment
    patch: LineDiffPatch
    context: SourceFile
    label: Quality


class ActionabilityClassifier(Protocol):
    def classify(self, comment: ReviewComment, context: SourceFile) -> ActionabilityLabel: ...


class PairQualityClassifier(Protocol):
    def classify(
        self, comment: ReviewComment, patch: LineDiffPatch, context: SourceFile
    ) -> PairLabel: ...


_IMPERATIVE_CUES = (
    "rename", "add", "remove", "use", "replace", "extract",
    "move", "fix", "change", "make", "convert", "check",
)
_CUE_RE = re.compile(r"\b(" + "|".join(_IMPERATIVE_CUES) + r")\b", re.IGNORECASE)
_CODE_SPAN_RE = re.compile(r"`[^`]+`")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


def _purely_interrogative(text: str) -> bool:
    sentences = [s.strip() for s in _SENTENCE_SPLIT_RE.split(text.strip()) if s.strip()]
    if not sentences:
        return False
    return all(s.endswith("?") for s in sentences)


class RuleActionabilityClassifier:
    """Deterministic baseline: imperative cue or code span, and not a pure question.

    A cheap stand-in for a model classifier, useful for model-free testing;
    it makes no claim of matching a learned classifier's quality.
    """

    def classify(self, comment: ReviewComment, context: SourceFile) -> ActionabilityLabel:
        text = comment.comment_text
        has_cue = bool(_CUE_RE.search(text)) or bool(_CODE_SPAN_RE.search(text))
        if not has_cue:
            return ActionabilityLabel(False, rationale="no imperative cue or code span")
        if _purely_interrogative(text):
            return ActionabilityLabel(False, rationale="purely interrogative")
        return ActionabilityLabel(True, rationale="imperative cue or code span present")


class RulePairQualityClassifier:
    """Deterministic baseline: patch must be non-empty and local to the comment."""

    def __init__(self, max_distance: int = 10):
        self.max_distance = max_distance

    def classify(
        self, comment: ReviewComment, patch: LineDiffPatch, context: SourceFile
    ) -> PairLabel:
        if patch.is_empty:
            return PairLabel("bad")
        lo = comment.line_start - self.max_distance
        hi = comment.line_end + self.max_distance
        for hunk in patch.hunks:
            hunk_last = max(hunk.start, hunk.end)
            if hunk.start < lo or hunk_last > hi:
                return PairLabel("bad")
        return PairLabel("good")


_ANSWER_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)
_QUALITY_RE = re.compile(r"\b(good|bad)\b", re.IGNORECASE)


def build_fewshot_prompt(
    exemplars: Sequence[ActionabilityExample],
    target: ReviewComment,
    context: SourceFile,
) -> str:
    """Deterministic few-shot prompt for yes/no actionability classification."""
    if not any(e.label for e in exemplars) or not any(not e.label for e in exemplars):
        raise InsufficientExemplarsError(
            "need at least one actionable and one non-actionable exemplar"
        )
    parts = [
        "You classify code review comments.",
        "A comment is actionable if it requires a code change to address.",
        "Study the examples, then classify the final comment.",
        "",
    ]
    for i, ex in enumerate(exemplars, start=1):
        parts.append(f"Example {i}:")
        parts.append(f"Comment: {ex.comment.comment_text}")
        if ex.context:
            parts.append(f"Code:\n{ex.context}")
        parts.append(f"Actionable: {'yes' if ex.label else 'no'}")
        parts.append("")
    parts.append("Now classify:")
    parts.append(f"Comment: {target.comment_text}")
    parts.append(f"Code:\n{context.content}")
    parts.append("Answer exactly `yes` or `no`.")
    return "\n".join(parts)


@dataclass
class ModelActionabilityClassifier:
    """Few-shot prompted binary classifier over a completion backend.

    Backend failures propagate; an answer that parses as neither yes nor no
    maps to non-actionable with the raw output recorded in the rationale.
    """

    backend: Backend
    exemplars: Sequence[ActionabilityExample]

    def classify(self, comment: ReviewComment, context: SourceFile) -> ActionabilityLabel:
        prompt = build_fewshot_prompt(self.exemplars, comment, context)
        response = self.backend.complete(prompt)
        m = _ANSWER_RE.search(response)
        if m is None:
            return ActionabilityLabel(
                False, rationale=f"unparseable model output: {response[:200]!r}"
            )
        return ActionabilityLabel(m.group(1).lower() == "yes", rationale="model answer")


def build_pair_quality_prompt(
    comment: ReviewComment, patch_text: str, context: SourceFile
) -> str:
    parts = [
        "You judge whether a code patch addresses a review comment.",
        "Answer `good` if the patch plausibly resolves the comment, `bad` otherwise.",
        "",
        f"Comment (on lines {comment.line_start}-{comment.line_end}): {comment.comment_text}",
        f"File:\n{context.content}",
        f"Patch:\n{patch_text}",
        "Answer exactly `good` or `bad`.",
    ]
    return "\n".join(parts)


@dataclass
class ModelPairQualityClassifier:
    backend: Backend

    def classify(
        self, comment: ReviewComment, patch: LineDiffPatch, context: SourceFile
    ) -> PairLabel:
        from .linediff import serialize_patch

        prompt = build_pair_quality_prompt(comment, serialize_patch(patch), context)
        response = self.backend.complete(prompt)
        m = _QUALITY_RE.search(response)
        if m is None:
            return PairLabel("bad")
        return PairLabel("good" if m.group(1).lower() == "good" else "bad")


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float, list[str]]:
    undefined: list[str] = []
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision, undefined = 0.0, undefined + ["precision"]
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall = 0.0
        undefined.append("recall")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        undefined.append("f1")
    return precision, recall, f1, undefined


def eval_classifier(
    predictions: Sequence[bool], gold: Sequence[bool]
) -> ClassificationMetrics:
    """Confusion-matrix metrics with `True` as the positive class.

    Zero-denominator metrics are reported as 0 and listed in `undefined`
    rather than raising, so batch evaluation stays total.
    """
    if len(predictions) != len(gold):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(gold)} gold")
    if not gold:
        raise ValueError("empty input")
    tp = sum(1 for p, g in zip(predictions, gold) if p and g)
    fp = sum(1 for p, g in zip(predictions, gold) if p and not g)
    fn = sum(1 for p, g in zip(predictions, gold) if not p and g)
    tn = sum(1 for p, g in zip(predictions, gold) if not p and not g)
    counts = ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)

    precision, recall, f1, undefined = _prf(tp, fp, fn)
    # Negative class mirrors the matrix: tn plays tp, fn plays fp.
    neg_precision, neg_recall, _, _ = _prf(tn, fn, fp)
    accuracy = (tp + tn) / counts.total
    return ClassificationMetrics(
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=accuracy,
        per_class={
            "positive": {"precision": precision, "recall": recall},
            "negative": {"precision": neg_precision, "recall": neg_recall},
        },
        counts=counts,
        undefined=tuple(undefined),
    )


def load_actionability_dataset(path: str) -> list[ActionabilityExample]:
    """Load a labeled actionability set: JSONL of {comment, context, label}."""
    examples: list[ActionabilityExample] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                examples.append(
                    ActionabilityExample(
                        comment=ReviewComment.from_dict(obj["comment"]),
                        context=str(obj.get("context", "")),
                        label=bool(obj["label"]),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad labeled example: {exc}") from exc
    return examples


def load_pair_dataset(path: str) -> list[PairExample]:
    """Load a labeled pair-quality set: JSONL of {comment, patch, context, label}."""
    examples: list[PairExample] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                comment = ReviewComment.from_dict(obj["comment"])
                context = SourceFile.from_content(comment.file_path or "file", obj["context"])
                patch = parse_patch(obj["patch"], len(context.lines))
                label = obj["label"]
                if label not in ("good", "bad"):
                    raise ValueError(f"label must be good or bad, got {label!r}")
                examples.append(
                    PairExample(comment=comment, patch=patch, context=context, label=label)
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad labeled pair: {exc}") from exc
    return examples
