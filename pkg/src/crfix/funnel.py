"""Suggestion lifecycle state machine and funnel metrics over event logs.

The funnel: every ingested comment (universe) is classified; actionable
ones get a generated suggestion; validated suggestions are shown; shown
ones end up applied or discarded. Counts are cohorted by the comment's
receipt timestamp: a comment's whole funnel belongs to one window.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .linediff import LineDiffPatch
from .validators import ValidationReport

__all__ = [
    "SuggestionState",
    "ArchiveReason",
    "LifecycleAction",
    "Suggestion",
    "IllegalTransitionError",
    "transition",
    "EventKind",
    "FunnelEvent",
    "event_to_json",
    "event_from_json",
    "read_event_log",
    "FunnelCounts",
    "TimeWindow",
    "UnorderedEventsError",
    "ZeroDenominatorError",
    "funnel_counts",
    "actionable_to_applied",
    "shown_to_applied",
]


class SuggestionState(str, Enum):
    GENERATED = "generated"
    SHOWN = "shown"
    ACCEPTED = "accepted"
    DISCARDED = "discarded"
    ARCHIVED = "archived"


class ArchiveReason(str, Enum):
    APPLIED = "applied"
    DISCARDED = "discarded"
    CODE_CHANGED = "code_changed"
    MERGED_NEWER_VERSION = "merged_newer_version"


class LifecycleAction(str, Enum):
    GATE_PASSED = "gate_passed"
    ACCEPT = "accept"
    DISCARD = "discard"
    APPROVE = "approve"
    DISAPPROVE = "disapprove"
    ARCHIVE = "archive"


class IllegalTransitionError(ValueError):
    def __init__(self, state: SuggestionState, action: LifecycleAction):
        super().__init__(f"action {action.value} illegal in state {state.value}")
        self.state = state
        self.action = action


@dataclass(frozen=True)
class Suggestion:
    """Lifecycle record for one generated patch suggestion."""

    id: str
    comment_id: str
    patch: LineDiffPatch
    state: SuggestionState = SuggestionState.GENERATED
    archive_reason: ArchiveReason | None = None
    reviewer_approved: bool = False
    reviewer_disapproved: bool = False
    validation: ValidationReport | None = None
    model_id: str = ""
    created_at: int = 0
    updated_at: int = 0

    def __post_init__(self):
        if (self.archive_reason is not None) != (self.state is SuggestionState.ARCHIVED):
            raise ValueError("archive_reason present iff state is archived")


# Legal archive reasons per pre-archive state.
_ARCHIVE_FROM = {
    SuggestionState.ACCEPTED: {ArchiveReason.APPLIED},
    SuggestionState.DISCARDED: {ArchiveReason.DISCARDED},
    SuggestionState.SHOWN: {ArchiveReason.CODE_CHANGED, ArchiveReason.MERGED_NEWER_VERSION},
}


def transition(
    s: Suggestion,
    action: LifecycleAction,
    *,
    archive_reason: ArchiveReason | None = None,
    at: int | None = None,
) -> Suggestion:
    """Apply one lifecycle action, returning the updated suggestion.

    The machine: generated -> shown (gate passed); shown -> accepted |
    discarded; accepted/discarded/shown -> archived (with a matching
    reason); approve/disapprove flip flags while generated or shown.
    Nothing leaves `archived`.
    """
    ts = at if at is not None else s.updated_at

    if action is LifecycleAction.GATE_PASSED:
        if s.state is not SuggestionState.GENERATED:
            raise IllegalTransitionError(s.state, action)
        return replace(s, state=SuggestionState.SHOWN, updated_at=ts)

    if action is LifecycleAction.ACCEPT:
        if s.state is not SuggestionState.SHOWN:
            raise IllegalTransitionError(s.state, action)
        return replace(s, state=SuggestionState.ACCEPTED, updated_at=ts)

    if action is LifecycleAction.DISCARD:
        if s.state is not SuggestionState.SHOWN:
            raise IllegalTransitionError(s.state, action)
        return replace(s, state=SuggestionState.DISCARDED, updated_at=ts)

    if action is LifecycleAction.APPROVE:
        if s.state not in (SuggestionState.GENERATED, SuggestionState.SHOWN):
            raise IllegalTransitionError(s.state, action)
        return replace(s, reviewer_approved=True, updated_at=ts)

    if action is LifecycleAction.DISAPPROVE:
        if s.state not in (SuggestionState.GENERATED, SuggestionState.SHOWN):
            raise IllegalTransitionError(s.state, action)
        return replace(s, reviewer_disapproved=True, updated_at=ts)

    if action is LifecycleAction.ARCHIVE:
        allowed = _ARCHIVE_FROM.get(s.state, set())
        if archive_reason is None or archive_reason not in allowed:
            raise IllegalTransitionError(s.state, action)
        return replace(
            s, state=SuggestionState.ARCHIVED, archive_reason=archive_reason, updated_at=ts
        )

    raise IllegalTransitionError(s.state, action)


class EventKind(str, Enum):
    COMMENT_RECEIVED = "comment_received"
    CLASSIFIED_ACTIONABLE = "classified_actionable"
    CLASSIFIED_NON_ACTIONABLE = "classified_non_actionable"
    SUGGESTION_GENERATED = "suggestion_generated"
    GENERATION_FAILED = "generation_failed"
    VALIDATED = "validated"
    SHOWN = "shown"
    REVIEWER_APPROVED = "reviewer_approved"
    REVIEWER_DISAPPROVED = "reviewer_disapproved"
    ACCEPTED = "accepted"
    APPLIED_DETECTED = "applied_detected"
    DISCARDED = "discarded"
    ARCHIVED = "archived"


@dataclass(frozen=True)
class FunnelEvent:
    ts: int  # epoch milliseconds
    kind: EventKind
    comment_id: str
    suggestion_id: str | None = None
    payload: Mapping = field(default_factory=dict)


def event_to_json(event: FunnelEvent) -> str:
    return json.dumps(
        {
            "ts": event.ts,
            "kind": event.kind.value,
            "comment_id": event.comment_id,
            "suggestion_id": event.suggestion_id,
            "payload": dict(event.payload),
        },
        sort_keys=True,
        ensure_ascii=False,
    )


def event_from_json(line: str) -> FunnelEvent:
    obj = json.loads(line)
    return FunnelEvent(
        ts=int(obj["ts"]),
        kind=EventKind(obj["kind"]),
        comment_id=str(obj["comment_id"]),
        suggestion_id=obj.get("suggestion_id"),
        payload=obj.get("payload", {}),
    )


def read_event_log(path: str) -> list[FunnelEvent]:
    """Strict reader for append-only JSONL event logs."""
    events: list[FunnelEvent] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                events.append(event_from_json(line))
    return events


class UnorderedEventsError(ValueError):
    pass


class ZeroDenominatorError(ValueError):
    pass


@dataclass(frozen=True)
class FunnelCounts:
    universe: int
    actionable: int
    shown: int
    applied: int
    discarded: int

    def __post_init__(self):
        counts = (self.universe, self.actionable, self.shown, self.applied, self.discarded)
        if any(c < 0 for c in counts):
            raise ValueError("funnel counts must be non-negative")
        if not (self.applied + self.discarded <= self.shown <= self.actionable <= self.universe):
            raise ValueError(
                f"funnel ordering violated: applied+discarded={self.applied + self.discarded} "
                f"shown={self.shown} actionable={self.actionable} universe={self.universe}"
            )


@dataclass(frozen=True)
class TimeWindow:
    """Half-open [start_ms, end_ms); None bounds are unbounded."""

    start_ms: int | None = None
    end_ms: int | None = None

    def contains(self, ts: int) -> bool:
        if self.start_ms is not None and ts < self.start_ms:
            return False
        if self.end_ms is not None and ts >= self.end_ms:
            return False
        return True


def funnel_counts(
    events: Sequence[FunnelEvent] | Iterable[FunnelEvent],
    window: TimeWindow = TimeWindow(),
) -> FunnelCounts:
    """Fold an ordered event log into funnel counts for one cohort window.

    Universe counts comments received in the window; all downstream stages
    follow the comment's cohort regardless of when they happened. Applied
    unions explicit accepts with heuristic applied-detection, deduplicated
    per suggestion.
    """
    events = list(events)
    last_ts: int | None = None
    for e in events:
        if last_ts is not None and e.ts < last_ts:
            raise UnorderedEventsError(f"event at ts={e.ts} after ts={last_ts}")
        last_ts = e.ts

    received: dict[str, int] = {}
    for e in events:
        if e.kind is EventKind.COMMENT_RECEIVED and e.comment_id not in received:
            received[e.comment_id] = e.ts
    cohort = {cid for cid, ts in received.items() if window.contains(ts)}

    actionable: set[str] = set()
    shown: set[str] = set()
    applied: set[str] = set()
    discarded: set[str] = set()
    for e in events:
        if e.comment_id not in cohort:
            continue
        if e.kind is EventKind.CLASSIFIED_ACTIONABLE:
            actionable.add(e.comment_id)
        elif e.kind is EventKind.SHOWN and e.suggestion_id:
            shown.add(e.suggestion_id)
        elif e.kind in (EventKind.ACCEPTED, EventKind.APPLIED_DETECTED) and e.suggestion_id:
            applied.add(e.suggestion_id)
        elif e.kind is EventKind.DISCARDED and e.suggestion_id:
            discarded.add(e.suggestion_id)

    return FunnelCounts(
        universe=len(cohort),
        actionable=len(actionable),
        shown=len(shown),
        applied=len(applied),
        discarded=len(discarded),
    )


def actionable_to_applied(c: FunnelCounts) -> float:
    """Applied suggestions per actionable comment."""
    if c.actionable == 0:
        raise ZeroDenominatorError("no actionable comments")
    return c.applied / c.actionable


def shown_to_applied(c: FunnelCounts) -> float:
    """Applied suggestions per shown suggestion."""
    if c.shown == 0:
        raise ZeroDenominatorError("no shown suggestions")
    return c.applied / c.shown
