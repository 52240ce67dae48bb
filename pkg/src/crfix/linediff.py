"""Line-diff patches: parsing, serialization, application, and applied-detection.

A patch is an ordered list of non-overlapping hunks addressed by 1-based line
numbers in the *original* file. The canonical text format is::

    @@ <start> <end> @@
    +replacement line
    +another replacement line

``end = start - 1`` encodes a pure insertion before ``start``; an empty
replacement encodes a deletion. The ``+`` body prefix disambiguates
replacement lines that themselves begin with ``@@``.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass
from enum import Enum
from typing import Literal

__all__ = [
    "SourceFile",
    "Hunk",
    "LineDiffPatch",
    "VerdictStatus",
    "AppliedVerdict",
    "PatchParseError",
    "PatchApplyError",
    "parse_patch",
    "serialize_patch",
    "apply_patch",
    "exact_match",
    "detect_applied",
    "patch_between",
    "post_apply_positions",
    "EMPTY_PATCH",
]


class PatchParseError(ValueError):
    """Raised when patch text does not conform to the canonical format."""


class PatchApplyError(ValueError):
    """Raised when a hunk cannot be applied to the given file.

    Carries the index of the offending hunk so callers can report which part
    of a multi-hunk patch no longer fits the file.
    """

    def __init__(self, hunk_index: int, reason: str):
        super().__init__(f"hunk {hunk_index}: {reason}")
        self.hunk_index = hunk_index
        self.reason = reason


@dataclass(frozen=True)
class SourceFile:
    """A source file as an ordered sequence of terminator-free lines."""

    path: str
    lines: tuple[str, ...]

    def __post_init__(self):
        if not self.path or "\x00" in self.path:
            raise ValueError("path must be non-empty and free of null bytes")
        for line in self.lines:
            if "\n" in line or "\r" in line:
                raise ValueError("lines must not contain line terminators")

    @classmethod
    def from_content(cls, path: str, content: str) -> "SourceFile":
        # str.split (not splitlines) so content round-trips exactly,
        # including a trailing newline becoming a trailing empty line.
        return cls(path=path, lines=tuple(content.split("\n")))

    @property
    def content(self) -> str:
        return "\n".join(self.lines)

    def __len__(self) -> int:
        return len(self.lines)


@dataclass(frozen=True)
class Hunk:
    """One replacement region: original lines [start..end] become `replacement`."""

    start: int
    end: int
    replacement: tuple[str, ...]

    def __post_init__(self):
        if self.start < 1:
            raise ValueError(f"hunk start must be >= 1, got {self.start}")
        if self.end < self.start - 1:
            raise ValueError(f"hunk end must be >= start-1, got start={self.start} end={self.end}")
        for line in self.replacement:
            if "\n" in line or "\r" in line:
                raise ValueError("replacement lines must not contain line terminators")

    @property
    def original_span(self) -> int:
        """Number of original lines replaced (0 for a pure insertion)."""
        return self.end - self.start + 1


@dataclass(frozen=True)
class LineDiffPatch:
    """Ordered, non-overlapping hunks over one original file."""

    hunks: tuple[Hunk, ...] = ()

    def __post_init__(self):
        for prev, cur in zip(self.hunks, self.hunks[1:]):
            if cur.start <= prev.start:
                raise ValueError("hunks must be sorted strictly ascending by start")
            if prev.end >= cur.start:
                raise ValueError(
                    f"hunks overlap: [{prev.start},{prev.end}] and [{cur.start},{cur.end}]"
                )

    @property
    def is_empty(self) -> bool:
        return not self.hunks


EMPTY_PATCH = LineDiffPatch()


class VerdictStatus(str, Enum):
    APPLIED_AT_LINES = "AppliedAtLines"
    APPLIED_BY_CONTENT = "AppliedByContent"
    NOT_DETECTED = "NotDetected"


@dataclass(frozen=True)
class AppliedVerdict:
    status: VerdictStatus
    matched_lines: tuple[int, int] | None = None


_HEADER_RE = re.compile(r"^@@ (0|[1-9][0-9]*) (0|[1-9][0-9]*) @@$")


def parse_patch(text: str, original_length: int) -> LineDiffPatch:
    """Parse canonical patch text against a file of `original_length` lines.

    Accepts exactly the canonical format plus at most one trailing newline;
    everything else raises :class:`PatchParseError`. The empty string is the
    empty patch.
    """
    if original_length < 0:
        raise ValueError("original_length must be >= 0")
    if text == "":
        return EMPTY_PATCH

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()  # tolerate one trailing newline

    hunks: list[Hunk] = []
    i = 0
    while i < len(lines):
        m = _HEADER_RE.match(lines[i])
        if not m:
            raise PatchParseError(f"line {i + 1}: expected hunk header, got {lines[i]!r}")
        start, end = int(m.group(1)), int(m.group(2))
        if start < 1:
            raise PatchParseError(f"line {i + 1}: hunk start must be >= 1")
        if end < start - 1:
            raise PatchParseError(f"line {i + 1}: hunk end {end} precedes start {start}")
        if start > original_length + 1:
            raise PatchParseError(
                f"line {i + 1}: start {start} out of range for {original_length}-line file"
            )
        if end > original_length:
            raise PatchParseError(
                f"line {i + 1}: end {end} out of range for {original_length}-line file"
            )
        i += 1
        replacement: list[str] = []
        while i < len(lines) and not lines[i].startswith("@@"):
            if not lines[i].startswith("+"):
                raise PatchParseError(f"line {i + 1}: body line missing '+' prefix: {lines[i]!r}")
            replacement.append(lines[i][1:])
            i += 1
        hunks.append(Hunk(start=start, end=end, replacement=tuple(replacement)))

    for prev, cur in zip(hunks, hunks[1:]):
        if cur.start <= prev.start or prev.end >= cur.start:
            raise PatchParseError(
                f"hunks unsorted or overlapping: [{prev.start},{prev.end}] then [{cur.start},{cur.end}]"
            )
    return LineDiffPatch(hunks=tuple(hunks))


def serialize_patch(patch: LineDiffPatch) -> str:
    """Render the canonical text form; inverse of :func:`parse_patch`."""
    parts: list[str] = []
    for hunk in patch.hunks:
        parts.append(f"@@ {hunk.start} {hunk.end} @@")
        parts.extend("+" + line for line in hunk.replacement)
    return "\n".join(parts)


def apply_patch(file: SourceFile, patch: LineDiffPatch) -> SourceFile:
    """Splice every hunk into `file`, interpreting ranges against the original.

    Hunks are applied in descending start order so each sees original
    coordinates. Validates against the actual file length at apply time:
    a patch parsed against one file version may be replayed against another.
    """
    n = len(file.lines)
    for idx, hunk in enumerate(patch.hunks):
        if hunk.start > n + 1:
            raise PatchApplyError(idx, f"start {hunk.start} beyond {n}-line file")
        if hunk.end > n:
            raise PatchApplyError(idx, f"end {hunk.end} beyond {n}-line file")
    out = list(file.lines)
    for hunk in reversed(patch.hunks):
        out[hunk.start - 1 : hunk.end] = hunk.replacement
    return SourceFile(path=file.path, lines=tuple(out))


def _normalized(lines: tuple[str, ...]) -> tuple[str, ...]:
    # At most one trailing empty line ignored: serialization noise, not code.
    if lines and lines[-1] == "":
        return lines[:-1]
    return lines


def exact_match(candidate: SourceFile, ground_truth: SourceFile) -> bool:
    """Strict line-for-line equality, modulo one trailing empty line per side."""
    return _normalized(candidate.lines) == _normalized(ground_truth.lines)


def post_apply_positions(patch: LineDiffPatch) -> list[tuple[int, int]]:
    """1-based line positions each hunk's replacement occupies after applying.

    For an empty replacement the range is (p, p-1): zero lines at position p.
    """
    positions: list[tuple[int, int]] = []
    offset = 0
    for hunk in patch.hunks:
        first = hunk.start + offset
        last = first + len(hunk.replacement) - 1
        positions.append((first, last))
        offset += len(hunk.replacement) - hunk.original_span
    return positions


def _find_contiguous(haystack: tuple[str, ...], needle: tuple[str, ...]) -> int | None:
    """1-based position of the first contiguous occurrence, or None."""
    n, k = len(haystack), len(needle)
    for i in range(n - k + 1):
        if haystack[i : i + k] == needle:
            return i + 1
    return None


def detect_applied(
    committed: SourceFile,
    patch: LineDiffPatch,
    mode: Literal["strict", "content"] = "strict",
) -> AppliedVerdict:
    """Heuristically decide whether `patch` appears in a committed file.

    Strict mode requires every replacement verbatim at its expected
    post-application positions. Content mode additionally accepts every
    non-empty replacement occurring as a contiguous block anywhere in the
    file (the copy-paste case, where surrounding edits shifted positions).
    Deliberately position/content-literal: moved-and-reworked patches are
    not detected.
    """
    if mode not in ("strict", "content"):
        raise ValueError(f"unknown mode: {mode!r}")

    positions = post_apply_positions(patch)
    at_lines = True
    span_first: int | None = None
    span_last: int | None = None
    for hunk, (first, last) in zip(patch.hunks, positions):
        if not hunk.replacement:
            continue
        if first < 1 or last > len(committed.lines):
            at_lines = False
            break
        if committed.lines[first - 1 : last] != hunk.replacement:
            at_lines = False
            break
        span_first = first if span_first is None else min(span_first, first)
        span_last = last if span_last is None else max(span_last, last)
    if at_lines:
        matched = (span_first, span_last) if span_first is not None else None
        return AppliedVerdict(status=VerdictStatus.APPLIED_AT_LINES, matched_lines=matched)

    if mode == "content":
        first_match: tuple[int, int] | None = None
        all_found = True
        for hunk in patch.hunks:
            if not hunk.replacement:
                continue
            pos = _find_contiguous(committed.lines, hunk.replacement)
            if pos is None:
                all_found = False
                break
            if first_match is None:
                first_match = (pos, pos + len(hunk.replacement) - 1)
        if all_found:
            return AppliedVerdict(
                status=VerdictStatus.APPLIED_BY_CONTENT, matched_lines=first_match
            )

    return AppliedVerdict(status=VerdictStatus.NOT_DETECTED)


def patch_between(original: SourceFile, target: SourceFile) -> LineDiffPatch:
    """Compute a patch transforming `original` into `target`.

    Convenience for corpus construction and replay fixtures; apply_patch of
    the result reproduces `target` exactly.
    """
    matcher = difflib.SequenceMatcher(a=original.lines, b=target.lines, autojunk=False)
    hunks: list[Hunk] = []
    for tag, i1, i2, j1, j2 in matcher.get_opcodes():
        if tag == "equal":
            continue
        # i1/i2 are 0-based half-open over the original; insert has i1 == i2.
        hunks.append(Hunk(start=i1 + 1, end=i2, replacement=tuple(target.lines[j1:j2])))
    return LineDiffPatch(hunks=tuple(hunks))
