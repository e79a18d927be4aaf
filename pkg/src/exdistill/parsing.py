"""Parsers that split model completions into explanation and answer parts.

The pivot is the final occurrence of the answer marker "the answer is"
(case-insensitive). Text before the marker's sentence is the explanation;
text after the marker is matched against the instance's answer space, first
by parenthesized choice letter, then by exact normalized choice text.
Parsers never raise on model output; failures are reported in the status.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .core import Answer, DatasetKind, Instance, normalize_answer

ANSWER_MARKER = "the answer is"

_MARKER_RE = re.compile(re.escape(ANSWER_MARKER), re.IGNORECASE)
_LETTER_RE = re.compile(r"\(([a-z])\)")
_SENTENCE_END_RE = re.compile(r"[.!?]")

# Optional hook for looser text matching; receives (tail, instance, kind) once
# exact matching has failed. Disabled unless explicitly supplied.
FuzzyMatcher = Callable[[str, Instance, DatasetKind], Answer | None]


class ParseStatus(str, Enum):
    OK = "ok"
    NO_ANSWER_FOUND = "no_answer_found"
    AMBIGUOUS = "ambiguous"
    EMPTY = "empty"


@dataclass(frozen=True)
class ParsedCompletion:
    explanation: str | None
    prediction: Answer | None
    status: ParseStatus

    @property
    def ok(self) -> bool:
        return self.status is ParseStatus.OK


class _Ambiguous:
    """Sentinel distinguishing conflicting matches from no match."""


_AMBIGUOUS = _Ambiguous()


def _match_tail(tail: str, inst: Instance, kind: DatasetKind,
                fuzzy: FuzzyMatcher | None = None) -> Answer | None | _Ambiguous:
    if kind is DatasetKind.YES_NO:
        word = normalize_answer(tail)
        if word in ("yes", "no"):
            return Answer(letter=None, text=word)
        return fuzzy(tail, inst, kind) if fuzzy else None
    letters = [m for m in _LETTER_RE.findall(tail) if m in kind.letters]
    distinct = sorted(set(letters))
    if len(distinct) > 1:
        return _AMBIGUOUS
    if len(distinct) == 1:
        choice = inst.choice_by_letter(distinct[0])
        if choice is not None:
            return Answer(letter=choice.letter, text=choice.text)
        return None
    # no usable letter: accept only an exact normalized choice text
    norm = normalize_answer(tail)
    for choice in inst.choices:
        if normalize_answer(choice.text) == norm:
            return Answer(letter=choice.letter, text=choice.text)
    return fuzzy(tail, inst, kind) if fuzzy else None


def _explanation_before(text: str, marker_start: int) -> str:
    """Everything before the sentence that holds the answer marker."""
    head = text[:marker_start]
    boundary = None
    for match in _SENTENCE_END_RE.finditer(head):
        boundary = match.end()
    if boundary is None:
        return ""
    return head[:boundary].strip()


def parse_chain_of_thought(completion: str, inst: Instance, kind: DatasetKind,
                           fuzzy: FuzzyMatcher | None = None) -> ParsedCompletion:
    """Split a reasoning completion into (explanation, predicted answer).

    The final answer marker wins when the marker appears several times; the
    explanation excludes the marker's own sentence and anything after it.
    Total over arbitrary input: unparseable text comes back with a non-ok
    status, never an exception.
    """
    text = completion.strip()
    if not text:
        return ParsedCompletion(None, None, ParseStatus.EMPTY)
    matches = list(_MARKER_RE.finditer(text))
    if not matches:
        return ParsedCompletion(None, None, ParseStatus.NO_ANSWER_FOUND)
    last = matches[-1]
    explanation = _explanation_before(text, last.start())
    matched = _match_tail(text[last.end():], inst, kind, fuzzy)
    if isinstance(matched, _Ambiguous):
        return ParsedCompletion(explanation, None, ParseStatus.AMBIGUOUS)
    if matched is None:
        return ParsedCompletion(explanation, None, ParseStatus.NO_ANSWER_FOUND)
    return ParsedCompletion(explanation, matched, ParseStatus.OK)


def parse_rationalization(completion: str) -> str:
    """A rationalization completion is the explanation itself, trimmed."""
    return completion.strip()


def extract_answer(text: str, inst: Instance, kind: DatasetKind,
                   fuzzy: FuzzyMatcher | None = None) -> Answer | None:
    """Best-effort answer extraction from any generation.

    Uses the tail after the final answer marker when one is present, else the
    whole text. Conflicting letters yield None rather than a guess.
    """
    stripped = text.strip()
    if not stripped:
        return None
    matches = list(_MARKER_RE.finditer(stripped))
    tail = stripped[matches[-1].end():] if matches else stripped
    matched = _match_tail(tail, inst, kind, fuzzy)
    if isinstance(matched, _Ambiguous):
        return None
    return matched


def parse_answer_first(completion: str, inst: Instance, kind: DatasetKind,
                       fuzzy: FuzzyMatcher | None = None) -> Answer | None:
    """Answer extraction for completions that lead with the answer.

    Reads only the head of the completion: everything before an explanation
    cue or the first line break, whichever comes first.
    """
    head = completion.split("Explanation:", 1)[0]
    for line in head.splitlines():
        if line.strip():
            return extract_answer(line, inst, kind, fuzzy)
    return None
