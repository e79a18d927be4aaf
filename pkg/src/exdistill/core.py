"""Core data model: datasets, instances, demonstrations, answers.

File formats (one JSON object per line, UTF-8):

  dataset record   {"id": str, "question": str,
                    "choices": [{"letter": str, "text": str}, ...],
                    "gold": {"letter": str | null, "text": str} | null}
  demo record      same as dataset record plus {"explanation": str}

Yes/no datasets carry an empty choices list and a null gold letter; the gold
text is "yes" or "no". Multi-choice datasets label choices with consecutive
lowercase letters starting at "a", and the gold letter must name one of them.
"""
from __future__ import annotations

import json
import logging
import string
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

from .errors import GoldNotInChoices, MalformedRecord, MissingGold, TooFewDemos

logger = logging.getLogger(__name__)

_TRAILING_PUNCT = ".,!?;:"


class DatasetKind(str, Enum):
    """Shape of a question answering dataset."""

    MULTI_CHOICE_5 = "multi_choice_5"
    YES_NO = "yes_no"
    MULTI_CHOICE_4 = "multi_choice_4"

    @property
    def choice_count(self) -> int:
        return {"multi_choice_5": 5, "yes_no": 0, "multi_choice_4": 4}[self.value]

    @property
    def letters(self) -> tuple[str, ...]:
        return tuple(string.ascii_lowercase[: self.choice_count])


def normalize_answer(text: str) -> str:
    """Canonical form used for all answer comparisons.

    Casefolds, collapses whitespace runs and strips trailing punctuation,
    iterated to a fixed point so the function is idempotent.
    """
    prev = None
    while text != prev:
        prev = text
        text = " ".join(text.casefold().split()).rstrip(_TRAILING_PUNCT).rstrip()
    return text


@dataclass(frozen=True)
class Choice:
    letter: str
    text: str


@dataclass(frozen=True)
class Answer:
    """An answer to an instance: a choice letter (multi-choice) and its text.

    Yes/no answers carry letter None and text "yes" or "no".
    """

    letter: str | None
    text: str

    def normalized_text(self) -> str:
        return normalize_answer(self.text)

    def agrees_with(self, other: "Answer") -> bool:
        """Equality under normalization; letters dominate when both are present."""
        if self.letter is not None and other.letter is not None:
            return self.letter == other.letter
        return self.normalized_text() == other.normalized_text()


@dataclass(frozen=True)
class Instance:
    id: str
    question: str
    choices: tuple[Choice, ...]
    gold: Answer | None

    def require_gold(self) -> Answer:
        if self.gold is None:
            raise MissingGold(f"instance {self.id!r} has no gold answer")
        return self.gold

    def choice_by_letter(self, letter: str) -> Choice | None:
        for choice in self.choices:
            if choice.letter == letter:
                return choice
        return None


@dataclass(frozen=True)
class Demonstration:
    """A worked example: an instance plus its human-written explanation."""

    instance: Instance
    explanation: str


@dataclass(frozen=True)
class Dataset:
    kind: DatasetKind
    instances: tuple[Instance, ...]

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[Instance]:
        return iter(self.instances)

    def by_id(self) -> dict[str, Instance]:
        return {inst.id: inst for inst in self.instances}


def render_answer(answer: Answer, kind: DatasetKind) -> str:
    """Render a gold or predicted answer the way prompts and targets spell it.

    Five-way choices read "text (letter)", four-way choices "(letter) text",
    and yes/no answers are the bare word.
    """
    if kind is DatasetKind.YES_NO:
        return answer.text
    if answer.letter is None:
        raise MissingGold(f"answer {answer.text!r} lacks a choice letter")
    if kind is DatasetKind.MULTI_CHOICE_5:
        return f"{answer.text} ({answer.letter})"
    return f"({answer.letter}) {answer.text}"


# ---------------------------------------------------------------------------
# JSONL input/output


def _parse_answer(obj: dict | None) -> Answer | None:
    if obj is None:
        return None
    return Answer(letter=obj.get("letter"), text=obj["text"])


def _validate_instance(inst: Instance, kind: DatasetKind, where: tuple[str, int]) -> None:
    path, line_no = where
    expected = kind.letters
    letters = tuple(c.letter for c in inst.choices)
    if letters != expected:
        raise MalformedRecord(
            path, line_no,
            f"choice letters {letters!r} do not match expected {expected!r}")
    if inst.gold is None:
        return
    if kind is DatasetKind.YES_NO:
        if inst.gold.letter is not None:
            raise MalformedRecord(path, line_no, "yes/no gold must not carry a letter")
        if normalize_answer(inst.gold.text) not in ("yes", "no"):
            raise GoldNotInChoices(inst.id, f"gold text {inst.gold.text!r} is not yes/no")
        return
    if inst.gold.letter is None:
        raise MalformedRecord(path, line_no, "multi-choice gold must carry a letter")
    chosen = inst.choice_by_letter(inst.gold.letter)
    if chosen is None:
        raise GoldNotInChoices(inst.id, f"letter {inst.gold.letter!r}")
    if normalize_answer(chosen.text) != normalize_answer(inst.gold.text):
        raise GoldNotInChoices(
            inst.id, f"gold text {inst.gold.text!r} != choice text {chosen.text!r}")


def _record_to_instance(rec: dict, kind: DatasetKind, where: tuple[str, int]) -> Instance:
    path, line_no = where
    try:
        inst = Instance(
            id=rec["id"],
            question=rec["question"],
            choices=tuple(Choice(c["letter"], c["text"]) for c in rec.get("choices", [])),
            gold=_parse_answer(rec.get("gold")),
        )
    except (KeyError, TypeError) as exc:
        raise MalformedRecord(path, line_no, f"missing or ill-typed field: {exc}") from exc
    if not isinstance(inst.id, str) or not isinstance(inst.question, str):
        raise MalformedRecord(path, line_no, "id and question must be strings")
    _validate_instance(inst, kind, where)
    return inst


def _iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(str(path), line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise MalformedRecord(str(path), line_no, "record is not an object")
            yield line_no, obj


def load_dataset(path: str | Path, kind: DatasetKind) -> Dataset:
    """Read a dataset file, validating every record.

    Raises MalformedRecord (with line number) on schema violations and
    GoldNotInChoices when a gold answer does not name a listed choice.
    An empty file yields an empty dataset with a warning.
    """
    instances = []
    seen: set[str] = set()
    for line_no, rec in _iter_jsonl(path):
        inst = _record_to_instance(rec, kind, (str(path), line_no))
        if inst.id in seen:
            logger.warning("duplicate instance id %r in %s", inst.id, path)
        seen.add(inst.id)
        instances.append(inst)
    if not instances:
        logger.warning("dataset file %s holds no instances", path)
    logger.info("loaded %d instances from %s", len(instances), path)
    return Dataset(kind=kind, instances=tuple(instances))


def write_dataset(path: str | Path, dataset: Dataset) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for inst in dataset:
            handle.write(json.dumps(instance_to_record(inst), ensure_ascii=False) + "\n")


def instance_to_record(inst: Instance) -> dict:
    gold = None
    if inst.gold is not None:
        gold = {"letter": inst.gold.letter, "text": inst.gold.text}
    return {
        "id": inst.id,
        "question": inst.question,
        "choices": [{"letter": c.letter, "text": c.text} for c in inst.choices],
        "gold": gold,
    }


def load_demos(path: str | Path, kind: DatasetKind, minimum: int = 7) -> tuple[Demonstration, ...]:
    """Read a demonstration file; every record must carry a non-empty explanation."""
    demos = []
    for line_no, rec in _iter_jsonl(path):
        where = (str(path), line_no)
        explanation = rec.get("explanation")
        if not isinstance(explanation, str) or not explanation.strip():
            raise MalformedRecord(*where, "demonstration lacks an explanation")
        inst = _record_to_instance(rec, kind, where)
        if inst.gold is None:
            raise MalformedRecord(*where, "demonstration lacks a gold answer")
        demos.append(Demonstration(instance=inst, explanation=explanation))
    if len(demos) < minimum:
        raise TooFewDemos(found=len(demos), required=minimum)
    return tuple(demos)


def write_demos(path: str | Path, demos: Iterable[Demonstration]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for demo in demos:
            rec = instance_to_record(demo.instance)
            rec["explanation"] = demo.explanation
            handle.write(json.dumps(rec, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Bundled demonstrations

BUNDLED_DEMO_KINDS = {
    "commonsenseqa": DatasetKind.MULTI_CHOICE_5,
    "strategyqa": DatasetKind.YES_NO,
    "openbookqa": DatasetKind.MULTI_CHOICE_4,
}


def load_bundled_demos(name: str) -> tuple[DatasetKind, tuple[Demonstration, ...]]:
    """Load one of the packaged 7-shot demonstration sets by dataset name."""
    try:
        kind = BUNDLED_DEMO_KINDS[name]
    except KeyError:
        raise KeyError(
            f"no bundled demonstrations named {name!r}; "
            f"choose from {sorted(BUNDLED_DEMO_KINDS)}") from None
    ref = resources.files("exdistill").joinpath("fixtures", f"{name}_demos.jsonl")
    with resources.as_file(ref) as real_path:
        return kind, load_demos(real_path, kind)
