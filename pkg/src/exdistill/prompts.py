"""Few-shot prompt construction for explanation generation and prompting baselines.

Four prompt styles share the same question block layout and differ only in how
demonstration answers and the trailing target block are spelled:

  standard                   A: <answer>                      target ends "A:"
  chain_of_thought           A: <explanation> <answer sentence>   target ends "A:"
  rationalization            A: <answer> / Explanation: <text>    target ends "Explanation:"
  explanation_after_answer   same demo block as rationalization,  target ends "A:"

Blocks are separated by one blank line; generation stops at the next question
cue. All builders are pure functions of their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .core import Answer, DatasetKind, Demonstration, Instance, render_answer
from .errors import KindMismatch, PromptTooLong, TooFewDemos

STOP_SEQUENCE = "\n\nQ:"

ANSWER_CUE = "A:"
EXPLANATION_CUE = "Explanation:"
CHOICES_CUE = "Answer Choices:"
YES_NO_QUESTION_PREFIX = "Yes or no: "


class PromptStyle(str, Enum):
    STANDARD = "standard"
    CHAIN_OF_THOUGHT = "chain_of_thought"
    RATIONALIZATION = "rationalization"
    EXPLANATION_AFTER_ANSWER = "explanation_after_answer"


@dataclass(frozen=True)
class Prompt:
    text: str
    style: PromptStyle
    instance_id: str
    stop_sequence: str = STOP_SEQUENCE


def answer_connective(kind: DatasetKind) -> str:
    """Word joining an explanation to its answer sentence in worked examples."""
    return "Therefore," if kind is DatasetKind.MULTI_CHOICE_5 else "So"


def answer_sentence(answer: Answer, kind: DatasetKind) -> str:
    return f"{answer_connective(kind)} the answer is {render_answer(answer, kind)}."


def _check_kind(inst: Instance, kind: DatasetKind, role: str) -> None:
    letters = tuple(c.letter for c in inst.choices)
    if letters != kind.letters:
        raise KindMismatch(
            f"{role} {inst.id!r} has choice letters {letters!r}, "
            f"expected {kind.letters!r} for {kind.value}")


def question_block(inst: Instance, kind: DatasetKind) -> str:
    """The "Q:" block shared by every style: question plus any choice list."""
    _check_kind(inst, kind, "instance")
    if kind is DatasetKind.YES_NO:
        return f"Q: {YES_NO_QUESTION_PREFIX}{inst.question}"
    choice_line = " ".join(f"({c.letter}) {c.text}" for c in inst.choices)
    return f"Q: {inst.question}\n{CHOICES_CUE}\n{choice_line}"


def _capitalize(text: str) -> str:
    return text[:1].upper() + text[1:] if text else text


def demo_block(demo: Demonstration, kind: DatasetKind, style: PromptStyle) -> str:
    inst = demo.instance
    gold = inst.require_gold()
    head = question_block(inst, kind)
    if style is PromptStyle.STANDARD:
        return f"{head}\n{ANSWER_CUE} {render_answer(gold, kind)}"
    if style is PromptStyle.CHAIN_OF_THOUGHT:
        body = f"{_capitalize(demo.explanation)} {answer_sentence(gold, kind)}"
        return f"{head}\n{ANSWER_CUE} {body}"
    # rationalization and explanation_after_answer share the demo layout
    return (f"{head}\n{ANSWER_CUE} {render_answer(gold, kind)}\n"
            f"{EXPLANATION_CUE} {demo.explanation}")


def render_demos(demos: Sequence[Demonstration], kind: DatasetKind,
                 style: PromptStyle) -> str:
    """The demonstration prefix: every demo block joined by blank lines."""
    if not demos:
        raise TooFewDemos(found=0, required=1)
    return "\n\n".join(demo_block(d, kind, style) for d in demos)


def target_block(inst: Instance, kind: DatasetKind, style: PromptStyle) -> str:
    """The trailing block for the instance the model should complete.

    The gold answer appears only in rationalization targets (before the
    explanation cue); no style ends the prompt with the gold answer.
    """
    head = question_block(inst, kind)
    if style is PromptStyle.RATIONALIZATION:
        gold = inst.require_gold()
        return f"{head}\n{ANSWER_CUE} {render_answer(gold, kind)}\n{EXPLANATION_CUE}"
    return f"{head}\n{ANSWER_CUE}"


def build_prompt(demos: Sequence[Demonstration], inst: Instance, kind: DatasetKind,
                 style: PromptStyle, max_length: int | None = None) -> Prompt:
    """Assemble the full prompt for one instance.

    Args:
        demos: worked examples, used in the order given.
        inst: the instance to complete.
        kind: dataset shape; demos and instance must both match it.
        style: prompt style to render.
        max_length: optional character budget; exceeding it raises PromptTooLong.
    """
    for demo in demos:
        _check_kind(demo.instance, kind, "demonstration")
    text = render_demos(demos, kind, style) + "\n\n" + target_block(inst, kind, style)
    if max_length is not None and len(text) > max_length:
        raise PromptTooLong(length=len(text), limit=max_length)
    return Prompt(text=text, style=style, instance_id=inst.id)


def build_standard_prompt(demos: Sequence[Demonstration], inst: Instance,
                          kind: DatasetKind, max_length: int | None = None) -> Prompt:
    return build_prompt(demos, inst, kind, PromptStyle.STANDARD, max_length)


def build_cot_prompt(demos: Sequence[Demonstration], inst: Instance,
                     kind: DatasetKind, max_length: int | None = None) -> Prompt:
    return build_prompt(demos, inst, kind, PromptStyle.CHAIN_OF_THOUGHT, max_length)


def build_rationalization_prompt(demos: Sequence[Demonstration], inst: Instance,
                                 kind: DatasetKind, max_length: int | None = None) -> Prompt:
    """Prompt that conditions the explanation on the instance's gold answer."""
    return build_prompt(demos, inst, kind, PromptStyle.RATIONALIZATION, max_length)


def build_explanation_after_answer_prompt(demos: Sequence[Demonstration], inst: Instance,
                                          kind: DatasetKind,
                                          max_length: int | None = None) -> Prompt:
    return build_prompt(demos, inst, kind, PromptStyle.EXPLANATION_AFTER_ANSWER, max_length)
