"""Shared test machinery: synthetic datasets, planted replay caches, reporting.

The planted fixture is the workhorse: a synthetic five-way dataset whose
reasoning completions are pre-recorded into a replay directory with a known
correct/incorrect pattern, so annotation runs are fully deterministic and an
independent recount of the plan is available as an oracle.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import pytest

from exdistill.core import (
    Answer,
    Choice,
    Dataset,
    DatasetKind,
    Demonstration,
    Instance,
)
from exdistill.gateway import DecodeParams, write_completion_record
from exdistill.prompts import (
    PromptStyle,
    answer_connective,
    build_prompt,
    render_answer,
)

GOLDEN_DIR = Path(__file__).parent / "golden"

LETTERS5 = ("a", "b", "c", "d", "e")


def make_mc5_instance(index: int, gold_letter: str = "c") -> Instance:
    choices = tuple(Choice(letter, f"option {letter}{index}") for letter in LETTERS5)
    gold = next(c for c in choices if c.letter == gold_letter)
    return Instance(id=f"syn-{index:04d}",
                    question=f"Synthetic question number {index}?",
                    choices=choices,
                    gold=Answer(gold.letter, gold.text))


def make_mc5_dataset(n: int, gold_letter: str = "c") -> Dataset:
    return Dataset(DatasetKind.MULTI_CHOICE_5,
                   tuple(make_mc5_instance(i, gold_letter) for i in range(n)))


def make_mc5_demos(n: int = 7) -> tuple[Demonstration, ...]:
    return tuple(
        Demonstration(make_mc5_instance(1000 + i),
                      f"demo reasoning number {i} supports the right option.")
        for i in range(n))


@dataclass(frozen=True)
class PlantedPlan:
    """What the replay directory was seeded with, for independent recounts."""

    dataset: Dataset
    demos: tuple[Demonstration, ...]
    replay_root: Path
    correct_ids: frozenset[str]
    cot_explanations: dict[str, str]
    rp_explanations: dict[str, str]


def cot_completion(inst: Instance, kind: DatasetKind, answer: Answer,
                   explanation: str) -> str:
    connective = answer_connective(kind)
    return (f" {explanation} {connective} the answer is "
            f"{render_answer(answer, kind)}.")


def plant_fixture(tmp_path: Path, n: int = 200, n_correct: int = 120,
                  params: DecodeParams = DecodeParams()) -> PlantedPlan:
    """Seed a replay directory for a synthetic dataset.

    The first n_correct instances get reasoning completions that name the
    gold answer; the rest name a wrong choice. Every instance also gets an
    answer-conditioned completion so backup annotation always succeeds.
    """
    dataset = make_mc5_dataset(n)
    demos = make_mc5_demos()
    kind = dataset.kind
    root = tmp_path / "replay"
    correct_ids = set()
    cot_explanations: dict[str, str] = {}
    rp_explanations: dict[str, str] = {}
    for i, inst in enumerate(dataset):
        gold = inst.require_gold()
        if i < n_correct:
            answer = gold
            explanation = f"Good reasoning for item {i}."
            correct_ids.add(inst.id)
        else:
            wrong = inst.choice_by_letter("a" if gold.letter != "a" else "b")
            answer = Answer(wrong.letter, wrong.text)
            explanation = f"Flawed reasoning for item {i}."
        cot_explanations[inst.id] = explanation
        prompt = build_prompt(demos, inst, kind, PromptStyle.CHAIN_OF_THOUGHT)
        write_completion_record(root, prompt.text, params, "replay",
                                cot_completion(inst, kind, answer, explanation))
        rp_text = f"rationalized support for item {i}."
        rp_explanations[inst.id] = rp_text
        rp_prompt = build_prompt(demos, inst, kind, PromptStyle.RATIONALIZATION)
        write_completion_record(root, rp_prompt.text, params, "replay", f" {rp_text}")
    return PlantedPlan(dataset, demos, root, frozenset(correct_ids),
                       cot_explanations, rp_explanations)


@pytest.fixture(scope="session")
def planted(tmp_path_factory) -> PlantedPlan:
    return plant_fixture(tmp_path_factory.mktemp("planted"))


# ---------------------------------------------------------------------------
# Acceptance criterion reporting: one line per criterion after the run.

_CRITERIA = {
    "p1": "prompt rendering reproduces the golden transcripts",
    "p2": "reasoning parser recovers every worked example exactly",
    "p3": "filtered annotation accepts/rejects per the planted pattern",
    "p4": "backup annotation decomposes into filtered + rationalized",
    "p5": "emitted corpora keep targets recoverable and mask unexplained",
    "p6": "grid search reproduces the per-size weight pattern, ties break low",
    "p7": "preference aggregation hits the published split exactly",
    "p8": "second identical run is served entirely from cache, byte-identical",
    "p9": "large-model accuracies are planted, not reproduced; spread math exact",
}

_STATUS: dict[str, list[bool]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    match = re.match(r"test_(p\d)", name)
    if match:
        _STATUS.setdefault(match.group(1), []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _STATUS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for key in sorted(_CRITERIA):
        outcomes = _STATUS.get(key)
        if outcomes is None:
            verdict = "NOT RUN"
        else:
            verdict = "PASS" if all(outcomes) else "FAIL"
        terminalreporter.write_line(f"{key.upper()} {_CRITERIA[key]}: {verdict}")
