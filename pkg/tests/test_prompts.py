"""Prompt rendering against golden transcripts and structural rules."""
from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from exdistill.core import Answer, DatasetKind, load_bundled_demos
from exdistill.errors import KindMismatch, MissingGold, PromptTooLong, TooFewDemos
from exdistill.prompts import (
    STOP_SEQUENCE,
    PromptStyle,
    answer_connective,
    answer_sentence,
    build_cot_prompt,
    build_explanation_after_answer_prompt,
    build_prompt,
    build_rationalization_prompt,
    build_standard_prompt,
    demo_block,
    question_block,
    render_demos,
    target_block,
)

from .conftest import GOLDEN_DIR, make_mc5_demos, make_mc5_instance

DATASETS = ("commonsenseqa", "strategyqa", "openbookqa")
GOLDEN_STYLES = {
    "standard": PromptStyle.STANDARD,
    "chain_of_thought": PromptStyle.CHAIN_OF_THOUGHT,
    "rationalization": PromptStyle.RATIONALIZATION,
}


@pytest.mark.parametrize("dataset_name", DATASETS)
@pytest.mark.parametrize("style_name", sorted(GOLDEN_STYLES))
def test_demo_prefix_matches_golden(dataset_name, style_name):
    kind, demos = load_bundled_demos(dataset_name)
    golden = (GOLDEN_DIR / f"{dataset_name}_{style_name}.txt").read_text(encoding="utf-8")
    rendered = render_demos(demos, kind, GOLDEN_STYLES[style_name]) + "\n"
    assert rendered == golden


def test_question_block_shapes():
    inst = make_mc5_instance(3)
    block = question_block(inst, DatasetKind.MULTI_CHOICE_5)
    lines = block.splitlines()
    assert lines[0] == f"Q: {inst.question}"
    assert lines[1] == "Answer Choices:"
    # all five choices share one line
    assert lines[2].count("(") == 5
    assert len(lines) == 3


def test_yes_no_question_carries_prefix():
    kind, demos = load_bundled_demos("strategyqa")
    block = question_block(demos[0].instance, kind)
    assert block.startswith("Q: Yes or no: ")
    assert "\n" not in block


def test_answer_sentence_connectives():
    five = answer_sentence(Answer("e", "blotter"), DatasetKind.MULTI_CHOICE_5)
    assert five == "Therefore, the answer is blotter (e)."
    assert answer_connective(DatasetKind.YES_NO) == "So"
    assert answer_connective(DatasetKind.MULTI_CHOICE_4) == "So"


def test_target_blocks_end_with_their_cue():
    inst = make_mc5_instance(1)
    for style in (PromptStyle.STANDARD, PromptStyle.CHAIN_OF_THOUGHT,
                  PromptStyle.EXPLANATION_AFTER_ANSWER):
        assert target_block(inst, DatasetKind.MULTI_CHOICE_5, style).endswith("\nA:")
    rationalized = target_block(inst, DatasetKind.MULTI_CHOICE_5,
                                PromptStyle.RATIONALIZATION)
    assert rationalized.endswith("\nExplanation:")
    assert f"A: {inst.gold.text} ({inst.gold.letter})" in rationalized


def test_gold_never_trails_the_prompt():
    # only the rationalization target names the gold, and never as the last line
    demos = make_mc5_demos()
    inst = make_mc5_instance(7)
    for style in PromptStyle:
        prompt = build_prompt(demos, inst, DatasetKind.MULTI_CHOICE_5, style)
        assert not prompt.text.rstrip().endswith(inst.gold.text)


def test_full_prompt_layout():
    demos = make_mc5_demos()
    inst = make_mc5_instance(42)
    prompt = build_cot_prompt(demos, inst, DatasetKind.MULTI_CHOICE_5)
    blocks = prompt.text.split("\n\n")
    assert len(blocks) == 8
    assert blocks[-1].endswith("A:")
    assert prompt.stop_sequence == STOP_SEQUENCE == "\n\nQ:"
    assert prompt.instance_id == inst.id
    assert prompt.style is PromptStyle.CHAIN_OF_THOUGHT


def test_builders_are_deterministic():
    kind, demos = load_bundled_demos("openbookqa")
    inst = demos[3].instance
    for builder in (build_standard_prompt, build_cot_prompt,
                    build_rationalization_prompt,
                    build_explanation_after_answer_prompt):
        assert builder(demos, inst, kind).text == builder(demos, inst, kind).text


def test_explanation_after_answer_demos_match_rationalization():
    kind, demos = load_bundled_demos("commonsenseqa")
    for demo in demos:
        assert (demo_block(demo, kind, PromptStyle.EXPLANATION_AFTER_ANSWER)
                == demo_block(demo, kind, PromptStyle.RATIONALIZATION))
    inst = demos[0].instance
    assert target_block(inst, kind, PromptStyle.EXPLANATION_AFTER_ANSWER).endswith("A:")


def test_cot_demo_capitalizes_explanation():
    kind, demos = load_bundled_demos("commonsenseqa")
    demo = demos[0]
    assert demo.explanation[0].islower()
    block = demo_block(demo, kind, PromptStyle.CHAIN_OF_THOUGHT)
    embedded = block.split("\nA: ", 1)[1]
    assert embedded[0].isupper()


def test_kind_mismatch_detected():
    kind, demos = load_bundled_demos("commonsenseqa")
    _, obqa_demos = load_bundled_demos("openbookqa")
    with pytest.raises(KindMismatch):
        build_cot_prompt(demos, obqa_demos[0].instance, kind)
    with pytest.raises(KindMismatch):
        build_cot_prompt(obqa_demos, demos[0].instance, kind)


def test_length_budget_enforced():
    demos = make_mc5_demos()
    inst = make_mc5_instance(1)
    with pytest.raises(PromptTooLong) as err:
        build_cot_prompt(demos, inst, DatasetKind.MULTI_CHOICE_5, max_length=100)
    assert err.value.limit == 100 and err.value.length > 100


def test_empty_demos_rejected():
    with pytest.raises(TooFewDemos):
        render_demos((), DatasetKind.MULTI_CHOICE_5, PromptStyle.STANDARD)


def test_rationalization_requires_gold():
    inst = make_mc5_instance(1)
    bare = type(inst)(inst.id, inst.question, inst.choices, None)
    with pytest.raises(MissingGold):
        target_block(bare, DatasetKind.MULTI_CHOICE_5, PromptStyle.RATIONALIZATION)


@given(st.integers(min_value=0, max_value=5000))
def test_prompt_is_pure_across_instances(index):
    demos = make_mc5_demos()
    inst = make_mc5_instance(index)
    first = build_standard_prompt(demos, inst, DatasetKind.MULTI_CHOICE_5).text
    assert first == build_standard_prompt(demos, inst, DatasetKind.MULTI_CHOICE_5).text
    assert first.count("\n\n") == 7
