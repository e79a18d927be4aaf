"""Answer normalization, dataset IO, and validation."""
from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from exdistill.core import (
    Answer,
    BUNDLED_DEMO_KINDS,
    Choice,
    DatasetKind,
    Instance,
    instance_to_record,
    load_bundled_demos,
    load_dataset,
    load_demos,
    normalize_answer,
    render_answer,
    write_dataset,
)
from exdistill.errors import (
    GoldNotInChoices,
    MalformedRecord,
    MissingGold,
    TooFewDemos,
)

from .conftest import make_mc5_dataset, make_mc5_instance


class TestNormalizeAnswer:
    def test_lowercases_and_collapses_whitespace(self):
        assert normalize_answer("  Radio   Shack ") == "radio shack"

    def test_strips_trailing_punctuation(self):
        assert normalize_answer("blotter.") == "blotter"
        assert normalize_answer("Yes!") == "yes"

    def test_strips_stacked_punctuation_and_space(self):
        # rstrip alone would leave "no ." half-cleaned; the fixed point loop
        # keeps eating until nothing changes
        assert normalize_answer("no .") == "no"
        assert normalize_answer("maybe?! ") == "maybe"

    def test_interior_punctuation_survives(self):
        assert normalize_answer("u.s. mail") == "u.s. mail"
        assert normalize_answer("0.6 g/cm^3") == "0.6 g/cm^3"

    @given(st.text(max_size=80))
    def test_idempotent(self, text):
        once = normalize_answer(text)
        assert normalize_answer(once) == once

    @given(st.text(max_size=80))
    def test_output_has_no_edge_noise(self, text):
        out = normalize_answer(text)
        assert out == out.strip()
        assert not out.endswith(tuple(".,!?;:")) or out == ""


class TestAnswer:
    def test_letters_dominate_when_both_present(self):
        assert Answer("a", "bank").agrees_with(Answer("a", "riverbank"))
        assert not Answer("a", "bank").agrees_with(Answer("b", "bank"))

    def test_text_comparison_when_letter_missing(self):
        assert Answer(None, "Yes").agrees_with(Answer(None, "yes"))
        assert Answer(None, "bank.").agrees_with(Answer("a", "Bank")) is True

    def test_yes_no_disagreement(self):
        assert not Answer(None, "yes").agrees_with(Answer(None, "no"))


class TestRenderAnswer:
    def test_five_way_reads_text_then_letter(self):
        assert render_answer(Answer("e", "blotter"),
                             DatasetKind.MULTI_CHOICE_5) == "blotter (e)"

    def test_four_way_reads_letter_then_text(self):
        assert render_answer(Answer("d", "inland storms"),
                             DatasetKind.MULTI_CHOICE_4) == "(d) inland storms"

    def test_yes_no_is_bare(self):
        assert render_answer(Answer(None, "no"), DatasetKind.YES_NO) == "no"

    def test_multi_choice_without_letter_is_an_error(self):
        with pytest.raises(MissingGold):
            render_answer(Answer(None, "bank"), DatasetKind.MULTI_CHOICE_5)


class TestDatasetIO:
    def test_roundtrip(self, tmp_path):
        dataset = make_mc5_dataset(5)
        path = tmp_path / "data.jsonl"
        write_dataset(path, dataset)
        loaded = load_dataset(path, DatasetKind.MULTI_CHOICE_5)
        assert loaded.instances == dataset.instances

    def test_large_load_counts_every_line(self, tmp_path):
        dataset = make_mc5_dataset(9741)
        path = tmp_path / "big.jsonl"
        write_dataset(path, dataset)
        assert len(load_dataset(path, DatasetKind.MULTI_CHOICE_5)) == 9741

    def test_blank_lines_are_skipped(self, tmp_path):
        path = tmp_path / "data.jsonl"
        record = json.dumps(instance_to_record(make_mc5_instance(0)))
        path.write_text(f"\n{record}\n\n", encoding="utf-8")
        assert len(load_dataset(path, DatasetKind.MULTI_CHOICE_5)) == 1

    def test_bad_json_names_the_line(self, tmp_path):
        path = tmp_path / "data.jsonl"
        record = json.dumps(instance_to_record(make_mc5_instance(0)))
        path.write_text(f"{record}\nnot json\n", encoding="utf-8")
        with pytest.raises(MalformedRecord) as err:
            load_dataset(path, DatasetKind.MULTI_CHOICE_5)
        assert err.value.line_no == 2

    def test_wrong_letter_set_rejected(self, tmp_path):
        record = instance_to_record(make_mc5_instance(0))
        record["choices"] = record["choices"][:4]
        path = tmp_path / "data.jsonl"
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        with pytest.raises(MalformedRecord):
            load_dataset(path, DatasetKind.MULTI_CHOICE_5)

    def test_gold_must_name_a_choice(self, tmp_path):
        record = instance_to_record(make_mc5_instance(0))
        record["gold"] = {"letter": "a", "text": "something else entirely"}
        path = tmp_path / "data.jsonl"
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        with pytest.raises(GoldNotInChoices):
            load_dataset(path, DatasetKind.MULTI_CHOICE_5)

    def test_yes_no_gold_has_no_letter(self, tmp_path):
        record = {"id": "q1", "question": "Is water wet?", "choices": [],
                  "gold": {"letter": None, "text": "yes"}}
        path = tmp_path / "data.jsonl"
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        loaded = load_dataset(path, DatasetKind.YES_NO)
        assert loaded.instances[0].gold == Answer(None, "yes")


class TestDemos:
    def test_each_bundled_set_has_seven(self):
        for name, expected_kind in BUNDLED_DEMO_KINDS.items():
            kind, demos = load_bundled_demos(name)
            assert kind is expected_kind
            assert len(demos) == 7
            for demo in demos:
                assert demo.explanation
                assert demo.instance.gold is not None

    def test_unknown_bundle_name(self):
        with pytest.raises(KeyError):
            load_bundled_demos("quiz")

    def test_minimum_enforced(self, tmp_path):
        path = tmp_path / "demos.jsonl"
        lines = []
        for i in range(3):
            record = instance_to_record(make_mc5_instance(i))
            record["explanation"] = "some reasoning."
            lines.append(json.dumps(record))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(TooFewDemos) as err:
            load_demos(path, DatasetKind.MULTI_CHOICE_5)
        assert err.value.found == 3 and err.value.required == 7
        assert len(load_demos(path, DatasetKind.MULTI_CHOICE_5, minimum=3)) == 3

    def test_demo_without_explanation_rejected(self, tmp_path):
        path = tmp_path / "demos.jsonl"
        record = instance_to_record(make_mc5_instance(0))
        record["explanation"] = ""
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        with pytest.raises(MalformedRecord):
            load_demos(path, DatasetKind.MULTI_CHOICE_5, minimum=1)


def test_require_gold_raises_without_gold():
    inst = Instance("q", "?", tuple(Choice(l, l) for l in "abcde"), None)
    with pytest.raises(MissingGold):
        inst.require_gold()
