"""Turn annotated instances into multi-task training corpora.

Each training record is a text-to-text pair tagged with its task:

  {"input": str, "target": str, "task": "qta" | "qtr", "id": str}

The answer task (qta) asks for the answer; the reasoning task (qtr) asks for
the mode-dependent explanation text. Both tasks share one instance body and
differ only in the leading task tag, so the model sees identical content
under both tasks.

Target formats by mode:

  st       answer task only
  mt_re    qtr target is the explanation, verbatim
  mt_ra    qtr target is "the answer is <gold>. <explanation>"
  mt_cot   qtr target is "<explanation> the answer is <gold>."

Instances without an explanation (source "none") contribute no qtr record in
any mode; that omission is how rejected instances are masked out of the
reasoning loss.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from .core import DatasetKind, Instance, render_answer
from .distill import SOURCE_NONE, AnnotatedInstance
from .errors import MalformedRecord, ModeRequiresExplanations
from .parsing import ANSWER_MARKER
from .prompts import question_block

ANSWER_TASK = "qta"
REASON_TASK = "qtr"

ANSWER_TASK_TAG = "answer: "
REASON_TASK_TAG = "explain: "


class TargetMode(str, Enum):
    ST = "st"
    MT_RE = "mt_re"
    MT_RA = "mt_ra"
    MT_COT = "mt_cot"


@dataclass(frozen=True)
class TrainRecord:
    input: str
    target: str
    task: str
    id: str


@dataclass
class EmitReport:
    mode: str
    instances: int = 0
    qta_records: int = 0
    qtr_records: int = 0
    skipped_no_explanation: int = 0

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "instances": self.instances,
            "qta_records": self.qta_records,
            "qtr_records": self.qtr_records,
            "skipped_no_explanation": self.skipped_no_explanation,
        }


def instance_body(inst: Instance, kind: DatasetKind) -> str:
    """Shared task body: the question block without its "Q: " cue."""
    return question_block(inst, kind).removeprefix("Q: ")


def answer_task_input(inst: Instance, kind: DatasetKind) -> str:
    return ANSWER_TASK_TAG + instance_body(inst, kind)


def reason_task_input(inst: Instance, kind: DatasetKind) -> str:
    return REASON_TASK_TAG + instance_body(inst, kind)


def reason_target(mode: TargetMode, explanation: str, rendered_gold: str) -> str:
    explanation = explanation.rstrip()
    if mode is TargetMode.MT_RE:
        return explanation
    if mode is TargetMode.MT_RA:
        return f"{ANSWER_MARKER} {rendered_gold}. {explanation}".rstrip()
    if mode is TargetMode.MT_COT:
        return f"{explanation} {ANSWER_MARKER} {rendered_gold}.".lstrip()
    raise ValueError(f"mode {mode.value} has no reasoning-task target")


def emit_records(annotated: Sequence[AnnotatedInstance], mode: TargetMode,
                 kind: DatasetKind) -> tuple[list[TrainRecord], EmitReport]:
    """Build the training corpus for one mode.

    Every instance yields one answer-task record; multi-task modes add one
    reasoning-task record per explained instance. Asking for a multi-task
    corpus from records that carry no explanations at all is an error rather
    than a silently answer-only corpus.
    """
    report = EmitReport(mode=mode.value, instances=len(annotated))
    if mode is not TargetMode.ST:
        if annotated and all(rec.explanation is None for rec in annotated):
            raise ModeRequiresExplanations(
                f"mode {mode.value} needs explanations, but no record has one")
    records: list[TrainRecord] = []
    for rec in annotated:
        inst = rec.instance
        gold = inst.require_gold()
        rendered_gold = render_answer(gold, kind)
        records.append(TrainRecord(answer_task_input(inst, kind), rendered_gold,
                                   ANSWER_TASK, inst.id))
        report.qta_records += 1
        if mode is TargetMode.ST:
            continue
        if rec.explanation is None or rec.source == SOURCE_NONE:
            report.skipped_no_explanation += 1
            continue
        target = reason_target(mode, rec.explanation, rendered_gold)
        records.append(TrainRecord(reason_task_input(inst, kind), target,
                                   REASON_TASK, inst.id))
        report.qtr_records += 1
    return records, report


def write_train_records(path: str | Path, records: Sequence[TrainRecord]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for rec in records:
            handle.write(json.dumps(
                {"input": rec.input, "target": rec.target,
                 "task": rec.task, "id": rec.id},
                ensure_ascii=False) + "\n")


def load_train_records(path: str | Path) -> list[TrainRecord]:
    from .core import _iter_jsonl

    out: list[TrainRecord] = []
    for line_no, rec in _iter_jsonl(path):
        try:
            task = rec["task"]
            if task not in (ANSWER_TASK, REASON_TASK):
                raise MalformedRecord(str(path), line_no, f"unknown task {task!r}")
            out.append(TrainRecord(rec["input"], rec["target"], task, rec["id"]))
        except KeyError as exc:
            raise MalformedRecord(str(path), line_no, f"missing field {exc}") from exc
    return out


def write_emit_report(path: str | Path, report: EmitReport) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report.as_dict(), handle, indent=2)
        handle.write("\n")
