"""Scoring generations against gold answers and aggregating runs.

Predictions are one JSON object per line: {"id": str, "generation": str}.
Scoring is closed over the dataset: every instance counts toward the total,
and a missing, unparseable or wrong generation is simply incorrect.
Aggregation reports accuracy as mean and sample standard deviation in
percent across runs.
"""
from __future__ import annotations

import csv
import json
import logging
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .core import Dataset, DatasetKind, Demonstration
from .distill import _tolerant_batch
from .errors import StyleRequiresGold
from .gateway import CompletionGateway, DecodeParams
from .parsing import extract_answer, parse_answer_first, parse_chain_of_thought
from .prompts import PromptStyle, build_prompt

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictionRecord:
    id: str
    generation: str


@dataclass(frozen=True)
class RunAccuracy:
    correct: int
    total: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    @property
    def percent(self) -> float:
        return self.accuracy * 100.0


@dataclass(frozen=True)
class AggregateStat:
    mean: float
    std: float
    n_runs: int

    def as_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n_runs": self.n_runs}


def write_predictions(path: str | Path, predictions: Sequence[PredictionRecord]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for rec in predictions:
            handle.write(json.dumps({"id": rec.id, "generation": rec.generation},
                                    ensure_ascii=False) + "\n")


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    from .core import _iter_jsonl
    from .errors import MalformedRecord

    out = []
    for line_no, rec in _iter_jsonl(path):
        try:
            out.append(PredictionRecord(rec["id"], rec["generation"]))
        except KeyError as exc:
            raise MalformedRecord(str(path), line_no, f"missing field {exc}") from exc
    return out


def score_predictions(predictions: Sequence[PredictionRecord], dataset: Dataset,
                      ) -> RunAccuracy:
    """Accuracy of generations against the dataset's gold answers.

    The denominator is always the dataset size. Instances without a
    prediction and generations no answer can be extracted from score as
    incorrect; prediction ids outside the dataset are ignored with a warning.
    """
    by_id = {p.id: p.generation for p in predictions}
    unknown = set(by_id) - {inst.id for inst in dataset}
    if unknown:
        logger.warning("%d prediction ids not in dataset (e.g. %r)",
                       len(unknown), sorted(unknown)[0])
    correct = 0
    for inst in dataset:
        gold = inst.require_gold()
        generation = by_id.get(inst.id)
        if generation is None:
            continue
        answer = extract_answer(generation, inst, dataset.kind)
        if answer is not None and answer.agrees_with(gold):
            correct += 1
    return RunAccuracy(correct=correct, total=len(dataset))


def aggregate_runs(runs: Sequence[RunAccuracy]) -> AggregateStat:
    """Mean and sample standard deviation (in percent) across runs.

    A single run has deviation 0.0 by convention; aggregating zero runs is a
    caller bug and raises ValueError.
    """
    if not runs:
        raise ValueError("cannot aggregate zero runs")
    percents = [run.percent for run in runs]
    mean = statistics.fmean(percents)
    std = statistics.stdev(percents) if len(percents) > 1 else 0.0
    return AggregateStat(mean=mean, std=std, n_runs=len(percents))


# ---------------------------------------------------------------------------
# Prompting baselines

_BASELINE_STYLES = (PromptStyle.STANDARD, PromptStyle.CHAIN_OF_THOUGHT,
                    PromptStyle.EXPLANATION_AFTER_ANSWER)


def run_prompting_baseline(dataset: Dataset, demos: Sequence[Demonstration],
                           style: PromptStyle, gateway: CompletionGateway,
                           params: DecodeParams, parallelism: int | None = None,
                           ) -> tuple[RunAccuracy, list[PredictionRecord]]:
    """Few-shot prompting baseline over an evaluation set.

    Supports the styles that do not reveal the gold answer in the target
    block; asking for the rationalization style raises StyleRequiresGold.
    """
    if style not in _BASELINE_STYLES:
        raise StyleRequiresGold(
            f"style {style.value} conditions on the gold answer; "
            "it cannot be used as a prediction baseline")
    prompts = [build_prompt(demos, inst, dataset.kind, style) for inst in dataset]
    completions = _tolerant_batch(gateway, prompts, params, parallelism)
    predictions: list[PredictionRecord] = []
    correct = 0
    for inst, result in zip(dataset, completions):
        gold = inst.require_gold()
        text = result.text if result is not None else ""
        predictions.append(PredictionRecord(inst.id, text))
        if style is PromptStyle.CHAIN_OF_THOUGHT:
            answer = parse_chain_of_thought(text, inst, dataset.kind).prediction
        elif style is PromptStyle.EXPLANATION_AFTER_ANSWER:
            answer = parse_answer_first(text, inst, dataset.kind)
        else:
            answer = extract_answer(text, inst, dataset.kind)
        if answer is not None and answer.agrees_with(gold):
            correct += 1
    return RunAccuracy(correct=correct, total=len(dataset)), predictions


# ---------------------------------------------------------------------------
# Reports


def build_report(cells: dict[tuple[str, str], Sequence[RunAccuracy]]) -> dict:
    """Aggregate a (mode, method) -> runs mapping into a serializable report."""
    rows = []
    for (mode, method), runs in sorted(cells.items()):
        stat = aggregate_runs(list(runs))
        rows.append({"mode": mode, "method": method, **stat.as_dict()})
    return {"cells": rows}


def write_report_json(path: str | Path, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report, handle, indent=2)
        handle.write("\n")


def write_report_csv(path: str | Path, report: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle,
                                fieldnames=["mode", "method", "mean", "std", "n_runs"])
        writer.writeheader()
        for row in report["cells"]:
            writer.writerow(row)
