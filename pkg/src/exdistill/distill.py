"""Annotate training instances with model-generated explanations.

Three annotation strategies, all driven through the completion gateway:

  cote  reasoning-first generation, keeping an explanation only when the
        model's own answer matches gold (incorrect answers are rejected)
  rp    answer-conditioned generation, keeping every explanation unfiltered
  crop  the filtered pass first, with the answer-conditioned pass as backup
        for every rejected instance

Annotated record (dataset record fields plus):

  {"explanation": str | null, "source": "cote" | "rp" | "none",
   "llm_prediction": {"letter": ..., "text": ...} | null, "llm_correct": bool}

source = "none" if and only if the record carries no explanation; those
instances produce no reasoning-task rows downstream, which realizes loss
masking at the data level.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .core import (Answer, Dataset, DatasetKind, Demonstration, Instance,
                   instance_to_record, _record_to_instance, _iter_jsonl)
from .errors import BatchCompletionFailed, MalformedRecord
from .gateway import CompletionGateway, CompletionResult, DecodeParams
from .parsing import ParseStatus, parse_chain_of_thought, parse_rationalization
from .prompts import build_cot_prompt, build_rationalization_prompt

logger = logging.getLogger(__name__)

SOURCE_FILTERED = "cote"
SOURCE_RATIONALIZED = "rp"
SOURCE_NONE = "none"

ANNOTATION_METHODS = ("cote", "rp", "crop")


@dataclass(frozen=True)
class AnnotatedInstance:
    instance: Instance
    explanation: str | None
    source: str
    llm_prediction: Answer | None
    llm_correct: bool


@dataclass
class DistillStats:
    """Bookkeeping for one annotation run; counts always partition the total."""

    total: int = 0
    accepted_cote: int = 0
    backup_rp: int = 0
    none_count: int = 0
    parse_failures: int = 0
    llm_accuracy: float | None = None

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "accepted_cote": self.accepted_cote,
            "backup_rp": self.backup_rp,
            "none_count": self.none_count,
            "parse_failures": self.parse_failures,
            "llm_accuracy": self.llm_accuracy,
        }


def _tolerant_batch(gateway: CompletionGateway, prompts, params: DecodeParams,
                    parallelism: int | None) -> list[CompletionResult | None]:
    """Batch completion that downgrades per-item failures to None results."""
    try:
        return list(gateway.batch_complete(prompts, params, parallelism))
    except BatchCompletionFailed as exc:
        for index, error in exc.errors:
            logger.warning("completion for %s failed: %s",
                           prompts[index].instance_id, error)
        return exc.results


def annotate_filtered(dataset: Dataset, demos: Sequence[Demonstration],
                      gateway: CompletionGateway, params: DecodeParams,
                      parallelism: int | None = None,
                      ) -> tuple[list[AnnotatedInstance], DistillStats]:
    """Reasoning-first annotation with incorrect-answer rejection.

    An explanation is adopted only when the parsed prediction agrees with the
    instance's gold answer; everything else (wrong answer, unparseable or
    failed completion) yields source = "none". Output order follows dataset
    order regardless of completion scheduling.
    """
    prompts = [build_cot_prompt(demos, inst, dataset.kind) for inst in dataset]
    completions = _tolerant_batch(gateway, prompts, params, parallelism)
    annotated: list[AnnotatedInstance] = []
    stats = DistillStats(total=len(dataset))
    correct = 0
    for inst, result in zip(dataset, completions):
        gold = inst.require_gold()
        if result is None:
            stats.parse_failures += 1
            stats.none_count += 1
            annotated.append(AnnotatedInstance(inst, None, SOURCE_NONE, None, False))
            continue
        parsed = parse_chain_of_thought(result.text, inst, dataset.kind)
        if parsed.status is not ParseStatus.OK:
            stats.parse_failures += 1
            stats.none_count += 1
            annotated.append(AnnotatedInstance(inst, None, SOURCE_NONE,
                                               parsed.prediction, False))
            continue
        assert parsed.prediction is not None
        if parsed.prediction.agrees_with(gold):
            correct += 1
            stats.accepted_cote += 1
            annotated.append(AnnotatedInstance(inst, parsed.explanation or "",
                                               SOURCE_FILTERED, parsed.prediction, True))
        else:
            stats.none_count += 1
            annotated.append(AnnotatedInstance(inst, None, SOURCE_NONE,
                                               parsed.prediction, False))
    stats.llm_accuracy = correct / stats.total if stats.total else None
    return annotated, stats


def _rationalize(instances: Sequence[Instance], kind: DatasetKind,
                 demos: Sequence[Demonstration], gateway: CompletionGateway,
                 params: DecodeParams, parallelism: int | None,
                 ) -> tuple[list[AnnotatedInstance], int, int]:
    """Answer-conditioned annotation; returns (records, empty count, failed count)."""
    prompts = [build_rationalization_prompt(demos, inst, kind) for inst in instances]
    completions = _tolerant_batch(gateway, prompts, params, parallelism)
    records: list[AnnotatedInstance] = []
    empty = failed = 0
    for inst, result in zip(instances, completions):
        if result is None:
            failed += 1
            records.append(AnnotatedInstance(inst, None, SOURCE_NONE, None, False))
            continue
        explanation = parse_rationalization(result.text)
        if not explanation:
            # kept, but flagged: an empty explanation is still an rp record
            empty += 1
        records.append(AnnotatedInstance(inst, explanation, SOURCE_RATIONALIZED,
                                         None, False))
    return records, empty, failed


def annotate_rationalized(dataset: Dataset, demos: Sequence[Demonstration],
                          gateway: CompletionGateway, params: DecodeParams,
                          parallelism: int | None = None,
                          ) -> tuple[list[AnnotatedInstance], DistillStats]:
    """Answer-conditioned annotation for every instance, no filtering.

    No predictions are made, so llm_accuracy is None. Empty completions keep
    source = "rp" with an empty explanation and count as parse failures.
    """
    for inst in dataset:
        inst.require_gold()
    records, empty, failed = _rationalize(dataset.instances, dataset.kind, demos,
                                          gateway, params, parallelism)
    stats = DistillStats(total=len(dataset),
                         backup_rp=len(dataset) - failed,
                         none_count=failed,
                         parse_failures=empty + failed,
                         llm_accuracy=None)
    return records, stats


def annotate_with_backup(dataset: Dataset, demos: Sequence[Demonstration],
                         gateway: CompletionGateway, params: DecodeParams,
                         parallelism: int | None = None,
                         ) -> tuple[list[AnnotatedInstance], DistillStats]:
    """Filtered annotation with answer-conditioned backup for rejected instances.

    Where the filtered pass accepted, records are identical to that pass
    (same cached completions); the rejected remainder is annotated exactly as
    the unfiltered strategy would annotate it.
    """
    filtered, cote_stats = annotate_filtered(dataset, demos, gateway, params,
                                             parallelism)
    rejected = [rec.instance for rec in filtered if rec.source != SOURCE_FILTERED]
    backups, empty, failed = _rationalize(rejected, dataset.kind, demos, gateway,
                                          params, parallelism)
    by_id = {rec.instance.id: rec for rec in backups}
    merged = [rec if rec.source == SOURCE_FILTERED else by_id[rec.instance.id]
              for rec in filtered]
    stats = DistillStats(total=cote_stats.total,
                         accepted_cote=cote_stats.accepted_cote,
                         backup_rp=len(rejected) - failed,
                         none_count=failed,
                         parse_failures=cote_stats.parse_failures + empty + failed,
                         llm_accuracy=cote_stats.llm_accuracy)
    return merged, stats


def annotate(method: str, dataset: Dataset, demos: Sequence[Demonstration],
             gateway: CompletionGateway, params: DecodeParams,
             parallelism: int | None = None,
             ) -> tuple[list[AnnotatedInstance], DistillStats]:
    """Dispatch by method token: "cote", "rp" or "crop"."""
    if method == "cote":
        return annotate_filtered(dataset, demos, gateway, params, parallelism)
    if method == "rp":
        return annotate_rationalized(dataset, demos, gateway, params, parallelism)
    if method == "crop":
        return annotate_with_backup(dataset, demos, gateway, params, parallelism)
    raise ValueError(f"unknown annotation method {method!r}; "
                     f"expected one of {ANNOTATION_METHODS}")


# ---------------------------------------------------------------------------
# Annotated JSONL input/output


def annotated_to_record(rec: AnnotatedInstance) -> dict:
    out = instance_to_record(rec.instance)
    out["explanation"] = rec.explanation
    out["source"] = rec.source
    out["llm_prediction"] = (None if rec.llm_prediction is None else
                             {"letter": rec.llm_prediction.letter,
                              "text": rec.llm_prediction.text})
    out["llm_correct"] = rec.llm_correct
    return out


def write_annotated(path: str | Path, annotated: Sequence[AnnotatedInstance]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for rec in annotated:
            handle.write(json.dumps(annotated_to_record(rec), ensure_ascii=False) + "\n")


def load_annotated(path: str | Path, kind: DatasetKind) -> list[AnnotatedInstance]:
    """Read annotated records, enforcing the source/explanation pairing."""
    out: list[AnnotatedInstance] = []
    for line_no, rec in _iter_jsonl(path):
        where = (str(path), line_no)
        inst = _record_to_instance(rec, kind, where)
        source = rec.get("source")
        if source not in (SOURCE_FILTERED, SOURCE_RATIONALIZED, SOURCE_NONE):
            raise MalformedRecord(*where, f"unknown source {source!r}")
        explanation = rec.get("explanation")
        if (explanation is None) != (source == SOURCE_NONE):
            raise MalformedRecord(*where,
                                  "explanation must be present exactly when source is not none")
        pred = rec.get("llm_prediction")
        prediction = None if pred is None else Answer(pred.get("letter"), pred["text"])
        llm_correct = bool(rec.get("llm_correct", False))
        if llm_correct and source != SOURCE_FILTERED:
            raise MalformedRecord(*where, "llm_correct requires an accepted source")
        out.append(AnnotatedInstance(inst, explanation, source, prediction, llm_correct))
    return out


def recount_stats(annotated: Sequence[AnnotatedInstance]) -> DistillStats:
    """Rebuild run statistics from stored records (the `stats` subcommand)."""
    stats = DistillStats(total=len(annotated))
    predictions = 0
    correct = 0
    for rec in annotated:
        if rec.source == SOURCE_FILTERED:
            stats.accepted_cote += 1
        elif rec.source == SOURCE_RATIONALIZED:
            stats.backup_rp += 1
        else:
            stats.none_count += 1
        if rec.llm_prediction is not None or rec.llm_correct:
            predictions += 1
            correct += int(rec.llm_correct)
    if predictions:
        stats.llm_accuracy = correct / stats.total
    return stats


def write_stats(path: str | Path, stats: DistillStats) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(stats.as_dict(), handle, indent=2)
        handle.write("\n")
