"""Aggregation of head-to-head explanation preference annotations.

Annotators see two explanations per example, shown as side (a) and side (b)
in a randomized order, and pick (a), (b), or tie. A shuffle key records which
displayed side carried model A's explanation, so aggregation first maps raw
side votes back to model space, then applies a majority vote: an example's
outcome is the choice at least two annotators agree on, and a three-way split
counts as a tie. Agreement levels grade annotator concordance per example:
2 when all three votes are equal, 1 when exactly two are, 0 when all differ.
"""
from __future__ import annotations

import csv
import json
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import IncompleteSheet, MalformedRecord, UnknownExample

VOTE_A = "a"
VOTE_B = "b"
VOTE_TIE = "tie"
VOTE_CHOICES = (VOTE_A, VOTE_B, VOTE_TIE)
SIDES = (VOTE_A, VOTE_B)

ANNOTATORS_PER_EXAMPLE = 3


@dataclass(frozen=True)
class PreferenceVote:
    """One annotator's raw pick for one example, in displayed-side space."""

    example_id: str
    annotator_id: str
    choice: str


@dataclass(frozen=True)
class PreferenceReport:
    pct_a: float
    pct_tie: float
    pct_b: float
    level_counts: Mapping[int, float]
    n_examples: int

    def as_dict(self) -> dict:
        return {
            "pct_a": self.pct_a,
            "pct_tie": self.pct_tie,
            "pct_b": self.pct_b,
            "level_counts": {str(k): self.level_counts[k] for k in sorted(self.level_counts)},
            "n_examples": self.n_examples,
        }


def read_votes_csv(path: str | Path) -> list[PreferenceVote]:
    """Read an annotation sheet with columns example_id, annotator_id, choice."""
    votes: list[PreferenceVote] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        fields = reader.fieldnames or []
        missing = [c for c in ("example_id", "annotator_id", "choice") if c not in fields]
        if missing:
            raise MalformedRecord(str(path), 1, f"missing columns: {', '.join(missing)}")
        for row in reader:
            choice = (row["choice"] or "").strip().lower()
            if choice not in VOTE_CHOICES:
                raise MalformedRecord(
                    str(path), reader.line_num,
                    f"choice must be one of {'/'.join(VOTE_CHOICES)}, got {row['choice']!r}")
            example_id = (row["example_id"] or "").strip()
            annotator_id = (row["annotator_id"] or "").strip()
            if not example_id or not annotator_id:
                raise MalformedRecord(str(path), reader.line_num,
                                      "example_id and annotator_id must be non-empty")
            votes.append(PreferenceVote(example_id, annotator_id, choice))
    return votes


def write_votes_csv(path: str | Path, votes: Iterable[PreferenceVote]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["example_id", "annotator_id", "choice"])
        for vote in votes:
            writer.writerow([vote.example_id, vote.annotator_id, vote.choice])


def make_shuffle_key(example_ids: Sequence[str], seed: int) -> dict[str, str]:
    """Assign each example the displayed side that will carry model A's output."""
    rng = random.Random(seed)
    return {example_id: rng.choice(SIDES) for example_id in example_ids}


def write_shuffle_key(path: str | Path, key: Mapping[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(dict(key), handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_shuffle_key(path: str | Path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    if not isinstance(raw, dict):
        raise MalformedRecord(str(path), 0, "shuffle key must be a JSON object")
    for example_id, side in raw.items():
        if side not in SIDES:
            raise MalformedRecord(str(path), 0,
                                  f"side for {example_id!r} must be 'a' or 'b', got {side!r}")
    return raw


def derandomize(choice: str, side_of_model_a: str) -> str:
    """Map a displayed-side vote to model space given which side was model A."""
    if choice == VOTE_TIE:
        return VOTE_TIE
    return VOTE_A if choice == side_of_model_a else VOTE_B


def aggregate_preferences(votes: Iterable[PreferenceVote],
                          shuffle_key: Mapping[str, str]) -> PreferenceReport:
    """Reduce raw side votes to per-model preference and agreement percentages.

    Majority and agreement level are computed on the raw three votes per
    example; relabeling sides never changes either, so de-randomization is
    applied to the per-example outcome afterwards.
    """
    by_example: dict[str, list[PreferenceVote]] = {}
    for vote in votes:
        if vote.example_id not in shuffle_key:
            raise UnknownExample(vote.example_id)
        by_example.setdefault(vote.example_id, []).append(vote)
    if not by_example:
        raise ValueError("cannot aggregate an empty vote sheet")

    outcome_counts: Counter[str] = Counter()
    level_totals: Counter[int] = Counter()
    for example_id, group in by_example.items():
        annotators = {vote.annotator_id for vote in group}
        if len(annotators) != len(group):
            raise IncompleteSheet(example_id, "duplicate annotator vote")
        if len(group) != ANNOTATORS_PER_EXAMPLE:
            raise IncompleteSheet(
                example_id,
                f"expected {ANNOTATORS_PER_EXAMPLE} votes, found {len(group)}")
        tally = Counter(vote.choice for vote in group)
        top_choice, top_count = tally.most_common(1)[0]
        raw_outcome = top_choice if top_count >= 2 else VOTE_TIE
        level = 2 if top_count == 3 else 1 if top_count == 2 else 0
        outcome_counts[derandomize(raw_outcome, shuffle_key[example_id])] += 1
        level_totals[level] += 1

    n = len(by_example)
    return PreferenceReport(
        pct_a=outcome_counts[VOTE_A] / n * 100.0,
        pct_tie=outcome_counts[VOTE_TIE] / n * 100.0,
        pct_b=outcome_counts[VOTE_B] / n * 100.0,
        level_counts={level: level_totals[level] / n * 100.0 for level in (0, 1, 2)},
        n_examples=n,
    )


def write_preference_report(path: str | Path, report: PreferenceReport) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report.as_dict(), handle, indent=2)
        handle.write("\n")


def write_preference_csv(path: str | Path, report: PreferenceReport) -> None:
    rows = [
        ("pref_a", report.pct_a),
        ("pref_tie", report.pct_tie),
        ("pref_b", report.pct_b),
        ("level_0", report.level_counts[0]),
        ("level_1", report.level_counts[1]),
        ("level_2", report.level_counts[2]),
    ]
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["metric", "percent"])
        for metric, percent in rows:
            writer.writerow([metric, f"{percent:g}"])
