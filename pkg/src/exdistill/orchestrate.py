"""Drive external trainers: single runs, loss-weight grid search, experiments.

The trainer contract is process-level. The orchestrator writes a manifest:

  {"train_records": path, "dev_records": path, "alpha": float,
   "mode": "st" | "mt_re" | "mt_ra" | "mt_cot", "seed": int,
   "model_tag": str, "out_dir": path, "metrics_path": path}

and invokes the trainer command with the manifest path appended as the final
argument. The trainer writes metrics JSON to metrics_path:

  {"dev_accuracy": float, "test_accuracy": float | null, "losses": [...]}

Anything else (nonzero exit, missing or unreadable metrics) is a
TrainerFailure. Grid search and experiment runs are resumable: a cell whose
metrics already exist is not re-run.
"""
from __future__ import annotations

import json
import logging
import os
import random
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .core import Dataset
from .errors import SizeExceedsDataset, TrainerFailure

logger = logging.getLogger(__name__)

DEFAULT_ALPHA_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

TARGET_MODES = ("st", "mt_re", "mt_ra", "mt_cot")


def _atomic_write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2)
            handle.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class TrainJob:
    """One trainer invocation; st mode always carries alpha 1.0."""

    train_records: str
    dev_records: str
    alpha: float
    mode: str
    seed: int
    model_tag: str

    def __post_init__(self) -> None:
        if self.mode not in TARGET_MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "st" and self.alpha != 1.0:
            raise ValueError("single-task training requires alpha = 1.0")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")

    def manifest(self, out_dir: Path, metrics_path: Path) -> dict:
        return {
            "train_records": self.train_records,
            "dev_records": self.dev_records,
            "alpha": self.alpha,
            "mode": self.mode,
            "seed": self.seed,
            "model_tag": self.model_tag,
            "out_dir": str(out_dir),
            "metrics_path": str(metrics_path),
        }


def run_trainer(command: Sequence[str], job: TrainJob, out_dir: str | Path) -> dict:
    """Run one training job and return its metrics.

    The out_dir receives manifest.json and metrics.json; an existing valid
    metrics.json short-circuits the trainer entirely.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.json"
    cached = _read_metrics(metrics_path)
    if cached is not None:
        logger.info("reusing metrics at %s", metrics_path)
        return cached
    manifest_path = out / "manifest.json"
    _atomic_write_json(manifest_path, job.manifest(out, metrics_path))
    argv = [*command, str(manifest_path)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True)
    except OSError as exc:
        raise TrainerFailure(f"could not invoke trainer {argv!r}: {exc}",
                             alpha=job.alpha) from exc
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout or "").strip()[-500:]
        raise TrainerFailure(
            f"trainer exited with {proc.returncode} for alpha={job.alpha:g}: {tail}",
            alpha=job.alpha)
    metrics = _read_metrics(metrics_path)
    if metrics is None:
        raise TrainerFailure(f"trainer wrote no usable metrics at {metrics_path}",
                             alpha=job.alpha)
    return metrics


def _read_metrics(path: Path) -> dict | None:
    if not path.exists():
        return None
    try:
        with open(path, "r", encoding="utf-8") as handle:
            metrics = json.load(handle)
    except (OSError, json.JSONDecodeError):
        return None
    if not isinstance(metrics, dict) or not isinstance(
            metrics.get("dev_accuracy"), (int, float)):
        return None
    return metrics


# ---------------------------------------------------------------------------
# Loss-weight grid search


@dataclass
class GridSearchResult:
    alpha_star: float
    dev_accuracy: dict[float, float]
    failures: dict[float, str] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "alpha_star": self.alpha_star,
            "dev_accuracy": {f"{a:g}": acc for a, acc in sorted(self.dev_accuracy.items())},
            "failures": {f"{a:g}": msg for a, msg in sorted(self.failures.items())},
        }


def grid_search_alpha(command: Sequence[str], train_records: str | Path,
                      dev_records: str | Path, mode: str, out_dir: str | Path,
                      seed: int, model_tag: str = "default",
                      grid: Sequence[float] = DEFAULT_ALPHA_GRID) -> GridSearchResult:
    """Tune the answer-task loss weight on dev accuracy.

    One trainer run per grid value, all with the same seed and data. Failed
    cells are recorded and skipped; the best value is picked among successes,
    with ties resolved toward the smallest weight. Every cell failing raises.
    """
    values = sorted(set(grid))
    for alpha in values:
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"grid value {alpha} outside (0, 1]")
    out = Path(out_dir)
    scores: dict[float, float] = {}
    failures: dict[float, str] = {}
    for alpha in values:
        job = TrainJob(str(train_records), str(dev_records), alpha, mode,
                       seed, model_tag)
        cell_dir = out / f"alpha_{alpha:g}"
        try:
            metrics = run_trainer(command, job, cell_dir)
        except TrainerFailure as exc:
            logger.warning("grid cell alpha=%g failed: %s", alpha, exc)
            failures[alpha] = str(exc)
            continue
        scores[alpha] = float(metrics["dev_accuracy"])
    if not scores:
        raise TrainerFailure("every grid cell failed", alpha=None)
    # ascending scan with a strict comparison lands ties on the smallest alpha
    best_alpha, best_score = None, None
    for alpha in values:
        if alpha in scores and (best_score is None or scores[alpha] > best_score):
            best_alpha, best_score = alpha, scores[alpha]
    assert best_alpha is not None
    result = GridSearchResult(alpha_star=best_alpha, dev_accuracy=scores,
                              failures=failures)
    _atomic_write_json(out / "grid_result.json", result.as_dict())
    return result


# ---------------------------------------------------------------------------
# Few-shot split sampling


def sample_fewshot_splits(dataset: Dataset, sizes: Sequence[int],
                          splits_per_size: int, seed: int) -> dict:
    """Sample id lists for small-training-set experiments.

    A single seeded generator drives all draws in (size, split) order, so the
    whole manifest is reproducible from the seed. Ids within one split are
    distinct; splits are sampled independently of each other. Training arms
    that must be compared on identical data reuse the same manifest.
    """
    population = [inst.id for inst in dataset]
    rng = random.Random(seed)
    splits = []
    for size in sizes:
        if size > len(population):
            raise SizeExceedsDataset(size=size, available=len(population))
        if size < 1:
            raise ValueError(f"split size must be positive, got {size}")
        for split_index in range(splits_per_size):
            splits.append({
                "size": size,
                "split_index": split_index,
                "ids": rng.sample(population, size),
            })
    return {"seed": seed, "splits": splits}


def write_split_manifest(path: str | Path, manifest: dict) -> None:
    _atomic_write_json(Path(path), manifest)


def load_split_manifest(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


# ---------------------------------------------------------------------------
# Experiment matrices


@dataclass(frozen=True)
class ExperimentCell:
    """One (mode, method, run) training cell of an experiment."""

    cell_id: str
    mode: str
    method: str
    run_index: int
    alpha: float
    train_records: str
    dev_records: str
    model_tag: str = "default"


def run_experiment(command: Sequence[str], cells: Sequence[ExperimentCell],
                   out_dir: str | Path, base_seed: int = 0) -> dict:
    """Run every cell of an experiment matrix, resumably.

    Run seeds are base_seed + run_index. The ledger at <out_dir>/ledger.json
    is rewritten atomically after every cell; on re-entry, cells already
    marked complete are skipped, so an interrupted experiment picks up where
    it stopped. Failed cells are recorded and retried on the next call.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ledger_path = out / "ledger.json"
    ledger = {"cells": {}}
    if ledger_path.exists():
        with open(ledger_path, "r", encoding="utf-8") as handle:
            ledger = json.load(handle)
    for cell in cells:
        entry = ledger["cells"].get(cell.cell_id)
        if entry is not None and entry.get("status") == "complete":
            logger.info("skipping completed cell %s", cell.cell_id)
            continue
        seed = base_seed + cell.run_index
        job = TrainJob(cell.train_records, cell.dev_records, cell.alpha,
                       cell.mode, seed, cell.model_tag)
        cell_dir = out / "cells" / cell.cell_id
        try:
            metrics = run_trainer(command, job, cell_dir)
        except TrainerFailure as exc:
            ledger["cells"][cell.cell_id] = {
                "status": "failed", "mode": cell.mode, "method": cell.method,
                "run_index": cell.run_index, "seed": seed, "error": str(exc),
            }
            _atomic_write_json(ledger_path, ledger)
            continue
        ledger["cells"][cell.cell_id] = {
            "status": "complete", "mode": cell.mode, "method": cell.method,
            "run_index": cell.run_index, "seed": seed,
            "dev_accuracy": float(metrics["dev_accuracy"]),
            "test_accuracy": metrics.get("test_accuracy"),
            "metrics_path": str(cell_dir / "metrics.json"),
        }
        _atomic_write_json(ledger_path, ledger)
    _atomic_write_json(ledger_path, ledger)
    return ledger


def summarize_ledger(ledger: dict) -> dict:
    """Aggregate completed ledger cells into per-(mode, method) statistics.

    Stored dev accuracies are fractions; the summary reports them in percent
    with the sample standard deviation across runs (0.0 for one run).
    """
    import statistics

    groups: dict[tuple[str, str], list[float]] = {}
    for entry in ledger["cells"].values():
        if entry.get("status") != "complete":
            continue
        key = (entry["mode"], entry["method"])
        groups.setdefault(key, []).append(float(entry["dev_accuracy"]) * 100.0)
    rows = []
    for (mode, method), values in sorted(groups.items()):
        rows.append({
            "mode": mode, "method": method,
            "mean": statistics.fmean(values),
            "std": statistics.stdev(values) if len(values) > 1 else 0.0,
            "n_runs": len(values),
        })
    return {"cells": rows}
