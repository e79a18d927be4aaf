"""Distill free-text explanations from a large model into training corpora.

The pipeline runs in stages: few-shot prompts are built from packaged
demonstrations, completions are fetched through a caching gateway, answers
and explanations are parsed out, instances are annotated (with filtering,
rationalization, or filtering-plus-backup), and the annotations are emitted
as single- or multi-task text-to-text corpora for small seq2seq models.
Orchestration drives external trainers over loss-weight grids, few-shot
splits, and full experiment matrices; evaluation and human-preference
aggregation close the loop.
"""
from .core import (
    Answer,
    Choice,
    Dataset,
    DatasetKind,
    Demonstration,
    Instance,
    load_bundled_demos,
    load_dataset,
    load_demos,
    normalize_answer,
    render_answer,
)
from .distill import AnnotatedInstance, DistillStats, annotate
from .emitter import TargetMode, TrainRecord, emit_records
from .errors import PipelineError
from .evaluate import RunAccuracy, aggregate_runs, score_predictions
from .gateway import CompletionGateway, DecodeParams, HttpBackend, ReplayBackend
from .humaneval import PreferenceReport, PreferenceVote, aggregate_preferences
from .orchestrate import grid_search_alpha, run_experiment, sample_fewshot_splits
from .parsing import ParsedCompletion, extract_answer, parse_chain_of_thought
from .prompts import Prompt, PromptStyle, build_prompt

__version__ = "0.1.0"

__all__ = [
    "AnnotatedInstance",
    "Answer",
    "Choice",
    "CompletionGateway",
    "Dataset",
    "DatasetKind",
    "DecodeParams",
    "Demonstration",
    "DistillStats",
    "HttpBackend",
    "Instance",
    "ParsedCompletion",
    "PipelineError",
    "PreferenceReport",
    "PreferenceVote",
    "Prompt",
    "PromptStyle",
    "ReplayBackend",
    "RunAccuracy",
    "TargetMode",
    "TrainRecord",
    "aggregate_preferences",
    "aggregate_runs",
    "annotate",
    "build_prompt",
    "emit_records",
    "extract_answer",
    "grid_search_alpha",
    "load_bundled_demos",
    "load_dataset",
    "load_demos",
    "normalize_answer",
    "parse_chain_of_thought",
    "render_answer",
    "run_experiment",
    "sample_fewshot_splits",
    "score_predictions",
    "__version__",
]
