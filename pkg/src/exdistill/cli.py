"""Command line entry point.

Subcommands cover the whole pipeline: `distill` annotates a dataset with
explanations, `emit` turns annotations into training corpora, `orchestrate`
drives external trainers (loss-weight grid search, few-shot split sampling,
full experiment matrices), `eval` scores prediction files, `baseline` runs
few-shot prompting evaluations, `human-eval` aggregates preference sheets,
and `stats` reduces per-run accuracies to mean and spread.

Every subcommand accepts --config pointing at a TOML document whose keys
mirror the subcommand's flags; explicit flags win over config values, and
unknown config keys are rejected. All outputs land under --out-dir next to a
run_manifest.json recording the resolved configuration and input hashes.
Failures print one machine-readable JSON object to stderr and exit nonzero.
"""
from __future__ import annotations

import functools
import hashlib
import json
import shlex
import sys
from pathlib import Path
from typing import Callable, Sequence

import click

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - runtime depends on Python version
    import tomli as tomllib

from . import __version__
from .core import (
    BUNDLED_DEMO_KINDS,
    DatasetKind,
    Demonstration,
    load_bundled_demos,
    load_dataset,
    load_demos,
)
from .distill import ANNOTATION_METHODS, AnnotatedInstance, SOURCE_NONE, annotate, write_annotated, write_stats
from .emitter import TargetMode, emit_records, write_emit_report, write_train_records
from .errors import ConfigInvalid, KindMismatch, PipelineError
from .evaluate import (
    RunAccuracy,
    build_report,
    load_predictions,
    run_prompting_baseline,
    score_predictions,
    write_predictions,
    write_report_csv,
    write_report_json,
)
from .figures import save_accuracy_figure, save_grid_figure, save_preference_figure
from .gateway import (
    CompletionGateway,
    DecodeParams,
    HttpBackend,
    RateWindow,
    ReplayBackend,
)
from .humaneval import (
    aggregate_preferences,
    read_shuffle_key,
    read_votes_csv,
    write_preference_csv,
    write_preference_report,
)
from .orchestrate import (
    DEFAULT_ALPHA_GRID,
    ExperimentCell,
    TARGET_MODES,
    grid_search_alpha,
    run_experiment,
    sample_fewshot_splits,
    summarize_ledger,
    write_split_manifest,
)
from .prompts import PromptStyle

KIND_TOKENS = {
    "mc5": DatasetKind.MULTI_CHOICE_5,
    "yes_no": DatasetKind.YES_NO,
    "mc4": DatasetKind.MULTI_CHOICE_4,
}

BASELINE_STYLE_TOKENS = {
    "standard": PromptStyle.STANDARD,
    "cot": PromptStyle.CHAIN_OF_THOUGHT,
    "eaa": PromptStyle.EXPLANATION_AFTER_ANSWER,
}


# ---------------------------------------------------------------------------
# Shared plumbing


def _fail(exc: BaseException) -> None:
    payload = {"error": type(exc).__name__, "detail": str(exc)}
    click.echo(json.dumps(payload), err=True)
    sys.exit(2)


def pipeline_command(fn: Callable) -> Callable:
    """Convert pipeline failures into stderr JSON plus a nonzero exit."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (PipelineError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            _fail(exc)

    return wrapper


def _merge_config(ctx: click.Context, config_path: str | None, values: dict) -> dict:
    """Overlay config-file values onto defaulted options; explicit flags win."""
    if not config_path:
        return values
    try:
        with open(config_path, "rb") as handle:
            cfg = tomllib.load(handle)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {config_path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid(f"cannot parse config {config_path}: {exc}") from exc
    unknown = sorted(set(cfg) - set(values))
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {', '.join(unknown)}")
    merged = dict(values)
    for key, value in cfg.items():
        source = ctx.get_parameter_source(key)
        if source is None or source.name != "COMMANDLINE":
            merged[key] = value
    return merged


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_run_manifest(out_dir: Path, command: str, config: dict,
                       inputs: Sequence[str | Path]) -> Path:
    hashes = {}
    for item in inputs:
        path = Path(item)
        if path.is_file():
            hashes[str(path)] = _sha256_file(path)
    manifest = {
        "command": command,
        "version": __version__,
        "config": {key: _jsonable(value) for key, value in sorted(config.items())},
        "inputs": hashes,
    }
    out = Path(out_dir) / "run_manifest.json"
    with open(out, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return out


def _ensure_out_dir(out_dir: str) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_kind(token: str | None) -> DatasetKind | None:
    if token is None:
        return None
    try:
        return KIND_TOKENS[token]
    except KeyError:
        raise ConfigInvalid(
            f"unknown dataset kind {token!r}; choose from {sorted(KIND_TOKENS)}") from None


def _resolve_demos(kind: DatasetKind | None, demos: str | None,
                   bundled: str | None) -> tuple[DatasetKind, tuple[Demonstration, ...], list]:
    """Settle the (kind, demonstrations) pair from the two demo flags."""
    if (demos is None) == (bundled is None):
        raise ConfigInvalid("exactly one of --demos and --bundled-demos is required")
    if bundled is not None:
        if bundled not in BUNDLED_DEMO_KINDS:
            raise ConfigInvalid(f"no bundled demonstrations named {bundled!r}; "
                                f"choose from {sorted(BUNDLED_DEMO_KINDS)}")
        bundled_kind, demo_set = load_bundled_demos(bundled)
        if kind is not None and kind is not bundled_kind:
            raise KindMismatch(f"--kind {kind.value} does not match bundled "
                               f"demonstrations for {bundled} ({bundled_kind.value})")
        return bundled_kind, demo_set, []
    if kind is None:
        raise ConfigInvalid("--kind is required when --demos points at a file")
    return kind, load_demos(demos, kind), [demos]


def _build_gateway(backend: str, cache_dir: str, endpoint: str | None,
                   model: str | None, parallelism: int, rate_limit: int | None,
                   rate_period: float) -> CompletionGateway:
    if backend == "replay":
        engine = ReplayBackend(cache_dir)
    elif backend == "live":
        if not endpoint or not model:
            raise ConfigInvalid("--endpoint and --model are required for the live backend")
        engine = HttpBackend(endpoint, model)
    else:
        raise ConfigInvalid(f"unknown backend {backend!r}; choose live or replay")
    window = RateWindow(rate_limit, rate_period) if rate_limit else None
    return CompletionGateway(engine, cache_dir, rate_window=window,
                             parallelism=parallelism)


def _gateway_options(fn: Callable) -> Callable:
    options = [
        click.option("--backend", type=click.Choice(["replay", "live"]),
                     default="replay", show_default=True,
                     help="completion source; replay serves a recorded cache dir"),
        click.option("--cache-dir", required=True,
                     help="completion cache directory (and replay source)"),
        click.option("--endpoint", default=None, help="live backend base URL"),
        click.option("--model", default=None, help="live backend model name"),
        click.option("--parallelism", type=int, default=4, show_default=True),
        click.option("--rate-limit", type=int, default=None,
                     help="max backend calls per rate period"),
        click.option("--rate-period", type=float, default=60.0, show_default=True,
                     help="rate limit window in seconds"),
        click.option("--max-tokens", type=int, default=256, show_default=True),
        click.option("--temperature", type=float, default=0.0, show_default=True),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _parse_numbers(value, converter) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(converter(v) for v in value)
    parts = [part.strip() for part in str(value).split(",")]
    return tuple(converter(part) for part in parts if part)


def _trainer_argv(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(part) for part in value]
    argv = shlex.split(str(value))
    if not argv:
        raise ConfigInvalid("--trainer must name a command")
    return argv


# ---------------------------------------------------------------------------
# Command group


@click.group()
@click.version_option(version=__version__, prog_name="exdistill")
def main() -> None:
    """Distill free-text explanations into multi-task training corpora."""


@main.command()
@click.option("--data", required=True, help="instances JSONL to annotate")
@click.option("--kind", type=click.Choice(sorted(KIND_TOKENS)), default=None,
              help="dataset shape; inferred from --bundled-demos when omitted")
@click.option("--demos", default=None, help="demonstrations JSONL")
@click.option("--bundled-demos", default=None,
              type=click.Choice(sorted(BUNDLED_DEMO_KINDS)),
              help="use a packaged 7-shot demonstration set")
@click.option("--method", type=click.Choice(ANNOTATION_METHODS), required=True)
@_gateway_options
@click.option("--out-dir", required=True)
@click.option("--config", "config_path", default=None, help="TOML config file")
@click.pass_context
@pipeline_command
def distill(ctx: click.Context, **kwargs) -> None:
    """Annotate instances with explanations via the selected method."""
    config_path = kwargs.pop("config_path")
    cfg = _merge_config(ctx, config_path, kwargs)
    kind, demos, demo_inputs = _resolve_demos(
        _resolve_kind(cfg["kind"]), cfg["demos"], cfg["bundled_demos"])
    dataset = load_dataset(cfg["data"], kind)
    gateway = _build_gateway(cfg["backend"], cfg["cache_dir"], cfg["endpoint"],
                             cfg["model"], cfg["parallelism"], cfg["rate_limit"],
                             cfg["rate_period"])
    params = DecodeParams(temperature=cfg["temperature"], max_tokens=cfg["max_tokens"])
    annotated, stats = annotate(cfg["method"], dataset, demos, gateway, params)
    out = _ensure_out_dir(cfg["out_dir"])
    write_annotated(out / "annotated.jsonl", annotated)
    write_stats(out / "distill_stats.json", stats)
    write_run_manifest(out, "distill", cfg, [cfg["data"], *demo_inputs])
    click.echo(f"annotated {stats.total} instances: {stats.accepted_cote} filtered, "
               f"{stats.backup_rp} rationalized, {stats.none_count} without explanation "
               f"({gateway.stats.cache_hits}/{gateway.stats.requests} cache hits)")


@main.command()
@click.option("--annotated", "annotated_path", required=True,
              help="annotated JSONL from distill")
@click.option("--kind", type=click.Choice(sorted(KIND_TOKENS)), required=True)
@click.option("--mode", type=click.Choice(TARGET_MODES), required=True)
@click.option("--dev", "dev_path", default=None,
              help="also emit answer-task records for this dev split")
@click.option("--out-dir", required=True)
@click.option("--config", "config_path", default=None, help="TOML config file")
@click.pass_context
@pipeline_command
def emit(ctx: click.Context, **kwargs) -> None:
    """Build a training corpus from annotated instances."""
    from .distill import load_annotated

    config_path = kwargs.pop("config_path")
    cfg = _merge_config(ctx, config_path, kwargs)
    kind = _resolve_kind(cfg["kind"])
    annotated = load_annotated(cfg["annotated_path"], kind)
    mode = TargetMode(cfg["mode"])
    records, report = emit_records(annotated, mode, kind)
    out = _ensure_out_dir(cfg["out_dir"])
    write_train_records(out / "train.jsonl", records)
    write_emit_report(out / "emit_report.json", report)
    inputs = [cfg["annotated_path"]]
    if cfg["dev_path"]:
        dev = load_dataset(cfg["dev_path"], kind)
        wrapped = [AnnotatedInstance(inst, None, SOURCE_NONE, None, None)
                   for inst in dev.instances]
        dev_records, _ = emit_records(wrapped, TargetMode.ST, kind)
        write_train_records(out / "dev.jsonl", dev_records)
        inputs.append(cfg["dev_path"])
    write_run_manifest(out, "emit", cfg, inputs)
    click.echo(f"emitted {report.qta_records} answer-task and {report.qtr_records} "
               f"reasoning-task records ({report.skipped_no_explanation} skipped)")


@main.group()
def orchestrate() -> None:
    """Drive external trainers over grids, splits, and experiment matrices."""


@orchestrate.command()
@click.option("--train", "train_path", required=True, help="training records JSONL")
@click.option("--dev", "dev_path", required=True, help="dev records JSONL")
@click.option("--mode", type=click.Choice(TARGET_MODES), required=True)
@click.option("--trainer", required=True, help="trainer command line")
@click.option("--grid", default=",".join(f"{a:g}" for a in DEFAULT_ALPHA_GRID),
              show_default=True, help="comma-separated loss weights")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--model-tag", default="default", show_default=True)
@click.option("--out-dir", required=True)
@click.option("--config", "config_path", default=None, help="TOML config file")
@click.pass_context
@pipeline_command
def grid(ctx: click.Context, **kwargs) -> None:
    """Sweep the answer-task loss weight and pick the best by dev accuracy."""
    config_path = kwargs.pop("config_path")
    cfg = _merge_config(ctx, config_path, kwargs)
    out = _ensure_out_dir(cfg["out_dir"])
    result = grid_search_alpha(
        _trainer_argv(cfg["trainer"]), cfg["train_path"], cfg["dev_path"],
        cfg["mode"], out, seed=cfg["seed"], model_tag=cfg["model_tag"],
        grid=_parse_numbers(cfg["grid"], float))
    as_dict = result.as_dict()
    save_grid_figure(as_dict, out / "grid_result.png")
    import csv as _csv

    with open(out / "grid_result.csv", "w", encoding="utf-8", newline="") as handle:
        writer = _csv.writer(handle)
        writer.writerow(["alpha", "dev_accuracy"])
        for alpha_key in sorted(as_dict["dev_accuracy"], key=float):
            writer.writerow([alpha_key, as_dict["dev_accuracy"][alpha_key]])
    write_run_manifest(out, "orchestrate grid", cfg,
                       [cfg["train_path"], cfg["dev_path"]])
    click.echo(f"selected loss weight {result.alpha_star:g} "
               f"(dev accuracy {result.dev_accuracy[result.alpha_star]:.4f})")


@orchestrate.command()
@click.option("--data", required=True, help="instances JSONL to sample from")
@click.option("--kind", type=click.Choice(sorted(KIND_TOKENS)), required=True)
@click.option("--sizes", default="50,100,200,400", show_default=True)
@click.option("--splits-per-size", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", required=True)
@click.option("--config", "config_path", default=None, help="TOML config file")
@click.pass_context
@pipeline_command
def fewshot(ctx: click.Context, **kwargs) -> None:
    """Sample nested few-shot training splits and write the id manifest."""
    config_path = kwargs.pop("config_path")
    cfg = _merge_config(ctx, config_path, kwargs)
    dataset = load_dataset(cfg["data"], _resolve_kind(cfg["kind"]))
    manifest = sample_fewshot_splits(dataset, _parse_numbers(cfg["sizes"], int),
                                     cfg["splits_per_size"], cfg["seed"])
    out = _ensure_out_dir(cfg["out_dir"])
    write_split_manifest(out / "splits.json", manifest)
    write_run_manifest(out, "orchestrate fewshot", cfg, [cfg["data"]])
    click.echo(f"sampled {len(manifest['splits'])} splits "
               f"(sizes {cfg['sizes']}, seed {cfg['seed']})")


@orchestrate.command()
@click.option("--cells", "cells_path", required=True,
              help="experiment cell definitions JSON")
@click.option("--trainer", required=True, help="trainer command line")
@click.option("--base-seed", type=int, default=0, show_default=True)
@click.option("--out-dir", required=True)
@click.option("--config", "config_path", default=None, help="TOML config file")
@click.pass_context
@pipeline_command
def matrix(ctx: click.Context, **kwargs) -> None:
    """Run an experiment matrix resumably and summarize the ledger."""
    config_path = kwargs.pop("config_path")
    cfg = _merge_config(ctx, config_path, kwargs)
    with open(cfg["cells_path"], "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    cell_records = raw["cells"] if isinstance(raw, dict) else raw
    cells = [ExperimentCell(
        cell_id=rec["cell_id"], mode=rec["mode"], method=rec["method"],
        run_index=int(rec["run_index"]), alpha=float(rec["alpha"]),
        train_records=rec["train_records"], dev_records=rec["dev_records"],
        model_tag=rec.get("model_tag", "default")) for rec in cell_records]
    out = _ensure_out_dir(cfg["out_dir"])
    ledger = run_experiment(_trainer_argv(cfg["trainer"]), cells, out,
                            base_seed=cfg["base_seed"])
    report = summarize_ledger(ledger)
    write_report_json(out / "report.json", report)
    write_report_csv(out / "report.csv", report)
    if report["cells"]:
        save_accuracy_figure(report, out / "report.png")
    write_run_manifest(out, "orchestrate matrix", cfg, [cfg["cells_path"]])
    complete = sum(1 for entry in ledger["cells"].values()
                   if entry.get("status") == "complete")
    click.echo(f"{complete}/{len(cells)} cells complete; "
               f"report covers {len(report['cells'])} (mode, method) groups")


@main.command("eval")
@click.option("--predictions", "predictions_path", required=True)
@click.option("--data", required=True, help="gold instances JSONL")
@click.option("--kind", type=click.Choice(sorted(KIND_TOKENS)), required=True)
@click.option("--out-dir", required=True)
@click.option("--config", "config_path", default=None, help="TOML config file")
@click.pass_context
@pipeline_command
def eval_command(ctx: click.Context, **kwargs) -> None:
    """Score a generations file against gold answers."""
    config_path = kwargs.pop("config_path")
    cfg = _merge_config(ctx, config_path, kwargs)
    kind = _resolve_kind(cfg["kind"])
    dataset = load_dataset(cfg["data"], kind)
    predictions = load_predictions(cfg["predictions_path"])
    accuracy = score_predictions(predictions, dataset)
    out = _ensure_out_dir(cfg["out_dir"])
    with open(out / "accuracy.json", "w", encoding="utf-8") as handle:
        json.dump({"correct": accuracy.correct, "total": accuracy.total,
                   "accuracy": accuracy.accuracy, "percent": accuracy.percent},
                  handle, indent=2)
        handle.write("\n")
    write_run_manifest(out, "eval", cfg, [cfg["predictions_path"], cfg["data"]])
    click.echo(f"{accuracy.correct}/{accuracy.total} correct "
               f"({accuracy.percent:.2f}%)")


@main.command()
@click.option("--data", required=True, help="evaluation instances JSONL")
@click.option("--kind", type=click.Choice(sorted(KIND_TOKENS)), default=None,
              help="dataset shape; inferred from --bundled-demos when omitted")
@click.option("--demos", default=None, help="demonstrations JSONL")
@click.option("--bundled-demos", default=None,
              type=click.Choice(sorted(BUNDLED_DEMO_KINDS)),
              help="use a packaged 7-shot demonstration set")
@click.option("--style", type=click.Choice(sorted(BASELINE_STYLE_TOKENS)),
              required=True, help="prompting style")
@_gateway_options
@click.option("--out-dir", required=True)
@click.option("--config", "config_path", default=None, help="TOML config file")
@click.pass_context
@pipeline_command
def baseline(ctx: click.Context, **kwargs) -> None:
    """Run a few-shot prompting evaluation and score it."""
    config_path = kwargs.pop("config_path")
    cfg = _merge_config(ctx, config_path, kwargs)
    kind, demos, demo_inputs = _resolve_demos(
        _resolve_kind(cfg["kind"]), cfg["demos"], cfg["bundled_demos"])
    dataset = load_dataset(cfg["data"], kind)
    gateway = _build_gateway(cfg["backend"], cfg["cache_dir"], cfg["endpoint"],
                             cfg["model"], cfg["parallelism"], cfg["rate_limit"],
                             cfg["rate_period"])
    params = DecodeParams(temperature=cfg["temperature"], max_tokens=cfg["max_tokens"])
    accuracy, predictions = run_prompting_baseline(
        dataset, demos, BASELINE_STYLE_TOKENS[cfg["style"]], gateway, params)
    out = _ensure_out_dir(cfg["out_dir"])
    write_predictions(out / "predictions.jsonl", predictions)
    with open(out / "accuracy.json", "w", encoding="utf-8") as handle:
        json.dump({"correct": accuracy.correct, "total": accuracy.total,
                   "accuracy": accuracy.accuracy, "percent": accuracy.percent},
                  handle, indent=2)
        handle.write("\n")
    write_run_manifest(out, "baseline", cfg, [cfg["data"], *demo_inputs])
    click.echo(f"{cfg['style']} baseline: {accuracy.correct}/{accuracy.total} "
               f"correct ({accuracy.percent:.2f}%)")


@main.command("human-eval")
@click.option("--votes", "votes_path", required=True, help="annotation sheet CSV")
@click.option("--key", "key_path", required=True, help="shuffle key JSON")
@click.option("--label-a", default="model A", show_default=True)
@click.option("--label-b", default="model B", show_default=True)
@click.option("--out-dir", required=True)
@click.option("--config", "config_path", default=None, help="TOML config file")
@click.pass_context
@pipeline_command
def human_eval(ctx: click.Context, **kwargs) -> None:
    """Aggregate a preference sheet into the report, table, and figure."""
    config_path = kwargs.pop("config_path")
    cfg = _merge_config(ctx, config_path, kwargs)
    votes = read_votes_csv(cfg["votes_path"])
    key = read_shuffle_key(cfg["key_path"])
    report = aggregate_preferences(votes, key)
    out = _ensure_out_dir(cfg["out_dir"])
    write_preference_report(out / "preference_report.json", report)
    write_preference_csv(out / "preference_report.csv", report)
    save_preference_figure(report.as_dict(), out / "preference_report.png",
                           label_a=cfg["label_a"], label_b=cfg["label_b"])
    write_run_manifest(out, "human-eval", cfg, [cfg["votes_path"], cfg["key_path"]])
    click.echo(f"n={report.n_examples}: {report.pct_a:g}% {cfg['label_a']} / "
               f"{report.pct_tie:g}% tie / {report.pct_b:g}% {cfg['label_b']}")


@main.command()
@click.option("--runs", "runs_path", required=True,
              help='per-run counts JSON: [{"mode", "method", "runs": '
                   '[{"correct", "total"}, ...]}, ...]')
@click.option("--out-dir", required=True)
@click.option("--config", "config_path", default=None, help="TOML config file")
@click.pass_context
@pipeline_command
def stats(ctx: click.Context, **kwargs) -> None:
    """Aggregate per-run accuracy counts into a mean and spread report."""
    config_path = kwargs.pop("config_path")
    cfg = _merge_config(ctx, config_path, kwargs)
    with open(cfg["runs_path"], "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    cell_records = raw["cells"] if isinstance(raw, dict) else raw
    cells = {}
    for rec in cell_records:
        runs = [RunAccuracy(int(r["correct"]), int(r["total"])) for r in rec["runs"]]
        cells[(rec["mode"], rec["method"])] = runs
    report = build_report(cells)
    out = _ensure_out_dir(cfg["out_dir"])
    write_report_json(out / "report.json", report)
    write_report_csv(out / "report.csv", report)
    save_accuracy_figure(report, out / "report.png")
    write_run_manifest(out, "stats", cfg, [cfg["runs_path"]])
    click.echo(f"aggregated {len(report['cells'])} (mode, method) cells")


if __name__ == "__main__":
    main()
