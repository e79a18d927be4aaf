"""Exception types shared across the pipeline.

Every error raised on purpose by this package derives from PipelineError so
callers (and the CLI) can catch one base class and still tell failures apart.
"""
from __future__ import annotations


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class MalformedRecord(PipelineError):
    """A JSONL line failed to parse or is missing required fields."""

    def __init__(self, path: str, line_no: int, reason: str) -> None:
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


class GoldNotInChoices(PipelineError):
    """A record's gold answer does not name one of its choices."""

    def __init__(self, instance_id: str, detail: str = "") -> None:
        msg = f"gold answer not among choices for instance {instance_id!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.instance_id = instance_id


class TooFewDemos(PipelineError):
    """A demonstration file holds fewer entries than required."""

    def __init__(self, found: int, required: int) -> None:
        super().__init__(f"need at least {required} demonstrations, found {found}")
        self.found = found
        self.required = required


class KindMismatch(PipelineError):
    """Demonstrations and instances come from differently shaped datasets."""


class MissingGold(PipelineError):
    """An operation that conditions on the gold answer got an instance without one."""


class PromptTooLong(PipelineError):
    """A rendered prompt exceeded the configured length budget."""

    def __init__(self, length: int, limit: int) -> None:
        super().__init__(f"prompt length {length} exceeds limit {limit}")
        self.length = length
        self.limit = limit


class NetworkError(PipelineError):
    """The completion backend could not be reached or answered with a server error."""


class RateLimited(NetworkError):
    """The completion backend asked us to slow down."""


class ReplayMiss(PipelineError):
    """A replayed completion was requested that the replay directory does not hold."""

    def __init__(self, fingerprint: str) -> None:
        super().__init__(f"no replayed completion for fingerprint {fingerprint}")
        self.fingerprint = fingerprint


class BatchCompletionFailed(PipelineError):
    """One or more items of a batch completion failed.

    Successful results are kept in .results (None at failed positions) and the
    failures in .errors as (index, exception) pairs, so callers may continue
    with what succeeded.
    """

    def __init__(self, results: list, errors: list[tuple[int, Exception]]) -> None:
        first = errors[0][1] if errors else None
        super().__init__(f"{len(errors)} of {len(results)} completions failed: {first}")
        self.results = results
        self.errors = errors


class ModeRequiresExplanations(PipelineError):
    """A reasoning-task corpus was requested from records that hold no explanations."""


class TrainerFailure(PipelineError):
    """An external trainer invocation exited abnormally or wrote no usable metrics."""

    def __init__(self, detail: str, alpha: float | None = None) -> None:
        super().__init__(detail)
        self.alpha = alpha


class SizeExceedsDataset(PipelineError):
    """A requested sample size is larger than the dataset sampled from."""

    def __init__(self, size: int, available: int) -> None:
        super().__init__(f"cannot sample {size} instances from {available}")
        self.size = size
        self.available = available


class IncompleteSheet(PipelineError):
    """A vote sheet does not hold exactly one vote per annotator per example."""

    def __init__(self, example_id: str, detail: str = "") -> None:
        msg = f"incomplete votes for example {example_id!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.example_id = example_id


class UnknownExample(PipelineError):
    """A vote references an example id absent from the shuffle key."""

    def __init__(self, example_id: str) -> None:
        super().__init__(f"vote references unknown example {example_id!r}")
        self.example_id = example_id


class StyleRequiresGold(PipelineError):
    """A prompting baseline was asked to use a style that leaks the gold answer."""


class ConfigInvalid(PipelineError):
    """A config document could not be parsed or holds unknown or ill-typed keys."""
