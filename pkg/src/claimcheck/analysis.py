"""Post-hoc analyses: rationale-length decile scoring and error-tag aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .client import Tokenizer, WhitespaceTokenizer
from .core import ClaimCheckError, ConfusionCounts
from .metrics import ClassAbsent, EvalRecord, balanced_accuracy, confusion

N_DECILES = 10


class TooFewRecords(ClaimCheckError):
    """Not enough records with rationales to form deciles."""


class ErrorTag(Enum):
    """Canonical error taxonomy labels; assigned by external audits."""

    LEXICAL_OVERLAP = "lexical_overlap"
    ARITHMETIC = "arithmetic"
    OVERCAUTIOUS = "overcautious"
    NEGATION_TEMPORAL = "negation_temporal"
    INSUFFICIENT_AGGREGATION = "insufficient_aggregation"
    OTHER = "other"

    @classmethod
    def from_string(cls, raw: str) -> ErrorTag:
        key = raw.strip().casefold().replace("-", "_").replace(" ", "_").replace("/", "_")
        for tag in cls:
            if key == tag.value or key == tag.name.casefold():
                return tag
        return cls.OTHER


@dataclass(frozen=True)
class DecileBucket:
    """Length-ordered slice of the evaluation set with its own metrics.

    Metrics are None when undefined inside the bucket (a gold class or a
    prediction class can vanish in a small slice); that is a marker, not an
    error.
    """

    index: int
    min_len: int
    max_len: int
    size: int
    counts: ConfusionCounts
    bacc: float | None
    precision: float | None
    recall: float | None


@dataclass(frozen=True)
class DecileReport:
    buckets: tuple[DecileBucket, ...]
    excluded: int
    tokenizer: str


def _bucket_sizes(n: int, k: int) -> list[int]:
    base, remainder = divmod(n, k)
    return [base + 1] * remainder + [base] * (k - remainder)


def _bucket_metrics(records: Sequence[EvalRecord]) -> tuple[float | None, float | None, float | None]:
    counts = confusion(records)
    try:
        bacc = balanced_accuracy(counts)
    except ClassAbsent:
        bacc = None
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else None
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else None
    return bacc, precision, recall


def length_decile_analysis(
    records: Sequence[EvalRecord], tokenizer: Tokenizer | None = None
) -> DecileReport:
    """Bucket rationale-bearing records into ten equal-sized deciles by token
    length and score each bucket.

    Records without a rationale are excluded and counted. Sorting is stable on
    (length, id), so bucket membership does not depend on input order; any
    size remainder goes to the earliest buckets.
    """
    tokenizer = tokenizer or WhitespaceTokenizer()
    scored = [r for r in records if r.reasoning is not None]
    excluded = len(records) - len(scored)
    if len(scored) < N_DECILES:
        raise TooFewRecords(
            f"need at least {N_DECILES} records with rationales, got {len(scored)}"
        )

    lengths = {r.id: tokenizer.count(r.reasoning) for r in scored}
    ordered = sorted(scored, key=lambda r: (lengths[r.id], r.id))

    buckets = []
    cursor = 0
    for index, size in enumerate(_bucket_sizes(len(ordered), N_DECILES)):
        chunk = ordered[cursor : cursor + size]
        cursor += size
        bacc, precision, recall = _bucket_metrics(chunk)
        buckets.append(
            DecileBucket(
                index=index,
                min_len=lengths[chunk[0].id],
                max_len=lengths[chunk[-1].id],
                size=size,
                counts=confusion(chunk),
                bacc=bacc,
                precision=precision,
                recall=recall,
            )
        )
    name = getattr(tokenizer, "name", type(tokenizer).__name__)
    return DecileReport(buckets=tuple(buckets), excluded=excluded, tokenizer=name)


@dataclass(frozen=True)
class ErrorReport:
    """Tag tallies over the error subset of an evaluation run."""

    total_records: int
    error_count: int
    tag_counts: dict[ErrorTag, int]
    share_of_errors: dict[ErrorTag, float]
    share_of_total: dict[ErrorTag, float]
    multi_tag_records: int
    untagged_errors: int


def error_report(records: Sequence[EvalRecord]) -> ErrorReport:
    """Aggregate externally assigned error tags.

    Errors are records whose prediction is missing or wrong. A record with
    several tags increments each of them once; how many records carry more
    than one tag is reported separately so shares stay interpretable.
    """
    errors = [r for r in records if r.predicted is not r.gold]
    tag_counts = {tag: 0 for tag in ErrorTag}
    multi_tag = 0
    untagged = 0
    for record in errors:
        tags = {ErrorTag.from_string(t) for t in record.tags}
        if not tags:
            untagged += 1
            continue
        if len(tags) > 1:
            multi_tag += 1
        for tag in tags:
            tag_counts[tag] += 1

    n_errors = len(errors)
    n_total = len(records)
    return ErrorReport(
        total_records=n_total,
        error_count=n_errors,
        tag_counts=tag_counts,
        share_of_errors={
            tag: (count / n_errors if n_errors else 0.0) for tag, count in tag_counts.items()
        },
        share_of_total={
            tag: (count / n_total if n_total else 0.0) for tag, count in tag_counts.items()
        },
        multi_tag_records=multi_tag,
        untagged_errors=untagged,
    )
