"""Scoring and statistical comparison: confusion tallies, balanced accuracy,
plain accuracy, and paired bootstrap significance between two prediction sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from ._kernels import joint_counts, kernel_backend
from .core import ClaimCheckError, ConfusionCounts, DataFormatError, Verdict
from .records import parse_optional_verdict, read_jsonl, verdict_from_label, write_jsonl


class ClassAbsent(ClaimCheckError):
    """A gold class has zero instances; the metric is undefined, not zero."""


class EmptySet(ClaimCheckError):
    """No records to score."""


class UnpairedRecords(ClaimCheckError):
    """The two prediction sets do not cover the identical id set."""


MetricName = Literal["bacc", "acc"]

# Rows drawn per kernel call. Fixed (not configurable) so a given seed always
# consumes the random stream in the same order.
_CHUNK_ROWS = 1024
# Safety valve for degenerate inputs where nearly every resample loses a class.
_MAX_REDRAW_FACTOR = 100


@dataclass(frozen=True)
class EvalRecord:
    """One scored instance: gold verdict plus an optional prediction."""

    id: str
    gold: Verdict
    predicted: Verdict | None = None
    reasoning: str | None = None
    source: str = ""
    tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class BootstrapResult:
    """Outcome of a paired bootstrap comparison (A minus B)."""

    metric: str
    delta_observed: float
    p_value: float
    ci_low: float
    ci_high: float
    resamples: int
    seed: int
    redraws: int = 0
    kernel: str = ""


def confusion(records: Sequence[EvalRecord]) -> ConfusionCounts:
    """Tally records against gold; a missing prediction counts as wrong."""
    tp = fp = tn = fn = 0
    for record in records:
        correct = record.predicted is record.gold
        if record.gold is Verdict.SUPPORTED:
            tp += correct
            fn += not correct
        else:
            tn += correct
            fp += not correct
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def balanced_accuracy(counts: ConfusionCounts) -> float:
    """Mean of positive-class recall and negative-class recall."""
    if counts.tp + counts.fn == 0:
        raise ClassAbsent("no SUPPORTED gold instances; balanced accuracy undefined")
    if counts.tn + counts.fp == 0:
        raise ClassAbsent("no NOT_SUPPORTED gold instances; balanced accuracy undefined")
    recall_pos = counts.tp / (counts.tp + counts.fn)
    recall_neg = counts.tn / (counts.tn + counts.fp)
    return 0.5 * (recall_pos + recall_neg)


def accuracy(counts: ConfusionCounts) -> float:
    if counts.total == 0:
        raise EmptySet("no records to score")
    return (counts.tp + counts.tn) / counts.total


def compute_metric(records: Sequence[EvalRecord], metric: MetricName) -> float:
    if metric == "bacc":
        return balanced_accuracy(confusion(records))
    if metric == "acc":
        return accuracy(confusion(records))
    raise ValueError(f"unknown metric {metric!r}")


def _aligned_arrays(
    a: Sequence[EvalRecord], b: Sequence[EvalRecord]
) -> tuple[np.ndarray, list[EvalRecord]]:
    """Pair B's records to A's order by id and encode joint category codes."""
    ids_a = [r.id for r in a]
    if len(set(ids_a)) != len(ids_a):
        raise UnpairedRecords("duplicate ids in prediction set A")
    by_id_b = {r.id: r for r in b}
    if len(by_id_b) != len(b):
        raise UnpairedRecords("duplicate ids in prediction set B")
    if set(ids_a) != set(by_id_b):
        missing = sorted(set(ids_a) ^ set(by_id_b))[:5]
        raise UnpairedRecords(f"id sets differ between A and B (e.g. {missing})")

    codes = np.empty(len(a), dtype=np.int64)
    b_aligned = []
    for i, rec_a in enumerate(a):
        rec_b = by_id_b[rec_a.id]
        if rec_b.gold is not rec_a.gold:
            raise UnpairedRecords(f"gold labels differ for id {rec_a.id!r}")
        correct_a = rec_a.predicted is rec_a.gold
        correct_b = rec_b.predicted is rec_b.gold
        codes[i] = rec_a.gold.bit * 4 + correct_a * 2 + correct_b
        b_aligned.append(rec_b)
    return codes, b_aligned


def _row_deltas(counts: np.ndarray, metric: MetricName, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-resample metric delta (A - B) from joint category counts.

    Returns the deltas and a validity mask; a row is invalid when a gold class
    vanished from the resample and balanced accuracy is undefined there.
    """
    pos = counts[:, 4:].sum(axis=1)
    neg = counts[:, :4].sum(axis=1)
    tp_a = counts[:, 6] + counts[:, 7]
    tn_a = counts[:, 2] + counts[:, 3]
    tp_b = counts[:, 5] + counts[:, 7]
    tn_b = counts[:, 1] + counts[:, 3]
    if metric == "bacc":
        valid = (pos > 0) & (neg > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            deltas = 0.5 * ((tp_a - tp_b) / pos + (tn_a - tn_b) / neg)
        deltas = np.where(valid, deltas, 0.0)
    else:
        valid = np.ones(len(counts), dtype=bool)
        deltas = ((tp_a + tn_a) - (tp_b + tn_b)) / n
    return deltas, valid


def paired_bootstrap(
    a: Sequence[EvalRecord],
    b: Sequence[EvalRecord],
    metric: MetricName = "bacc",
    resamples: int = 10_000,
    seed: int = 0,
) -> BootstrapResult:
    """Paired bootstrap over instance ids shared by two prediction sets.

    Each resample draws ids with replacement, scores both systems on the same
    draw, and records the metric delta. The two-sided p-value is the fraction
    of resampled deltas whose sign opposes (or zeroes) the observed delta,
    doubled and clamped to [0, 1]; the interval is the 95% percentile CI.
    Resamples that drop an entire gold class are redrawn and counted.
    """
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    if len(a) == 0:
        raise EmptySet("no records to compare")
    codes, b_aligned = _aligned_arrays(a, b)
    n = len(a)

    delta_observed = compute_metric(list(a), metric) - compute_metric(b_aligned, metric)

    rng = np.random.default_rng(seed)
    deltas = np.empty(resamples, dtype=np.float64)
    filled = 0
    redraws = 0
    max_redraws = _MAX_REDRAW_FACTOR * resamples
    while filled < resamples:
        rows = min(_CHUNK_ROWS, resamples - filled)
        idx = rng.integers(0, n, size=(rows, n), dtype=np.int64)
        counts = joint_counts(codes, idx)
        chunk_deltas, valid = _row_deltas(counts, metric, n)
        for r in np.flatnonzero(~valid):
            while True:
                redraws += 1
                if redraws > max_redraws:
                    raise ClassAbsent(
                        "bootstrap kept losing a gold class; the evaluation set is too small"
                    )
                retry_idx = rng.integers(0, n, size=(1, n), dtype=np.int64)
                retry_counts = joint_counts(codes, retry_idx)
                retry_delta, retry_valid = _row_deltas(retry_counts, metric, n)
                if retry_valid[0]:
                    chunk_deltas[r] = retry_delta[0]
                    break
        deltas[filled : filled + rows] = chunk_deltas
        filled += rows

    if delta_observed == 0.0:
        p_value = 1.0
    else:
        opposing = deltas <= 0.0 if delta_observed > 0.0 else deltas >= 0.0
        p_value = min(1.0, 2.0 * float(np.mean(opposing)))
    ci_low, ci_high = np.percentile(deltas, [2.5, 97.5])

    return BootstrapResult(
        metric=metric,
        delta_observed=float(delta_observed),
        p_value=p_value,
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        resamples=resamples,
        seed=seed,
        redraws=redraws,
        kernel=kernel_backend(),
    )


def load_eval_records(path: str | Path) -> list[EvalRecord]:
    """Load {id, gold, predicted, reasoning?, source?, tags?} prediction records."""
    records = []
    seen: set[str] = set()
    for lineno, raw in read_jsonl(path):
        record_id = raw.get("id")
        if not isinstance(record_id, str) or not record_id.strip():
            raise DataFormatError(f"{path}:{lineno}: field 'id' missing or empty")
        if record_id in seen:
            raise DataFormatError(f"{path}:{lineno}: duplicate id {record_id!r}")
        seen.add(record_id)
        if "gold" not in raw or raw["gold"] is None:
            raise DataFormatError(f"{path}:{lineno}: field 'gold' missing")
        tags = raw.get("tags", [])
        if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
            raise DataFormatError(f"{path}:{lineno}: 'tags' must be a list of strings")
        try:
            records.append(
                EvalRecord(
                    id=record_id,
                    gold=verdict_from_label(raw["gold"]),
                    predicted=parse_optional_verdict(raw.get("predicted")),
                    reasoning=raw.get("reasoning"),
                    source=str(raw.get("source", "")),
                    tags=tuple(tags),
                )
            )
        except DataFormatError as err:
            raise DataFormatError(f"{path}:{lineno}: {err}") from err
    return records


def eval_record_to_dict(record: EvalRecord) -> dict:
    out = {
        "id": record.id,
        "gold": record.gold.name,
        "predicted": record.predicted.name if record.predicted is not None else None,
        "reasoning": record.reasoning,
        "source": record.source,
    }
    if record.tags:
        out["tags"] = list(record.tags)
    return out


def write_eval_records(path: str | Path, records: Sequence[EvalRecord]) -> None:
    write_jsonl(path, (eval_record_to_dict(r) for r in records))
