"""Reasoning-augmented dataset construction: oracle annotation, agreement
filtering, dev split, and training-file export.

Every input pair lands in exactly one outcome category, so the stats always
conserve the input count. Only transport failures are retried; a malformed or
disagreeing oracle answer is recorded and dropped, never re-asked.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .client import (
    CompletionClient,
    CompletionRequest,
    DecodingParams,
    MockBackend,
    prompt_digest,
)
from .core import ClaimCheckError, DataFormatError, GroundedPair, ReasoningExample
from .parsing import ParsedOutput, parse_oracle_output
from .prompts import render_oracle_prompt, render_training_example, template_checksums
from .records import write_jsonl


class InvalidFraction(ClaimCheckError):
    """Split fraction outside (0, 1)."""


class IoFailure(ClaimCheckError):
    """Could not write a dataset or manifest file."""


# Hyperparameter block embedded in export manifests so downstream fine-tuning
# runs are self-documenting. This package never performs gradient updates.
TRAINER_CONFIG = {
    "method": "lora_sft",
    "quantization": "4bit",
    "lora": {
        "rank": 64,
        "alpha": 64,
        "target_modules": [
            "q_proj", "k_proj", "v_proj", "o_proj",
            "gate_proj", "up_proj", "down_proj",
        ],
    },
    "learning_rate": 2e-4,
    "lr_schedule": "linear",
    "epochs": 1,
    "warmup_steps": 5,
    "batch_size": 4,
    "gradient_accumulation_steps": 4,
    "optimizer": "adamw_8bit",
    "weight_decay": 0.01,
}


class AnnotationStatus(Enum):
    KEPT = "kept"
    DROPPED_DISAGREE = "dropped_disagree"
    DROPPED_MALFORMED = "dropped_malformed"
    DROPPED_BACKEND = "dropped_backend"


@dataclass(frozen=True)
class AnnotationOutcome:
    """Filter decision for one pair's oracle annotation."""

    pair: GroundedPair
    parsed: ParsedOutput
    status: AnnotationStatus
    error: str | None = None


@dataclass(frozen=True)
class BuildStats:
    input_count: int
    kept: int
    dropped_disagree: int
    dropped_malformed: int
    dropped_backend: int

    def __post_init__(self) -> None:
        dropped = self.dropped_disagree + self.dropped_malformed + self.dropped_backend
        if self.kept + dropped != self.input_count:
            raise ValueError("outcome categories do not sum to the input count")

    @property
    def retention_rate(self) -> float:
        return self.kept / self.input_count if self.input_count else 0.0

    @classmethod
    def from_outcomes(cls, outcomes: Sequence[AnnotationOutcome]) -> BuildStats:
        tally = {status: 0 for status in AnnotationStatus}
        for outcome in outcomes:
            tally[outcome.status] += 1
        return cls(
            input_count=len(outcomes),
            kept=tally[AnnotationStatus.KEPT],
            dropped_disagree=tally[AnnotationStatus.DROPPED_DISAGREE],
            dropped_malformed=tally[AnnotationStatus.DROPPED_MALFORMED],
            dropped_backend=tally[AnnotationStatus.DROPPED_BACKEND],
        )

    def as_dict(self) -> dict:
        return {
            "input_count": self.input_count,
            "kept": self.kept,
            "dropped_disagree": self.dropped_disagree,
            "dropped_malformed": self.dropped_malformed,
            "dropped_backend": self.dropped_backend,
            "retention_rate": self.retention_rate,
        }


def annotate(
    pairs: Sequence[GroundedPair],
    client: CompletionClient,
    params: DecodingParams | None = None,
    parallelism: int = 1,
) -> list[AnnotationOutcome]:
    """Ask the oracle for a rationale per pair and classify each answer.

    KEPT requires a well-formed completion with a non-empty rationale whose
    verdict matches the gold label; everything else drops into a category that
    names why.
    """
    for pair in pairs:
        if pair.gold is None:
            raise DataFormatError(f"pair {pair.id!r} has no gold label; cannot filter")
    params = params or DecodingParams()
    requests = [
        CompletionRequest(pair.id, render_oracle_prompt(pair).text, params) for pair in pairs
    ]
    slots = client.complete_batch(requests, parallelism=parallelism)

    outcomes = []
    for pair, slot in zip(pairs, slots):
        if isinstance(slot, ClaimCheckError):
            outcomes.append(
                AnnotationOutcome(
                    pair=pair,
                    parsed=ParsedOutput(raw=""),
                    status=AnnotationStatus.DROPPED_BACKEND,
                    error=str(slot),
                )
            )
            continue
        parsed = parse_oracle_output(slot.text)
        if not parsed.format_ok or not parsed.reasoning:
            status = AnnotationStatus.DROPPED_MALFORMED
        elif parsed.verdict is not pair.gold:
            status = AnnotationStatus.DROPPED_DISAGREE
        else:
            status = AnnotationStatus.KEPT
        outcomes.append(AnnotationOutcome(pair=pair, parsed=parsed, status=status))
    return outcomes


def agreement_filter(
    outcomes: Sequence[AnnotationOutcome],
) -> tuple[list[ReasoningExample], BuildStats]:
    """Convert KEPT outcomes into training examples and tally the rest."""
    examples = [
        ReasoningExample(pair=o.pair, reasoning=o.parsed.reasoning, verdict=o.pair.gold)
        for o in outcomes
        if o.status is AnnotationStatus.KEPT
    ]
    return examples, BuildStats.from_outcomes(outcomes)


def split_dev(
    examples: Sequence[ReasoningExample], fraction: float = 0.2, seed: int = 0
) -> tuple[list[ReasoningExample], list[ReasoningExample]]:
    """Seeded shuffle-then-cut split; the dev set takes round(fraction * N)."""
    if not 0 < fraction < 1:
        raise InvalidFraction(f"fraction must be in (0, 1), got {fraction}")
    shuffled = list(examples)
    random.Random(seed).shuffle(shuffled)
    dev_size = round(fraction * len(shuffled))
    return shuffled[dev_size:], shuffled[:dev_size]


def export_training_file(
    examples: Sequence[ReasoningExample],
    with_reasoning: bool,
    path: str | Path,
    seed: int | None = None,
) -> dict:
    """Write one rendered training text per line plus a sidecar manifest.

    The manifest carries template checksums, the seed, counts, and the
    fine-tuning hyperparameter block for whatever trainer consumes the file.
    """
    path = Path(path)
    records = [
        {"id": ex.pair.id, "text": render_training_example(ex, with_reasoning)}
        for ex in examples
    ]
    manifest = {
        "format": "sft_think" if with_reasoning else "sft_nothink",
        "with_reasoning": with_reasoning,
        "count": len(records),
        "seed": seed,
        "template_checksums": template_checksums(),
        "trainer_config": TRAINER_CONFIG,
    }
    try:
        write_jsonl(path, records)
        manifest_path = path.with_name(path.name + ".manifest.json")
        manifest_path.write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except OSError as err:
        raise IoFailure(f"cannot write training export to {path}: {err}") from err
    return manifest


def oracle_completion_text(reasoning: str, token: str) -> str:
    """A well-formed oracle answer carrying the given rationale and verdict."""
    return f"<reasoning>\n{reasoning}\n</reasoning>\n<entailment>\n{token}\n</entailment>"


def _default_reasoning(pair: GroundedPair, agrees: bool) -> str:
    stance = "is" if agrees else "is not"
    return (
        "The document states the facts relevant to the claim.\n"
        f"Comparing them shows the claim {stance} backed by the document."
    )


def oracle_mock_tables(
    pairs: Iterable[GroundedPair],
    disagree_rate: float = 0.0,
    seed: int = 0,
    malformed_ids: Iterable[str] = (),
    backend_fail_ids: Iterable[str] = (),
    bernoulli: bool = False,
) -> tuple[dict[str, str], set[str]]:
    """Build MockBackend tables for a planted-error oracle persona.

    By default exactly round(disagree_rate * eligible) pairs get a flipped
    verdict (a seeded sample); with ``bernoulli`` each eligible pair flips
    independently. Returns (completion table, failing digest set).
    """
    pairs = list(pairs)
    malformed = set(malformed_ids)
    failing = set(backend_fail_ids)
    rng = random.Random(seed)
    eligible = [p.id for p in pairs if p.id not in malformed and p.id not in failing]
    if bernoulli:
        flipped = {pid for pid in eligible if rng.random() < disagree_rate}
    else:
        flipped = set(rng.sample(eligible, round(disagree_rate * len(eligible))))

    table: dict[str, str] = {}
    fail_digests: set[str] = set()
    for pair in pairs:
        digest = prompt_digest(render_oracle_prompt(pair).text)
        if pair.id in failing:
            fail_digests.add(digest)
            continue
        if pair.id in malformed:
            table[digest] = "The claim may or may not follow; hard to say."
            continue
        verdict = pair.gold.flipped() if pair.id in flipped else pair.gold
        agrees = verdict is pair.gold
        table[digest] = oracle_completion_text(_default_reasoning(pair, agrees), verdict.token)
    return table, fail_digests


def mock_oracle_client(
    pairs: Iterable[GroundedPair],
    disagree_rate: float = 0.0,
    seed: int = 0,
    malformed_ids: Iterable[str] = (),
    backend_fail_ids: Iterable[str] = (),
    bernoulli: bool = False,
) -> CompletionClient:
    """A ready-to-use client over the planted-error oracle persona."""
    table, fail_digests = oracle_mock_tables(
        pairs,
        disagree_rate=disagree_rate,
        seed=seed,
        malformed_ids=malformed_ids,
        backend_fail_ids=backend_fail_ids,
        bernoulli=bernoulli,
    )
    backend = MockBackend(table=table, fail_digests=fail_digests)
    return CompletionClient(backend, backoff_base_s=0.0, prompt_token_ceiling=10**9)
