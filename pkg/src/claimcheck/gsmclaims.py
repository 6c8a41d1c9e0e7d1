"""Turn math word problems with known answers into balanced claim pairs.

Each problem becomes a reference document plus one supported and one
unsupported claim; expanding every valid pair into two instances keeps the
label balance exactly 50/50 no matter which problems fail generation.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .client import (
    CompletionClient,
    CompletionRequest,
    DecodingParams,
    MockBackend,
    prompt_digest,
)
from .core import ClaimCheckError, GroundedPair, Verdict
from .prompts import render_gsmclaims_prompt
from .records import MathProblem

SOURCE_TAG = "gsmclaims"

_REQUIRED_KEYS = ("document", "positive_claim", "negative_claim")

_NUMBER_RE = re.compile(r"-?\d+(?:,\d{3})*(?:\.\d+)?")


class MalformedJson(ClaimCheckError):
    """Oracle output was not the bare JSON object the prompt demands."""


class InvalidPair(ClaimCheckError):
    """Generated claims violate the positive/negative contract."""


def last_number(text: str) -> float | None:
    """Value of the final numeric token; claims state their answer last."""
    matches = _NUMBER_RE.findall(text)
    if not matches:
        return None
    return float(matches[-1].replace(",", ""))


@dataclass(frozen=True)
class ClaimPairRecord:
    """One problem rewritten as a document plus opposing claims."""

    source_id: str
    document: str
    positive_claim: str
    negative_claim: str

    def __post_init__(self) -> None:
        for name in ("document", "positive_claim", "negative_claim"):
            if not getattr(self, name).strip():
                raise InvalidPair(f"{self.source_id}: {name} is empty")
        if self.positive_claim == self.negative_claim:
            raise InvalidPair(f"{self.source_id}: positive and negative claims are identical")
        pos_value = last_number(self.positive_claim)
        neg_value = last_number(self.negative_claim)
        if pos_value is None or neg_value is None:
            raise InvalidPair(f"{self.source_id}: both claims must contain a numeric token")
        if pos_value == neg_value:
            raise InvalidPair(
                f"{self.source_id}: claims embed the same answer value {pos_value}"
            )


def _extract_json_object(raw: str, strict: bool) -> dict:
    text = raw.strip()
    if strict:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise MalformedJson(f"not a bare JSON object: {err}") from err
    else:
        start = text.find("{")
        if start == -1:
            raise MalformedJson("no JSON object found")
        try:
            data, _ = json.JSONDecoder().raw_decode(text[start:])
        except json.JSONDecodeError as err:
            raise MalformedJson(f"no parseable JSON object: {err}") from err
    if not isinstance(data, dict):
        raise MalformedJson("top-level JSON value is not an object")
    return data


def parse_claim_pair(raw: str, source_id: str, strict: bool = True) -> ClaimPairRecord:
    """Parse and validate an oracle JSON answer into a ClaimPairRecord."""
    data = _extract_json_object(raw, strict)
    missing = [key for key in _REQUIRED_KEYS if not isinstance(data.get(key), str)]
    if missing:
        raise MalformedJson(f"missing or non-string keys: {missing}")
    return ClaimPairRecord(
        source_id=source_id,
        document=data["document"],
        positive_claim=data["positive_claim"],
        negative_claim=data["negative_claim"],
    )


def generate_claim_pair(
    problem: str,
    solution: str,
    client: CompletionClient,
    source_id: str = "pair",
    strict: bool = True,
    params: DecodingParams | None = None,
) -> ClaimPairRecord:
    """One oracle call: problem + solution in, validated claim pair out."""
    prompt = render_gsmclaims_prompt(problem, solution)
    result = client.complete(CompletionRequest(source_id, prompt.text, params or DecodingParams()))
    return parse_claim_pair(result.text, source_id=source_id, strict=strict)


def expand_to_instances(record: ClaimPairRecord) -> tuple[GroundedPair, GroundedPair]:
    """The two graded instances: same document, opposite gold labels."""
    positive = GroundedPair(
        id=f"{record.source_id}-pos",
        claim=record.positive_claim,
        document=record.document,
        gold=Verdict.SUPPORTED,
        source=SOURCE_TAG,
    )
    negative = GroundedPair(
        id=f"{record.source_id}-neg",
        claim=record.negative_claim,
        document=record.document,
        gold=Verdict.NOT_SUPPORTED,
        source=SOURCE_TAG,
    )
    return positive, negative


@dataclass(frozen=True)
class GsmBuildStats:
    input_count: int
    generated: int
    failed_backend: int
    failed_malformed: int
    failed_invalid: int
    seed: int

    @property
    def failed(self) -> int:
        return self.failed_backend + self.failed_malformed + self.failed_invalid

    @property
    def instance_count(self) -> int:
        return 2 * self.generated

    def as_dict(self) -> dict:
        return {
            "input_count": self.input_count,
            "generated": self.generated,
            "failed": self.failed,
            "failed_backend": self.failed_backend,
            "failed_malformed": self.failed_malformed,
            "failed_invalid": self.failed_invalid,
            "instance_count": self.instance_count,
            "seed": self.seed,
        }


def build_gsmclaims(
    problems: Sequence[MathProblem],
    client: CompletionClient,
    seed: int = 0,
    strict: bool = True,
    params: DecodingParams | None = None,
    parallelism: int = 1,
) -> tuple[list[GroundedPair], GsmBuildStats]:
    """Generate claim pairs for every problem and expand the valid ones.

    Content failures (bad JSON, invariant violations) are counted, not
    retried; per-problem atomicity means a failure removes both of its
    would-be instances, so the output stays exactly balanced. The final
    instance order is a seeded shuffle.
    """
    params = params or DecodingParams()
    requests = [
        CompletionRequest(p.id, render_gsmclaims_prompt(p.question, p.answer).text, params)
        for p in problems
    ]
    slots = client.complete_batch(requests, parallelism=parallelism)

    instances: list[GroundedPair] = []
    generated = failed_backend = failed_malformed = failed_invalid = 0
    for problem, slot in zip(problems, slots):
        if isinstance(slot, ClaimCheckError):
            failed_backend += 1
            continue
        try:
            record = parse_claim_pair(slot.text, source_id=problem.id, strict=strict)
        except MalformedJson:
            failed_malformed += 1
            continue
        except InvalidPair:
            failed_invalid += 1
            continue
        instances.extend(expand_to_instances(record))
        generated += 1

    random.Random(seed).shuffle(instances)
    stats = GsmBuildStats(
        input_count=len(problems),
        generated=generated,
        failed_backend=failed_backend,
        failed_malformed=failed_malformed,
        failed_invalid=failed_invalid,
        seed=seed,
    )
    return instances, stats


def _format_value(value: float) -> str:
    return str(int(value)) if value == int(value) else str(value)


def gsm_mock_tables(
    problems: Iterable[MathProblem],
    invalid_ids: Iterable[str] = (),
    prose_ids: Iterable[str] = (),
    malformed_ids: Iterable[str] = (),
    backend_fail_ids: Iterable[str] = (),
) -> tuple[dict[str, str], set[str]]:
    """MockBackend tables for a claim-pair oracle persona.

    The canned answer derives the positive value from the last number in the
    problem's solution (or a digest-derived stand-in) and offsets the negative
    value by one. Planted defects: ``invalid_ids`` embed the same value twice,
    ``prose_ids`` wrap the JSON in chatter, ``malformed_ids`` return no JSON.
    """
    invalid = set(invalid_ids)
    prose = set(prose_ids)
    malformed = set(malformed_ids)
    failing = set(backend_fail_ids)

    table: dict[str, str] = {}
    fail_digests: set[str] = set()
    for problem in problems:
        digest = prompt_digest(render_gsmclaims_prompt(problem.question, problem.answer).text)
        if problem.id in failing:
            fail_digests.add(digest)
            continue
        if problem.id in malformed:
            table[digest] = "I could not produce the requested rewrite."
            continue
        value = last_number(problem.answer)
        if value is None:
            value = float(int(digest[:6], 16) % 997)
        wrong = value if problem.id in invalid else value + 1
        payload = json.dumps(
            {
                "document": problem.question.strip(),
                "positive_claim": f"Working it out, the final answer comes to {_format_value(value)}.",
                "negative_claim": f"Working it out, the final answer comes to {_format_value(wrong)}.",
            },
            ensure_ascii=False,
        )
        if problem.id in prose:
            payload = f"Sure, here is the JSON you asked for:\n{payload}\nHope that helps!"
        table[digest] = payload
    return table, fail_digests


def mock_gsm_client(
    problems: Iterable[MathProblem],
    invalid_ids: Iterable[str] = (),
    prose_ids: Iterable[str] = (),
    malformed_ids: Iterable[str] = (),
    backend_fail_ids: Iterable[str] = (),
) -> CompletionClient:
    table, fail_digests = gsm_mock_tables(
        problems,
        invalid_ids=invalid_ids,
        prose_ids=prose_ids,
        malformed_ids=malformed_ids,
        backend_fail_ids=backend_fail_ids,
    )
    backend = MockBackend(table=table, fail_digests=fail_digests)
    return CompletionClient(backend, backoff_base_s=0.0, prompt_token_ceiling=10**9)
