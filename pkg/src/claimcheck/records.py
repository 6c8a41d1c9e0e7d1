"""Line-delimited record files: the schemas every pipeline stage reads and writes.

Writers emit keys in a fixed order so identical data always produces identical
bytes; loaders report the offending line number on bad input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .core import DataFormatError, GroundedPair, ReasoningExample, Verdict, verdict_from_label


def read_jsonl(path: str | Path) -> list[tuple[int, dict]]:
    """Parse a JSONL file into (line number, object) pairs."""
    out: list[tuple[int, dict]] = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as err:
                    raise DataFormatError(f"{path}:{lineno}: invalid JSON: {err}") from err
                if not isinstance(record, dict):
                    raise DataFormatError(f"{path}:{lineno}: expected a JSON object")
                out.append((lineno, record))
    except OSError as err:
        raise DataFormatError(f"cannot read {path}: {err}") from err
    return out


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def _field(record: dict, name: str, path, lineno: int) -> str:
    value = record.get(name)
    if not isinstance(value, str) or not value.strip():
        raise DataFormatError(f"{path}:{lineno}: field {name!r} missing or empty")
    return value


def load_pairs(path: str | Path, require_gold: bool = False) -> list[GroundedPair]:
    """Load {id, claim, document, label?, source?} records."""
    pairs: list[GroundedPair] = []
    seen: set[str] = set()
    for lineno, record in read_jsonl(path):
        pair_id = _field(record, "id", path, lineno)
        if pair_id in seen:
            raise DataFormatError(f"{path}:{lineno}: duplicate id {pair_id!r}")
        seen.add(pair_id)
        label = record.get("label")
        if label is None and require_gold:
            raise DataFormatError(f"{path}:{lineno}: label required but missing")
        try:
            gold = None if label is None else verdict_from_label(label)
            pairs.append(
                GroundedPair(
                    id=pair_id,
                    claim=_field(record, "claim", path, lineno),
                    document=_field(record, "document", path, lineno),
                    gold=gold,
                    source=str(record.get("source", "")),
                )
            )
        except DataFormatError as err:
            raise DataFormatError(f"{path}:{lineno}: {err}") from err
    return pairs


def pair_to_record(pair: GroundedPair) -> dict:
    return {
        "id": pair.id,
        "claim": pair.claim,
        "document": pair.document,
        "label": pair.gold.name if pair.gold is not None else None,
        "source": pair.source,
    }


def write_pairs(path: str | Path, pairs: Sequence[GroundedPair]) -> None:
    write_jsonl(path, (pair_to_record(p) for p in pairs))


def example_to_record(ex: ReasoningExample) -> dict:
    record = pair_to_record(ex.pair)
    record["label"] = ex.verdict.name
    record["reasoning"] = ex.reasoning
    return record


def write_examples(path: str | Path, examples: Sequence[ReasoningExample]) -> None:
    write_jsonl(path, (example_to_record(ex) for ex in examples))


def load_examples(path: str | Path) -> list[ReasoningExample]:
    examples = []
    for lineno, record in read_jsonl(path):
        try:
            pair = GroundedPair(
                id=_field(record, "id", path, lineno),
                claim=_field(record, "claim", path, lineno),
                document=_field(record, "document", path, lineno),
                gold=verdict_from_label(record.get("label")),
                source=str(record.get("source", "")),
            )
            examples.append(
                ReasoningExample(
                    pair=pair,
                    reasoning=_field(record, "reasoning", path, lineno),
                    verdict=pair.gold,
                )
            )
        except DataFormatError as err:
            raise DataFormatError(f"{path}:{lineno}: {err}") from err
    return examples


@dataclass(frozen=True)
class MathProblem:
    """A word problem with its trusted solution text."""

    id: str
    question: str
    answer: str


def load_problems(path: str | Path) -> list[MathProblem]:
    """Load {id, question, answer} records."""
    problems = []
    seen: set[str] = set()
    for lineno, record in read_jsonl(path):
        problem_id = _field(record, "id", path, lineno)
        if problem_id in seen:
            raise DataFormatError(f"{path}:{lineno}: duplicate id {problem_id!r}")
        seen.add(problem_id)
        problems.append(
            MathProblem(
                id=problem_id,
                question=_field(record, "question", path, lineno),
                answer=_field(record, "answer", path, lineno),
            )
        )
    return problems


def parse_optional_verdict(value: object) -> Verdict | None:
    if value is None or value == "":
        return None
    return verdict_from_label(value)
