"""Extraction of (reasoning, verdict) spans from raw model completions.

Parsers here are total: malformed text is data, not an error, so they never
raise on arbitrary input. Tag matching is case-sensitive per format, and when
a model repeats a block the first complete one wins.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import UnrecognizedVerdict, Verdict, verdict_from_token

_VERIFIER_REASONING = ("<REASONING>", "</REASONING>")
_VERIFIER_SOLUTION = ("<SOLUTION>", "</SOLUTION>")
_ORACLE_REASONING = ("<reasoning>", "</reasoning>")
_ORACLE_SOLUTION = ("<entailment>", "</entailment>")


@dataclass(frozen=True)
class ParsedOutput:
    """Structured view of one completion.

    ``format_ok`` requires both tag pairs present, reasoning before solution,
    and a recognizable verdict token; it therefore implies ``verdict`` is set.
    """

    raw: str
    reasoning: str | None = None
    verdict: Verdict | None = None
    format_ok: bool = False


def _first_block(text: str, open_tag: str, close_tag: str) -> tuple[str, int, int] | None:
    """First complete open/close block: (inner text, start offset, end offset)."""
    start = text.find(open_tag)
    if start == -1:
        return None
    inner_start = start + len(open_tag)
    inner_end = text.find(close_tag, inner_start)
    if inner_end == -1:
        return None
    return text[inner_start:inner_end], start, inner_end + len(close_tag)


def _parse_tagged(
    raw: str,
    reasoning_tags: tuple[str, str],
    solution_tags: tuple[str, str],
) -> ParsedOutput:
    reasoning_block = _first_block(raw, *reasoning_tags)
    solution_block = _first_block(raw, *solution_tags)

    reasoning = reasoning_block[0].strip() if reasoning_block else None

    verdict = None
    if solution_block:
        try:
            verdict = verdict_from_token(solution_block[0])
        except UnrecognizedVerdict:
            verdict = None

    ordered = (
        reasoning_block is not None
        and solution_block is not None
        and reasoning_block[2] <= solution_block[1]
    )
    format_ok = ordered and verdict is not None
    return ParsedOutput(raw=raw, reasoning=reasoning, verdict=verdict, format_ok=format_ok)


def parse_verifier_output(raw: str) -> ParsedOutput:
    """Parse the uppercase <REASONING>/<SOLUTION> completion format."""
    return _parse_tagged(raw, _VERIFIER_REASONING, _VERIFIER_SOLUTION)


def parse_oracle_output(raw: str) -> ParsedOutput:
    """Parse the lowercase <reasoning>/<entailment> completion format."""
    return _parse_tagged(raw, _ORACLE_REASONING, _ORACLE_SOLUTION)


def format_adherent(raw: str) -> bool:
    """True iff the completion carries both verifier blocks, in order."""
    return parse_verifier_output(raw).format_ok
