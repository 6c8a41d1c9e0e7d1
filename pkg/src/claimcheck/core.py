"""Domain types and label semantics shared by every pipeline stage.

Everything here is immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from enum import Enum


class ClaimCheckError(Exception):
    """Base class for every error raised by this package."""


class DataFormatError(ClaimCheckError):
    """A record or record file violates its schema."""


class UnrecognizedVerdict(ClaimCheckError):
    """A verdict token is neither YES nor NO after normalization."""


class Verdict(Enum):
    """Binary verification label; SUPPORTED carries bit 1, NOT_SUPPORTED bit 0."""

    NOT_SUPPORTED = 0
    SUPPORTED = 1

    @property
    def bit(self) -> int:
        return self.value

    @property
    def token(self) -> str:
        """The single-word answer form used inside completions."""
        return "YES" if self is Verdict.SUPPORTED else "NO"

    def flipped(self) -> Verdict:
        return Verdict.NOT_SUPPORTED if self is Verdict.SUPPORTED else Verdict.SUPPORTED


def verdict_from_token(token: str) -> Verdict:
    """Map a model-emitted answer token to a verdict.

    Whitespace is trimmed and surrounding ASCII punctuation stripped (small
    models like to emit "YES."), then the token is matched case-insensitively.
    Anything that is not YES or NO raises UnrecognizedVerdict; callers decide
    what a malformed verdict means.
    """
    cleaned = token.strip().strip(string.punctuation).strip()
    lowered = cleaned.casefold()
    if lowered == "yes":
        return Verdict.SUPPORTED
    if lowered == "no":
        return Verdict.NOT_SUPPORTED
    raise UnrecognizedVerdict(f"expected YES or NO, got {token!r}")


_SUPPORTED_ALIASES = {"supported", "supports", "support", "yes", "true", "1", "entailed"}
_NOT_SUPPORTED_ALIASES = {
    "not_supported",
    "notsupported",
    "no",
    "false",
    "0",
    "refutes",
    "refuted",
    "refute",
    "contradicted",
    "unsupported",
}


def verdict_from_label(value: object) -> Verdict:
    """Normalize a dataset label into a verdict.

    Accepts the 0/1 bits, booleans, YES/NO tokens, and the usual textual
    variants; "Refutes"-style labels collapse into NOT_SUPPORTED at ingestion.
    """
    if isinstance(value, Verdict):
        return value
    if isinstance(value, bool):
        return Verdict.SUPPORTED if value else Verdict.NOT_SUPPORTED
    if isinstance(value, int):
        if value in (0, 1):
            return Verdict(value)
        raise DataFormatError(f"label bit out of range: {value!r}")
    if isinstance(value, str):
        key = value.strip().casefold().replace("-", "_").replace(" ", "_")
        if key in _SUPPORTED_ALIASES:
            return Verdict.SUPPORTED
        if key in _NOT_SUPPORTED_ALIASES:
            return Verdict.NOT_SUPPORTED
    raise DataFormatError(f"unrecognized label: {value!r}")


@dataclass(frozen=True)
class GroundedPair:
    """One (claim, document) instance, optionally carrying a gold verdict.

    ``id`` must be unique within a dataset file; loaders enforce that.
    """

    id: str
    claim: str
    document: str
    gold: Verdict | None = None
    source: str = ""

    def __post_init__(self) -> None:
        if not self.id.strip():
            raise DataFormatError("pair id must be non-empty")
        if not self.claim.strip():
            raise DataFormatError(f"pair {self.id!r}: claim must be non-empty")
        if not self.document.strip():
            raise DataFormatError(f"pair {self.id!r}: document must be non-empty")


@dataclass(frozen=True)
class ReasoningExample:
    """A grounded pair plus its oracle rationale and agreed verdict."""

    pair: GroundedPair
    reasoning: str
    verdict: Verdict

    def __post_init__(self) -> None:
        if not self.reasoning.strip():
            raise DataFormatError(f"example {self.pair.id!r}: reasoning must be non-empty")
        if self.pair.gold is not None and self.verdict is not self.pair.gold:
            raise DataFormatError(
                f"example {self.pair.id!r}: verdict disagrees with gold label"
            )


@dataclass(frozen=True)
class ConfusionCounts:
    """TP/FP/TN/FN tallies; SUPPORTED is the positive class."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "tn", "fn"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {value!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
        )
