"""Preference-optimization reward components as pure scoring functions.

The composed reward is format_weight * R_fmt + accuracy_weight * R_acc, where
R_fmt is a +/-1 format-adherence check and R_acc is class-weighted correctness
scaled to +/-(scale * class weight). The class weights upweight the minority
NOT_SUPPORTED class. Only the scoring lives here; no optimizer does.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import Verdict
from .parsing import ParsedOutput, format_adherent, parse_verifier_output


@dataclass(frozen=True)
class RewardConfig:
    format_weight: float = 0.5
    accuracy_weight: float = 1.0
    w_yes: float = 0.6356
    w_no: float = 2.3435
    scale: float = 4.0

    def __post_init__(self) -> None:
        for name in ("format_weight", "accuracy_weight", "w_yes", "w_no", "scale"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    def class_weight(self, gold: Verdict) -> float:
        return self.w_yes if gold is Verdict.SUPPORTED else self.w_no

    def max_total(self, gold: Verdict) -> float:
        """Largest attainable |total| for the given gold class."""
        return self.format_weight + self.accuracy_weight * self.scale * self.class_weight(gold)


DEFAULT_REWARD_CONFIG = RewardConfig()


@dataclass(frozen=True)
class RewardBreakdown:
    """Weighted format and accuracy terms plus their sum for one completion."""

    format_term: float
    accuracy_term: float
    total: float
    parsed: ParsedOutput


def format_reward(raw: str) -> float:
    """+1 when both verifier blocks appear in order, else -1."""
    return 1.0 if format_adherent(raw) else -1.0


def _accuracy_raw(parsed: ParsedOutput, gold: Verdict, config: RewardConfig) -> float:
    # The verdict is taken from the solution block even when the overall
    # format check fails: the two reward terms are independent. A completion
    # with no recognizable verdict scores as incorrect, never neutral.
    sign = 1.0 if parsed.verdict is gold else -1.0
    return sign * config.scale * config.class_weight(gold)


def accuracy_reward(raw: str, gold: Verdict, config: RewardConfig = DEFAULT_REWARD_CONFIG) -> float:
    """Class-weighted correctness: +/- scale * w_class."""
    return _accuracy_raw(parse_verifier_output(raw), gold, config)


def total_reward(raw: str, gold: Verdict, config: RewardConfig = DEFAULT_REWARD_CONFIG) -> RewardBreakdown:
    """Compose the weighted format and accuracy terms for one completion."""
    parsed = parse_verifier_output(raw)
    format_term = config.format_weight * (1.0 if parsed.format_ok else -1.0)
    accuracy_term = config.accuracy_weight * _accuracy_raw(parsed, gold, config)
    return RewardBreakdown(
        format_term=format_term,
        accuracy_term=accuracy_term,
        total=format_term + accuracy_term,
        parsed=parsed,
    )


def score_completions(
    completions: Sequence[str], gold: Verdict, config: RewardConfig = DEFAULT_REWARD_CONFIG
) -> list[RewardBreakdown]:
    """Score a group of candidate completions for one prompt (the grouped
    interface preference-optimization trainers consume)."""
    return [total_reward(raw, gold, config) for raw in completions]
