"""Prompt templates and their rendering.

The four templates live as text resources under ``templates/``; rendering
substitutes user content verbatim between the delimiter tags. Content that
itself contains a delimiter tag is rejected rather than escaped: there is no
escaping scheme the downstream parsers would understand, and silently
rewriting model-visible text is worse than failing loudly.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources

from .core import ClaimCheckError, GroundedPair, ReasoningExample


class EmptyField(ClaimCheckError):
    """A template field was empty or whitespace-only."""


class TagCollision(ClaimCheckError):
    """Substituted content contains one of the template's delimiter tags."""


class PromptKind(Enum):
    ORACLE_THINK = "oracle_think"
    SFT_THINK = "sft_think"
    SFT_NOTHINK = "sft_nothink"
    GSMCLAIMS = "claims_from_math"


@dataclass(frozen=True)
class RenderedPrompt:
    """A rendered template plus the tag at which generation should halt."""

    kind: PromptKind
    text: str
    stop_marker: str | None = None


def _load_template(name: str) -> str:
    return (
        resources.files("claimcheck")
        .joinpath(f"templates/{name}.txt")
        .read_text(encoding="utf-8")
    )


TEMPLATES: dict[PromptKind, str] = {kind: _load_template(kind.value) for kind in PromptKind}

# Tags whose appearance inside substituted content would corrupt the rendered
# structure, per template.
_TAG_SETS: dict[PromptKind, tuple[str, ...]] = {
    PromptKind.ORACLE_THINK: (
        "<document>", "</document>", "<claim>", "</claim>",
        "<reasoning>", "</reasoning>", "<entailment>", "</entailment>",
    ),
    PromptKind.SFT_THINK: (
        "<DOCUMENT>", "</DOCUMENT>", "<CLAIM>", "</CLAIM>",
        "<REASONING>", "</REASONING>", "<SOLUTION>", "</SOLUTION>",
    ),
    PromptKind.SFT_NOTHINK: (
        "<DOCUMENT>", "</DOCUMENT>", "<CLAIM>", "</CLAIM>",
        "<SOLUTION>", "</SOLUTION>",
    ),
    PromptKind.GSMCLAIMS: (
        "<problem>", "</problem>", "<solution>", "</solution>",
    ),
}

_PLACEHOLDER_RE = re.compile(r"\{(document|claim|reasoning|solution|problem)\}")

# Inference prompts stop where the first model-generated span begins: the
# line-anchored opening tag, kept inclusively so generation continues from it.
_THINK_GENERATION_START = "\n<REASONING>\n"
_NOTHINK_GENERATION_START = "\n<SOLUTION>\n"

VERIFIER_STOP = "</SOLUTION>"
ORACLE_STOP = "</entailment>"


def template_checksums() -> dict[str, str]:
    """sha256 of each template, for recording in run manifests."""
    return {
        kind.value: hashlib.sha256(text.encode("utf-8")).hexdigest()
        for kind, text in TEMPLATES.items()
    }


def _require(name: str, value: str) -> None:
    if not value.strip():
        raise EmptyField(f"{name} must be non-empty")


def _check_tags(kind: PromptKind, **fields: str) -> None:
    for name, content in fields.items():
        for tag in _TAG_SETS[kind]:
            if tag in content:
                raise TagCollision(f"{name} contains template delimiter {tag!r}")


def _substitute(template: str, mapping: dict[str, str]) -> str:
    # Single-pass regex substitution: placeholders inside substituted content
    # are never re-expanded.
    return _PLACEHOLDER_RE.sub(lambda m: mapping[m.group(1)], template)


def render_oracle_prompt(pair: GroundedPair) -> RenderedPrompt:
    """Prompt asking the annotation oracle for a rationale plus YES/NO verdict."""
    _require("claim", pair.claim)
    _require("document", pair.document)
    _check_tags(PromptKind.ORACLE_THINK, document=pair.document, claim=pair.claim)
    text = _substitute(
        TEMPLATES[PromptKind.ORACLE_THINK],
        {"document": pair.document, "claim": pair.claim},
    )
    return RenderedPrompt(PromptKind.ORACLE_THINK, text, stop_marker=ORACLE_STOP)


def _inference_prefix(kind: PromptKind, generation_start: str) -> str:
    template = TEMPLATES[kind]
    cut = template.index(generation_start) + len(generation_start)
    return template[:cut]


def render_verifier_prompt(pair: GroundedPair, with_reasoning: bool = True) -> RenderedPrompt:
    """Inference prompt for the verifier, ending where generation begins.

    With reasoning enabled the prompt ends just after the opening reasoning
    tag; without it, just after the opening solution tag.
    """
    _require("claim", pair.claim)
    _require("document", pair.document)
    kind = PromptKind.SFT_THINK if with_reasoning else PromptKind.SFT_NOTHINK
    _check_tags(kind, document=pair.document, claim=pair.claim)
    start = _THINK_GENERATION_START if with_reasoning else _NOTHINK_GENERATION_START
    prefix = _inference_prefix(kind, start)
    text = _substitute(prefix, {"document": pair.document, "claim": pair.claim})
    return RenderedPrompt(kind, text, stop_marker=VERIFIER_STOP)


def render_training_example(ex: ReasoningExample, with_reasoning: bool = True) -> str:
    """Full supervised target: prompt plus completed reasoning/solution blocks."""
    kind = PromptKind.SFT_THINK if with_reasoning else PromptKind.SFT_NOTHINK
    fields = {"document": ex.pair.document, "claim": ex.pair.claim}
    if with_reasoning:
        fields["reasoning"] = ex.reasoning
    _check_tags(kind, **fields)
    fields["solution"] = ex.verdict.token
    return _substitute(TEMPLATES[kind], fields)


def render_gsmclaims_prompt(problem: str, solution: str) -> RenderedPrompt:
    """Prompt asking the oracle to rewrite a solved math problem as a document
    plus one supported and one unsupported claim, emitted as bare JSON."""
    _require("problem", problem)
    _require("solution", solution)
    _check_tags(PromptKind.GSMCLAIMS, problem=problem, solution=solution)
    text = _substitute(
        TEMPLATES[PromptKind.GSMCLAIMS], {"problem": problem, "solution": solution}
    )
    return RenderedPrompt(PromptKind.GSMCLAIMS, text, stop_marker=None)
