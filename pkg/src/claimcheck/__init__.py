"""Grounded claim verification toolkit.

Builds reasoning-augmented verification datasets, renders and parses the
structured prompt formats, scores completions with the training reward, and
evaluates predictions with balanced accuracy and paired bootstrap tests. All
model calls go through a pluggable client with a deterministic mock, so every
pipeline runs end to end without credentials.
"""

from .core import (
    ClaimCheckError,
    ConfusionCounts,
    DataFormatError,
    GroundedPair,
    ReasoningExample,
    UnrecognizedVerdict,
    Verdict,
    verdict_from_label,
    verdict_from_token,
)
from .parsing import ParsedOutput, format_adherent, parse_oracle_output, parse_verifier_output
from .prompts import (
    EmptyField,
    PromptKind,
    RenderedPrompt,
    TagCollision,
    render_gsmclaims_prompt,
    render_oracle_prompt,
    render_training_example,
    render_verifier_prompt,
    template_checksums,
)
from .client import (
    BackendConfig,
    BackendExhausted,
    CompletionClient,
    CompletionRequest,
    CompletionResult,
    DecodingParams,
    InvalidParams,
    MockBackend,
    PromptTooLong,
)
from .rewards import RewardBreakdown, RewardConfig, accuracy_reward, format_reward, total_reward
from .metrics import (
    BootstrapResult,
    ClassAbsent,
    EvalRecord,
    UnpairedRecords,
    accuracy,
    balanced_accuracy,
    confusion,
    paired_bootstrap,
)
from .analysis import DecileBucket, DecileReport, ErrorReport, ErrorTag, error_report, length_decile_analysis
from .datagen import (
    AnnotationOutcome,
    AnnotationStatus,
    BuildStats,
    agreement_filter,
    annotate,
    export_training_file,
    split_dev,
)
from .gsmclaims import ClaimPairRecord, GsmBuildStats, build_gsmclaims, expand_to_instances, generate_claim_pair

__version__ = "0.1.0"
