"""Operator command line: dataset builds, evaluation, comparison, analyses,
single-pair verification, and reward auditing.

Exit codes: 0 on success (data-level anomalies are reported in output, not
failures), 2 for usage/config/data-format problems, 3 for backend failure.
Every command that writes data appends one manifest record next to its
outputs, so builds can be traced to the exact templates, seed, and settings
that produced them.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import analysis, datagen, gsmclaims, metrics, rewards
from .client import (
    BackendConfig,
    BackendExhausted,
    CompletionClient,
    CompletionRequest,
    ConfigError,
    DecodingParams,
    MockBackend,
    tokenizer_by_name,
)
from .core import ClaimCheckError, DataFormatError, verdict_from_label
from .parsing import parse_verifier_output
from .prompts import render_verifier_prompt, template_checksums
from .records import load_pairs, load_problems, read_jsonl, write_examples, write_pairs, write_jsonl

MANIFEST_NAME = "manifests.jsonl"

_MOCK_VERIFY_COMPLETION = (
    "The document directly states what the claim asserts.\n"
    "</REASONING>\n<SOLUTION>\nYES\n</SOLUTION>"
)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _config_digest(options: dict) -> str:
    canonical = json.dumps(options, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _append_manifest(
    out_dir: Path,
    command: str,
    options: dict,
    inputs: list[str],
    outputs: list[str],
    stats: dict,
    seed: int | None,
    started: str,
) -> dict:
    manifest = {
        "command": command,
        "config_digest": _config_digest(options),
        "options": options,
        "seed": seed,
        "template_checksums": template_checksums(),
        "inputs": inputs,
        "outputs": outputs,
        "stats": stats,
        "started": started,
        "finished": _utc_now(),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / MANIFEST_NAME).open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, ensure_ascii=False) + "\n")
    return manifest


def _split_ids(raw: str | None) -> tuple[str, ...]:
    if not raw:
        return ()
    return tuple(part.strip() for part in raw.split(",") if part.strip())


def _positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _decoding_params(args: argparse.Namespace) -> DecodingParams:
    return DecodingParams(
        temperature=args.temperature,
        top_p=args.top_p,
        top_k=args.top_k,
        max_new_tokens=args.max_new_tokens,
    )


def _add_decoding_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--temperature", type=float, default=DecodingParams().temperature)
    parser.add_argument("--top-p", type=float, default=DecodingParams().top_p)
    parser.add_argument("--top-k", type=int, default=DecodingParams().top_k)
    parser.add_argument("--max-new-tokens", type=int, default=DecodingParams().max_new_tokens)


def _backend_client(args: argparse.Namespace) -> CompletionClient:
    if not args.config:
        raise ConfigError("a backend --config file is required unless --mock is given")
    config = BackendConfig.from_file(args.config)
    config.api_key()  # fail fast on missing credentials
    return CompletionClient.from_config(config)


def _remove_outputs(paths: list[Path]) -> None:
    for path in paths:
        try:
            path.unlink(missing_ok=True)
        except OSError:
            pass


def _fmt(value: float | None, digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def cmd_build_think(args: argparse.Namespace) -> int:
    started = _utc_now()
    pairs = load_pairs(args.input, require_gold=True)
    params = _decoding_params(args)

    if args.mock:
        client = datagen.mock_oracle_client(
            pairs,
            disagree_rate=args.mock_disagree_rate,
            seed=args.seed,
            malformed_ids=_split_ids(args.mock_malformed_ids),
            backend_fail_ids=_split_ids(args.mock_backend_fail_ids),
            bernoulli=args.mock_bernoulli,
        )
    else:
        client = _backend_client(args)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        outcomes = datagen.annotate(pairs, client, params=params, parallelism=args.parallelism)
        examples, stats = datagen.agreement_filter(outcomes)
        train, dev = datagen.split_dev(examples, fraction=args.fraction, seed=args.seed)

        think_train = out_dir / "think_train.jsonl"
        think_dev = out_dir / "think_dev.jsonl"
        sft_train = out_dir / "sft_train.jsonl"
        sft_dev = out_dir / "sft_dev.jsonl"
        written = [
            think_train,
            think_dev,
            sft_train,
            sft_dev,
            out_dir / (sft_train.name + ".manifest.json"),
            out_dir / (sft_dev.name + ".manifest.json"),
        ]
        write_examples(think_train, train)
        write_examples(think_dev, dev)
        with_reasoning = not args.no_reasoning
        datagen.export_training_file(train, with_reasoning, sft_train, seed=args.seed)
        datagen.export_training_file(dev, with_reasoning, sft_dev, seed=args.seed)
    except Exception:
        _remove_outputs(written)
        raise

    options = {
        "input": str(args.input),
        "fraction": args.fraction,
        "parallelism": args.parallelism,
        "mock": args.mock,
        "mock_disagree_rate": args.mock_disagree_rate,
        "mock_bernoulli": args.mock_bernoulli,
        "with_reasoning": not args.no_reasoning,
        "decoding": params.as_dict(),
    }
    stats_block = dict(stats.as_dict(), train=len(train), dev=len(dev))
    _append_manifest(
        out_dir,
        "build-think",
        options,
        inputs=[str(args.input)],
        outputs=[str(p) for p in written],
        stats=stats_block,
        seed=args.seed,
        started=started,
    )

    print(f"input: {stats.input_count}")
    print(f"kept: {stats.kept}")
    print(f"dropped_disagree: {stats.dropped_disagree}")
    print(f"dropped_malformed: {stats.dropped_malformed}")
    print(f"dropped_backend: {stats.dropped_backend}")
    print(f"retention_rate: {stats.retention_rate:.4f}")
    print(f"train: {len(train)}  dev: {len(dev)}")
    return 0


def cmd_build_gsmclaims(args: argparse.Namespace) -> int:
    started = _utc_now()
    problems = load_problems(args.input)
    params = _decoding_params(args)

    if args.mock:
        client = gsmclaims.mock_gsm_client(
            problems,
            invalid_ids=_split_ids(args.mock_invalid_ids),
            prose_ids=_split_ids(args.mock_prose_ids),
            malformed_ids=_split_ids(args.mock_malformed_ids),
            backend_fail_ids=_split_ids(args.mock_backend_fail_ids),
        )
    else:
        client = _backend_client(args)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "gsmclaims.jsonl"
    try:
        instances, stats = gsmclaims.build_gsmclaims(
            problems,
            client,
            seed=args.seed,
            strict=not args.lenient_json,
            params=params,
            parallelism=args.parallelism,
        )
        write_pairs(out_path, instances)
    except Exception:
        _remove_outputs([out_path])
        raise

    n_pos = sum(1 for inst in instances if inst.gold and inst.gold.bit == 1)
    n_neg = len(instances) - n_pos
    balance = n_pos / len(instances) if instances else 0.0

    options = {
        "input": str(args.input),
        "parallelism": args.parallelism,
        "mock": args.mock,
        "strict_json": not args.lenient_json,
        "decoding": params.as_dict(),
    }
    stats_block = dict(stats.as_dict(), positive=n_pos, negative=n_neg, balance=balance)
    _append_manifest(
        out_dir,
        "build-gsmclaims",
        options,
        inputs=[str(args.input)],
        outputs=[str(out_path)],
        stats=stats_block,
        seed=args.seed,
        started=started,
    )

    print(f"input: {stats.input_count}")
    print(f"generated: {stats.generated}")
    print(f"failed: {stats.failed} (backend={stats.failed_backend} "
          f"malformed={stats.failed_malformed} invalid={stats.failed_invalid})")
    print(f"instances: {len(instances)}")
    print(f"balance: {balance:.4f} (positive={n_pos} negative={n_neg})")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    records = metrics.load_eval_records(args.predictions)
    counts = metrics.confusion(records)
    value = metrics.compute_metric(records, args.metric)

    print(f"records: {counts.total}")
    print(f"tp={counts.tp} fp={counts.fp} tn={counts.tn} fn={counts.fn}")
    print(f"{args.metric}: {value:.4f}")

    if args.report:
        started = _utc_now()
        report = {
            "predictions": str(args.predictions),
            "records": counts.total,
            "tp": counts.tp,
            "fp": counts.fp,
            "tn": counts.tn,
            "fn": counts.fn,
            "metric": args.metric,
            "value": value,
        }
        report_path = Path(args.report)
        report_path.parent.mkdir(parents=True, exist_ok=True)
        report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        _append_manifest(
            report_path.parent,
            "evaluate",
            {"predictions": str(args.predictions), "metric": args.metric},
            inputs=[str(args.predictions)],
            outputs=[str(report_path)],
            stats=report,
            seed=None,
            started=started,
        )
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    records_a = metrics.load_eval_records(args.a)
    records_b = metrics.load_eval_records(args.b)
    result = metrics.paired_bootstrap(
        records_a,
        records_b,
        metric=args.metric,
        resamples=args.resamples,
        seed=args.seed,
    )

    print(f"metric: {result.metric}")
    print(f"delta_observed: {result.delta_observed:+.6f}")
    print(f"p_value: {result.p_value:.6f}")
    print(f"ci95: [{result.ci_low:+.6f}, {result.ci_high:+.6f}]")
    print(f"resamples: {result.resamples}  seed: {result.seed}  "
          f"redraws: {result.redraws}  kernel: {result.kernel}")

    if args.report:
        started = _utc_now()
        report = {
            "a": str(args.a),
            "b": str(args.b),
            "metric": result.metric,
            "delta_observed": result.delta_observed,
            "p_value": result.p_value,
            "ci_low": result.ci_low,
            "ci_high": result.ci_high,
            "resamples": result.resamples,
            "seed": result.seed,
            "redraws": result.redraws,
            "kernel": result.kernel,
        }
        report_path = Path(args.report)
        report_path.parent.mkdir(parents=True, exist_ok=True)
        report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        _append_manifest(
            report_path.parent,
            "compare",
            {"a": str(args.a), "b": str(args.b), "metric": args.metric,
             "resamples": args.resamples},
            inputs=[str(args.a), str(args.b)],
            outputs=[str(report_path)],
            stats=report,
            seed=args.seed,
            started=started,
        )
    return 0


def cmd_length_analysis(args: argparse.Namespace) -> int:
    records = metrics.load_eval_records(args.predictions)
    tokenizer = tokenizer_by_name(args.tokenizer)
    report = analysis.length_decile_analysis(records, tokenizer)

    print(f"tokenizer: {report.tokenizer}  excluded_without_rationale: {report.excluded}")
    print("decile  len_range      size  bacc    precision  recall")
    rows = []
    for bucket in report.buckets:
        print(
            f"{bucket.index:>6}  [{bucket.min_len:>4},{bucket.max_len:>4}]  "
            f"{bucket.size:>4}  {_fmt(bucket.bacc)}  {_fmt(bucket.precision):>9}  {_fmt(bucket.recall)}"
        )
        rows.append(
            {
                "decile": bucket.index,
                "min_len": bucket.min_len,
                "max_len": bucket.max_len,
                "size": bucket.size,
                "bacc": bucket.bacc,
                "precision": bucket.precision,
                "recall": bucket.recall,
            }
        )

    outputs = []
    if args.report:
        report_path = Path(args.report)
        report_path.parent.mkdir(parents=True, exist_ok=True)
        write_jsonl(report_path, rows)
        outputs.append(report_path)
    if args.plot_data:
        plot_path = Path(args.plot_data)
        plot_path.parent.mkdir(parents=True, exist_ok=True)
        write_jsonl(plot_path, ({"decile": r["decile"], "bacc": r["bacc"]} for r in rows))
        outputs.append(plot_path)
    if outputs:
        _append_manifest(
            outputs[0].parent,
            "length-analysis",
            {"predictions": str(args.predictions), "tokenizer": args.tokenizer},
            inputs=[str(args.predictions)],
            outputs=[str(p) for p in outputs],
            stats={"excluded": report.excluded, "deciles": len(report.buckets)},
            seed=None,
            started=_utc_now(),
        )
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    from .core import GroundedPair

    pair = GroundedPair(id="cli", claim=args.claim, document=args.document)
    params = _decoding_params(args)
    prompt = render_verifier_prompt(pair, with_reasoning=not args.no_reasoning)

    if args.mock:
        completion = args.mock_completion
        if completion is None:
            completion = "YES\n</SOLUTION>" if args.no_reasoning else _MOCK_VERIFY_COMPLETION
        client = CompletionClient(MockBackend(default=completion), backoff_base_s=0.0)
    else:
        client = _backend_client(args)

    result = client.complete(CompletionRequest("cli", prompt.text, params))
    # Inference prompts end at the opening tag of the first generated block;
    # re-attach it so the completion parses as a full tagged answer.
    opening = "<SOLUTION>\n" if args.no_reasoning else "<REASONING>\n"
    parsed = parse_verifier_output(opening + result.text)

    verdict = parsed.verdict.name if parsed.verdict is not None else "UNPARSEABLE"
    print(f"verdict: {verdict}")
    print(f"format_ok: {str(parsed.format_ok).lower()}")
    print(f"rationale: {parsed.reasoning if parsed.reasoning is not None else '-'}")
    print(
        "decoding: "
        f"temperature={params.temperature} top_p={params.top_p} "
        f"top_k={params.top_k} max_new_tokens={params.max_new_tokens}"
    )
    return 0


def cmd_reward_check(args: argparse.Namespace) -> int:
    config = rewards.RewardConfig(
        format_weight=args.format_weight,
        accuracy_weight=args.accuracy_weight,
        w_yes=args.w_yes,
        w_no=args.w_no,
        scale=args.scale,
    )
    rows = []
    for lineno, record in read_jsonl(args.completions):
        if "completion" not in record or not isinstance(record["completion"], str):
            raise DataFormatError(f"{args.completions}:{lineno}: field 'completion' missing")
        if "gold" not in record or record["gold"] is None:
            raise DataFormatError(f"{args.completions}:{lineno}: field 'gold' missing")
        gold = verdict_from_label(record["gold"])
        breakdown = rewards.total_reward(record["completion"], gold, config)
        rows.append((str(record.get("id", lineno)), gold, breakdown))

    for record_id, gold, breakdown in rows:
        predicted = breakdown.parsed.verdict.name if breakdown.parsed.verdict else "UNPARSEABLE"
        print(
            f"{record_id}\tgold={gold.name}\tpredicted={predicted}\t"
            f"format_term={breakdown.format_term:+.4f}\t"
            f"accuracy_term={breakdown.accuracy_term:+.4f}\ttotal={breakdown.total:+.4f}"
        )

    n = len(rows)
    mean_total = sum(b.total for _, _, b in rows) / n if n else 0.0
    format_rate = sum(b.parsed.format_ok for _, _, b in rows) / n if n else 0.0
    correct_rate = sum(b.parsed.verdict is g for _, g, b in rows) / n if n else 0.0
    print(f"records: {n}")
    print(f"mean_total: {mean_total:+.4f}")
    print(f"format_adherence_rate: {format_rate:.4f}")
    print(f"verdict_accuracy_rate: {correct_rate:.4f}")

    if args.report:
        report_path = Path(args.report)
        report_path.parent.mkdir(parents=True, exist_ok=True)
        write_jsonl(
            report_path,
            (
                {
                    "id": record_id,
                    "gold": gold.name,
                    "predicted": b.parsed.verdict.name if b.parsed.verdict else None,
                    "format_ok": b.parsed.format_ok,
                    "format_term": b.format_term,
                    "accuracy_term": b.accuracy_term,
                    "total": b.total,
                }
                for record_id, gold, b in rows
            ),
        )
        _append_manifest(
            report_path.parent,
            "reward-check",
            {"completions": str(args.completions)},
            inputs=[str(args.completions)],
            outputs=[str(report_path)],
            stats={"records": n, "mean_total": mean_total},
            seed=None,
            started=_utc_now(),
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="claimcheck",
        description="Build, run, and measure a reason-then-verify claim checker.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-think", help="annotate pairs with rationales, filter, split, export")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fraction", type=float, default=0.2)
    p.add_argument("--parallelism", type=_positive_int, default=1)
    p.add_argument("--no-reasoning", action="store_true",
                   help="export the answer-only training format")
    p.add_argument("--config", default=None)
    p.add_argument("--mock", action="store_true")
    p.add_argument("--mock-disagree-rate", type=float, default=0.0)
    p.add_argument("--mock-bernoulli", action="store_true")
    p.add_argument("--mock-malformed-ids", default=None)
    p.add_argument("--mock-backend-fail-ids", default=None)
    _add_decoding_flags(p)
    p.set_defaults(func=cmd_build_think)

    p = sub.add_parser("build-gsmclaims", help="rewrite math problems into balanced claim pairs")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallelism", type=_positive_int, default=1)
    p.add_argument("--lenient-json", action="store_true",
                   help="accept JSON wrapped in prose instead of rejecting it")
    p.add_argument("--config", default=None)
    p.add_argument("--mock", action="store_true")
    p.add_argument("--mock-invalid-ids", default=None)
    p.add_argument("--mock-prose-ids", default=None)
    p.add_argument("--mock-malformed-ids", default=None)
    p.add_argument("--mock-backend-fail-ids", default=None)
    _add_decoding_flags(p)
    p.set_defaults(func=cmd_build_gsmclaims)

    p = sub.add_parser("evaluate", help="score a prediction file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--metric", choices=["bacc", "acc"], default="bacc")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="paired bootstrap between two prediction files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--metric", choices=["bacc", "acc"], default="bacc")
    p.add_argument("--resamples", type=_positive_int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("length-analysis", help="score rationale-length deciles")
    p.add_argument("--predictions", required=True)
    p.add_argument("--tokenizer", choices=["whitespace", "wordpunct"], default="whitespace")
    p.add_argument("--report", default=None)
    p.add_argument("--plot-data", default=None)
    p.set_defaults(func=cmd_length_analysis)

    p = sub.add_parser("verify", help="verify one claim against one document")
    p.add_argument("--claim", required=True)
    p.add_argument("--document", required=True)
    p.add_argument("--no-reasoning", action="store_true")
    p.add_argument("--config", default=None)
    p.add_argument("--mock", action="store_true")
    p.add_argument("--mock-completion", default=None)
    _add_decoding_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reward-check", help="score stored completions with the training reward")
    p.add_argument("--completions", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--format-weight", type=float, default=rewards.RewardConfig().format_weight)
    p.add_argument("--accuracy-weight", type=float, default=rewards.RewardConfig().accuracy_weight)
    p.add_argument("--w-yes", type=float, default=rewards.RewardConfig().w_yes)
    p.add_argument("--w-no", type=float, default=rewards.RewardConfig().w_no)
    p.add_argument("--scale", type=float, default=rewards.RewardConfig().scale)
    p.set_defaults(func=cmd_reward_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BackendExhausted as err:
        print(f"error: backend failure: {err}", file=sys.stderr)
        return 3
    except ClaimCheckError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
