import json

from claimcheck.cli import main
from claimcheck.records import write_jsonl


def write_pairs_fixture(path, count=20):
    write_jsonl(
        path,
        (
            {
                "id": f"p{i:03d}",
                "claim": f"Claim {i} states a fact.",
                "document": f"Document {i} holds that fact.",
                "label": "SUPPORTED" if i % 2 == 0 else "NOT_SUPPORTED",
                "source": "fixture",
            }
            for i in range(count)
        ),
    )


def write_problems_fixture(path, count=5):
    write_jsonl(
        path,
        (
            {
                "id": f"g{i:03d}",
                "question": f"A shelf holds {i + 2} rows of {i + 3} books. How many books?",
                "answer": str((i + 2) * (i + 3)),
            }
            for i in range(count)
        ),
    )


def write_confusion_fixture(path):
    # tp=3 fn=1 tn=2 fp=2 -> bacc 0.625
    rows = []
    golds_preds = [
        ("SUPPORTED", "SUPPORTED"),
        ("SUPPORTED", "SUPPORTED"),
        ("SUPPORTED", "SUPPORTED"),
        ("SUPPORTED", "NOT_SUPPORTED"),
        ("NOT_SUPPORTED", "NOT_SUPPORTED"),
        ("NOT_SUPPORTED", "NOT_SUPPORTED"),
        ("NOT_SUPPORTED", "SUPPORTED"),
        ("NOT_SUPPORTED", "SUPPORTED"),
    ]
    for i, (gold, pred) in enumerate(golds_preds):
        rows.append({"id": f"e{i}", "gold": gold, "predicted": pred, "reasoning": "r", "source": "f"})
    write_jsonl(path, rows)


def write_eval_fixture(path, golds, preds, reasoning_tokens=None):
    rows = []
    for i, (gold, pred) in enumerate(zip(golds, preds)):
        row = {"id": f"e{i:04d}", "gold": gold, "predicted": pred, "source": "f"}
        if reasoning_tokens is not None:
            row["reasoning"] = " ".join(["tok"] * reasoning_tokens[i])
        rows.append(row)
    write_jsonl(path, rows)


class TestBuildThink:
    def test_mock_build_with_planted_disagreement(self, tmp_path, capsys):
        pairs_path = tmp_path / "pairs.jsonl"
        write_pairs_fixture(pairs_path, count=20)
        out_dir = tmp_path / "out"
        code = main([
            "build-think", "--input", str(pairs_path), "--out-dir", str(out_dir),
            "--mock", "--mock-disagree-rate", "0.25", "--seed", "7",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "kept: 15" in out
        assert "dropped_disagree: 5" in out
        assert (out_dir / "think_train.jsonl").exists()
        assert (out_dir / "sft_train.jsonl.manifest.json").exists()
        manifest_lines = (out_dir / "manifests.jsonl").read_text().splitlines()
        assert len(manifest_lines) == 1
        manifest = json.loads(manifest_lines[0])
        assert manifest["command"] == "build-think"
        assert manifest["stats"]["kept"] == 15
        assert manifest["seed"] == 7
        assert "sft_think" in manifest["template_checksums"]

    def test_rerun_is_byte_identical(self, tmp_path):
        pairs_path = tmp_path / "pairs.jsonl"
        write_pairs_fixture(pairs_path, count=12)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out_dir in (out_a, out_b):
            code = main([
                "build-think", "--input", str(pairs_path), "--out-dir", str(out_dir),
                "--mock", "--mock-disagree-rate", "0.25", "--seed", "3",
            ])
            assert code == 0
        for name in ("think_train.jsonl", "think_dev.jsonl", "sft_train.jsonl", "sft_dev.jsonl"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_missing_credentials_without_mock(self, tmp_path, monkeypatch, capsys):
        monkeypatch.delenv("CLAIMCHECK_API_KEY", raising=False)
        pairs_path = tmp_path / "pairs.jsonl"
        write_pairs_fixture(pairs_path, count=4)
        config_path = tmp_path / "cfg.json"
        config_path.write_text('{"base_url": "http://localhost:1", "model": "m"}')
        code = main([
            "build-think", "--input", str(pairs_path),
            "--out-dir", str(tmp_path / "out"), "--config", str(config_path),
        ])
        assert code == 2
        assert "credentials" in capsys.readouterr().err

    def test_no_config_no_mock(self, tmp_path, capsys):
        pairs_path = tmp_path / "pairs.jsonl"
        write_pairs_fixture(pairs_path, count=4)
        code = main([
            "build-think", "--input", str(pairs_path), "--out-dir", str(tmp_path / "out"),
        ])
        assert code == 2

    def test_no_reasoning_export(self, tmp_path):
        pairs_path = tmp_path / "pairs.jsonl"
        write_pairs_fixture(pairs_path, count=10)
        out_dir = tmp_path / "out"
        code = main([
            "build-think", "--input", str(pairs_path), "--out-dir", str(out_dir),
            "--mock", "--no-reasoning",
        ])
        assert code == 0
        sft = (out_dir / "sft_train.jsonl").read_text()
        assert "<SOLUTION>" in sft
        assert "<REASONING>" not in sft

    def test_partial_outputs_removed_on_abort(self, tmp_path, monkeypatch):
        import claimcheck.cli as cli_mod
        from claimcheck.datagen import IoFailure

        def broken_export(*args, **kwargs):
            raise IoFailure("disk full")

        monkeypatch.setattr(cli_mod.datagen, "export_training_file", broken_export)
        pairs_path = tmp_path / "pairs.jsonl"
        write_pairs_fixture(pairs_path, count=10)
        out_dir = tmp_path / "out"
        code = main([
            "build-think", "--input", str(pairs_path), "--out-dir", str(out_dir), "--mock",
        ])
        assert code == 2
        assert not (out_dir / "think_train.jsonl").exists()
        assert not (out_dir / "manifests.jsonl").exists()


class TestBuildGsmclaims:
    def test_mock_build(self, tmp_path, capsys):
        problems_path = tmp_path / "problems.jsonl"
        write_problems_fixture(problems_path, count=5)
        out_dir = tmp_path / "out"
        code = main([
            "build-gsmclaims", "--input", str(problems_path),
            "--out-dir", str(out_dir), "--mock", "--seed", "2",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "instances: 10" in out
        assert "balance: 0.5000" in out
        lines = (out_dir / "gsmclaims.jsonl").read_text().splitlines()
        assert len(lines) == 10

    def test_invalid_oracle_response_reported_not_fatal(self, tmp_path, capsys):
        problems_path = tmp_path / "problems.jsonl"
        write_problems_fixture(problems_path, count=5)
        out_dir = tmp_path / "out"
        code = main([
            "build-gsmclaims", "--input", str(problems_path), "--out-dir", str(out_dir),
            "--mock", "--mock-invalid-ids", "g002",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "instances: 8" in out
        assert "failed: 1" in out
        assert "balance: 0.5000" in out

    def test_strict_json_violation_in_stats(self, tmp_path, capsys):
        problems_path = tmp_path / "problems.jsonl"
        write_problems_fixture(problems_path, count=3)
        code = main([
            "build-gsmclaims", "--input", str(problems_path),
            "--out-dir", str(tmp_path / "out"), "--mock", "--mock-prose-ids", "g001",
        ])
        assert code == 0
        assert "malformed=1" in capsys.readouterr().out


class TestEvaluate:
    def test_known_confusion(self, tmp_path, capsys):
        preds = tmp_path / "preds.jsonl"
        write_confusion_fixture(preds)
        code = main(["evaluate", "--predictions", str(preds), "--metric", "bacc"])
        assert code == 0
        out = capsys.readouterr().out
        assert "tp=3 fp=2 tn=2 fn=1" in out
        assert "0.625" in out

    def test_acc_equals_bacc_on_balanced_fixture(self, tmp_path, capsys):
        preds = tmp_path / "preds.jsonl"
        write_confusion_fixture(preds)  # 4 SUPPORTED vs 4 NOT_SUPPORTED golds
        main(["evaluate", "--predictions", str(preds), "--metric", "acc"])
        acc_line = [l for l in capsys.readouterr().out.splitlines() if l.startswith("acc:")][0]
        main(["evaluate", "--predictions", str(preds), "--metric", "bacc"])
        bacc_line = [l for l in capsys.readouterr().out.splitlines() if l.startswith("bacc:")][0]
        assert acc_line.split()[1] == bacc_line.split()[1]

    def test_malformed_line_exits_2_with_lineno(self, tmp_path, capsys):
        preds = tmp_path / "preds.jsonl"
        preds.write_text('{"id": "a", "gold": "SUPPORTED"}\n{broken\n')
        code = main(["evaluate", "--predictions", str(preds)])
        assert code == 2
        assert ":2:" in capsys.readouterr().err

    def test_report_written_with_manifest(self, tmp_path):
        preds = tmp_path / "preds.jsonl"
        write_confusion_fixture(preds)
        report = tmp_path / "reports" / "eval.json"
        code = main(["evaluate", "--predictions", str(preds), "--report", str(report)])
        assert code == 0
        assert json.loads(report.read_text())["value"] == 0.625
        assert (report.parent / "manifests.jsonl").exists()


class TestCompare:
    def test_identical_predictions(self, tmp_path, capsys):
        preds = tmp_path / "preds.jsonl"
        write_confusion_fixture(preds)
        code = main([
            "compare", "--a", str(preds), "--b", str(preds),
            "--resamples", "500", "--seed", "1",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "delta_observed: +0.000000" in out
        assert "p_value: 1.000000" in out

    def test_planted_gap_significant(self, tmp_path, capsys):
        golds = ["SUPPORTED"] * 500 + ["NOT_SUPPORTED"] * 500
        preds_a = ["SUPPORTED"] * 450 + ["NOT_SUPPORTED"] * 50 \
            + ["NOT_SUPPORTED"] * 450 + ["SUPPORTED"] * 50
        preds_b = ["SUPPORTED"] * 350 + ["NOT_SUPPORTED"] * 150 \
            + ["NOT_SUPPORTED"] * 350 + ["SUPPORTED"] * 150
        a_path, b_path = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_eval_fixture(a_path, golds, preds_a)
        write_eval_fixture(b_path, golds, preds_b)
        code = main([
            "compare", "--a", str(a_path), "--b", str(b_path),
            "--resamples", "2000", "--seed", "0",
        ])
        assert code == 0
        out = capsys.readouterr().out
        p_value = float([l for l in out.splitlines() if l.startswith("p_value:")][0].split()[1])
        assert p_value < 0.05

    def test_unpaired_ids_exit_2(self, tmp_path, capsys):
        a_path, b_path = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_eval_fixture(a_path, ["SUPPORTED", "NOT_SUPPORTED"], ["SUPPORTED", "NOT_SUPPORTED"])
        write_jsonl(b_path, [{"id": "other", "gold": "SUPPORTED", "predicted": "SUPPORTED"},
                             {"id": "e0001", "gold": "NOT_SUPPORTED", "predicted": "SUPPORTED"}])
        code = main(["compare", "--a", str(a_path), "--b", str(b_path)])
        assert code == 2
        assert "id sets differ" in capsys.readouterr().err


class TestLengthAnalysis:
    def test_table_has_ten_rows(self, tmp_path, capsys):
        preds = tmp_path / "preds.jsonl"
        golds = ["SUPPORTED" if i % 2 == 0 else "NOT_SUPPORTED" for i in range(100)]
        write_eval_fixture(preds, golds, golds, reasoning_tokens=list(range(1, 101)))
        code = main(["length-analysis", "--predictions", str(preds)])
        assert code == 0
        out_lines = capsys.readouterr().out.splitlines()
        data_rows = [l for l in out_lines if l.strip() and l.strip()[0].isdigit()]
        assert len(data_rows) == 10

    def test_planted_long_tail_errors(self, tmp_path, capsys):
        preds = tmp_path / "preds.jsonl"
        golds = ["SUPPORTED" if i % 2 == 0 else "NOT_SUPPORTED" for i in range(100)]
        predictions = [
            ("NOT_SUPPORTED" if g == "SUPPORTED" else "SUPPORTED") if i >= 90 else g
            for i, g in enumerate(golds)
        ]
        write_eval_fixture(preds, golds, predictions, reasoning_tokens=list(range(1, 101)))
        plot_path = tmp_path / "plot.jsonl"
        code = main([
            "length-analysis", "--predictions", str(preds), "--plot-data", str(plot_path),
        ])
        assert code == 0
        points = [json.loads(l) for l in plot_path.read_text().splitlines()]
        assert len(points) == 10
        assert points[-1]["bacc"] == 0.0
        assert all(p["bacc"] == 1.0 for p in points[:-1])

    def test_too_few_records_exit_2(self, tmp_path):
        preds = tmp_path / "preds.jsonl"
        write_eval_fixture(preds, ["SUPPORTED"] * 5, ["SUPPORTED"] * 5, reasoning_tokens=[3] * 5)
        code = main(["length-analysis", "--predictions", str(preds)])
        assert code == 2


class TestVerify:
    def test_mock_verdict_printed(self, capsys):
        code = main([
            "verify", "--claim", "Water boils.", "--document", "Water boils at 100C.", "--mock",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "verdict: SUPPORTED" in out
        assert "format_ok: true" in out

    def test_tagless_completion_is_unparseable_but_exit_0(self, capsys):
        code = main([
            "verify", "--claim", "c", "--document", "d",
            "--mock", "--mock-completion", "I have no idea about tags.",
        ])
        assert code == 0
        assert "verdict: UNPARSEABLE" in capsys.readouterr().out

    def test_no_reasoning_mode(self, capsys):
        code = main([
            "verify", "--claim", "c", "--document", "d", "--mock", "--no-reasoning",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "verdict: SUPPORTED" in out
        assert "rationale: -" in out

    def test_decoding_overrides_propagate(self, capsys):
        code = main([
            "verify", "--claim", "c", "--document", "d", "--mock",
            "--temperature", "0.25", "--top-k", "7", "--max-new-tokens", "99",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "temperature=0.25" in out
        assert "top_k=7" in out
        assert "max_new_tokens=99" in out

    def test_unreachable_backend_exit_3(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("CLAIMCHECK_API_KEY", "k")
        config_path = tmp_path / "cfg.json"
        config_path.write_text(json.dumps({
            "base_url": "http://127.0.0.1:9",
            "model": "m",
            "max_attempts": 2,
            "backoff_base_s": 0.0,
            "timeout_s": 0.5,
        }))
        code = main([
            "verify", "--claim", "c", "--document", "d", "--config", str(config_path),
        ])
        assert code == 3
        assert "backend failure" in capsys.readouterr().err


class TestRewardCheck:
    CORNERS = [
        # well-formed correct YES -> +3.0424
        {"id": "best_yes", "gold": "SUPPORTED",
         "completion": "<REASONING>\nr\n</REASONING>\n<SOLUTION>\nYES\n</SOLUTION>"},
        # malformed and wrong on gold NO -> -9.874
        {"id": "worst_no", "gold": "NOT_SUPPORTED", "completion": "nothing tagged"},
        # solution block only, correct NO -> +8.874
        {"id": "untagged_correct_no", "gold": "NOT_SUPPORTED",
         "completion": "<SOLUTION>\nNO\n</SOLUTION>"},
        # well-formed but wrong on gold YES -> -2.0424
        {"id": "formatted_wrong_yes", "gold": "SUPPORTED",
         "completion": "<REASONING>\nr\n</REASONING>\n<SOLUTION>\nNO\n</SOLUTION>"},
    ]

    def test_corner_case_totals(self, tmp_path, capsys):
        completions = tmp_path / "completions.jsonl"
        write_jsonl(completions, self.CORNERS)
        code = main(["reward-check", "--completions", str(completions)])
        assert code == 0
        out = capsys.readouterr().out
        for expected in ("+3.0424", "-9.8740", "+8.8740", "-2.0424"):
            assert f"total={expected}" in out

    def test_empty_file(self, tmp_path, capsys):
        completions = tmp_path / "empty.jsonl"
        completions.write_text("")
        code = main(["reward-check", "--completions", str(completions)])
        assert code == 0
        assert "records: 0" in capsys.readouterr().out

    def test_missing_gold_exit_2(self, tmp_path, capsys):
        completions = tmp_path / "bad.jsonl"
        write_jsonl(completions, [{"id": "x", "completion": "text"}])
        code = main(["reward-check", "--completions", str(completions)])
        assert code == 2
        assert "gold" in capsys.readouterr().err

    def test_report_file(self, tmp_path):
        completions = tmp_path / "completions.jsonl"
        write_jsonl(completions, self.CORNERS)
        report = tmp_path / "report.jsonl"
        code = main(["reward-check", "--completions", str(completions), "--report", str(report)])
        assert code == 0
        rows = [json.loads(l) for l in report.read_text().splitlines()]
        assert [round(r["total"], 4) for r in rows] == [3.0424, -9.874, 8.874, -2.0424]
