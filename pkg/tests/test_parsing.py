from hypothesis import given, settings
from hypothesis import strategies as st

from claimcheck.core import GroundedPair, ReasoningExample, Verdict
from claimcheck.parsing import format_adherent, parse_oracle_output, parse_verifier_output
from claimcheck.prompts import render_training_example


class TestParseVerifierOutput:
    def test_well_formed(self):
        raw = "<REASONING>\nstep one\n</REASONING>\n<SOLUTION>\nYES\n</SOLUTION>"
        parsed = parse_verifier_output(raw)
        assert parsed.reasoning == "step one"
        assert parsed.verdict is Verdict.SUPPORTED
        assert parsed.format_ok

    def test_solution_only_fails_format_but_keeps_verdict(self):
        parsed = parse_verifier_output("<SOLUTION>NO</SOLUTION>")
        assert parsed.reasoning is None
        assert parsed.verdict is Verdict.NOT_SUPPORTED
        assert not parsed.format_ok

    def test_unrecognized_verdict_token(self):
        parsed = parse_verifier_output("<REASONING>r</REASONING><SOLUTION>perhaps</SOLUTION>")
        assert parsed.reasoning == "r"
        assert parsed.verdict is None
        assert not parsed.format_ok

    def test_blocks_out_of_order(self):
        parsed = parse_verifier_output("<SOLUTION>NO</SOLUTION><REASONING>r</REASONING>")
        assert not parsed.format_ok
        assert parsed.verdict is Verdict.NOT_SUPPORTED
        assert parsed.reasoning == "r"

    def test_duplicate_blocks_first_wins(self):
        raw = (
            "<REASONING>first</REASONING><SOLUTION>YES</SOLUTION>"
            "<REASONING>second</REASONING><SOLUTION>NO</SOLUTION>"
        )
        parsed = parse_verifier_output(raw)
        assert parsed.reasoning == "first"
        assert parsed.verdict is Verdict.SUPPORTED
        assert parsed.format_ok

    def test_interleaved_blocks_fail_format(self):
        parsed = parse_verifier_output("<REASONING><SOLUTION>YES</SOLUTION></REASONING>")
        assert not parsed.format_ok

    def test_lowercase_tags_not_accepted(self):
        parsed = parse_verifier_output("<reasoning>r</reasoning><solution>YES</solution>")
        assert not parsed.format_ok
        assert parsed.verdict is None

    def test_inner_whitespace_preserved(self):
        raw = "<REASONING>\n  a\n\n  b  \n</REASONING><SOLUTION>YES</SOLUTION>"
        parsed = parse_verifier_output(raw)
        assert parsed.reasoning == "a\n\n  b"


class TestParseOracleOutput:
    def test_well_formed(self):
        parsed = parse_oracle_output("<reasoning>a\nb</reasoning><entailment>NO</entailment>")
        assert parsed.reasoning == "a\nb"
        assert parsed.verdict is Verdict.NOT_SUPPORTED
        assert parsed.format_ok

    def test_wrong_order(self):
        parsed = parse_oracle_output("<entailment>NO</entailment><reasoning>r</reasoning>")
        assert not parsed.format_ok

    def test_duplicate_entailment_first_wins(self):
        raw = "<reasoning>r</reasoning><entailment>YES</entailment><entailment>NO</entailment>"
        parsed = parse_oracle_output(raw)
        assert parsed.verdict is Verdict.SUPPORTED
        assert parsed.format_ok

    def test_uppercase_tags_not_accepted(self):
        parsed = parse_oracle_output("<REASONING>r</REASONING><ENTAILMENT>YES</ENTAILMENT>")
        assert not parsed.format_ok


class TestFormatAdherent:
    def test_well_formed(self):
        assert format_adherent("<REASONING>r</REASONING><SOLUTION>YES</SOLUTION>")

    def test_empty_string(self):
        assert not format_adherent("")

    def test_solution_before_reasoning(self):
        assert not format_adherent("<SOLUTION>YES</SOLUTION><REASONING>r</REASONING>")

    @given(st.text(max_size=300))
    def test_matches_parser_format_flag(self, raw):
        assert format_adherent(raw) == parse_verifier_output(raw).format_ok


_tag_soup = st.lists(
    st.one_of(
        st.text(max_size=12),
        st.sampled_from(
            ["<REASONING>", "</REASONING>", "<SOLUTION>", "</SOLUTION>",
             "<reasoning>", "</reasoning>", "<entailment>", "</entailment>",
             "YES", "NO", "\n", "\x00"]
        ),
    ),
    max_size=12,
).map("".join)


class TestTotality:
    @given(_tag_soup)
    @settings(max_examples=300)
    def test_parsers_never_raise(self, raw):
        for parsed in (parse_verifier_output(raw), parse_oracle_output(raw)):
            assert parsed.raw == raw
            if parsed.format_ok:
                assert parsed.verdict is not None


_clean_text = st.text(
    alphabet=st.characters(blacklist_characters="<>{}"), min_size=1, max_size=60
).filter(lambda s: s.strip())


class TestRoundTrip:
    @given(
        claim=_clean_text,
        document=_clean_text,
        reasoning_lines=st.lists(_clean_text, min_size=1, max_size=4),
        verdict=st.sampled_from(list(Verdict)),
    )
    @settings(max_examples=150)
    def test_rendered_completion_recovers_example(self, claim, document, reasoning_lines, verdict):
        reasoning = "\n".join(line.strip() for line in reasoning_lines).strip()
        pair = GroundedPair(id="rt", claim=claim, document=document, gold=verdict)
        ex = ReasoningExample(pair=pair, reasoning=reasoning, verdict=verdict)
        completion = render_training_example(ex, with_reasoning=True).split("</CLAIM>\n", 1)[1]
        parsed = parse_verifier_output(completion)
        assert parsed.format_ok
        assert parsed.reasoning == reasoning
        assert parsed.verdict is verdict
