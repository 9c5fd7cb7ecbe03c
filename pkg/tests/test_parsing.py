from __future__ import annotations

import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anomkit.parsing import (
    SourceAnswerError,
    format_structured_list,
    parse_severity_text,
    parse_source_answer,
    parse_structured_list,
)
from anomkit.records import SourceLabel
from conftest import record

SUSPENDED_CHAIR = (
    "@1. **Name**: Suspended chair without support\n"
    "- **Observed Phenomenon**: A wooden chair is floating approximately 30 cm "
    "above the ground without visible support or shadows.\n"
    "- **Reasoning**: Gravity requires contact or suspension; absence of legs, "
    "shadows, or wires defies physical realism.\n"
    "- **Severity Score**: 10/100 (extremely unnatural)"
)


class TestParseStructuredList:
    def test_suspended_chair_example(self):
        report = parse_structured_list(SUSPENDED_CHAIR)
        assert len(report.records) == 1
        assert report.skipped_blocks == ()
        rec = report.records[0]
        assert rec.name == "Suspended chair without support"
        assert rec.severity == 10.0
        assert rec.phenomenon.startswith("A wooden chair is floating")

    def test_empty_text(self):
        report = parse_structured_list("")
        assert report.records == ()
        assert report.skipped_blocks == ()

    def test_missing_severity_is_skipped(self):
        text = "@1. **Name**: X\n**Phenomenon**: Y\n**Reasoning**: Z"
        report = parse_structured_list(text)
        assert report.records == ()
        assert report.skipped_blocks == ((0, "missing severity"),)

    def test_preamble_ignored(self):
        text = "Sure! Here are the anomalies I found:\n\n" + SUSPENDED_CHAIR
        assert len(parse_structured_list(text).records) == 1

    def test_plain_numbering_and_label_synonyms(self):
        text = (
            "1. Name: Two left hands\n"
            "Observed Issue: The person has two left hands.\n"
            "Explanation: Human anatomy allows one left and one right hand.\n"
            "Severity: 5\n"
        )
        report = parse_structured_list(text)
        assert len(report.records) == 1
        assert report.records[0].phenomenon == "The person has two left hands."
        assert report.records[0].reasoning.startswith("Human anatomy")
        assert report.records[0].severity == 5.0

    def test_observed_synonym(self):
        text = "@1. Name: N\nObserved: something odd\nReasoning: because\nSeverity Score: 50"
        report = parse_structured_list(text)
        assert report.records[0].phenomenon == "something odd"

    def test_good_and_bad_blocks_mix_in_order(self):
        text = (
            "@1. **Name**: A\n**Phenomenon**: p1\n**Reasoning**: r1\n**Severity Score**: 10.\n\n"
            "@2. **Name**: B\n**Phenomenon**: p2\n**Reasoning**: r2\n\n"
            "@3. **Name**: C\n**Phenomenon**: p3\n**Reasoning**: r3\n**Severity Score**: 30.\n"
        )
        report = parse_structured_list(text)
        assert [r.name for r in report.records] == ["A", "C"]
        assert report.skipped_blocks == ((1, "missing severity"),)

    def test_out_of_range_severity_skipped(self):
        text = "@1. Name: A\nPhenomenon: p\nReasoning: r\nSeverity Score: 120"
        report = parse_structured_list(text)
        assert report.records == ()
        assert "severity out of range" in report.skipped_blocks[0][1]

    def test_multiline_field_values_joined(self):
        text = (
            "@1. **Name**: A\n"
            "- **Observed Phenomenon**:\n"
            "   - the top half is detached\n"
            "   - the bottom half is missing\n"
            "- **Reasoning**: r\n"
            "- **Severity Score**: 10\n"
        )
        rec = parse_structured_list(text).records[0]
        assert "top half" in rec.phenomenon and "bottom half" in rec.phenomenon


class TestSeverityForms:
    @pytest.mark.parametrize(
        "text,value",
        [
            ("10", 10.0),
            ("10.", 10.0),
            ("10/100", 10.0),
            ("10/100 (extremely unnatural)", 10.0),
            ("10 / 100", 10.0),
            ("5/100 (highly unrealistic)", 5.0),
            ("20.5", 20.5),
            ("20.5.", 20.5),
            ("0", 0.0),
            ("100", 100.0),
        ],
    )
    def test_accepted_forms(self, text, value):
        assert parse_severity_text(text) == value

    @pytest.mark.parametrize("text", ["", "high", "ten", "10-20"])
    def test_rejected_forms(self, text):
        with pytest.raises(ValueError):
            parse_severity_text(text)


class TestFormat:
    def test_two_records_emit_two_blocks(self):
        text = format_structured_list([record(name="A"), record(name="B")])
        assert "@1. **Name**: A" in text
        assert "@2. **Name**: B" in text
        assert "**Severity Score**: 10." in text

    def test_empty_list(self):
        assert format_structured_list([]) == ""

    def test_round_trip_hand_case(self):
        records = [
            record(name="Pillow compression inconsistency", severity=25),
            record(name="Shirt fabric rigidity", severity=20.5),
        ]
        parsed = parse_structured_list(format_structured_list(records)).records
        assert list(parsed) == records


SAFE_TEXT = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 ,;'-",
    min_size=1,
    max_size=60,
).map(lambda s: " ".join(s.split())).filter(bool)

SAFE_SEVERITY = st.one_of(
    st.integers(min_value=0, max_value=100),
    st.floats(min_value=0, max_value=100, allow_nan=False),
)


@st.composite
def safe_records(draw):
    return record(
        name=draw(SAFE_TEXT),
        phenomenon=draw(SAFE_TEXT),
        reasoning=draw(SAFE_TEXT),
        severity=draw(SAFE_SEVERITY),
    )


@settings(max_examples=200, deadline=None)
@given(st.lists(safe_records(), max_size=6))
def test_format_parse_round_trip(records):
    report = parse_structured_list(format_structured_list(records))
    assert report.skipped_blocks == ()
    assert list(report.records) == records


# Grammar oracle: a deliberately simple reference parser over the block
# grammar, compared against the production parser on a generated corpus.
def reference_parse(text):
    out = []
    blocks = re.split(r"(?m)^\s*@?\d+\.\s*", text)[1:]
    label_map = {
        "name": "name",
        "phenomenon": "phenomenon",
        "observed phenomenon": "phenomenon",
        "observed issue": "phenomenon",
        "observed": "phenomenon",
        "reasoning": "reasoning",
        "explanation": "reasoning",
        "severity score": "severity",
        "severity": "severity",
    }
    for block in blocks:
        fields = {}
        for line in block.splitlines():
            stripped = line.strip().lstrip("-*• ").strip()
            for label in sorted(label_map, key=len, reverse=True):
                head = stripped.lower()
                if head.startswith(label) and head[len(label):].lstrip(" *").startswith(":"):
                    value = stripped[len(label):]
                    value = value.lstrip(" *").lstrip(":").strip()
                    fields.setdefault(label_map[label], value)
                    break
        if set(fields) == {"name", "phenomenon", "reasoning", "severity"} and all(
            fields.values()
        ):
            try:
                severity = parse_severity_text(fields["severity"])
            except ValueError:
                out.append(None)
                continue
            if 0 <= severity <= 100:
                out.append((fields["name"], fields["phenomenon"], fields["reasoning"], severity))
            else:
                out.append(None)
        else:
            out.append(None)
    return out


def test_grammar_oracle_corpus():
    rng = random.Random(7)
    labels = {
        "name": ["Name"],
        "phenomenon": ["Phenomenon", "Observed Phenomenon", "Observed Issue"],
        "reasoning": ["Reasoning", "Explanation"],
        "severity": ["Severity Score", "Severity"],
    }
    for case in range(50):
        blocks = []
        for b in range(rng.randint(1, 4)):
            drop = rng.random() < 0.3
            dropped = rng.choice(list(labels)) if drop else None
            sev = rng.choice(["10", "85/100", "40/100 (odd)", "7.", "120"])
            lines = [f"@{b + 1}. **Name**: item {case}-{b}"]
            for key in ("phenomenon", "reasoning", "severity"):
                if key == dropped:
                    continue
                label = rng.choice(labels[key])
                value = sev if key == "severity" else f"{key} text {case}-{b}"
                bullet = rng.choice(["", "- "])
                bold = rng.choice(["**", ""])
                lines.append(f"{bullet}{bold}{label}{bold}: {value}")
            if dropped == "name":
                lines[0] = f"@{b + 1}. first line without a label"
            blocks.append("\n".join(lines))
        text = "\n\n".join(blocks)
        expected = [entry for entry in reference_parse(text) if entry is not None]
        got = [
            (r.name, r.phenomenon, r.reasoning, r.severity)
            for r in parse_structured_list(text).records
        ]
        assert got == expected, f"case {case} diverged:\n{text}"


class TestParseSourceAnswer:
    def test_yes_is_ai(self):
        assert parse_source_answer("Yes, this image is generated by AI") is SourceLabel.AI

    def test_no_is_real(self):
        assert parse_source_answer("No, this image is a real photograph.") is SourceLabel.REAL

    def test_phrases_without_leading_word(self):
        assert parse_source_answer("This image is generated by AI.") is SourceLabel.AI
        assert parse_source_answer("It is a real photograph of a dog.") is SourceLabel.REAL

    def test_first_sentence_only(self):
        assert (
            parse_source_answer("No, it is real. Yes it might be generated by AI later.")
            is SourceLabel.REAL
        )

    def test_unparseable(self):
        with pytest.raises(SourceAnswerError, match="unparseable source answer"):
            parse_source_answer("maybe")

    def test_case_insensitive(self):
        assert parse_source_answer("YES, synthetic.") is SourceLabel.AI
