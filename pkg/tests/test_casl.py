import random

import pytest
from hypothesis import given, settings, strategies as st

from cascade import casl
from cascade.model import (
    ArgumentType,
    ClaimType,
    EvidenceFamily,
    ReasoningLogic,
    ClaimStatus,
    EnvelopeAction,
)
from casegen import random_case


def test_golden_parses(golden_case):
    c = golden_case
    assert c.case_id == "tender_eval"
    assert c.top_claim == "C1"
    assert c.nodes["C1"].claim_type is ClaimType.MARGINAL
    assert c.nodes["C1"].supported_by == ("A1", "A2")
    assert c.nodes["A2"].grounded_in == ("E2", "E4")
    assert c.nodes["E3"].sub_kind == "expert_assessment"
    assert len(c.claims()) == 1 and len(c.arguments()) == 2 and len(c.evidence()) == 4


def test_golden_canonical_form_is_frozen(golden_text, fixtures):
    frozen = (fixtures / "tender-eval.canonical.casl").read_text(encoding="utf-8")
    assert casl.canonicalize(golden_text) == frozen
    assert casl.canonicalize(frozen) == frozen


def test_empty_document():
    with pytest.raises(casl.ParseError) as ei:
        casl.parse("")
    e = ei.value
    assert (e.line, e.column) == (1, 1)
    assert e.expected == '"case"' and e.found == "end of input"


def test_declaration_order_does_not_matter(golden_case):
    text = casl.serialize(golden_case)
    lines = text.splitlines()
    header, meta, blocks = lines[0], [], []
    for ln in lines[1:-1]:
        if ln.split()[0] in ("claim", "argument", "evidence") and not ln.startswith("    "):
            blocks.append([ln])
        elif blocks:
            blocks[-1].append(ln)
        else:
            meta.append(ln)
    shuffled = "\n".join([header] + meta + sum(reversed(blocks), []) + ["}"]) + "\n"
    assert shuffled != text
    assert casl.serialize(casl.parse(shuffled)) == text


def test_envelope_block():
    src = """case env "Envelope" version 1 {
  claim top C1 type envelope_constrained {
    text: "stays in envelope"
    supported_by: [A1]
    envelope { accuracy: [0.9, 1.0] action: human_handoff }
  }
  argument A1 type barrier logic deductive {
    text: "monitor"
    supports: [C1]
  }
}
"""
    out = casl.canonicalize(src)
    assert "    envelope { accuracy: [0.9, 1.0] action: human_handoff }\n" in out
    c = casl.parse(out)
    env = c.nodes["C1"].envelope
    assert env.action is EnvelopeAction.HUMAN_HANDOFF
    assert (env.bounds[0].lower, env.bounds[0].upper) == (0.9, 1.0)


def test_status_defaults_to_developed():
    c = casl.parse('case x "t" version 1 {\n  claim top C1 type absolute { text: "a" }\n}\n')
    assert c.nodes["C1"].status is ClaimStatus.DEVELOPED
    assert "status: developed" in casl.serialize(c)


def test_comments_are_dropped(golden_text):
    assert "#" in golden_text
    assert "# " not in casl.canonicalize(golden_text)


@pytest.mark.parametrize("s", ['', 'a"b', "back\\slash", "tab\tnew\nline", "\x01\x7f", "é 😀 ≤", "#not a comment"])
def test_quote_roundtrip(s):
    toks = casl.tokenize(casl.quote(s))
    assert toks[0].kind == "STRING" and toks[0].value == s


def test_round_trip_random_cases():
    for seed in range(300):
        c = random_case(random.Random(seed))
        text = casl.serialize(c)
        back = casl.parse(text)
        assert back == c
        assert casl.serialize(back) == text


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_round_trip_property(seed):
    c = random_case(random.Random(seed))
    text = casl.serialize(c)
    assert casl.parse(text) == c
    assert casl.canonicalize(text) == text


@settings(max_examples=60, deadline=None)
@given(st.text())
def test_arbitrary_text_in_strings(s):
    src = f'case x {casl.quote(s)} version 1 {{\n  claim top C1 type absolute {{ text: {casl.quote(s)} }}\n}}\n'
    c = casl.parse(src)
    assert c.title == s and c.nodes["C1"].text == s


def test_parse_errors_carry_positions():
    src = 'case x "t" version 1 {\n  claim top C1 type absolute {\n    text: "a"\n    supported_by: [A9]\n  }\n}\n'
    with pytest.raises(casl.ParseError) as ei:
        casl.parse(src)
    assert (ei.value.line, ei.value.column) == (4, 20)
    assert "A9" in ei.value.found


@pytest.mark.parametrize(
    "src, line",
    [
        ('case x "t" version 1 {\n  claim top C1 type absolute { text: "a" }\n  claim top C2 type absolute { text: "b" }\n}', 3),
        ('case x "t" version 1 {\n  claim C1 type absolute { text: "a" }\n}', 3),
        ('case x "t" version 1 {\n  claim top C1 type absolute { text: "a" }\n  claim C1 type absolute { text: "b" }\n}', 3),
        ('case x "t" version 1 {\n  claim top C1 type absolute { text: "a" }\n}\nextra', 4),
        ('case x "t" version 1 {\n  claim top C1 type absolute { text: "unterminated }\n}', 2),
        ('case x "t" version 1 {\n  claim top C1 type absolute { text: "a" }\n  evidence E1 family mechanistic kind testing {\n', 3),
    ],
)
def test_structural_errors(src, line):
    with pytest.raises(casl.ParseError) as ei:
        casl.parse(src)
    assert ei.value.line == line


def test_illegal_link_kind_is_parse_error():
    src = """case x "t" version 1 {
  claim top C1 type absolute {
    text: "a"
    supported_by: [E1]
  }
  evidence E1 family empirical {
    text: "e"
    quality { independence: true, coverage: "c", recency: 2025-01-01, reproducible: true, representative: true }
  }
}"""
    with pytest.raises(casl.ParseError) as ei:
        casl.parse(src)
    assert ei.value.line == 4


_KEYWORDS = (
    {"case", "version", "claim", "top", "type", "argument", "logic", "evidence", "family", "kind",
     "text", "status", "supported_by", "supports", "grounded_in", "quality", "independence", "coverage",
     "recency", "reproducible", "representative", "artefact", "context", "controls", "true", "false"}
    | {e.value for cls in (ArgumentType, ClaimType, EvidenceFamily, ReasoningLogic, ClaimStatus) for e in cls}
)


def _corruptions(text):
    """Yield (corrupted text, line) for single-token substitutions that break the syntax."""
    for tok in casl.tokenize(text):
        if tok.kind == "EOF":
            continue
        lines = text.split("\n")
        ln = lines[tok.line - 1]
        start = tok.col - 1
        # locate the raw lexeme: strings are re-quoted, everything else is literal
        raw = casl.quote(tok.value) if tok.kind == "STRING" else tok.value
        assert ln[start : start + len(raw)] == raw, (tok, ln)
        subs = ["@"]
        if tok.kind == "IDENT" and tok.value in _KEYWORDS:
            subs.append("zzz")
        elif tok.kind in ("STRING", "NUMBER", "DATE", "HASH"):
            subs.append("zzz")
        elif tok.kind == "PUNCT":
            subs.append("~")
        for sub in subs:
            lines2 = list(lines)
            lines2[tok.line - 1] = ln[:start] + sub + ln[start + len(raw):]
            yield "\n".join(lines2), tok.line


def test_single_token_corruptions_report_their_line(fixtures):
    text = (fixtures / "tender-eval.canonical.casl").read_text(encoding="utf-8")
    n = 0
    for bad, line in _corruptions(text):
        with pytest.raises(casl.ParseError) as ei:
            casl.parse(bad)
        assert ei.value.line == line, (line, str(ei.value))
        n += 1
    assert n > 200
