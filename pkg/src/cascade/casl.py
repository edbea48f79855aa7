"""CASL: the brace-block text format for safety cases.

    case tender_eval "AI tender evaluation" version 1 {
      context: "public procurement"
      claim top C1 type marginal {
        text: "..."
        supported_by: [A1]
      }
      ...
    }

``parse`` reports the first syntax error in document order as a
:class:`ParseError`; ``serialize`` emits the canonical form (sorted node
blocks, fixed field order, two-space indent, LF endings).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date
from typing import Callable, Optional, TypeVar

from .model import (
    ArgumentNode,
    ArgumentType,
    Bound,
    CaseMeta,
    ClaimNode,
    ClaimStatus,
    ClaimType,
    EnvelopeAction,
    EnvelopeSpec,
    EvidenceFamily,
    EvidenceNode,
    ModelError,
    Node,
    QualityMeta,
    ReasoningLogic,
    RootCauseRecord,
    SafetyCase,
    build_case,
    legal_sub_kinds,
)

E = TypeVar("E")


class ParseError(ValueError):
    def __init__(self, line: int, column: int, expected: str, found: str):
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        super().__init__(f"line {line}, column {column}: expected {expected}, found {found}")


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    col: int

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of input"
        if self.kind == "STRING":
            return "string"
        return repr(self.value)


_TOKEN_RE = re.compile(
    r"""
    (?P<WS>[ \t\r]+)
  | (?P<NL>\n)
  | (?P<COMMENT>\#[^\n]*)
  | (?P<HASH>[0-9a-f]{64}(?![\w.\-]))
  | (?P<DATE>\d{4}-\d{2}-\d{2}(?![\w.\-]))
  | (?P<NUMBER>-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?(?![\w.\-]))
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_.\-]*)
  | (?P<PUNCT>[{}\[\],:])
  | (?P<QUOTE>")
    """,
    re.VERBOSE,
)

_LEGAL_LINKS = {("claim", "argument"), ("argument", "claim"), ("argument", "evidence")}

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(source)
    while pos < n:
        col = pos - line_start + 1
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(line, col, "token", repr(source[pos]))
        kind = m.lastgroup
        if kind == "NL":
            line += 1
            line_start = m.end()
            pos = m.end()
            continue
        if kind in ("WS", "COMMENT"):
            pos = m.end()
            continue
        if kind == "QUOTE":
            value, pos = _read_string(source, m.end(), line, line_start)
            tokens.append(Token("STRING", value, line, col))
            continue
        tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


def _read_string(source: str, pos: int, line: int, line_start: int) -> tuple[str, int]:
    start_col = pos - line_start
    out: list[str] = []
    while True:
        if pos >= len(source) or source[pos] == "\n":
            raise ParseError(line, start_col, "closing quote", "end of line")
        ch = source[pos]
        if ch == '"':
            return "".join(out), pos + 1
        if ch == "\\":
            esc = source[pos + 1 : pos + 2]
            if esc in _ESCAPES:
                out.append(_ESCAPES[esc])
                pos += 2
                continue
            if esc == "u" and re.fullmatch(r"[0-9a-fA-F]{4}", source[pos + 2 : pos + 6]):
                out.append(chr(int(source[pos + 2 : pos + 6], 16)))
                pos += 6
                continue
            raise ParseError(line, pos - line_start + 1, "escape sequence", repr(source[pos : pos + 2]))
        out.append(ch)
        pos += 1


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        # (referencing token, parent id, child id) in document order
        self.refs: list[tuple[Token, str, str]] = []
        self.decls: dict[str, Token] = {}
        self.spans: dict[str, tuple[int, int]] = {}

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, expected: str, tok: Optional[Token] = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(tok.line, tok.col, expected, tok.describe())

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def at_word(self, word: str) -> bool:
        return self.tok.kind == "IDENT" and self.tok.value == word

    def word(self, word: str) -> Token:
        if not self.at_word(word):
            raise self.fail(f'"{word}"')
        return self.advance()

    def field(self, name: str) -> Token:
        t = self.word(name)
        self.punct(":")
        return t

    def at_field(self, name: str) -> bool:
        return self.at_word(name) and self.peek().kind == "PUNCT" and self.peek().value == ":"

    def punct(self, p: str) -> Token:
        if self.tok.kind != "PUNCT" or self.tok.value != p:
            raise self.fail(f'"{p}"')
        return self.advance()

    def at_punct(self, p: str) -> bool:
        return self.tok.kind == "PUNCT" and self.tok.value == p

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "IDENT":
            raise self.fail(what)
        return self.advance()

    def string(self) -> str:
        if self.tok.kind != "STRING":
            raise self.fail("quoted text")
        return self.advance().value

    def boolean(self) -> bool:
        if self.tok.kind == "IDENT" and self.tok.value in ("true", "false"):
            return self.advance().value == "true"
        raise self.fail("true or false")

    def integer(self) -> int:
        if self.tok.kind == "NUMBER" and re.fullmatch(r"-?\d+", self.tok.value):
            return int(self.advance().value)
        raise self.fail("integer")

    def real(self) -> float:
        if self.tok.kind == "NUMBER":
            return float(self.advance().value)
        raise self.fail("number")

    def a_date(self) -> date:
        t = self.tok
        if t.kind != "DATE":
            raise self.fail("date YYYY-MM-DD")
        try:
            value = date.fromisoformat(t.value)
        except ValueError:
            raise self.fail("valid calendar date") from None
        self.advance()
        return value

    def enum(self, cls: type[E]) -> E:
        t = self.tok
        choices = [m.value for m in cls]  # type: ignore[attr-defined]
        if t.kind == "IDENT" and t.value in choices:
            self.advance()
            return cls(t.value)  # type: ignore[call-arg]
        raise self.fail("one of " + "|".join(choices))

    def listof(self, item: Callable[[], E], allow_empty: bool = False) -> list[E]:
        self.punct("[")
        out: list[E] = []
        if self.at_punct("]"):
            if not allow_empty:
                raise self.fail("list item")
            self.advance()
            return out
        out.append(item())
        while self.at_punct(","):
            self.advance()
            out.append(item())
        self.punct("]")
        return out

    def id_refs(self, parent: str, reverse: bool = False) -> list[str]:
        def one() -> str:
            t = self.ident("node id")
            if reverse:
                self.refs.append((t, t.value, parent))
            else:
                self.refs.append((t, parent, t.value))
            return t.value

        return self.listof(one)

    # -- grammar -----------------------------------------------------------

    def document(self) -> SafetyCase:
        self.word("case")
        case_id = self.ident("case id").value
        title = self.string()
        self.word("version")
        version = self.integer()
        self.punct("{")

        context = ""
        controls: list[str] = []
        predecessor = None
        composed: list[str] = []
        if self.at_field("context"):
            self.field("context")
            context = self.string()
        if self.at_field("controls"):
            self.field("controls")
            controls = self.listof(self.string)
        if self.at_field("predecessor"):
            self.field("predecessor")
            if self.tok.kind != "HASH":
                raise self.fail("content hash (64 lowercase hex digits)")
            predecessor = self.advance().value
        if self.at_field("composed_from"):
            self.field("composed_from")
            composed = self.listof(self.string)

        nodes: list[Node] = []
        top: Optional[Token] = None
        while not self.at_punct("}"):
            if self.at_word("claim"):
                node, is_top, head = self.claim()
                if is_top:
                    if top is not None:
                        raise ParseError(head.line, head.col, "at most one top claim", '"top"')
                    top = head
            elif self.at_word("argument"):
                node = self.argument()
            elif self.at_word("evidence"):
                node = self.evidence()
            else:
                raise self.fail('"claim", "argument", "evidence" or "}"')
            nodes.append(node)
        close = self.punct("}")
        if self.tok.kind != "EOF":
            raise self.fail("end of input")
        if top is None:
            raise ParseError(close.line, close.col, "a claim marked top", '"}"')

        meta = CaseMeta(
            case_id=case_id,
            title=title,
            version=version,
            top_claim=top.value,
            context=context,
            controls=tuple(controls),
            predecessor=predecessor,
            composed_from=tuple(composed),
        )
        kinds = {n.id: n.kind for n in nodes}
        for tok, parent, child in self.refs:
            for nid in (parent, child):
                if nid not in kinds:
                    raise ParseError(tok.line, tok.col, "declared node id", repr(nid))
            pair = (kinds[parent], kinds[child])
            if pair not in _LEGAL_LINKS:
                want = "argument id" if kinds[parent] == "claim" else "claim or evidence id"
                if tok.value == parent:
                    want = "claim id"
                raise ParseError(tok.line, tok.col, want, f"{kinds[tok.value]} {tok.value!r}")
        try:
            return build_case(meta, nodes, spans=self.spans)
        except ModelError as exc:
            raise ParseError(close.line, close.col, "well-formed case", str(exc)) from exc

    def declare(self, t: Token) -> None:
        if t.value in self.decls:
            raise ParseError(t.line, t.col, "unique node id", repr(t.value))
        self.decls[t.value] = t

    def claim(self) -> tuple[ClaimNode, bool, Token]:
        head = self.word("claim")
        is_top = False
        if self.at_word("top") and not (self.peek().kind == "IDENT" and self.peek().value == "type"):
            self.advance()
            is_top = True
        id_tok = self.ident("claim id")
        self.declare(id_tok)
        self.word("type")
        ctype = self.enum(ClaimType)
        self.punct("{")
        self.field("text")
        text = self.string()
        status = ClaimStatus.DEVELOPED
        supported_by: list[str] = []
        envelope = None
        if self.at_field("status"):
            self.field("status")
            status = self.enum(ClaimStatus)
        if self.at_field("supported_by"):
            self.field("supported_by")
            supported_by = self.id_refs(id_tok.value)
        if self.at_word("envelope"):
            env_tok = self.tok
            envelope = self.envelope()
            if ctype is not ClaimType.ENVELOPE_CONSTRAINED:
                raise ParseError(env_tok.line, env_tok.col, '"}" (envelope only on envelope_constrained claims)', '"envelope"')
        close = self.punct("}")
        if ctype is ClaimType.ENVELOPE_CONSTRAINED and envelope is None:
            raise ParseError(close.line, close.col, '"envelope" block', '"}"')
        self.spans[id_tok.value] = (head.line, close.line)
        node = ClaimNode(
            id=id_tok.value,
            text=text,
            claim_type=ctype,
            supported_by=tuple(supported_by),
            status=status,
            envelope=envelope,
        )
        return node, is_top, id_tok

    def envelope(self) -> EnvelopeSpec:
        self.word("envelope")
        self.punct("{")
        bounds: list[Bound] = []
        while self.tok.kind == "IDENT" and not self.at_field("action"):
            name = self.ident("metric name").value
            self.punct(":")
            self.punct("[")
            lo_tok = self.tok
            lo = self.real()
            self.punct(",")
            hi = self.real()
            self.punct("]")
            if lo > hi:
                raise ParseError(lo_tok.line, lo_tok.col, "lower <= upper", f"[{lo}, {hi}]")
            bounds.append(Bound(name, lo, hi))
        if not bounds:
            raise self.fail("envelope bound")
        self.field("action")
        action = self.enum(EnvelopeAction)
        self.punct("}")
        return EnvelopeSpec(tuple(bounds), action)

    def argument(self) -> ArgumentNode:
        head = self.word("argument")
        id_tok = self.ident("argument id")
        self.declare(id_tok)
        self.word("type")
        atype = self.enum(ArgumentType)
        self.word("logic")
        logic = self.enum(ReasoningLogic)
        self.punct("{")
        self.field("text")
        text = self.string()
        self.field("supports")
        supports = self.id_refs(id_tok.value, reverse=True)
        grounded: list[str] = []
        if self.at_field("grounded_in"):
            self.field("grounded_in")
            grounded = self.id_refs(id_tok.value)
        root_cause = None
        if self.at_word("root_cause"):
            rc_tok = self.tok
            if atype is not ArgumentType.ROOT_CAUSE:
                raise ParseError(rc_tok.line, rc_tok.col, '"}" (root_cause block only on root_cause arguments)', '"root_cause"')
            root_cause = self.root_cause()
        close = self.punct("}")
        self.spans[id_tok.value] = (head.line, close.line)
        return ArgumentNode(
            id=id_tok.value,
            text=text,
            argument_type=atype,
            logic=logic,
            supports=tuple(supports),
            grounded_in=tuple(grounded),
            root_cause=root_cause,
        )

    def root_cause(self) -> RootCauseRecord:
        self.word("root_cause")
        self.punct("{")
        self.field("observations")
        observations = self.listof(self.string)
        self.field("hypotheses")
        hypotheses = self.listof(self.string)
        self.field("datasets")
        datasets = self.listof(self.string, allow_empty=True)
        self.field("confirmed")
        idx_tok = self.tok
        confirmed = self.integer()
        if not 0 <= confirmed < len(hypotheses):
            raise ParseError(idx_tok.line, idx_tok.col, f"hypothesis index in 0..{len(hypotheses) - 1}", idx_tok.value)
        self.field("mitigation")
        mitigation = self.string()
        self.field("deployed")
        deployed = self.boolean()
        self.punct("}")
        return RootCauseRecord(
            observations=tuple(observations),
            hypotheses=tuple(hypotheses),
            datasets=tuple(datasets),
            confirmed_hypothesis=confirmed,
            mitigation=mitigation,
            mitigation_deployed=deployed,
        )

    def evidence(self) -> EvidenceNode:
        head = self.word("evidence")
        id_tok = self.ident("evidence id")
        self.declare(id_tok)
        self.word("family")
        family = self.enum(EvidenceFamily)
        sub_kind = None
        if self.at_word("kind"):
            self.advance()
            kind_tok = self.ident("evidence kind")
            legal = sorted(legal_sub_kinds(family))
            if kind_tok.value not in legal:
                expected = "one of " + "|".join(legal) if legal else "no kind for this family"
                raise ParseError(kind_tok.line, kind_tok.col, expected, repr(kind_tok.value))
            sub_kind = kind_tok.value
        self.punct("{")
        self.field("text")
        text = self.string()
        quality = self.quality()
        artefact = None
        if self.at_field("artefact"):
            self.field("artefact")
            artefact = self.string()
        close = self.punct("}")
        self.spans[id_tok.value] = (head.line, close.line)
        return EvidenceNode(
            id=id_tok.value,
            text=text,
            family=family,
            quality=quality,
            sub_kind=sub_kind,
            artefact_uri=artefact,
        )

    def quality(self) -> QualityMeta:
        self.word("quality")
        self.punct("{")
        self.field("independence")
        independence = self.boolean()
        self.punct(",")
        self.field("coverage")
        coverage = self.string()
        self.punct(",")
        self.field("recency")
        recency = self.a_date()
        self.punct(",")
        self.field("reproducible")
        reproducible = self.boolean()
        self.punct(",")
        self.field("representative")
        representative = self.boolean()
        self.punct("}")
        return QualityMeta(independence, coverage, recency, reproducible, representative)


def parse(source: str) -> SafetyCase:
    """Parse CASL text. Raises :class:`ParseError` at the first syntax error."""
    return _Parser(tokenize(source)).document()


# ---------------------------------------------------------------------------
# canonical serialization


def quote(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        elif ord(ch) < 0x20 or ch == "\x7f":
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def format_real(x: float) -> str:
    return repr(float(x))


def _bool(b: bool) -> str:
    return "true" if b else "false"


def _ids(ids) -> str:
    return "[" + ", ".join(ids) + "]"


def _strings(items) -> str:
    return "[" + ", ".join(quote(s) for s in items) + "]"


def _claim(c: ClaimNode, top: bool) -> list[str]:
    marker = "top " if top else ""
    lines = [f"  claim {marker}{c.id} type {c.claim_type.value} {{", f"    text: {quote(c.text)}"]
    lines.append(f"    status: {c.status.value}")
    if c.supported_by:
        lines.append(f"    supported_by: {_ids(c.supported_by)}")
    if c.envelope is not None:
        parts = " ".join(f"{b.metric}: [{format_real(b.lower)}, {format_real(b.upper)}]" for b in c.envelope.bounds)
        lines.append(f"    envelope {{ {parts} action: {c.envelope.action.value} }}")
    lines.append("  }")
    return lines


def _argument(a: ArgumentNode) -> list[str]:
    lines = [
        f"  argument {a.id} type {a.argument_type.value} logic {a.logic.value} {{",
        f"    text: {quote(a.text)}",
        f"    supports: {_ids(a.supports)}",
    ]
    if a.grounded_in:
        lines.append(f"    grounded_in: {_ids(a.grounded_in)}")
    rc = a.root_cause
    if rc is not None:
        lines += [
            "    root_cause {",
            f"      observations: {_strings(rc.observations)}",
            f"      hypotheses: {_strings(rc.hypotheses)}",
            f"      datasets: {_strings(rc.datasets)}",
            f"      confirmed: {rc.confirmed_hypothesis}",
            f"      mitigation: {quote(rc.mitigation)}",
            f"      deployed: {_bool(rc.mitigation_deployed)}",
            "    }",
        ]
    lines.append("  }")
    return lines


def _evidence(e: EvidenceNode) -> list[str]:
    kind = f" kind {e.sub_kind}" if e.sub_kind else ""
    q = e.quality
    lines = [
        f"  evidence {e.id} family {e.family.value}{kind} {{",
        f"    text: {quote(e.text)}",
        (
            f"    quality {{ independence: {_bool(q.independence)}, coverage: {quote(q.coverage_note)}, "
            f"recency: {q.recency.isoformat()}, reproducible: {_bool(q.reproducible)}, "
            f"representative: {_bool(q.representative)} }}"
        ),
    ]
    if e.artefact_uri is not None:
        lines.append(f"    artefact: {quote(e.artefact_uri)}")
    lines.append("  }")
    return lines


def serialize(c: SafetyCase) -> str:
    lines = [f"case {c.case_id} {quote(c.title)} version {c.version} {{"]
    if c.context:
        lines.append(f"  context: {quote(c.context)}")
    if c.controls:
        lines.append(f"  controls: {_strings(c.controls)}")
    if c.predecessor:
        lines.append(f"  predecessor: {c.predecessor}")
    if c.composed_from:
        lines.append(f"  composed_from: {_strings(c.composed_from)}")
    for nid in sorted(c.nodes):
        node = c.nodes[nid]
        if isinstance(node, ClaimNode):
            lines += _claim(node, nid == c.top_claim)
        elif isinstance(node, ArgumentNode):
            lines += _argument(node)
        else:
            lines += _evidence(node)
    lines.append("}")
    return "\n".join(lines) + "\n"


def canonicalize(source: str) -> str:
    return serialize(parse(source))
