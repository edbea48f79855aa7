"""Rule-based checks over a built safety case.

Each rule V1..V11 runs independently over the same immutable case; the merged
findings are sorted by (rule, node) so the report is byte-stable.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
from datetime import date
from typing import Callable, Iterator, Optional

from . import casl
from .model import (
    ArgumentNode,
    ArgumentType,
    ClaimNode,
    ClaimStatus,
    ClaimType,
    EvidenceFamily,
    EvidenceNode,
    SafetyCase,
    allowed_logics,
    suitable_families,
)

ERROR = "error"
WARNING = "warning"
INFO = "info"

RULES = tuple(f"V{i}" for i in range(1, 12))

DEFAULT_RECENCY_MONTHS = 24

# An argument links an EvalResult through an evidence artefact with this scheme.
EVAL_URI_PREFIX = "eval:"


class UnknownRule(KeyError):
    pass


@dataclasses.dataclass(frozen=True)
class Diagnostic:
    rule: str
    severity: str
    node: Optional[str]
    message: str
    span: Optional[tuple[int, int]] = None

    def sort_key(self) -> tuple:
        return (_rule_rank(self.rule), self.node or "", self.message)

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "severity": self.severity,
            "node": self.node,
            "message": self.message,
            "span": list(self.span) if self.span else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Diagnostic":
        span = d.get("span")
        return cls(d["rule"], d["severity"], d.get("node"), d["message"], tuple(span) if span else None)


def _rule_rank(rule: str) -> tuple[int, str]:
    m = re.fullmatch(r"V(\d+)(\w*)", rule)
    return (int(m.group(1)), m.group(2)) if m else (99, rule)


@dataclasses.dataclass(frozen=True)
class ValidationReport:
    case_hash: str
    diagnostics: tuple[Diagnostic, ...]

    @property
    def passed(self) -> bool:
        return not any(d.severity == ERROR for d in self.diagnostics)

    def count(self, severity: str) -> int:
        return sum(1 for d in self.diagnostics if d.severity == severity)

    def by_rule(self, rule: str) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.rule == rule]

    def to_dict(self) -> dict:
        return {
            "case_hash": self.case_hash,
            "passed": self.passed,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationReport":
        return cls(d["case_hash"], tuple(Diagnostic.from_dict(x) for x in d["diagnostics"]))

    def to_text(self) -> str:
        rows = [("RULE", "SEVERITY", "NODE", "MESSAGE")]
        rows += [(d.rule, d.severity, d.node or "-", d.message) for d in self.diagnostics]
        w0 = max(len(r[0]) for r in rows)
        w1 = max(len(r[1]) for r in rows)
        w2 = max(len(r[2]) for r in rows)
        out = [f"{a:<{w0}}  {b:<{w1}}  {c:<{w2}}  {m}" for a, b, c, m in rows]
        status = "PASSED" if self.passed else "FAILED"
        out.append(
            f"{status}: {self.count(ERROR)} error(s), {self.count(WARNING)} warning(s), "
            f"{self.count(INFO)} info  [{self.case_hash[:12]}]"
        )
        return "\n".join(out) + "\n"


def case_hash(c: SafetyCase) -> str:
    return hashlib.sha256(casl.serialize(c).encode("utf-8")).hexdigest()


_EXPLANATIONS = {
    "V1": "Support and grounding edges must be acyclic: a claim may not end up "
    "justifying itself through its own arguments.",
    "V2": "There is exactly one top claim and it is the root of the argument; every "
    "other node should be reachable from it (unreachable nodes are reported as V2b warnings).",
    "V3": "A developed claim needs at least one supporting argument. Undeveloped and "
    "assumption claims without support are reported as warnings so skeletons stay usable.",
    "V4": "Every argument must be grounded in at least one sub-claim or evidence item, "
    "unless all the claims it supports are still marked undeveloped.",
    "V5": "The argument's reasoning logic must be one the argument-type/reasoning-logic "
    "alignment table allows (e.g. comparative arguments are inductive or statistical).",
    "V6": "An argument resting only on evidence should cite at least one evidence family "
    "suited to its assurance function.",
    "V7": "Evidence quality metadata (independence, coverage, recency, reproducibility, "
    "representativeness) should be complete; stale evidence is flagged for review.",
    "V8": "An envelope-constrained claim needs operational or empirical evidence that "
    "out-of-envelope behaviour is monitored and handled.",
    "V9": "A case that supersedes a prior version should argue comparatively or against "
    "thresholds that the update introduced no statistically significant degradation.",
    "V10": "A threshold-based argument must pre-declare its threshold(s) and the "
    "aggregation used to combine them, in its text or through a linked evaluation result.",
    "V11": "A capability-limited claim needs mechanistic or empirical evidence, i.e. "
    "mechanism inspection or adversarial validation of the claimed limit.",
}


def explain_rule(rule: str) -> str:
    key = rule.upper()
    if key == "V2B":
        key = "V2"
    try:
        return _EXPLANATIONS[key]
    except KeyError:
        raise UnknownRule(rule) from None


# ---------------------------------------------------------------------------
# rules

Finding = Iterator[Diagnostic]


def _diag(c: SafetyCase, rule: str, severity: str, node: Optional[str], message: str) -> Diagnostic:
    return Diagnostic(rule, severity, node, message, c.spans.get(node) if node else None)


def _v1_acyclic(c: SafetyCase, _ctx: "_Context") -> Finding:
    WHITE, GREY, BLACK = 0, 1, 2
    color = {k: WHITE for k in c.nodes}
    reported: set[str] = set()
    for root in sorted(c.nodes):
        if color[root] != WHITE:
            continue
        color[root] = GREY
        stack = [(root, iter(c.children(root)))]
        path = [root]
        while stack:
            nid, it = stack[-1]
            child = next(it, None)
            if child is None:
                color[nid] = BLACK
                stack.pop()
                path.pop()
                continue
            if color[child] == GREY:
                cycle = path[path.index(child):]
                start = min(cycle)
                if start not in reported:
                    reported.add(start)
                    i = cycle.index(start)
                    loop = cycle[i:] + cycle[:i] + [start]
                    yield _diag(c, "V1", ERROR, start, "support cycle: " + " -> ".join(loop))
            elif color[child] == WHITE:
                color[child] = GREY
                stack.append((child, iter(c.children(child))))
                path.append(child)


def _v2_rooted(c: SafetyCase, ctx: "_Context") -> Finding:
    for a in c.arguments():
        if c.top_claim in a.grounded_in:
            yield _diag(c, "V2", ERROR, c.top_claim, f"top claim is grounded in by argument {a.id}; it must be the root")
    reachable = ctx.reachable
    for nid in sorted(c.nodes):
        if nid not in reachable:
            yield _diag(c, "V2b", WARNING, nid, f"{c.nodes[nid].kind} not reachable from top claim {c.top_claim}")


def _v3_claim_support(c: SafetyCase, _ctx: "_Context") -> Finding:
    for cl in c.claims():
        if cl.supported_by:
            continue
        if cl.status is ClaimStatus.DEVELOPED:
            yield _diag(c, "V3", ERROR, cl.id, "developed claim has no supporting argument")
        else:
            yield _diag(c, "V3", WARNING, cl.id, f"{cl.status.value} claim has no supporting argument yet")


def _v4_grounding(c: SafetyCase, _ctx: "_Context") -> Finding:
    for a in c.arguments():
        if a.grounded_in:
            continue
        pending = a.supports and all(
            isinstance(c.nodes[s], ClaimNode) and c.nodes[s].status is ClaimStatus.UNDEVELOPED for s in a.supports
        )
        if not pending:
            yield _diag(c, "V4", ERROR, a.id, "argument is not grounded in any claim or evidence")


def _v5_logic(c: SafetyCase, _ctx: "_Context") -> Finding:
    for a in c.arguments():
        allowed = allowed_logics(a.argument_type)
        if a.logic not in allowed:
            names = " or ".join(sorted(x.value for x in allowed))
            yield _diag(
                c, "V5", ERROR, a.id,
                f"{a.argument_type.value} argument uses {a.logic.value} logic; allowed: {names}",
            )


def _v6_suitability(c: SafetyCase, _ctx: "_Context") -> Finding:
    for a in c.arguments():
        kids = [c.nodes[k] for k in a.grounded_in]
        if not kids or not all(isinstance(k, EvidenceNode) for k in kids):
            continue
        fams = suitable_families(a.argument_type)
        if not any(k.family in fams for k in kids):
            want = ", ".join(sorted(f.value for f in fams))
            yield _diag(
                c, "V6", WARNING, a.id,
                f"no cited evidence family suits a {a.argument_type.value} argument (expected one of: {want})",
            )


def _months_between(earlier: date, later: date) -> int:
    months = (later.year - earlier.year) * 12 + (later.month - earlier.month)
    if later.day < earlier.day:
        months -= 1
    return months


def _v7_quality(c: SafetyCase, ctx: "_Context") -> Finding:
    for e in c.evidence():
        q = e.quality
        if not q.coverage_note.strip():
            yield _diag(c, "V7", WARNING, e.id, "quality metadata incomplete: coverage note is empty")
        if ctx.as_of is None:
            continue
        if q.recency > ctx.as_of:
            yield _diag(c, "V7", WARNING, e.id, f"recency {q.recency.isoformat()} lies in the future")
        elif _months_between(q.recency, ctx.as_of) > ctx.recency_months:
            yield _diag(
                c, "V7", INFO, e.id,
                f"evidence from {q.recency.isoformat()} is older than {ctx.recency_months} months",
            )


def _descendant_families(c: SafetyCase, node_id: str) -> set[EvidenceFamily]:
    return {c.nodes[d].family for d in c.descendants(node_id) if isinstance(c.nodes[d], EvidenceNode)}


def _v8_envelope(c: SafetyCase, _ctx: "_Context") -> Finding:
    need = {EvidenceFamily.OPERATIONAL_FIELD, EvidenceFamily.EMPIRICAL}
    for cl in c.claims():
        if cl.claim_type is ClaimType.ENVELOPE_CONSTRAINED and not (_descendant_families(c, cl.id) & need):
            yield _diag(
                c, "V8", ERROR, cl.id,
                "envelope-constrained claim lacks operational_field or empirical evidence of envelope monitoring",
            )


def _v9_evolution(c: SafetyCase, _ctx: "_Context") -> Finding:
    if not c.predecessor:
        return
    kinds = {a.argument_type for a in c.arguments()}
    if not kinds & {ArgumentType.COMPARATIVE, ArgumentType.THRESHOLD_BASED}:
        yield _diag(
            c, "V9", WARNING, None,
            "case supersedes a prior version but has no comparative or threshold_based argument against it",
        )


_THRESHOLD_RE = re.compile(
    r"(?:[A-Za-z_Ͱ-Ͽ][\wͰ-Ͽ]*)\s*(?:<=|>=|≤|≥|<|>)\s*[-+]?\d+(?:\.\d+)?%?"
)
_AGGREGATION_RE = re.compile(r"aggregation\s*[:=]\s*(conjunction|weighted_sum|worst_case)")


def declared_thresholds(text: str) -> list[str]:
    """Threshold declarations such as ``risk <= 0.25`` found in free text."""
    return _THRESHOLD_RE.findall(text)


def declared_aggregation(text: str) -> Optional[str]:
    m = _AGGREGATION_RE.search(text)
    return m.group(1) if m else None


def _v10_threshold_declared(c: SafetyCase, _ctx: "_Context") -> Finding:
    for a in c.arguments():
        if a.argument_type is not ArgumentType.THRESHOLD_BASED:
            continue
        linked = any(
            isinstance(c.nodes[k], EvidenceNode)
            and (c.nodes[k].artefact_uri or "").startswith(EVAL_URI_PREFIX)
            for k in a.grounded_in
        )
        if linked:
            continue
        found = declared_thresholds(a.text)
        if not found:
            yield _diag(c, "V10", ERROR, a.id, "threshold-based argument declares no threshold (e.g. 'risk <= 0.25')")
        elif declared_aggregation(a.text) is None:
            yield _diag(
                c, "V10", ERROR, a.id,
                "threshold-based argument does not pre-declare its aggregation "
                "('aggregation: conjunction|weighted_sum|worst_case')",
            )


def _v11_capability(c: SafetyCase, _ctx: "_Context") -> Finding:
    need = {EvidenceFamily.MECHANISTIC, EvidenceFamily.EMPIRICAL}
    for cl in c.claims():
        if cl.claim_type.capability_limited and not (_descendant_families(c, cl.id) & need):
            yield _diag(
                c, "V11", ERROR, cl.id,
                f"{cl.claim_type.value} claim lacks mechanistic or empirical evidence",
            )


@dataclasses.dataclass
class _Context:
    as_of: Optional[date]
    recency_months: int
    reachable: set[str]


RULE_FUNCS: dict[str, Callable[[SafetyCase, _Context], Finding]] = {
    "V1": _v1_acyclic,
    "V2": _v2_rooted,
    "V3": _v3_claim_support,
    "V4": _v4_grounding,
    "V5": _v5_logic,
    "V6": _v6_suitability,
    "V7": _v7_quality,
    "V8": _v8_envelope,
    "V9": _v9_evolution,
    "V10": _v10_threshold_declared,
    "V11": _v11_capability,
}


def validate(
    c: SafetyCase,
    as_of: Optional[date] = None,
    recency_months: int = DEFAULT_RECENCY_MONTHS,
) -> ValidationReport:
    """Run every rule and merge the findings.

    ``as_of`` is the reference date for recency checks; when omitted, recency
    is not judged, which keeps the report independent of the wall clock.
    """
    ctx = _Context(as_of, recency_months, {c.top_claim} | c.descendants(c.top_claim))
    found: list[Diagnostic] = []
    for rule in RULES:
        found.extend(RULE_FUNCS[rule](c, ctx))
    found.sort(key=Diagnostic.sort_key)
    return ValidationReport(case_hash(c), tuple(found))
