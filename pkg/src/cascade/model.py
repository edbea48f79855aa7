"""In-memory CAE safety-case model and the taxonomy relations between its parts.

A case is a rooted DAG alternating claim -> argument -> (claim | evidence).
Values are frozen; link lists are stored as sorted tuples so that two cases
built from the same facts in a different order compare equal.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from datetime import date
from typing import Iterable, Mapping, Optional, Union


class ModelError(ValueError):
    """Structural problem that prevents building a case."""


class DuplicateId(ModelError):
    pass


class DanglingEdge(ModelError):
    pass


class MissingTopClaim(ModelError):
    pass


class OrphanArgument(ModelError):
    """An argument that supports no claim."""


class IllegalEdge(ModelError):
    """An edge that breaks claim -> argument -> (claim | evidence) alternation."""


class ClaimGroup(enum.Enum):
    ASSERTION = "assertion"
    CONSTRAINED = "constrained"
    CAPABILITY_LIMITED = "capability_limited"


class ClaimType(enum.Enum):
    ABSOLUTE = "absolute"
    MARGINAL = "marginal"
    CONSTRAINED = "constrained"
    ENVELOPE_CONSTRAINED = "envelope_constrained"
    CONTROL_ACTUATION_LIMITED = "control_actuation_limited"
    CONTROL_ACCESS_LIMITED = "control_access_limited"
    CONTROL_TOOL_USE_LIMITED = "control_tool_use_limited"
    CONTROL_MODALITY_LIMITED = "control_modality_limited"
    INTRINSIC_KNOWLEDGE_LIMITED = "intrinsic_knowledge_limited"
    INTRINSIC_GOAL_LIMITED = "intrinsic_goal_limited"

    @property
    def group(self) -> ClaimGroup:
        if self in (ClaimType.ABSOLUTE, ClaimType.MARGINAL):
            return ClaimGroup.ASSERTION
        if self in (ClaimType.CONSTRAINED, ClaimType.ENVELOPE_CONSTRAINED):
            return ClaimGroup.CONSTRAINED
        return ClaimGroup.CAPABILITY_LIMITED

    @property
    def capability_limited(self) -> bool:
        return self.group is ClaimGroup.CAPABILITY_LIMITED


class ClaimStatus(enum.Enum):
    DEVELOPED = "developed"
    UNDEVELOPED = "undeveloped"
    ASSUMPTION = "assumption"


class ArgumentType(enum.Enum):
    LAYERED_SAFETY = "layered_safety"
    BARRIER = "barrier"
    COMPARATIVE = "comparative"
    COMPARISON_BASED = "comparison_based"
    THRESHOLD_BASED = "threshold_based"
    GUIDELINE_BASED = "guideline_based"
    DEPENDABILITY = "dependability"
    ROOT_CAUSE = "root_cause"
    CONTROL = "control"
    INTRINSIC = "intrinsic"


class ReasoningLogic(enum.Enum):
    DEDUCTIVE = "deductive"
    INDUCTIVE = "inductive"
    ABDUCTIVE = "abductive"
    STATISTICAL = "statistical"
    ANALOGICAL = "analogical"


class AssuranceFunction(enum.Enum):
    DEMONSTRATIVE = "demonstrative"
    COMPARATIVE = "comparative"
    RISK_BASED = "risk_based"
    CAUSAL_EXPLANATORY = "causal_explanatory"
    CAPABILITY_ORIENTED = "capability_oriented"
    NORMATIVE_CONFORMANCE = "normative_conformance"


class EvidenceFamily(enum.Enum):
    EMPIRICAL = "empirical"
    COMPARATIVE_BENCHMARKING = "comparative_benchmarking"
    MODEL_BASED_RISK = "model_based_risk"
    EXPERT_DERIVED = "expert_derived"
    FORMAL_VERIFICATION = "formal_verification"
    OPERATIONAL_FIELD = "operational_field"
    MECHANISTIC = "mechanistic"


class EnvelopeAction(enum.Enum):
    HALT = "halt"
    DEGRADE = "degrade"
    HUMAN_HANDOFF = "human_handoff"


# ---------------------------------------------------------------------------
# Taxonomy relations

AT = ArgumentType
RL = ReasoningLogic
AF = AssuranceFunction
EF = EvidenceFamily

_FUNCTIONS: dict[ArgumentType, frozenset[AssuranceFunction]] = {
    AT.LAYERED_SAFETY: frozenset({AF.DEMONSTRATIVE}),
    AT.BARRIER: frozenset({AF.DEMONSTRATIVE}),
    AT.COMPARATIVE: frozenset({AF.COMPARATIVE}),
    AT.COMPARISON_BASED: frozenset({AF.COMPARATIVE}),
    AT.THRESHOLD_BASED: frozenset({AF.RISK_BASED}),
    AT.GUIDELINE_BASED: frozenset({AF.RISK_BASED, AF.NORMATIVE_CONFORMANCE}),
    AT.DEPENDABILITY: frozenset({AF.CAUSAL_EXPLANATORY, AF.NORMATIVE_CONFORMANCE}),
    AT.ROOT_CAUSE: frozenset({AF.CAUSAL_EXPLANATORY}),
    AT.CONTROL: frozenset({AF.CAPABILITY_ORIENTED}),
    AT.INTRINSIC: frozenset({AF.CAPABILITY_ORIENTED}),
}

_LOGICS: dict[ArgumentType, frozenset[ReasoningLogic]] = {
    AT.LAYERED_SAFETY: frozenset({RL.DEDUCTIVE}),
    AT.BARRIER: frozenset({RL.DEDUCTIVE}),
    AT.COMPARATIVE: frozenset({RL.INDUCTIVE, RL.STATISTICAL}),
    AT.COMPARISON_BASED: frozenset({RL.ANALOGICAL}),
    AT.THRESHOLD_BASED: frozenset({RL.STATISTICAL}),
    AT.GUIDELINE_BASED: frozenset({RL.DEDUCTIVE}),
    AT.DEPENDABILITY: frozenset({RL.DEDUCTIVE, RL.STATISTICAL}),
    AT.ROOT_CAUSE: frozenset({RL.ABDUCTIVE}),
    AT.CONTROL: frozenset({RL.DEDUCTIVE}),
    AT.INTRINSIC: frozenset({RL.DEDUCTIVE}),
}

_FAMILIES_BY_FUNCTION: dict[AssuranceFunction, frozenset[EvidenceFamily]] = {
    AF.DEMONSTRATIVE: frozenset({EF.FORMAL_VERIFICATION, EF.OPERATIONAL_FIELD, EF.EMPIRICAL}),
    AF.COMPARATIVE: frozenset({EF.COMPARATIVE_BENCHMARKING, EF.EMPIRICAL, EF.EXPERT_DERIVED}),
    AF.RISK_BASED: frozenset({EF.MODEL_BASED_RISK, EF.EMPIRICAL}),
    AF.CAUSAL_EXPLANATORY: frozenset({EF.EMPIRICAL, EF.MECHANISTIC, EF.OPERATIONAL_FIELD}),
    AF.CAPABILITY_ORIENTED: frozenset({EF.MECHANISTIC, EF.EMPIRICAL, EF.FORMAL_VERIFICATION}),
    # governance artefacts and compliance records
    AF.NORMATIVE_CONFORMANCE: frozenset({EF.OPERATIONAL_FIELD}),
}

SUB_KINDS: dict[EvidenceFamily, frozenset[str]] = {
    EF.EMPIRICAL: frozenset({"testing", "user_studies"}),
    EF.EXPERT_DERIVED: frozenset({"expert_assessment", "scenario_based", "forecasting"}),
    EF.OPERATIONAL_FIELD: frozenset({"historical_data", "governance_artefacts"}),
}


def derive_functions(t: ArgumentType) -> frozenset[AssuranceFunction]:
    """Assurance functions an argument type plays; guideline and dependability play two."""
    return _FUNCTIONS[t]


def allowed_logics(t: ArgumentType) -> frozenset[ReasoningLogic]:
    return _LOGICS[t]


def suitable_families(t: ArgumentType) -> frozenset[EvidenceFamily]:
    """Evidence families that typically substantiate an argument of type ``t``.

    The result is the union over every assurance function of ``t``.
    """
    out: set[EvidenceFamily] = set()
    for fn in derive_functions(t):
        out |= _FAMILIES_BY_FUNCTION[fn]
    return frozenset(out)


def legal_sub_kinds(family: EvidenceFamily) -> frozenset[str]:
    return SUB_KINDS.get(family, frozenset())


# ---------------------------------------------------------------------------
# Node and case values


@dataclasses.dataclass(frozen=True)
class Bound:
    metric: str
    lower: float
    upper: float


@dataclasses.dataclass(frozen=True)
class EnvelopeSpec:
    bounds: tuple[Bound, ...]
    action: EnvelopeAction

    def __post_init__(self) -> None:
        if not self.bounds:
            raise ModelError("envelope needs at least one bound")
        for b in self.bounds:
            if not (math.isfinite(b.lower) and math.isfinite(b.upper)):
                raise ModelError(f"envelope bound {b.metric}: bounds must be finite")
            if b.lower > b.upper:
                raise ModelError(f"envelope bound {b.metric}: lower {b.lower} > upper {b.upper}")


@dataclasses.dataclass(frozen=True)
class RootCauseRecord:
    observations: tuple[str, ...]
    hypotheses: tuple[str, ...]
    datasets: tuple[str, ...]
    confirmed_hypothesis: int
    mitigation: str
    mitigation_deployed: bool

    def __post_init__(self) -> None:
        if not self.observations:
            raise ModelError("root cause record needs at least one observation")
        if not 0 <= self.confirmed_hypothesis < len(self.hypotheses):
            raise ModelError(
                f"confirmed hypothesis index {self.confirmed_hypothesis} "
                f"out of range for {len(self.hypotheses)} hypotheses"
            )


@dataclasses.dataclass(frozen=True)
class QualityMeta:
    independence: bool
    coverage_note: str
    recency: date
    reproducible: bool
    representative: bool


@dataclasses.dataclass(frozen=True)
class ClaimNode:
    id: str
    text: str
    claim_type: ClaimType
    supported_by: tuple[str, ...] = ()
    status: ClaimStatus = ClaimStatus.DEVELOPED
    envelope: Optional[EnvelopeSpec] = None

    kind = "claim"

    def __post_init__(self) -> None:
        has_env = self.envelope is not None
        if has_env != (self.claim_type is ClaimType.ENVELOPE_CONSTRAINED):
            raise ModelError(
                f"claim {self.id}: envelope must be present exactly when type is envelope_constrained"
            )


@dataclasses.dataclass(frozen=True)
class ArgumentNode:
    id: str
    text: str
    argument_type: ArgumentType
    logic: ReasoningLogic
    supports: tuple[str, ...] = ()
    grounded_in: tuple[str, ...] = ()
    root_cause: Optional[RootCauseRecord] = None

    kind = "argument"

    @property
    def assurance_functions(self) -> frozenset[AssuranceFunction]:
        return derive_functions(self.argument_type)

    def __post_init__(self) -> None:
        if self.root_cause is not None and self.argument_type is not ArgumentType.ROOT_CAUSE:
            raise ModelError(f"argument {self.id}: root_cause record only allowed on root_cause arguments")


@dataclasses.dataclass(frozen=True)
class EvidenceNode:
    id: str
    text: str
    family: EvidenceFamily
    quality: QualityMeta
    sub_kind: Optional[str] = None
    artefact_uri: Optional[str] = None

    kind = "evidence"

    def __post_init__(self) -> None:
        if self.sub_kind is not None and self.sub_kind not in legal_sub_kinds(self.family):
            raise ModelError(
                f"evidence {self.id}: kind {self.sub_kind!r} not legal for family {self.family.value}"
            )


Node = Union[ClaimNode, ArgumentNode, EvidenceNode]


@dataclasses.dataclass(frozen=True)
class CaseMeta:
    case_id: str
    title: str
    version: int
    top_claim: str
    context: str = ""
    controls: tuple[str, ...] = ()
    predecessor: Optional[str] = None
    composed_from: tuple[str, ...] = ()


@dataclasses.dataclass(frozen=True)
class SafetyCase:
    case_id: str
    title: str
    version: int
    top_claim: str
    nodes: Mapping[str, Node]
    context: str = ""
    controls: tuple[str, ...] = ()
    predecessor: Optional[str] = None
    composed_from: tuple[str, ...] = ()
    # node id -> (start line, end line); diagnostics only, not part of identity
    spans: Mapping[str, tuple[int, int]] = dataclasses.field(
        default_factory=dict, compare=False, repr=False
    )

    @property
    def meta(self) -> CaseMeta:
        return CaseMeta(
            case_id=self.case_id,
            title=self.title,
            version=self.version,
            top_claim=self.top_claim,
            context=self.context,
            controls=self.controls,
            predecessor=self.predecessor,
            composed_from=self.composed_from,
        )

    def claims(self) -> list[ClaimNode]:
        return [n for n in self.nodes.values() if isinstance(n, ClaimNode)]

    def arguments(self) -> list[ArgumentNode]:
        return [n for n in self.nodes.values() if isinstance(n, ArgumentNode)]

    def evidence(self) -> list[EvidenceNode]:
        return [n for n in self.nodes.values() if isinstance(n, EvidenceNode)]

    def children(self, node_id: str) -> tuple[str, ...]:
        node = self.nodes[node_id]
        if isinstance(node, ClaimNode):
            return node.supported_by
        if isinstance(node, ArgumentNode):
            return node.grounded_in
        return ()

    def edges(self) -> list[tuple[str, str]]:
        """All (parent, child) support edges, sorted."""
        return sorted((nid, child) for nid in self.nodes for child in self.children(nid))

    def descendants(self, node_id: str) -> set[str]:
        seen: set[str] = set()
        stack = list(self.children(node_id))
        while stack:
            nid = stack.pop()
            if nid in seen:
                continue
            seen.add(nid)
            stack.extend(self.children(nid))
        return seen

    def decompose(self) -> tuple[CaseMeta, list[Node], list[tuple[str, str]]]:
        return self.meta, [self.nodes[k] for k in sorted(self.nodes)], self.edges()


def build_case(
    meta: CaseMeta,
    nodes: Iterable[Node],
    edges: Iterable[tuple[str, str]] = (),
    spans: Optional[Mapping[str, tuple[int, int]]] = None,
) -> SafetyCase:
    """Assemble a case, merging link lists on nodes with explicit ``(parent, child)`` edges.

    Claim/argument back-links are made symmetric: ``arg.supports`` lists every
    claim whose ``supported_by`` names the argument and vice versa. Taxonomy
    rules are left to the validator.

    Raises:
        DuplicateId: two nodes share an id.
        DanglingEdge: an edge or link names an unknown node.
        IllegalEdge: an edge breaks claim/argument alternation.
        MissingTopClaim: ``meta.top_claim`` is not a claim in ``nodes``.
        OrphanArgument: an argument ends up supporting no claim.
    """
    by_id: dict[str, Node] = {}
    for n in nodes:
        if n.id in by_id:
            raise DuplicateId(f"duplicate node id {n.id!r}")
        by_id[n.id] = n

    top = by_id.get(meta.top_claim)
    if not isinstance(top, ClaimNode):
        raise MissingTopClaim(f"top claim {meta.top_claim!r} is not a claim in this case")

    supported_by: dict[str, set[str]] = {k: set() for k, n in by_id.items() if isinstance(n, ClaimNode)}
    supports: dict[str, set[str]] = {k: set() for k, n in by_id.items() if isinstance(n, ArgumentNode)}
    grounded: dict[str, set[str]] = {k: set() for k in supports}

    def link(parent: str, child: str) -> None:
        for nid in (parent, child):
            if nid not in by_id:
                raise DanglingEdge(f"edge {parent} -> {child} names unknown node {nid!r}")
        p, c = by_id[parent], by_id[child]
        if isinstance(p, ClaimNode) and isinstance(c, ArgumentNode):
            supported_by[parent].add(child)
            supports[child].add(parent)
        elif isinstance(p, ArgumentNode) and isinstance(c, (ClaimNode, EvidenceNode)):
            grounded[parent].add(child)
        else:
            raise IllegalEdge(f"edge {parent} ({p.kind}) -> {child} ({c.kind}) is not allowed")

    for n in by_id.values():
        if isinstance(n, ClaimNode):
            for child in n.supported_by:
                link(n.id, child)
        elif isinstance(n, ArgumentNode):
            for claim in n.supports:
                link(claim, n.id)
            for child in n.grounded_in:
                link(n.id, child)
    for parent, child in edges:
        link(parent, child)

    for k in sorted(supports):
        if not supports[k]:
            raise OrphanArgument(f"argument {k!r} supports no claim")

    final: dict[str, Node] = {}
    for k in sorted(by_id):
        n = by_id[k]
        if isinstance(n, ClaimNode):
            n = dataclasses.replace(n, supported_by=tuple(sorted(supported_by[k])))
        elif isinstance(n, ArgumentNode):
            n = dataclasses.replace(
                n, supports=tuple(sorted(supports[k])), grounded_in=tuple(sorted(grounded[k]))
            )
        final[k] = n

    return SafetyCase(
        case_id=meta.case_id,
        title=meta.title,
        version=meta.version,
        top_claim=meta.top_claim,
        nodes=final,
        context=meta.context,
        controls=tuple(meta.controls),
        predecessor=meta.predecessor,
        composed_from=tuple(meta.composed_from),
        spans=dict(spans or {}),
    )
