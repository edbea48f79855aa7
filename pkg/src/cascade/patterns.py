"""Built-in safety-case patterns and composition of pattern modules.

Each template turns a small parameter set into a skeleton case whose pending
sub-claims are marked ``undeveloped``. Skeletons validate with warnings only.
"""

from __future__ import annotations

import dataclasses
import re
from typing import Callable, Mapping, Sequence

from .model import (
    ArgumentNode,
    ArgumentType,
    CaseMeta,
    ClaimNode,
    ClaimStatus,
    ClaimType,
    Node,
    ReasoningLogic,
    SafetyCase,
    build_case,
)


class PatternError(ValueError):
    pass


class UnknownPattern(PatternError):
    pass


class MissingParam(PatternError):
    pass


class ParamTypeMismatch(PatternError):
    pass


class EmptyParts(PatternError):
    pass


TEXT = "text"
REAL = "real"
THRESHOLDS = "threshold list"
COMPARATOR = "comparator id"
HASH = "hash"

_THRESHOLD_ITEM = re.compile(r"\s*([A-Za-z_][\w.\-]*)\s*(<=|>=)\s*([-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*")
_HEX64 = re.compile(r"[0-9a-f]{64}")
_ID = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*")


def parse_thresholds(text: str) -> list[tuple[str, str, float]]:
    """``"harm<=0.01; autonomy>=0.9"`` -> [("harm", "<=", 0.01), ("autonomy", ">=", 0.9)]."""
    out = []
    for item in filter(None, (s.strip() for s in re.split(r"[;,]", text))):
        m = _THRESHOLD_ITEM.fullmatch(item)
        if not m:
            raise ParamTypeMismatch(f"not a threshold (name<=value or name>=value): {item!r}")
        out.append((m.group(1), m.group(2), float(m.group(3))))
    if not out:
        raise ParamTypeMismatch("threshold list is empty")
    return out


def _coerce(name: str, kind: str, value: object) -> object:
    if kind == REAL:
        if isinstance(value, bool):
            raise ParamTypeMismatch(f"{name}: expected a real number, got {value!r}")
        try:
            return float(value)  # type: ignore[arg-type]
        except (TypeError, ValueError):
            raise ParamTypeMismatch(f"{name}: expected a real number, got {value!r}") from None
    if kind == THRESHOLDS:
        if isinstance(value, str):
            return parse_thresholds(value)
        try:
            return [(str(n), str(op), float(b)) for n, op, b in value]  # type: ignore[union-attr]
        except (TypeError, ValueError):
            raise ParamTypeMismatch(f"{name}: expected a threshold list, got {value!r}") from None
    if not isinstance(value, str) or not value.strip():
        raise ParamTypeMismatch(f"{name}: expected nonempty text, got {value!r}")
    if kind == HASH and not _HEX64.fullmatch(value):
        raise ParamTypeMismatch(f"{name}: expected a 64-digit lowercase hex content hash")
    if kind == COMPARATOR and not value.strip():
        raise ParamTypeMismatch(f"{name}: expected a comparator id")
    return value


@dataclasses.dataclass(frozen=True)
class PatternTemplate:
    pattern_id: str
    title: str
    required_params: tuple[tuple[str, str], ...]
    optional_params: tuple[tuple[str, str], ...]
    build: Callable[[Mapping[str, object]], SafetyCase] = dataclasses.field(repr=False, compare=False)

    def check_params(self, params: Mapping[str, object]) -> dict[str, object]:
        out: dict[str, object] = {}
        for name, kind in self.required_params:
            if name not in params or params[name] in (None, ""):
                raise MissingParam(f"pattern {self.pattern_id} requires parameter {name!r} ({kind})")
            out[name] = _coerce(name, kind, params[name])
        for name, kind in self.optional_params:
            if params.get(name) not in (None, ""):
                out[name] = _coerce(name, kind, params[name])
        return out


def _claim(cid: str, text: str, ctype: ClaimType, pending: bool = True) -> ClaimNode:
    return ClaimNode(cid, text, ctype, status=ClaimStatus.UNDEVELOPED if pending else ClaimStatus.DEVELOPED)


def _arg(aid: str, text: str, atype: ArgumentType, logic: ReasoningLogic, supports: str, grounded: Sequence[str]) -> ArgumentNode:
    return ArgumentNode(aid, text, atype, logic, supports=(supports,), grounded_in=tuple(grounded))


def _fmt(x: float) -> str:
    return repr(float(x))


def _threshold_text(items: Sequence[tuple[str, str, float]]) -> str:
    return "; ".join(f"{n} {op} {_fmt(b)}" for n, op, b in items)


def _slug(text: str) -> str:
    s = re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_").lower()
    return s or "system"


def _case(pattern: str, p: Mapping[str, object], title: str, nodes: list[Node], **meta) -> SafetyCase:
    case_id = str(p.get("case_id") or f"{_slug(str(p['system']))}_{pattern}")
    if not _ID.fullmatch(case_id):
        raise ParamTypeMismatch(f"case_id: not an identifier: {case_id!r}")
    return build_case(CaseMeta(case_id=case_id, title=title, version=int(meta.pop("version", 1)), top_claim="C0", **meta), nodes)


AT, RL, CT = ArgumentType, ReasoningLogic, ClaimType


def _discovery(p: Mapping[str, object]) -> SafetyCase:
    x, ctx, ctl = p["system"], p["context"], p["control"]
    t = _fmt(p["threshold"])  # type: ignore[arg-type]
    nodes: list[Node] = [
        _claim("C0", f"AI system {x} is safe for interaction tasks in context {ctx} under control {ctl}.", CT.CONSTRAINED, pending=False),
        _arg("A1", "Control enforcement: access, isolation and rate limits are each in place.", AT.LAYERED_SAFETY, RL.DEDUCTIVE, "C0", ["C1"]),
        _claim("C1", f"Access, isolation and rate-limit controls {ctl} are enforced.", CT.CONSTRAINED),
        _arg("A2", "Identified risks are explained by mechanism analysis and removed by deployed mitigations.", AT.ROOT_CAUSE, RL.ABDUCTIVE, "C0", ["C2"]),
        _claim("C2", "Each discovered hazard has a confirmed cause and a deployed mitigation.", CT.ABSOLUTE),
        _arg(
            "A3",
            f"Post-mitigation evaluation shows residual risk rate <= {t} within a statistical confidence interval; aggregation: conjunction.",
            AT.THRESHOLD_BASED, RL.STATISTICAL, "C0", ["C3"],
        ),
        _claim("C3", f"Post-mitigation risk rate stays at or below {t}.", CT.CONSTRAINED),
    ]
    return _case("discovery_driven", p, f"Discovery-driven evaluation of {x}", nodes, context=str(ctx), controls=(str(ctl),))


def _marginal(p: Mapping[str, object]) -> SafetyCase:
    x, z = p["system"], p["comparator"]
    task = p.get("task", "the evaluated task")
    delta, alpha = _fmt(p["delta"]), _fmt(p["alpha"])  # type: ignore[arg-type]
    nodes: list[Node] = [
        _claim("C0", f"AI system {x} is at least as safe as comparator {z} for {task} under the evaluated proxy metrics.", CT.MARGINAL, pending=False),
        _arg(
            "A1",
            f"Comparator {z} is aligned in task scope, data and operational context; {x} matches or exceeds it on each metric family.",
            AT.COMPARATIVE, RL.INDUCTIVE, "C0", ["C1", "C2", "C3"],
        ),
        _claim("C1", f"Predictability: {x} is at least as consistent and stable as {z} under prompt and context perturbations.", CT.MARGINAL),
        _claim("C2", f"Capability: {x} stays within accepted capability limits on safety-critical tasks relative to {z}.", CT.MARGINAL),
        _claim("C3", f"Game-based: adversarial and cooperative play shows equal or lower harm frequency for {x} than {z}.", CT.MARGINAL),
        _arg(
            "A2",
            f"The composite marginal-risk index shows non-inferiority: delta <= {delta} at confidence alpha >= {alpha}; aggregation: conjunction.",
            AT.THRESHOLD_BASED, RL.STATISTICAL, "C0", ["C4"],
        ),
        _claim("C4", f"The composite marginal-risk index of {x} relative to {z} lies within margin {delta}.", CT.MARGINAL),
    ]
    basis = p.get("normative_basis")
    if basis:
        nodes += [
            _arg("A3", f"Comparator {z} is an accepted reference: {basis}.", AT.GUIDELINE_BASED, RL.DEDUCTIVE, "C0", ["C5"]),
            _claim("C5", f"Selecting {z} as comparator conforms to {basis}.", CT.CONSTRAINED),
        ]
    return _case("marginal_risk", p, f"Marginal-risk case for {x} against {z}", nodes)


def _evolution(p: Mapping[str, object]) -> SafetyCase:
    x, u = p["system"], p["update"]
    spi = _threshold_text(p["spi_bounds"])  # type: ignore[arg-type]
    ref = p.get("comparator", "the prior version")
    nodes: list[Node] = [
        _claim("C0", f"AI system {x} remains acceptably safe after update {u}.", CT.ABSOLUTE, pending=False),
        _arg("A1", f"Update {u} passed the formal change-control and rollback procedure.", AT.LAYERED_SAFETY, RL.DEDUCTIVE, "C0", ["C1"]),
        _claim("C1", f"Change control and rollback were applied to update {u}.", CT.CONSTRAINED),
        _arg("A2", f"No statistically significant degradation compared with {ref} on safety benchmarks.", AT.COMPARATIVE, RL.INDUCTIVE, "C0", ["C2"]),
        _claim("C2", f"{x} after {u} is at least as safe as {ref}.", CT.MARGINAL),
        _arg("A3", f"Rolling SPI indicators stay within pre-declared bounds: {spi}; aggregation: conjunction.", AT.THRESHOLD_BASED, RL.STATISTICAL, "C0", ["C3"]),
        _claim("C3", f"Safety performance indicators remain within bounds ({spi}).", CT.CONSTRAINED),
    ]
    version = int(float(p.get("version", 2)))  # type: ignore[arg-type]
    return _case(
        "continuous_evolution", p, f"Continuous-evolution case for {x} after {u}", nodes,
        predecessor=str(p["predecessor"]), version=version,
    )


def _threshold(p: Mapping[str, object]) -> SafetyCase:
    x, ctx = p["system"], p["context"]
    items = p["thresholds"]
    agg = str(p.get("aggregation", "conjunction"))
    if agg not in ("conjunction", "weighted_sum", "worst_case"):
        raise ParamTypeMismatch(f"aggregation: unknown function {agg!r}")
    names = ", ".join(n for n, _, _ in items)  # type: ignore[union-attr]
    policy = p.get("policy", "the applicable policy")
    nodes: list[Node] = [
        _claim("C0", f"AI system {x} meets defined safety thresholds {names} for deployment in context {ctx}.", CT.CONSTRAINED, pending=False),
    ]
    metric_claims = []
    for i, (name, op, bound) in enumerate(items, start=1):  # type: ignore[arg-type]
        cid = f"C{i}"
        metric_claims.append(cid)
        nodes.append(_claim(cid, f"Measured {name} satisfies {name} {op} {_fmt(bound)}.", CT.CONSTRAINED))
    k = len(items) + 1  # type: ignore[arg-type]
    nodes += [
        _arg("A1", f"System-level safety decomposes into measurable metrics tied to {names}.", AT.LAYERED_SAFETY, RL.DEDUCTIVE, "C0", metric_claims),
        _arg(
            "A2",
            f"Thresholds {_threshold_text(items)} combined by a pre-declared function; aggregation: {agg}.",  # type: ignore[arg-type]
            AT.THRESHOLD_BASED, RL.STATISTICAL, "C0", [f"C{k}"],
        ),
        _claim(f"C{k}", f"The pre-declared {agg} aggregation over {names} passes with propagated uncertainty.", CT.CONSTRAINED),
        _arg("A3", f"The threshold hierarchy is justified by {policy}.", AT.GUIDELINE_BASED, RL.DEDUCTIVE, "C0", [f"C{k + 1}"]),
        _claim(f"C{k + 1}", f"Threshold choice and prioritisation conform to {policy}.", CT.CONSTRAINED),
    ]
    return _case("threshold_comparator", p, f"Threshold-comparator case for {x}", nodes, context=str(ctx))


_TEMPLATES = (
    PatternTemplate(
        "discovery_driven", "Discovery-driven evaluation",
        (("system", TEXT), ("context", TEXT), ("control", TEXT), ("threshold", REAL)),
        (("case_id", TEXT),),
        _discovery,
    ),
    PatternTemplate(
        "marginal_risk", "Marginal risk without ground truth",
        (("system", TEXT), ("comparator", COMPARATOR), ("delta", REAL), ("alpha", REAL)),
        (("task", TEXT), ("normative_basis", TEXT), ("case_id", TEXT)),
        _marginal,
    ),
    PatternTemplate(
        "continuous_evolution", "Continuous system evolution",
        (("system", TEXT), ("update", TEXT), ("predecessor", HASH), ("spi_bounds", THRESHOLDS)),
        (("comparator", COMPARATOR), ("version", REAL), ("case_id", TEXT)),
        _evolution,
    ),
    PatternTemplate(
        "threshold_comparator", "Threshold-based acceptability decisions",
        (("system", TEXT), ("context", TEXT), ("thresholds", THRESHOLDS)),
        (("aggregation", TEXT), ("policy", TEXT), ("case_id", TEXT)),
        _threshold,
    ),
)


def list_patterns() -> list[PatternTemplate]:
    return list(_TEMPLATES)


def get_pattern(pattern_id: str) -> PatternTemplate:
    for t in _TEMPLATES:
        if t.pattern_id == pattern_id:
            return t
    raise UnknownPattern(f"unknown pattern {pattern_id!r}; choose from {', '.join(t.pattern_id for t in _TEMPLATES)}")


def instantiate(pattern_id: str, params: Mapping[str, object]) -> SafetyCase:
    template = get_pattern(pattern_id)
    return template.build(template.check_params(params))


def read_params(text: str) -> dict[str, str]:
    """Flat ``key=value`` lines; ``#`` starts a comment line."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise PatternError(f"params line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def compose(parts: Sequence[SafetyCase], top_text: str, case_id: str = "composite", title: str = "") -> SafetyCase:
    """Nest each part's top claim under a new absolute top claim.

    Node ids of part ``i`` (1-based, caller order) are prefixed ``p{i}_``.
    """
    if not parts:
        raise EmptyParts("compose needs at least one part")
    nodes: list[Node] = []
    former_tops = []
    controls: list[str] = []
    for i, part in enumerate(parts, start=1):
        pre = f"p{i}_"
        former_tops.append(pre + part.top_claim)
        for c in part.controls:
            if c not in controls:
                controls.append(c)
        for node in part.nodes.values():
            if isinstance(node, ClaimNode):
                node = dataclasses.replace(node, id=pre + node.id, supported_by=tuple(pre + k for k in node.supported_by))
            elif isinstance(node, ArgumentNode):
                node = dataclasses.replace(
                    node, id=pre + node.id,
                    supports=tuple(pre + k for k in node.supports),
                    grounded_in=tuple(pre + k for k in node.grounded_in),
                )
            else:
                node = dataclasses.replace(node, id=pre + node.id)
            nodes.append(node)
    nodes.append(ClaimNode("C_top", top_text, ClaimType.ABSOLUTE))
    nodes.append(
        ArgumentNode(
            "A_top",
            "Each pattern module independently supports the overall claim.",
            ArgumentType.LAYERED_SAFETY,
            ReasoningLogic.DEDUCTIVE,
            supports=("C_top",),
            grounded_in=tuple(former_tops),
        )
    )
    sources = tuple(f"p{i}={p.case_id}@v{p.version}" for i, p in enumerate(parts, start=1))
    contexts = [p.context for p in parts if p.context]
    meta = CaseMeta(
        case_id=case_id,
        title=title or top_text,
        version=1,
        top_claim="C_top",
        context="; ".join(dict.fromkeys(contexts)),
        controls=tuple(controls),
        composed_from=sources,
    )
    return build_case(meta, nodes)
