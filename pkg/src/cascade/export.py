"""Graph and JSON renderings of a safety case."""

from __future__ import annotations

import json

from .model import ArgumentNode, ClaimNode, EvidenceNode, SafetyCase

_SHAPES = {
    "claim": 'shape=box',
    "argument": 'shape=box, style=rounded',
    "evidence": 'shape=ellipse',
}


def _dot_str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _label(node, width: int = 48) -> str:
    if isinstance(node, ClaimNode):
        head = f"{node.id} [{node.claim_type.value}]"
    elif isinstance(node, ArgumentNode):
        head = f"{node.id} [{node.argument_type.value} / {node.logic.value}]"
    else:
        head = f"{node.id} [{node.family.value}]"
    text = node.text if len(node.text) <= width else node.text[: width - 3] + "..."
    return f"{head}\n{text}"


def to_dot(c: SafetyCase) -> str:
    """DOT digraph; arrows run from supporter to supported (evidence -> argument -> claim)."""
    lines = [f"digraph {_dot_str(c.case_id)} {{", "  rankdir=BT;", f"  label={_dot_str(c.title)};"]
    for nid in sorted(c.nodes):
        node = c.nodes[nid]
        extra = ", penwidth=2" if nid == c.top_claim else ""
        undeveloped = isinstance(node, ClaimNode) and node.status.value != "developed"
        if undeveloped:
            extra += ", style=dashed"
        lines.append(
            f"  {_dot_str(nid)} [{_SHAPES[node.kind]}{extra}, class={node.kind}, label={_dot_str(_label(node))}];"
        )
    for parent, child in c.edges():
        lines.append(f"  {_dot_str(child)} -> {_dot_str(parent)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _node_dict(node) -> dict:
    d: dict = {"id": node.id, "kind": node.kind, "text": node.text}
    if isinstance(node, ClaimNode):
        d.update(
            claim_type=node.claim_type.value,
            status=node.status.value,
            supported_by=list(node.supported_by),
        )
        if node.envelope is not None:
            d["envelope"] = {
                "bounds": [{"metric": b.metric, "lower": b.lower, "upper": b.upper} for b in node.envelope.bounds],
                "action": node.envelope.action.value,
            }
    elif isinstance(node, ArgumentNode):
        d.update(
            argument_type=node.argument_type.value,
            logic=node.logic.value,
            assurance_functions=sorted(f.value for f in node.assurance_functions),
            supports=list(node.supports),
            grounded_in=list(node.grounded_in),
        )
        rc = node.root_cause
        if rc is not None:
            d["root_cause"] = {
                "observations": list(rc.observations),
                "hypotheses": list(rc.hypotheses),
                "datasets": list(rc.datasets),
                "confirmed_hypothesis": rc.confirmed_hypothesis,
                "mitigation": rc.mitigation,
                "mitigation_deployed": rc.mitigation_deployed,
            }
    elif isinstance(node, EvidenceNode):
        q = node.quality
        d.update(
            family=node.family.value,
            sub_kind=node.sub_kind,
            artefact_uri=node.artefact_uri,
            quality={
                "independence": q.independence,
                "coverage_note": q.coverage_note,
                "recency": q.recency.isoformat(),
                "reproducible": q.reproducible,
                "representative": q.representative,
            },
        )
    return d


def to_json_dict(c: SafetyCase) -> dict:
    return {
        "case_id": c.case_id,
        "title": c.title,
        "version": c.version,
        "top_claim": c.top_claim,
        "context": c.context,
        "controls": list(c.controls),
        "predecessor": c.predecessor,
        "composed_from": list(c.composed_from),
        "nodes": [_node_dict(c.nodes[k]) for k in sorted(c.nodes)],
        "edges": [{"from": p, "to": ch} for p, ch in c.edges()],
    }


def to_json(c: SafetyCase) -> str:
    return json.dumps(to_json_dict(c), indent=2, ensure_ascii=False) + "\n"
