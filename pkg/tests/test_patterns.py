import random

import pytest

from cascade import casl
from cascade.model import ArgumentType, ClaimStatus, ClaimType
from cascade.patterns import (
    EmptyParts,
    MissingParam,
    ParamTypeMismatch,
    UnknownPattern,
    compose,
    instantiate,
    list_patterns,
    parse_thresholds,
    read_params,
)
from cascade.validator import ERROR, validate
from casegen import PATTERN_PARAMS

IDS = ["discovery_driven", "marginal_risk", "continuous_evolution", "threshold_comparator"]


def _acyclic(c):
    state = {}

    def visit(n):
        if state.get(n) == 1:
            return False
        if state.get(n) == 2:
            return True
        state[n] = 1
        ok = all(visit(k) for k in c.children(n))
        state[n] = 2
        return ok

    return all(visit(n) for n in c.nodes)


def test_listing_order():
    assert [t.pattern_id for t in list_patterns()] == IDS


@pytest.mark.parametrize("pid", IDS)
def test_skeletons_validate_without_errors(pid):
    c = instantiate(pid, PATTERN_PARAMS[pid])
    r = validate(c)
    assert r.count(ERROR) == 0, r.to_text()
    assert c.nodes[c.top_claim].status is ClaimStatus.DEVELOPED
    assert _acyclic(c)
    assert casl.parse(casl.serialize(c)) == c


def test_marginal_risk_shape():
    c = instantiate("marginal_risk", PATTERN_PARAMS["marginal_risk"])
    top = c.nodes[c.top_claim]
    assert top.claim_type is ClaimType.MARGINAL
    kinds = {c.nodes[a].argument_type for a in top.supported_by}
    assert {ArgumentType.COMPARATIVE, ArgumentType.THRESHOLD_BASED} <= kinds
    assert "delta <= 0.05" in c.nodes["A2"].text


def test_evolution_carries_predecessor():
    c = instantiate("continuous_evolution", PATTERN_PARAMS["continuous_evolution"])
    assert c.predecessor == "ab" * 32
    assert validate(c).by_rule("V9") == []


def test_param_errors():
    with pytest.raises(UnknownPattern):
        instantiate("nope", {})
    params = dict(PATTERN_PARAMS["marginal_risk"])
    del params["delta"]
    with pytest.raises(MissingParam):
        instantiate("marginal_risk", params)
    with pytest.raises(ParamTypeMismatch):
        instantiate("marginal_risk", {**PATTERN_PARAMS["marginal_risk"], "delta": "small"})
    with pytest.raises(ParamTypeMismatch):
        instantiate("continuous_evolution", {**PATTERN_PARAMS["continuous_evolution"], "predecessor": "xyz"})


def test_parse_thresholds():
    assert parse_thresholds("a<=0.1; b >= 0.9") == [("a", "<=", 0.1), ("b", ">=", 0.9)]


def test_read_params():
    assert read_params("# c\nsystem = X\n\ndelta=0.05\n") == {"system": "X", "delta": "0.05"}


def test_compose_two():
    a = instantiate("discovery_driven", PATTERN_PARAMS["discovery_driven"])
    b = instantiate("marginal_risk", PATTERN_PARAMS["marginal_risk"])
    c = compose([a, b], "The overall system is acceptably safe")
    assert len(c.nodes) == len(a.nodes) + len(b.nodes) + 2
    assert c.nodes["A_top"].grounded_in == ("p1_C0", "p2_C0")
    assert c.composed_from == (f"p1={a.case_id}@v1", f"p2={b.case_id}@v1")
    assert validate(c).passed
    with pytest.raises(EmptyParts):
        compose([], "x")


def test_random_compositions():
    rng = random.Random(11)
    skeletons = {pid: instantiate(pid, PATTERN_PARAMS[pid]) for pid in IDS}
    for _ in range(100):
        x, y = rng.choice(IDS), rng.choice(IDS)
        a, b = skeletons[x], skeletons[y]
        c = compose([a, b], "composite claim")
        assert len(c.nodes) == len(a.nodes) + len(b.nodes) + 2
        assert _acyclic(c)
        assert validate(c).count(ERROR) == 0
