"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

import dataclasses
import json
import random
import sys
import tempfile
import time
from datetime import date
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cascade import casl, export, quant  # noqa: E402
from cascade.model import (  # noqa: E402
    ArgumentNode,
    ArgumentType,
    CaseMeta,
    ClaimNode,
    ClaimType,
    EvidenceFamily,
    EvidenceNode,
    QualityMeta,
    ReasoningLogic,
    build_case,
)
from cascade.patterns import compose, instantiate, list_patterns  # noqa: E402
from cascade.registry import CorruptObject, Registry  # noqa: E402
from cascade.validator import ERROR, validate  # noqa: E402
from casegen import PATTERN_PARAMS, random_case  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


def _report(number, title, ok, elapsed, budget, detail=""):
    passed = ok and elapsed < budget
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} ({elapsed:.3f}s / {budget}s) {detail}".rstrip()
    return passed, line


def criterion_1():
    t = time.perf_counter()
    mr = quant.marginal_risk(quant.RiskVector({"inconsistency": 0.028}), quant.RiskVector({"inconsistency": 0.030}))
    ok = mr["inconsistency"] == -0.002
    return _report(1, "case-study marginal risk", ok, time.perf_counter() - t, 1, f"MR={mr['inconsistency']!r}")


def criterion_2():
    t = time.perf_counter()
    spec = quant.ThresholdSpec((quant.Threshold("risk", 0.25, "<="),))
    a = quant.threshold_aggregate({"risk": 0.18}, spec).verdict
    b = quant.threshold_aggregate({"risk": 0.26}, spec).verdict
    ok = (a, b) == ("pass", "fail")
    return _report(2, "threshold scenario", ok, time.perf_counter() - t, 1, f"0.18->{a}, 0.26->{b}")


def criterion_3():
    data = quant.read_paired_csv((FIXTURES / "tender-paired.csv").read_text())
    counts_ok = (sum(data.baseline), sum(data.candidate), data.n) == (8, 7, 250)
    t = time.perf_counter()
    full = quant.non_inferiority(data, quant.NonInferioritySpec(0.05, 0.95, 100_000, seed=42))
    elapsed = time.perf_counter() - t
    worst = 0.0
    subs = 0
    for n in range(2, 7):
        for start in range(0, 14, 2):
            sub = quant.PairedOutcomes(data.baseline[start : start + n], data.candidate[start : start + n])
            boot = quant.non_inferiority(sub, quant.NonInferioritySpec(0.05, 0.95, 100_000, seed=42))
            exact = quant.non_inferiority_exact(sub, 0.05, 0.95)
            worst = max(worst, abs(boot.ci_upper - exact.ci_upper))
            subs += 1
    ok = counts_ok and full.passed and worst <= 0.02
    detail = f"ci_upper={full.ci_upper!r}, worst oracle gap {worst:.4f} over {subs} sub-fixtures"
    return _report(3, "non-inferiority verdict and oracle agreement", ok, elapsed, 10, detail)


def criterion_4():
    t = time.perf_counter()
    q = QualityMeta(True, "c", date(2025, 1, 1), True, True)
    accepted = rejected = 0
    for at in ArgumentType:
        for lg in ReasoningLogic:
            c = build_case(
                CaseMeta("t", "t", 1, "C1"),
                [
                    ClaimNode("C1", "c", ClaimType.ABSOLUTE),
                    ArgumentNode("A1", "x <= 1; aggregation: conjunction", at, lg),
                    EvidenceNode("E1", "e", EvidenceFamily.EMPIRICAL, q),
                ],
                [("C1", "A1"), ("A1", "E1")],
            )
            if validate(c).by_rule("V5"):
                rejected += 1
            else:
                accepted += 1
    ok = (accepted, rejected) == (12, 38)
    return _report(4, "alignment table exhaustiveness", ok, time.perf_counter() - t, 1, f"{accepted} accepted, {rejected} rejected")


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


def criterion_5():
    t = time.perf_counter()
    skeletons = {}
    ok = True
    for tpl in list_patterns():
        c = instantiate(tpl.pattern_id, PATTERN_PARAMS[tpl.pattern_id])
        skeletons[tpl.pattern_id] = c
        ok &= validate(casl.parse(casl.serialize(c))).count(ERROR) == 0
    rng = random.Random(5)
    ids = sorted(skeletons)
    for _ in range(100):
        a, b = skeletons[rng.choice(ids)], skeletons[rng.choice(ids)]
        comp = compose([a, b], "composite")
        ok &= len(comp.nodes) == len(a.nodes) + len(b.nodes) + 2 and _acyclic(comp)
    return _report(5, "pattern soundness", ok, time.perf_counter() - t, 60, f"{len(skeletons)} skeletons, 100 compositions")


def criterion_6():
    t = time.perf_counter()
    bad = 0
    for seed in range(1000):
        c = random_case(random.Random(seed))
        text = casl.serialize(c)
        back = casl.parse(text)
        if back != c or casl.serialize(back) != text:
            bad += 1
    return _report(6, "round-trip of 1000 random cases", bad == 0, time.perf_counter() - t, 30, f"{bad} mismatches")


def criterion_7():
    t = time.perf_counter()
    c = casl.parse((FIXTURES / "tender-eval.casl").read_text())
    with tempfile.TemporaryDirectory() as root:
        reg = Registry(root)
        h = reg.put(c, validate(c))
        ok = reg.put(c, validate(c)) == h and len(reg.records()) == 1
        got, _ = reg.get(h)
        ok &= got == c
        nodes = dict(c.nodes)
        nodes.pop("E3")
        nodes["A1"] = dataclasses.replace(nodes["A1"], grounded_in=("E1",))
        smaller = dataclasses.replace(c, nodes=nodes)
        h2 = reg.put(smaller, validate(smaller))
        ab, ba = reg.diff(h, h2), reg.diff(h2, h)
        ok &= ab.added == ba.removed and ab.removed == ba.added and ab.removed == ("E3",)
        path = Path(root) / "objects" / h[:2] / f"{h}.casl"
        raw = bytearray(path.read_bytes())
        raw[len(raw) // 2] ^= 0x20
        path.write_bytes(bytes(raw))
        try:
            reg.get(h)
            ok = False
        except CorruptObject:
            pass
    return _report(7, "registry integrity", ok, time.perf_counter() - t, 5)


def criterion_8():
    t = time.perf_counter()
    c = casl.parse((FIXTURES / "tender-eval.casl").read_text())
    report = validate(c)
    ok = report.passed and not report.diagnostics
    mr = quant.evaluate_marginal_risk(
        quant.RiskVector({"inconsistency": 0.028}), quant.RiskVector({"inconsistency": 0.030})
    )
    pp = mr.to_dict()["mr_percentage_points"]["inconsistency"]
    ok &= abs(pp - (-0.2)) < 1e-12
    spec = quant.ThresholdSpec.from_dict(json.loads((FIXTURES / "tender-eval.thresholds.json").read_text()))
    th = quant.threshold_aggregate({f"mr.{k}": v for k, v in mr.mr.to_dict().items()}, spec)
    ok &= th.passed
    with tempfile.TemporaryDirectory() as root:
        h = Registry(root).put(c, report)
        ok &= Registry(root).get(h)[0] == c
    dot = export.to_dot(c)
    marginal = sum(1 for ln in dot.splitlines() if "class=claim" in ln and "[marginal]" in ln)
    args = dot.count("class=argument")
    ok &= marginal == 1 and args == 2
    detail = f"MR={pp!r} pp, threshold {th.verdict}, DOT: {marginal} marginal claim, {args} arguments"
    return _report(8, "end-to-end golden pipeline", ok, time.perf_counter() - t, 5, detail)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 9)])
def test_acceptance(criterion, capsys):
    passed, line = criterion()
    with capsys.disabled():
        print("\n" + line)
    assert passed, line


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
