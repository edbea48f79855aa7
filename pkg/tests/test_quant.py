import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cascade.quant import (
    ComponentMismatch,
    DegenerateData,
    EmptySpec,
    MissingMetric,
    NonInferioritySpec,
    PairedOutcomes,
    QuantError,
    RiskVector,
    SpiSeries,
    Threshold,
    ThresholdSpec,
    TooLarge,
    WindowTooLarge,
    bootstrap_distribution,
    evaluate_marginal_risk,
    exact_distribution,
    exact_quantile,
    lower_step_index,
    marginal_risk,
    non_inferiority,
    non_inferiority_exact,
    read_paired_csv,
    rolling_means,
    spi_check,
    threshold_aggregate,
)


def brute_distribution(data):
    """Independent oracle: every ordered index sequence, equally likely."""
    n = data.n
    d = data.differences().tolist()
    dist = {}
    for seq in itertools.product(range(n), repeat=n):
        v = Fraction(sum(d[i] for i in seq), n)
        dist[v] = dist.get(v, 0) + Fraction(1, n**n)
    return dist


def sub_fixtures(data, max_n=6):
    """Contiguous windows of the paired fixture with at least one disagreement."""
    out = []
    for n in range(2, max_n + 1):
        for start in range(0, 14, 2):
            sub = PairedOutcomes(data.baseline[start : start + n], data.candidate[start : start + n])
            out.append(sub)
    return out


@pytest.fixture
def paired(fixtures):
    return read_paired_csv((fixtures / "tender-paired.csv").read_text())


# -- marginal risk ----------------------------------------------------------


def test_case_study_marginal_risk():
    mr = marginal_risk(RiskVector({"inconsistency": 0.028}), RiskVector({"inconsistency": 0.030}))
    assert mr["inconsistency"] == -0.002
    assert mr.signed


def test_marginal_risk_zero_and_mismatch():
    v = RiskVector({"a": 0.1, "b": 0.7})
    assert marginal_risk(v, v).to_dict() == {"a": 0.0, "b": 0.0}
    with pytest.raises(ComponentMismatch):
        marginal_risk(v, RiskVector({"a": 0.1}))
    with pytest.raises(QuantError):
        RiskVector({"a": 1.5})


rates = st.floats(min_value=0, max_value=1, allow_nan=False)


@settings(max_examples=200)
@given(st.dictionaries(st.sampled_from("abcde"), st.tuples(rates, rates), min_size=1))
def test_marginal_risk_antisymmetric(comps):
    a = RiskVector({k: x for k, (x, _) in comps.items()})
    b = RiskVector({k: y for k, (_, y) in comps.items()})
    ab, ba = marginal_risk(a, b), marginal_risk(b, a)
    assert all(ab[k] == -ba[k] for k in comps)


def test_marginal_risk_verdict():
    good = evaluate_marginal_risk(RiskVector({"x": 0.028}), RiskVector({"x": 0.030}))
    bad = evaluate_marginal_risk(RiskVector({"x": 0.031}), RiskVector({"x": 0.030}))
    assert good.passed and not bad.passed
    assert good.to_dict()["mr_percentage_points"] == {"x": pytest.approx(-0.2)}


# -- non-inferiority --------------------------------------------------------


def test_paired_fixture_counts(paired):
    assert paired.n == 250
    assert sum(paired.baseline) == 8 and sum(paired.candidate) == 7


def test_lower_step_index():
    assert lower_step_index(0.95, 100) == 94
    assert lower_step_index(0.95, 10000) == 9499
    assert lower_step_index(0.5, 2) == 0
    assert lower_step_index(1.0, 7) == 6


def test_exact_distribution_n2():
    data = PairedOutcomes.from_pairs([(False, True), (True, False)])
    assert exact_distribution(data) == {Fraction(-1): Fraction(1, 4), Fraction(0): Fraction(1, 2), Fraction(1): Fraction(1, 4)}


def test_exact_matches_brute_force(paired):
    for sub in sub_fixtures(paired, max_n=5):
        assert exact_distribution(sub) == brute_distribution(sub)


def test_exact_limit():
    with pytest.raises(TooLarge):
        exact_distribution(PairedOutcomes.from_counts(11, 1, 1))


def test_exact_quantile_step_rule():
    dist = {Fraction(-1): Fraction(1, 4), Fraction(0): Fraction(1, 2), Fraction(1): Fraction(1, 4)}
    assert exact_quantile(dist, 0.75) == 0
    assert exact_quantile(dist, 0.76) == 1
    assert exact_quantile(dist, 0.25) == -1


def test_bootstrap_agrees_with_exact_oracle(paired):
    worst = 0.0
    for sub in sub_fixtures(paired):
        boot = non_inferiority(sub, NonInferioritySpec(delta=0.05, alpha=0.95, resamples=20000, seed=7))
        exact = non_inferiority_exact(sub, delta=0.05, alpha=0.95)
        worst = max(worst, abs(boot.ci_upper - exact.ci_upper))
        assert boot.delta_hat == exact.delta_hat
    assert worst <= 0.02


def test_bootstrap_deterministic_and_chunk_stable(paired):
    a = bootstrap_distribution(paired, 5000, seed=3)
    b = bootstrap_distribution(paired, 5000, seed=3)
    assert np.array_equal(a, b)
    # a longer run extends, never reshuffles, the shorter one
    c = bootstrap_distribution(paired, 9000, seed=3)
    assert np.array_equal(a, c[:5000])
    assert not np.array_equal(a, bootstrap_distribution(paired, 5000, seed=4))


def test_fixture_passes(paired):
    r = non_inferiority(paired, NonInferioritySpec(delta=0.05, alpha=0.95, resamples=20000, seed=42))
    assert r.passed
    assert r.delta_hat == pytest.approx(-0.004)
    assert r.ci_upper < 0.05


def test_delta_monotone(paired):
    base = NonInferioritySpec(delta=0.0, alpha=0.95, resamples=4000, seed=1)
    verdicts = []
    for delta in (0.0, 0.002, 0.005, 0.01, 0.02, 0.03, 0.05):
        r = non_inferiority(paired, NonInferioritySpec(delta, base.alpha, base.resamples, base.seed))
        verdicts.append(r.passed)
    assert verdicts == sorted(verdicts)
    assert verdicts[0] is False and verdicts[-1] is True


def test_degenerate_and_bad_spec():
    with pytest.raises(DegenerateData):
        non_inferiority(PairedOutcomes.from_pairs([(True, False)]), NonInferioritySpec(0.05, seed=1))
    with pytest.raises(QuantError):
        NonInferioritySpec(0.05, alpha=1.5)
    with pytest.raises(QuantError):
        NonInferioritySpec(0.05, resamples=0)


def test_read_paired_csv_errors():
    with pytest.raises(QuantError):
        read_paired_csv("id,a,b\n1,0,1\n")
    with pytest.raises(QuantError):
        read_paired_csv("case_id,baseline_disagreed,candidate_disagreed\nx,0,2\n")
    with pytest.raises(DegenerateData):
        read_paired_csv("case_id,baseline_disagreed,candidate_disagreed\n")


# -- thresholds ---------------------------------------------------------------


def test_threshold_scenario_inclusive():
    spec = ThresholdSpec((Threshold("risk", 0.25),))
    assert threshold_aggregate({"risk": 0.18}, spec).passed
    assert threshold_aggregate({"risk": 0.25}, spec).passed
    assert not threshold_aggregate({"risk": 0.26}, spec).passed


def test_threshold_aggregations():
    ths = (Threshold("a", 0.2), Threshold("b", 0.9, ">="))
    m = {"a": 0.1, "b": 0.85}
    assert not threshold_aggregate(m, ThresholdSpec(ths)).passed
    # margins: a = 0.5, b = -0.0555...
    assert threshold_aggregate(m, ThresholdSpec(ths, "weighted_sum", (0.5, 0.5))).passed
    assert not threshold_aggregate(m, ThresholdSpec(ths, "weighted_sum", (0.05, 0.95))).passed
    wc = threshold_aggregate(m, ThresholdSpec(ths, "worst_case"))
    assert not wc.passed and "at b" in wc.detail


def test_threshold_errors():
    with pytest.raises(EmptySpec):
        ThresholdSpec(())
    with pytest.raises(MissingMetric):
        threshold_aggregate({}, ThresholdSpec((Threshold("a", 1.0),)))
    with pytest.raises(QuantError):
        ThresholdSpec((Threshold("a", 1.0),), "weighted_sum", (0.4,))
    spec = ThresholdSpec.from_dict(
        {"thresholds": [{"name": "a", "bound": 1}, {"name": "b", "bound": 2}], "aggregation": "weighted_sum",
         "weights": {"a": 0.25, "b": 0.75}}
    )
    assert spec.weights == (0.25, 0.75)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.booleans()), min_size=1, max_size=6))
def test_conjunction_is_logical_and(items):
    ths = tuple(Threshold(f"t{i}", b, "<=" if up else ">=") for i, (b, _, up) in enumerate(items))
    metrics = {f"t{i}": x for i, (_, x, _) in enumerate(items)}
    got = threshold_aggregate(metrics, ThresholdSpec(ths)).passed
    want = all((x <= b) if up else (x >= b) for b, x, up in items)
    assert got == want
    assert threshold_aggregate(metrics, ThresholdSpec(ths, "worst_case")).passed == want


# -- SPI --------------------------------------------------------------------

SPI_VALUES = (0.10, 0.12, 0.08, 0.10, 0.30, 0.35, 0.05, 0.10, 0.10, 0.10)


def test_rolling_means_hand_computed():
    got = rolling_means(SPI_VALUES, 3)
    want = [0.10, 0.10, 0.16, 0.25, 0.2333333333, 0.1666666667, 0.0833333333, 0.10]
    assert got == pytest.approx(want)


def test_spi_breach_reports_first_timestamp():
    s = SpiSeries("spi", tuple(range(1, 11)), SPI_VALUES, 0.0, 0.2)
    r = spi_check(s, 3)
    assert not r.passed
    assert r.params["first_breach"] == "6"  # window (4, 5, 6) has mean 0.25
    assert spi_check(SpiSeries("spi", tuple(range(1, 11)), SPI_VALUES, 0.0, 0.3), 3).passed
    assert not spi_check(s, 1).passed


def test_spi_errors():
    with pytest.raises(WindowTooLarge):
        spi_check(SpiSeries("s", (1, 2), (0.1, 0.2), 0, 1), 3)
    with pytest.raises(QuantError):
        SpiSeries("s", (2, 1), (0.1, 0.2), 0, 1)
