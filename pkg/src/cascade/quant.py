"""Numeric checks behind comparative and threshold-based arguments.

Marginal risk is computed in decimal arithmetic on the shortest repr of each
rate, so ``0.028 - 0.030`` comes out as exactly ``-0.002``.

The bootstrap resamples whole evaluation cases. Resamples are generated in
fixed-size chunks, each from its own counter-based Philox stream keyed by
``(seed, chunk index)``, so chunks can be computed in any order and the result
is bit-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from decimal import Decimal
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

STANDARD_COMPONENTS = (
    "performance",
    "reliability",
    "safety",
    "security",
    "fairness",
    "privacy",
    "compliance",
    "cost",
    "resilience",
)

DEFAULT_RESAMPLES = 10_000
CHUNK = 4096
EXACT_LIMIT = 10


class QuantError(ValueError):
    pass


class ComponentMismatch(QuantError):
    pass


class DegenerateData(QuantError):
    pass


class TooLarge(QuantError):
    pass


class MissingMetric(QuantError):
    pass


class EmptySpec(QuantError):
    pass


class WindowTooLarge(QuantError):
    pass


@dataclasses.dataclass(frozen=True)
class RiskVector:
    components: Mapping[str, float]
    signed: bool = False
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self) -> None:
        if self.signed:
            return
        for name, v in self.components.items():
            if not self.lower <= v <= self.upper:
                raise QuantError(f"component {name}={v} outside [{self.lower}, {self.upper}]")

    def __getitem__(self, name: str) -> float:
        return self.components[name]

    def names(self) -> list[str]:
        return sorted(self.components)

    def __neg__(self) -> "RiskVector":
        return RiskVector({k: -v for k, v in self.components.items()}, signed=True)

    def to_dict(self) -> dict[str, float]:
        return {k: self.components[k] for k in self.names()}


@dataclasses.dataclass(frozen=True)
class PairedOutcomes:
    baseline: tuple[bool, ...]
    candidate: tuple[bool, ...]
    case_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.baseline) != len(self.candidate):
            raise QuantError("baseline and candidate outcome lists differ in length")
        if not self.baseline:
            raise DegenerateData("paired outcomes need at least one case")

    @property
    def n(self) -> int:
        return len(self.baseline)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[bool, bool]]) -> "PairedOutcomes":
        pairs = list(pairs)
        return cls(tuple(bool(b) for b, _ in pairs), tuple(bool(c) for _, c in pairs))

    @classmethod
    def from_counts(cls, n: int, baseline: int, candidate: int, both: int = 0) -> "PairedOutcomes":
        """Build ``n`` cases with the given disagreement counts; ``both`` cases disagree in both arms."""
        if not (0 <= both <= min(baseline, candidate) and baseline + candidate - both <= n):
            raise QuantError("inconsistent counts")
        pairs = [(True, True)] * both
        pairs += [(True, False)] * (baseline - both)
        pairs += [(False, True)] * (candidate - both)
        pairs += [(False, False)] * (n - len(pairs))
        return cls.from_pairs(pairs)

    def differences(self) -> np.ndarray:
        """Per-case candidate minus baseline, in {-1, 0, 1}."""
        return np.asarray(self.candidate, dtype=np.int64) - np.asarray(self.baseline, dtype=np.int64)


@dataclasses.dataclass(frozen=True)
class NonInferioritySpec:
    delta: float
    alpha: float = 0.95
    resamples: int = DEFAULT_RESAMPLES
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.delta >= 0:
            raise QuantError(f"margin delta must be >= 0, got {self.delta}")
        if not 0 < self.alpha < 1:
            raise QuantError(f"confidence alpha must lie in (0, 1), got {self.alpha}")
        if self.resamples < 1:
            raise QuantError("resamples must be positive")
        if not 0 <= self.seed < 2**64:
            raise QuantError("seed must be a 64-bit unsigned integer")


@dataclasses.dataclass(frozen=True)
class EvalResult:
    kind: str
    verdict: str
    detail: str = ""
    mr: Optional[RiskVector] = None
    delta_hat: Optional[float] = None
    ci_upper: Optional[float] = None
    params: Mapping[str, object] = dataclasses.field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind, "verdict": self.verdict}
        if self.mr is not None:
            d["mr"] = self.mr.to_dict()
            d["mr_percentage_points"] = {
                k: float(Decimal(repr(v)) * 100) for k, v in self.mr.to_dict().items()
            }
        if self.delta_hat is not None:
            d["delta_hat"] = self.delta_hat
        if self.ci_upper is not None:
            d["ci_upper"] = self.ci_upper
        if self.params:
            d["params"] = dict(self.params)
        d["detail"] = self.detail
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# marginal risk


def _dec(x: float) -> Decimal:
    return Decimal(repr(float(x)))


def marginal_risk(candidate: RiskVector, baseline: RiskVector) -> RiskVector:
    """Componentwise ``candidate - baseline``; negative means the candidate is less risky."""
    if set(candidate.components) != set(baseline.components):
        missing = set(candidate.components) ^ set(baseline.components)
        raise ComponentMismatch(f"component sets differ: {sorted(missing)}")
    return RiskVector(
        {k: float(_dec(candidate[k]) - _dec(baseline[k])) for k in candidate.names()},
        signed=True,
    )


def evaluate_marginal_risk(candidate: RiskVector, baseline: RiskVector) -> EvalResult:
    """Marginal risk with a no-worse-than verdict: pass when no component increases."""
    mr = marginal_risk(candidate, baseline)
    worse = [k for k in mr.names() if mr[k] > 0]
    parts = [f"{k}: {candidate[k]!r} - {baseline[k]!r} = {mr[k]!r}" for k in mr.names()]
    if worse:
        parts.append("worse on: " + ", ".join(worse))
    return EvalResult("marginal_risk", "fail" if worse else "pass", "; ".join(parts), mr=mr)


# ---------------------------------------------------------------------------
# non-inferiority


def lower_step_index(alpha: float, count: int) -> int:
    """0-based index of the alpha-quantile among ``count`` equally weighted sorted samples.

    Smallest k with (k + 1) / count >= alpha, evaluated exactly.
    """
    k = math.ceil(Fraction(alpha) * count) - 1
    return min(max(k, 0), count - 1)


def bootstrap_distribution(data: PairedOutcomes, resamples: int, seed: int) -> np.ndarray:
    """Resampled mean differences, one per bootstrap draw of ``n`` case indices."""
    d = data.differences()
    n = data.n
    out = np.empty(resamples, dtype=np.float64)
    for chunk, start in enumerate(range(0, resamples, CHUNK)):
        size = min(CHUNK, resamples - start)
        rng = np.random.Generator(np.random.Philox(key=seed + (chunk << 64)))
        idx = rng.integers(0, n, size=(size, n))
        out[start : start + size] = d[idx].sum(axis=1) / n
    return out


def _verdict(delta_hat: float, ci_upper: float, delta: float, alpha: float, how: str, **params) -> EvalResult:
    ok = ci_upper <= delta
    detail = (
        f"delta_hat={delta_hat!r}, {alpha!r}-upper bound={ci_upper!r} "
        f"{'<=' if ok else '>'} margin {delta!r} ({how})"
    )
    return EvalResult(
        "non_inferiority",
        "pass" if ok else "fail",
        detail,
        delta_hat=delta_hat,
        ci_upper=ci_upper,
        params={"delta": delta, "alpha": alpha, **params},
    )


def non_inferiority(data: PairedOutcomes, spec: NonInferioritySpec) -> EvalResult:
    """One-sided percentile-bootstrap non-inferiority check of candidate vs baseline rates."""
    if data.n < 2:
        raise DegenerateData(f"need at least 2 cases, got {data.n}")
    delta_hat = float(data.differences().sum() / data.n)
    dist = bootstrap_distribution(data, spec.resamples, spec.seed)
    dist.sort()
    ci_upper = float(dist[lower_step_index(spec.alpha, spec.resamples)])
    return _verdict(
        delta_hat, ci_upper, spec.delta, spec.alpha,
        f"percentile bootstrap, {spec.resamples} resamples, seed {spec.seed}",
        n=data.n, resamples=spec.resamples, seed=spec.seed,
    )


def exact_distribution(data: PairedOutcomes) -> dict[Fraction, Fraction]:
    """Exact bootstrap distribution of the mean difference.

    Enumerates every multiset of ``n`` case indices with its multinomial
    probability ``n! / (prod c_i!) / n**n``.
    """
    n = data.n
    if n > EXACT_LIMIT:
        raise TooLarge(f"exact enumeration limited to n <= {EXACT_LIMIT}, got {n}")
    d = [int(x) for x in data.differences()]
    total = Fraction(1, n**n)
    fact = [math.factorial(i) for i in range(n + 1)]
    dist: dict[Fraction, Fraction] = {}
    for combo in combinations_with_replacement(range(n), n):
        counts: dict[int, int] = {}
        for i in combo:
            counts[i] = counts.get(i, 0) + 1
        ways = fact[n]
        for c in counts.values():
            ways //= fact[c]
        value = Fraction(sum(d[i] for i in combo), n)
        dist[value] = dist.get(value, Fraction(0)) + ways * total
    return dist


def exact_quantile(dist: Mapping[Fraction, Fraction], alpha: float) -> Fraction:
    target = Fraction(alpha)
    acc = Fraction(0)
    for v in sorted(dist):
        acc += dist[v]
        if acc >= target:
            return v
    return max(dist)


def non_inferiority_exact(data: PairedOutcomes, delta: float, alpha: float) -> EvalResult:
    dist = exact_distribution(data)
    ci_upper = float(exact_quantile(dist, alpha))
    delta_hat = float(Fraction(int(data.differences().sum()), data.n))
    return _verdict(delta_hat, ci_upper, delta, alpha, "exact enumeration", n=data.n)


def read_paired_csv(text: str) -> PairedOutcomes:
    """Parse ``case_id,baseline_disagreed,candidate_disagreed`` rows with 0/1 flags."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["case_id", "baseline_disagreed", "candidate_disagreed"]:
        raise QuantError("CSV header must be case_id,baseline_disagreed,candidate_disagreed")
    ids, base, cand = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise QuantError(f"CSV line {lineno}: expected 3 fields, got {len(row)}")
        flags = [cell.strip() for cell in row[1:]]
        if any(f not in ("0", "1") for f in flags):
            raise QuantError(f"CSV line {lineno}: flags must be 0 or 1")
        ids.append(row[0].strip())
        base.append(flags[0] == "1")
        cand.append(flags[1] == "1")
    if not ids:
        raise DegenerateData("CSV has no data rows")
    return PairedOutcomes(tuple(base), tuple(cand), tuple(ids))


# ---------------------------------------------------------------------------
# thresholds


@dataclasses.dataclass(frozen=True)
class Threshold:
    name: str
    bound: float
    direction: str = "<="

    def __post_init__(self) -> None:
        if self.direction not in ("<=", ">="):
            raise QuantError(f"threshold direction must be '<=' or '>=', got {self.direction!r}")

    def satisfied(self, value: float) -> bool:
        return value <= self.bound if self.direction == "<=" else value >= self.bound

    def margin(self, value: float) -> float:
        """Signed slack relative to the bound; >= 0 means satisfied."""
        raw = self.bound - value if self.direction == "<=" else value - self.bound
        scale = abs(self.bound)
        return raw / scale if scale > 0 else raw


AGGREGATIONS = ("conjunction", "weighted_sum", "worst_case")


@dataclasses.dataclass(frozen=True)
class ThresholdSpec:
    thresholds: tuple[Threshold, ...]
    aggregation: str = "conjunction"
    weights: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if not self.thresholds:
            raise EmptySpec("threshold spec has no thresholds")
        if self.aggregation not in AGGREGATIONS:
            raise QuantError(f"unknown aggregation {self.aggregation!r}")
        if self.aggregation == "weighted_sum":
            if self.weights is None or len(self.weights) != len(self.thresholds):
                raise QuantError("weighted_sum needs one weight per threshold")
        if self.weights is not None:
            if any(w < 0 for w in self.weights):
                raise QuantError("weights must be nonnegative")
            if not math.isclose(math.fsum(self.weights), 1.0, abs_tol=1e-9):
                raise QuantError(f"weights must sum to 1, got {math.fsum(self.weights)}")

    @classmethod
    def from_dict(cls, d: Mapping) -> "ThresholdSpec":
        items = d.get("thresholds") or []
        ths = tuple(Threshold(t["name"], float(t["bound"]), t.get("direction", "<=")) for t in items)
        weights = None
        if "weights" in d and d["weights"] is not None:
            w = d["weights"]
            weights = tuple(float(w[t.name]) for t in ths) if isinstance(w, Mapping) else tuple(map(float, w))
        return cls(ths, d.get("aggregation", "conjunction"), weights)


def threshold_aggregate(metrics: Mapping[str, float], spec: ThresholdSpec) -> EvalResult:
    missing = [t.name for t in spec.thresholds if t.name not in metrics]
    if missing:
        raise MissingMetric(f"no metric value for: {', '.join(missing)}")
    verdicts = [(t, metrics[t.name], t.satisfied(metrics[t.name])) for t in spec.thresholds]
    if spec.aggregation == "conjunction":
        ok = all(v for _, _, v in verdicts)
        summary = "all thresholds hold" if ok else "violated: " + ", ".join(t.name for t, _, v in verdicts if not v)
    elif spec.aggregation == "weighted_sum":
        score = math.fsum(w * t.margin(x) for w, (t, x, _) in zip(spec.weights, verdicts))
        ok = score >= 0
        summary = f"weighted margin {score!r}"
    else:
        worst = min(verdicts, key=lambda r: r[0].margin(r[1]))
        ok = worst[0].margin(worst[1]) >= 0
        summary = f"worst margin {worst[0].margin(worst[1])!r} at {worst[0].name}"
    lines = [
        f"{t.name}={x!r} {t.direction} {t.bound!r}: {'pass' if v else 'fail'}" for t, x, v in verdicts
    ]
    return EvalResult(
        "threshold",
        "pass" if ok else "fail",
        f"{spec.aggregation}: {summary}; " + "; ".join(lines),
        params={"aggregation": spec.aggregation},
    )


# ---------------------------------------------------------------------------
# safety performance indicators


@dataclasses.dataclass(frozen=True)
class SpiSeries:
    name: str
    timestamps: tuple
    values: tuple[float, ...]
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if len(self.timestamps) != len(self.values):
            raise QuantError("timestamps and values differ in length")
        if any(b <= a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise QuantError("SPI timestamps must be strictly increasing")
        if self.lower > self.upper:
            raise QuantError("SPI lower bound exceeds upper bound")


def rolling_means(values: Sequence[float], window: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    return np.lib.stride_tricks.sliding_window_view(v, window).mean(axis=1)


def spi_check(series: SpiSeries, window: int) -> EvalResult:
    """Trailing rolling mean must stay within [lower, upper] at every full window."""
    if window < 1:
        raise QuantError("window must be positive")
    if window > len(series.values):
        raise WindowTooLarge(f"window {window} exceeds series length {len(series.values)}")
    means = rolling_means(series.values, window)
    inside = (means >= series.lower) & (means <= series.upper)
    params = {"window": window, "lower": series.lower, "upper": series.upper}
    if inside.all():
        return EvalResult(
            "spi", "pass",
            f"{series.name}: {len(means)} rolling mean(s) within [{series.lower!r}, {series.upper!r}]",
            params=params,
        )
    first = int(np.argmin(inside))
    ts = series.timestamps[first + window - 1]
    return EvalResult(
        "spi", "fail",
        f"{series.name}: rolling mean {float(means[first])!r} outside [{series.lower!r}, {series.upper!r}] "
        f"first at {ts}",
        params={**params, "first_breach": str(ts)},
    )
