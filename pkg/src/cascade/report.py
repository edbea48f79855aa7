"""Report directories: JSON + tab-delimited tables + PNG figures.

Figures are drawn with the Agg backend so the CLI works headless.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .quant import EvalResult, SpiSeries, rolling_means  # noqa: E402
from .validator import ValidationReport  # noqa: E402

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
SEVERITY_COLORS = {"error": "#c0392b", "warning": "#e67e22", "info": "#2980b9"}


def new_figure(width: float = 6.4, height: Optional[float] = None):
    fig, ax = plt.subplots(figsize=(width, height or width * GOLDEN))
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    return fig, ax


def save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _write_tsv(path: Path, header: Sequence[str], rows: Sequence[Sequence[object]]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def plot_diagnostics(report: ValidationReport, path: Path) -> Path:
    rules = [f"V{i}" for i in range(1, 12)]
    counts = Counter((d.rule.rstrip("b"), d.severity) for d in report.diagnostics)
    fig, ax = new_figure()
    x = np.arange(len(rules))
    bottom = np.zeros(len(rules))
    for sev, color in SEVERITY_COLORS.items():
        h = np.array([counts.get((r, sev), 0) for r in rules], dtype=float)
        ax.bar(x, h, bottom=bottom, color=color, label=sev)
        bottom += h
    ax.set_xticks(x, rules)
    ax.set_ylabel("findings")
    ax.set_title("PASSED" if report.passed else "FAILED")
    ax.legend(frameon=False)
    return save(fig, path)


def write_validation_report(report: ValidationReport, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "validation.json"]
    paths[0].write_text(report.to_json(), encoding="utf-8")
    paths.append(
        _write_tsv(
            out_dir / "diagnostics.tsv",
            ("rule", "severity", "node", "message"),
            [(d.rule, d.severity, d.node or "", d.message) for d in report.diagnostics],
        )
    )
    paths.append(plot_diagnostics(report, out_dir / "diagnostics.png"))
    return paths


def plot_bootstrap(dist: np.ndarray, result: EvalResult, path: Path) -> Path:
    fig, ax = new_figure()
    values, counts = np.unique(dist, return_counts=True)
    width = np.min(np.diff(values)) * 0.9 if len(values) > 1 else 0.01
    ax.bar(values, counts / counts.sum(), width=width, color="0.6")
    ax.axvline(result.ci_upper, color="#2980b9", label=f"upper bound {result.ci_upper:.4g}")
    ax.axvline(float(result.params["delta"]), color="#c0392b", linestyle="--", label=f"margin {result.params['delta']}")
    ax.axvline(result.delta_hat, color="k", linewidth=0.8, label=f"observed {result.delta_hat:.4g}")
    ax.set_xlabel("candidate rate - baseline rate")
    ax.set_ylabel("bootstrap probability")
    ax.legend(frameon=False)
    return save(fig, path)


def plot_marginal_risk(result: EvalResult, path: Path) -> Path:
    names = result.mr.names()
    vals = [result.mr[k] * 100 for k in names]
    fig, ax = new_figure()
    ax.barh(names, vals, color=["#27ae60" if v <= 0 else "#c0392b" for v in vals])
    ax.axvline(0, color="k", linewidth=0.8)
    ax.set_xlabel("marginal risk (percentage points)")
    return save(fig, path)


def plot_spi(series: SpiSeries, window: int, path: Path) -> Path:
    fig, ax = new_figure()
    x = np.arange(len(series.values))
    ax.plot(x, series.values, color="0.6", marker=".", label=series.name)
    means = rolling_means(series.values, window)
    ax.plot(x[window - 1 :], means, color="#2980b9", label=f"rolling mean ({window})")
    ax.axhspan(series.lower, series.upper, color="#27ae60", alpha=0.1, label="acceptance band")
    ax.set_xticks(x, [str(t) for t in series.timestamps], rotation=45, ha="right", fontsize=7)
    ax.legend(frameon=False)
    return save(fig, path)


def write_eval_report(
    results: Sequence[EvalResult],
    out_dir: Path,
    bootstrap: Optional[np.ndarray] = None,
    spi: Optional[tuple[SpiSeries, int]] = None,
    header: Optional[dict] = None,
) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = dict(header or {})
    doc["results"] = [r.to_dict() for r in results]
    paths = [out_dir / "eval.json"]
    paths[0].write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    rows = [
        (r.kind, r.verdict, "" if r.delta_hat is None else repr(r.delta_hat),
         "" if r.ci_upper is None else repr(r.ci_upper), r.detail)
        for r in results
    ]
    paths.append(_write_tsv(out_dir / "eval.tsv", ("kind", "verdict", "delta_hat", "ci_upper", "detail"), rows))
    for r in results:
        if r.kind == "marginal_risk":
            paths.append(plot_marginal_risk(r, out_dir / "marginal_risk.png"))
        elif r.kind == "non_inferiority" and bootstrap is not None:
            paths.append(plot_bootstrap(bootstrap, r, out_dir / "non_inferiority.png"))
        elif r.kind == "spi" and spi is not None:
            paths.append(plot_spi(spi[0], spi[1], out_dir / "spi.png"))
    return paths
