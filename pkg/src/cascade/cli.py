"""Command-line entry point.

Exit codes: 0 success/pass, 1 validation errors, 2 evaluation fail verdict,
3 usage or I/O error. Artifacts go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from datetime import date
from decimal import Decimal
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, casl, export, patterns, quant, validator
from .model import ModelError
from .registry import Registry, RegistryError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAIL = 2
EXIT_USAGE = 3

DEFAULT_REGISTRY = ".cascade-registry"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; usage errors are 3 here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _err(msg: str) -> None:
    print(f"cascade: {msg}", file=sys.stderr)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def load_case(path: str):
    text = _read(path)
    try:
        return casl.parse(text)
    except casl.ParseError as exc:
        raise UsageError(f"{path}:{exc.line}:{exc.column}: expected {exc.expected}, found {exc.found}") from exc


def _as_of(value: Optional[str]) -> Optional[date]:
    if value is None:
        return None
    if value == "today":
        return date.today()
    try:
        return date.fromisoformat(value)
    except ValueError:
        raise UsageError(f"--as-of must be YYYY-MM-DD or 'today', got {value!r}") from None


def _pairs(items: Sequence[str], what: str) -> dict[str, str]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"{what} expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _floats(items: Sequence[str], what: str) -> dict[str, float]:
    out = {}
    for k, v in _pairs(items, what).items():
        try:
            out[k] = float(Decimal(v[:-1]) / 100) if v.endswith("%") else float(v)
        except (ValueError, ArithmeticError):
            raise UsageError(f"{what} {k}: not a number: {v!r}") from None
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    case = load_case(args.path)
    report = validator.validate(case, as_of=_as_of(args.as_of), recency_months=args.recency_months)
    sys.stdout.write(report.to_json() if args.json else report.to_text())
    if args.report_dir:
        from .report import write_validation_report

        for p in write_validation_report(report, Path(args.report_dir)):
            _err(f"wrote {p}")
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_explain(args) -> int:
    try:
        print(validator.explain_rule(args.rule))
    except validator.UnknownRule:
        raise UsageError(f"unknown rule {args.rule!r}; rules are V1..V11") from None
    return EXIT_OK


def _read_spi(path: str, name: str, lower: float, upper: float) -> quant.SpiSeries:
    rows = list(csv.reader(io.StringIO(_read(path))))
    if not rows or [h.strip() for h in rows[0]] != ["timestamp", "value"]:
        raise UsageError("SPI CSV header must be timestamp,value")
    ts, vals = [], []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            ts.append(row[0].strip())
            vals.append(float(row[1]))
        except (IndexError, ValueError):
            raise UsageError(f"SPI CSV line {i}: expected timestamp,value") from None
    return quant.SpiSeries(name, tuple(ts), tuple(vals), lower, upper)


def cmd_eval(args) -> int:
    case = load_case(args.path)
    results: list[quant.EvalResult] = []
    metrics: dict[str, float] = {}
    boot = None
    spi = None

    baseline = _floats(args.baseline, "--baseline")
    candidate = _floats(args.candidate, "--candidate")
    if baseline or candidate:
        r = quant.evaluate_marginal_risk(quant.RiskVector(candidate), quant.RiskVector(baseline))
        results.append(r)
        metrics.update({f"mr.{k}": v for k, v in r.mr.to_dict().items()})

    if args.paired:
        if args.delta is None or args.seed is None:
            raise UsageError("--paired needs --delta and --seed")
        data = quant.read_paired_csv(_read(args.paired))
        if args.exact:
            r = quant.non_inferiority_exact(data, args.delta, args.alpha)
        else:
            spec = quant.NonInferioritySpec(args.delta, args.alpha, args.resamples, args.seed)
            r = quant.non_inferiority(data, spec)
            if args.report_dir:
                boot = quant.bootstrap_distribution(data, spec.resamples, spec.seed)
        results.append(r)
        metrics.update(delta_hat=r.delta_hat, ci_upper=r.ci_upper)

    if args.spi:
        if args.window is None or args.lower is None or args.upper is None:
            raise UsageError("--spi needs --window, --lower and --upper")
        series = _read_spi(args.spi, Path(args.spi).stem, args.lower, args.upper)
        results.append(quant.spi_check(series, args.window))
        spi = (series, args.window)

    if args.thresholds:
        try:
            doc = json.loads(_read(args.thresholds))
        except ValueError as exc:
            raise UsageError(f"{args.thresholds}: invalid JSON: {exc}") from exc
        spec = quant.ThresholdSpec.from_dict(doc)
        values = {k: float(v) for k, v in (doc.get("metrics") or {}).items()}
        values.update(metrics)
        values.update(_floats(args.metric, "--metric"))
        results.append(quant.threshold_aggregate(values, spec))

    if not results:
        raise UsageError("nothing to evaluate: give --baseline/--candidate, --paired, --spi or --thresholds")

    verdict = "pass" if all(r.passed for r in results) else "fail"
    header = {"case_id": case.case_id, "case_hash": validator.case_hash(case), "verdict": verdict}
    doc = dict(header, results=[r.to_dict() for r in results])
    sys.stdout.write(json.dumps(doc, indent=2, ensure_ascii=False) + "\n")
    if args.report_dir:
        from .report import write_eval_report

        for p in write_eval_report(results, Path(args.report_dir), bootstrap=boot, spi=spi, header=header):
            _err(f"wrote {p}")
    return EXIT_OK if verdict == "pass" else EXIT_FAIL


def cmd_new(args) -> int:
    params: dict[str, object] = {}
    if args.params:
        params.update(patterns.read_params(_read(args.params)))
    params.update(_pairs(args.set, "--set"))
    case = patterns.instantiate(args.pattern, params)
    text = casl.serialize(case)
    report = validator.validate(case)
    summary = (
        f"{args.pattern}: case {case.case_id} v{case.version}, {len(case.nodes)} nodes, "
        f"{report.count('error')} error(s), {report.count('warning')} warning(s)"
    )
    if args.output:
        try:
            Path(args.output).write_text(text, encoding="utf-8", newline="\n")
        except OSError as exc:
            raise UsageError(f"cannot write {args.output}: {exc}") from exc
        print(f"wrote {args.output}\n{summary}")
    else:
        sys.stdout.write(text)
        _err(summary)
    return EXIT_OK


def cmd_patterns(args) -> int:
    for t in patterns.list_patterns():
        req = ", ".join(f"{n} ({k})" for n, k in t.required_params)
        opt = ", ".join(n for n, _ in t.optional_params)
        print(f"{t.pattern_id}\t{t.title}\trequired: {req}\toptional: {opt}")
    return EXIT_OK


def cmd_compose(args) -> int:
    parts = [load_case(p) for p in args.parts]
    case = patterns.compose(parts, args.top, case_id=args.case_id)
    text = casl.serialize(case)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8", newline="\n")
        print(f"wrote {args.output}: {len(case.nodes)} nodes from {len(parts)} part(s)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_export(args) -> int:
    case = load_case(args.path)
    sys.stdout.write(export.to_dot(case) if args.format == "dot" else export.to_json(case))
    return EXIT_OK


def _registry(args) -> Registry:
    root = args.registry or os.environ.get("CASCADE_REGISTRY") or DEFAULT_REGISTRY
    return Registry(root)


def cmd_registry(args) -> int:
    reg = _registry(args)
    sub = args.sub
    if sub == "put":
        case = load_case(args.path)
        if args.report:
            try:
                report = validator.ValidationReport.from_dict(json.loads(_read(args.report)))
            except (ValueError, KeyError) as exc:
                raise UsageError(f"{args.report}: not a validation report: {exc}") from exc
        else:
            report = validator.validate(case, as_of=_as_of(args.as_of))
        if not report.passed and not args.allow_failed:
            sys.stderr.write(report.to_text())
            _err("validation failed; not stored (use --allow-failed to quarantine)")
            return EXIT_INVALID
        h = reg.put(case, report, allow_failed=args.allow_failed)
        print(h)
        return EXIT_OK
    if sub == "get":
        case, report = reg.get(reg.resolve(args.hash))
        if args.json:
            doc = {"case": export.to_json_dict(case), "validation": report.to_dict()}
            sys.stdout.write(json.dumps(doc, indent=2, ensure_ascii=False) + "\n")
        else:
            sys.stdout.write(casl.serialize(case))
        return EXIT_OK
    if sub == "lineage":
        recs = reg.lineage(args.case_id)
        if args.json:
            sys.stdout.write(json.dumps([r.to_dict() for r in recs], indent=2, ensure_ascii=False) + "\n")
        else:
            for r in recs:
                print(f"v{r.version}\t{r.content_hash}\t{r.status}\t{r.stored_at}\t{r.predecessor or '-'}")
        return EXIT_OK
    if sub == "diff":
        d = reg.diff(reg.resolve(args.hash_a), reg.resolve(args.hash_b))
        sys.stdout.write(json.dumps(d.to_dict(), indent=2) + "\n")
        return EXIT_OK
    if sub == "verify":
        bad = reg.verify()
        for h in bad:
            print(h)
        return EXIT_OK if not bad else EXIT_USAGE
    raise UsageError(f"unknown registry command {sub!r}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cascade", description="Build, validate, evaluate and register CAE safety cases.")
    p.add_argument("--version", action="version", version=f"cascade {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check a .casl file against rules V1-V11")
    v.add_argument("path")
    v.add_argument("--json", action="store_true", help="emit the report as JSON")
    v.add_argument("--as-of", help="reference date for recency checks (YYYY-MM-DD or 'today')")
    v.add_argument("--recency-months", type=int, default=validator.DEFAULT_RECENCY_MONTHS)
    v.add_argument("--report-dir", help="also write validation.json, diagnostics.tsv and a figure here")
    v.set_defaults(func=cmd_validate)

    x = sub.add_parser("explain", help="print the rationale of a validator rule")
    x.add_argument("rule")
    x.set_defaults(func=cmd_explain)

    e = sub.add_parser("eval", help="run quantitative checks for a case")
    e.add_argument("path")
    e.add_argument("--baseline", action="append", default=[], metavar="NAME=RATE")
    e.add_argument("--candidate", action="append", default=[], metavar="NAME=RATE")
    e.add_argument("--paired", metavar="CSV", help="case_id,baseline_disagreed,candidate_disagreed")
    e.add_argument("--delta", type=float)
    e.add_argument("--alpha", type=float, default=0.95)
    e.add_argument("--seed", type=int)
    e.add_argument("--resamples", type=int, default=quant.DEFAULT_RESAMPLES)
    e.add_argument("--exact", action="store_true", help="exact enumeration instead of bootstrap (n <= 10)")
    e.add_argument("--thresholds", metavar="JSON")
    e.add_argument("--metric", action="append", default=[], metavar="NAME=VALUE")
    e.add_argument("--spi", metavar="CSV", help="timestamp,value series")
    e.add_argument("--window", type=int)
    e.add_argument("--lower", type=float)
    e.add_argument("--upper", type=float)
    e.add_argument("--report-dir", help="also write eval.json, eval.tsv and figures here")
    e.set_defaults(func=cmd_eval)

    n = sub.add_parser("new", help="instantiate a pattern skeleton")
    n.add_argument("--pattern", required=True)
    n.add_argument("--params", metavar="FILE", help="key=value lines")
    n.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    n.add_argument("-o", "--output")
    n.set_defaults(func=cmd_new)

    sub.add_parser("patterns", help="list built-in patterns").set_defaults(func=cmd_patterns)

    c = sub.add_parser("compose", help="nest several cases under a new top claim")
    c.add_argument("parts", nargs="+")
    c.add_argument("--top", required=True, help="text of the new top claim")
    c.add_argument("--case-id", default="composite")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_compose)

    ex = sub.add_parser("export", help="render a case as DOT or JSON")
    ex.add_argument("path")
    ex.add_argument("--format", choices=("dot", "json"), default="dot")
    ex.set_defaults(func=cmd_export)

    r = sub.add_parser("registry", help="content-addressed case store")
    r.add_argument("--registry", help=f"registry root (default $CASCADE_REGISTRY or {DEFAULT_REGISTRY})")
    rs = r.add_subparsers(dest="sub", required=True, parser_class=_Parser)
    put = rs.add_parser("put")
    put.add_argument("path")
    put.add_argument("--report", help="use this validation report instead of validating")
    put.add_argument("--allow-failed", action="store_true", help="store failing cases as quarantined")
    put.add_argument("--as-of")
    get = rs.add_parser("get")
    get.add_argument("hash")
    get.add_argument("--json", action="store_true")
    lin = rs.add_parser("lineage")
    lin.add_argument("case_id")
    lin.add_argument("--json", action="store_true")
    dif = rs.add_parser("diff")
    dif.add_argument("hash_a")
    dif.add_argument("hash_b")
    rs.add_parser("verify")
    r.set_defaults(func=cmd_registry)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, RegistryError, patterns.PatternError, quant.QuantError, ModelError) as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
