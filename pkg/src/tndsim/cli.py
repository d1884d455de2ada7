"""Command-line interface.

Commands: ``reproduce-paper``, ``estimate``, ``simulate``, ``sweep``.
Exit status is 0 when a run completes, even if some estimates are undefined;
2 for usage or config errors; 1 for I/O failures and a failed
``reproduce-paper`` self-check.
"""

from __future__ import annotations

import argparse
import csv
import io
import re
import sys
from dataclasses import replace
from fractions import Fraction

from .config import read_config_text, parse_config, shipped_configs
from .diagnostic import DiagnosticTest
from .errors import ConfigError, TNDError
from .estimators import ObservedCounts, estimate_all, misclassified_arms, ve_risk_ratio
from .simulate import (
    STOCHASTIC,
    SweepResult,
    SweepRow,
    SweepSpec,
    _evaluate_point,
    monte_carlo,
    run_scenario,
    run_sweep,
)

VE_TOLERANCE = 1e-9

SWEEP_FIELDS = ("ve", "method", "control_group", "mc_mean", "mc_sd", "q025", "q50", "q975",
                "error_rate", "assumption_gap", "clamped", "error")

# (label, sensitivity, specificity, reference VE as a rational expression)
PAPER_EXAMPLES = (
    ("1", "1", "1", "1 - 100/1000"),
    ("2", "0.70", "0.95", "1 - 565/1150"),
    ("3", "0.95", "0.70", "1 - 3065/3650"),
)
PAPER_SIZES = (10000, 10000)
PAPER_PREVALENCES = ("0.01", "0.10")


def fmt_num(x):
    """Six significant digits, ``NA`` for missing values."""
    if x is None:
        return "NA"
    x = float(x)
    if x == 0:
        x = 0.0  # no "-0.00000"
    return f"{x:#.6g}"


def fmt_count(x):
    if abs(x - round(x)) < 1e-9:
        return f"{round(x):,d}"
    return f"{x:,.4f}"


def fmt_ve(x):
    return f"{x:.5f}"


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _aligned(header, rows, indent=""):
    table = [list(header)] + [list(r) for r in rows]
    widths = [max(len(str(r[k])) for r in table) for k in range(len(header))]
    return "".join(
        indent + "  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() + "\n"
        for r in table)


# reproduce-paper

def _eval_rational(expr):
    m = re.fullmatch(r"\s*1\s*-\s*(\d+)\s*/\s*(\d+)\s*", expr)
    if not m:
        raise ValueError(f"unsupported reference expression {expr!r}")
    return 1 - Fraction(int(m.group(1)), int(m.group(2)))


def exact_paper_ve(se, sp):
    """VE-hat for the worked examples in exact rational arithmetic."""
    se, sp = Fraction(se), Fraction(sp)
    (n_v, n_u), (p_v, p_u) = PAPER_SIZES, (Fraction(p) for p in PAPER_PREVALENCES)
    pos_v = se * n_v * p_v + (1 - sp) * n_v * (1 - p_v)
    pos_u = se * n_u * p_u + (1 - sp) * n_u * (1 - p_u)
    return 1 - (pos_v / n_v) / (pos_u / n_u)


def paper_examples():
    """Compute the worked examples and check them against exact references.

    Returns ``(results, failures)``; each result is
    ``(label, test, vax_table, unvax_table, counts, ve, exact)``.
    """
    results, failures = [], []
    prevalences = tuple(float(p) for p in PAPER_PREVALENCES)
    for label, se, sp, ref in PAPER_EXAMPLES:
        test = DiagnosticTest(float(se), float(sp))
        vax, unvax, counts = misclassified_arms(PAPER_SIZES, prevalences, test)
        ve = ve_risk_ratio(counts.a, counts.n1, counts.g, counts.n3).value
        exact = exact_paper_ve(se, sp)
        if _eval_rational(ref) != exact:
            failures.append(f"example {label}: reference {ref} != exact {exact}")
        if abs(ve - float(exact)) > VE_TOLERANCE:
            failures.append(f"example {label}: VE-hat {ve!r} deviates from {exact} = {float(exact)!r}")
        results.append((label, test, vax, unvax, counts, ve, exact))
    return results, failures


def _confusion_block(title, t):
    rows = [
        ("test positive", fmt_count(t.true_positive), fmt_count(t.false_positive),
         fmt_count(t.positives)),
        ("test negative", fmt_count(t.false_negative), fmt_count(t.true_negative),
         fmt_count(t.negatives)),
        ("total", fmt_count(t.infected), fmt_count(t.not_infected),
         fmt_count(t.infected + t.not_infected)),
    ]
    return _aligned((title, "infected", "not infected", "total"), rows, indent="  ")


def render_paper_text(results):
    out = []
    n_v, n_u = PAPER_SIZES
    p_v, p_u = PAPER_PREVALENCES
    out.append("Test-negative design: worked examples\n")
    out.append(f"arms: {n_v:,d} vaccinated (prevalence {p_v}), "
               f"{n_u:,d} unvaccinated (prevalence {p_u})\n")
    for label, test, vax, unvax, c, ve, exact in results:
        out.append(f"\nExample {label}: sensitivity {test.sensitivity:.2f}, "
                   f"specificity {test.specificity:.2f}\n")
        out.append(_confusion_block("vaccinated people", vax))
        out.append("\n")
        out.append(_confusion_block("unvaccinated people", unvax))
        out.append("\n")
        rows = [
            ("vaccinated", f"A = {fmt_count(c.a)}", f"B = {fmt_count(c.c)}", f"N1 = {fmt_count(c.n1)}"),
            ("not vaccinated", f"G = {fmt_count(c.g)}", f"H = {fmt_count(c.i)}", f"N3 = {fmt_count(c.n3)}"),
            ("total", fmt_count(c.a + c.g), fmt_count(c.c + c.i), fmt_count(c.n1 + c.n3)),
        ]
        out.append(_aligned(("", "test positive", "test negative", "total"), rows, indent="  "))
        out.append(f"  VE-hat = {fmt_ve(ve)}  (exact {exact})\n")
    out.append("\nSummary\n")
    out.append(_aligned(
        ("example", "sensitivity", "specificity", "VE-hat"),
        [(label, f"{t.sensitivity:.2f}", f"{t.specificity:.2f}", fmt_ve(ve))
         for label, t, *_, ve, _exact in results],
        indent="  "))
    out.append(f"self-check: {len(results)}/{len(results)} within {VE_TOLERANCE:g} "
               "of exact references\n")
    return "".join(out)


def render_paper_csv(results):
    header = ("example", "sensitivity", "specificity", "arm", "true_positive", "false_positive",
              "false_negative", "true_negative", "positives", "negatives", "total", "ve")
    rows = []
    for label, test, vax, unvax, _c, ve, _exact in results:
        for arm, t in (("vaccinated", vax), ("unvaccinated", unvax)):
            rows.append((label, fmt_num(test.sensitivity), fmt_num(test.specificity), arm,
                         fmt_num(t.true_positive), fmt_num(t.false_positive),
                         fmt_num(t.false_negative), fmt_num(t.true_negative),
                         fmt_num(t.positives), fmt_num(t.negatives),
                         fmt_num(t.infected + t.not_infected), fmt_num(ve)))
    return _csv_text(header, rows)


def cmd_reproduce_paper(fmt="text"):
    """Return ``(report, exit_code)``; the report is empty if the self-check fails."""
    results, failures = paper_examples()
    if failures:
        return "self-check failed:\n" + "\n".join(failures) + "\n", 1
    render = render_paper_csv if fmt == "csv" else render_paper_text
    return render(results), 0


# estimate

def _result_cells(result):
    if isinstance(result, TNDError):
        return None, result.tag
    return result.value, ""


def render_estimates(counts_list, fmt="text"):
    blocks, csv_rows = [], []
    for row, counts in enumerate(counts_list, start=1):
        estimates = estimate_all(counts)
        try:
            gap = counts.assumption_gap()
        except TNDError:
            gap = None
        for method, policy, result in estimates:
            value, err = _result_cells(result)
            csv_rows.append((row, method, policy, fmt_num(value), err, fmt_num(gap)))
        if fmt == "text":
            cells = " ".join(f"{k}={fmt_count(getattr(counts, k))}" for k in "abcghi")
            lines = [(m, p, fmt_ve(r.value) if not isinstance(r, TNDError) else r.tag)
                     for m, p, r in estimates]
            blocks.append(f"counts: {cells}\n"
                          + _aligned(("method", "control_group", "VE"), lines, indent="  ")
                          + f"  assumption gap: {'NA' if gap is None else fmt_ve(gap)}\n")
    if fmt == "csv":
        return _csv_text(("row", "method", "control_group", "ve", "error", "assumption_gap"),
                         csv_rows)
    return "\n".join(blocks)


def read_counts_csv(text):
    reader = csv.DictReader(io.StringIO(text))
    missing = [k for k in "abcghi" if k not in (reader.fieldnames or [])]
    if missing:
        raise ValueError(f"counts CSV lacks column(s): {', '.join(missing)}")
    out = []
    for n, rec in enumerate(reader, start=2):
        try:
            values = {k: float(rec[k]) for k in "abcghi"}
        except (TypeError, ValueError):
            raise ValueError(f"line {n}: counts must be numbers") from None
        if any(v < 0 or v != v for v in values.values()):
            raise ValueError(f"line {n}: counts must be nonnegative")
        out.append(ObservedCounts(**values))
    if not out:
        raise ValueError("counts CSV has no data rows")
    return out


# simulate / sweep

def sweep_rows(result):
    rows = []
    for r in result.rows:
        mc = r.mc
        rows.append(tuple(fmt_num(x) for x in r.params) + (
            fmt_num(r.ve), r.method, r.control_group,
            fmt_num(mc.mean if mc else None), fmt_num(mc.sd if mc else None),
            fmt_num(mc.q025 if mc else None), fmt_num(mc.q50 if mc else None),
            fmt_num(mc.q975 if mc else None),
            fmt_num(r.error_rate), fmt_num(r.assumption_gap), fmt_num(r.clamped),
            r.error or "",
        ))
    return rows


def render_sweep(result, fmt="csv"):
    header = tuple(result.columns) + SWEEP_FIELDS
    rows = sweep_rows(result)
    if fmt == "text":
        return _aligned(header, rows)
    return _csv_text(header, rows)


def render_simulation(s, replications, fmt="text"):
    if fmt == "csv":
        # zero-axis sweep row: same columns as a sweep
        row = SweepRow((), *_evaluate_point((s, replications)))
        return render_sweep(SweepResult((), (row,)), "csv")

    out = [f"scenario: {fmt_count(s.n_vax)} vaccinated (p={s.p_vax:g}), "
           f"{fmt_count(s.n_unvax)} unvaccinated (p={s.p_unvax:g}); "
           f"se={s.test.sensitivity:g} sp={s.test.specificity:g}; "
           f"{s.method}" + (f"/{s.control}" if s.method != "risk-ratio" else "")
           + (" corrected" if s.correct else "") + "\n"]
    det = replace(s, mode="deterministic")
    try:
        res = run_scenario(det)
        t, c = res.table, res.observed
        out.append("study table (expected counts)\n")
        out.append(_aligned(
            ("", "target", "other", "not positive", "total"),
            [("seek care, vaccinated", *(fmt_count(x) for x in (t.A, t.B, t.C, t.N1))),
             ("seek care, unvaccinated", *(fmt_count(x) for x in (t.G, t.H, t.I, t.N3))),
             ("no care, vaccinated", *(fmt_count(x) for x in (t.D, t.E, t.F, t.N2))),
             ("no care, unvaccinated", *(fmt_count(x) for x in (t.J, t.K, t.L, t.N4)))],
            indent="  "))
        out.append("observed after testing: "
                   + " ".join(f"{k}={fmt_count(getattr(c, k))}" for k in "abcghi") + "\n")
        out.append(f"VE-hat = {fmt_ve(res.estimate.value)}"
                   + (" (clamped)" if res.estimate.clamped else "") + "\n")
        out.append(f"assumption gap = {'NA' if res.assumption_gap is None else fmt_ve(res.assumption_gap)}\n")
    except TNDError as exc:
        out.append(f"VE-hat undefined at stage {exc.stage}: {exc.tag} ({exc})\n")

    if s.mode == STOCHASTIC:
        try:
            mc = monte_carlo(s, replications, s.seed)
        except TNDError as exc:
            out.append(f"Monte Carlo: {exc.tag} ({exc})\n")
        else:
            out.append(f"Monte Carlo: {mc.replications} replicates, master seed {s.seed}\n")
            out.append(_aligned(
                ("mean", "sd", "q025", "q50", "q975", "error_rate"),
                [tuple(fmt_num(x) for x in (mc.mean, mc.sd, mc.q025, mc.q50, mc.q975,
                                            mc.error_rate))],
                indent="  "))
            for tag, n in mc.errors:
                out.append(f"  {tag}: {n}\n")
    return "".join(out)


def _load(args):
    obj = parse_config(read_config_text(args.config))
    if args.seed is not None:
        base = obj.base if isinstance(obj, SweepSpec) else obj
        base = replace(base, seed=args.seed)
        obj = replace(obj, base=base) if isinstance(obj, SweepSpec) else base
    return obj


def _nonneg(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not x >= 0 or x == float("inf"):
        raise argparse.ArgumentTypeError(f"{text!r} must be a nonnegative count")
    return x


def _seed(text):
    try:
        x = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if not 0 <= x < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return x


def build_parser():
    def global_flags(parser, suppress):
        d = argparse.SUPPRESS if suppress else None
        parser.add_argument("--seed", type=_seed, default=d,
                            help="master seed (overrides the config's seed)")
        parser.add_argument("--output", default=d, help="write to this file instead of stdout")
        parser.add_argument("--format", choices=("csv", "text"), default=d)

    parser = argparse.ArgumentParser(
        prog="tndsim", description="Test-negative design VE simulation and estimation.")
    global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("reproduce-paper", parents=[common],
                   help="recompute the three worked examples and self-check them")

    est = sub.add_parser("estimate", parents=[common],
                         help="VE from observed counts under every estimator and control group")
    for k, desc in (("a", "vaccinated, target positive"), ("b", "vaccinated, other pathogen"),
                    ("c", "vaccinated, pan-negative"), ("g", "unvaccinated, target positive"),
                    ("h", "unvaccinated, other pathogen"), ("i", "unvaccinated, pan-negative")):
        est.add_argument(f"--{k}", type=_nonneg, help=desc)
    est.add_argument("--csv", help="CSV file with columns a,b,c,g,h,i (one study per row)")

    sim = sub.add_parser("simulate", parents=[common], help="run one scenario config")
    sim.add_argument("config", help=f"path or shipped name ({', '.join(shipped_configs())})")
    sim.add_argument("--replications", type=int, default=1000,
                     help="Monte Carlo replicates in stochastic mode (default 1000)")

    sw = sub.add_parser("sweep", parents=[common], help="run a sweep config and emit CSV")
    sw.add_argument("config")
    sw.add_argument("--workers", type=int, default=None, help="process pool size")
    return parser


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "reproduce-paper":
            text, code = cmd_reproduce_paper(args.format or "text")
            if code:
                sys.stderr.write(text)
                return code
        elif args.command == "estimate":
            flags = [getattr(args, k) for k in "abcghi"]
            if args.csv:
                if any(f is not None for f in flags):
                    parser.error("give counts either as flags or with --csv, not both")
                with open(args.csv, encoding="utf-8") as fh:
                    counts = read_counts_csv(fh.read())
            elif any(f is None for f in flags):
                parser.error("estimate needs all of --a --b --c --g --h --i (or --csv)")
            else:
                counts = [ObservedCounts(*flags)]
            text = render_estimates(counts, args.format or "text")
        elif args.command == "simulate":
            obj = _load(args)
            if isinstance(obj, SweepSpec):
                raise ConfigError(["simulate takes a scenario config; use `sweep` for kind = sweep"])
            if args.replications < 1:
                parser.error("--replications must be >= 1")
            text = render_simulation(obj, args.replications, args.format or "text")
        else:
            obj = _load(args)
            if not isinstance(obj, SweepSpec):
                raise ConfigError(["sweep needs kind = sweep with at least one axis"])
            text = render_sweep(run_sweep(obj, workers=args.workers), args.format or "csv")
    except ConfigError as exc:
        sys.stderr.write(f"tndsim: {exc}\n")
        return 2
    except (ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"tndsim: {exc}\n")
        return 2
    try:
        _emit(text, args.output)
    except OSError as exc:
        sys.stderr.write(f"tndsim: cannot write output: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
