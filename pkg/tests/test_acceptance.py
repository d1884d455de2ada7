"""Acceptance criteria, one test each.

Every test prints a PASS/FAIL line (collected again in the terminal
summary).  Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import time
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from conftest import record_acceptance
from tndsim.cli import main
from tndsim.diagnostic import DiagnosticTest, apply_test, fp_exceeds_tp_prevalence
from tndsim.estimators import misclassified_arms, ve_corrected, ve_odds_ratio, ve_risk_ratio
from tndsim.population import StudyTable, assumption_gap
from tndsim.simulate import Scenario, monte_carlo, run_scenario, ve_grid

GOLDEN = Path(__file__).parent / "golden"
SIZES = (10000, 10000)
PREV = (0.01, 0.10)


def check(criterion, ok, detail):
    record_acceptance(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, detail


def paper(se, sp, **kw):
    return Scenario(10000, 10000, 0.01, 0.10, DiagnosticTest(se, sp), **kw)


def test_ac01_perfect_test():
    t0 = time.perf_counter()
    ve = run_scenario(paper(1.0, 1.0)).estimate.value
    elapsed = time.perf_counter() - t0
    check("AC1 perfect test VE-hat = 0.90", abs(ve - 0.9) <= 1e-12 and elapsed < 1,
          f"VE={ve!r}, |err|={abs(ve - 0.9):.1e} (tol 1e-12), {elapsed:.3f}s (< 1s)")


def test_ac02_se70_sp95_tables():
    t0 = time.perf_counter()
    vax, unvax, counts = misclassified_arms(SIZES, PREV, DiagnosticTest(0.70, 0.95))
    ve = run_scenario(paper(0.70, 0.95)).estimate.value
    elapsed = time.perf_counter() - t0
    got = (vax.true_positive, vax.false_positive, vax.positives,
           unvax.true_positive, unvax.false_positive, unvax.positives,
           counts.c, counts.i)
    want = (70, 495, 565, 700, 450, 1150, 9435, 8850)
    count_err = max(abs(g - w) for g, w in zip(got, want))
    ve_err = abs(ve - float(Fraction(117, 230)))
    check("AC2 se=0.70/sp=0.95 tables and VE-hat = 117/230",
          count_err <= 1e-12 and ve_err <= 1e-9 and elapsed < 1,
          f"max count err {count_err:.1e} (tol 1e-12), VE={ve:.9f} err {ve_err:.1e} (tol 1e-9), "
          f"{elapsed:.3f}s")


def test_ac03_se95_sp70():
    t0 = time.perf_counter()
    ve = run_scenario(paper(0.95, 0.70)).estimate.value
    elapsed = time.perf_counter() - t0
    err = abs(ve - float(1 - Fraction(3065, 3650)))
    check("AC3 se=0.95/sp=0.70 VE-hat = 1 - 3065/3650", err <= 1e-9 and elapsed < 1,
          f"VE={ve:.9f}, err {err:.1e} (tol 1e-9), {elapsed:.3f}s")


def test_ac04_odds_ratio_identity():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(1000):
        n1, n3 = rng.uniform(10, 1e6, size=2)
        frac = rng.uniform(1e-3, 0.95)           # B/N1 = H/N3
        B, H = frac * n1, frac * n3
        A = rng.uniform(0, 1 - frac) * n1
        G = rng.uniform(1e-3, 1 - frac) * n3
        t = StudyTable.from_cells(A, B, n1 - A - B, 0, 0, 0, G, H, n3 - G - H, 0, 0, 0)
        assert assumption_gap(t) <= 1e-15 and t.B > 0 and t.G > 0
        diff = abs(ve_odds_ratio(t.A, t.B, t.G, t.H).value - ve_risk_ratio(t.A, t.N1, t.G, t.N3).value)
        worst = max(worst, diff)
    check("AC4 odds-ratio = risk-ratio when assumption gap is 0", worst <= 1e-10,
          f"1000 tables, max |diff| {worst:.1e} (tol 1e-10)")


def test_ac05_sign_flip_grid():
    t0 = time.perf_counter()
    grid = np.linspace(0.0, 1.0, 50)
    ve = ve_grid(paper(1.0, 1.0), grid, grid)
    elapsed = time.perf_counter() - t0
    se, sp = np.meshgrid(grid, grid, indexing="ij")
    youden = se + sp - 1
    on_line = np.abs(youden) < 1e-9
    below, above = (youden < 0) & ~on_line, (youden > 0) & ~on_line
    ok = (np.all(ve[below] < 0) and np.all(ve[above] > 0) and elapsed < 5
          and not np.isnan(ve[~on_line]).any())
    line_vals = ve[on_line & ~np.isnan(ve)]
    check("AC5 VE < 0 exactly where se+sp < 1 (50x50 grid)", ok,
          f"{below.sum()} points below (all negative: {np.all(ve[below] < 0)}), "
          f"{above.sum()} above (all positive: {np.all(ve[above] > 0)}), "
          f"{on_line.sum()} on the line (max |VE| {np.abs(line_vals).max():.1e}), {elapsed:.2f}s (< 5s)")


def test_ac06_attenuation():
    rng = np.random.default_rng(6)
    violations, n = 0, 0
    while n < 1000:
        se, sp = rng.uniform(0, 1, size=2)
        if se + sp <= 1:
            continue
        pu = rng.uniform(1e-4, 1)
        pv = rng.uniform(0, pu)
        observed = run_scenario(Scenario(10000, 10000, pv, pu, DiagnosticTest(se, sp))).estimate.value
        true = 1 - pv / pu
        violations += not (0 <= observed <= true)
        n += 1
    check("AC6 0 <= VE_observed <= VE_true when se+sp > 1", violations == 0,
          f"{violations} violations in {n} random draws")


def test_ac07_fp_tp_crossover():
    test = DiagnosticTest(0.70, 0.95)
    mismatches = []
    for k in range(1001):
        p = k / 1000
        c = apply_test(10000 * p, 10000 * (1 - p), test)
        if (c.false_positive > c.true_positive) != (Fraction(k, 1000) < Fraction(1, 15)):
            mismatches.append(p)
    star = fp_exceeds_tp_prevalence(test)
    ok = not mismatches and abs(star - 1 / 15) <= 1e-15
    check("AC7 FP > TP iff prevalence < 1/15 (se=0.70, sp=0.95)", ok,
          f"1001 grid points, {len(mismatches)} mismatches, crossover {star:.6f}")


def test_ac08_correction_round_trip():
    errs = []
    for se, sp in ((0.70, 0.95), (0.95, 0.70)):
        test = DiagnosticTest(se, sp)
        _, _, c = misclassified_arms(SIZES, PREV, test)
        errs.append(abs(ve_corrected((c.a, c.g), (c.n1, c.n3), test).value - 0.9))
    check("AC8 corrected VE recovers 0.90", max(errs) <= 1e-9,
          f"errors {', '.join(f'{e:.1e}' for e in errs)} (tol 1e-9)")


def test_ac09_monte_carlo():
    t0 = time.perf_counter()
    s = paper(0.70, 0.95, mode="stochastic", seed=1)
    first = monte_carlo(s, 10_000, 20211)
    second = monte_carlo(replace(s, seed=2), 10_000, 20211)
    elapsed = time.perf_counter() - t0
    target = float(Fraction(117, 230))
    se_mean = first.sd / np.sqrt(first.successes)
    z = (first.mean - target) / se_mean
    ok = abs(z) <= 4 and repr(first) == repr(second) and first.error_rate == 0 and elapsed < 30
    check("AC9 Monte Carlo mean within 4 SE of 117/230, reproducible", ok,
          f"mean {first.mean:.6f}, sd {first.sd:.5f}, z = {z:+.2f}, identical rerun: "
          f"{repr(first) == repr(second)}, {elapsed:.1f}s (< 30s)")


def test_ac10_cli_golden(tmp_path, capsys):
    outputs = []
    for k in range(2):
        text_path, csv_path = tmp_path / f"paper{k}.txt", tmp_path / f"sweep{k}.csv"
        codes = (main(["reproduce-paper", "--output", str(text_path)]),
                 main(["sweep", "paper_sweep", "--output", str(csv_path)]))
        outputs.append((codes, text_path.read_bytes(), csv_path.read_bytes()))
    capsys.readouterr()
    same = outputs[0] == outputs[1]
    golden = (outputs[0][1] == (GOLDEN / "reproduce_paper.txt").read_bytes()
              and outputs[0][2] == (GOLDEN / "paper_sweep.csv").read_bytes())
    check("AC10 CLI outputs byte-identical and match golden files",
          same and golden and outputs[0][0] == (0, 0),
          f"identical across runs: {same}, match golden: {golden}, exit codes {outputs[0][0]}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
