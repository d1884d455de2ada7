"""Scenario engine: single runs, Monte Carlo replication, grid sweeps.

Seeding
-------
Replicate ``i`` (0-based) of a Monte Carlo run with master seed ``m`` uses
seed ``derive_seed(m, i)``, the ``(i+1)``-th output of a SplitMix64 stream
started at ``m``::

    z = (m + (i + 1) * 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    seed_i = z ^ (z >> 31)

Each seed then initialises ``numpy.random.default_rng`` (PCG64).  Within a
run, draws happen in a fixed order: care seeking per arm and category
(vaccinated first; target, other, uninfected), then the test per arm.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .diagnostic import DiagnosticTest, apply_test
from .errors import InvalidInputError, NoValidReplicatesError, TNDError
from .estimators import (
    COMBINED,
    CONTROL_POLICIES,
    METHODS,
    NOT_APPLICABLE,
    RISK_RATIO,
    ObservedCounts,
    VEEstimate,
    estimate,
    ve_corrected,
)
from .population import ARMS, CATEGORIES, LatentPopulation, assumption_gap, build_study_table

DETERMINISTIC = "deterministic"
STOCHASTIC = "stochastic"
MODES = (DETERMINISTIC, STOCHASTIC)

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state):
    z = state & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master, index):
    """Seed for replicate ``index`` of a run with master seed ``master``."""
    if index < 0:
        raise InvalidInputError("replicate index must be >= 0")
    return splitmix64(master + (index + 1) * _GAMMA)


def _default_care():
    return {(arm, cat): 1.0 for arm in ARMS for cat in CATEGORIES}


SCALAR_PATHS = ("n_vax", "n_unvax", "p_vax", "p_unvax", "other_vax", "other_unvax",
                "sensitivity", "specificity")
CARE_PATHS = tuple(f"care.{arm}.{cat}" for arm in ARMS for cat in CATEGORIES)
NUMERIC_PATHS = SCALAR_PATHS + CARE_PATHS


@dataclass(frozen=True)
class Scenario:
    """Everything needed to simulate one study.

    Arm sizes and prevalences define the latent population; ``care`` holds
    per-(arm, category) care-seeking probabilities.  With ``correct=True``
    the risk-ratio estimate is computed on Rogan-Gladen corrected rates.
    """

    n_vax: float
    n_unvax: float
    p_vax: float
    p_unvax: float
    test: DiagnosticTest
    other_vax: float = 0.0
    other_unvax: float = 0.0
    care: dict = field(default_factory=_default_care)
    method: str = RISK_RATIO
    control: str = COMBINED
    correct: bool = False
    mode: str = DETERMINISTIC
    seed: Optional[int] = None

    def __post_init__(self):
        care = _default_care()
        care.update(self.care)
        object.__setattr__(self, "care", care)
        if set(care) != set(_default_care()):
            raise InvalidInputError(f"unknown care-seeking keys in {sorted(care)}")
        if self.method not in METHODS:
            raise InvalidInputError(f"unknown method {self.method!r}")
        if self.control not in CONTROL_POLICIES:
            raise InvalidInputError(f"unknown control policy {self.control!r}")
        if self.correct and self.method != RISK_RATIO:
            raise InvalidInputError("rate correction is only defined for the risk-ratio estimator")
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown mode {self.mode!r}")
        if self.mode == STOCHASTIC and self.seed is None:
            raise InvalidInputError("stochastic mode needs a seed")
        if self.seed is not None and not 0 <= self.seed <= _MASK64:
            raise InvalidInputError(f"seed {self.seed} is not an unsigned 64-bit integer")

    def get(self, path):
        if path == "sensitivity":
            return self.test.sensitivity
        if path == "specificity":
            return self.test.specificity
        if path in SCALAR_PATHS:
            return getattr(self, path)
        if path in CARE_PATHS:
            _, arm, cat = path.split(".")
            return self.care[arm, cat]
        raise InvalidInputError(f"unknown parameter path {path!r}")

    def with_values(self, assignments):
        """Copy with numeric parameters replaced, e.g. ``{"sensitivity": 0.7}``."""
        changes, care = {}, dict(self.care)
        se, sp = self.test.sensitivity, self.test.specificity
        for path, value in dict(assignments).items():
            if path == "sensitivity":
                se = value
            elif path == "specificity":
                sp = value
            elif path in SCALAR_PATHS:
                changes[path] = value
            elif path in CARE_PATHS:
                _, arm, cat = path.split(".")
                care[arm, cat] = value
            else:
                raise InvalidInputError(f"unknown parameter path {path!r}")
        return replace(self, test=DiagnosticTest(se, sp), care=care, **changes)

    def control_label(self):
        return NOT_APPLICABLE if self.method == RISK_RATIO else self.control

    def latent_population(self):
        if self.mode == STOCHASTIC:
            return self._integral_population()
        care = {k: v for k, v in self.care.items()}
        return LatentPopulation.from_prevalences(
            self.n_vax, self.n_unvax, self.p_vax, self.p_unvax,
            self.other_vax, self.other_unvax, care)

    def _integral_population(self):
        # the latent population is fixed ground truth; only round to whole people
        exact = LatentPopulation.from_prevalences(
            self.n_vax, self.n_unvax, self.p_vax, self.p_unvax,
            self.other_vax, self.other_unvax, self.care)
        cells = []
        for n, arm in ((self.n_vax, "vaccinated"), (self.n_unvax, "unvaccinated")):
            if n != math.floor(n):
                raise InvalidInputError(f"arm size {n} must be whole in stochastic mode")
            tgt = round(exact.count(arm, "target"))
            oth = round(exact.count(arm, "other"))
            cells += [tgt, oth, int(n) - tgt - oth]
        return LatentPopulation(*cells, care_seek_prob=self.care)


def observe(table, test, seed=None):
    """Run the target-pathogen test on the care seekers of a study table.

    Other-pathogen results are taken as given.  False positives from both
    the other-pathogen and the not-positive columns move into the case
    column; false negatives among target infections become pan-negatives.
    """
    rng = np.random.default_rng(seed) if seed is not None else None
    rows = []
    for tgt, oth, neg in ((table.A, table.B, table.C), (table.G, table.H, table.I)):
        first = apply_test(tgt, oth, test, rng)
        second = apply_test(0, neg, test, rng)
        rows.append((
            first.true_positive + first.false_positive + second.false_positive,
            first.true_negative,
            second.true_negative + first.false_negative,
        ))
    (a, b, c), (g, h, i) = rows
    return ObservedCounts(a, b, c, g, h, i)


@dataclass(frozen=True)
class ScenarioResult:
    estimate: VEEstimate
    table: object
    observed: ObservedCounts
    assumption_gap: Optional[float]


def run_scenario(s):
    """Build the study table, test care seekers, and estimate VE.

    Failures raise a :class:`~tndsim.errors.TNDError` whose ``stage`` is one
    of ``population``, ``table``, ``test`` or ``estimate``.
    """
    rng = np.random.default_rng(s.seed) if s.mode == STOCHASTIC else None
    stage = "population"
    try:
        pop = s.latent_population()
        stage = "table"
        table = build_study_table(pop, rng)
        stage = "test"
        observed = observe(table, s.test, rng)
        stage = "estimate"
        if s.correct:
            est = ve_corrected((observed.a, observed.g), (observed.n1, observed.n3), s.test)
        else:
            est = estimate(observed, s.method, s.control)
    except TNDError as exc:
        exc.stage = stage
        raise
    gap = assumption_gap(table) if table.N1 > 0 and table.N3 > 0 else None
    return ScenarioResult(est, table, observed, gap)


@dataclass(frozen=True)
class MonteCarloSummary:
    replications: int
    successes: int
    mean: float
    sd: float
    q025: float
    q50: float
    q975: float
    error_rate: float
    clamped_rate: float
    errors: tuple = ()  # ((tag, count), ...) sorted by tag


def monte_carlo(s, replications, seed):
    """Replicate a stochastic scenario with seeds derived from ``seed``.

    Failed replicates are counted by error tag and excluded from the
    moments; they are never averaged in.
    """
    if s.mode != STOCHASTIC:
        raise InvalidInputError("monte_carlo needs a stochastic scenario")
    if replications < 1:
        raise InvalidInputError("replications must be >= 1")
    values, clamped, failures = [], 0, Counter()
    for i in range(replications):
        try:
            est = run_scenario(replace(s, seed=derive_seed(seed, i))).estimate
        except TNDError as exc:
            failures[exc.tag] += 1
            continue
        values.append(est.value)
        clamped += est.clamped
    if not values:
        raise NoValidReplicatesError(
            f"all {replications} replicates failed: {dict(failures)}")
    v = np.asarray(values)
    q025, q50, q975 = np.quantile(v, [0.025, 0.5, 0.975])
    return MonteCarloSummary(
        replications=replications,
        successes=len(values),
        mean=float(v.mean()),
        sd=float(v.std(ddof=1)) if len(v) > 1 else 0.0,
        q025=float(q025), q50=float(q50), q975=float(q975),
        error_rate=(replications - len(values)) / replications,
        clamped_rate=clamped / len(values),
        errors=tuple(sorted(failures.items())),
    )


class Axis(NamedTuple):
    """Parameters that vary together; ``values`` holds one tuple per step."""

    paths: tuple
    values: tuple


@dataclass(frozen=True)
class SweepSpec:
    base: Scenario
    axes: tuple
    replications: int = 1

    def __post_init__(self):
        axes = tuple(Axis(tuple(a.paths), tuple(tuple(v) for v in a.values))
                     for a in self.axes)
        object.__setattr__(self, "axes", axes)
        if not axes:
            raise InvalidInputError("a sweep needs at least one axis")
        seen = set()
        for axis in axes:
            if not axis.paths or not axis.values:
                raise InvalidInputError("every axis needs parameters and values")
            for p in axis.paths:
                if p not in NUMERIC_PATHS:
                    raise InvalidInputError(f"axis parameter {p!r} is not a numeric scenario field")
                if p in seen:
                    raise InvalidInputError(f"parameter {p!r} appears on two axes")
                seen.add(p)
            for v in axis.values:
                if len(v) != len(axis.paths):
                    raise InvalidInputError(
                        f"axis {axis.paths} has a step with {len(v)} values")
        if self.replications < 1:
            raise InvalidInputError("replications must be >= 1")

    @property
    def columns(self):
        return tuple(p for axis in self.axes for p in axis.paths)

    def grid(self):
        """Grid points in row order: the first axis varies slowest, steps keep
        their declared order."""
        for steps in itertools.product(*(axis.values for axis in self.axes)):
            yield tuple(x for step in steps for x in step)


@dataclass(frozen=True)
class SweepRow:
    params: tuple
    ve: Optional[float]
    method: str
    control_group: str
    error: Optional[str]
    assumption_gap: Optional[float]
    clamped: float
    error_rate: float
    mc: Optional[MonteCarloSummary] = None


@dataclass(frozen=True)
class SweepResult:
    columns: tuple
    rows: tuple


def _evaluate_point(job):
    scenario, replications = job
    det = replace(scenario, mode=DETERMINISTIC)
    ve = error = gap = None
    clamped = 0.0
    control = scenario.control_label()
    try:
        res = run_scenario(det)
        ve, gap = res.estimate.value, res.assumption_gap
        clamped = float(res.estimate.clamped)
        control = res.estimate.control_group
    except TNDError as exc:
        error = exc.tag
        gap = _gap_or_none(det)
    error_rate = 0.0 if error is None else 1.0
    mc = None
    if scenario.mode == STOCHASTIC:
        try:
            mc = monte_carlo(scenario, replications, scenario.seed)
            error_rate, clamped = mc.error_rate, mc.clamped_rate
        except TNDError as exc:
            error = error or exc.tag
            error_rate = 1.0
    return ve, scenario.method, control, error, gap, clamped, error_rate, mc


def _gap_or_none(s):
    try:
        table = build_study_table(s.latent_population())
        return assumption_gap(table)
    except TNDError:
        return None


def run_sweep(spec, workers=None):
    """Evaluate every grid point.

    Estimate failures become row outcomes.  ``workers`` > 1 evaluates points
    in a process pool; row order and contents do not depend on it.
    """
    points = list(spec.grid())
    columns = spec.columns
    jobs = [(spec.base.with_values(dict(zip(columns, p))), spec.replications) for p in points]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_evaluate_point, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        outcomes = [_evaluate_point(j) for j in jobs]
    rows = tuple(SweepRow(tuple(p), *o) for p, o in zip(points, outcomes))
    return SweepResult(columns, rows)


class BoundaryCell(NamedTuple):
    se_lo: float
    se_hi: float
    sp_lo: float
    sp_hi: float


def ve_grid(base, se_grid, sp_grid):
    """Deterministic VE at each (se, sp); ``nan`` where the estimate is undefined."""
    base = replace(base, mode=DETERMINISTIC)
    out = np.full((len(se_grid), len(sp_grid)), np.nan)
    for i, se in enumerate(se_grid):
        for j, sp in enumerate(sp_grid):
            try:
                s = base.with_values({"sensitivity": float(se), "specificity": float(sp)})
                out[i, j] = run_scenario(s).estimate.value
            except TNDError:
                pass
    return out


def find_sign_boundary(base, se_grid, sp_grid):
    """Grid cells whose corner VE values straddle (or touch) zero.

    Needs equal arms and ``p_vax < p_unvax``; corners with undefined
    estimates are ignored.
    """
    if base.n_vax != base.n_unvax:
        raise InvalidInputError("sign-boundary search assumes equal arm sizes")
    if not base.p_vax < base.p_unvax:
        raise InvalidInputError("sign-boundary search assumes p_vax < p_unvax")
    ve = ve_grid(base, se_grid, sp_grid)
    cells = []
    for i in range(len(se_grid) - 1):
        for j in range(len(sp_grid) - 1):
            corners = ve[i:i + 2, j:j + 2].ravel()
            corners = corners[~np.isnan(corners)]
            if corners.size == 0:
                continue
            if (corners.min() < 0 < corners.max()) or np.any(corners == 0):
                cells.append(BoundaryCell(float(se_grid[i]), float(se_grid[i + 1]),
                                          float(sp_grid[j]), float(sp_grid[j + 1])))
    return sorted(cells)
