"""Latent population and the care-seeking study table.

The study table has twelve cells.  Columns are target-pathogen positive,
other-pathogen positive and not positive, split by whether the person sought
care for an acute respiratory illness (ARI).  Rows are vaccination arms::

                  seek care            do not seek care
                  tgt  oth  neg  tot   tgt  oth  neg  tot
    vaccinated     A    B    C   N1     D    E    F   N2
    unvaccinated   G    H    I   N3     J    K    L   N4
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError

ARMS = ("vaccinated", "unvaccinated")
CATEGORIES = ("target", "other", "uninfected")

# absolute slack for row-sum checks, scaled by the row total
ROW_SUM_RTOL = 1e-9


def _default_care():
    return {(arm, cat): 1.0 for arm in ARMS for cat in CATEGORIES}


def _as_rng(seed):
    if seed is None:
        return None
    return np.random.default_rng(seed)


def _check_integral(name, value):
    if value != math.floor(value):
        raise InvalidInputError(
            f"{name}={value!r} must be a whole number in stochastic mode")


@dataclass(frozen=True)
class LatentPopulation:
    """Ground-truth counts per arm and infection category.

    ``care_seek_prob`` maps ``(arm, category)`` to the probability that a
    person in that cell seeks care.  Missing keys default to 1.0.
    """

    vaccinated_target: float
    vaccinated_other: float
    vaccinated_uninfected: float
    unvaccinated_target: float
    unvaccinated_other: float
    unvaccinated_uninfected: float
    care_seek_prob: dict = field(default_factory=_default_care)

    def __post_init__(self):
        care = _default_care()
        for key, q in dict(self.care_seek_prob).items():
            if key not in care:
                raise InvalidInputError(f"unknown care-seeking cell {key!r}")
            care[key] = float(q)
        object.__setattr__(self, "care_seek_prob", care)

        for arm in ARMS:
            for cat in CATEGORIES:
                n = self.count(arm, cat)
                if not (math.isfinite(n) and n >= 0):
                    raise InvalidInputError(f"{arm}_{cat}={n!r} must be a finite count >= 0")
                q = care[arm, cat]
                if not 0.0 <= q <= 1.0:
                    raise InvalidInputError(
                        f"care_seek_prob[{arm}, {cat}]={q!r} outside [0, 1]")

    def count(self, arm, category):
        return getattr(self, f"{arm}_{category}")

    def arm_total(self, arm):
        return sum(self.count(arm, cat) for cat in CATEGORIES)

    @classmethod
    def from_prevalences(cls, n_vax, n_unvax, p_vax, p_unvax,
                         other_vax=0.0, other_unvax=0.0, care_seek_prob=None):
        """Split two arms into target / other / uninfected by prevalence."""
        for name, p in (("p_vax", p_vax), ("p_unvax", p_unvax),
                        ("other_vax", other_vax), ("other_unvax", other_unvax)):
            if not 0.0 <= p <= 1.0:
                raise InvalidInputError(f"{name}={p!r} outside [0, 1]")
        if p_vax + other_vax > 1.0 or p_unvax + other_unvax > 1.0:
            raise InvalidInputError("target + other prevalence exceeds 1 in an arm")

        def split(n, p, o):
            tgt, oth = n * p, n * o
            return tgt, oth, n - tgt - oth

        kwargs = {}
        if care_seek_prob is not None:
            kwargs["care_seek_prob"] = care_seek_prob
        return cls(*split(n_vax, p_vax, other_vax),
                   *split(n_unvax, p_unvax, other_unvax), **kwargs)


@dataclass(frozen=True)
class StudyTable:
    A: float
    B: float
    C: float
    D: float
    E: float
    F: float
    G: float
    H: float
    I: float  # noqa: E741
    J: float
    K: float
    L: float
    N1: float
    N2: float
    N3: float
    N4: float

    @classmethod
    def from_cells(cls, A, B, C, D, E, F, G, H, I, J, K, L):  # noqa: E741
        return cls(A, B, C, D, E, F, G, H, I, J, K, L,
                   N1=A + B + C, N2=D + E + F, N3=G + H + I, N4=J + K + L)

    def as_dict(self):
        return dict(self.__dict__)


class TableViolation(NamedTuple):
    kind: str          # "row-sum" or "negative"
    cells: str         # e.g. "A+B+C vs N1 (row 1)"
    discrepancy: float

    def __str__(self):
        return f"{self.kind}: {self.cells} off by {self.discrepancy:g}"


_ROWS = (
    (1, ("A", "B", "C"), "N1"),
    (2, ("D", "E", "F"), "N2"),
    (3, ("G", "H", "I"), "N3"),
    (4, ("J", "K", "L"), "N4"),
)


def validate_table(t):
    """Return every violated StudyTable invariant (empty list if valid)."""
    out = []
    values = t.as_dict()
    for name, v in values.items():
        if not v >= 0:  # also catches NaN
            out.append(TableViolation("negative", name, abs(v) if v == v else math.inf))
    for row, cells, total in _ROWS:
        s = sum(values[c] for c in cells)
        gap = abs(s - values[total])
        if gap > ROW_SUM_RTOL * max(1.0, abs(values[total])):
            out.append(TableViolation(
                "row-sum", f"{'+'.join(cells)} vs {total} (row {row})", gap))
    return out


def build_study_table(pop, seed=None):
    """Split each latent cell into seek-care and not-seek-care counts.

    With ``seed=None`` the split uses exact expectations ``n * q`` (real
    valued).  Otherwise ``seed`` (an int or a ``numpy.random.Generator``)
    drives independent binomial draws per cell, and latent counts must be
    whole numbers.
    """
    rng = _as_rng(seed)
    seek, stay = {}, {}
    for arm in ARMS:
        if pop.arm_total(arm) <= 0:
            raise InvalidInputError(f"{arm} arm is empty")
        for cat in CATEGORIES:
            n = pop.count(arm, cat)
            q = pop.care_seek_prob[arm, cat]
            if rng is None:
                s = n * q
            else:
                _check_integral(f"{arm}_{cat}", n)
                s = int(rng.binomial(int(n), q))
            seek[arm, cat] = s
            stay[arm, cat] = n - s

    v, u = "vaccinated", "unvaccinated"
    return StudyTable.from_cells(
        seek[v, "target"], seek[v, "other"], seek[v, "uninfected"],
        stay[v, "target"], stay[v, "other"], stay[v, "uninfected"],
        seek[u, "target"], seek[u, "other"], seek[u, "uninfected"],
        stay[u, "target"], stay[u, "other"], stay[u, "uninfected"],
    )


def assumption_gap(t):
    """|B/N1 - H/N3|: how far other-pathogen incidence differs between arms
    among care seekers.  Zero is the condition under which the odds-ratio
    form of VE equals the risk-ratio form."""
    if not (t.N1 > 0 and t.N3 > 0):
        raise InvalidInputError(f"assumption gap needs N1, N3 > 0 (got {t.N1}, {t.N3})")
    return abs(t.B / t.N1 - t.H / t.N3)
