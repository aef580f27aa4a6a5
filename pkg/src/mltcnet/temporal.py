"""Which condition of a pair comes first, and how far apart the diagnoses are."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from ._fmt import pct
from .catalog import Stratum


class Precedence(str, Enum):
    A_PRECEDES_B = "A_precedes_B"
    B_PRECEDES_A = "B_precedes_A"
    NONE = "no_clear_precedence"

    def flipped(self) -> "Precedence":
        if self is Precedence.A_PRECEDES_B:
            return Precedence.B_PRECEDES_A
        if self is Precedence.B_PRECEDES_A:
            return Precedence.A_PRECEDES_B
        return self


@dataclass(frozen=True)
class TemporalSummary:
    a_first: int
    b_first: int
    ties: int
    precedence: Precedence
    directionality_freq: int
    directionality_pct: float
    median_duration_years: float
    q1_duration_years: float
    q3_duration_years: float

    @property
    def pair_freq(self) -> int:
        return self.a_first + self.b_first + self.ties

    def swapped(self) -> "TemporalSummary":
        return TemporalSummary(
            self.b_first, self.a_first, self.ties, self.precedence.flipped(),
            self.directionality_freq, self.directionality_pct,
            self.median_duration_years, self.q1_duration_years, self.q3_duration_years,
        )


def quantiles(values: Sequence[float], probs: Sequence[float]) -> list[float]:
    """Linear interpolation between closest ranks (numpy's default method)."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("quantiles of an empty sample")
    return [float(q) for q in np.quantile(arr, probs, method="linear")]


def pair_ages(stratum: Stratum, cond_a: str, cond_b: str) -> tuple[np.ndarray, np.ndarray]:
    """Ages of A and B for members who have both diagnoses inside the band."""
    ages_a, ages_b = [], []
    for pid in stratum.members:
        ev = stratum.events[pid]
        if cond_a in ev and cond_b in ev:
            ages_a.append(ev[cond_a])
            ages_b.append(ev[cond_b])
    return np.asarray(ages_a, dtype=float), np.asarray(ages_b, dtype=float)


def direction_counts(ages_a: np.ndarray, ages_b: np.ndarray) -> tuple[int, int, int]:
    diff = ages_b - ages_a
    return int((diff > 0).sum()), int((diff < 0).sum()), int((diff == 0).sum())


def summarize_ages(ages_a: np.ndarray, ages_b: np.ndarray) -> TemporalSummary:
    """Direction counts and duration quartiles from paired ages (same patient order)."""
    if len(ages_a) == 0:
        raise ValueError("temporal summary needs pair_freq >= 1")
    a_first, b_first, ties = direction_counts(ages_a, ages_b)
    total = a_first + b_first + ties
    if a_first > b_first:
        prec, freq = Precedence.A_PRECEDES_B, a_first
    elif b_first > a_first:
        prec, freq = Precedence.B_PRECEDES_A, b_first
    else:
        # convention: the whole pair, 100.00
        prec, freq = Precedence.NONE, total
    q1, med, q3 = quantiles(np.abs(ages_b - ages_a), (0.25, 0.5, 0.75))
    return TemporalSummary(a_first, b_first, ties, prec, freq, pct(freq, total), med, q1, q3)


def pair_directionality(stratum: Stratum, cond_a: str, cond_b: str) -> TemporalSummary:
    return summarize_ages(*pair_ages(stratum, cond_a, cond_b))


def duration_stats(stratum: Stratum, cond_a: str, cond_b: str) -> tuple[float, float, float]:
    """(median, q1, q3) of |age_B - age_A| over co-occurring members."""
    ages_a, ages_b = pair_ages(stratum, cond_a, cond_b)
    q1, med, q3 = quantiles(np.abs(ages_b - ages_a), (0.25, 0.5, 0.75))
    return med, q1, q3


def precedence_label(
    summary: TemporalSummary, cond_a: str, cond_b: str, threshold_pct: float = 70.0
) -> str | None:
    """A prose-level "X precedes Y" claim, only above ``threshold_pct`` (strict)."""
    if summary.precedence is Precedence.NONE or not summary.directionality_pct > threshold_pct:
        return None
    first, second = (
        (cond_a, cond_b) if summary.precedence is Precedence.A_PRECEDES_B else (cond_b, cond_a)
    )
    return f"{first} precedes {second}"
