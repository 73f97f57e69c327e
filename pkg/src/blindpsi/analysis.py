"""Statistics for the blindness checks: per-position uniformity and two-sample tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .transport import Kind, Transcript


def histogram(values, k: int = 8) -> np.ndarray:
    return np.bincount(np.asarray(values, dtype=np.int64).ravel(), minlength=k)


def uniformity_pvalue(values, k: int = 8) -> float:
    """Pearson chi-square p-value against the uniform distribution on ``k`` cells."""
    return float(stats.chisquare(histogram(values, k)).pvalue)


def two_sample_pvalue(a, b, k: int = 8) -> float:
    """Chi-square test of homogeneity for two samples over ``k`` cells."""
    table = np.vstack([histogram(a, k), histogram(b, k)])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 1.0
    return float(stats.chi2_contingency(table, correction=False).pvalue)


def deltas_by_position(transcript: Transcript) -> dict:
    """``qubit label -> array of delta values`` from the retained DELTA messages."""
    out = {}
    for msg in transcript.of_kind(Kind.DELTA):
        out[msg.payload["qubit"]] = np.asarray(msg.payload["value"], dtype=np.int64)
    return out


@dataclass
class BlindnessReport:
    positions: int
    tests: int
    min_p_uniform: float
    min_p_two_sample: float
    threshold: float
    histograms: dict

    @property
    def min_p_adjusted(self) -> float:
        return min(1.0, min(self.min_p_uniform, self.min_p_two_sample) * self.tests)

    @property
    def passed(self) -> bool:
        return self.min_p_adjusted > self.threshold


def blindness_statistics(run_a: dict, run_b: dict, threshold: float = 0.01) -> BlindnessReport:
    """Uniformity of every position in both runs plus a two-sample test per position.

    The smallest p-value is Bonferroni-adjusted by the total number of tests
    before comparison with ``threshold``.
    """
    if run_a.keys() != run_b.keys():
        raise ValueError("runs cover different positions")
    p_uni, p_two = [], []
    hists = {}
    for pos in run_a:
        p_uni += [uniformity_pvalue(run_a[pos]), uniformity_pvalue(run_b[pos])]
        p_two.append(two_sample_pvalue(run_a[pos], run_b[pos]))
        hists[pos] = (histogram(run_a[pos]).tolist(), histogram(run_b[pos]).tolist())
    return BlindnessReport(
        positions=len(run_a), tests=len(p_uni) + len(p_two),
        min_p_uniform=min(p_uni), min_p_two_sample=min(p_two),
        threshold=threshold, histograms=hists,
    )


def within_sigma(successes: int, trials: int, p: float, n_sigma: float = 3.0) -> bool:
    """Is an observed binomial count within ``n_sigma`` standard deviations of ``trials * p``?"""
    sd = np.sqrt(trials * p * (1 - p))
    return abs(successes - trials * p) <= n_sigma * sd
