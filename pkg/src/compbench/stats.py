"""Paired t-tests with Benjamini-Hochberg correction, OLS score-vs-entropy
fits with 95% slope confidence intervals, and notched box summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as spstats

from .errors import DegenerateInputError, RangeError, UsageError


@dataclass(frozen=True)
class PairedTestResult:
    model_a: str
    model_b: str
    t: float
    df: int
    p_two_sided: float
    p_bh_adjusted: float = float("nan")
    significant: bool = False
    degenerate: bool = False  # sd of differences was zero


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    slope_ci_low: float
    slope_ci_high: float
    r2: float
    n: int


@dataclass(frozen=True)
class BoxSummary:
    median: float
    q1: float
    q3: float
    notch_low: float
    notch_high: float
    whisker_low: float
    whisker_high: float
    n: int


def paired_t(a, b, model_a: str = "a", model_b: str = "b") -> PairedTestResult:
    """Two-sided paired t-test on aligned score vectors.

    Zero-variance differences are degenerate: p = 1 when the means coincide,
    p = 0 (flagged) when they differ exactly.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise UsageError("paired_t needs two aligned 1-d score vectors of length >= 2")
    d = a - b
    n = d.size
    sd = d.std(ddof=1)
    mean = d.mean()
    if sd == 0.0:
        p = 1.0 if mean == 0.0 else 0.0
        return PairedTestResult(
            model_a=model_a, model_b=model_b, t=float("nan"), df=n - 1,
            p_two_sided=p, degenerate=True,
        )
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(spstats.t.sf(abs(t), df=n - 1))
    return PairedTestResult(model_a=model_a, model_b=model_b, t=float(t), df=n - 1, p_two_sided=p)


def bh_correct(pvals) -> np.ndarray:
    """Benjamini-Hochberg adjusted p-values, returned in the input order."""
    p = np.asarray(pvals, dtype=np.float64)
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise RangeError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    ranked = p[order] * m / np.arange(1, m + 1)
    adjusted_sorted = np.minimum.accumulate(ranked[::-1])[::-1]
    adjusted = np.empty(m)
    adjusted[order] = np.minimum(adjusted_sorted, 1.0)
    return adjusted


def apply_bh(results: list[PairedTestResult], q: float = 0.05) -> list[PairedTestResult]:
    adjusted = bh_correct([r.p_two_sided for r in results])
    return [
        PairedTestResult(
            model_a=r.model_a, model_b=r.model_b, t=r.t, df=r.df,
            p_two_sided=r.p_two_sided, p_bh_adjusted=float(adj),
            significant=bool(adj <= q), degenerate=r.degenerate,
        )
        for r, adj in zip(results, adjusted)
    ]


def ols_fit(x, y, confidence: float = 0.95) -> RegressionFit:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n < 3 or x.shape != y.shape:
        raise UsageError("ols_fit needs aligned vectors of length >= 3")
    sxx = ((x - x.mean()) ** 2).sum()
    if sxx == 0.0:
        raise DegenerateInputError("constant regressor: slope undefined")
    slope = ((x - x.mean()) * (y - y.mean())).sum() / sxx
    intercept = y.mean() - slope * x.mean()
    resid = y - (intercept + slope * x)
    sse = (resid**2).sum()
    sst = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 if sst == 0.0 else 1.0 - sse / sst
    se = math.sqrt(sse / (n - 2) / sxx)
    tcrit = float(spstats.t.ppf(0.5 + confidence / 2.0, df=n - 2))
    return RegressionFit(
        slope=float(slope), intercept=float(intercept),
        slope_ci_low=float(slope - tcrit * se), slope_ci_high=float(slope + tcrit * se),
        r2=float(max(0.0, min(1.0, r2))), n=int(n),
    )


def _quartiles(sorted_scores: np.ndarray) -> tuple[float, float, float]:
    # linear-interpolation "inclusive" quantile method
    q1, med, q3 = np.quantile(sorted_scores, [0.25, 0.5, 0.75], method="linear")
    return float(q1), float(med), float(q3)


def box_summary(scores) -> BoxSummary:
    scores = np.sort(np.asarray(scores, dtype=np.float64))
    n = scores.size
    if n < 1:
        raise UsageError("box_summary needs at least one score")
    q1, med, q3 = _quartiles(scores)
    iqr = q3 - q1
    notch = 1.57 * iqr / math.sqrt(n)
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = scores[(scores >= lo_fence) & (scores <= hi_fence)]
    return BoxSummary(
        median=med, q1=q1, q3=q3,
        notch_low=med - notch, notch_high=med + notch,
        whisker_low=float(inside[0]), whisker_high=float(inside[-1]), n=int(n),
    )
