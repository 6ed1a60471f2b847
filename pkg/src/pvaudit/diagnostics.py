"""Diagnostic plot series and automated shape reading for a set of p-values.

A collection of two-sided p-values from a single literature is examined three
ways: sorted against rank (where a uniform null is a straight diagonal and a
mixture of null and real effects bends into two regimes), on a -log10
expectation plot against the uniform order statistics, and as a volcano of
effect size against -log10 p. The shape classifier makes the reading
explicit: it fits one line and the best continuous two-segment line to the
sorted p-values and turns the comparison, plus a Kolmogorov-Smirnov
uniformity check, into one of four verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import kolmogorov

from .model import Dataset
from .stats import loo_influence, effects_from_dataset

PLOT_KINDS = ("pvalue_rank", "expectation", "volcano")
VERDICTS = ("uniform_null", "significant_effect", "bilinear_mixture", "indeterminate")
FLAG_REASONS = ("extreme_p", "high_influence", "manual")


@dataclass(frozen=True)
class ReferenceLine:
    """A dashed guide: ``expected_order`` (slope, intercept) on the expectation
    plot's -log10 scale, or ``smallest_p_marker`` with the single value
    -log10(1/(n+1))."""

    kind: str
    parameters: tuple[float, ...]


@dataclass(frozen=True)
class PlotSeries:
    """Render-ready points for one diagnostic plot, plus its reference lines."""

    kind: str
    points: tuple[tuple[float, float], ...]
    reference_lines: tuple[ReferenceLine, ...]
    n: int


@dataclass(frozen=True)
class ShapeThresholds:
    """Tuning constants for :func:`classify_pvalues`.

    These cutoffs are this tool's configuration, echoed into reports so a
    verdict can always be traced back to the rules that produced it:

    - ``ks_alpha``, ``slope_band``: a literature is called uniform when the
      KS test does not reject and the fitted slope of sorted p against
      rank/(n+1) is near one.
    - ``small_p``, ``small_p_majority``, ``adequate_rmse``: a literature is
      called significant when most p-values are small and a single line
      already fits the sorted p-values to within ``adequate_rmse`` RMSE.
    - ``bic_evidence``, ``slope_ratio_max``: the two-segment model wins only
      with strong BIC evidence and a left segment much flatter than the
      right.
    - ``min_points``: below this, every verdict is indeterminate.
    """

    ks_alpha: float = 0.05
    slope_band: tuple[float, float] = (0.8, 1.2)
    small_p: float = 0.05
    small_p_majority: float = 0.5
    adequate_rmse: float = 0.05
    bic_evidence: float = 10.0
    slope_ratio_max: float = 0.25
    min_points: int = 10


DEFAULT_THRESHOLDS = ShapeThresholds()


@dataclass(frozen=True)
class ShapeVerdict:
    """Outcome of the shape classification.

    ``breakpoint`` is the rank where the two segments join and is populated
    only when the verdict is ``bilinear_mixture``. Fit fields are reported
    for every verdict so a reader can audit the decision.
    """

    verdict: str
    slope_single: float
    breakpoint: int | None
    sse_single: float
    sse_two_segment: float
    bic_delta: float
    ks_statistic: float
    ks_pvalue: float


@dataclass(frozen=True)
class OutlierFlag:
    row: int
    reason: str


@dataclass(frozen=True)
class OutlierReport:
    """Rows flagged for exclusion, with the thresholds that produced them."""

    flagged: tuple[OutlierFlag, ...]
    p_threshold: float
    influence_threshold: float


def _sorted_pvalues(ds: Dataset) -> list[float]:
    derived = ds.require_ranks()
    return [d.p for d in sorted(derived, key=lambda d: d.rank)]


def smallest_p_marker(n: int) -> float:
    """-log10 of 1/(n+1), the expected magnitude of the smallest of n p-values."""
    if n < 1:
        raise ValueError("marker needs at least one point")
    return -math.log10(1.0 / (n + 1))


def pvalue_plot(ds: Dataset) -> PlotSeries:
    """Sorted p-values against their ranks 1..n. Requires ranks to be assigned."""
    ps = _sorted_pvalues(ds)
    n = len(ps)
    points = tuple((float(i), p) for i, p in enumerate(ps, start=1))
    return PlotSeries(kind="pvalue_rank", points=points, reference_lines=(), n=n)


def expectation_plot(ds: Dataset) -> PlotSeries:
    """Observed -log10 p against expected -log10 of the uniform order statistics.

    Points are emitted in rank order (smallest p last on the x axis is the
    largest expected magnitude, so the first point carries the largest x).
    Reference lines: the identity (slope 1, intercept 0), where a uniform
    sample should fall, and a marker at -log10(1/(n+1)) for the expected
    magnitude of the smallest p-value.
    """
    ps = _sorted_pvalues(ds)
    n = len(ps)
    points = tuple(
        (-math.log10(i / (n + 1.0)), -math.log10(p))
        for i, p in enumerate(ps, start=1)
    )
    refs = (
        ReferenceLine(kind="expected_order", parameters=(1.0, 0.0)),
        ReferenceLine(kind="smallest_p_marker", parameters=(smallest_p_marker(n),)),
    )
    return PlotSeries(kind="expectation", points=points, reference_lines=refs, n=n)


def volcano_plot(ds: Dataset, exclude: tuple[int, ...] = ()) -> PlotSeries:
    """Risk ratio against -log10 p, in source row order.

    ``exclude`` lists 0-based row indices to drop; the smallest-p marker is
    recomputed for the reduced count, so excluding studies moves the line.
    """
    derived = ds.require_derived()
    n_all = len(derived)
    excluded = set(exclude)
    for row in excluded:
        if not 0 <= row < n_all:
            raise ValueError(f"exclude index {row} out of range for {n_all} rows")
    points = tuple(
        (rec.rr, -math.log10(d.p))
        for i, (rec, d) in enumerate(zip(ds.records, derived))
        if i not in excluded
    )
    n = len(points)
    if n == 0:
        raise ValueError("volcano plot needs at least one remaining row")
    refs = (ReferenceLine(kind="smallest_p_marker", parameters=(smallest_p_marker(n),)),)
    return PlotSeries(kind="volcano", points=points, reference_lines=refs, n=n)


def ks_uniform(pvalues) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov test of the values against Uniform(0, 1).

    Parameters
    ----------
    pvalues : sequence of float
        At least five values, each in (0, 1].

    Returns
    -------
    (statistic, pvalue)
        The exact ECDF sup-distance D and the asymptotic tail probability of
        the Kolmogorov distribution at ``sqrt(n) * D``. The asymptotic tail
        is slightly conservative at small n.
    """
    ps = np.asarray(list(pvalues), dtype=float)
    n = ps.size
    if n < 5:
        raise ValueError(f"KS test needs at least 5 values, got {n}")
    if not np.all((ps > 0.0) & (ps <= 1.0)):
        raise ValueError("KS test requires every value in (0, 1]")
    u = np.sort(ps)
    i = np.arange(1, n + 1, dtype=float)
    d_plus = np.max(i / n - u)
    d_minus = np.max(u - (i - 1.0) / n)
    d = float(max(d_plus, d_minus))
    pvalue = float(kolmogorov(math.sqrt(n) * d))
    return d, pvalue


def _line_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares line y ~ a + b x; returns (intercept, slope, sse)."""
    design = np.column_stack([np.ones_like(x), x])
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(coef[0]), float(coef[1]), float(resid @ resid)


def _two_segment_fit(x: np.ndarray, y: np.ndarray) -> tuple[int, float, float, float]:
    """Best continuous two-segment fit with the join at an interior rank.

    The model is ``y = a + s1 * min(x - xb, 0) + s2 * max(x - xb, 0)`` with
    the join ``xb`` placed at each candidate rank b in 2..n-2 (so both
    segments keep at least two points), solved by least squares at each
    candidate. Returns (breakpoint rank, left slope, right slope, sse) of
    the best candidate; earlier ranks win ties.
    """
    n = x.size
    best: tuple[int, float, float, float] | None = None
    ones = np.ones_like(x)
    for b in range(2, n - 1):
        xb = x[b - 1]
        design = np.column_stack(
            [ones, np.minimum(x - xb, 0.0), np.maximum(x - xb, 0.0)]
        )
        coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ coef
        sse = float(resid @ resid)
        if best is None or sse < best[3]:
            best = (b, float(coef[1]), float(coef[2]), sse)
    assert best is not None
    return best


def classify_pvalues(pvalues, thresholds: ShapeThresholds | None = None) -> ShapeVerdict:
    """Classify the shape of sorted p-values against rank.

    The sorted p-values are regressed on the normalized ranks i/(n+1). The
    rules fire in a fixed order:

    1. ``uniform_null`` when the KS test does not reject uniformity at
       ``ks_alpha`` and the single-line slope lies within ``slope_band``.
    2. ``significant_effect`` when at least ``small_p_majority`` of the
       values fall below ``small_p`` and one line fits with RMSE at most
       ``adequate_rmse`` (a saturated literature is linear on this plot,
       just not on the diagonal).
    3. ``bilinear_mixture`` when the two-segment model beats the line by
       more than ``bic_evidence`` on the BIC scale and its left slope is
       less than ``slope_ratio_max`` of the right slope.
    4. ``indeterminate`` otherwise, and always when n < ``min_points``.

    BIC is ``n*log(SSE/n) + k*log(n)`` with k = 2 for the line and 4 for the
    two-segment model, so ``bic_delta = n*log(SSE1/SSE2) - 2*log(n)``.
    """
    t = thresholds or DEFAULT_THRESHOLDS
    ps = np.sort(np.asarray(list(pvalues), dtype=float))
    n = int(ps.size)
    if n > 0 and not (np.all(ps > 0.0) and np.all(ps <= 1.0)):
        raise ValueError("classification requires every p-value in (0, 1]")

    slope = 0.0
    sse1 = 0.0
    if n >= 2:
        x = np.arange(1, n + 1, dtype=float) / (n + 1.0)
        _, slope, sse1 = _line_fit(x, ps)

    breakpoint_rank: int | None = None
    left = right = 0.0
    sse2 = sse1
    if n >= 5:
        breakpoint_rank, left, right, sse2 = _two_segment_fit(x, ps)
        # The line is nested in the two-segment model; clamp float noise so
        # the inequality holds exactly.
        sse2 = min(sse2, sse1)

    tiny = 1e-300
    bic_delta = (
        n * math.log(max(sse1, tiny) / max(sse2, tiny)) - 2.0 * math.log(n)
        if n >= 5
        else 0.0
    )

    ks_stat, ks_p = (0.0, 1.0)
    if n >= 5:
        ks_stat, ks_p = ks_uniform(ps)

    verdict = "indeterminate"
    is_bilinear = False
    if n >= t.min_points:
        if ks_p >= t.ks_alpha and t.slope_band[0] <= slope <= t.slope_band[1]:
            verdict = "uniform_null"
        elif (
            float(np.mean(ps < t.small_p)) >= t.small_p_majority
            and math.sqrt(sse1 / n) <= t.adequate_rmse
        ):
            verdict = "significant_effect"
        elif bic_delta > t.bic_evidence and left < t.slope_ratio_max * right:
            verdict = "bilinear_mixture"
            is_bilinear = True

    return ShapeVerdict(
        verdict=verdict,
        slope_single=slope,
        breakpoint=breakpoint_rank if is_bilinear else None,
        sse_single=sse1,
        sse_two_segment=sse2,
        bic_delta=bic_delta,
        ks_statistic=ks_stat,
        ks_pvalue=ks_p,
    )


def classify_shape(ds: Dataset, thresholds: ShapeThresholds | None = None) -> ShapeVerdict:
    """Classify a dataset's derived p-values; see :func:`classify_pvalues`."""
    return classify_pvalues(ds.pvalues, thresholds)


def flag_outliers(
    ds: Dataset,
    p_threshold: float = 1e-3,
    influence_threshold: float = math.inf,
    manual: tuple[int, ...] = (),
    *,
    scale: str = "linear",
) -> OutlierReport:
    """Flag rows for exclusion by extreme p-value, pooling influence, or hand.

    Parameters
    ----------
    ds : Dataset
        With derived stats.
    p_threshold : float
        Rows with p strictly below this are flagged ``extreme_p``. Must lie
        in [0, 1); zero disables the rule (no p can be below zero).
    influence_threshold : float
        Rows whose leave-one-out influence exceeds this are flagged
        ``high_influence``. The default (infinity) disables the rule; it is
        only evaluated when finite and the dataset has at least 3 rows.
    manual : tuple of int
        0-based row indices to flag ``manual``.
    scale : str
        Effect scale for the influence computation; must match the scale the
        stats were derived on.

    Returns
    -------
    OutlierReport
        Flags sorted by row index, one per row. When a row qualifies under
        several rules the reason with the highest precedence wins:
        extreme_p, then high_influence, then manual.
    """
    derived = ds.require_derived()
    n = len(derived)
    if not 0.0 <= p_threshold < 1.0:
        raise ValueError(f"p_threshold must lie in [0, 1), got {p_threshold!r}")
    if math.isnan(influence_threshold):
        raise ValueError("influence_threshold must not be NaN")
    for row in manual:
        if not 0 <= row < n:
            raise ValueError(f"manual index {row} out of range for {n} rows")

    precedence = {"extreme_p": 0, "high_influence": 1, "manual": 2}
    reasons: dict[int, str] = {}

    def claim(row: int, reason: str) -> None:
        held = reasons.get(row)
        if held is None or precedence[reason] < precedence[held]:
            reasons[row] = reason

    for i, d in enumerate(derived):
        if d.p < p_threshold:
            claim(i, "extreme_p")
    if math.isfinite(influence_threshold) and n >= 3:
        influence = loo_influence(effects_from_dataset(ds, scale))
        for i, value in enumerate(influence):
            if value > influence_threshold:
                claim(i, "high_influence")
    for row in manual:
        claim(row, "manual")

    flagged = tuple(
        OutlierFlag(row=row, reason=reasons[row]) for row in sorted(reasons)
    )
    return OutlierReport(
        flagged=flagged,
        p_threshold=p_threshold,
        influence_threshold=influence_threshold,
    )
