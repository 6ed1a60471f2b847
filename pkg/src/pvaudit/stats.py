"""Numerical core: normal tails, interval-to-p reconstruction, ranking, pooling.

The conversion from a reported risk ratio and confidence interval back to a
test statistic follows the standard two-step recipe: recover the standard
error from the interval width, then form z as the distance of the estimate
from the null divided by that standard error. By default the critical value
is the tabulated constant 1.96 (not the exact 97.5% quantile) and the
arithmetic stays on the linear RR scale, which is how such intervals are
usually unwound in practice; both choices can be overridden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from scipy.special import ndtri

from .model import Dataset, DerivedStats, StudyRecord

DEFAULT_CRITICAL_VALUE = 1.96
SCALES = ("linear", "log")

# Smallest positive double. A two-sided p can underflow for |z| beyond ~38.6;
# it is clamped here and flagged rather than ever reported as exactly zero.
P_FLOOR = 5e-324

_SQRT2 = math.sqrt(2.0)


def normal_sf(z: float) -> float:
    """Survival function P(Z >= z) of the standard normal.

    Parameters
    ----------
    z : float
        Finite real argument.

    Returns
    -------
    float
        Upper-tail probability, computed as ``0.5 * erfc(z / sqrt(2))``.

    Notes
    -----
    ``math.erfc`` is correctly rounded to within a few ulp, so the relative
    error of this routine stays below 1e-12 across ``|z| <= 8`` and the
    result remains positive (no underflow to zero) out to ``|z|`` around 38.
    """
    if not math.isfinite(z):
        raise ValueError(f"normal_sf requires a finite argument, got {z!r}")
    return 0.5 * math.erfc(z / _SQRT2)


def two_sided_critical_value(confidence_level: float, exact: bool = False) -> float:
    """Critical value z* matching a two-sided confidence level.

    For the 95% level this returns the tabulated constant 1.96 unless
    ``exact`` is set, in which case the exact normal quantile is used.
    Other levels always use the exact quantile.
    """
    if not 0.0 < confidence_level < 1.0:
        raise ValueError(
            f"confidence_level must be in (0, 1), got {confidence_level!r}"
        )
    if not exact and abs(confidence_level - 0.95) < 1e-12:
        return DEFAULT_CRITICAL_VALUE
    return float(ndtri(0.5 + confidence_level / 2.0))


def derive_stats(
    rec: StudyRecord,
    confidence_level: float = 0.95,
    *,
    critical_value: float | None = None,
    scale: str = "linear",
) -> DerivedStats:
    """Reconstruct se, z, and the two-sided p-value from one record's interval.

    Parameters
    ----------
    rec : StudyRecord
        Record with a positive risk ratio and confidence limits that bracket it.
    confidence_level : float
        Level of the reported interval; sets the critical value unless
        ``critical_value`` is given explicitly.
    critical_value : float, optional
        Override for z*. When omitted, :func:`two_sided_critical_value` is
        used (1.96 at the 95% level).
    scale : str
        ``"linear"`` works with the interval width as printed and tests
        ``rr - 1``; ``"log"`` takes logs of the limits first and tests
        ``log(rr)``.

    Returns
    -------
    DerivedStats
        With ``rank`` unset. ``p_floored`` is True when the p-value was
        clamped at the smallest positive double.
    """
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {SCALES}, got {scale!r}")
    zstar = (
        critical_value
        if critical_value is not None
        else two_sided_critical_value(confidence_level)
    )
    if not zstar > 0:
        raise ValueError(f"critical value must be positive, got {zstar!r}")
    if scale == "linear":
        width = rec.cl_high - rec.cl_low
        effect = rec.rr - 1.0
    else:
        width = math.log(rec.cl_high) - math.log(rec.cl_low)
        effect = math.log(rec.rr)
    if not width > 0:
        raise ValueError(
            f"interval for {rec.author} {rec.year} has non-positive width"
        )
    se = width / (2.0 * zstar)
    z = effect / se
    p = 2.0 * normal_sf(abs(z))
    floored = p <= 0.0
    if floored:
        p = P_FLOOR
    return DerivedStats(se=se, z=z, p=p, p_floored=floored)


def derive_dataset(
    ds: Dataset,
    *,
    critical_value: float | None = None,
    scale: str = "linear",
) -> Dataset:
    """Derive stats for every record, preserving row order. Ranks stay unset."""
    derived = tuple(
        derive_stats(
            rec,
            ds.confidence_level,
            critical_value=critical_value,
            scale=scale,
        )
        for rec in ds.records
    )
    return ds.with_derived(derived)


def rank_pvalues(ds: Dataset) -> Dataset:
    """Assign ranks 1..n by ascending p-value, ties broken by row index.

    Idempotent: re-ranking an already ranked dataset reproduces the same
    ranks. Returns a new Dataset; the input is untouched.
    """
    derived = list(ds.require_derived())
    order = sorted(range(len(derived)), key=lambda i: (derived[i].p, i))
    for rank, i in enumerate(order, start=1):
        derived[i] = replace(derived[i], rank=rank)
    return ds.with_derived(tuple(derived))


def effects_from_dataset(ds: Dataset, scale: str = "linear") -> list[tuple[float, float]]:
    """Per-study (effect, se) pairs for pooling: (rr - 1, se) or (log rr, se).

    The scale must match the one used when the stats were derived, since the
    stored standard errors live on that scale.
    """
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {SCALES}, got {scale!r}")
    derived = ds.require_derived()
    if scale == "linear":
        return [(rec.rr - 1.0, d.se) for rec, d in zip(ds.records, derived)]
    return [(math.log(rec.rr), d.se) for rec, d in zip(ds.records, derived)]


@dataclass(frozen=True)
class PoolResult:
    """Fixed- and random-effects summary of k (effect, se) pairs.

    ``weights_fixed`` and ``weights_normalized`` counterparts each sum to one.
    ``tau2`` is the moment estimate of between-study variance, clamped at
    zero, and ``i2`` the familiar heterogeneity fraction in [0, 1).
    """

    k: int
    fixed_mean: float
    q: float
    tau2: float
    random_mean: float
    random_se: float
    i2: float
    weights_fixed: tuple[float, ...]
    weights_random: tuple[float, ...]


def pool_dl(effects: Sequence[tuple[float, float]]) -> PoolResult:
    """Random-effects pooling by the moment (DerSimonian-Laird) estimator.

    Parameters
    ----------
    effects : sequence of (estimate, se)
        At least two studies; every se must be positive and finite.

    Returns
    -------
    PoolResult

    Notes
    -----
    With inverse-variance weights ``w_i = 1/se_i^2``:

    - fixed mean  = sum(w y) / sum(w)
    - Q           = sum(w (y - fixed)^2)
    - tau^2       = max(0, (Q - (k-1)) / (sum(w) - sum(w^2)/sum(w)))
    - random weights ``1/(se_i^2 + tau^2)`` give the random mean and its
      standard error ``(sum w*)^(-1/2)``
    - I^2         = max(0, (Q - (k-1)) / Q), zero when Q is zero.

    A homogeneous set (Q <= k-1) collapses to the fixed-effect answer with
    ``tau2 == 0``. Sums are accumulated with ``math.fsum`` so results do not
    depend on summation order beyond honest rounding.
    """
    pairs = [(float(y), float(s)) for y, s in effects]
    k = len(pairs)
    if k < 2:
        raise ValueError(f"pooling needs at least two studies, got {k}")
    for i, (y, s) in enumerate(pairs):
        if not (math.isfinite(y) and math.isfinite(s)):
            raise ValueError(f"study {i}: non-finite effect or se")
        if not s > 0:
            raise ValueError(f"study {i}: se must be positive, got {s!r}")
    w = [1.0 / (s * s) for _, s in pairs]
    sw = math.fsum(w)
    fixed = math.fsum(wi * y for wi, (y, _) in zip(w, pairs)) / sw
    q = math.fsum(wi * (y - fixed) ** 2 for wi, (y, _) in zip(w, pairs))
    sw2 = math.fsum(wi * wi for wi in w)
    denom = sw - sw2 / sw
    tau2 = max(0.0, (q - (k - 1)) / denom) if denom > 0 else 0.0
    wr = [1.0 / (s * s + tau2) for _, s in pairs]
    swr = math.fsum(wr)
    random_mean = math.fsum(wi * y for wi, (y, _) in zip(wr, pairs)) / swr
    random_se = swr ** -0.5
    i2 = max(0.0, (q - (k - 1)) / q) if q > 0 else 0.0
    return PoolResult(
        k=k,
        fixed_mean=fixed,
        q=q,
        tau2=tau2,
        random_mean=random_mean,
        random_se=random_se,
        i2=i2,
        weights_fixed=tuple(wi / sw for wi in w),
        weights_random=tuple(wi / swr for wi in wr),
    )


def loo_influence(effects: Sequence[tuple[float, float]]) -> list[float]:
    """Leave-one-out influence of each study on the random-effects mean.

    For each study i the pooled mean is recomputed without it (tau^2
    re-estimated on the reduced set) and the absolute shift is expressed in
    units of the full-set random-effects standard error. Needs k >= 3 so
    every leave-one-out subset can still be pooled.
    """
    pairs = list(effects)
    k = len(pairs)
    if k < 3:
        raise ValueError(f"influence needs at least three studies, got {k}")
    full = pool_dl(pairs)
    out = []
    for i in range(k):
        rest = pairs[:i] + pairs[i + 1 :]
        dropped = pool_dl(rest)
        out.append(abs(full.random_mean - dropped.random_mean) / full.random_se)
    return out
