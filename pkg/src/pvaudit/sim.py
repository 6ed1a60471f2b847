"""Seeded simulation of literatures with selective reporting and analysis search.

Draw addressing
---------------
Reproducibility here means every random number has a fixed address. The
generator is counter-based (Philox, 4x64): the key is the user seed and the
counter starts at ``(0, 0, replicate_index, 0)``, so replicate r always reads
the same stream regardless of how many replicates run or in what order.
Within a replicate, study j consumes a fixed block of ``hack_k + 2`` uniform
draws in order:

1. one draw deciding whether the study carries a real effect,
2. ``hack_k`` draws converted to z-statistics (a study "tries" hack_k
   analyses and reports the smallest p, which is what an analysis search
   amounts to),
3. one draw deciding whether a non-significant result is withheld.

Every draw is consumed whether or not its branch is taken, so changing one
parameter never shifts another study's randomness. The whole scheme is
echoed into the simulation report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtr, ndtri

from .diagnostics import ShapeThresholds, ShapeVerdict, classify_pvalues

RNG_ALGORITHM = "philox4x64"
RNG_COUNTER_LAYOUT = "(0, 0, replicate_index, 0)"
SIGNIFICANCE = 0.05

# Keep uniforms strictly inside (0, 1) before the normal quantile transform;
# the generator emits multiples of 2**-53, so only an exact zero needs lifting.
_U_MIN = 2.0 ** -53


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one simulated literature experiment.

    n_studies per replicate; effect_fraction of them drawn around a real
    effect of size noncentrality (on the z scale); censor_rate is the
    probability that a study with p > 0.05 is never reported; hack_k is how
    many analyses each study tries before reporting its best p.
    """

    n_studies: int
    effect_fraction: float = 0.0
    noncentrality: float = 0.0
    censor_rate: float = 0.0
    hack_k: int = 1
    seed: int = 0
    replicates: int = 1

    def __post_init__(self) -> None:
        if self.n_studies < 1:
            raise ValueError(f"n_studies must be at least 1, got {self.n_studies}")
        if not 0.0 <= self.effect_fraction <= 1.0:
            raise ValueError(
                f"effect_fraction must lie in [0, 1], got {self.effect_fraction!r}"
            )
        if not math.isfinite(self.noncentrality):
            raise ValueError("noncentrality must be finite")
        if not 0.0 <= self.censor_rate <= 1.0:
            raise ValueError(
                f"censor_rate must lie in [0, 1], got {self.censor_rate!r}"
            )
        if self.hack_k < 1:
            raise ValueError(f"hack_k must be at least 1, got {self.hack_k}")
        if not 0 <= self.seed < 2 ** 128:
            raise ValueError("seed must be a non-negative integer below 2**128")
        if self.replicates < 1:
            raise ValueError(f"replicates must be at least 1, got {self.replicates}")


@dataclass(frozen=True)
class ReplicateOutcome:
    index: int
    pvalues: tuple[float, ...]
    suppressed: int
    verdict: ShapeVerdict


@dataclass(frozen=True)
class SimOutcome:
    """All replicates of one experiment plus the aggregate table."""

    config: SimConfig
    replicates: tuple[ReplicateOutcome, ...]
    verdict_counts: dict[str, int]
    mean_suppressed_fraction: float
    ks_rejection_rate: float


def greenwald_censor_rate(hack_k: int = 1, ratio: float = 10.0) -> float:
    """Censor rate putting withheld negative studies at ``ratio`` times the
    reported positive ones, in expectation under the null.

    With k analyses per study the chance of a significant best p under the
    null is s = 1 - 0.95**k. Every significant study is reported; a
    non-significant one is withheld with probability c, so the expected
    withheld-negative to reported-positive ratio is (1-s)c : s. Solving for
    the classic ten-to-one asymmetry gives c = ratio * s / (1 - s), clamped
    to 1 (10/19 for a single analysis; already saturated at two).
    """
    if hack_k < 1:
        raise ValueError(f"hack_k must be at least 1, got {hack_k}")
    if ratio <= 0:
        raise ValueError(f"ratio must be positive, got {ratio!r}")
    s = 1.0 - 0.95 ** hack_k
    return min(1.0, ratio * s / (1.0 - s))


def _uniform_block(cfg: SimConfig, replicate_index: int) -> np.ndarray:
    """The (n_studies, hack_k + 2) matrix of uniforms for one replicate."""
    if replicate_index < 0:
        raise ValueError(f"replicate_index must be non-negative, got {replicate_index}")
    bitgen = Philox(key=cfg.seed, counter=[0, 0, replicate_index, 0])
    rng = Generator(bitgen)
    u = rng.random((cfg.n_studies, cfg.hack_k + 2))
    return np.maximum(u, _U_MIN)


def _simulate_replicate(
    cfg: SimConfig, replicate_index: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reported mask, best p per study, and the signed z behind each best p."""
    u = _uniform_block(cfg, replicate_index)
    has_effect = u[:, 0] < cfg.effect_fraction
    z = ndtri(u[:, 1 : 1 + cfg.hack_k])
    z = z + np.where(has_effect, cfg.noncentrality, 0.0)[:, None]
    p_all = 2.0 * ndtr(-np.abs(z))
    best = np.argmin(p_all, axis=1)
    rows = np.arange(cfg.n_studies)
    p = p_all[rows, best]
    z_best = z[rows, best]
    censor_draw = u[:, 1 + cfg.hack_k]
    suppressed = (p > SIGNIFICANCE) & (censor_draw < cfg.censor_rate)
    return ~suppressed, p, z_best


def generate_literature(cfg: SimConfig, replicate_index: int = 0) -> list[float]:
    """The reported p-values of one replicate, in study order."""
    reported, p, _ = _simulate_replicate(cfg, replicate_index)
    return [float(v) for v in p[reported]]


def generate_study_effects(
    cfg: SimConfig,
    replicate_index: int = 0,
    *,
    se: float = 0.05,
    direction: int = 1,
) -> list[tuple[float, float]]:
    """Reported (rr, p) pairs of one replicate, for volcano-style views.

    Each study's best z is mapped to a risk ratio ``1 + direction * se * z``,
    the same linear-scale relation the derivation module inverts. The same
    draw addresses are used as :func:`generate_literature`, so the p-values
    agree draw for draw.
    """
    if se <= 0:
        raise ValueError(f"se must be positive, got {se!r}")
    if direction not in (1, -1):
        raise ValueError(f"direction must be +1 or -1, got {direction!r}")
    reported, p, z_best = _simulate_replicate(cfg, replicate_index)
    rr = 1.0 + direction * se * z_best
    return [
        (float(r), float(q)) for r, q in zip(rr[reported], p[reported])
    ]


def run_experiment(
    cfg: SimConfig, thresholds: ShapeThresholds | None = None
) -> SimOutcome:
    """Run every replicate, classify each reported literature, and aggregate.

    Replicates whose reported set is too small to test (< 5 values) count as
    indeterminate and do not enter the KS rejection rate denominator.
    """
    outcomes = []
    counts = {verdict: 0 for verdict in
              ("uniform_null", "significant_effect", "bilinear_mixture", "indeterminate")}
    suppressed_fracs = []
    ks_total = 0
    ks_rejected = 0
    for r in range(cfg.replicates):
        reported, p, _ = _simulate_replicate(cfg, r)
        kept = p[reported]
        verdict = classify_pvalues(kept, thresholds)
        n_suppressed = int(cfg.n_studies - kept.size)
        outcomes.append(
            ReplicateOutcome(
                index=r,
                pvalues=tuple(float(v) for v in kept),
                suppressed=n_suppressed,
                verdict=verdict,
            )
        )
        counts[verdict.verdict] += 1
        suppressed_fracs.append(n_suppressed / cfg.n_studies)
        if kept.size >= 5:
            ks_total += 1
            if verdict.ks_pvalue < SIGNIFICANCE:
                ks_rejected += 1
    return SimOutcome(
        config=cfg,
        replicates=tuple(outcomes),
        verdict_counts=counts,
        mean_suppressed_fraction=float(np.mean(suppressed_fracs)),
        ks_rejection_rate=(ks_rejected / ks_total) if ks_total else 0.0,
    )
