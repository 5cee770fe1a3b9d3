"""Practitioner guidance from a fitted error law.

The headline rule: pick the most flexible grid (largest M) whose q-quantile
of the max error stays below a tolerance for the available sample size.
Defaults (tolerance 0.03 at the 90% quantile) are configurable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from scipy.special import ndtri

from .errorlaw import LognormalErrorLaw

EVENTS_PER_SEASON = 620_000

# grids wider than 2:1 stop being useful pitch partitions; the factor
# search below only considers aspect ratios in [1, 2]
_MAX_ASPECT = 2.0
_TARGET_ASPECT = 4.0 / 3.0


class InsufficientDataError(ValueError):
    """No grid of even a single state meets the requested error bar."""

    def __init__(self, n: int, n_required: int, threshold: float, quantile: float):
        self.n = n
        self.n_required = n_required
        super().__init__(
            f"insufficient data for any grid: with N={n} the {quantile:.0%} error "
            f"quantile exceeds {threshold} even at M=1; need N >= {n_required}"
        )


@dataclass(frozen=True)
class Recommendation:
    m_max: int
    suggested_shape: tuple[int, int]
    threshold: float
    quantile: float
    quantile_at_m_max: float
    n: int
    law: LognormalErrorLaw

    def as_dict(self) -> dict:
        return {
            "m_max": self.m_max,
            "suggested_shape": {"nx": self.suggested_shape[0], "ny": self.suggested_shape[1]},
            "threshold": self.threshold,
            "quantile": self.quantile,
            "quantile_at_m_max": self.quantile_at_m_max,
            "n": self.n,
            "law": self.law.as_dict(),
        }


def max_flexibility(
    law: LognormalErrorLaw, n: int, threshold: float = 0.03, quantile: float = 0.9
) -> Recommendation:
    """Largest M whose error quantile stays below the threshold at sample size n.

    Closed form: the quantile grows monotonically in M, so
    m_max = floor((threshold * exp(-z_q * sigma) * sqrt(n)^beta / e^c)^(1/alpha)),
    then nudged so that quantile(m_max) < threshold <= quantile(m_max + 1)
    holds exactly as computed.
    """
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n}")
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if not 0.0 < quantile < 1.0:
        raise ValueError(f"quantile must lie in (0, 1), got {quantile}")

    z = float(ndtri(quantile))
    m_real = (
        threshold * math.exp(-z * law.sigma) * math.sqrt(n) ** law.beta / math.exp(law.c)
    ) ** (1.0 / law.alpha)
    m_max = max(int(math.floor(m_real)), 0)
    # settle floating-point edge cases against the quantile function itself
    while m_max >= 1 and law.quantile(m_max, n, quantile) >= threshold:
        m_max -= 1
    while law.quantile(m_max + 1, n, quantile) < threshold:
        m_max += 1
    if m_max < 1:
        raise InsufficientDataError(
            n=n,
            n_required=_min_events_for_single_state(law, threshold, quantile),
            threshold=threshold,
            quantile=quantile,
        )
    return Recommendation(
        m_max=m_max,
        suggested_shape=suggest_shape(m_max),
        threshold=threshold,
        quantile=quantile,
        quantile_at_m_max=law.quantile(m_max, n, quantile),
        n=n,
        law=law,
    )


def _min_events_for_single_state(law: LognormalErrorLaw, threshold: float, quantile: float) -> int:
    z = float(ndtri(quantile))
    n_real = math.exp(2.0 * (law.c + z * law.sigma - math.log(threshold)) / law.beta)
    n_req = max(int(math.ceil(n_real)), 1)
    while n_req > 1 and law.quantile(1, n_req - 1, quantile) < threshold:
        n_req -= 1
    while law.quantile(1, n_req, quantile) >= threshold:
        n_req += 1
    return n_req


def describe_model(
    law: LognormalErrorLaw, m: int, n: int, thresholds: Sequence[float] = (0.03,)
) -> dict:
    """Error-distribution summary for an existing model configuration."""
    if m < 1:
        raise ValueError(f"M must be >= 1, got {m}")
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n}")
    return {
        "m": m,
        "n": n,
        "median": law.quantile(m, n, 0.5),
        "q10": law.quantile(m, n, 0.1),
        "q50": law.quantile(m, n, 0.5),
        "q90": law.quantile(m, n, 0.9),
        "prob_below": {repr(t): law.prob_below(m, n, t) for t in thresholds},
    }


def suggest_shape(m_max: int) -> tuple[int, int]:
    """Best (n_x, n_y) with n_x * n_y <= m_max.

    Maximizes the cell count over pairs with aspect ratio n_x/n_y in
    [1, 2], breaking ties toward the 4:3 family. The ratio band is what
    keeps the answer a usable pitch grid (otherwise (m_max, 1) would
    always win).
    """
    if m_max < 1:
        raise ValueError(f"m_max must be >= 1, got {m_max}")
    for product in range(m_max, 0, -1):
        best = None
        best_score = float("inf")
        for n_y in range(int(math.isqrt(product)), 0, -1):
            if product % n_y:
                continue
            n_x = product // n_y
            ratio = n_x / n_y
            if ratio > _MAX_ASPECT:
                break  # ratios only grow as n_y shrinks
            score = abs(ratio - _TARGET_ASPECT)
            if score < best_score:
                best, best_score = (n_x, n_y), score
        if best is not None:
            return best
    return (1, 1)


def seasons_to_events(seasons: float) -> int:
    """Convert league seasons to an event count (one season ~ 620k events)."""
    if seasons <= 0:
        raise ValueError(f"seasons must be positive, got {seasons}")
    return round(seasons * EVENTS_PER_SEASON)


def quantile_curve(
    law: LognormalErrorLaw, n: int, m_hi: int, levels: Sequence[float] = (0.1, 0.5, 0.9)
) -> list[tuple]:
    """Rows (m, quantile per level) for m = 1..m_hi, for plotting."""
    return [(m, *(law.quantile(m, n, q) for q in levels)) for m in range(1, m_hi + 1)]
