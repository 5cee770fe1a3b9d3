"""Probabilistic upper bounds on the sup-norm estimation error of the
value vector.

For a model with M states trained on N events, with transition-matrix max
row sum below 1, the estimation error is bounded with probability at
least 1 - alpha by

    (t_term + g_term) / (1 - t_norm)        (tight form)
    2 * t_term / (1 - t_norm)               (loose form)

where ``t_term = M * sqrt(ln(2 M^2 / alpha) / (2 N))`` accounts for the
transition-matrix estimate and ``g_term = sqrt(ln(2 M / alpha) / (2 N))``
for the shoot-and-score vector. Logs are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BoundInputs:
    m: int
    n: int
    t_norm: float
    alpha: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"M must be >= 1, got {self.m}")
        if self.n < 1:
            raise ValueError(f"N must be >= 1, got {self.n}")
        if not 0.0 <= self.t_norm < 1.0:
            raise ValueError(
                f"t_norm must lie in [0, 1); got {self.t_norm}. The bound assumes the "
                "transition matrix has max row sum strictly below 1."
            )
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class BoundResult:
    tight: float
    loose: float
    t_term: float
    g_term: float

    def as_dict(self) -> dict:
        return {"tight": self.tight, "loose": self.loose, "t_term": self.t_term, "g_term": self.g_term}


def theorem1_bound(inputs: BoundInputs) -> BoundResult:
    """Evaluate both bound forms for the given (M, N, t_norm, alpha)."""
    m = float(inputs.m)
    two_n = 2.0 * float(inputs.n)
    t_term = m * math.sqrt(math.log(2.0 * m * m / inputs.alpha) / two_n)
    g_term = math.sqrt(math.log(2.0 * m / inputs.alpha) / two_n)
    denom = 1.0 - inputs.t_norm
    return BoundResult(
        tight=(t_term + g_term) / denom,
        loose=2.0 * t_term / denom,
        t_term=t_term,
        g_term=g_term,
    )
