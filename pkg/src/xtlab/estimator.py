"""Scikit-learn style front end for training and applying the value model."""

from __future__ import annotations

import warnings
from typing import Iterable, Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_array, check_is_fitted

from .events import NormalizedEvent
from .grid import Grid
from .model import accumulate_counts, delta_xt, estimate_model, solve_xt


class ExpectedThreat(BaseEstimator):
    """Grid-based scoring-value model over football event streams.

    Fits the per-state Markov model by counting a normalized event stream,
    then solves for the per-state probability of scoring within the
    possession. ``predict`` values pitch locations; ``transform`` values
    actions (start -> end) by the difference of state values, so the
    estimator drops into sklearn pipelines that score action tables.

    Parameters
    ----------
    n_x, n_y : grid resolution along pitch length and width.
    tol, max_iter : stopping controls for the fixed-point solve.
    """

    def __init__(self, n_x: int = 16, n_y: int = 12, tol: float = 1e-10, max_iter: int = 100000):
        self.n_x = n_x
        self.n_y = n_y
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X: Iterable[NormalizedEvent], y=None) -> "ExpectedThreat":
        """Count events, estimate the chain, and solve for state values."""
        grid = Grid(self.n_x, self.n_y)
        self.counts_ = accumulate_counts(X, grid)
        if self.counts_.n_events == 0:
            raise ValueError("cannot fit on an empty event stream")
        self.model_ = estimate_model(self.counts_)
        self.solution_ = solve_xt(self.model_, tol=self.tol, max_iter=self.max_iter)
        if not self.solution_.converged:
            warnings.warn(
                f"value solve stopped at max_iter={self.max_iter} with residual "
                f"{self.solution_.residual:.3e}",
                ConvergenceWarning,
            )
        self.grid_ = grid
        self.xt_ = self.solution_.xt
        self.n_events_ = self.counts_.n_events
        return self

    def predict(self, X) -> np.ndarray:
        """Scoring value of pitch locations, given as an (n, 2) array of (x, y)."""
        check_is_fitted(self, "xt_")
        pts = check_array(X, ensure_2d=True, dtype=float)
        if pts.shape[1] != 2:
            raise ValueError(f"expected (n, 2) locations, got shape {pts.shape}")
        return self.xt_[self.grid_.cell_of(pts[:, 0], pts[:, 1])]

    def transform(self, X) -> np.ndarray:
        """Value added by actions given as (n, 4) rows (x0, y0, x1, y1)."""
        check_is_fitted(self, "xt_")
        acts = check_array(X, ensure_2d=True, dtype=float)
        if acts.shape[1] != 4:
            raise ValueError(f"expected (n, 4) action rows, got shape {acts.shape}")
        before = self.xt_[self.grid_.cell_of(acts[:, 0], acts[:, 1])]
        after = self.xt_[self.grid_.cell_of(acts[:, 2], acts[:, 3])]
        return (after - before).reshape(-1, 1)

    def action_value(self, s_before: int, s_after: int) -> float:
        """Value difference between two states."""
        check_is_fitted(self, "xt_")
        return delta_xt(self.solution_, s_before, s_after)

    def value_grid(self) -> np.ndarray:
        """State values as an (n_y, n_x) array for heatmap-style use."""
        check_is_fitted(self, "xt_")
        return self.xt_.reshape(self.n_y, self.n_x)
