"""Lognormal description of the sup-norm model error.

The simulated errors are modeled as

    log(err) = c + alpha * log(M) - beta * log(sqrt(N)) + eps,
    eps ~ N(0, sigma2),

fitted by ordinary least squares on the design [1, log M, -log sqrt(N)].
The fitted law gives closed-form error probabilities and quantiles for
any (M, N). Natural logs throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import stats
from scipy.special import ndtr, ndtri

COEF_NAMES = ("c", "alpha", "beta")


@dataclass
class OlsSummary:
    """Coefficients plus the usual inference statistics of the log-error fit."""

    c: float
    alpha: float
    beta: float
    sigma2: float  # unbiased residual variance, RSS / (n - 3)
    se: dict[str, float]
    t_stats: dict[str, float]
    p_values: dict[str, float]
    ci95: dict[str, tuple[float, float]]
    r2: float
    adj_r2: float
    loglik: float
    aic: float
    bic: float
    n_obs: int
    residuals: np.ndarray


def fit_ols(records: Iterable) -> OlsSummary:
    """Least-squares fit of the log-error model over simulation records.

    Records need ``m``, ``n`` and ``max_error`` attributes. Requires at
    least 4 records, positive errors, and variation in both M and N.
    """
    recs = list(records)
    n_obs = len(recs)
    if n_obs < 4:
        raise ValueError(f"need at least 4 records to fit, got {n_obs}")
    err = np.array([r.max_error for r in recs], dtype=float)
    if np.any(err <= 0):
        raise ValueError("every max_error must be positive to fit on the log scale")
    m_vals = np.array([r.m for r in recs], dtype=float)
    n_vals = np.array([r.n for r in recs], dtype=float)
    if np.unique(m_vals).size < 2:
        raise ValueError("grid-size regressor is degenerate: all records share one M")
    if np.unique(n_vals).size < 2:
        raise ValueError("sample-size regressor is degenerate: all records share one N")

    y = np.log(err)
    design = np.column_stack([np.ones(n_obs), np.log(m_vals), -0.5 * np.log(n_vals)])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 3:
        raise ValueError("design matrix is rank deficient; M and N must vary independently")

    residuals = y - design @ coef
    rss = float(residuals @ residuals)
    dof = n_obs - 3
    sigma2 = rss / dof

    xtx_inv = np.linalg.inv(design.T @ design)
    se = np.sqrt(np.diag(xtx_inv) * sigma2)
    t_stats = coef / se
    p_values = 2.0 * stats.t.sf(np.abs(t_stats), dof)
    t_crit = float(stats.t.ppf(0.975, dof))

    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if tss == 0.0 else 1.0 - rss / tss
    adj_r2 = 1.0 - (1.0 - r2) * (n_obs - 1) / dof

    # Gaussian likelihood at the ML variance RSS/n
    with np.errstate(divide="ignore"):
        loglik = float(-0.5 * n_obs * (np.log(2.0 * np.pi * rss / n_obs) + 1.0))
    aic = 2.0 * 3 - 2.0 * loglik
    bic = 3 * math.log(n_obs) - 2.0 * loglik

    return OlsSummary(
        c=float(coef[0]),
        alpha=float(coef[1]),
        beta=float(coef[2]),
        sigma2=float(sigma2),
        se=dict(zip(COEF_NAMES, se.tolist())),
        t_stats=dict(zip(COEF_NAMES, t_stats.tolist())),
        p_values=dict(zip(COEF_NAMES, p_values.tolist())),
        ci95={
            name: (float(coef[i] - t_crit * se[i]), float(coef[i] + t_crit * se[i]))
            for i, name in enumerate(COEF_NAMES)
        },
        r2=float(r2),
        adj_r2=float(adj_r2),
        loglik=loglik,
        aic=float(aic),
        bic=float(bic),
        n_obs=n_obs,
        residuals=residuals,
    )


def qq_points(summary: OlsSummary) -> np.ndarray:
    """Sorted standardized residuals vs normal quantiles at (i-1/2)/n.

    Returns an (n, 2) array of (theoretical, sample) pairs, non-decreasing
    in both columns.
    """
    r = summary.residuals
    n = r.size
    if n < 2:
        raise ValueError("need at least 2 residuals for a QQ comparison")
    spread = r.std()
    standardized = np.sort((r - r.mean()) / spread)
    theoretical = ndtri((np.arange(1, n + 1) - 0.5) / n)
    return np.column_stack([theoretical, standardized])


def write_qq_csv(points: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("theoretical,sample\n")
        for theo, samp in points:
            fh.write(f"{theo:.17g},{samp:.17g}\n")


@dataclass(frozen=True)
class LognormalErrorLaw:
    """Fitted error distribution: log max-error is normal with mean
    ``c + alpha log M - beta log sqrt(N)`` and variance ``sigma2``."""

    c: float
    alpha: float
    beta: float
    sigma2: float

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    @classmethod
    def from_summary(cls, summary: OlsSummary) -> "LognormalErrorLaw":
        return cls(c=summary.c, alpha=summary.alpha, beta=summary.beta, sigma2=summary.sigma2)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def mu(self, m, n) -> float:
        """Mean of log error at grid size m, sample size n."""
        _check_mn(m, n)
        return self.c + self.alpha * math.log(m) - self.beta * math.log(math.sqrt(n))

    def prob_below(self, m, n, t: float) -> float:
        """P(max error < t) for a model with m states trained on n events."""
        if t <= 0:
            raise ValueError(f"threshold must be positive, got {t}")
        return float(ndtr((math.log(t) - self.mu(m, n)) / self.sigma))

    def quantile(self, m, n, q: float) -> float:
        """The q-quantile of the max error at (m, n)."""
        if not 0.0 < q < 1.0:
            raise ValueError(f"quantile level must lie in (0, 1), got {q}")
        return math.exp(self.mu(m, n) + self.sigma * float(ndtri(q)))

    def as_dict(self) -> dict:
        return {"c": self.c, "alpha": self.alpha, "beta": self.beta, "sigma2": self.sigma2}


def _check_mn(m, n) -> None:
    if m < 1:
        raise ValueError(f"M must be >= 1, got {m}")
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n}")


def fit_payload(summary: OlsSummary) -> dict:
    """The interchange JSON structure for a fitted summary."""
    return {
        "c": summary.c,
        "alpha": summary.alpha,
        "beta": summary.beta,
        "sigma2": summary.sigma2,
        "se": summary.se,
        "t": summary.t_stats,
        "p": summary.p_values,
        "ci95": {k: list(v) for k, v in summary.ci95.items()},
        "r2": summary.r2,
        "adj_r2": summary.adj_r2,
        "loglik": summary.loglik,
        "aic": summary.aic,
        "bic": summary.bic,
        "n_obs": summary.n_obs,
    }


def save_fit_json(path, summary: OlsSummary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fit_payload(summary), fh, indent=2)


def load_error_law_json(path) -> LognormalErrorLaw:
    """Read back a fit JSON (only the law parameters are needed)."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return LognormalErrorLaw(
        c=float(payload["c"]),
        alpha=float(payload["alpha"]),
        beta=float(payload["beta"]),
        sigma2=float(payload["sigma2"]),
    )
