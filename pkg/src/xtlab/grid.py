"""Rectangular discretization of the pitch into the model's state space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PITCH_LENGTH = 120.0
PITCH_WIDTH = 80.0


@dataclass(frozen=True)
class Grid:
    """An ``n_x`` by ``n_y`` partition of the pitch into rectangular cells.

    States are numbered row-major: ``state = row * n_x + col`` with columns
    running along the pitch length and rows along the width. The upper
    boundaries (x = 120, y = 80) belong to the last column/row so every
    in-range point maps to a valid state.
    """

    n_x: int
    n_y: int

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self.n_x}x{self.n_y}")

    @property
    def n_states(self) -> int:
        return self.n_x * self.n_y

    def cell_of(self, x, y):
        """Map pitch coordinates to state ids.

        Accepts scalars or arrays; out-of-range coordinates raise (callers
        clamp during ingest, so a violation here is a programming error).
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any(x < 0.0) or np.any(x > PITCH_LENGTH) or np.any(y < 0.0) or np.any(y > PITCH_WIDTH):
            raise ValueError("coordinates outside the 120x80 pitch; clamp before binning")
        col = np.minimum((x * self.n_x / PITCH_LENGTH).astype(int), self.n_x - 1)
        row = np.minimum((y * self.n_y / PITCH_WIDTH).astype(int), self.n_y - 1)
        out = row * self.n_x + col
        return int(out) if out.ndim == 0 else out

    def cell_centers(self):
        """Center coordinates of every cell, as (x, y) arrays of length n_states."""
        cw = PITCH_LENGTH / self.n_x
        ch = PITCH_WIDTH / self.n_y
        col = np.arange(self.n_states) % self.n_x
        row = np.arange(self.n_states) // self.n_x
        return (col + 0.5) * cw, (row + 0.5) * ch

    def to_dict(self) -> dict:
        return {"nx": self.n_x, "ny": self.n_y}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(int(d["nx"]), int(d["ny"]))


def make_grid(n_x: int, n_y: int) -> Grid:
    return Grid(int(n_x), int(n_y))


def parse_grid_spec(spec: str) -> Grid:
    """Parse a ``"16x12"``-style grid string."""
    parts = spec.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"grid spec must look like '16x12', got {spec!r}")
    try:
        return Grid(int(parts[0]), int(parts[1]))
    except ValueError as exc:
        raise ValueError(f"invalid grid spec {spec!r}: {exc}") from exc


def exact_factor_pair(m: int) -> tuple[int, int]:
    """Factor m into (n_x, n_y) with n_x >= n_y and n_x/n_y nearest 4/3.

    Every m has at least the pair (m, 1).
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    best = (m, 1)
    best_score = abs(m - 4.0 / 3.0)
    for n_y in range(1, int(np.sqrt(m)) + 1):
        if m % n_y:
            continue
        n_x = m // n_y
        score = abs(n_x / n_y - 4.0 / 3.0)
        if score < best_score:
            best, best_score = (n_x, n_y), score
    return best
