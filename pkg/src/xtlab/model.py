"""Markov model of on-ball play: count tables, probability estimates, and
the fixed-point solve for per-state scoring value.

Each state either ends the possession (shot or loss) or moves the ball to
another state. The value vector ``v`` then satisfies ``v = g + T v`` with
``g[s]`` the shoot-and-score probability and ``T`` the row-substochastic
move matrix; the solver iterates that map from zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import sparse

from .events import EventKind, NormalizedEvent
from .grid import Grid


@dataclass
class CountsTable:
    """Per-state event tallies: the sufficient statistics of the model.

    Invariant: shots + losses + row-sum(moves) == events_in, per state.
    """

    grid: Grid
    events_in: np.ndarray  # int64[M]
    shots: np.ndarray  # int64[M]
    goals: np.ndarray  # int64[M]
    losses: np.ndarray  # int64[M]
    moves: sparse.csr_matrix  # int64[M, M], successful moves s -> s'

    @property
    def n_events(self) -> int:
        return int(self.events_in.sum())

    def validate(self) -> None:
        m = self.grid.n_states
        for name in ("events_in", "shots", "goals", "losses"):
            vec = getattr(self, name)
            if vec.shape != (m,):
                raise ValueError(f"{name} must have shape ({m},), got {vec.shape}")
            if np.any(vec < 0):
                raise ValueError(f"{name} contains negative counts")
        if self.moves.shape != (m, m):
            raise ValueError(f"moves must be {m}x{m}, got {self.moves.shape}")
        if self.moves.nnz and self.moves.data.min() < 0:
            raise ValueError("moves contains negative counts")
        row_moves = np.asarray(self.moves.sum(axis=1)).ravel()
        total = self.shots + self.losses + row_moves
        if not np.array_equal(total, self.events_in):
            raise ValueError("shots + losses + moves != events_in in some state")
        if np.any(self.goals > self.shots):
            raise ValueError("goals exceed shots in some state")


def empty_counts(grid: Grid) -> CountsTable:
    m = grid.n_states
    zeros = np.zeros(m, dtype=np.int64)
    return CountsTable(
        grid=grid,
        events_in=zeros.copy(),
        shots=zeros.copy(),
        goals=zeros.copy(),
        losses=zeros.copy(),
        moves=sparse.csr_matrix((m, m), dtype=np.int64),
    )


def counts_from_arrays(
    grid: Grid,
    shots: np.ndarray,
    goals: np.ndarray,
    losses: np.ndarray,
    move_rows: np.ndarray,
    move_cols: np.ndarray,
    move_counts: np.ndarray,
) -> CountsTable:
    """Assemble a CountsTable from per-state vectors and move triplets."""
    m = grid.n_states
    moves = sparse.csr_matrix(
        (np.asarray(move_counts, dtype=np.int64), (move_rows, move_cols)), shape=(m, m)
    )
    moves.sum_duplicates()
    moves.eliminate_zeros()
    row_moves = np.asarray(moves.sum(axis=1)).ravel()
    shots = np.asarray(shots, dtype=np.int64)
    goals = np.asarray(goals, dtype=np.int64)
    losses = np.asarray(losses, dtype=np.int64)
    return CountsTable(
        grid=grid,
        events_in=shots + losses + row_moves,
        shots=shots,
        goals=goals,
        losses=losses,
        moves=moves,
    )


_ACCUMULATE_CHUNK = 1 << 18


def accumulate_counts(events: Iterable[NormalizedEvent], grid: Grid) -> CountsTable:
    """Tally a normalized event stream on a grid.

    The stream is consumed in chunks so corpora of millions of events bin
    at numpy speed with bounded memory.
    """
    m = grid.n_states
    shots = np.zeros(m, dtype=np.int64)
    goals = np.zeros(m, dtype=np.int64)
    losses = np.zeros(m, dtype=np.int64)
    move_key_chunks: list[np.ndarray] = []

    shot_buf: list[tuple[float, float, bool]] = []
    loss_buf: list[tuple[float, float]] = []
    move_buf: list[tuple[float, float, float, float]] = []

    def flush() -> None:
        if shot_buf:
            arr = np.asarray(shot_buf, dtype=float)
            cells = grid.cell_of(arr[:, 0], arr[:, 1])
            np.add.at(shots, cells, 1)
            np.add.at(goals, cells[arr[:, 2] > 0.5], 1)
            shot_buf.clear()
        if loss_buf:
            arr = np.asarray(loss_buf, dtype=float)
            np.add.at(losses, grid.cell_of(arr[:, 0], arr[:, 1]), 1)
            loss_buf.clear()
        if move_buf:
            arr = np.asarray(move_buf, dtype=float)
            s_from = grid.cell_of(arr[:, 0], arr[:, 1]).astype(np.int64)
            s_to = grid.cell_of(arr[:, 2], arr[:, 3]).astype(np.int64)
            move_key_chunks.append(s_from * m + s_to)
            move_buf.clear()

    pending = 0
    for ev in events:
        if ev.kind is EventKind.MOVE:
            move_buf.append((ev.start[0], ev.start[1], ev.end[0], ev.end[1]))
        elif ev.kind is EventKind.SHOT:
            shot_buf.append((ev.start[0], ev.start[1], ev.is_goal))
        else:
            loss_buf.append(ev.start)
        pending += 1
        if pending >= _ACCUMULATE_CHUNK:
            flush()
            pending = 0
    flush()

    if move_key_chunks:
        keys, key_counts = np.unique(np.concatenate(move_key_chunks), return_counts=True)
        rows, cols = keys // m, keys % m
    else:
        rows = cols = key_counts = np.empty(0, dtype=np.int64)
    return counts_from_arrays(grid, shots, goals, losses, rows, cols, key_counts)


@dataclass
class XtModel:
    """Estimated per-state probabilities of the play Markov chain.

    For every visited state, shot_prob + loss_prob + row-sum(transitions)
    is 1 up to rounding; unvisited states are treated as certain losses so
    the model stays well-defined on resampled data with empty cells.
    """

    grid: Grid
    shot_prob: np.ndarray  # float64[M]
    xg: np.ndarray  # float64[M]
    loss_prob: np.ndarray  # float64[M]
    transitions: sparse.csr_matrix  # float64[M, M]
    n_events: int

    @property
    def g(self) -> np.ndarray:
        """Per-state probability of scoring directly (shoot and convert)."""
        return self.shot_prob * self.xg

    def t_norm(self) -> float:
        """Max row sum of the transition matrix."""
        if self.transitions.nnz == 0:
            return 0.0
        return float(np.asarray(self.transitions.sum(axis=1)).max())


def estimate_model(counts: CountsTable) -> XtModel:
    """Turn tallies into probability estimates by per-state ratios."""
    n = counts.events_in.astype(float)
    visited = n > 0
    inv_n = np.zeros_like(n)
    inv_n[visited] = 1.0 / n[visited]

    shot_prob = counts.shots * inv_n
    loss_prob = counts.losses * inv_n
    loss_prob[~visited] = 1.0

    xg = np.zeros_like(n)
    has_shots = counts.shots > 0
    xg[has_shots] = counts.goals[has_shots] / counts.shots[has_shots]

    transitions = counts.moves.astype(np.float64)
    if transitions.nnz:
        # row-scale counts into probabilities
        transitions = sparse.diags(inv_n) @ transitions
    return XtModel(
        grid=counts.grid,
        shot_prob=shot_prob,
        xg=xg,
        loss_prob=loss_prob,
        transitions=transitions.tocsr(),
        n_events=counts.n_events,
    )


@dataclass
class XtSolution:
    """Value vector with solver diagnostics."""

    xt: np.ndarray
    iterations: int
    residual: float
    converged: bool


def solve_xt(model: XtModel, tol: float = 1e-10, max_iter: int = 100000) -> XtSolution:
    """Iterate ``x <- g + T x`` from zero until the sup-norm update < tol.

    Iterates are elementwise non-decreasing and stay in [0, 1]. A model
    whose transition rows sum to 1 may fail to converge; that is reported
    via ``converged`` rather than raised, since it is a property of the
    (resampled) data.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    g = model.g
    t = model.transitions
    x = np.zeros_like(g)
    residual = float("inf")
    for it in range(1, max_iter + 1):
        x_next = g + t @ x
        residual = float(np.max(np.abs(x_next - x)))
        x = x_next
        if residual < tol:
            return XtSolution(xt=x, iterations=it, residual=residual, converged=True)
    return XtSolution(xt=x, iterations=max_iter, residual=residual, converged=False)


def delta_xt(solution: XtSolution, s_before: int, s_after: int) -> float:
    """Value of an action: xt[after] - xt[before]."""
    m = solution.xt.shape[0]
    for s in (s_before, s_after):
        if not 0 <= s < m:
            raise ValueError(f"state {s} outside [0, {m})")
    return float(solution.xt[s_after] - solution.xt[s_before])


def sup_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max absolute componentwise difference between two equal-length vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def save_model_json(path, model: XtModel, solution: XtSolution) -> None:
    """Write the interchange JSON for a solved model."""
    coo = model.transitions.tocoo()
    order = np.lexsort((coo.col, coo.row))
    payload = {
        "grid": model.grid.to_dict(),
        "n_events": model.n_events,
        "shot_prob": model.shot_prob.tolist(),
        "xg": model.xg.tolist(),
        "loss_prob": model.loss_prob.tolist(),
        "transitions": [
            list(t)
            for t in zip(
                coo.row[order].tolist(), coo.col[order].tolist(), coo.data[order].tolist()
            )
        ],
        "xt": solution.xt.tolist(),
        "solver": {
            "iterations": solution.iterations,
            "residual": solution.residual,
            "converged": solution.converged,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_model_json(path) -> tuple[XtModel, XtSolution]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    grid = Grid.from_dict(payload["grid"])
    m = grid.n_states
    trip = payload["transitions"]
    rows = np.array([t[0] for t in trip], dtype=np.int64)
    cols = np.array([t[1] for t in trip], dtype=np.int64)
    vals = np.array([t[2] for t in trip], dtype=np.float64)
    model = XtModel(
        grid=grid,
        shot_prob=np.asarray(payload["shot_prob"], dtype=float),
        xg=np.asarray(payload["xg"], dtype=float),
        loss_prob=np.asarray(payload["loss_prob"], dtype=float),
        transitions=sparse.csr_matrix((vals, (rows, cols)), shape=(m, m)),
        n_events=int(payload["n_events"]),
    )
    solver = payload["solver"]
    solution = XtSolution(
        xt=np.asarray(payload["xt"], dtype=float),
        iterations=int(solver["iterations"]),
        residual=float(solver["residual"]),
        converged=bool(solver["converged"]),
    )
    return model, solution


def save_counts_npz(path, counts: CountsTable) -> None:
    """Compact cache of a counts table (not an interchange format)."""
    coo = counts.moves.tocoo()
    np.savez_compressed(
        path,
        nx=counts.grid.n_x,
        ny=counts.grid.n_y,
        shots=counts.shots,
        goals=counts.goals,
        losses=counts.losses,
        move_rows=coo.row.astype(np.int64),
        move_cols=coo.col.astype(np.int64),
        move_counts=coo.data.astype(np.int64),
    )


def load_counts_npz(path) -> CountsTable:
    with np.load(path) as data:
        grid = Grid(int(data["nx"]), int(data["ny"]))
        return counts_from_arrays(
            grid,
            data["shots"],
            data["goals"],
            data["losses"],
            data["move_rows"],
            data["move_cols"],
            data["move_counts"],
        )
