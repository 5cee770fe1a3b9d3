"""Reading open-format event data and normalizing it to the kept categories.

The on-disk layout is the usual open-data tree:

    <data_dir>/competitions.json
    <data_dir>/matches/<competition_id>/<season_id>.json
    <data_dir>/events/<match_id>.json

Only five families of on-ball events are kept: successful passes, carries
and take-ons become moves; shots stay shots; failed passes/take-ons,
errors, miscontrols and clearances become possession-ending losses.
Everything else is skipped.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .grid import PITCH_LENGTH, PITCH_WIDTH


class IngestError(Exception):
    """Raised for unusable input layouts or malformed data files."""


class EventKind(Enum):
    MOVE = "move"
    SHOT = "shot"
    LOSS = "loss"


# provider type name -> handling family
_MOVE_TYPES = {"Pass", "Carry", "Dribble"}
_LOSS_TYPES = {"Error", "Miscontrol", "Clearance"}
_SHOT_TYPES = {"Shot"}

# take-ons are recorded without an end location; a completed one keeps the
# ball in (approximately) the same spot, so it becomes a self-move
_TYPES_WITH_IMPLICIT_END = {"Dribble"}

_SUCCESSFUL_DRIBBLE_OUTCOMES = {"Complete"}


@dataclass(frozen=True)
class RawEventRecord:
    """One provider event, flattened to the fields the pipeline needs."""

    match_id: int
    event_type: str
    location: Optional[tuple[float, float]]
    end_location: Optional[tuple[float, float]] = None
    outcome: Optional[str] = None
    team_id: int = 0


@dataclass(frozen=True)
class NormalizedEvent:
    """A kept event: a move with both endpoints, a shot, or a loss.

    ``end`` is present iff ``kind`` is MOVE; ``is_goal`` is meaningful only
    for shots. Coordinates are clamped into the 120x80 pitch.
    """

    kind: EventKind
    start: tuple[float, float]
    end: Optional[tuple[float, float]] = None
    is_goal: bool = False

    def __post_init__(self):
        if self.kind is EventKind.MOVE and self.end is None:
            raise ValueError("move events need an end location")
        if self.kind is not EventKind.MOVE and self.end is not None:
            raise ValueError(f"{self.kind.value} events must not carry an end location")
        if self.kind is not EventKind.SHOT and self.is_goal:
            raise ValueError("is_goal only applies to shots")


@dataclass
class NormalizeStats:
    """Tallies kept/skipped events across a normalization run."""

    moves: int = 0
    shots: int = 0
    losses: int = 0
    skipped: int = 0
    missing_location: int = 0

    @property
    def kept(self) -> int:
        return self.moves + self.shots + self.losses

    @property
    def total(self) -> int:
        return self.kept + self.skipped

    def as_dict(self) -> dict:
        return {
            "moves": self.moves,
            "shots": self.shots,
            "losses": self.losses,
            "skipped": self.skipped,
            "missing_location": self.missing_location,
        }


def clamp_point(x: float, y: float) -> tuple[float, float]:
    """Clamp a coordinate pair onto the pitch rectangle. Idempotent."""
    return (min(max(float(x), 0.0), PITCH_LENGTH), min(max(float(y), 0.0), PITCH_WIDTH))


def _coerce_point(value) -> Optional[tuple[float, float]]:
    if value is None:
        return None
    try:
        x, y = float(value[0]), float(value[1])
    except (TypeError, ValueError, IndexError):
        return None
    return (x, y)


def _flatten_event(match_id: int, ev: dict) -> RawEventRecord:
    type_name = (ev.get("type") or {}).get("name", "")
    # nested per-type block ("pass", "shot", ...) carries outcome/end fields
    detail = ev.get(type_name.lower().replace(" ", "_").replace("*", ""), None)
    end_location = None
    outcome = None
    if isinstance(detail, dict):
        end_location = _coerce_point(detail.get("end_location"))
        out = detail.get("outcome")
        if isinstance(out, dict):
            outcome = out.get("name")
    return RawEventRecord(
        match_id=match_id,
        event_type=type_name,
        location=_coerce_point(ev.get("location")),
        end_location=end_location,
        outcome=outcome,
        team_id=int((ev.get("team") or {}).get("id", 0)),
    )


def _load_json(path: Path):
    try:
        with path.open("r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise IngestError(f"malformed JSON in {path}: {exc}") from exc
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc


def iter_match_ids(data_dir: Path, competition_filter: Optional[Iterable[int]] = None) -> list[int]:
    """All match ids under ``data_dir``, sorted ascending."""
    comp_path = data_dir / "competitions.json"
    if not comp_path.is_file():
        raise IngestError(f"{data_dir} does not look like an open-data directory (no competitions.json)")
    competitions = _load_json(comp_path)
    wanted = None if competition_filter is None else {int(c) for c in competition_filter}

    match_ids: set[int] = set()
    for comp in competitions:
        comp_id = int(comp["competition_id"])
        season_id = int(comp["season_id"])
        if wanted is not None and comp_id not in wanted:
            continue
        season_path = data_dir / "matches" / str(comp_id) / f"{season_id}.json"
        if not season_path.is_file():
            continue
        for match in _load_json(season_path):
            match_ids.add(int(match["match_id"]))
    return sorted(match_ids)


def parse_event_files(
    data_dir, competition_filter: Optional[Iterable[int]] = None
) -> Iterator[RawEventRecord]:
    """Stream every event of every selected match.

    Matches are visited in ascending match-id order and events in file
    order, so the stream is deterministic for a given directory.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise IngestError(f"data directory not found: {data_dir}")
    for match_id in iter_match_ids(data_dir, competition_filter):
        events_path = data_dir / "events" / f"{match_id}.json"
        if not events_path.is_file():
            raise IngestError(f"missing events file for match {match_id}: {events_path}")
        for ev in _load_json(events_path):
            yield _flatten_event(match_id, ev)


def normalize(raw: RawEventRecord, stats: Optional[NormalizeStats] = None) -> Optional[NormalizedEvent]:
    """Map a raw event to a NormalizedEvent, or None when it is skipped.

    Total over all inputs: every record lands in exactly one of
    {move, shot, loss, skipped}. A kept event type missing a required
    location is skipped and counted in ``stats.missing_location``.
    """
    if stats is None:
        stats = NormalizeStats()
    kind = _classify(raw)
    if kind is None:
        stats.skipped += 1
        return None
    if raw.location is None:
        stats.skipped += 1
        stats.missing_location += 1
        return None
    start = clamp_point(*raw.location)

    if kind is EventKind.MOVE:
        end = raw.end_location
        if end is None and raw.event_type in _TYPES_WITH_IMPLICIT_END:
            end = raw.location
        if end is None:
            stats.skipped += 1
            stats.missing_location += 1
            return None
        stats.moves += 1
        return NormalizedEvent(EventKind.MOVE, start, end=clamp_point(*end))
    if kind is EventKind.SHOT:
        stats.shots += 1
        return NormalizedEvent(EventKind.SHOT, start, is_goal=(raw.outcome == "Goal"))
    stats.losses += 1
    return NormalizedEvent(EventKind.LOSS, start)


def _classify(raw: RawEventRecord) -> Optional[EventKind]:
    t = raw.event_type
    if t in _SHOT_TYPES:
        return EventKind.SHOT
    if t in _LOSS_TYPES:
        return EventKind.LOSS
    if t not in _MOVE_TYPES:
        return None
    if t == "Pass":
        # provider convention: completed passes carry no outcome
        return EventKind.MOVE if raw.outcome is None else EventKind.LOSS
    if t == "Dribble":
        return EventKind.MOVE if raw.outcome in _SUCCESSFUL_DRIBBLE_OUTCOMES else EventKind.LOSS
    return EventKind.MOVE  # Carry


def normalize_stream(
    raws: Iterable[RawEventRecord], stats: Optional[NormalizeStats] = None
) -> Iterator[tuple[int, NormalizedEvent]]:
    """Normalize a raw stream, yielding (match_id, event) for kept events."""
    if stats is None:
        stats = NormalizeStats()
    for raw in raws:
        ev = normalize(raw, stats)
        if ev is not None:
            yield raw.match_id, ev


EVENTS_CSV_HEADER = ["match_id", "kind", "x_start", "y_start", "x_end", "y_end", "is_goal"]


def _fmt(v: Optional[float]) -> str:
    return "" if v is None else f"{v:.6f}"


def write_events_csv(pairs: Iterable[tuple[int, NormalizedEvent]], path) -> int:
    """Write (match_id, event) pairs as interchange CSV; returns row count."""
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVENTS_CSV_HEADER)
        for match_id, ev in pairs:
            end_x, end_y = ev.end if ev.end is not None else (None, None)
            is_goal = "" if ev.kind is not EventKind.SHOT else ("true" if ev.is_goal else "false")
            writer.writerow(
                [match_id, ev.kind.value, _fmt(ev.start[0]), _fmt(ev.start[1]), _fmt(end_x), _fmt(end_y), is_goal]
            )
            n += 1
    return n


def read_events_csv(path) -> Iterator[tuple[int, NormalizedEvent]]:
    """Read the interchange CSV back into (match_id, event) pairs."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EVENTS_CSV_HEADER:
            raise IngestError(f"unexpected events CSV header in {path}: {header}")
        for row in reader:
            match_id, kind, xs, ys, xe, ye, is_goal = row
            k = EventKind(kind)
            end = (float(xe), float(ye)) if k is EventKind.MOVE else None
            yield int(match_id), NormalizedEvent(
                k, (float(xs), float(ys)), end=end, is_goal=(is_goal == "true")
            )
