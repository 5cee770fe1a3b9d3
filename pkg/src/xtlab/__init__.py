"""Grid-size calibration toolkit for grid-based scoring-value models."""

from .advisor import (
    EVENTS_PER_SEASON,
    InsufficientDataError,
    Recommendation,
    describe_model,
    max_flexibility,
    seasons_to_events,
    suggest_shape,
)
from .bounds import BoundInputs, BoundResult, theorem1_bound
from .errorlaw import LognormalErrorLaw, OlsSummary, fit_ols, qq_points
from .estimator import ExpectedThreat
from .events import (
    EventKind,
    IngestError,
    NormalizedEvent,
    NormalizeStats,
    RawEventRecord,
    normalize,
    normalize_stream,
    parse_event_files,
    read_events_csv,
    write_events_csv,
)
from .grid import Grid, make_grid, parse_grid_spec
from .model import (
    CountsTable,
    XtModel,
    XtSolution,
    accumulate_counts,
    delta_xt,
    estimate_model,
    load_model_json,
    save_model_json,
    solve_xt,
    sup_distance,
)
from .simulate import (
    ExperimentPlan,
    JointSampler,
    SimRecord,
    build_sampler,
    derive_seed,
    mix64,
    read_records_csv,
    regime_filter,
    resample_counts,
    run_experiment,
    run_replication,
    synth_ground_truth,
    write_records_csv,
)

__version__ = "0.1.0"

__all__ = [
    "BoundInputs",
    "BoundResult",
    "CountsTable",
    "EVENTS_PER_SEASON",
    "EventKind",
    "ExpectedThreat",
    "ExperimentPlan",
    "Grid",
    "IngestError",
    "InsufficientDataError",
    "JointSampler",
    "LognormalErrorLaw",
    "NormalizedEvent",
    "NormalizeStats",
    "OlsSummary",
    "RawEventRecord",
    "Recommendation",
    "SimRecord",
    "XtModel",
    "XtSolution",
    "accumulate_counts",
    "build_sampler",
    "delta_xt",
    "derive_seed",
    "describe_model",
    "estimate_model",
    "fit_ols",
    "load_model_json",
    "make_grid",
    "max_flexibility",
    "mix64",
    "normalize",
    "normalize_stream",
    "parse_event_files",
    "parse_grid_spec",
    "qq_points",
    "read_events_csv",
    "read_records_csv",
    "regime_filter",
    "resample_counts",
    "run_experiment",
    "run_replication",
    "save_model_json",
    "seasons_to_events",
    "solve_xt",
    "suggest_shape",
    "sup_distance",
    "synth_ground_truth",
    "theorem1_bound",
    "write_events_csv",
    "write_records_csv",
]
