"""Command-line pipeline: ingest -> train -> simulate -> fit -> advise.

Every subcommand is standalone given its declared input files. Data goes
to files or stdout; diagnostics go to stderr. Exit codes: 0 on success,
1 on domain errors, 2 on usage errors.
"""

from __future__ import annotations

import functools
import json
from pathlib import Path

import click

from .advisor import describe_model, max_flexibility, quantile_curve, seasons_to_events
from .bounds import BoundInputs, theorem1_bound
from .errorlaw import fit_ols, fit_payload, load_error_law_json, qq_points, save_fit_json, write_qq_csv
from .events import IngestError, NormalizeStats, normalize_stream, parse_event_files, read_events_csv, write_events_csv
from .grid import parse_grid_spec
from .model import (
    accumulate_counts,
    estimate_model,
    load_counts_npz,
    save_counts_npz,
    save_model_json,
    solve_xt,
)
from .simulate import (
    ExperimentPlan,
    read_records_csv,
    regime_filter,
    run_experiment,
    synth_ground_truth,
    write_records_csv,
)

DEFAULT_GRIDS = "16x12,32x24,40x30,48x36,56x42,64x48"
DEFAULT_SIZES = "100000,130000,170000,240000,370000,630000,1300000,4000000"
DESK_SCALE_MAX_N = 630_000
DESK_SCALE_REPS = 30


def _domain_errors(f):
    """Map library errors to exit code 1 with a clean message."""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (ValueError, IngestError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _echo_json(obj) -> None:
    click.echo(json.dumps(obj, indent=2))


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise click.UsageError(f"bad {what} list {text!r}: {exc}") from exc


def _resolve_n(n, seasons) -> int:
    if (n is None) == (seasons is None):
        raise click.UsageError("pass exactly one of --n or --seasons")
    return int(n) if n is not None else seasons_to_events(seasons)


@click.group()
@click.version_option(package_name="xtlab")
def main():
    """Train grid-based scoring-value models and calibrate their grid size."""


@main.command()
@click.option("--data-dir", envvar="XTLAB_DATA_DIR", required=True, type=click.Path(file_okay=False))
@click.option("--competition", "competitions", multiple=True, type=int, help="Keep only these competition ids.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_domain_errors
def ingest(data_dir, competitions, out):
    """Read an open-data event tree and write the normalized event CSV."""
    stats = NormalizeStats()
    raws = parse_event_files(data_dir, competitions or None)
    n = write_events_csv(normalize_stream(raws, stats), out)
    click.echo(json.dumps({"written": n, **stats.as_dict()}), err=True)


@main.command()
@click.option("--events", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--grid", "grid_spec", default="16x12", show_default=True)
@click.option("--tol", default=1e-10, show_default=True)
@click.option("--max-iter", default=100000, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_domain_errors
def train(events, grid_spec, tol, max_iter, out):
    """Fit a value model on an event CSV and write the model JSON."""
    grid = parse_grid_spec(grid_spec)
    counts = accumulate_counts((ev for _, ev in read_events_csv(events)), grid)
    model = estimate_model(counts)
    solution = solve_xt(model, tol=tol, max_iter=max_iter)
    if not solution.converged:
        click.echo(
            f"warning: solve stopped at max_iter={max_iter} with residual {solution.residual:.3e}",
            err=True,
        )
    save_model_json(out, model, solution)
    click.echo(
        json.dumps(
            {
                "grid": grid.to_dict(),
                "n_events": model.n_events,
                "iterations": solution.iterations,
                "converged": solution.converged,
            }
        ),
        err=True,
    )


@main.command()
@click.option("--events", type=click.Path(exists=True, dir_okay=False), help="Normalized event CSV to train ground truths from.")
@click.option("--synthetic", is_flag=True, help="Use deterministic synthetic ground truths instead of data.")
@click.option("--gt-dir", type=click.Path(file_okay=False), help="Cache directory for per-grid ground truths.")
@click.option("--grids", default=DEFAULT_GRIDS, show_default=True)
@click.option("--sizes", default=DEFAULT_SIZES, show_default=True)
@click.option("--reps", default=1000, show_default=True)
@click.option("--master-seed", default=12345, show_default=True)
@click.option("--desk-scale", is_flag=True, help="Shrink the plan for quick runs: first 2 grids, sizes <= 630k, 30 reps.")
@click.option("--workers", default=1, show_default=True)
@click.option("--tol", default=1e-10, show_default=True)
@click.option("--max-iter", default=100000, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_domain_errors
def simulate(events, synthetic, gt_dir, grids, sizes, reps, master_seed, desk_scale, workers, tol, max_iter, out):
    """Run the resampling experiment and write the error records CSV."""
    grid_list = [parse_grid_spec(s) for s in grids.split(",") if s]
    size_list = _parse_int_list(sizes, "sizes")
    if desk_scale:
        grid_list = grid_list[:2]
        size_list = [n for n in size_list if n <= DESK_SCALE_MAX_N]
        reps = DESK_SCALE_REPS
    plan = ExperimentPlan(
        grids=tuple(grid_list),
        sample_sizes=tuple(size_list),
        reps=reps,
        master_seed=master_seed,
    )

    cache = Path(gt_dir) if gt_dir else None
    if cache:
        cache.mkdir(parents=True, exist_ok=True)
    ground_truths = {}
    for grid in grid_list:
        key = (grid.n_x, grid.n_y)
        name = f"{grid.n_x}x{grid.n_y}"
        cached = cache / f"counts_{name}.npz" if cache else None
        if cached is not None and cached.exists():
            counts = load_counts_npz(cached)
        elif synthetic:
            counts = synth_ground_truth(grid.n_states, seed=master_seed)
            if (counts.grid.n_x, counts.grid.n_y) != key:
                raise click.UsageError(
                    f"synthetic ground truths use the natural factor pair of M: "
                    f"M={grid.n_states} maps to {counts.grid.n_x}x{counts.grid.n_y}, not {name}"
                )
        elif events:
            counts = accumulate_counts((ev for _, ev in read_events_csv(events)), grid)
        else:
            raise click.UsageError(
                "no ground-truth source: pass --events, --synthetic, or --gt-dir with cached tables"
            )
        if cached is not None and not cached.exists():
            save_counts_npz(cached, counts)
            model = estimate_model(counts)
            solution = solve_xt(model, tol=tol, max_iter=max_iter)
            save_model_json(cache / f"model_{name}.json", model, solution)
        ground_truths[key] = counts

    milestones = {0}

    def progress(done, total):
        pct = 100 * done // total
        if pct >= 5 + max(milestones):
            milestones.add(pct)
            click.echo(f"simulate: {done}/{total} replications", err=True)

    records = run_experiment(
        plan, ground_truths, workers=workers, tol=tol, max_iter=max_iter, progress=progress
    )
    write_records_csv(records, out)
    n_bad = sum(1 for r in records if not r.converged)
    click.echo(json.dumps({"records": len(records), "non_converged": n_bad}), err=True)


@main.command()
@click.option("--sim", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", default=15.0, show_default=True, help="Regime filter cutoff on M*ln(M)/sqrt(N).")
@click.option("--out", type=click.Path(dir_okay=False), help="Fit JSON path; stdout when omitted.")
@click.option("--qq", type=click.Path(dir_okay=False), help="Optional QQ data CSV path.")
@_domain_errors
def fit(sim, threshold, out, qq):
    """Fit the lognormal error law on filtered simulation records."""
    records = read_records_csv(sim)
    kept = regime_filter(records, threshold=threshold)
    click.echo(json.dumps({"records": len(records), "kept": len(kept)}), err=True)
    summary = fit_ols(kept)
    if qq:
        write_qq_csv(qq_points(summary), qq)
    if out:
        save_fit_json(out, summary)
    else:
        _echo_json(fit_payload(summary))


@main.command()
@click.option("--m", required=True, type=int)
@click.option("--n", required=True, type=int)
@click.option("--t-norm", required=True, type=float)
@click.option("--alpha", default=0.05, show_default=True)
@_domain_errors
def bound(m, n, t_norm, alpha):
    """Evaluate the probabilistic error upper bounds for (M, N)."""
    result = theorem1_bound(BoundInputs(m=m, n=n, t_norm=t_norm, alpha=alpha))
    _echo_json(result.as_dict())


@main.command()
@click.option("--fit", "fit_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", type=int, help="Training events available.")
@click.option("--seasons", type=float, help="Training data volume in league seasons.")
@click.option("--threshold", default=0.03, show_default=True)
@click.option("--quantile", default=0.9, show_default=True)
@click.option("--curve", type=click.Path(dir_okay=False), help="Also write a quantile-vs-M CSV for plotting.")
@_domain_errors
def recommend(fit_path, n, seasons, threshold, quantile, curve):
    """Most flexible grid meeting the error bar for the available data."""
    law = load_error_law_json(fit_path)
    n_events = _resolve_n(n, seasons)
    rec = max_flexibility(law, n_events, threshold=threshold, quantile=quantile)
    if curve:
        rows = quantile_curve(law, n_events, 2 * rec.m_max)
        with open(curve, "w", encoding="utf-8") as fh:
            fh.write("m,q10,q50,q90\n")
            for m_val, q10, q50, q90 in rows:
                fh.write(f"{m_val},{q10:.10g},{q50:.10g},{q90:.10g}\n")
    _echo_json(rec.as_dict())


@main.command()
@click.option("--fit", "fit_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--m", type=int, help="Number of grid cells.")
@click.option("--grid", "grid_spec", help="Alternative to --m, e.g. 16x12.")
@click.option("--n", type=int)
@click.option("--seasons", type=float)
@click.option("--thresholds", default="0.03", show_default=True)
@_domain_errors
def describe(fit_path, m, grid_spec, n, seasons, thresholds):
    """Error distribution of an existing model configuration."""
    if (m is None) == (grid_spec is None):
        raise click.UsageError("pass exactly one of --m or --grid")
    m_states = m if m is not None else parse_grid_spec(grid_spec).n_states
    law = load_error_law_json(fit_path)
    n_events = _resolve_n(n, seasons)
    cuts = [float(part) for part in thresholds.split(",") if part]
    _echo_json(describe_model(law, m_states, n_events, cuts))


if __name__ == "__main__":
    main()
