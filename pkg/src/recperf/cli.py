"""Command-line harness: model generation, engine verification, design-point
sweeps and cache simulation, all seeded and byte-reproducible.

Exit codes: 0 success, 2 configuration error, 3 verification failure,
4 output I/O error.
"""

from __future__ import annotations

import csv
import hashlib
import sys
from pathlib import Path

import click
import numpy as np

from . import cachesim, perfmodel, reference, workload
from .engine import infer_accelerated, reduce_batch
from .textcfg import ConfigError, parse_size

EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_IO = 4

VERIFY_TOLERANCE = 1e-4
DEFAULT_BATCHES = "1,2,4,8,16,32,64,128"


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Map exception classes onto the documented exit codes."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(EXIT_CONFIG, str(exc))
        except OSError as exc:
            _fail(EXIT_IO, str(exc))

    return wrapper


def _parse_batches(text: str) -> list[int]:
    try:
        batches = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--batches: expected comma-separated integers, got {text!r}") from None
    if not batches or any(b < 1 for b in batches):
        raise ConfigError(f"--batches: need positive batch sizes, got {text!r}")
    return batches


def _load_params(path: str | None) -> perfmodel.PlatformParams:
    if path is None:
        return perfmodel.PlatformParams()
    return perfmodel.params_from_file(path)


@click.group()
def main():
    """Recommendation-inference simulator and design-point performance model."""


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", required=True, help="Model config file.")
@click.option("--seed", required=True, type=int, help="Model materialization seed.")
@click.option("--out", "out_path", required=True,
              help="Output base path; writes <out>.blob and <out>.manifest.")
@_guard
def gen(config_path, seed, out_path):
    """Materialize a model and write its blob plus manifest."""
    config = workload.model_config_from_file(config_path)
    model = workload.build_model(config, seed)
    base = Path(out_path)
    blob_path = base.with_name(base.name + ".blob")
    manifest_path = base.with_name(base.name + ".manifest")
    workload.save_model(model, blob_path)
    digest = hashlib.sha256(blob_path.read_bytes()).hexdigest()
    lines = [f"{key} = {value}" for key, value in workload.config_to_kv(config).items()]
    lines.append(f"seed = {seed}")
    lines.append(f"blob = {blob_path.name}")
    lines.append(f"blob_sha256 = {digest}")
    manifest_path.write_text("\n".join(lines) + "\n")
    click.echo(f"wrote {blob_path} and {manifest_path.name}: "
               f"{config.num_tables} tables x {config.rows_per_table} rows, "
               f"sha256 {digest[:12]}")


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _first_deviation(got: np.ndarray, want: np.ndarray, tolerance: float):
    """Index of the first relative deviation above tolerance, or None."""
    denom = np.maximum(np.abs(want), 1e-12)
    rel = np.abs(got - want) / denom
    bad = np.argwhere(rel > tolerance)
    if bad.size == 0:
        return None
    loc = tuple(int(x) for x in bad[0])
    return loc, float(rel[loc])


@main.command()
@click.option("--model", "model_path", required=True, help="Model blob from 'gen'.")
@click.option("--seed", required=True, type=int, help="Seed for the random trial batches.")
@click.option("--trials", default=20, show_default=True, type=int)
@_guard
def verify(model_path, seed, trials):
    """Cross-check the accelerated engine against the naive pipeline."""
    model = workload.load_model(model_path)
    if trials < 0:
        raise ConfigError(f"--trials: must be >= 0, got {trials}")
    if trials == 0:
        click.echo("warning: 0 trials requested, passing vacuously")
        return
    rng = np.random.default_rng(seed)
    for trial in range(trials):
        batch_size = int(rng.integers(1, 9))
        batch_seed = int(rng.integers(0, 2**63 - 1))
        batch = workload.generate_batch(model, batch_size, "uniform", seed=batch_seed)

        got_reduced = reduce_batch(model, batch)
        want_reduced = reference.reduce_batch(model, batch)
        bad = _first_deviation(got_reduced, want_reduced, VERIFY_TOLERANCE)
        if bad is not None:
            (sample, table, element), rel = bad
            _fail(EXIT_VERIFY,
                  f"trial {trial}: reduced embedding deviates at sample {sample}, "
                  f"table {table}, element {element}: relative error {rel:.3e} "
                  f"> {VERIFY_TOLERANCE}")

        got_probs, _ = infer_accelerated(model, batch)
        want_probs = reference.infer(model, batch)
        bad = _first_deviation(got_probs, want_probs, VERIFY_TOLERANCE)
        if bad is not None:
            (sample,), rel = bad
            _fail(EXIT_VERIFY,
                  f"trial {trial}: output deviates at sample {sample}: "
                  f"relative error {rel:.3e} > {VERIFY_TOLERANCE}")
    click.echo(f"verified {trials} trials within relative {VERIFY_TOLERANCE}")


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

@main.command()
@click.option("--config", "config_paths", required=True, multiple=True,
              help="Model config file; repeat for several models.")
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", required=True, help="Result CSV path.")
@click.option("--batches", default=DEFAULT_BATCHES, show_default=True)
@click.option("--design-points", default=",".join(perfmodel.DESIGN_POINTS), show_default=True)
@click.option("--params", "params_path", default=None, help="Platform params override file.")
@click.option("--distribution", default="uniform", show_default=True)
@_guard
def sweep(config_paths, seed, out_path, batches, design_points, params_path, distribution):
    """Time every (model, batch, design point) cell and write the result CSV."""
    params = _load_params(params_path)
    batch_list = _parse_batches(batches)
    points = tuple(p.strip() for p in design_points.split(",") if p.strip())
    models = []
    for path in config_paths:
        config = workload.model_config_from_file(path)
        models.append(workload.build_model(config, seed))
    rows = perfmodel.sweep(models, batch_list, params, seed=seed,
                           design_points=points, distribution=distribution)
    _write_rows(out_path, perfmodel.RESULT_COLUMNS,
                [[getattr(r, c) for c in perfmodel.RESULT_COLUMNS] for r in rows])
    click.echo(f"wrote {len(rows)} rows to {out_path}")
    summary = perfmodel.summarize(rows)
    if "centaur_speedup_min" in summary:
        click.echo(f"centaur speedup vs cpu_only: min {summary['centaur_speedup_min']:.2f}x "
                   f"max {summary['centaur_speedup_max']:.2f}x")
        click.echo("centaur energy efficiency vs cpu_only: "
                   f"min {summary['centaur_efficiency_min']:.2f}x "
                   f"max {summary['centaur_efficiency_max']:.2f}x")
    if "cpu_over_cpugpu_speedup_mean" in summary:
        click.echo("cpu_only vs cpu_gpu: "
                   f"mean speedup {summary['cpu_over_cpugpu_speedup_mean']:.2f}x, "
                   f"mean efficiency {summary['cpu_over_cpugpu_efficiency_mean']:.2f}x")


# ---------------------------------------------------------------------------
# cachesim
# ---------------------------------------------------------------------------

@main.command("cachesim")
@click.option("--config", "config_path", required=True, help="Model config file.")
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", required=True, help="Stats CSV path.")
@click.option("--batches", default=DEFAULT_BATCHES, show_default=True)
@click.option("--cache-bytes", default="32M", show_default=True)
@click.option("--cache-ways", default=16, show_default=True, type=int)
@click.option("--cache-line", default=64, show_default=True, type=int)
@click.option("--warm-passes", default=1, show_default=True, type=int,
              help="Trace replays before the measured pass (0 = cold measurement).")
@click.option("--distribution", default="uniform", show_default=True)
@_guard
def cachesim_cmd(config_path, seed, out_path, batches, cache_bytes, cache_ways,
                 cache_line, warm_passes, distribution):
    """Simulate LLC behavior of the gather trace across batch sizes."""
    config = workload.model_config_from_file(config_path)
    cache_config = cachesim.CacheConfig(
        capacity_bytes=parse_size(cache_bytes, "--cache-bytes"),
        associativity=cache_ways,
        line_bytes=cache_line,
    )
    rows = []
    for batch_size in _parse_batches(batches):
        batch_seed = int(np.random.SeedSequence([seed, batch_size]).generate_state(1)[0])
        batch = workload.generate_batch(config, batch_size, distribution, seed=batch_seed)
        trace = cachesim.trace_from_batch(config, batch)
        stats = cachesim.simulate_steady(trace, cache_config, warm_passes=warm_passes)
        rows.append([batch_size, stats.accesses, stats.hits, stats.misses,
                     stats.miss_rate, stats.mpka])
    _write_rows(out_path, ("batch", "accesses", "hits", "misses", "miss_rate", "mpka"), rows)
    click.echo(f"wrote {len(rows)} rows to {out_path}")


def _write_rows(path: str, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


if __name__ == "__main__":
    main()
