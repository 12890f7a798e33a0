"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 unreadable input or
unwritable output, 4 internal invariant breach.
"""

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .config import load_config
from .errors import InputError, RaincheckError
from .grid_store import grid_from_long_csv, format_descriptor
from .pipeline import emit_outputs, flag_summary, run_pipeline

logger = logging.getLogger("raincheck")


def _run(config_path, stages, jobs=1, out=None, no_exclude=False):
    config = load_config(config_path)
    if no_exclude:
        config = replace(config, exclude_inconsistent=False)
    report = run_pipeline(config, jobs=jobs, stages=stages)
    out_dir = Path(out) if out else config.output_dir
    written = emit_outputs(report, out_dir)
    for pr in report.pairs:
        click.echo(f"{pr.station_id}\t{pr.product_id}\t{pr.status}")
    click.echo(f"wrote {len(written)} files to {out_dir}")
    return report


config_option = click.option(
    "--config", "config", required=True, type=click.Path(dir_okay=False),
    help="TOML run configuration.",
)
jobs_option = click.option("--jobs", default=1, show_default=True, type=click.IntRange(1),
                           help="Worker threads for station-product pairs.")
out_option = click.option("--out", type=click.Path(file_okay=False),
                          help="Override the configured output directory.")


@click.group()
@click.option("-v", "--verbose", count=True)
def cli(verbose):
    """Point-to-pixel validation of gridded rainfall against rain gauges."""
    logging.basicConfig(
        level=logging.WARNING - 10 * min(verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@config_option
@out_option
def qc(config, out):
    """Quality-control every configured station series."""
    cfg = load_config(config)
    report = run_pipeline(cfg, stages=())
    out_dir = Path(out) if out else cfg.output_dir
    emit_outputs(report, out_dir)
    for st in report.stations:
        r = st.qc_report
        click.echo(
            f"{r.station_id}\tcompleteness {r.completeness_after:.3f}\t"
            f"{'eligible' if r.eligible else 'ineligible'}\t"
            f"{json.dumps(flag_summary(report)[r.station_id], sort_keys=True)}"
        )


@cli.command()
@config_option
@jobs_option
@out_option
@click.option("--no-exclude", is_flag=True,
              help="Keep spatially inconsistent products in the validation.")
def validate(config, jobs, out, no_exclude):
    """Run the full pipeline."""
    _run(config, {"spatial", "annual", "seasonal", "intensity"}, jobs, out, no_exclude)


@cli.command()
@config_option
@out_option
def spatial(config, out):
    """Climatology maps and blockiness scores for each product."""
    cfg = load_config(config)
    report = run_pipeline(cfg, stages={"spatial"})
    emit_outputs(report, Path(out) if out else cfg.output_dir)
    for p in report.products:
        scores = {k: s.blockiness for k, s in p.scores.items()}
        click.echo(f"{p.product_id}\t{p.verdict}\t{json.dumps(scores, sort_keys=True)}")


@cli.command()
@config_option
@jobs_option
@out_option
def seasonal(config, jobs, out):
    """Harmonic occurrence models and the rain-day threshold sweep."""
    _run(config, {"seasonal"}, jobs, out)


@cli.command()
@config_option
@jobs_option
@out_option
def intensity(config, jobs, out):
    """Rain-day contingency, POD and intensity-category analysis."""
    _run(config, {"intensity"}, jobs, out)


@cli.group()
def grid():
    """Grid file utilities."""


@grid.command("import-csv")
@click.argument("csv_path", type=click.Path(dir_okay=False, exists=True))
@click.option("--descriptor", "descriptor_path", required=True, type=click.Path(dir_okay=False))
@click.option("--payload", "payload_path", required=True, type=click.Path(dir_okay=False))
@click.option("--sentinel", default=-9999.0, show_default=True, type=float)
def import_csv(csv_path, descriptor_path, payload_path, sentinel):
    """Convert a long-format date,lat,lon,value CSV into descriptor + .f32 payload."""
    try:
        with open(csv_path, encoding="utf-8") as fh:
            raw = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {csv_path}: {exc}") from exc
    descriptor, cube = grid_from_long_csv(raw, sentinel)
    try:
        with open(descriptor_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_descriptor(descriptor))
        with open(payload_path, "wb") as fh:
            fh.write(np.ascontiguousarray(cube, dtype="<f4").tobytes())
    except OSError as exc:
        raise InputError(f"cannot write grid: {exc}") from exc
    click.echo(f"{descriptor.ntime}x{descriptor.nlat}x{descriptor.nlon} grid written")


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="raincheck", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except RaincheckError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
