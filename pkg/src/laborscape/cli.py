"""Command-line interface.

Exit codes: 0 success, 1 computation error, 2 input or configuration error.
Set ``LABORSCAPE_LOG`` to error, warn, info or debug.
"""
from __future__ import annotations

import json
import logging
import os
import sys

import click

from . import occspace as oc
from . import regress as rg
from ._accel import BACKEND
from .errors import InputError, LaborscapeError
from .pipeline import (
    SINGLE_METRICS,
    Pipeline,
    StageError,
    Table,
    asdict_result,
    resolve_config,
    run_crosswalk,
    run_report,
    simpson_table,
)

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("LABORSCAPE_LOG", "warn").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _fail(exc: Exception):
    stage = getattr(exc, "stage", None)
    prefix = f"error [{stage}]" if stage else "error"
    click.echo(f"{prefix}: {exc}", err=True)
    sys.exit(getattr(exc, "exit_code", 1))


def _emit(table: Table, as_json: bool):
    if as_json:
        click.echo(json.dumps(table.records(), indent=2, ensure_ascii=False))
    else:
        click.echo(table.csv(), nl=False)


config_option = click.option(
    "--config", "config_path", default="toy", show_default=True, help="Pipeline config (JSON), or 'toy' for the bundled dataset."
)
json_option = click.option("--json", "as_json", is_flag=True, help="Machine-readable JSON output.")
seed_option = click.option("--seed", type=click.IntRange(min=0), default=None, help="Override the k-means seed.")
threshold_option = click.option("--threshold", type=click.FloatRange(0, 1), default=None, help="Proximity threshold for extra links.")
cutoff_option = click.option("--cutoff", type=float, default=None, help="RCA cutoff for an advantaged occupation.")


def _pipeline(config_path, seed=None, threshold=None, cutoff=None, out=None) -> Pipeline:
    try:
        cfg = resolve_config(config_path)
    except FileNotFoundError as exc:
        raise StageError("load", InputError(f"config not found: {exc.filename}")) from None
    except InputError as exc:
        raise StageError("load", exc) from None
    cfg = cfg.override(seed=seed, proximity_threshold=threshold, advantage_cutoff=cutoff, output_dir=out)
    return Pipeline(cfg)


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except LaborscapeError as exc:
            _fail(exc)


@click.group(cls=_Group)
@click.version_option(package_name="laborscape")
def main():
    """Automation-impact analytics for regional job markets."""
    _setup_logging()


@main.command()
@config_option
@json_option
def validate(config_path, as_json):
    """Cross-check employment, risk and attribute keys."""
    p = _pipeline(config_path)
    report = p.join_report
    if as_json:
        click.echo(json.dumps(report.as_dict(), indent=2, ensure_ascii=False))
    else:
        for key, items in report.as_dict().items():
            click.echo(f"{key}: {', '.join(items) if items else '-'}")


@main.command()
@config_option
@click.option("--out", type=click.Path(file_okay=False), required=True, help="Directory for crosswalk outputs.")
@json_option
def crosswalk(config_path, out, as_json):
    """Aggregate annotator votes and transfer source-taxonomy risk."""
    p = _pipeline(config_path)
    summary = run_crosswalk(p.config, out)
    if as_json:
        click.echo(json.dumps(summary, indent=2, ensure_ascii=False))
    else:
        click.echo(f"targets: {summary['targets']}")
        click.echo(f"pending adjudication: {', '.join(summary['pending']) or '-'}")
        if "risk_file" in summary:
            click.echo(f"risk written to {os.path.join(out, summary['risk_file'])}")


@main.command()
@config_option
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Report directory (default: config output_dir).")
@seed_option
@threshold_option
@cutoff_option
def report(config_path, out, seed, threshold, cutoff):
    """Run the whole pipeline and write every table plus a hashed manifest."""
    p = _pipeline(config_path, seed, threshold, cutoff, out)
    if p.config.output_dir is None:
        raise StageError("load", InputError("no output directory: pass --out or set output_dir"))
    manifest = run_report(p.config, p.config.output_dir)
    click.echo(f"wrote {len(manifest['outputs'])} files to {p.config.output_dir} (backend: {BACKEND})")


@main.command()
@click.argument("name")
@config_option
@json_option
@click.option("--occupation", default=None, help="Occupation code (scaling).")
@click.option("--group", "group", default=None, help="Grouping scheme: premium or elite (scaling, simpson).")
@seed_option
@threshold_option
@cutoff_option
def metric(name, config_path, as_json, occupation, group, seed, threshold, cutoff):
    """Print one table: impact, diversity, rca, proximity, scaling, simpson or distance."""
    if name not in SINGLE_METRICS:
        raise StageError("metric", InputError(f"unknown metric {name!r}; valid: {', '.join(SINGLE_METRICS)}"))
    p = _pipeline(config_path, seed, threshold, cutoff)
    if name == "simpson":
        rep = p.simpson("impact_vs_size", group or "premium")
        if as_json:
            click.echo(json.dumps(_clean_report(rep), indent=2, ensure_ascii=False))
        else:
            click.echo(simpson_table(rep).csv(), nl=False)
        return
    _emit(p.table(name, occupation=occupation, group=group), as_json)


def _clean_report(rep):
    from .pipeline import _clean

    return _clean(rep.as_dict())


@main.group(cls=_Group)
def occspace():
    """Occupation-space network commands."""


@occspace.command("build")
@config_option
@json_option
@threshold_option
@cutoff_option
def occspace_build(config_path, as_json, threshold, cutoff):
    """Build the network and print its nodes with closeness and degree."""
    p = _pipeline(config_path, threshold=threshold, cutoff=cutoff)
    net, close = p.network, p.closeness
    deg = net.degree()
    table = Table(
        ["code", "closeness", "degree", "risk"],
        [[c, close[c], deg[c], p.risk.get(c)] for c in sorted(net.nodes)],
    )
    _emit(table, as_json)


@occspace.command("export")
@config_option
@click.option("--format", "fmt", type=click.Choice(["edgelist", "json", "graph-xml"]), default="edgelist", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Output file.")
@threshold_option
@cutoff_option
def occspace_export(config_path, fmt, out, threshold, cutoff):
    """Write the network to a file."""
    p = _pipeline(config_path, threshold=threshold, cutoff=cutoff)
    try:
        paths = oc.export_network(p.network, p.closeness, p.risk, out, fmt, p.labels)
    except OSError as exc:
        raise StageError("occspace", InputError(str(exc))) from None
    for path in paths:
        click.echo(str(path))


@main.command()
@config_option
@json_option
@seed_option
@click.option("--scheme", type=click.Choice(["premium", "elite"]), default="premium", show_default=True)
def cluster(config_path, as_json, seed, scheme):
    """Print the premium (k-means) or elite (administrative) grouping."""
    p = _pipeline(config_path, seed)
    grouping = p.grouping(scheme)
    _emit(Table(["city", "scheme", "label"], [[c, grouping.scheme, lab] for c, lab in sorted(grouping.labels.items())]), as_json)


@main.command()
@config_option
@json_option
@click.option("--response", required=True, help="Response variable, e.g. impact_rate.")
@click.option("--predictor", required=True, help="Predictor variable, e.g. size.")
@click.option("--log-x", is_flag=True, help="log10-transform the predictor.")
@click.option("--log-y", is_flag=True, help="log10-transform the response.")
@click.option("--group", "group", default=None, help="Grouping scheme: premium or elite.")
@seed_option
def regress(config_path, as_json, response, predictor, log_x, log_y, group, seed):
    """Fit one OLS regression between per-city variables (optionally per group)."""
    p = _pipeline(config_path, seed)
    if response == "risk" and predictor == "closeness":
        results = [p.risk_vs_closeness]
    else:
        results = p.custom_regression(response, predictor, log_x, log_y, group)
    if as_json:
        click.echo(json.dumps([asdict_result(r) for r in results], indent=2))
    else:
        click.echo(Table(list(rg.RESULT_HEADER), [r.row() for r in results]).csv(), nl=False)


if __name__ == "__main__":
    main()
