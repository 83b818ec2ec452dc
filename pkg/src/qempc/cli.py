"""Command-line front end.

Usage:
    qempc validate fixture:SAT1D
    qempc bounds fixture:SAT1D --a 12 --b 5 --state 0.999
    qempc quantize part.json --a 12 --b 5 --laws-b 20 --out q.json
    qempc sweep fixture:HET2 --a 12 --b 5 --n 100000 --seed 7 --out r.csv
    qempc facets fixture:HET2 --b 5 --band 0.05 --out table.csv
    qempc rescale part.json --out scaled.json

A partition argument is a path to a partition document, or ``fixture:NAME``
for a bundled fixture.  Exit codes: 0 success, 1 domain-rule violation,
2 I/O or parse failure.
"""
from __future__ import annotations

import functools
import sys

import click

from . import __version__
from .bounds import NORM_MODES, control_error_report, format_report
from .errors import MalformedDocumentError, QempcError
from .fixtures import fixture_text
from .harness import (
    DEFAULT_DROP,
    DEFAULT_SAMPLES,
    EXPORTERS,
    ExperimentConfig,
    check_sweep,
    export_facets,
    export_sweep,
    facet_report,
    run_sweep,
)
from .partition import dump_partition, load_partition, partition_from_document, validate_partition, _read_json
from .quantize import FixedPointFormat, dump_quantized, quantize_partition
from .rescale import compute_scaling, rescale_partition

EXIT_DOMAIN = 1
EXIT_IO = 2


class DomainFailure(click.ClickException):
    exit_code = EXIT_DOMAIN


class IoFailure(click.ClickException):
    exit_code = EXIT_IO


def _read_source(source: str) -> str:
    if source.startswith("fixture:"):
        try:
            return fixture_text(source.split(":", 1)[1])
        except KeyError as exc:
            raise IoFailure(str(exc.args[0])) from None
    try:
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(f"cannot read {source}: {exc}") from None


def _load(source: str):
    text = _read_source(source)
    try:
        return load_partition(text)
    except MalformedDocumentError as exc:
        raise IoFailure(f"{source}: {exc}") from None
    except QempcError as exc:
        raise DomainFailure(f"{source}: {exc}") from None


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        click.echo(text, nl=False)
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {out}: {exc}") from None


def domain_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except click.ClickException:
            raise
        except MalformedDocumentError as exc:
            raise IoFailure(str(exc)) from None
        except OSError as exc:
            raise IoFailure(str(exc)) from None
        except (QempcError, ValueError) as exc:
            raise DomainFailure(str(exc)) from None

    return wrapper


def format_options(func):
    opts = [
        click.option("--a", "a", type=int, default=12, show_default=True, help="Total bits for every data class."),
        click.option("--b", "b", type=int, default=5, show_default=True, help="Fraction bits for every data class."),
    ]
    for cls in ("regions", "laws", "state"):
        opts.append(click.option(f"--{cls}-a", f"{cls}_a", type=int, default=None, help=f"Total bits for {cls}."))
        opts.append(click.option(f"--{cls}-b", f"{cls}_b", type=int, default=None, help=f"Fraction bits for {cls}."))
    for opt in reversed(opts):
        func = opt(func)
    return func


def _formats(kw) -> tuple[FixedPointFormat, FixedPointFormat, FixedPointFormat]:
    out = []
    for cls in ("regions", "laws", "state"):
        a = kw.pop(f"{cls}_a")
        b = kw.pop(f"{cls}_b")
        try:
            out.append(FixedPointFormat(kw["a"] if a is None else a, kw["b"] if b is None else b))
        except (TypeError, ValueError) as exc:
            raise click.BadParameter(f"{cls} format: {exc}") from None
    kw.pop("a")
    kw.pop("b")
    return tuple(out)


def _parse_state(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise click.BadParameter(f"cannot parse state {text!r}") from None


@click.group()
@click.version_option(__version__, prog_name="qempc")
def cli():
    """Fixed-point quantization error analysis for explicit MPC laws."""


@cli.command()
@click.argument("partition")
@click.option("--continuity-tol", type=float, default=1e-8, show_default=True)
def validate(partition, continuity_tol):
    """Check a partition document and summarise its facet pairs."""
    text = _read_source(partition)
    try:
        p = partition_from_document(_read_json(text))
        summary = validate_partition(p, continuity_tol=continuity_tol)
    except MalformedDocumentError as exc:
        raise IoFailure(f"{partition}: {exc}") from None
    except QempcError as exc:
        raise DomainFailure(f"{partition}: {exc}") from None
    click.echo(f"{partition}: n={p.n} m={p.m} regions={p.n_regions}")
    for fp, res in zip(summary.pairs, summary.residuals):
        click.echo(f"  pair i={fp.i} j={fp.j} h={fp.hp.h.tolist()} k={fp.hp.k!r} continuity residual {res:.3g}")
    click.echo(f"{len(summary.pairs)} facet pairs, worst continuity residual {summary.worst_residual:.3g}")


@cli.command()
@click.argument("partition")
@format_options
@click.option("--out", default=None, help="Output path (default stdout).")
@domain_errors
def quantize(partition, out, **kw):
    """Write the quantized partition as an integer-mantissa document."""
    fr, fl, fs = _formats(kw)
    qp = quantize_partition(_load(partition), fr, fl, fs)
    _emit(dump_quantized(qp) + "\n", out)


@cli.command()
@click.argument("partition")
@format_options
@click.option("--state", "state", required=True, help="State vector, comma or space separated.")
@click.option("--norm-mode", type=click.Choice(NORM_MODES), default="pointwise", show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Print the report as JSON.")
@domain_errors
def bounds(partition, state, norm_mode, as_json, **kw):
    """Bound report for a single state."""
    import json

    fr, fl, fs = _formats(kw)
    p = _load(partition)
    x = _parse_state(state)
    if len(x) != p.n:
        raise click.BadParameter(f"state needs {p.n} components, got {len(x)}")
    qp = quantize_partition(p, fr, fl, fs)
    report = control_error_report(p, qp, x, norm_mode=norm_mode)
    click.echo(json.dumps(report.to_dict(), indent=1) if as_json else format_report(report))


def experiment_options(func):
    opts = [
        click.option("--n", "n", type=int, default=DEFAULT_SAMPLES, show_default=True, help="Number of samples."),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True),
        click.option("--threads", type=click.IntRange(1, None), default=1, show_default=True),
        click.option("--drop-threshold", type=float, default=DEFAULT_DROP, show_default=True),
        click.option("--norm-mode", type=click.Choice(NORM_MODES), default="pointwise", show_default=True),
        click.option("--band", type=float, default=None, help="Near-facet band width (default: per-facet estimate)."),
        click.option("--out", default=None, help="Output path (default stdout)."),
    ]
    for opt in reversed(opts):
        func = opt(func)
    return func


def _summary(reports, p) -> None:
    chk = check_sweep(reports, p)
    click.echo(
        f"{chk.reports} reports, {chk.claimed} claimed, {chk.jumps} facet jumps, "
        f"{chk.corner_jumps} corner jumps, {chk.no_region} without region, "
        f"{chk.violations} dominance violations, {chk.localization_failures} band failures",
        err=True,
    )


@cli.command()
@click.argument("partition")
@format_options
@experiment_options
@click.option("--mode", type=click.Choice(["box", "facets"]), default="box", show_default=True)
@click.option("--format", "fmt", type=click.Choice(sorted(EXPORTERS)), default="csv", show_default=True)
@domain_errors
def sweep(partition, n, seed, threads, drop_threshold, norm_mode, band, out, mode, fmt, **kw):
    """Sampled bound-versus-error sweep, sorted by a priori bound."""
    formats = _formats(kw)
    p = _load(partition)
    cfg = ExperimentConfig(
        formats=formats,
        sample_count=n,
        seed=seed,
        mode="box_uniform" if mode == "box" else "near_facets",
        band_width=band,
        drop_threshold=drop_threshold,
        norm_mode=norm_mode,
    )
    reports = run_sweep(p, None, cfg, threads=threads)
    _summary(reports, p)
    if fmt == "svg_scatter" and len(reports) == 0:
        raise DomainFailure("nothing to plot: every report fell below the drop threshold")
    if out is None or out == "-":
        export_sweep(reports, sys.stdout, fmt)
    else:
        try:
            export_sweep(reports, out, fmt)
        except OSError as exc:
            raise IoFailure(f"cannot write {out}: {exc}") from None


@cli.command()
@click.argument("partition")
@format_options
@experiment_options
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@domain_errors
def facets(partition, n, seed, threads, drop_threshold, norm_mode, band, out, fmt, **kw):
    """Per-facet-pair table of maximal a posteriori bound and actual error."""
    formats = _formats(kw)
    p = _load(partition)
    cfg = ExperimentConfig(
        formats=formats,
        sample_count=n,
        seed=seed,
        mode="near_facets",
        band_width=band,
        drop_threshold=drop_threshold,
        norm_mode=norm_mode,
    )
    rows = facet_report(p, None, cfg, threads=threads)
    if out is None or out == "-":
        export_facets(rows, sys.stdout, fmt)
    else:
        try:
            export_facets(rows, out, fmt)
        except OSError as exc:
            raise IoFailure(f"cannot write {out}: {exc}") from None


@cli.command()
@click.argument("partition")
@click.option("--out", default=None, help="Output path (default stdout).")
@domain_errors
def rescale(partition, out):
    """Rescale the state box to [-1, 1] and normalize every constraint row."""
    p = _load(partition)
    scaled = rescale_partition(p, compute_scaling(p.lo, p.hi))
    _emit(dump_partition(scaled) + "\n", out)


def main(argv=None):
    return cli.main(args=argv, prog_name="qempc")


if __name__ == "__main__":
    main()
