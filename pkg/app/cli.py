"""
Command line interface: ``python -m app.cli <command>``.

Exit status: 0 all checks passed, 2 usage, 3 unreadable instance,
4 certificate violation, 5 oracle did not converge, 6 other failed check.
"""
import logging
import sys
from pathlib import Path
from typing import Optional, Tuple

import click

from app.config import settings, setup_logging
from app.schemas.schemas import GeneratorRanges, Instance
from app.services.harness_service import DEFAULT_SWEEP_N, SWEEP_KINDS, HarnessService
from app.utils.errors import (
    CertificateViolation,
    ExitCode,
    InstanceError,
    InstanceParseError,
    OracleLimitError,
    ParameterError,
)
from app.utils.instance_io import (
    dump_instance,
    load_instance,
    report_json,
    table_text,
    write_atomic,
    write_report,
    write_table,
    write_trace,
)

logger = logging.getLogger("profit_sched.cli")

SWEEP_HEADER = ("parameter", "value", "cost", "g", "certified_ratio", "reference_cost", "empirical_ratio")


def _fail(ctx: click.Context, code: ExitCode, message: str):
    click.echo(f"error: {message}", err=True)
    ctx.exit(int(code))


def _load(ctx: click.Context, path: str) -> Instance:
    try:
        return load_instance(path)
    except InstanceParseError as e:
        _fail(ctx, ExitCode.PARSE_FAILURE, f"{path}: {e}")


def _emit(text: str, out: Optional[str]):
    """Write to ``out`` atomically, or print to stdout."""
    if out:
        write_atomic(out, text)
    else:
        click.echo(text, nl=False)


@click.group(name="profit-sched")
@click.option("--log-level", default=None, help="Overrides LOG_LEVEL.")
def cli(log_level: Optional[str]):
    """Online profitable speed scaling: simulate, certify and compare with the offline optimum."""
    setup_logging(log_level or settings.LOG_LEVEL)


@cli.command()
@click.argument("instance_path", metavar="INSTANCE", type=click.Path(dir_okay=False))
@click.option("--delta", type=float, default=None, help="Level scaling in (0, 1]; defaults to alpha^(1-alpha).")
@click.option("--with-oracle", is_flag=True, help="Also compute the offline optimum.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Report file (JSON).")
@click.option("--trace", type=click.Path(dir_okay=False), default=None, help="Schedule trace file (CSV).")
@click.pass_context
def simulate(ctx: click.Context, instance_path: str, delta: Optional[float], with_oracle: bool,
             out: Optional[str], trace: Optional[str]):
    """Run the online algorithm on INSTANCE and write the run report."""
    instance = _load(ctx, instance_path)
    try:
        report = HarnessService.simulate(instance, delta=delta, with_oracle=with_oracle)
    except CertificateViolation as e:
        _fail(ctx, ExitCode.CERTIFICATE_VIOLATION, str(e))
    except (InstanceError, ParameterError, OracleLimitError) as e:
        _fail(ctx, ExitCode.USAGE, str(e))

    if out is None:
        settings.ensure_directories()
        out = str(Path(settings.OUTPUT_DIR) / f"run_{report.instance_digest[:12]}.json")
    write_report(report, out)
    if trace:
        write_trace(report, trace)

    failed = [check.name for check in report.checks if not check.passed]
    summary = (
        f"cost {report.cost.total:.9g} (energy {report.cost.energy:.9g}, lost {report.cost.lost_value:.9g}), "
        f"g {report.certificate.g:.9g}, certified ratio {report.certified_ratio:.6g} <= {report.ratio_bound:.6g}"
    )
    if report.oracle is not None:
        summary += f", optimum {report.oracle.total:.9g}"
    click.echo(summary)
    if failed:
        click.echo(f"failed checks: {', '.join(failed)}", err=True)
    ctx.exit(int(HarnessService.exit_code(report)))


@cli.command()
@click.argument("instance_path", metavar="INSTANCE", type=click.Path(dir_okay=False))
@click.option("--method", type=click.Choice(["auto", "pgd", "yds"]), default="auto", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Report file (JSON); stdout if omitted.")
@click.pass_context
def oracle(ctx: click.Context, instance_path: str, method: str, out: Optional[str]):
    """Offline optimum of a small INSTANCE by finish-subset enumeration."""
    instance = _load(ctx, instance_path)
    try:
        report = HarnessService.oracle_report(instance, method=method)
    except (InstanceError, ParameterError, OracleLimitError) as e:
        _fail(ctx, ExitCode.USAGE, str(e))

    if out:
        write_report(report, out)
    else:
        click.echo(report_json(report), nl=False)
    if not report.oracle.converged:
        click.echo("oracle did not converge", err=True)
        ctx.exit(int(ExitCode.ORACLE_NON_CONVERGENCE))


@cli.group()
def gen():
    """Instance generators."""


@gen.command("lower-bound")
@click.option("--n", "n", type=int, required=True)
@click.option("--alpha", type=float, required=True)
@click.option("--value-scale", type=float, default=1e9, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def gen_lower_bound(ctx: click.Context, n: int, alpha: float, value_scale: float, out: Optional[str]):
    """Single-processor instance with shrinking windows and growing workloads."""
    try:
        instance = HarnessService.gen_lower_bound(n, alpha, value_scale)
    except (InstanceError, ValueError) as e:
        _fail(ctx, ExitCode.USAGE, str(e))
    _emit(dump_instance(instance), out)


@gen.command("random")
@click.option("--seed", type=int, required=True)
@click.option("--n", "n", type=int, required=True)
@click.option("--m", "m", type=int, default=1, show_default=True)
@click.option("--alpha", type=float, default=2.0, show_default=True)
@click.option("--window", type=(float, float), default=None, help="Window length range.")
@click.option("--workload", type=(float, float), default=None, help="Workload range.")
@click.option("--value", type=(float, float), default=None, help="Value range.")
@click.option("--horizon", type=float, default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def gen_random(ctx: click.Context, seed: int, n: int, m: int, alpha: float, window: Optional[Tuple[float, float]],
               workload: Optional[Tuple[float, float]], value: Optional[Tuple[float, float]],
               horizon: Optional[float], out: Optional[str]):
    """Seeded random instance."""
    overrides = {"window": window, "workload": workload, "value": value, "horizon": horizon}
    try:
        ranges = GeneratorRanges(**{key: val for key, val in overrides.items() if val is not None})
        instance = HarnessService.gen_random(seed, n, m, alpha, ranges)
    except (InstanceError, ValueError) as e:
        _fail(ctx, ExitCode.USAGE, str(e))
    _emit(dump_instance(instance), out)


@cli.command()
@click.option("--kind", type=click.Choice(SWEEP_KINDS), required=True)
@click.option("--values", default=None, help="Comma-separated parameter values.")
@click.option("--alpha", type=float, default=2.0, show_default=True, help="Exponent of the n sweep.")
@click.option("--instance", "instance_path", type=click.Path(dir_okay=False), default=None,
              help="Instance of the delta sweep.")
@click.option("--with-oracle", is_flag=True, help="Reference the delta sweep against the offline optimum.")
@click.option("--workers", type=int, default=None, help="Concurrent points; defaults to SWEEP_WORKERS.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV file; stdout if omitted.")
@click.pass_context
def sweep(ctx: click.Context, kind: str, values: Optional[str], alpha: float, instance_path: Optional[str],
          with_oracle: bool, workers: Optional[int], out: Optional[str]):
    """Ratio table over n (lower-bound family) or delta (one instance)."""
    try:
        points = [float(v) for v in values.split(",")] if values else None
    except ValueError:
        _fail(ctx, ExitCode.USAGE, f"invalid --values {values!r}")
    if points is None:
        if kind == "delta":
            _fail(ctx, ExitCode.USAGE, "--values is required for a delta sweep")
        points = [float(n) for n in DEFAULT_SWEEP_N]

    instance = None
    if kind == "delta":
        if not instance_path:
            _fail(ctx, ExitCode.USAGE, "--instance is required for a delta sweep")
        instance = _load(ctx, instance_path)

    try:
        rows = HarnessService.sweep(kind, points, alpha=alpha, instance=instance, with_oracle=with_oracle,
                                    workers=workers, progress=out is not None)
    except (InstanceError, ParameterError, OracleLimitError) as e:
        _fail(ctx, ExitCode.USAGE, str(e))

    table = [tuple(getattr(row, name) for name in SWEEP_HEADER) for row in rows]
    if out:
        write_table(SWEEP_HEADER, table, out)
    else:
        click.echo(table_text(SWEEP_HEADER, table), nl=False)


def main():
    try:
        cli(standalone_mode=True)
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        sys.exit(int(ExitCode.INTERNAL))


if __name__ == "__main__":
    main()
