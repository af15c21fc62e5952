#!/usr/bin/env python3
"""QCNN - CLI for the color-space study of quantum convolution filters.

Exit codes: 0 success, 1 config/usage error, 2 data error, 3 failed
numerical check.
"""
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

# Load environment variables BEFORE reading the runtime config
from dotenv import load_dotenv
load_dotenv()

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import BarColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

import harness
from colorspace import ColorSpaceError
from data import DataError, prepare_dataset
from harness import HarnessError, NumericalCheckError
from qconv import QConvError
from qsim import CircuitError
from services.config import ConfigError, RuntimeConfig, build_experiment_config, load_config_file
from services.models import ExperimentConfig, SweepCell
from templates import ChannelMode, FilterKind, TemplateError, build_template, dump_registry, dump_template, list_templates

console = Console()
err_console = Console(stderr=True)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


# ============ CLI SETUP ============

class QcnnGroup(click.Group):
    """Click group that reports usage errors with exit code 1."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_USAGE
            raise


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, rich_tracebacks=False, show_path=False)],
        force=True,
    )


@contextmanager
def _exit_on_error():
    """Translate domain errors into messages and exit codes."""
    try:
        yield
    except (ConfigError, TemplateError) as e:
        console.print(f"[red]Error:[/red] {e}")
        sys.exit(EXIT_USAGE)
    except DataError as e:
        console.print(f"[red]Data error:[/red] {e}")
        sys.exit(EXIT_DATA)
    except NumericalCheckError as e:
        console.print(f"[red]Check failed:[/red] {e}")
        sys.exit(EXIT_NUMERICAL)
    except (CircuitError, QConvError, ColorSpaceError, HarnessError) as e:
        console.print(f"[red]Error:[/red] {e}")
        sys.exit(EXIT_USAGE)


@click.group(cls=QcnnGroup)
@click.version_option(version="0.1.0", prog_name="qcnn")
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False),
              help="Logging level (default: QCNN_LOG_LEVEL or WARNING)")
@click.pass_context
def cli(ctx: click.Context, log_level: Optional[str]):
    """QCNN - quantum convolution filters across color spaces.

    Trains a one-kernel quantum convolution plus a small dense head on a
    two-class CIFAR-10 subset, for every color-space channel and filter.
    """
    with _exit_on_error():
        runtime = RuntimeConfig.from_env()
    level = (log_level or runtime.log_level).upper()
    if level not in LOG_LEVELS:
        console.print(f"[red]Error:[/red] unknown log level {level!r}")
        sys.exit(EXIT_USAGE)
    _setup_logging(level)
    ctx.ensure_object(dict)
    ctx.obj["runtime"] = runtime


def experiment_options(func):
    """Options shared by train and sweep; every flag overrides the config file."""
    options = [
        click.option("-c", "--config", "config_path", type=click.Path(path_type=Path),
                     help="key = value experiment file"),
        click.option("--color-space", help="RGB, LAB or YCBCR"),
        click.option("--channel", help="0, 1, 2, all, or a channel name (L, Cb, ...)"),
        click.option("-t", "--template", help="Filter name, e.g. U1_CRX or C14"),
        click.option("--seed", type=int, help="Seed for split, init, order and slopes"),
        click.option("--epochs", type=int, help="Training epochs (default 20)"),
        click.option("--batch-size", type=int, help="Mini-batch size (default 50)"),
        click.option("--learning-rate", type=float, help="Adam learning rate (default 0.01)"),
        click.option("--hidden-width", type=int, help="Hidden dense width (default 32)"),
        click.option("--stride", type=int, help="Convolution stride (default 1)"),
        click.option("--image-size", type=int, help="Resized image side (default 10)"),
        click.option("--classes", help="Two CIFAR labels, e.g. 0,1"),
        click.option("--train-per-class", type=int, help="Training images per class (default 500)"),
        click.option("--test-per-class", type=int, help="Test images per class (default 100)"),
        click.option("--trainable-cphase/--fixed-cphase", default=None,
                     help="Train the ancilla fan-in phases"),
        click.option("--repeats", type=int, help="Runs per sweep cell (seeds seed..seed+n-1)"),
        click.option("--data-dir", type=click.Path(path_type=Path), help="CIFAR-10 binary directory"),
        click.option("--output-dir", type=click.Path(path_type=Path), help="Run output directory"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _experiment(ctx: click.Context, config_path: Optional[Path], overrides: dict) -> ExperimentConfig:
    file_values = load_config_file(config_path) if config_path else None
    return build_experiment_config(file_values, overrides, ctx.obj["runtime"])


def _cache_dir(ctx: click.Context, no_cache: bool) -> Optional[Path]:
    return None if no_cache else ctx.obj["runtime"].cache_dir


# ============ PREPARE-DATA COMMAND ============

@cli.command("prepare-data")
@click.option("--color-space", "spaces", multiple=True, help="Color space (repeatable, default all)")
@click.option("--seed", "seeds", type=int, multiple=True, help="Split seed (repeatable, default 0)")
@click.option("--image-size", default=10, show_default=True, help="Resized image side")
@click.option("--data-dir", type=click.Path(path_type=Path), help="CIFAR-10 binary directory")
@click.option("--rebuild", is_flag=True, help="Ignore existing cache files")
@click.pass_context
def prepare_data(ctx: click.Context, spaces: tuple, seeds: tuple, image_size: int,
                 data_dir: Optional[Path], rebuild: bool):
    """Preprocess the two-class subset and fill the cache.

    Examples:
        qcnn prepare-data --data-dir ~/cifar-10-batches-bin
        qcnn prepare-data --color-space LAB --seed 0 --seed 1
    """
    runtime: RuntimeConfig = ctx.obj["runtime"]
    data_dir = data_dir or runtime.data_dir
    table = Table(show_header=True, header_style="bold")
    table.add_column("Space")
    table.add_column("Seed", justify="right")
    table.add_column("Train", justify="right")
    table.add_column("Test", justify="right")
    table.add_column("Shape")

    with _exit_on_error():
        for space in spaces or ("RGB", "LAB", "YCBCR"):
            for seed in seeds or (0,):
                data = prepare_dataset(data_dir, space, seed, image_size,
                                       cache_dir=runtime.cache_dir, rebuild=rebuild)
                table.add_row(data.space.value, str(seed), str(len(data.train_y)),
                              str(len(data.test_y)), "x".join(str(d) for d in data.train_x.shape[1:]))
    console.print(table)
    console.print(f"[dim]Cache: {runtime.cache_dir}[/dim]")


# ============ TRAIN COMMAND ============

@cli.command()
@experiment_options
@click.option("--plot", is_flag=True, help="Also write a gnuplot script for the curves")
@click.option("--no-cache", is_flag=True, help="Do not read or write the preprocessing cache")
@click.option("-q", "--quiet", is_flag=True, help="Minimal output")
@click.pass_context
def train(ctx: click.Context, config_path: Optional[Path], plot: bool, no_cache: bool,
          quiet: bool, **overrides):
    """Train and evaluate one (color space, channel, template) run.

    Examples:
        qcnn train --color-space LAB --channel L --template C14
        qcnn train -c experiment.env --seed 3 --plot
    """
    with _exit_on_error():
        config = _experiment(ctx, config_path, overrides)
        if quiet:
            metrics = harness.train_run(config, _cache_dir(ctx, no_cache), plot=plot)
        else:
            progress = Progress(
                TextColumn("[bold]{task.description}"),
                BarColumn(),
                TextColumn("{task.fields[status]}"),
                TimeElapsedColumn(),
                console=console,
            )
            with progress:
                task = progress.add_task(config.run_id, total=config.epochs, status="")

                def on_epoch(record):
                    progress.update(task, advance=1,
                                    status=f"loss {record.train_loss:.3f} test acc {record.test_acc:.3f}")

                metrics = harness.train_run(config, _cache_dir(ctx, no_cache), on_epoch=on_epoch, plot=plot)

    if quiet:
        console.print(f"{metrics.final_test_accuracy:.4f}")
        return

    reference = harness.reference_accuracy(config.color_space, config.channel, config.filter_kind)
    lines = [
        f"[bold]Run:[/bold] {config.run_id}",
        f"[bold]Template:[/bold] {config.template_kind}",
        f"[bold]Test accuracy:[/bold] {metrics.final_test_accuracy:.4f}"
        + (f"  [dim](reference {reference:.3f})[/dim]" if reference is not None else ""),
        f"[bold]Test loss:[/bold] {metrics.final_test_loss:.4f}",
        f"[bold]Parameters:[/bold] {metrics.n_parameters}",
        f"[bold]Optimizer steps:[/bold] {metrics.optimizer_steps}",
        f"[bold]Circuit evaluations:[/bold] {metrics.circuit_evaluations}"
        f" ({metrics.evaluations_per_image} per image)",
        f"[bold]Wall time:[/bold] {metrics.wall_seconds:.1f}s",
        f"[dim]Output: {harness.run_dir(config)}[/dim]",
    ]
    console.print(Panel("\n".join(lines), title="[green]Training complete[/green]", border_style="green"))


# ============ SWEEP COMMAND ============

def _parse_rows(rows: tuple) -> Optional[list[tuple[str, str]]]:
    if not rows:
        return None
    parsed = []
    for row in rows:
        space, sep, channel = row.partition(":")
        if not sep:
            raise ConfigError(f"Row must look like SPACE:CHANNEL (e.g. LAB:L or RGB:all), got {row!r}")
        parsed.append((space.strip(), channel.strip()))
    return parsed


@cli.command()
@experiment_options
@click.option("--row", "rows", multiple=True, help="SPACE:CHANNEL row (repeatable, default all 12)")
@click.option("--only", "templates", multiple=True, help="Template (repeatable, default all 8)")
@click.option("-w", "--workers", type=int, help="Parallel worker processes (default QCNN_WORKERS)")
@click.option("--fresh", is_flag=True, help="Ignore finished cells from a previous sweep")
@click.option("--no-cache", is_flag=True, help="Do not read or write the preprocessing cache")
@click.pass_context
def sweep(ctx: click.Context, config_path: Optional[Path], rows: tuple, templates: tuple,
          workers: Optional[int], fresh: bool, no_cache: bool, **overrides):
    """Run the color-space x template grid and write table.csv.

    Examples:
        qcnn sweep --data-dir ~/cifar-10-batches-bin -w 8
        qcnn sweep --row LAB:L --row LAB:A --only C14 --repeats 5
    """
    runtime: RuntimeConfig = ctx.obj["runtime"]

    def on_cell(cell: SweepCell):
        if cell.ok:
            console.print(f"[green]done[/green] {cell.row:>6} {cell.template:<7} {cell.mean_accuracy:.3f}")
        else:
            console.print(f"[red]failed[/red] {cell.row:>6} {cell.template:<7} {cell.error}")

    with _exit_on_error():
        base = _experiment(ctx, config_path, overrides)
        cells = harness.sweep(
            base,
            rows=_parse_rows(rows),
            templates=list(templates) or None,
            workers=workers or runtime.workers,
            cache_dir=_cache_dir(ctx, no_cache),
            resume=not fresh,
            on_cell=on_cell,
        )

    console.print(_sweep_table(cells))
    failed = [c for c in cells if not c.ok]
    if failed:
        console.print(f"[yellow]{len(failed)} cell(s) failed; rerun to retry them.[/yellow]")
    console.print(f"[dim]Output: {base.output_dir}[/dim]")


def _sweep_table(cells: list[SweepCell]) -> Table:
    labels = [k.label for k in FilterKind]
    present = [label for label in labels if any(c.template == label for c in cells)]
    table = Table(show_header=True, header_style="bold", title="Test accuracy (reference)")
    table.add_column("Row")
    for label in present:
        table.add_column(label, justify="right")

    rows: dict[tuple[str, str], dict[str, SweepCell]] = {}
    for cell in cells:
        rows.setdefault((cell.color_space, cell.channel), {})[cell.template] = cell
    for row_cells in rows.values():
        values = []
        for label in present:
            cell = row_cells.get(label)
            if cell is None:
                values.append("")
            elif not cell.ok:
                values.append("[red]error[/red]")
            else:
                ref = f" [dim]({cell.reference_accuracy:.3f})[/dim]" if cell.reference_accuracy is not None else ""
                values.append(f"{cell.mean_accuracy:.3f}{ref}")
        table.add_row(next(iter(row_cells.values())).row, *values)
    return table


# ============ GRADCHECK COMMAND ============

@cli.command()
@click.option("-t", "--template", "names", multiple=True, help="Template (repeatable, default all 8)")
@click.option("--mode", type=click.Choice(["single", "channel_overwrite", "both"]), default="both",
              show_default=True, help="Channel mode(s) to check")
@click.option("--trials", default=100, show_default=True, help="Random draws per template")
@click.option("--seed", default=0, show_default=True, help="Seed for the random draws")
@click.option("--tolerance", default=harness.GRAD_TOLERANCE, show_default=True, help="Relative error bound")
@click.option("--trainable-cphase", is_flag=True, help="Check with trainable fan-in phases")
def gradcheck(names: tuple, mode: str, trials: int, seed: int, tolerance: float, trainable_cphase: bool):
    """Compare adjoint gradients with central finite differences.

    Examples:
        qcnn gradcheck
        qcnn gradcheck -t U1_CROT --mode single --trials 500
    """
    modes = list(ChannelMode) if mode == "both" else [ChannelMode(mode)]
    table = Table(show_header=True, header_style="bold")
    table.add_column("Template")
    table.add_column("Params", justify="right")
    table.add_column("Max rel. error", justify="right")
    table.add_column("Result")

    failed = []
    with _exit_on_error():
        for name in names or [k.value for k in FilterKind]:
            for channel_mode in modes:
                report = harness.gradcheck(name, trials, channel_mode, seed, tolerance, trainable_cphase)
                table.add_row(
                    report.template,
                    str(len(report.per_parameter_max_error)),
                    f"{report.max_relative_error:.2e}",
                    "[green]ok[/green]" if report.passed else "[red]FAIL[/red]",
                )
                if not report.passed:
                    failed.append(report.template)
        console.print(table)
        if failed:
            raise NumericalCheckError(f"gradient mismatch in {', '.join(failed)}")


# ============ SELFTEST COMMAND ============

@cli.command()
@click.option("--quick", is_flag=True, help="Use 10x fewer random draws")
@click.option("--seed", default=0, show_default=True, help="Seed for the random draws")
def selftest(quick: bool, seed: int):
    """Run the simulator, gradient and color-space oracle suites."""
    with _exit_on_error():
        report = harness.selftest(seed=seed, quick=quick)
        table = Table(show_header=True, header_style="bold")
        table.add_column("Check")
        table.add_column("Result")
        table.add_column("Detail")
        table.add_column("Time", justify="right")
        for check in report.checks:
            table.add_row(
                check.name,
                "[green]ok[/green]" if check.passed else "[red]FAIL[/red]",
                check.detail,
                f"{check.seconds:.1f}s",
            )
        console.print(table)
        if not report.passed:
            raise NumericalCheckError(
                "self-test failed: " + ", ".join(c.name for c in report.checks if not c.passed)
            )


# ============ TEMPLATES COMMANDS ============

@cli.group()
def templates():
    """Inspect the filter circuits."""
    pass


@templates.command("list")
def templates_list():
    """List all filter circuits with their sizes."""
    table = Table(show_header=True, header_style="bold")
    table.add_column("Template")
    table.add_column("Mode")
    table.add_column("Qubits", justify="right")
    table.add_column("Trainable", justify="right")
    table.add_column("Encodings", justify="right")
    table.add_column("Gates", justify="right")
    for kind in list_templates():
        t = build_template(kind)
        table.add_row(t.name, kind.channel_mode.value, str(t.n_qubits), str(t.n_trainable),
                      str(t.n_encoding), str(len(t.gates)))
    console.print(table)


@templates.command("dump")
@click.argument("name", required=False)
@click.option("--mode", type=click.Choice([m.value for m in ChannelMode]), default=ChannelMode.SINGLE.value,
              show_default=True, help="Channel mode")
@click.option("--trainable-cphase", is_flag=True, help="Render with trainable fan-in phases")
def templates_dump(name: Optional[str], mode: str, trainable_cphase: bool):
    """Print one template (or all of them) as YAML."""
    with _exit_on_error():
        if name is None:
            click.echo(dump_registry(trainable_cphase), nl=False)
        else:
            click.echo(dump_template(build_template(name, mode, trainable_cphase)), nl=False)


if __name__ == "__main__":
    cli()
