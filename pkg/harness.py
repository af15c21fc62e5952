"""Experiment orchestration: single training runs, the color-space sweep,
gradient checks and the numerical self-test suite.

Run output (``<output_dir>/<run_id>/``):
- metrics.csv  epoch, train_loss, train_acc, test_loss, test_acc
               (no timings, so identical config + seed gives identical bytes)
- run.json     RunMetrics including wall-clock time and counters
- curves.gp    optional gnuplot script for the loss/accuracy curves

Sweep output (``<output_dir>/``): table.csv (rows x templates, mean
accuracy), cells.csv (one line per cell) and cells/<key>.json for resumption.
"""
import cmath
import csv
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

import colorspace
import nn
import qsim
from colorspace import ColorSpace, ImageTensor
from data import DataError, PreparedData, fisher_yates, prepare_dataset
from model import HybridModel
from services.config import ConfigError
from services.models import (
    EpochRecord,
    ExperimentConfig,
    GradcheckReport,
    RunMetrics,
    SelftestCheck,
    SelftestReport,
    SweepCell,
)
from templates import ChannelMode, FilterKind, build_template, list_templates, parse_channel_mode


# ============ CONSTANTS ============

EVAL_CHUNK = 100
GRAD_TOLERANCE = 1e-4
GRAD_FLOOR = 1e-6

METRICS_FILE = "metrics.csv"
RUN_FILE = "run.json"
PLOT_FILE = "curves.gp"
TABLE_FILE = "table.csv"
CELLS_FILE = "cells.csv"
CELLS_DIR = "cells"

METRICS_COLUMNS = ("epoch", "train_loss", "train_acc", "test_loss", "test_acc")

# (color space, channel) in table order
SWEEP_ROWS: tuple[tuple[str, str], ...] = (
    ("RGB", "0"), ("RGB", "1"), ("RGB", "2"),
    ("LAB", "0"), ("LAB", "1"), ("LAB", "2"),
    ("YCBCR", "0"), ("YCBCR", "1"), ("YCBCR", "2"),
    ("RGB", "all"), ("LAB", "all"), ("YCBCR", "all"),
)

_TEMPLATE_ORDER = tuple(FilterKind)

# Published single-run accuracies for each cell, in _TEMPLATE_ORDER.
REFERENCE_TABLE: dict[tuple[str, str], tuple[float, ...]] = {
    ("RGB", "0"): (0.591, 0.656, 0.685, 0.665, 0.650, 0.715, 0.695, 0.710),
    ("RGB", "1"): (0.716, 0.704, 0.665, 0.690, 0.735, 0.710, 0.700, 0.780),
    ("RGB", "2"): (0.715, 0.686, 0.685, 0.700, 0.735, 0.795, 0.735, 0.795),
    ("LAB", "0"): (0.654, 0.671, 0.720, 0.715, 0.715, 0.810, 0.735, 0.705),
    ("LAB", "1"): (0.507, 0.522, 0.565, 0.565, 0.585, 0.760, 0.765, 0.775),
    ("LAB", "2"): (0.615, 0.637, 0.735, 0.735, 0.720, 0.705, 0.705, 0.695),
    ("YCBCR", "0"): (0.687, 0.568, 0.685, 0.665, 0.690, 0.715, 0.670, 0.710),
    ("YCBCR", "1"): (0.548, 0.568, 0.585, 0.590, 0.600, 0.605, 0.595, 0.570),
    ("YCBCR", "2"): (0.608, 0.569, 0.620, 0.630, 0.635, 0.675, 0.660, 0.665),
    ("RGB", "all"): (0.685, 0.680, 0.675, 0.680, 0.755, 0.770, 0.710, 0.725),
    ("LAB", "all"): (0.720, 0.680, 0.705, 0.690, 0.700, 0.700, 0.735, 0.665),
    ("YCBCR", "all"): (0.585, 0.649, 0.590, 0.615, 0.720, 0.740, 0.660, 0.645),
}

logger = logging.getLogger(__name__)


# ============ EXCEPTIONS ============

class HarnessError(Exception):
    """Base exception for experiment orchestration errors."""
    pass


class NumericalCheckError(HarnessError):
    """Raised when a gradient check or self-test fails."""
    pass


def reference_accuracy(color_space: str, channel: str, kind: FilterKind) -> Optional[float]:
    row = REFERENCE_TABLE.get((color_space, channel))
    return None if row is None else row[_TEMPLATE_ORDER.index(kind)]


# ============ TRAINING ============

def select_channels(angles: np.ndarray, config: ExperimentConfig) -> np.ndarray:
    """(N, S, S, 3) -> (N, S, S, 1) for one channel, unchanged for 'all'."""
    index = config.channel_index
    return angles if index is None else angles[..., index:index + 1]


def make_generators(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent PCG64 streams for (parameter init, batch order, RReLU slopes)."""
    children = np.random.SeedSequence(seed).spawn(3)
    init, order, slopes = (np.random.Generator(np.random.PCG64(s)) for s in children)
    return init, order, slopes


def evaluate(model: HybridModel, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(mean loss, accuracy) in eval mode, no parameter updates."""
    total_loss, correct = 0.0, 0
    for start in range(0, len(y), EVAL_CHUNK):
        xb, yb = x[start:start + EVAL_CHUNK], y[start:start + EVAL_CHUNK]
        logits, _ = model.forward(xb, nn.EVAL)
        loss, _ = nn.softmax_xent(logits, yb)
        total_loss += loss * len(yb)
        correct += int(np.sum(np.argmax(logits, axis=-1) == yb))
    return total_loss / len(y), correct / len(y)


def load_data(config: ExperimentConfig, cache_dir: Optional[Path] = None) -> PreparedData:
    return prepare_dataset(
        config.data_dir,
        config.color_space,
        config.seed,
        config.image_size,
        cache_dir=cache_dir,
        classes=config.classes,
        train_per_class=config.train_per_class,
        test_per_class=config.test_per_class,
    )


def train_on(
    config: ExperimentConfig,
    data: PreparedData,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> RunMetrics:
    """Train and evaluate the hybrid model on already prepared tensors."""
    started = time.perf_counter()
    train_x, test_x = select_channels(data.train_x, config), select_channels(data.test_x, config)
    train_y, test_y = data.train_y, data.test_y

    template = build_template(config.filter_kind, config.channel_mode, config.trainable_cphase)
    init_rng, order_rng, slope_rng = make_generators(config.seed)
    model = HybridModel(template, config.image_size, config.hidden_width, init_rng, config.stride)
    adam = nn.AdamState.for_params(model.parameters(), lr=config.learning_rate)
    logger.info(f"{config.run_id}: {template.name}, {model.n_parameters} parameters, {len(train_y)} train images")

    records: list[EpochRecord] = []
    for epoch in range(1, config.epochs + 1):
        order = fisher_yates(len(train_y), order_rng)
        total_loss, correct = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, logits, grads = model.loss_and_grads(train_x[idx], train_y[idx], nn.TRAIN, slope_rng)
            model.set_parameters(nn.adam_step(adam, model.parameters(), grads))
            total_loss += loss * len(idx)
            correct += int(np.sum(np.argmax(logits, axis=-1) == train_y[idx]))
        test_loss, test_acc = evaluate(model, test_x, test_y)
        record = EpochRecord(
            epoch=epoch,
            train_loss=total_loss / len(order),
            train_acc=correct / len(order),
            test_loss=test_loss,
            test_acc=test_acc,
        )
        records.append(record)
        logger.debug(f"{config.run_id} epoch {epoch}: {record}")
        if on_epoch:
            on_epoch(record)

    if records:
        final_loss, final_acc = records[-1].test_loss, records[-1].test_acc
    else:
        final_loss, final_acc = evaluate(model, test_x, test_y)

    return RunMetrics(
        config=config,
        epochs=records,
        final_test_loss=final_loss,
        final_test_accuracy=final_acc,
        wall_seconds=time.perf_counter() - started,
        optimizer_steps=adam.step,
        circuit_evaluations=model.conv.evaluations,
        evaluations_per_image=model.n_features,
        n_parameters=model.n_parameters,
    )


def train_run(
    config: ExperimentConfig,
    cache_dir: Optional[Path] = None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
    write: bool = True,
    plot: bool = False,
) -> RunMetrics:
    """
    Preprocess, build, train and evaluate one configuration.

    Args:
        config: Validated experiment config
        cache_dir: Preprocessing cache directory (None disables caching)
        on_epoch: Callback after every epoch
        write: Write metrics.csv and run.json under output_dir/run_id
        plot: Also write a gnuplot script for the curves

    Returns:
        RunMetrics for the run
    """
    started = time.perf_counter()
    metrics = train_on(config, load_data(config, cache_dir), on_epoch)
    metrics = metrics.model_copy(update={"wall_seconds": time.perf_counter() - started})
    if write:
        write_run(metrics, plot=plot)
    return metrics


# ============ OUTPUT ============

def run_dir(config: ExperimentConfig) -> Path:
    return Path(config.output_dir) / config.run_id


def write_metrics_csv(path: Path, records: Sequence[EpochRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        for r in records:
            writer.writerow([r.epoch, repr(r.train_loss), repr(r.train_acc), repr(r.test_loss), repr(r.test_acc)])


def write_run(metrics: RunMetrics, plot: bool = False) -> Path:
    """Write metrics.csv, run.json and optionally curves.gp; returns the run directory."""
    target = run_dir(metrics.config)
    target.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(target / METRICS_FILE, metrics.epochs)
    (target / RUN_FILE).write_text(metrics.model_dump_json(indent=2), encoding="utf-8")
    if plot:
        (target / PLOT_FILE).write_text(gnuplot_script(metrics.config.run_id), encoding="utf-8")
    logger.info(f"Wrote run output to {target}")
    return target


def gnuplot_script(title: str) -> str:
    """Loss and accuracy curves from metrics.csv, rendered to curves.png."""
    return "\n".join([
        "set datafile separator ','",
        "set terminal pngcairo size 1000,400",
        "set output 'curves.png'",
        "set multiplot layout 1,2 title '" + title + "'",
        "set xlabel 'epoch'",
        "set ylabel 'loss'",
        f"plot '{METRICS_FILE}' using 1:2 skip 1 with lines title 'train', \\",
        f"     '{METRICS_FILE}' using 1:4 skip 1 with lines title 'test'",
        "set ylabel 'accuracy'",
        "set yrange [0:1]",
        f"plot '{METRICS_FILE}' using 1:3 skip 1 with lines title 'train', \\",
        f"     '{METRICS_FILE}' using 1:5 skip 1 with lines title 'test'",
        "unset multiplot",
        "",
    ])


# ============ SWEEP ============

def sweep_grid(
    base: ExperimentConfig,
    rows: Optional[Iterable[tuple[str, str]]] = None,
    templates: Optional[Iterable[Union[str, FilterKind]]] = None,
) -> list[ExperimentConfig]:
    """One config per (row, template); defaults to the full 12 x 8 grid."""
    rows = list(rows) if rows is not None else list(SWEEP_ROWS)
    kinds = list(templates) if templates is not None else list(_TEMPLATE_ORDER)
    configs = []
    for color_space, channel in rows:
        for kind in kinds:
            value = kind.value if isinstance(kind, FilterKind) else kind
            try:
                configs.append(ExperimentConfig.model_validate(
                    {**base.model_dump(), "color_space": color_space, "channel": channel, "template": value}
                ))
            except ValueError as e:
                raise ConfigError(f"Bad sweep cell ({color_space}, {channel}, {value}): {e}")
    return configs


def _cell_stub(config: ExperimentConfig) -> SweepCell:
    return SweepCell(
        color_space=config.color_space,
        channel=config.channel,
        row=config.row_label,
        template=config.filter_kind.label,
        reference_accuracy=reference_accuracy(config.color_space, config.channel, config.filter_kind),
        config_fingerprint=config.fingerprint,
    )


def run_cell(config: ExperimentConfig, cache_dir: Optional[Path] = None) -> SweepCell:
    """Train `repeats` runs (seeds seed, seed+1, ...) and summarize; never raises."""
    cell = _cell_stub(config)
    started = time.perf_counter()
    seeds = [config.seed + r for r in range(config.repeats)]
    accuracies = []
    try:
        for seed in seeds:
            run_config = config.model_copy(update={"seed": seed})
            metrics = train_run(run_config, cache_dir=cache_dir)
            accuracies.append(metrics.final_test_accuracy)
    except Exception as e:
        logger.warning(f"Sweep cell {cell.key} failed: {e}")
        return cell.model_copy(update={
            "seeds": seeds,
            "accuracies": accuracies,
            "runtime_seconds": time.perf_counter() - started,
            "error": f"{type(e).__name__}: {e}",
        })
    return cell.model_copy(update={
        "seeds": seeds,
        "accuracies": accuracies,
        "mean_accuracy": float(np.mean(accuracies)),
        "std_accuracy": float(np.std(accuracies)),
        "runtime_seconds": time.perf_counter() - started,
    })


def _atomic_write_text(path: Path, text: str) -> None:
    """Write through a temp file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(dir=path.parent, prefix=".tmp_", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(temp_path, path)
    except Exception:
        if os.path.exists(temp_path):
            os.unlink(temp_path)
        raise


def cell_path(output_dir: Path, cell: SweepCell) -> Path:
    return Path(output_dir) / CELLS_DIR / f"{cell.key}.json"


def load_cell(path: Path) -> Optional[SweepCell]:
    try:
        return SweepCell.model_validate_json(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        logger.warning(f"Ignoring unreadable cell file {path}: {e}")
        return None


def sweep(
    base: ExperimentConfig,
    rows: Optional[Iterable[tuple[str, str]]] = None,
    templates: Optional[Iterable[Union[str, FilterKind]]] = None,
    workers: int = 1,
    cache_dir: Optional[Path] = None,
    resume: bool = True,
    on_cell: Optional[Callable[[SweepCell], None]] = None,
) -> list[SweepCell]:
    """
    Run every cell of the grid and write table.csv and cells.csv.

    Finished cells are stored under cells/ and skipped on the next call when
    ``resume`` is set. Failed cells are recorded and the sweep continues.
    """
    output_dir = Path(base.output_dir)
    configs = sweep_grid(base, rows, templates)
    results: dict[str, SweepCell] = {}
    pending: list[ExperimentConfig] = []

    for config in configs:
        stub = _cell_stub(config)
        path = cell_path(output_dir, stub)
        cached = load_cell(path) if resume and path.is_file() else None
        if cached is not None and cached.ok and cached.config_fingerprint == stub.config_fingerprint:
            results[stub.key] = cached
        else:
            if cached is not None and cached.ok:
                logger.info(f"Settings changed for {stub.key}, recomputing")
            pending.append(config)
    logger.info(f"Sweep: {len(configs)} cells, {len(configs) - len(pending)} already done")

    if pending and cache_dir is not None:
        try:
            for space in sorted({c.color_space for c in pending}):
                for seed in sorted({c.seed + r for c in pending for r in range(c.repeats)}):
                    warm = pending[0].model_copy(update={"color_space": space, "seed": seed})
                    load_data(warm, cache_dir)
        except DataError as e:
            logger.warning(f"Cache warm-up failed, cells will report it: {e}")

    def finish(cell: SweepCell) -> None:
        _atomic_write_text(cell_path(output_dir, cell), cell.model_dump_json(indent=2))
        results[cell.key] = cell
        if on_cell:
            on_cell(cell)

    if workers <= 1 or len(pending) <= 1:
        for config in pending:
            finish(run_cell(config, cache_dir))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_cell, config, cache_dir) for config in pending]
            for future in as_completed(futures):
                finish(future.result())

    cells = [results[_cell_stub(c).key] for c in configs]
    write_sweep_tables(output_dir, cells)
    return cells


def write_sweep_tables(output_dir: Path, cells: Sequence[SweepCell]) -> None:
    """table.csv mirrors the row x template layout; cells.csv is one line per cell."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    labels = [k.label for k in _TEMPLATE_ORDER]
    by_row: dict[tuple[str, str], dict[str, SweepCell]] = {}
    for cell in cells:
        by_row.setdefault((cell.color_space, cell.channel), {})[cell.template] = cell

    with open(output_dir / TABLE_FILE, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["color_space", "row", *labels])
        for (space, channel), row_cells in by_row.items():
            row_label = next(iter(row_cells.values())).row
            values = []
            for label in labels:
                cell = row_cells.get(label)
                values.append("" if cell is None or cell.mean_accuracy is None else f"{cell.mean_accuracy:.3f}")
            writer.writerow([space, row_label, *values])

    with open(output_dir / CELLS_FILE, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([
            "color_space", "channel", "row", "template", "seeds", "mean_accuracy",
            "std_accuracy", "reference_accuracy", "runtime_seconds", "error",
        ])
        for cell in cells:
            writer.writerow([
                cell.color_space, cell.channel, cell.row, cell.template,
                " ".join(str(s) for s in cell.seeds),
                "" if cell.mean_accuracy is None else f"{cell.mean_accuracy:.4f}",
                "" if cell.std_accuracy is None else f"{cell.std_accuracy:.4f}",
                "" if cell.reference_accuracy is None else f"{cell.reference_accuracy:.3f}",
                f"{cell.runtime_seconds:.1f}",
                cell.error or "",
            ])


# ============ GRADIENT CHECK ============

def relative_error(analytic: np.ndarray, numeric: np.ndarray,
                   tolerance: float = GRAD_TOLERANCE, floor: float = GRAD_FLOOR) -> np.ndarray:
    """|a - f| / max(|f|, floor / tolerance): below tolerance iff the relative
    error is, or the absolute error is under the floor."""
    scale = np.maximum(np.abs(numeric), floor / tolerance)
    return np.abs(analytic - numeric) / scale


def gradcheck(
    template: Union[str, FilterKind],
    trials: int = 100,
    channel_mode: Union[str, ChannelMode] = ChannelMode.SINGLE,
    seed: int = 0,
    tolerance: float = GRAD_TOLERANCE,
    trainable_cphase: bool = False,
) -> GradcheckReport:
    """
    Compare adjoint gradients with central finite differences (h = 1e-4).

    Parameters are drawn from [0, 2π), encodings from [-π, π].

    Raises:
        TemplateError: If the template name is unknown
    """
    circuit = build_template(template, parse_channel_mode(channel_mode), trainable_cphase)
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = np.zeros(circuit.n_trainable)
    for _ in range(trials):
        params = rng.uniform(0.0, 2 * math.pi, size=circuit.n_trainable)
        encodings = rng.uniform(-math.pi, math.pi, size=circuit.n_encoding)
        analytic = qsim.gradient(circuit, params, encodings)
        numeric = qsim.finite_difference_gradient(circuit, params, encodings)
        worst = np.maximum(worst, relative_error(analytic, numeric, tolerance))
    max_error = float(worst.max()) if worst.size else 0.0
    logger.info(f"gradcheck {circuit.name}: max relative error {max_error:.3e} over {trials} draws")
    return GradcheckReport(
        template=circuit.name,
        channel_mode=parse_channel_mode(channel_mode).value,
        trials=trials,
        tolerance=tolerance,
        max_relative_error=max_error,
        per_parameter_max_error=[float(e) for e in worst],
        passed=max_error < tolerance,
    )


# ============ SELF-TEST ============

def _eq2_crot(phi: float, theta: float, omega: float) -> np.ndarray:
    m = np.eye(4, dtype=np.complex128)
    m[2, 2] = cmath.exp(-1j * (phi + omega) / 2) * math.cos(theta / 2)
    m[2, 3] = -cmath.exp(1j * (phi - omega) / 2) * math.sin(theta / 2)
    m[3, 2] = cmath.exp(-1j * (phi - omega) / 2) * math.sin(theta / 2)
    m[3, 3] = cmath.exp(1j * (phi + omega) / 2) * math.cos(theta / 2)
    return m


def check_gate_fidelity(rng: np.random.Generator, draws: int = 100) -> tuple[bool, str]:
    """Gate matrices against their closed forms."""
    worst = 0.0
    for _ in range(draws):
        a, b, c = rng.uniform(-2 * math.pi, 2 * math.pi, size=3)
        expected = {
            qsim.GateKind.CROT: (_eq2_crot(a, b, c), (a, b, c)),
            qsim.GateKind.CPHASE: (np.diag([1, 1, 1, cmath.exp(1j * a)]), (a,)),
            qsim.GateKind.RZ: (np.diag([cmath.exp(-0.5j * a), cmath.exp(0.5j * a)]), (a,)),
            qsim.GateKind.RX: (np.array([[math.cos(a / 2), -1j * math.sin(a / 2)],
                                         [-1j * math.sin(a / 2), math.cos(a / 2)]]), (a,)),
            qsim.GateKind.H: (np.array([[1, 1], [1, -1]]) / math.sqrt(2), ()),
        }
        for kind, (matrix, values) in expected.items():
            worst = max(worst, float(np.max(np.abs(qsim.gate_matrix(kind, values) - matrix))))
    return worst <= 1e-14, f"max entry deviation {worst:.2e}"


def check_unitarity(rng: np.random.Generator, draws: int = 1000) -> tuple[bool, str]:
    worst = 0.0
    for kind in qsim.GateKind:
        values = rng.uniform(0.0, 2 * math.pi, size=(draws, kind.arity))
        u = qsim.gate_matrix(kind, values if kind.arity else ())
        product = qsim.dagger(u) @ u
        worst = max(worst, float(np.max(np.abs(product - np.eye(u.shape[-1])))))
    return worst <= 1e-12, f"max |U†U - I| = {worst:.2e}"


def check_oracle_equivalence(rng: np.random.Generator, circuits: int = 200) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(circuits):
        n = int(rng.integers(1, qsim.MAX_ORACLE_QUBITS + 1))
        gates = qsim.random_circuit(rng, n, int(rng.integers(1, 21)))
        chained = qsim.run_gates(gates, n).amplitudes
        dense = qsim.dense_unitary_oracle(gates, n)[:, 0]
        worst = max(worst, float(np.max(np.abs(chained - dense))))
    return worst <= 1e-10, f"max amplitude difference {worst:.2e} over {circuits} circuits"


def check_gradients(draws: int = 100) -> tuple[bool, str]:
    worst_name, worst = "", 0.0
    for kind in list_templates():
        report = gradcheck(kind.filter_kind, draws, kind.channel_mode)
        if report.max_relative_error >= worst:
            worst_name, worst = report.template, report.max_relative_error
    return worst < GRAD_TOLERANCE, f"worst {worst_name}: {worst:.2e}"


def check_colorspace_anchors() -> tuple[bool, str]:
    rgb = ImageTensor(np.array([[[1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]]), ColorSpace.RGB01)
    lab = colorspace.rgb_to_lab(rgb).values[0]
    ycc = colorspace.rgb_to_ycbcr(rgb).values[0]
    checks = [
        abs(lab[0, 0] - 100.0) < 1e-4 and abs(lab[0, 1]) < 0.01 and abs(lab[0, 2]) < 0.01,
        np.allclose(lab[1], 0.0, atol=1e-9),
        np.allclose(lab[2], [53.24, 80.09, 67.20], atol=0.05),
        np.allclose(ycc[0], [235.0, 128.0, 128.0], atol=1e-9),
        np.allclose(ycc[1], [16.0, 128.0, 128.0], atol=1e-9),
    ]
    return all(checks), f"white {lab[0].round(3)}, red {lab[2].round(3)}"


def selftest(seed: int = 0, quick: bool = False) -> SelftestReport:
    """Run every numerical oracle suite; ``quick`` cuts draw counts by 10x."""
    rng = np.random.Generator(np.random.PCG64(seed))
    scale = 10 if quick else 1
    suites: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
        ("gate_fidelity", lambda: check_gate_fidelity(rng, 100 // scale)),
        ("gate_unitarity", lambda: check_unitarity(rng, 1000 // scale)),
        ("oracle_equivalence", lambda: check_oracle_equivalence(rng, 200 // scale)),
        ("gradients", lambda: check_gradients(100 // scale)),
        ("colorspace_anchors", check_colorspace_anchors),
    ]
    checks = []
    for name, suite in suites:
        started = time.perf_counter()
        passed, detail = suite()
        checks.append(SelftestCheck(name=name, passed=passed, detail=detail,
                                    seconds=time.perf_counter() - started))
        logger.info(f"selftest {name}: {'ok' if passed else 'FAILED'} ({detail})")
    return SelftestReport(checks=checks)
