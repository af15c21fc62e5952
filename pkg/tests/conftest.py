"""Shared pytest fixtures for QCNN tests."""
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from data import SIDE, TEST_FILE, TRAIN_FILES, serialize_record
from services.models import ExperimentConfig


def write_synthetic_cifar(
    root: Path,
    per_file_per_class: int = 4,
    test_per_class: int = 6,
    classes: tuple[int, ...] = (0, 1, 2),
    seed: int = 0,
) -> Path:
    """Write canonical-format batch files with a handful of random records.

    Class 0 images lean red and class 1 images lean blue so a tiny model has
    something to learn.
    """
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)

    def record(label: int) -> bytes:
        pixels = rng.integers(0, 256, size=(SIDE, SIDE, 3)).astype(np.uint8)
        if label == 0:
            pixels[..., 0] = np.maximum(pixels[..., 0], 180)
        elif label == 1:
            pixels[..., 2] = np.maximum(pixels[..., 2], 180)
        return serialize_record(label, pixels)

    for name in TRAIN_FILES:
        blob = b"".join(record(c) for _ in range(per_file_per_class) for c in classes)
        (root / name).write_bytes(blob)
    blob = b"".join(record(c) for _ in range(test_per_class) for c in classes)
    (root / TEST_FILE).write_bytes(blob)
    return root


@pytest.fixture
def cifar_dir(tmp_path):
    """Directory with synthetic CIFAR-10 batch files (20 train / 6 test images per class)."""
    return write_synthetic_cifar(tmp_path / "cifar")


@pytest.fixture
def tiny_config(cifar_dir, tmp_path):
    """A run small enough to train in well under a second."""
    return ExperimentConfig(
        color_space="LAB",
        channel="0",
        template="U1_CRX",
        seed=3,
        epochs=2,
        batch_size=4,
        hidden_width=4,
        image_size=4,
        train_per_class=8,
        test_per_class=4,
        data_dir=cifar_dir,
        output_dir=tmp_path / "runs",
    )


@pytest.fixture
def rng():
    """Seeded generator for test inputs."""
    return np.random.default_rng(1234)


@pytest.fixture
def cli_runner():
    """Click test runner."""
    return CliRunner()


@pytest.fixture
def clean_env(monkeypatch):
    """Remove QCNN_* variables so tests see the built-in defaults."""
    for name in ("QCNN_DATA_DIR", "QCNN_OUTPUT_DIR", "QCNN_CACHE_DIR", "QCNN_WORKERS", "QCNN_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    return monkeypatch
