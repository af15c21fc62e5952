"""CIFAR-10 binary ingestion, class filtering, seeded splits and the
preprocessed-tensor cache.

Binary layout (one record = 3073 bytes, 10000 records per file):
    1 label byte (0-9), then 1024 R, 1024 G, 1024 B bytes, each plane row-major.

Cache layout (little-endian):
    8s magic "QCNNCACH" | u16 version | u8 color-space tag | u8 reserved |
    u32 height | u32 width | u32 channels | u32 count |
    count x u8 labels | count*height*width*channels x f64 angles
"""
import logging
import os
import struct
import tempfile
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

import colorspace
from colorspace import ColorSpace, ImageTensor


# ============ CONSTANTS ============

SIDE = 32
IMAGE_BYTES = 3 * SIDE * SIDE
RECORD_BYTES = IMAGE_BYTES + 1
N_LABELS = 10
TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
TEST_FILE = "test_batch.bin"
BINARY_SUBDIR = "cifar-10-batches-bin"
CLASS_NAMES = (
    "airplane", "automobile", "bird", "cat", "deer",
    "dog", "frog", "horse", "ship", "truck",
)

DEFAULT_CLASSES = (0, 1)
TRAIN_PER_CLASS = 500
TEST_PER_CLASS = 100
PRNG_NAME = "PCG64"

CACHE_MAGIC = b"QCNNCACH"
CACHE_VERSION = 1
CACHE_HEADER = struct.Struct("<8sHBBIIII")
CACHE_SUFFIX = ".qcc"
SPACE_TAGS = {ColorSpace.RGB01: 1, ColorSpace.LAB: 2, ColorSpace.YCBCR: 3}

logger = logging.getLogger(__name__)


# ============ EXCEPTIONS ============

class DataError(Exception):
    """Base exception for dataset errors."""
    pass


class DataMissingError(DataError):
    """Raised when an expected data file does not exist."""
    pass


class DataFormatError(DataError):
    """Raised on truncated records, bad labels or corrupt caches."""
    pass


# ============ TYPES ============

class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class CifarRecords:
    """Parsed records of one split, pixels kept as uint8 (N, 32, 32, 3)."""

    labels: np.ndarray
    pixels: np.ndarray
    split: Split

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def rgb01(self, indices: Union[int, Sequence[int], np.ndarray]) -> ImageTensor:
        """Pixels / 255 as RGB01, one image or a stack."""
        return ImageTensor(self.pixels[indices].astype(np.float64) / 255.0, ColorSpace.RGB01)


@dataclass(frozen=True)
class RawCifar:
    train: CifarRecords
    test: CifarRecords


@dataclass(frozen=True)
class Dataset:
    """A class-balanced subset; labels are positions in the class tuple."""

    images: ImageTensor
    labels: np.ndarray
    split: Split
    source_indices: np.ndarray
    classes: tuple[int, ...] = DEFAULT_CLASSES

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __getitem__(self, i: int) -> tuple[ImageTensor, int]:
        return ImageTensor(self.images.values[i], self.images.space), int(self.labels[i])


@dataclass(frozen=True)
class PreparedData:
    """Angle tensors (N, S, S, 3) ready for the model."""

    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    space: ColorSpace


# ============ BINARY FORMAT ============

def parse_records(blob: bytes, split: Split = Split.TRAIN, source: str = "<bytes>") -> CifarRecords:
    """
    Parse canonical CIFAR-10 binary records.

    Raises:
        DataFormatError: If the blob is not a whole number of records or a
            label byte exceeds 9
    """
    if len(blob) % RECORD_BYTES:
        raise DataFormatError(
            f"{source}: {len(blob)} bytes is not a multiple of {RECORD_BYTES} (truncated record)"
        )
    rows = np.frombuffer(blob, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    labels = rows[:, 0].copy()
    if labels.size and labels.max() >= N_LABELS:
        bad = int(np.flatnonzero(labels >= N_LABELS)[0])
        raise DataFormatError(f"{source}: record {bad} has label {labels[bad]} > 9")
    pixels = rows[:, 1:].reshape(-1, 3, SIDE, SIDE).transpose(0, 2, 3, 1).copy()
    return CifarRecords(labels, pixels, split)


def serialize_record(label: int, pixels: np.ndarray) -> bytes:
    """Inverse of parse_records for one (32, 32, 3) uint8 image."""
    planes = np.asarray(pixels, dtype=np.uint8).transpose(2, 0, 1)
    return bytes([int(label)]) + planes.tobytes()


def read_batch_file(path: Union[str, Path], split: Split = Split.TRAIN) -> CifarRecords:
    path = Path(path)
    if not path.is_file():
        raise DataMissingError(f"CIFAR-10 batch file not found: {path}")
    return parse_records(path.read_bytes(), split, str(path))


def _resolve_dir(dir_path: Union[str, Path]) -> Path:
    root = Path(dir_path).expanduser()
    nested = root / BINARY_SUBDIR
    if not (root / TEST_FILE).exists() and nested.is_dir():
        return nested
    return root


def load_cifar10_binary(dir_path: Union[str, Path]) -> RawCifar:
    """
    Load the five training batches and the test batch.

    Args:
        dir_path: Directory holding data_batch_{1..5}.bin and test_batch.bin
            (or its cifar-10-batches-bin subdirectory)

    Returns:
        RawCifar with 50000 train and 10000 test records for the canonical files

    Raises:
        DataMissingError: If a batch file is missing
        DataFormatError: On truncated records or bad labels
    """
    root = _resolve_dir(dir_path)
    parts = [read_batch_file(root / name, Split.TRAIN) for name in TRAIN_FILES]
    train = CifarRecords(
        np.concatenate([p.labels for p in parts]),
        np.concatenate([p.pixels for p in parts]),
        Split.TRAIN,
    )
    test = read_batch_file(root / TEST_FILE, Split.TEST)
    logger.info(f"Loaded CIFAR-10 from {root}: {len(train)} train, {len(test)} test")
    return RawCifar(train, test)


# ============ SPLITS ============

def make_rng(seed: int) -> np.random.Generator:
    """The split generator: numpy PCG64 seeded directly with the integer seed."""
    return np.random.Generator(np.random.PCG64(seed))


def fisher_yates(n: int, rng: np.random.Generator) -> np.ndarray:
    """Permutation of range(n) by an explicit Fisher-Yates pass (j ~ integers(0, i + 1))."""
    order = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        order[i], order[j] = order[j], order[i]
    return order


def _select(records: CifarRecords, classes: Sequence[int], per_class: int,
            rng: np.random.Generator) -> Dataset:
    chosen, labels = [], []
    for position, cls in enumerate(classes):
        members = np.flatnonzero(records.labels == cls)
        if len(members) < per_class:
            raise DataError(
                f"{records.split.value}: class {cls} has {len(members)} images, need {per_class}"
            )
        picked = members[fisher_yates(len(members), rng)[:per_class]]
        chosen.append(picked)
        labels.append(np.full(per_class, position, dtype=np.int64))
    indices = np.concatenate(chosen)
    return Dataset(records.rgb01(indices), np.concatenate(labels), records.split, indices, tuple(classes))


def make_split(
    raw: RawCifar,
    seed: int,
    classes: Sequence[int] = DEFAULT_CLASSES,
    train_per_class: int = TRAIN_PER_CLASS,
    test_per_class: int = TEST_PER_CLASS,
) -> tuple[Dataset, Dataset]:
    """
    Class-balanced train/test subsets, deterministic for a fixed seed.

    Train images come only from the training files, test images only from
    the test file.
    """
    if len(set(classes)) != len(classes) or any(not 0 <= c < N_LABELS for c in classes):
        raise DataError(f"Classes must be distinct CIFAR labels, got {classes}")
    rng = make_rng(seed)
    train = _select(raw.train, classes, train_per_class, rng)
    test = _select(raw.test, classes, test_per_class, rng)
    logger.info(f"Split seed={seed}: {len(train)} train, {len(test)} test")
    return train, test


# ============ CACHE ============

def cache_path(cache_dir: Union[str, Path], space: ColorSpace, seed: int, size: int,
               split: Split, classes: Sequence[int] = DEFAULT_CLASSES,
               per_class: Optional[int] = None) -> Path:
    """Cache file for one split; non-default classes and subset sizes extend the name."""
    suffix = "" if tuple(classes) == DEFAULT_CLASSES else "_c" + "-".join(str(c) for c in classes)
    default_count = TRAIN_PER_CLASS if split is Split.TRAIN else TEST_PER_CLASS
    if per_class is not None and per_class != default_count:
        suffix += f"_n{per_class}"
    name = f"cifar_{space.value.lower()}_seed{seed}_size{size}_{split.value}{suffix}{CACHE_SUFFIX}"
    return Path(cache_dir).expanduser() / name


def write_cache(path: Union[str, Path], values: np.ndarray, labels: np.ndarray, space: ColorSpace) -> None:
    """Atomically write one preprocessed split."""
    path = Path(path)
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.ndim != 4 or values.shape[0] != len(labels):
        raise DataFormatError(f"Cache payload must be (N, H, W, C) with N labels, got {values.shape}")
    count, height, width, channels = values.shape
    header = CACHE_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, SPACE_TAGS[space], 0, height, width, channels, count)

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(dir=path.parent, prefix=".tmp_", suffix=CACHE_SUFFIX)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(header)
            f.write(np.asarray(labels, dtype=np.uint8).tobytes())
            f.write(values.tobytes())
        os.replace(temp_path, path)
    except Exception:
        if os.path.exists(temp_path):
            os.unlink(temp_path)
        raise


def read_cache(path: Union[str, Path]) -> tuple[np.ndarray, np.ndarray, ColorSpace]:
    """
    Read a cache file written by write_cache.

    Returns:
        (values (N, H, W, C) float64, labels (N,) int64, source color space)

    Raises:
        DataMissingError: If the file does not exist
        DataFormatError: On bad magic, version, tag or payload size
    """
    path = Path(path)
    if not path.is_file():
        raise DataMissingError(f"Cache file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < CACHE_HEADER.size:
        raise DataFormatError(f"{path}: shorter than the cache header")
    magic, version, tag, _, height, width, channels, count = CACHE_HEADER.unpack_from(blob)
    if magic != CACHE_MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != CACHE_VERSION:
        raise DataFormatError(f"{path}: cache version {version}, expected {CACHE_VERSION}")
    spaces = {v: k for k, v in SPACE_TAGS.items()}
    if tag not in spaces:
        raise DataFormatError(f"{path}: unknown color-space tag {tag}")

    n_values = count * height * width * channels
    expected = CACHE_HEADER.size + count + 8 * n_values
    if len(blob) != expected:
        raise DataFormatError(f"{path}: {len(blob)} bytes, expected {expected}")
    offset = CACHE_HEADER.size
    labels = np.frombuffer(blob, dtype=np.uint8, count=count, offset=offset).astype(np.int64)
    values = np.frombuffer(blob, dtype="<f8", count=n_values, offset=offset + count)
    return values.reshape(count, height, width, channels).astype(np.float64), labels, spaces[tag]


# ============ PREPARATION ============

def preprocess_dataset(dataset: Dataset, space: ColorSpace, size: int) -> np.ndarray:
    """Angle tensor (N, size, size, 3) for a Dataset of RGB01 images."""
    return colorspace.preprocess(dataset.images, space, size).values


def prepare_dataset(
    data_dir: Union[str, Path],
    space: Union[str, ColorSpace],
    seed: int,
    size: int,
    cache_dir: Optional[Union[str, Path]] = None,
    classes: Sequence[int] = DEFAULT_CLASSES,
    train_per_class: int = TRAIN_PER_CLASS,
    test_per_class: int = TEST_PER_CLASS,
    rebuild: bool = False,
) -> PreparedData:
    """
    Preprocessed train/test tensors, read from or written to the cache.

    A corrupt cache is logged and rebuilt. Cache keys are (space, seed, size,
    split), plus the class pair when it is not the default.
    """
    space = colorspace.parse_color_space(space)
    if space not in SPACE_TAGS:
        raise DataError(f"Datasets are prepared in RGB, LAB or YCBCR, not {space.value}")

    paths = {}
    if cache_dir is not None:
        counts = {Split.TRAIN: train_per_class, Split.TEST: test_per_class}
        paths = {s: cache_path(cache_dir, space, seed, size, s, classes, counts[s]) for s in Split}
        if not rebuild and all(p.is_file() for p in paths.values()):
            try:
                train_x, train_y, train_space = read_cache(paths[Split.TRAIN])
                test_x, test_y, test_space = read_cache(paths[Split.TEST])
                if train_space is not space or test_space is not space:
                    raise DataFormatError(
                        f"cache holds {train_space.value}/{test_space.value} tensors, expected {space.value}"
                    )
                logger.debug(f"Cache hit for {space.value} seed={seed} size={size}")
                return PreparedData(train_x, train_y, test_x, test_y, space)
            except DataFormatError as e:
                logger.warning(f"Rebuilding corrupt cache: {e}")

    raw = load_cifar10_binary(data_dir)
    train, test = make_split(raw, seed, classes, train_per_class, test_per_class)
    train_x = preprocess_dataset(train, space, size)
    test_x = preprocess_dataset(test, space, size)

    if paths:
        write_cache(paths[Split.TRAIN], train_x, train.labels, space)
        write_cache(paths[Split.TEST], test_x, test.labels, space)
        logger.info(f"Wrote cache {paths[Split.TRAIN].name} and {paths[Split.TEST].name}")
    return PreparedData(train_x, train.labels, test_x, test.labels, space)
