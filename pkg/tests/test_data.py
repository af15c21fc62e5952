"""Tests for the data.py CIFAR-10 loader, splits and cache."""
import numpy as np
import pytest

import data
from colorspace import ColorSpace
from data import (
    RECORD_BYTES,
    DataError,
    DataFormatError,
    DataMissingError,
    Split,
    cache_path,
    fisher_yates,
    load_cifar10_binary,
    make_rng,
    make_split,
    parse_records,
    prepare_dataset,
    read_cache,
    serialize_record,
    write_cache,
)


def one_record(label=3, value=7) -> bytes:
    pixels = np.full((32, 32, 3), value, dtype=np.uint8)
    pixels[0, 1] = (10, 20, 30)
    return serialize_record(label, pixels)


class TestRecords:
    """Tests for the binary record format."""

    def test_record_size(self):
        """A record is one label byte plus 3072 pixel bytes."""
        assert len(one_record()) == RECORD_BYTES == 3073

    def test_plane_layout(self):
        """Pixels are stored as R, G, B planes, each row-major."""
        blob = one_record()
        assert blob[0] == 3
        assert blob[1 + 1] == 10
        assert blob[1 + 1024 + 1] == 20
        assert blob[1 + 2048 + 1] == 30

    def test_parse_reproduces_bytes(self):
        """Re-serializing a parsed record gives back the original bytes."""
        blob = one_record(label=9)
        records = parse_records(blob)
        assert records.labels.tolist() == [9]
        assert serialize_record(records.labels[0], records.pixels[0]) == blob

    def test_truncated_record(self):
        """Partial records are a format error."""
        with pytest.raises(DataFormatError):
            parse_records(one_record()[:-1])

    def test_bad_label(self):
        """Labels above 9 are a format error."""
        blob = bytearray(one_record())
        blob[0] = 10
        with pytest.raises(DataFormatError):
            parse_records(bytes(blob))

    def test_rgb01(self):
        """rgb01 scales bytes to [0, 1]."""
        records = parse_records(one_record(value=255))
        img = records.rgb01(0)
        assert img.space is ColorSpace.RGB01
        assert img.values[5, 5, 0] == 1.0


class TestLoading:
    """Tests for load_cifar10_binary."""

    def test_loads_all_files(self, cifar_dir):
        """Five training files and one test file."""
        raw = load_cifar10_binary(cifar_dir)
        assert len(raw.train) == 5 * 4 * 3
        assert len(raw.test) == 6 * 3
        assert raw.train.pixels.shape[1:] == (32, 32, 3)

    def test_nested_directory(self, cifar_dir):
        """The cifar-10-batches-bin subdirectory is found automatically."""
        parent = cifar_dir.parent / "outer"
        parent.mkdir()
        cifar_dir.rename(parent / data.BINARY_SUBDIR)
        assert len(load_cifar10_binary(parent).test) == 18

    def test_missing_file(self, cifar_dir):
        """A missing batch file raises DataMissingError."""
        (cifar_dir / "data_batch_3.bin").unlink()
        with pytest.raises(DataMissingError):
            load_cifar10_binary(cifar_dir)


class TestSplits:
    """Tests for the seeded class-balanced split."""

    def test_fisher_yates_is_permutation(self):
        """Every index appears exactly once."""
        order = fisher_yates(50, make_rng(0))
        assert sorted(order.tolist()) == list(range(50))

    def test_fisher_yates_reproducible(self):
        """The same seed gives the same permutation."""
        np.testing.assert_array_equal(fisher_yates(30, make_rng(4)), fisher_yates(30, make_rng(4)))
        assert not np.array_equal(fisher_yates(30, make_rng(4)), fisher_yates(30, make_rng(5)))

    def test_balanced(self, cifar_dir):
        """Each class contributes exactly per_class images."""
        train, test = make_split(load_cifar10_binary(cifar_dir), 0, (0, 1), 8, 4)
        assert np.bincount(train.labels).tolist() == [8, 8]
        assert np.bincount(test.labels).tolist() == [4, 4]
        assert train.images.values.shape == (16, 32, 32, 3)

    def test_sources_do_not_mix(self, cifar_dir):
        """Test images come from the test file only."""
        raw = load_cifar10_binary(cifar_dir)
        _, test = make_split(raw, 0, (0, 1), 8, 4)
        assert test.split is Split.TEST
        assert test.source_indices.max() < len(raw.test)
        np.testing.assert_array_equal(raw.test.labels[test.source_indices], np.array([0, 1])[test.labels])

    def test_deterministic(self, cifar_dir):
        """Same seed, same subset; different seed, different subset."""
        raw = load_cifar10_binary(cifar_dir)
        a, _ = make_split(raw, 7, (0, 1), 8, 4)
        b, _ = make_split(raw, 7, (0, 1), 8, 4)
        c, _ = make_split(raw, 8, (0, 1), 8, 4)
        np.testing.assert_array_equal(a.source_indices, b.source_indices)
        assert not np.array_equal(a.source_indices, c.source_indices)

    def test_labels_follow_class_order(self, cifar_dir):
        """Labels are positions in the class tuple."""
        raw = load_cifar10_binary(cifar_dir)
        train, _ = make_split(raw, 0, (2, 0), 4, 2)
        np.testing.assert_array_equal(raw.train.labels[train.source_indices], np.array([2, 0])[train.labels])

    def test_not_enough_images(self, cifar_dir):
        """Asking for more images than a class has raises DataError."""
        with pytest.raises(DataError):
            make_split(load_cifar10_binary(cifar_dir), 0, (0, 1), 50, 4)

    def test_bad_classes(self, cifar_dir):
        """Repeated classes are refused."""
        with pytest.raises(DataError):
            make_split(load_cifar10_binary(cifar_dir), 0, (1, 1), 4, 2)


class TestCache:
    """Tests for the preprocessed-tensor cache."""

    def test_round_trip(self, tmp_path, rng):
        """Values, labels and color space survive a write/read."""
        values = rng.uniform(-3, 3, size=(4, 5, 5, 3))
        labels = np.array([0, 1, 1, 0])
        path = tmp_path / "x.qcc"
        write_cache(path, values, labels, ColorSpace.YCBCR)
        back, back_labels, space = read_cache(path)
        np.testing.assert_array_equal(back, values)
        np.testing.assert_array_equal(back_labels, labels)
        assert space is ColorSpace.YCBCR

    def test_bad_magic(self, tmp_path):
        """Files without the magic header are rejected."""
        path = tmp_path / "x.qcc"
        path.write_bytes(b"NOTACACHE" * 10)
        with pytest.raises(DataFormatError):
            read_cache(path)

    def test_truncated_payload(self, tmp_path, rng):
        """A short payload is rejected."""
        path = tmp_path / "x.qcc"
        write_cache(path, rng.uniform(size=(2, 2, 2, 3)), np.array([0, 1]), ColorSpace.LAB)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DataFormatError):
            read_cache(path)

    def test_missing(self, tmp_path):
        """Missing files raise DataMissingError."""
        with pytest.raises(DataMissingError):
            read_cache(tmp_path / "none.qcc")

    def test_path_encodes_key(self, tmp_path):
        """Space, seed, size and split are part of the file name."""
        path = cache_path(tmp_path, ColorSpace.LAB, 3, 10, Split.TRAIN)
        assert path.name == "cifar_lab_seed3_size10_train.qcc"
        assert cache_path(tmp_path, ColorSpace.LAB, 3, 10, Split.TRAIN, (3, 5)).name != path.name
        assert cache_path(tmp_path, ColorSpace.LAB, 3, 10, Split.TRAIN, per_class=8).name != path.name


class TestPrepareDataset:
    """Tests for prepare_dataset."""

    def test_shapes_and_range(self, cifar_dir):
        """Angle tensors of shape (N, S, S, 3) in [-π, π]."""
        prepared = prepare_dataset(cifar_dir, "LAB", 0, 4, train_per_class=8, test_per_class=4)
        assert prepared.train_x.shape == (16, 4, 4, 3)
        assert prepared.test_x.shape == (8, 4, 4, 3)
        assert np.all(np.abs(prepared.train_x) <= np.pi + 1e-12)

    def test_cache_hit_is_identical(self, cifar_dir, tmp_path):
        """The second call reads the cache and returns the same tensors."""
        cache = tmp_path / "cache"
        first = prepare_dataset(cifar_dir, "YCBCR", 1, 4, cache, train_per_class=8, test_per_class=4)
        assert len(list(cache.glob("*.qcc"))) == 2
        with pytest.MonkeyPatch.context() as mp:
            mp.setattr(data, "load_cifar10_binary", lambda *_: pytest.fail("cache was not used"))
            second = prepare_dataset(cifar_dir, "YCBCR", 1, 4, cache, train_per_class=8, test_per_class=4)
        np.testing.assert_array_equal(first.train_x, second.train_x)
        np.testing.assert_array_equal(first.test_y, second.test_y)

    def test_corrupt_cache_rebuilt(self, cifar_dir, tmp_path, caplog):
        """A corrupt cache file is replaced with a warning."""
        cache = tmp_path / "cache"
        first = prepare_dataset(cifar_dir, "RGB", 0, 4, cache, train_per_class=8, test_per_class=4)
        for path in cache.glob("*.qcc"):
            path.write_bytes(b"garbage")
        second = prepare_dataset(cifar_dir, "RGB", 0, 4, cache, train_per_class=8, test_per_class=4)
        np.testing.assert_array_equal(first.train_x, second.train_x)
        assert "corrupt cache" in caplog.text.lower()

    def test_wrong_space_tag_rebuilt(self, cifar_dir, tmp_path, caplog):
        """A cache file tagged with another color space is rebuilt."""
        cache = tmp_path / "cache"
        first = prepare_dataset(cifar_dir, "LAB", 0, 4, cache, train_per_class=8, test_per_class=4)
        for path in cache.glob("*.qcc"):
            values, labels, _ = read_cache(path)
            write_cache(path, values + 0.1, labels, ColorSpace.YCBCR)
        second = prepare_dataset(cifar_dir, "LAB", 0, 4, cache, train_per_class=8, test_per_class=4)
        np.testing.assert_array_equal(first.train_x, second.train_x)
        assert "expected LAB" in caplog.text
        assert all(read_cache(path)[2] is ColorSpace.LAB for path in cache.glob("*.qcc"))

    def test_rejects_angle_space(self, cifar_dir):
        """Only RGB, LAB and YCbCr datasets exist."""
        with pytest.raises(DataError):
            prepare_dataset(cifar_dir, "ANGLES", 0, 4)
