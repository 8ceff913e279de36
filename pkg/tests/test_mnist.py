import gzip
import logging
import struct

import numpy as np
import pytest

from rvsnn import mnist
from rvsnn.mnist import (
    IdxFormatError,
    load_dataset,
    parse_idx_images,
    parse_idx_labels,
    write_idx_images,
    write_idx_labels,
)


def synthetic(count=3, seed=0):
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, (count, 28, 28)).astype(np.uint8)
    labels = rng.integers(0, 10, count).astype(np.uint8)
    return images, labels


class TestImageParsing:
    def test_roundtrip_bit_exact(self):
        images, _ = synthetic(1)
        data = write_idx_images(images)
        parsed = parse_idx_images(data)
        assert (parsed == images).all()
        assert write_idx_images(parsed) == data

    def test_wrong_magic(self):
        with pytest.raises(IdxFormatError, match="magic"):
            parse_idx_images(struct.pack(">IIII", 0x801, 1, 28, 28) + bytes(784))

    def test_wrong_dims(self):
        with pytest.raises(IdxFormatError, match="27x28"):
            parse_idx_images(struct.pack(">IIII", 0x803, 1, 27, 28) + bytes(756))

    def test_truncated_payload(self):
        with pytest.raises(IdxFormatError, match="truncated"):
            parse_idx_images(struct.pack(">IIII", 0x803, 2, 28, 28) + bytes(784))

    def test_trailing_bytes_warn_not_consumed(self, caplog):
        images, _ = synthetic(1)
        data = write_idx_images(images) + b"JUNK"
        with caplog.at_level(logging.WARNING):
            parsed = parse_idx_images(data)
        assert len(parsed) == 1
        assert any("trailing" in r.message for r in caplog.records)


class TestLabelParsing:
    def test_roundtrip(self):
        _, labels = synthetic(5)
        assert (parse_idx_labels(write_idx_labels(labels)) == labels).all()

    def test_label_out_of_range(self):
        data = struct.pack(">II", 0x801, 2) + bytes([3, 10])
        with pytest.raises(IdxFormatError, match="out of range"):
            parse_idx_labels(data)

    def test_empty_file(self):
        with pytest.raises(IdxFormatError, match="truncated"):
            parse_idx_labels(b"")

    def test_wrong_magic(self):
        with pytest.raises(IdxFormatError, match="magic"):
            parse_idx_labels(struct.pack(">II", 0x803, 0))


class TestLoadDataset:
    def _write_split(self, directory, images, labels, split="train", gz=False):
        img_name, lbl_name = mnist.SPLIT_FILES[split]
        img_data = write_idx_images(images)
        lbl_data = write_idx_labels(labels)
        if gz:
            (directory / (img_name + ".gz")).write_bytes(gzip.compress(img_data))
            (directory / (lbl_name + ".gz")).write_bytes(gzip.compress(lbl_data))
        else:
            (directory / img_name).write_bytes(img_data)
            (directory / lbl_name).write_bytes(lbl_data)

    def test_pairing_and_order(self, tmp_path):
        images, labels = synthetic(7)
        self._write_split(tmp_path, images, labels)
        ds = load_dataset(tmp_path, "train")
        assert len(ds) == 7
        assert (ds.images == images).all() and (ds.labels == labels).all()

    def test_gzip_transparency(self, tmp_path):
        images, labels = synthetic(4)
        self._write_split(tmp_path, images, labels, gz=True)
        raw_dir = tmp_path / "raw"
        raw_dir.mkdir()
        self._write_split(raw_dir, images, labels)
        a = load_dataset(tmp_path, "train")
        b = load_dataset(raw_dir, "train")
        assert (a.images == b.images).all() and (a.labels == b.labels).all()

    def test_count_mismatch(self, tmp_path):
        images, labels = synthetic(3)
        img_name, lbl_name = mnist.SPLIT_FILES["train"]
        (tmp_path / img_name).write_bytes(write_idx_images(images))
        (tmp_path / lbl_name).write_bytes(write_idx_labels(labels[:2]))
        with pytest.raises(IdxFormatError, match="images but"):
            load_dataset(tmp_path, "train")

    def test_missing_files(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path, "test")

    def test_bad_split_name(self, tmp_path):
        with pytest.raises(ValueError, match="split"):
            load_dataset(tmp_path, "validation")

    def test_filename_override(self, tmp_path):
        images, labels = synthetic(2)
        (tmp_path / "imgs.bin").write_bytes(write_idx_images(images))
        (tmp_path / "lbls.bin").write_bytes(write_idx_labels(labels))
        ds = load_dataset(tmp_path, "train", image_file="imgs.bin", label_file="lbls.bin")
        assert len(ds) == 2


class TestCanonicalFiles:
    def test_train_split_counts(self, mnist_train):
        assert len(mnist_train) == 60_000
        assert mnist_train.images.shape == (60_000, 28, 28)

    def test_test_split_counts(self, mnist_test):
        assert len(mnist_test) == 10_000

    def test_labels_in_range(self, mnist_train, mnist_test):
        assert mnist_train.labels.max() <= 9
        assert mnist_test.labels.max() <= 9
