"""MNIST IDX file parsing and dataset assembly.

Reads the canonical big-endian IDX containers (raw or gzip); does not
download anything.  Images come back as (count, 28, 28) uint8 arrays paired
index-for-index with their labels.
"""

from __future__ import annotations

import gzip
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
ROWS = 28
COLS = 28

SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class IdxFormatError(ValueError):
    pass


@dataclass
class Dataset:
    images: np.ndarray   # (n, 28, 28) uint8
    labels: np.ndarray   # (n,) uint8
    split: str

    def __len__(self) -> int:
        return len(self.labels)


def parse_idx_images(data: bytes) -> np.ndarray:
    if len(data) < 16:
        raise IdxFormatError(f"image header truncated: {len(data)} bytes")
    magic, count, rows, cols = struct.unpack_from(">IIII", data)
    if magic != IMAGE_MAGIC:
        raise IdxFormatError(f"bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")
    if (rows, cols) != (ROWS, COLS):
        raise IdxFormatError(f"expected {ROWS}x{COLS} images, file declares {rows}x{cols}")
    payload = len(data) - 16
    need = count * rows * cols
    if payload < need:
        raise IdxFormatError(f"image payload truncated: {payload} bytes for {count} images ({need} needed)")
    if payload > need:
        log.warning("image file has %d trailing bytes past the declared count", payload - need)
    arr = np.frombuffer(data, dtype=np.uint8, count=need, offset=16)
    return arr.reshape(count, rows, cols).copy()


def parse_idx_labels(data: bytes) -> np.ndarray:
    if len(data) < 8:
        raise IdxFormatError(f"label header truncated: {len(data)} bytes")
    magic, count = struct.unpack_from(">II", data)
    if magic != LABEL_MAGIC:
        raise IdxFormatError(f"bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}")
    payload = len(data) - 8
    if payload < count:
        raise IdxFormatError(f"label payload truncated: {payload} bytes for {count} labels")
    if payload > count:
        log.warning("label file has %d trailing bytes past the declared count", payload - count)
    arr = np.frombuffer(data, dtype=np.uint8, count=count, offset=8).copy()
    bad = np.flatnonzero(arr > 9)
    if bad.size:
        raise IdxFormatError(f"label {int(arr[bad[0]])} at index {int(bad[0])} is out of range 0-9")
    return arr


def write_idx_images(images: np.ndarray) -> bytes:
    """Inverse of parse_idx_images, for round-trip tests and fixtures."""
    images = np.asarray(images, dtype=np.uint8).reshape(-1, ROWS, COLS)
    header = struct.pack(">IIII", IMAGE_MAGIC, images.shape[0], ROWS, COLS)
    return header + images.tobytes()


def write_idx_labels(labels: np.ndarray) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
    return struct.pack(">II", LABEL_MAGIC, labels.shape[0]) + labels.tobytes()


def _read_maybe_gzip(path: Path) -> bytes:
    """Read a file, decompressing transparently if it is gzip."""
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def _find_file(directory: Path, name: str) -> Path:
    for candidate in (directory / name, directory / (name + ".gz")):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"{name}[.gz] not found in {directory}")


def load_dataset(directory, split: str, image_file: str | None = None,
                 label_file: str | None = None) -> Dataset:
    """Load one split from a directory of canonical IDX files.

    Filenames follow the standard distribution; pass image_file/label_file
    to override.  Gzip-compressed files are accepted anywhere a raw file is.
    """
    if split not in SPLIT_FILES:
        raise ValueError(f"split must be one of {sorted(SPLIT_FILES)}, got {split!r}")
    directory = Path(directory)
    default_images, default_labels = SPLIT_FILES[split]
    images_path = _find_file(directory, image_file or default_images)
    labels_path = _find_file(directory, label_file or default_labels)
    images = parse_idx_images(_read_maybe_gzip(images_path))
    labels = parse_idx_labels(_read_maybe_gzip(labels_path))
    if len(images) != len(labels):
        raise IdxFormatError(f"{len(images)} images but {len(labels)} labels in {directory}")
    return Dataset(images=images, labels=labels, split=split)
