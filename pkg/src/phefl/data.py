"""Dataset sources: Gaussian-cluster synthetic pools and IDX (MNIST-format) files."""

from __future__ import annotations

import gzip
import os
import struct
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError, IngestionError
from .model import Dataset

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

DATA_DIR_ENV = "PHEFL_DATA_DIR"

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def generate_synthetic(num_classes, per_label, dim, separation, seed):
    """Draw train and test pools from one Gaussian cluster per class.

    Class centres lie on a sphere of radius ``separation``; each feature has
    unit variance around its centre. Features are then mapped affinely so that
    ``+-(separation / sqrt(dim) + 1)`` lands on [0, 1], and clipped; the tails
    saturate, which keeps the class signal large relative to the unit range. Returns ``(train_pool, test_pool)``; ``per_label`` is either an
    int used for both pools or a ``(train, test)`` pair.
    """
    if np.ndim(per_label) == 0:
        n_train = n_test = int(per_label)
    else:
        n_train, n_test = (int(v) for v in per_label)
    if num_classes < 2 or dim < 1 or n_train < 0 or n_test < 0 or separation < 0:
        raise ConfigurationError("invalid synthetic data parameters")

    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((num_classes, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    centres = separation * directions

    half_range = separation / np.sqrt(dim) + 1.0

    def draw(count):
        X = np.concatenate([c + rng.standard_normal((count, dim)) for c in centres])
        y = np.repeat(np.arange(num_classes), count)
        return np.clip(0.5 + X / (2.0 * half_range), 0.0, 1.0), y

    X_tr, y_tr = draw(n_train)
    X_te, y_te = draw(n_test)
    return Dataset(X_tr, y_tr, provenance="synthetic"), Dataset(X_te, y_te, provenance="synthetic")


def _open(path):
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _header(buf, path, magic, ndim):
    need = 4 + 4 * ndim
    if len(buf) >= 4:
        (found,) = struct.unpack_from(">I", buf, 0)
        if found != magic:
            raise IngestionError(f"{path}: bad magic 0x{found:08x} at offset 0, expected 0x{magic:08x}")
    if len(buf) < need:
        raise IngestionError(f"{path}: truncated header at offset {len(buf)} (need {need} bytes)")
    return struct.unpack_from(f">{ndim}I", buf, 4), need


def read_idx_images(path) -> np.ndarray:
    buf = _open(path)
    (count, rows, cols), offset = _header(buf, path, IDX_IMAGES_MAGIC, 3)
    size = count * rows * cols
    if len(buf) < offset + size:
        raise IngestionError(
            f"{path}: truncated pixel data at offset {len(buf)}, expected {offset + size} bytes"
        )
    return np.frombuffer(buf, dtype=np.uint8, count=size, offset=offset).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    buf = _open(path)
    (count,), offset = _header(buf, path, IDX_LABELS_MAGIC, 1)
    if len(buf) < offset + count:
        raise IngestionError(
            f"{path}: truncated label data at offset {len(buf)}, expected {offset + count} bytes"
        )
    return np.frombuffer(buf, dtype=np.uint8, count=count, offset=offset)


def load_idx(images_path, labels_path) -> Dataset:
    """Load an image/label IDX pair; pixels scaled to [0, 1], images flattened row-major."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IngestionError(
            f"count mismatch at offset 4: {images_path} has {images.shape[0]} images, "
            f"{labels_path} has {labels.shape[0]} labels"
        )
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return Dataset(X, labels.astype(np.int64), provenance="idx-file")


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path):
    """Write uint8 images ``(n, rows, cols)`` and labels ``(n,)`` as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">4I", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">2I", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def resolve_idx_paths(paths: dict | None = None) -> dict:
    """Fill in missing MNIST file paths from ``$PHEFL_DATA_DIR``; explicit paths win."""
    paths = dict(paths or {})
    data_dir = os.environ.get(DATA_DIR_ENV)
    for key, fname in MNIST_FILES.items():
        if paths.get(key):
            continue
        if data_dir is None:
            raise ConfigurationError(f"no path for {key} and ${DATA_DIR_ENV} is not set")
        candidates = [Path(data_dir) / fname, Path(data_dir) / (fname + ".gz")]
        found = next((c for c in candidates if c.exists()), None)
        if found is None:
            raise ConfigurationError(f"{fname} not found in {data_dir}")
        paths[key] = str(found)
    return paths


def balance_pool(pool: Dataset, num_classes: int) -> Dataset:
    """Truncate every label to the smallest per-label count, keeping pool order."""
    counts = pool.label_counts(num_classes)
    keep = counts.min()
    if keep == 0:
        raise ConfigurationError("test pool is missing at least one label")
    idx = np.concatenate([np.flatnonzero(pool.y == c)[:keep] for c in range(num_classes)])
    return pool.subset(np.sort(idx))
