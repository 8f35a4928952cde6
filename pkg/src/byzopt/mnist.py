"""IDX-format digit data ingestion and even per-agent allocation.

Reads the standard big-endian IDX files (magic 0x00000803 for images,
0x00000801 for labels), plain or gzip-compressed, scales pixels to [0, 1],
and slices the training set evenly across all agents, Byzantine included.
"""

from __future__ import annotations

import gzip
import os
import struct
from pathlib import Path

import numpy as np

from byzopt.objective import SampleBatch, make_softmax

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"

DATA_DIR_ENV = "BYZOPT_DATA_DIR"


class IdxError(ValueError):
    pass


def _open(path: Path):
    raw = path.read_bytes() if path.exists() else None
    if raw is None:
        gz = path.with_name(path.name + ".gz")
        if not gz.exists():
            raise IdxError(f"missing IDX file {path} (also tried {gz})")
        raw = gzip.decompress(gz.read_bytes())
    elif raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_idx_images(path) -> np.ndarray:
    raw = _open(Path(path))
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGES_MAGIC:
        raise IdxError(f"bad image magic 0x{magic:08x} in {path}")
    data = np.frombuffer(raw, dtype=np.uint8, offset=16, count=count * rows * cols)
    return data.reshape(count, rows * cols).astype(np.float64) / 255.0


def read_idx_labels(path) -> np.ndarray:
    raw = _open(Path(path))
    magic, count = struct.unpack(">II", raw[:8])
    if magic != LABELS_MAGIC:
        raise IdxError(f"bad label magic 0x{magic:08x} in {path}")
    return np.frombuffer(raw, dtype=np.uint8, offset=8, count=count).astype(np.int64)


def data_dir(override=None) -> Path:
    d = override or os.environ.get(DATA_DIR_ENV)
    if not d:
        raise IdxError(f"set {DATA_DIR_ENV} (or problem.data_dir in the config) "
                       "to the IDX directory")
    return Path(d)


def load_problem(m, beta1=None, beta2=None, dir_override=None):
    """Softmax instance over the training set split evenly across all m
    agents (the remainder past m * floor(N/m) is dropped), plus the test
    batch.  Default regularizers are 1/N with N the used training count."""
    d = data_dir(dir_override)
    images = read_idx_images(d / TRAIN_IMAGES)
    labels = read_idx_labels(d / TRAIN_LABELS)
    n_classes = int(labels.max()) + 1
    per = images.shape[0] // m
    if per < 1:
        raise IdxError(f"not enough samples ({images.shape[0]}) for {m} agents")
    used = per * m
    if beta1 is None:
        beta1 = 1.0 / used
    if beta2 is None:
        beta2 = 1.0 / used
    shards = [(images[i * per:(i + 1) * per], labels[i * per:(i + 1) * per])
              for i in range(m)]
    problem = make_softmax(shards, n_classes=n_classes, feat_dim=images.shape[1],
                           beta1=beta1, beta2=beta2)
    test = SampleBatch(features=read_idx_images(d / TEST_IMAGES),
                       labels=read_idx_labels(d / TEST_LABELS))
    return problem, test
