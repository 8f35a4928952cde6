import gzip
import struct

import numpy as np
import pytest

from byzopt import mnist


def write_idx_images(path, images):
    n, rows, cols = images.shape
    payload = struct.pack(">IIII", mnist.IMAGES_MAGIC, n, rows, cols) + images.tobytes()
    path.write_bytes(payload)


def write_idx_labels(path, labels):
    payload = struct.pack(">II", mnist.LABELS_MAGIC, len(labels)) + labels.tobytes()
    path.write_bytes(payload)


@pytest.fixture
def data_dir(tmp_path, rng):
    train_n, test_n, side = 26, 8, 4
    imgs = rng.integers(0, 256, size=(train_n, side, side), dtype=np.uint8)
    labels = rng.integers(0, 3, size=train_n, dtype=np.uint8)
    write_idx_images(tmp_path / mnist.TRAIN_IMAGES, imgs)
    write_idx_labels(tmp_path / mnist.TRAIN_LABELS, labels)
    timgs = rng.integers(0, 256, size=(test_n, side, side), dtype=np.uint8)
    tlabels = rng.integers(0, 3, size=test_n, dtype=np.uint8)
    # test files gzipped: both spellings of the format must load
    (tmp_path / (mnist.TEST_IMAGES + ".gz")).write_bytes(
        gzip.compress(struct.pack(">IIII", mnist.IMAGES_MAGIC, test_n, side, side)
                      + timgs.tobytes()))
    (tmp_path / (mnist.TEST_LABELS + ".gz")).write_bytes(
        gzip.compress(struct.pack(">II", mnist.LABELS_MAGIC, test_n)
                      + tlabels.tobytes()))
    return tmp_path, imgs, labels


class TestIdx:
    def test_images_scaled_to_unit_interval(self, data_dir):
        d, imgs, _ = data_dir
        got = mnist.read_idx_images(d / mnist.TRAIN_IMAGES)
        assert got.shape == (26, 16)
        np.testing.assert_allclose(got, imgs.reshape(26, 16) / 255.0, atol=0)
        assert got.min() >= 0.0 and got.max() <= 1.0

    def test_bad_magic_rejected(self, tmp_path):
        (tmp_path / "bad").write_bytes(struct.pack(">IIII", 0xDEAD, 1, 2, 2) + b"\x00" * 4)
        with pytest.raises(mnist.IdxError):
            mnist.read_idx_images(tmp_path / "bad")

    def test_missing_file_reports_both_paths(self, tmp_path):
        with pytest.raises(mnist.IdxError, match="gz"):
            mnist.read_idx_labels(tmp_path / "nope")


class TestAllocation:
    def test_even_split_across_all_agents(self, data_dir):
        d, imgs, labels = data_dir
        problem, test = mnist.load_problem(4, dir_override=d)
        assert problem.m == 4
        # 26 samples over 4 agents: 6 each, remainder dropped
        assert all(problem.q(i) == 6 for i in range(4))
        feats0, labels0 = problem.shards[0]
        np.testing.assert_allclose(feats0, imgs.reshape(26, 16)[:6] / 255.0)
        np.testing.assert_array_equal(labels0, labels[:6])
        assert test.features.shape == (8, 16)
        # default regularizers are 1/N with N the used training count
        assert problem.beta1 == pytest.approx(1.0 / 24)
        assert problem.beta2 == pytest.approx(1.0 / 24)

    def test_too_many_agents_rejected(self, data_dir):
        d, _, _ = data_dir
        with pytest.raises(mnist.IdxError):
            mnist.load_problem(30, dir_override=d)

    def test_env_var_lookup(self, data_dir, monkeypatch):
        d, _, _ = data_dir
        monkeypatch.setenv(mnist.DATA_DIR_ENV, str(d))
        problem, _ = mnist.load_problem(2)
        assert problem.q(0) == 13

    def test_missing_env_is_actionable(self, monkeypatch):
        monkeypatch.delenv(mnist.DATA_DIR_ENV, raising=False)
        with pytest.raises(mnist.IdxError, match=mnist.DATA_DIR_ENV):
            mnist.data_dir()
