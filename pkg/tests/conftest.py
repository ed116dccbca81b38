import os
from pathlib import Path

import numpy as np
import pytest

from homnet import dataio

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def synthetic_digits(n_per_class, seed=0, size=28, classes=(0, 1)):
    """Two-class toy images: a hollow ring (first class) and a vertical bar.

    Returns ``(images, labels)`` with images shaped (n, size, size) uint8.
    """
    g = np.random.default_rng(seed)
    yy, xx = np.mgrid[:size, :size]
    c = (size - 1) / 2
    r = np.hypot(yy - c, xx - c)
    images, labels = [], []
    for k, cls in enumerate(classes):
        for _ in range(n_per_class):
            if k == 0:
                rad = g.uniform(6, 10)
                img = np.exp(-((r - rad) ** 2) / 3.0)
            else:
                col = c + g.uniform(-4, 4)
                img = np.exp(-((xx - col) ** 2) / 3.0) * (np.abs(yy - c) < g.uniform(8, 12))
            img = img + g.uniform(0, 0.15, size=img.shape)
            images.append(np.clip(img * 255, 0, 255).astype(np.uint8))
            labels.append(cls)
    order = g.permutation(len(labels))
    return np.stack(images)[order], np.array(labels, dtype=np.uint8)[order]


@pytest.fixture
def mnist_like_dir(tmp_path):
    """Directory holding synthetic MNIST-format IDX files (train + t10k)."""
    root = tmp_path / "data" / "mnist"
    root.mkdir(parents=True)
    imgs, labs = synthetic_digits(120, seed=1)
    cut = 200
    dataio.write_idx(root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte",
                     imgs[:cut], labs[:cut])
    dataio.write_idx(root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte",
                     imgs[cut:], labs[cut:])
    return tmp_path / "data"


def data_dir():
    d = os.environ.get("HOMNET_DATA_DIR")
    return Path(d) if d else None
