"""Dataset parsing and preprocessing.

Readers for the IDX container (MNIST, Fashion-MNIST) and the CIFAR-10
binary batches, the preprocessing chain that turns any of them into
1024-dimensional unit-norm feature vectors, and a small binary container
for prepared train/test splits.
"""

import gzip
import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (
    BadMagic,
    CountMismatch,
    DataError,
    EmptyClass,
    LabelOutOfRange,
    TruncatedFile,
    UsageError,
    WrongChannelCount,
    WrongDimensions,
)

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049

CIFAR_RECORD = 1 + 32 * 32 * 3

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

TRAIN_FRACTION = 0.85
SIDE = 32
N_FEATURES = SIDE * SIDE

# class pairs of the three benchmark tasks
DEFAULT_TASKS = {
    "mnist": (0, 1),  # zeros vs ones
    "fashion": (0, 2),  # T-shirt/top vs pullover
    "cifar10": (0, 5),  # airplane vs dog
}


@dataclass
class RawImage:
    """Unsigned 8-bit image stored row-major, channels interleaved."""

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.uint8).reshape(-1)
        if self.channels not in (1, 3):
            raise WrongChannelCount(f"unsupported channel count {self.channels}")
        expected = self.width * self.height * self.channels
        if self.data.size != expected:
            raise WrongDimensions(
                f"image data has {self.data.size} bytes, expected {expected}"
            )

    def pixels(self):
        """View of the data as a (height, width, channels) array."""
        return self.data.reshape(self.height, self.width, self.channels)


class LabeledExample(NamedTuple):
    features: np.ndarray
    label: int


class Encoded(NamedTuple):
    features: np.ndarray
    degenerate: bool


@dataclass
class DatasetSplit:
    """Preprocessed binary task split into train and test arrays.

    ``X_*`` hold one feature vector per row; ``*_index`` record the position
    of every example in the filtered source list, so overlap can be audited.
    """

    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    seed: int
    task: tuple
    train_index: np.ndarray = field(default=None)
    test_index: np.ndarray = field(default=None)
    degenerate: int = 0

    @property
    def train(self):
        return [LabeledExample(x, int(y)) for x, y in zip(self.X_train, self.y_train)]

    @property
    def test(self):
        return [LabeledExample(x, int(y)) for x, y in zip(self.X_test, self.y_test)]

    @property
    def dim(self):
        return self.X_train.shape[1]


def _read_bytes(path):
    path = Path(path)
    if not path.exists():
        raise DataError("file not found", path=path)
    raw = path.read_bytes()
    if path.suffix == ".gz":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise TruncatedFile(f"corrupt gzip stream: {exc}", path=path) from exc
    return raw


def _parse_idx(raw, path, magic, ndim_after_count):
    header = 4 * (2 + ndim_after_count)
    if len(raw) < header:
        raise TruncatedFile(
            f"IDX header needs {header} bytes, file has {len(raw)}", path=path, offset=len(raw)
        )
    found = struct.unpack(">i", raw[:4])[0]
    if found != magic:
        raise BadMagic(f"magic number {found}, expected {magic}", path=path, offset=0)
    dims = struct.unpack(f">{1 + ndim_after_count}i", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) < header + size:
        raise TruncatedFile(
            f"IDX payload needs {size} bytes, file has {len(raw) - header}",
            path=path,
            offset=len(raw),
        )
    arr = np.frombuffer(raw, dtype=np.uint8, count=size, offset=header)
    return arr.reshape(dims)


def read_idx_images(path):
    """Return a (count, rows, cols) uint8 array from an IDX image file."""
    return _parse_idx(_read_bytes(path), path, IDX_IMAGE_MAGIC, 2)


def read_idx_labels(path):
    return _parse_idx(_read_bytes(path), path, IDX_LABEL_MAGIC, 0)


def load_idx(images_path, labels_path):
    """Parse a pair of IDX files into ``(RawImage, label)`` tuples."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatch(
            f"{images.shape[0]} images but {labels.shape[0]} labels", path=labels_path
        )
    _, rows, cols = images.shape
    return [
        (RawImage(cols, rows, 1, img.reshape(-1)), int(lab))
        for img, lab in zip(images, labels)
    ]


def encode_idx_images(images):
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    return struct.pack(">4i", IDX_IMAGE_MAGIC, n, rows, cols) + images.tobytes()


def encode_idx_labels(labels):
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">2i", IDX_LABEL_MAGIC, labels.size) + labels.tobytes()


def write_idx(images_path, labels_path, images, labels):
    Path(images_path).write_bytes(encode_idx_images(images))
    Path(labels_path).write_bytes(encode_idx_labels(labels))


def load_cifar10(batch_path):
    """Parse a CIFAR-10 binary batch (label byte + planar R, G, B planes)."""
    raw = _read_bytes(batch_path)
    if len(raw) == 0 or len(raw) % CIFAR_RECORD:
        whole = len(raw) // CIFAR_RECORD
        raise TruncatedFile(
            f"length {len(raw)} is not a positive multiple of {CIFAR_RECORD}",
            path=batch_path,
            offset=whole * CIFAR_RECORD,
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = records[:, 0]
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise LabelOutOfRange(
            f"label {labels[bad[0]]} out of range [0, 9]",
            path=batch_path,
            offset=int(bad[0]) * CIFAR_RECORD,
        )
    planes = records[:, 1:].reshape(-1, 3, 32, 32)
    interleaved = planes.transpose(0, 2, 3, 1)
    return [
        (RawImage(32, 32, 3, img.reshape(-1)), int(lab))
        for img, lab in zip(interleaved, labels)
    ]


def encode_cifar10(items):
    """Inverse of :func:`load_cifar10` for a list of ``(RawImage, label)``."""
    out = bytearray()
    for img, label in items:
        if img.channels != 3 or img.width != 32 or img.height != 32:
            raise WrongDimensions("CIFAR records must be 32x32x3")
        out.append(int(label))
        out += img.pixels().transpose(2, 0, 1).tobytes()
    return bytes(out)


def to_grayscale(img):
    """BT.601 luma, rounded half-up and clamped to [0, 255]."""
    if img.channels != 3:
        raise WrongChannelCount(f"expected 3 channels, got {img.channels}")
    rgb = img.pixels().astype(np.float64)
    luma = rgb @ np.array(LUMA_WEIGHTS)
    gray = np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)
    return RawImage(img.width, img.height, 1, gray.reshape(-1))


def zero_pad(img):
    """Center a 28x28 single-channel image in a 32x32 zero canvas."""
    if img.channels != 1 or img.width != 28 or img.height != 28:
        raise WrongDimensions(
            f"expected 28x28x1, got {img.height}x{img.width}x{img.channels}"
        )
    canvas = np.zeros((SIDE, SIDE), dtype=np.uint8)
    canvas[2:30, 2:30] = img.pixels()[:, :, 0]
    return RawImage(SIDE, SIDE, 1, canvas.reshape(-1))


def encode_input(img):
    """Scale intensities to [0, 1] and normalize to unit L2 norm.

    All-zero images cannot be normalized; they come back as the zero vector
    with ``degenerate=True``.
    """
    if img.channels != 1 or img.data.size != N_FEATURES:
        raise WrongDimensions(
            f"expected {SIDE}x{SIDE}x1, got {img.height}x{img.width}x{img.channels}"
        )
    x = img.data.astype(np.float64) / 255.0
    norm = np.linalg.norm(x)
    if norm == 0.0:
        return Encoded(x, True)
    return Encoded(x / norm, False)


def preprocess(img):
    """Grayscale and pad as needed, then encode into a feature vector."""
    if img.channels == 3:
        img = to_grayscale(img)
    if img.width == 28 and img.height == 28:
        img = zero_pad(img)
    return encode_input(img)


def _n_train(n):
    return int(math.floor(TRAIN_FRACTION * n + 0.5))


def make_binary_task(images, class_a, class_b, seed, name=None):
    """Build a shuffled 85:15 split of the two chosen classes.

    ``class_a`` becomes label 0 and ``class_b`` label 1.
    """
    if class_a == class_b:
        raise UsageError(f"class pair must be distinct, got ({class_a}, {class_b})")
    picked = [(img, lab) for img, lab in images if lab in (class_a, class_b)]
    for cls in (class_a, class_b):
        if not any(lab == cls for _, lab in picked):
            raise EmptyClass(f"class {cls} has no examples")

    encoded = [preprocess(img) for img, _ in picked]
    X = np.stack([e.features for e in encoded])
    y = np.array([0 if lab == class_a else 1 for _, lab in picked], dtype=np.int64)
    degenerate = sum(e.degenerate for e in encoded)

    order = np.random.default_rng(seed).permutation(len(picked))
    cut = _n_train(len(picked))
    tr, te = order[:cut], order[cut:]
    return DatasetSplit(
        X_train=X[tr],
        y_train=y[tr],
        X_test=X[te],
        y_test=y[te],
        seed=seed,
        task=(name, (class_a, class_b)),
        train_index=tr,
        test_index=te,
        degenerate=degenerate,
    )


# --- raw dataset discovery -------------------------------------------------

_IDX_NAMES = {
    "train_images": ("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
    "train_labels": ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte"),
    "test_images": ("t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
    "test_labels": ("t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"),
}

_SUBDIRS = {
    "mnist": ("mnist", "MNIST", "MNIST/raw", "mnist/raw"),
    "fashion": ("fashion", "fashion-mnist", "fashion_mnist", "FashionMNIST/raw"),
    "cifar10": ("cifar10", "cifar-10-batches-bin", "cifar10/cifar-10-batches-bin"),
}


def _candidate_dirs(name, data_dir):
    data_dir = Path(data_dir)
    return [data_dir / sub for sub in _SUBDIRS[name]] + [data_dir]


def _find(dirs, stems):
    for d in dirs:
        for stem in stems:
            for suffix in ("", ".gz"):
                p = d / f"{stem}{suffix}"
                if p.exists():
                    return p
    return None


def dataset_files(name, data_dir):
    """Locate the raw files of a benchmark dataset, or raise DataError."""
    if name not in _SUBDIRS:
        raise UsageError(f"unknown dataset {name!r}; choose from {sorted(_SUBDIRS)}")
    dirs = _candidate_dirs(name, data_dir)
    if name == "cifar10":
        stems = [f"data_batch_{i}" for i in range(1, 6)] + ["test_batch"]
        found = [_find(dirs, (s + ".bin",)) for s in stems]
        missing = [s for s, f in zip(stems, found) if f is None]
    else:
        found = [_find(dirs, _IDX_NAMES[k]) for k in _IDX_NAMES]
        missing = [v[0] for v, f in zip(_IDX_NAMES.values(), found) if f is None]
    if missing:
        raise DataError(f"{name}: missing raw files {missing}", path=Path(data_dir))
    return found


def load_dataset(name, data_dir):
    """Concatenate the published train and test parts of a dataset."""
    files = dataset_files(name, data_dir)
    if name == "cifar10":
        items = []
        for f in files:
            items.extend(load_cifar10(f))
        return items
    tr_img, tr_lab, te_img, te_lab = files
    return load_idx(tr_img, tr_lab) + load_idx(te_img, te_lab)


# --- prepared split container ---------------------------------------------

SPLIT_MAGIC = b"HOMSPLIT"
SPLIT_VERSION = 1
_SPLIT_HEADER = struct.Struct("<8s4I")


def _manifest_path(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def encode_split(split):
    n_tr, dim = split.X_train.shape
    n_te = split.X_test.shape[0]
    parts = [
        _SPLIT_HEADER.pack(SPLIT_MAGIC, SPLIT_VERSION, n_tr, n_te, dim),
        split.X_train.astype("<f4").tobytes(),
        split.y_train.astype(np.uint8).tobytes(),
        split.X_test.astype("<f4").reshape(n_te, dim).tobytes(),
        split.y_test.astype(np.uint8).tobytes(),
    ]
    return b"".join(parts)


def save_split(split, path, extra=None):
    """Write the binary split and its JSON manifest sidecar.

    Returns the manifest dictionary.
    """
    blob = encode_split(split)
    Path(path).write_bytes(blob)
    name, classes = split.task
    manifest = {
        "schema_version": SPLIT_VERSION,
        "dataset": name,
        "classes": list(classes),
        "seed": split.seed,
        "n_train": int(split.X_train.shape[0]),
        "n_test": int(split.X_test.shape[0]),
        "dim": int(split.X_train.shape[1]),
        "degenerate": int(split.degenerate),
        "sha256": hashlib.sha256(blob).hexdigest(),
    }
    if extra:
        manifest.update(extra)
    _manifest_path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _renormalize(X):
    X = X.astype(np.float64)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    np.divide(X, norms, out=X, where=norms > 0)
    return X


def load_split(path):
    """Read a split written by :func:`save_split`.

    Features are stored as float32; on load they are promoted to float64 and
    non-zero rows are renormalized to unit norm.
    """
    path = Path(path)
    if not path.exists():
        raise DataError("split file not found", path=path)
    raw = path.read_bytes()
    if len(raw) < _SPLIT_HEADER.size:
        raise TruncatedFile("split header truncated", path=path, offset=len(raw))
    magic, version, n_tr, n_te, dim = _SPLIT_HEADER.unpack_from(raw)
    if magic != SPLIT_MAGIC:
        raise BadMagic(f"not a split file (magic {magic!r})", path=path, offset=0)
    if version != SPLIT_VERSION:
        raise DataError(f"unsupported split version {version}", path=path, offset=8)
    expected = _SPLIT_HEADER.size + 4 * dim * (n_tr + n_te) + n_tr + n_te
    if len(raw) != expected:
        raise TruncatedFile(
            f"split payload is {len(raw)} bytes, expected {expected}",
            path=path,
            offset=min(len(raw), expected),
        )
    off = _SPLIT_HEADER.size
    X_tr = np.frombuffer(raw, "<f4", n_tr * dim, off).reshape(n_tr, dim)
    off += 4 * n_tr * dim
    y_tr = np.frombuffer(raw, np.uint8, n_tr, off)
    off += n_tr
    X_te = np.frombuffer(raw, "<f4", n_te * dim, off).reshape(n_te, dim)
    off += 4 * n_te * dim
    y_te = np.frombuffer(raw, np.uint8, n_te, off)

    meta = {}
    mpath = _manifest_path(path)
    if mpath.exists():
        meta = json.loads(mpath.read_text())
    task = (meta.get("dataset"), tuple(meta.get("classes", ())))
    return DatasetSplit(
        X_train=_renormalize(X_tr),
        y_train=y_tr.astype(np.int64),
        X_test=_renormalize(X_te),
        y_test=y_te.astype(np.int64),
        seed=meta.get("seed"),
        task=task,
        degenerate=meta.get("degenerate", 0),
    )
