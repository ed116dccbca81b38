import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homnet import dataio
from homnet.errors import (
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


def _idx_fixture(tmp_path, n=2, label_magic=2049):
    """Hand-built IDX bytes following the big-endian header layout."""
    pixels = bytes((i * 7 + k) % 256 for k in range(n) for i in range(784))
    img = struct.pack(">iiii", 2051, n, 28, 28) + pixels
    lab = struct.pack(">ii", label_magic, n) + bytes(range(n))
    ip, lp = tmp_path / "img", tmp_path / "lab"
    ip.write_bytes(img)
    lp.write_bytes(lab)
    return ip, lp, pixels


def test_load_idx_two_images(tmp_path):
    ip, lp, pixels = _idx_fixture(tmp_path)
    items = dataio.load_idx(ip, lp)
    assert len(items) == 2
    for k, (img, label) in enumerate(items):
        assert (img.width, img.height, img.channels) == (28, 28, 1)
        assert img.data.size == 784
        assert img.data.tobytes() == pixels[784 * k : 784 * (k + 1)]
        assert label == k


def test_load_idx_empty_file(tmp_path):
    (tmp_path / "e").write_bytes(b"")
    _, lp, _ = _idx_fixture(tmp_path)
    with pytest.raises(TruncatedFile):
        dataio.load_idx(tmp_path / "e", lp)


def test_label_file_with_image_magic(tmp_path):
    ip, lp, _ = _idx_fixture(tmp_path, label_magic=2051)
    with pytest.raises(BadMagic):
        dataio.load_idx(ip, lp)


def test_truncated_payload(tmp_path):
    ip, lp, _ = _idx_fixture(tmp_path)
    ip.write_bytes(ip.read_bytes()[:-1])
    with pytest.raises(TruncatedFile) as exc:
        dataio.load_idx(ip, lp)
    assert "img" in str(exc.value) and "offset" in str(exc.value)


def test_count_mismatch(tmp_path):
    ip, _, _ = _idx_fixture(tmp_path, n=2)
    lp = tmp_path / "lab3"
    lp.write_bytes(struct.pack(">ii", 2049, 3) + b"\0\1\2")
    with pytest.raises(CountMismatch):
        dataio.load_idx(ip, lp)


def test_gzip_idx(tmp_path):
    import gzip

    ip, lp, _ = _idx_fixture(tmp_path)
    gz = tmp_path / "img.gz"
    gz.write_bytes(gzip.compress(ip.read_bytes()))
    assert dataio.load_idx(gz, lp)[1][0].data.tobytes() == dataio.load_idx(ip, lp)[1][0].data.tobytes()


def test_missing_file():
    with pytest.raises(DataError):
        dataio.read_idx_images("/nonexistent/file")


def _cifar_record(label, r, g, b):
    return bytes([label]) + bytes([r]) * 1024 + bytes([g]) * 1024 + bytes([b]) * 1024


def test_cifar_single_record(tmp_path):
    p = tmp_path / "batch.bin"
    p.write_bytes(_cifar_record(0, 10, 20, 30))
    (img, label), = dataio.load_cifar10(p)
    assert label == 0
    assert (img.width, img.height, img.channels) == (32, 32, 3)
    # planar input decoded to interleaved pixels
    assert img.data[:6].tolist() == [10, 20, 30, 10, 20, 30]


def test_cifar_two_records(tmp_path):
    p = tmp_path / "b.bin"
    p.write_bytes(_cifar_record(3, 1, 2, 3) + _cifar_record(9, 4, 5, 6))
    assert len(p.read_bytes()) == 6146
    items = dataio.load_cifar10(p)
    assert [lab for _, lab in items] == [3, 9]


def test_cifar_truncated(tmp_path):
    p = tmp_path / "b.bin"
    p.write_bytes(bytes(3072))
    with pytest.raises(TruncatedFile):
        dataio.load_cifar10(p)


def test_cifar_label_out_of_range(tmp_path):
    p = tmp_path / "b.bin"
    p.write_bytes(_cifar_record(0, 0, 0, 0) + _cifar_record(10, 0, 0, 0))
    with pytest.raises(LabelOutOfRange) as exc:
        dataio.load_cifar10(p)
    assert exc.value.offset == 3073


def test_idx_round_trip(tmp_path):
    ip, lp, _ = _idx_fixture(tmp_path, n=3)
    items = dataio.load_idx(ip, lp)
    imgs = np.stack([img.pixels()[:, :, 0] for img, _ in items])
    labs = [lab for _, lab in items]
    assert dataio.encode_idx_images(imgs) == ip.read_bytes()
    assert dataio.encode_idx_labels(labs) == lp.read_bytes()


def test_cifar_round_trip(tmp_path, rng):
    blob = b"".join(
        bytes([int(rng.integers(0, 10))]) + rng.integers(0, 256, 3072, dtype=np.uint8).tobytes()
        for _ in range(4)
    )
    p = tmp_path / "b.bin"
    p.write_bytes(blob)
    assert dataio.encode_cifar10(dataio.load_cifar10(p)) == blob


@pytest.mark.parametrize("rgb,expected", [((255, 255, 255), 255), ((0, 0, 0), 0), ((255, 0, 0), 76)])
def test_grayscale(rgb, expected):
    img = dataio.RawImage(32, 32, 3, np.tile(np.array(rgb, dtype=np.uint8), 1024))
    gray = dataio.to_grayscale(img)
    assert gray.channels == 1
    assert np.all(gray.data == expected)


def test_grayscale_needs_three_channels():
    with pytest.raises(WrongChannelCount):
        dataio.to_grayscale(dataio.RawImage(32, 32, 1, np.zeros(1024)))


def test_zero_pad():
    assert not dataio.zero_pad(dataio.RawImage(28, 28, 1, np.zeros(784))).data.any()
    data = np.zeros(784, dtype=np.uint8)
    data[0] = 255
    padded = dataio.zero_pad(dataio.RawImage(28, 28, 1, data)).pixels()[:, :, 0]
    assert padded.shape == (32, 32)
    assert padded[2, 2] == 255
    assert padded.sum() == 255
    with pytest.raises(WrongDimensions):
        dataio.zero_pad(dataio.RawImage(32, 32, 1, np.zeros(1024)))


@settings(max_examples=50, deadline=None)
@given(st.binary(min_size=784, max_size=784))
def test_zero_pad_preserves_mass(raw):
    img = dataio.RawImage(28, 28, 1, np.frombuffer(raw, dtype=np.uint8))
    padded = dataio.zero_pad(img)
    assert int(padded.data.sum(dtype=np.int64)) == int(img.data.sum(dtype=np.int64))
    assert padded.pixels()[2:30, 2:30, 0].tobytes() == raw


def test_encode_one_hot():
    data = np.zeros(1024, dtype=np.uint8)
    data[17] = 255
    x, degenerate = dataio.encode_input(dataio.RawImage(32, 32, 1, data))
    assert not degenerate
    expected = np.zeros(1024)
    expected[17] = 1.0
    np.testing.assert_array_equal(x, expected)


def test_encode_uniform():
    x, _ = dataio.encode_input(dataio.RawImage(32, 32, 1, np.full(1024, 255)))
    np.testing.assert_allclose(x, 1 / 32, rtol=0, atol=1e-15)


def test_encode_all_zero_is_flagged():
    x, degenerate = dataio.encode_input(dataio.RawImage(32, 32, 1, np.zeros(1024)))
    assert degenerate
    assert not x.any()


@settings(max_examples=50, deadline=None)
@given(st.binary(min_size=1024, max_size=1024).filter(lambda b: any(b)))
def test_encode_unit_norm(raw):
    x, degenerate = dataio.encode_input(dataio.RawImage(32, 32, 1, np.frombuffer(raw, np.uint8)))
    assert not degenerate
    assert abs(np.linalg.norm(x) - 1.0) <= 1e-12


def _labeled(n_a, n_b, a=3, b=7, seed=0):
    g = np.random.default_rng(seed)
    items = []
    for cls, n in ((a, n_a), (b, n_b), (5, 10)):
        for _ in range(n):
            items.append((dataio.RawImage(28, 28, 1, g.integers(1, 256, 784)), cls))
    return items


def test_binary_task_sizes_and_determinism():
    items = _labeled(100, 100)
    s1 = dataio.make_binary_task(items, 3, 7, seed=42)
    s2 = dataio.make_binary_task(items, 3, 7, seed=42)
    assert len(s1.y_train) == 170 and len(s1.y_test) == 30
    assert set(np.unique(s1.y_train)) <= {0, 1}
    np.testing.assert_array_equal(s1.X_train, s2.X_train)
    np.testing.assert_array_equal(s1.y_test, s2.y_test)
    assert not set(s1.train_index) & set(s1.test_index)
    assert s1.X_train.shape[1] == 1024
    np.testing.assert_allclose(np.linalg.norm(s1.X_train, axis=1), 1.0, atol=1e-12)
    s3 = dataio.make_binary_task(items, 3, 7, seed=43)
    assert not np.array_equal(s1.train_index, s3.train_index)


def test_binary_task_relabels():
    items = _labeled(5, 3)
    s = dataio.make_binary_task(items, 3, 7, seed=0)
    y = np.concatenate([s.y_train, s.y_test])
    assert (y == 0).sum() == 5 and (y == 1).sum() == 3


def test_binary_task_errors():
    items = _labeled(5, 5)
    with pytest.raises(UsageError):
        dataio.make_binary_task(items, 0, 0, seed=0)
    with pytest.raises(EmptyClass):
        dataio.make_binary_task(items, 3, 8, seed=0)


def test_binary_task_cifar_features_are_grayscale():
    g = np.random.default_rng(0)
    items = [(dataio.RawImage(32, 32, 3, g.integers(0, 256, 3072)), lab) for lab in [0, 5] * 10]
    s = dataio.make_binary_task(items, 0, 5, seed=1)
    assert s.X_train.shape[1] == 1024


def test_split_container_round_trip(tmp_path):
    s = dataio.make_binary_task(_labeled(20, 20), 3, 7, seed=3, name="toy")
    path = tmp_path / "toy.split"
    manifest = dataio.save_split(s, path)
    back = dataio.load_split(path)
    assert manifest["n_train"] == 34 and manifest["n_test"] == 6
    assert back.task == ("toy", (3, 7)) and back.seed == 3
    np.testing.assert_array_equal(back.y_train, s.y_train)
    np.testing.assert_allclose(back.X_train, s.X_train, atol=1e-7)
    np.testing.assert_allclose(np.linalg.norm(back.X_test, axis=1), 1.0, atol=1e-12)
    assert dataio.encode_split(back) == path.read_bytes()


def test_split_container_truncated(tmp_path):
    s = dataio.make_binary_task(_labeled(5, 5), 3, 7, seed=3)
    path = tmp_path / "s"
    dataio.save_split(s, path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(TruncatedFile):
        dataio.load_split(path)
    path.write_bytes(b"NOTSPLIT" + bytes(16))
    with pytest.raises(BadMagic):
        dataio.load_split(path)


def test_load_dataset_from_directory(mnist_like_dir):
    items = dataio.load_dataset("mnist", mnist_like_dir)
    assert len(items) == 240
    with pytest.raises(DataError):
        dataio.load_dataset("cifar10", mnist_like_dir)
    with pytest.raises(UsageError):
        dataio.load_dataset("svhn", mnist_like_dir)
