"""Binary format round-trips and malformed-input rejection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssmfusion.harness import tensorfile as tf


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("shape", [(4,), (3, 5), (2, 3, 4), (2, 2, 3, 2)])
def test_roundtrip_bitwise(tmp_path, dtype, shape):
    rng = np.random.default_rng(0)
    arr = rng.standard_normal(shape).astype(dtype)
    path = tmp_path / "t.msft"
    tf.write_tensor(path, arr)
    back = tf.read_tensor(path)
    assert back.dtype == arr.dtype
    assert back.shape == arr.shape
    assert np.array_equal(back.view(np.uint8), arr.view(np.uint8))


@settings(max_examples=40, deadline=None)
@given(
    rank=st.integers(min_value=1, max_value=4),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
    f64=st.booleans(),
)
def test_roundtrip_property(rank, seed, f64):
    rng = np.random.default_rng(seed)
    shape = tuple(int(rng.integers(1, 5)) for _ in range(rank))
    arr = rng.standard_normal(shape).astype(np.float64 if f64 else np.float32)
    blob = tf.tensor_bytes(arr)
    back, end = tf.tensor_from(blob)
    assert end == len(blob)
    assert np.array_equal(back, arr) and back.dtype == arr.dtype


def test_zero_length_rejected():
    with pytest.raises(tf.FormatError):
        tf.tensor_bytes(np.zeros((0, 3), dtype=np.float32))
    with pytest.raises(tf.FormatError):
        tf.tensor_bytes(np.zeros((2, 0), dtype=np.float64))


def test_scalar_rank_rejected():
    with pytest.raises(tf.FormatError):
        tf.tensor_bytes(np.float32(3.0))


def test_integer_dtype_rejected():
    with pytest.raises(tf.FormatError):
        tf.tensor_bytes(np.ones((2, 2), dtype=np.int32))


def test_bad_magic():
    blob = bytearray(tf.tensor_bytes(np.ones(3, dtype=np.float32)))
    blob[:4] = b"XXXX"
    with pytest.raises(tf.FormatError):
        tf.tensor_from(bytes(blob))


def test_bad_version():
    blob = bytearray(tf.tensor_bytes(np.ones(3, dtype=np.float32)))
    blob[4] = 9
    with pytest.raises(tf.FormatError):
        tf.tensor_from(bytes(blob))


def test_truncated_payload():
    blob = tf.tensor_bytes(np.ones(4, dtype=np.float64))
    with pytest.raises(tf.FormatError):
        tf.tensor_from(blob[:-3])


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "t.msft"
    with open(path, "wb") as f:
        f.write(tf.tensor_bytes(np.ones(2, dtype=np.float32)) + b"junk")
    with pytest.raises(tf.FormatError):
        tf.read_tensor(path)


def test_container_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    tensors = {
        "module0.mspa_h.route2.W_B": rng.standard_normal((4, 3)).astype(np.float32),
        "head.fc1.W": rng.standard_normal((8, 4)).astype(np.float64),
        "pca.mean": rng.standard_normal(16),
    }
    meta = {"model": {"C": 4}, "seed": 7}
    path = tmp_path / "ck.msfc"
    tf.write_container(path, tensors, meta)
    meta2, back = tf.read_container(path)
    assert meta2 == meta
    assert sorted(back) == sorted(tensors)
    for k in tensors:
        assert np.array_equal(back[k], tensors[k])
        assert back[k].dtype == tensors[k].dtype


def test_container_write_is_deterministic(tmp_path):
    tensors = {"b": np.ones(3, dtype=np.float32), "a": np.zeros(2, dtype=np.float64)}
    p1, p2 = tmp_path / "a.msfc", tmp_path / "b.msfc"
    tf.write_container(p1, tensors, {"x": 1})
    tf.write_container(p2, dict(reversed(tensors.items())), {"x": 1})
    assert p1.read_bytes() == p2.read_bytes()


def test_labels_roundtrip(tmp_path):
    labels = np.arange(12, dtype=np.uint16).reshape(3, 4)
    path = tmp_path / "l.msfl"
    tf.write_labels(path, labels)
    back = tf.read_labels(path)
    assert np.array_equal(back, labels) and back.dtype == np.uint16


def test_labels_validation(tmp_path):
    with pytest.raises(tf.FormatError):
        tf.write_labels(tmp_path / "x", np.zeros(4, dtype=np.uint16))
    with pytest.raises(tf.FormatError):
        tf.write_labels(tmp_path / "x", np.full((2, 2), -1))
    path = tmp_path / "l.msfl"
    tf.write_labels(path, np.ones((2, 2), dtype=np.uint16))
    with open(path, "r+b") as f:
        f.write(b"MSFT")
    with pytest.raises(tf.FormatError):
        tf.read_labels(path)
