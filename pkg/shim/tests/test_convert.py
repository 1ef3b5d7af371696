import struct

import numpy as np
import pytest

from pyshim.convert import ConversionJob, LayoutError, convert, load_array
from pyshim.formats import read_stack


def save(tmp_path, array, name="in.npy"):
    path = tmp_path / name
    np.save(path, array)
    return path


def test_round_trip_is_lossless_at_32_bit(tmp_path):
    rng = np.random.default_rng(90)
    array = rng.normal(size=(3, 7, 9))
    out = convert(ConversionJob(save(tmp_path, array), tmp_path / "out.mls1"))
    back = read_stack(out)
    assert np.array_equal(back, array.astype(np.float32).astype(np.float64))


def test_pixel_major_matches_transposed_plane_major(tmp_path):
    rng = np.random.default_rng(91)
    stack = rng.normal(size=(4, 8, 6))
    a = convert(ConversionJob(save(tmp_path, stack, "a.npy"), tmp_path / "a.mls1",
                              layout="plane-major"))
    b = convert(ConversionJob(save(tmp_path, stack.transpose(1, 2, 0), "b.npy"),
                              tmp_path / "b.mls1", layout="pixel-major"))
    assert a.read_bytes() == b.read_bytes()


def test_softmax_of_zero_logits_is_uniform(tmp_path):
    zeros = np.zeros((4, 5, 5))
    out = convert(ConversionJob(save(tmp_path, zeros), tmp_path / "out.mls1",
                                apply_softmax=True))
    assert np.allclose(read_stack(out), 0.25)


def test_softmax_normalizes_each_pixel(tmp_path):
    rng = np.random.default_rng(92)
    logits = rng.normal(size=(3, 6, 6)) * 4
    out = convert(ConversionJob(save(tmp_path, logits), tmp_path / "out.mls1",
                                apply_softmax=True))
    scores = read_stack(out)
    assert np.allclose(scores.sum(axis=0), 1.0, atol=1e-6)
    assert scores.min() >= 0.0
    expected = np.exp(logits - logits.max(axis=0))
    expected /= expected.sum(axis=0)
    assert np.allclose(scores, expected, atol=1e-6)


def test_values_untouched_without_softmax(tmp_path):
    array = np.arange(24, dtype=np.float64).reshape(2, 3, 4) - 11.5
    out = convert(ConversionJob(save(tmp_path, array), tmp_path / "out.mls1"))
    assert np.array_equal(read_stack(out), array)


def test_wrong_layout_errors_and_writes_nothing(tmp_path):
    rng = np.random.default_rng(93)
    stack = rng.normal(size=(4, 16, 16))  # plane-major on disk
    out = tmp_path / "out.mls1"
    with pytest.raises(LayoutError):
        convert(ConversionJob(save(tmp_path, stack), out, layout="pixel-major"))
    assert not out.exists()


def test_non_3d_array_rejected(tmp_path):
    out = tmp_path / "out.mls1"
    with pytest.raises(LayoutError):
        convert(ConversionJob(save(tmp_path, np.zeros((4, 4))), out))
    with pytest.raises(LayoutError):
        convert(ConversionJob(save(tmp_path, np.zeros((2, 2, 2, 2))), out))
    assert not out.exists()


def test_complex_array_rejected(tmp_path):
    array = np.zeros((2, 4, 4), dtype=np.complex128)
    with pytest.raises(LayoutError):
        convert(ConversionJob(save(tmp_path, array), tmp_path / "out.mls1"))


def test_bad_layout_string_rejected(tmp_path):
    with pytest.raises(ValueError):
        ConversionJob("in.npy", "out.mls1", layout="row-major")


def test_npz_single_entry_accepted(tmp_path):
    rng = np.random.default_rng(94)
    array = rng.normal(size=(2, 5, 5))
    path = tmp_path / "in.npz"
    np.savez(path, scores=array)
    out = convert(ConversionJob(path, tmp_path / "out.mls1"))
    assert np.array_equal(read_stack(out), array.astype(np.float32).astype(np.float64))


def test_npz_multiple_entries_rejected(tmp_path):
    path = tmp_path / "in.npz"
    np.savez(path, a=np.zeros((2, 3, 3)), b=np.ones((2, 3, 3)))
    with pytest.raises(ValueError):
        load_array(path)


def test_output_bytes_match_format_contract(tmp_path):
    array = np.arange(1.0, 9.0).reshape(2, 2, 2)
    out = convert(ConversionJob(save(tmp_path, array), tmp_path / "out.mls1"))
    expected = b"MLS1" + struct.pack("<III", 2, 2, 2)
    expected += struct.pack("<8f", *range(1, 9))
    assert out.read_bytes() == expected


def test_engine_reads_converted_file(tmp_path):
    # the engine side of the interchange, via its public reader
    mlseg_io = pytest.importorskip("mlseg.io")
    rng = np.random.default_rng(95)
    array = rng.random((3, 8, 10))
    out = convert(ConversionJob(save(tmp_path, array), tmp_path / "out.mls1"))
    assert np.array_equal(
        mlseg_io.read_scores(out),
        array.astype(np.float32).astype(np.float64),
    )
