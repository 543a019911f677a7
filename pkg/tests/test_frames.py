import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blindspot.errors import (
    DimensionError,
    HeaderError,
    MagicError,
    RangeError,
    SequenceError,
    ShapeMismatchError,
    TruncatedError,
)
from blindspot.frames import (
    DepthFrame,
    Frame,
    FrameSequence,
    as_frame,
    decode_pgm,
    encode_pgm,
    encode_ppm,
    frame_filename,
    load_depth_pgm,
    load_depth_sequence,
    load_pgm,
    load_sequence,
    quantize,
    save_depth_pgm,
    save_pgm,
    save_sequence,
    write_frame,
)


def test_load_normalizes_by_maxval():
    data = b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64])
    f = load_pgm(data)
    assert f.shape == (2, 2)
    np.testing.assert_array_equal(f.intensities, [0.0, 128 / 255, 1.0, 64 / 255])


def test_load_divides_by_header_maxval_not_255():
    f = load_pgm(b"P5\n2 2\n100\n" + bytes([50, 100, 0, 25]))
    np.testing.assert_array_equal(f.intensities, [0.5, 1.0, 0.0, 0.25])


def test_header_comments_are_skipped():
    f = load_pgm(b"P5\n# made by hand\n2 2 # trailing\n255\n" + bytes([0, 255, 0, 255]))
    np.testing.assert_array_equal(f.intensities, [0.0, 1.0, 0.0, 1.0])


def test_sixteen_bit_samples_are_big_endian():
    f = load_pgm(b"P5\n2 2\n65535\n" + bytes([0x80, 0x00]) + bytes(6))
    assert f.intensities[0] == pytest.approx(0x8000 / 65535)


@pytest.mark.parametrize(
    "data, err",
    [
        (b"P6\n2 2\n255\n" + bytes(12), MagicError),
        (b"P2\n2 2\n255\n0 0 0 0", MagicError),
        (b"P5\n2 x\n255\n" + bytes(4), HeaderError),
        (b"P5\n2 2\n0\n" + bytes(4), HeaderError),
        (b"P5\n2 2\n70000\n" + bytes(8), HeaderError),
        (b"P5\n0 2\n255\n", DimensionError),
        (b"P5\n2 2\n255\n" + bytes(3), TruncatedError),
        (b"P5\n2 2\n100\n" + bytes([50, 101, 0, 0]), RangeError),
    ],
)
def test_malformed_streams_raise_distinct_errors(data, err):
    with pytest.raises(err):
        load_pgm(data)


def test_save_all_zero_frame_exact_bytes():
    assert save_pgm(Frame(np.zeros((2, 2)))) == b"P5\n2 2\n255\n" + bytes(4)


def test_save_all_one_frame_payload():
    data = save_pgm(Frame(np.ones((3, 2))))
    assert data.endswith(bytes([255] * 6))


def test_round_trip_equals_quantize():
    rng = np.random.default_rng(0)
    f = Frame(rng.random((5, 7)))
    assert load_pgm(save_pgm(f)) == quantize(f)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 9), st.integers(2, 9)), elements=st.floats(0, 1)))
def test_round_trip_error_within_half_step(pixels):
    f = Frame(pixels)
    back = load_pgm(save_pgm(f))
    assert np.max(np.abs(back.pixels - f.pixels)) <= 1 / 510 + 1e-12


@settings(max_examples=80, deadline=None)
@given(st.binary(min_size=0, max_size=40))
def test_loader_never_yields_out_of_range(payload):
    data = b"P5\n3 2\n200\n" + payload
    try:
        f = load_pgm(data)
    except (TruncatedError, RangeError):
        return
    assert f.pixels.min() >= 0 and f.pixels.max() <= 1


def test_depth_round_trip_uses_16_bits():
    d = DepthFrame(np.array([[0.0, 0.25], [0.5, 1.0]]))
    data = save_depth_pgm(d)
    assert b"65535" in data.split(b"\n")[2]
    back = load_depth_pgm(data)
    assert np.max(np.abs(back.values - d.values)) <= 1 / (2 * 65535)


def test_frame_rejects_out_of_range_and_tiny():
    with pytest.raises(ValueError):
        Frame(np.array([[0.0, 1.5], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        Frame(np.zeros((1, 4)))


def test_frame_is_read_only():
    f = Frame(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        f.pixels[0, 0] = 1.0


def test_as_frame_checks_count():
    f = as_frame([0, 0.5, 1, 0.25], 2, 2)
    assert f.width == 2 and f.height == 2
    with pytest.raises(DimensionError):
        as_frame([0, 1, 0], 2, 2)


def test_sequence_requires_matching_shapes():
    with pytest.raises(ShapeMismatchError):
        FrameSequence((Frame(np.zeros((4, 4))), Frame(np.zeros((4, 5)))))


def _write(dirpath, shapes):
    for i, shape in enumerate(shapes):
        write_frame(dirpath / frame_filename(i), Frame(np.full(shape, 0.5)))


def test_load_sequence_three_frames(tmp_path):
    _write(tmp_path, [(64, 64)] * 3)
    seq = load_sequence(tmp_path)
    assert len(seq) == 3
    assert seq.frame_period == pytest.approx(1 / 30)


def test_load_sequence_dimension_mismatch(tmp_path):
    _write(tmp_path, [(64, 64), (32, 32)])
    with pytest.raises(ShapeMismatchError):
        load_sequence(tmp_path)


def test_load_sequence_single_file(tmp_path):
    _write(tmp_path, [(8, 8)])
    with pytest.raises(SequenceError):
        load_sequence(tmp_path)


def test_load_sequence_gap(tmp_path):
    write_frame(tmp_path / frame_filename(0), Frame(np.zeros((4, 4))))
    write_frame(tmp_path / frame_filename(2), Frame(np.zeros((4, 4))))
    with pytest.raises(SequenceError):
        load_sequence(tmp_path)


def test_save_then_load_sequence(tmp_path):
    frames = [Frame(np.full((6, 5), v)) for v in (0.0, 0.2, 1.0)]
    save_sequence(tmp_path, frames)
    seq = load_sequence(tmp_path)
    assert [f for f in seq] == [quantize(f) for f in frames]


def test_depth_sequence_round_trip(tmp_path):
    depths = [DepthFrame(np.full((4, 4), v)) for v in (0.1, 0.9)]
    save_sequence(tmp_path, depths)
    back = load_depth_sequence(tmp_path)
    assert len(back) == 2
    assert back[1].pixels[0, 0] == pytest.approx(0.9, abs=1e-5)


def test_encode_pgm_and_ppm_headers():
    assert encode_pgm(np.zeros((1, 3))).startswith(b"P5\n3 1\n255\n")
    rgb = np.zeros((2, 3, 3), dtype=np.uint8)
    assert encode_ppm(rgb) == b"P6\n3 2\n255\n" + bytes(18)


def test_decode_reports_maxval():
    _, maxval = decode_pgm(b"P5\n2 2\n15\n" + bytes([15, 0, 0, 0]))
    assert maxval == 15
