import numpy as np
import pytest

from tacgrip.pgm import frame_filename, iter_frame_files, read_pgm, write_pgm


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.uniform(0.0, 1.0, (48, 64))
    path = tmp_path / "x.pgm"
    write_pgm(path, img)
    back = read_pgm(path)
    assert back.dtype == np.uint8
    assert back.shape == (48, 64)
    # 8-bit quantization: half a level either way
    assert np.abs(back / 255.0 - img).max() <= 0.5 / 255 + 1e-12


def test_integer_input_written_verbatim(tmp_path):
    img = np.arange(12, dtype=np.int64).reshape(3, 4)
    path = tmp_path / "x.pgm"
    write_pgm(path, img)
    assert np.array_equal(read_pgm(path), img)


def test_binary_p5_header_and_comment(tmp_path):
    path = tmp_path / "x.pgm"
    write_pgm(path, np.zeros((4, 6)), comment="range 0..1")
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n")
    assert b"# range 0..1\n" in raw
    assert b"6 4\n255\n" in raw
    assert np.array_equal(read_pgm(path), np.zeros((4, 6), dtype=np.uint8))


def test_extremes_map_to_full_range(tmp_path):
    path = tmp_path / "x.pgm"
    write_pgm(path, np.array([[0.0, 1.0]]))
    back = read_pgm(path)
    assert back[0, 0] == 0
    assert back[0, 1] == 255


def test_integer_out_of_byte_range_rejected(tmp_path):
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "x.pgm", np.array([[300]]))


def test_frame_filename_format():
    assert frame_filename(1, 0) == "frame_1_000000.pgm"
    assert frame_filename(2, 123) == "frame_2_000123.pgm"


def test_iter_frame_files_ordering(tmp_path):
    img = np.zeros((2, 2))
    for seq in (3, 0, 11):
        write_pgm(tmp_path / frame_filename(1, seq), img)
    write_pgm(tmp_path / frame_filename(2, 5), img)
    (tmp_path / "notes.txt").write_text("ignored")
    got = iter_frame_files(tmp_path)
    assert [(f, s) for f, s, _ in got] == [(1, 0), (1, 3), (1, 11), (2, 5)]


def test_read_rejects_non_p5(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
    with pytest.raises(ValueError):
        read_pgm(path)


def test_read_rejects_wide_maxval(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
    with pytest.raises(ValueError):
        read_pgm(path)
