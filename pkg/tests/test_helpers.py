import numpy as np
import pytest

from utils.helpers import (append_jsonl, load_jsonl, make_rng, parse_angles, parse_float_list, read_csv, read_pgm,
                           read_sinogram, write_csv, write_pgm, write_sinogram)
from utils.errors import ConfigError


def test_default_angle_spec():
    angles = parse_angles("0:1.5:178.5")
    assert len(angles) == 120
    assert angles[0] == 0.0
    assert angles[-1] == 178.5


def test_angle_spec_variants():
    assert parse_angles("0:3:177") == [3.0 * i for i in range(60)]
    assert parse_angles("45") == [45.0]
    assert parse_angles("10:20:15") == [10.0]


@pytest.mark.parametrize("spec", ["", "a:b:c", "0:1", "0:0:10", "0:-1:10", "10:1:0"])
def test_bad_angle_specs(spec):
    with pytest.raises(ConfigError):
        parse_angles(spec)


def test_float_list():
    assert parse_float_list("1e-3, 2e-3,") == [1e-3, 2e-3]
    with pytest.raises(ConfigError):
        parse_float_list("1e-3,x")


def test_rng_is_reproducible():
    assert np.array_equal(make_rng(5).standard_normal(10), make_rng(5).standard_normal(10))


def test_binary_pgm(tmp_path):
    image = np.linspace(0.0, 1.0, 12).reshape(3, 4)
    path = write_pgm(tmp_path / "img.pgm", image)
    assert path.read_bytes().startswith(b"P5\n4 3\n255\n")
    gray = read_pgm(path)
    assert gray.shape == (3, 4)
    assert gray[0, 0] == 0 and gray[-1, -1] == 255


def test_plain_pgm_clamps(tmp_path):
    image = np.array([[-0.5, 0.5], [1.0, 2.0]])
    path = write_pgm(tmp_path / "img.pgm", image, binary=False)
    assert path.read_text().startswith("P2\n2 2\n255\n")
    assert read_pgm(path).tolist() == [[0, 128], [255, 255]]


def test_pgm_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P2\n# made by hand\n2 1\n255\n7 9\n")
    assert read_pgm(path).tolist() == [[7, 9]]


def test_pgm_needs_2d_image(tmp_path):
    with pytest.raises(ConfigError):
        write_pgm(tmp_path / "bad.pgm", np.zeros(4))


@pytest.mark.parametrize("name", ["b.csv", "b.bin"])
def test_sinogram_formats(tmp_path, rng, name):
    b = rng.standard_normal(37)
    path = write_sinogram(tmp_path / name, b)
    assert np.array_equal(read_sinogram(path), b)


def test_raw_sinogram_header(tmp_path):
    path = write_sinogram(tmp_path / "b.raw", np.array([1.5, -2.0]))
    data = path.read_bytes()
    assert data[:8] == b"TGSINO01"
    assert int.from_bytes(data[8:16], "little") == 2
    assert len(data) == 16 + 16

    bad = tmp_path / "bad.raw"
    bad.write_bytes(b"NOTASINO" + data[8:])
    with pytest.raises(ConfigError):
        read_sinogram(bad)


def test_csv_cells(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["k", "value"], [[1, 0.1], [2, None]])
    rows = read_csv(path)
    assert rows == [{"k": "1", "value": "0.1"}, {"k": "2", "value": ""}]


def test_jsonl(tmp_path):
    path = tmp_path / "runs.jsonl"
    append_jsonl(path, {"run": 0})
    append_jsonl(path, {"run": 1, "kind": "grains"})
    assert load_jsonl(path) == [{"run": 0}, {"run": 1, "kind": "grains"}]
