import csv
import json
import math

import numpy as np
import pytest

from twoscale import io as tio
from twoscale.scene import sample, sinusoid_scene


def test_grid_roundtrip(tmp_path, rng):
    v = rng.normal(size=(7, 5))
    p = tmp_path / "a.grid"
    tio.write_grid(p, v, {"level": 3, "note": np.float64(2.5)})
    back, meta = tio.read_grid(p)
    np.testing.assert_array_equal(back, v)
    assert meta["shape"] == [7, 5] and meta["note"] == 2.5
    assert p.stat().st_size == 8 * v.size


def test_image_roundtrip_keeps_masks(tmp_path, haar, rng):
    img = sample(sinusoid_scene(), haar, 4)
    img.observed = rng.random(img.shape) > 0.3
    p = tmp_path / "img.grid"
    tio.save_image(p, img)
    back = tio.load_image(p)
    np.testing.assert_array_equal(back.values, img.values)
    np.testing.assert_array_equal(back.mask, img.mask)
    np.testing.assert_array_equal(back.observed, img.observed)
    assert back.level == 4 and back.index0 == tuple(img.index0) and back.domain == img.domain


def test_image_without_observed(tmp_path, haar):
    img = sample(sinusoid_scene(), haar, 3)
    tio.save_image(tmp_path / "x.grid", img)
    assert tio.load_image(tmp_path / "x.grid").observed is None


def test_pgm_roundtrip_within_one_step(tmp_path, rng):
    v = rng.normal(size=(13, 9))
    tio.write_pgm(tmp_path / "v.pgm", v)
    back = tio.read_pgm(tmp_path / "v.pgm")
    assert back.shape == v.shape
    step = (v.max() - v.min()) / 65535
    assert np.abs(back - v).max() <= 0.5 * step * (1 + 1e-9)
    # header: width is the first array axis
    assert (tmp_path / "v.pgm").read_bytes().startswith(b"P5\n")


def test_pgm_constant_image(tmp_path):
    tio.write_pgm(tmp_path / "c.pgm", np.full((4, 4), 3.0))
    np.testing.assert_allclose(tio.read_pgm(tmp_path / "c.pgm"), 3.0)


def test_csv_writes_floats_at_full_precision(tmp_path):
    rows = [{"n": 5, "x": 1 / 3, "y": None}, {"n": 6, "x": np.float64(math.pi), "y": "a"}]
    tio.write_csv(tmp_path / "t.csv", rows, ("n", "x", "y"))
    got = list(csv.DictReader(open(tmp_path / "t.csv")))
    assert float(got[0]["x"]) == 1 / 3 and float(got[1]["x"]) == math.pi
    assert got[0]["y"] == "" and got[1]["y"] == "a"


def test_json_handles_numpy_and_infinity(tmp_path):
    tio.write_json(tmp_path / "j.json", {"a": np.arange(3), "b": np.int64(4), "c": math.inf})
    d = json.load(open(tmp_path / "j.json"))
    assert d == {"a": [0, 1, 2], "b": 4, "c": math.inf}
    with pytest.raises(TypeError):
        tio.write_json(tmp_path / "k.json", {"x": object()})
