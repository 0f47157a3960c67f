import numpy as np
import pytest

from quantile_ipp.environment import (GroundTruthField, RasterFormatError,
                                      SensorModel, load_raster, measure,
                                      sample_gp_field, seed_measurements,
                                      write_raster)
from quantile_ipp.gp import GpHyperparams
from quantile_ipp.grid import Action, GridWorld, RejectedActionError, RobotState

TH = GpHyperparams(lengthscale=3.0)


def test_sample_is_deterministic_per_seed():
    w = GridWorld((6, 5))
    a = sample_gp_field(w, TH, 3)
    b = sample_gp_field(w, TH, 3)
    c = sample_gp_field(w, TH, 4)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_long_lengthscale_gives_flat_field():
    w = GridWorld((8, 8))
    th = GpHyperparams(lengthscale=1e4, signal_variance=1.0)
    spreads = [np.var(sample_gp_field(w, th, s).values) for s in range(20)]
    assert max(spreads) < 0.01


def test_raster_lookup(tmp_path):
    w = GridWorld((2, 2))
    p = tmp_path / "f.txt"
    p.write_text("# quantile-ipp raster v1\ndims 2 2\nunits ug/L\n1 2\n3 4\n")
    f = load_raster(p, w)
    assert f.units == "ug/L"
    cells = [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert [f.at(w.measure_index(c)) for c in cells] == [1, 2, 3, 4]


def test_raster_header_payload_mismatch(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("# quantile-ipp raster v1\ndims 2 2\nunits\n1 2 3\n")
    with pytest.raises(RasterFormatError):
        load_raster(p, GridWorld((2, 2)))


@pytest.mark.parametrize("text", [
    "not a raster\n",
    "# quantile-ipp raster v1\nunits x\ndims 2 2\n1 2 3 4\n",
    "# quantile-ipp raster v1\ndims 2 2\nunits\n1 2 x 4\n",
])
def test_raster_malformed(tmp_path, text):
    p = tmp_path / "f.txt"
    p.write_text(text)
    with pytest.raises(RasterFormatError):
        load_raster(p, GridWorld((2, 2)))


def test_raster_dimension_and_finiteness(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("# quantile-ipp raster v1\ndims 2 2\nunits\n1 2 3 4\n")
    with pytest.raises(ValueError):
        load_raster(p, GridWorld((3, 2)))
    p.write_text("# quantile-ipp raster v1\ndims 2 2\nunits\n1 2 nan 4\n")
    with pytest.raises(ValueError):
        load_raster(p, GridWorld((2, 2)))


def test_raster_round_trip_bit_exact(tmp_path):
    w = GridWorld((5, 4), resolution=2)
    f = sample_gp_field(w, TH, 9, units="pixel intensity 0-255")
    p = tmp_path / "r.txt"
    write_raster(p, f)
    g = load_raster(p, w)
    assert g.units == f.units
    assert np.array_equal(g.values, f.values)


def _ramp(w):
    return GroundTruthField(w, np.arange(w.n_measure, dtype=float))


def test_camera_full_footprint():
    w = GridWorld((20, 15), resolution=2)
    pts, vals = measure(_ramp(w), SensorModel("camera", (8, 5)), RobotState((10, 7), 0, 5))
    assert len(pts) == 40 and len(vals) == 40


def test_camera_clipped_at_corner():
    w = GridWorld((20, 15), resolution=2)
    pts, vals = measure(_ramp(w), SensorModel("camera", (8, 5)), RobotState((0, 0), 0, 5))
    assert 0 < len(pts) < 40
    lo, hi = w.bounds[:, 0], w.bounds[:, 1]
    assert np.all(pts >= lo) and np.all(pts <= hi)


def test_margin_keeps_footprint_whole():
    w = GridWorld((20, 15), resolution=2, margin=(4, 2))
    f = _ramp(w)
    for pos in [(0, 0), (19, 14), (0, 14), (19, 0)]:
        pts, _ = measure(f, SensorModel("camera", (8, 5)), RobotState(pos, 0, 5))
        assert len(pts) == 40


def test_point_sensor_five_samples():
    w = GridWorld((5, 5, 2), resolution=4)
    f = _ramp(w)
    pts, vals = measure(f, SensorModel("point", samples=5), RobotState((1, 1, 0), 0, 5),
                        Action(0, 1))
    assert len(pts) == 5
    assert pts[0].tolist() == [4, 4, 0] and pts[-1].tolist() == [8, 4, 0]
    assert np.allclose(np.diff(pts[:, 0]), 1.0)
    assert np.array_equal(vals, f.lookup(pts))


def test_measure_invalid():
    w = GridWorld((4, 4))
    with pytest.raises(ValueError):
        measure(_ramp(w), SensorModel(), RobotState((9, 9), 0, 1))
    with pytest.raises(RejectedActionError):
        measure(_ramp(w), SensorModel(), RobotState((0, 0), 0, 1), Action(0, -1))


def test_measure_values_are_ground_truth():
    w = GridWorld((6, 6), resolution=2)
    f = sample_gp_field(w, TH, 1)
    rng = np.random.default_rng(0)
    for _ in range(20):
        pos = tuple(int(v) for v in rng.integers(0, 6, 2))
        pts, vals = measure(f, SensorModel("camera", (3, 3)), RobotState(pos, 0, 1))
        assert len(pts) <= 9
        assert np.array_equal(vals, f.lookup(pts))


def test_seed_measurements():
    w = GridWorld((20, 15), resolution=2)
    f = _ramp(w)
    h = seed_measurements(f, 100)
    assert len(h.values) == 100
    assert len(set(h.indices)) == 100
    assert h.n_seed == 100
    full = seed_measurements(f, w.n_measure)
    assert sorted(full.indices) == list(range(w.n_measure))
    with pytest.raises(ValueError):
        seed_measurements(f, w.n_measure + 1)
