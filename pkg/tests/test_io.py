import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from nibridge.freeconv import GriddedMeasure
from nibridge.io import (read_density_json, read_ensemble_binary, read_ensemble_csv,
                         read_grid_json, write_density_csv, write_density_json,
                         write_ensemble_binary, write_ensemble_csv, write_estimate_json,
                         write_grid_csv, write_grid_json, write_histogram_csv)
from nibridge.limitshape import (height_grid_from_function, shape_grid_from_function,
                                 watermelon_G, watermelon_H)
from nibridge.sampling import TimeGrid, sample_watermelon_gue
from nibridge.statistics import empirical_correlation, gap_histogram, gaussian_bump


def ensemble(seed=0, n=4, steps=5):
    return sample_watermelon_gue(n, TimeGrid(0.0, 1.0, steps), 0.3, -0.2, np.random.default_rng(seed))


def test_ensemble_round_trips(tmp_path):
    ens = ensemble()
    write_ensemble_csv(ens, tmp_path / "e.csv")
    write_ensemble_binary(ens, tmp_path / "e.bin")
    for back in (read_ensemble_csv(tmp_path / "e.csv"), read_ensemble_binary(tmp_path / "e.bin")):
        assert np.array_equal(back.positions, ens.positions)
        assert back.grid == ens.grid
        back.check()
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "path_index,time_index,time,position"


def test_binary_dump_is_validated(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"xx")
    with pytest.raises(ValueError):
        read_ensemble_binary(p)
    write_ensemble_binary(ensemble(), p)
    data = p.read_bytes()
    p.write_bytes(b"NOPE!" + data[5:])
    with pytest.raises(ValueError):
        read_ensemble_binary(p)
    p.write_bytes(data[:-8])
    with pytest.raises(ValueError):
        read_ensemble_binary(p)


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 6), steps=st.integers(1, 8))
def test_binary_round_trip_is_exact(tmp_path, seed, n, steps):
    ens = ensemble(seed, n, steps)
    write_ensemble_binary(ens, tmp_path / "h.bin")
    assert np.array_equal(read_ensemble_binary(tmp_path / "h.bin").positions, ens.positions)


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(values=st.lists(st.floats(0, 10), min_size=2, max_size=20), x_min=st.floats(-5, 5),
       dx=st.floats(0.01, 2))
def test_density_json_round_trip(tmp_path, values, x_min, dx):
    values[1] = max(values[1], 0.5)
    g = GriddedMeasure.from_density(x_min, dx, values)
    write_density_json(g, tmp_path / "d.json")
    back = read_density_json(tmp_path / "d.json")
    assert np.array_equal(back.values, g.values) and back.x_min == g.x_min and back.dx == g.dx
    assert back.mass == pytest.approx(g.mass, rel=1e-12)


def test_density_csv(tmp_path):
    g = GriddedMeasure.semicircle(1.0, 33)
    write_density_csv(g, tmp_path / "d.csv")
    data = np.loadtxt(tmp_path / "d.csv", delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 0], g.nodes) and np.array_equal(data[:, 1], g.values)


def test_grid_round_trips(tmp_path):
    s = shape_grid_from_function(watermelon_G, (0.2, 0.8), (0.2, 0.8), (5, 7), eps=0.05)
    h = height_grid_from_function(watermelon_H, (0.2, 0.8), (-0.5, 0.5), (4, 6))
    for g in (s, h):
        write_grid_json(g, tmp_path / "g.json")
        back = read_grid_json(tmp_path / "g.json")
        assert type(back) is type(g) and np.array_equal(back.values, g.values)
        write_grid_csv(g, tmp_path / "g.csv")
        data = np.loadtxt(tmp_path / "g.csv", delimiter=",", skiprows=1)
        assert np.array_equal(data[:, 2], g.values.ravel())
    assert read_grid_json(tmp_path / "g.json").x_range == (-0.5, 0.5)


def test_estimate_and_histogram_outputs(tmp_path):
    import json
    z = [np.array([1.0, 0.2, -0.5]), np.array([0.7, -0.1])]
    est = empirical_correlation(z, 1, gaussian_bump())
    write_estimate_json(est, tmp_path / "e.json")
    d = json.loads((tmp_path / "e.json").read_text())
    assert set(d) == {"k", "F_id", "value", "stderr", "replicas"} and d["replicas"] == 2
    write_histogram_csv(gap_histogram(z), tmp_path / "h.csv")
    rows = np.loadtxt(tmp_path / "h.csv", delimiter=",", skiprows=1)
    assert rows[:, 2].sum() == pytest.approx(1.0)
