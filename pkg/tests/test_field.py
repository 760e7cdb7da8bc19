import csv

import numpy as np
import pytest

from fpe_sim.field import DensityField, write_fields_csv


def test_mass_trapezoid_and_widths():
    xs = np.linspace(0, 1, 101)
    f = DensityField(1.0, xs, np.ones_like(xs), 0.0, 1.0)
    assert f.mass() == pytest.approx(1.0, rel=1e-14)
    assert f.cell_weights().sum() == pytest.approx(1.0)
    g = DensityField(1.0, [0.25, 0.75], [1.0, 1.0], 0.0, 1.0, widths=[0.5, 0.5])
    assert g.mass() == 1.0


def test_validation():
    with pytest.raises(ValueError):
        DensityField(1.0, [0.0, 0.0], [1.0, 1.0], 0.0, 1.0)
    with pytest.raises(ValueError):
        DensityField(1.0, [0.0, 1.0], [1.0], 0.0, 1.0)
    with pytest.raises(ValueError):
        DensityField(1.0, [0.0, 1.0], [1.0, 1.0], 2.0, 1.0)


def test_csv_round_trip(tmp_path):
    xs = np.array([0.1, 0.2, 1.0 / 3.0])
    f = DensityField(0.5, xs, np.array([1.0, 2.0, np.pi]), 0.0, 1.0)
    path = tmp_path / "a.csv"
    write_fields_csv(path, [f])
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "x", "W"]
    assert float(rows[3][1]) == xs[2] and float(rows[3][2]) == np.pi
    assert "e" in rows[1][0]


def test_histogram_csv(tmp_path):
    f = DensityField(1.0, [0.25, 0.75], [0.6, 1.4], 0.0, 1.0, widths=[0.5, 0.5], counts=[3, 7])
    f.histogram_to_csv(tmp_path / "h.csv")
    rows = list(csv.reader(open(tmp_path / "h.csv")))
    assert rows[0] == ["t", "bin_center", "density", "count"]
    assert rows[2][3] == "7"
    with pytest.raises(ValueError):
        DensityField(1.0, [0.5], [1.0], 0.0, 1.0).histogram_to_csv(tmp_path / "x.csv")
