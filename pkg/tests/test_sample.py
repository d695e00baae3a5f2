import math

import numpy as np
import pytest

from oracles import dense_scan_gap, dense_scan_gap_2d
from simverify.energy import EnergyForm, energy
from simverify.sample import (
    GridTooLarge,
    SampleGrid,
    covering_check,
    delta_grid,
    nearest_distances,
    project_onto_sublevel,
)
from simverify.verify import sweep_delta
from simverify.repro import FIG4_SAMPLES

UNIT = EnergyForm(np.eye(1), 1.125)
ELLIPSE = EnergyForm(np.array([[2.0, 0.6], [0.6, 1.0]]), 0.8)
BALL3 = EnergyForm(np.eye(3), 0.5)

# every grid configuration the package ships: examples, CLI defaults and the sweep
SHIPPED = [(UNIT, d) for d in (0.05, 0.1, 0.2, 0.4)] + [(UNIT, sweep_delta(UNIT, n)[1]) for n in FIG4_SAMPLES] \
    + [(ELLIPSE, 0.1), (ELLIPSE, 0.05), (BALL3, 0.2)]


def test_unit_interval_grid_count():
    g = delta_grid(UNIT, 0.05)
    assert g.count == 31
    assert np.all(np.abs(g.points) <= 1.5)


def test_grid_includes_boundary():
    g = delta_grid(UNIT, 0.1)
    assert 1.5 in g.points and -1.5 in g.points


def test_all_points_inside():
    for form, d in SHIPPED:
        g = delta_grid(form, d)
        assert np.all(np.atleast_1d(energy(form, g.points)) <= form.level_ell)


@pytest.mark.parametrize("form, delta", SHIPPED[:4] + SHIPPED[-3:-1])
def test_dense_scan_oracle(form, delta):
    g = delta_grid(form, delta)
    if form.dim == 1:
        R = form.radius_bound
        gap = dense_scan_gap(g.points, -R, R, 200_001)
    else:
        gap = dense_scan_gap_2d(g.points, form.P, form.level_ell, 401)
    assert gap <= delta


@pytest.mark.parametrize("i", range(len(SHIPPED)))
def test_covering_check_shipped(i):
    form, delta = SHIPPED[i]
    g = delta_grid(form, delta)
    rep = covering_check(g, form, 20_000, seed=i)
    assert rep.passed, rep


def test_covering_check_catches_removed_points():
    g = delta_grid(UNIT, 0.05)
    keep = np.abs(g.points[:, 0]) > 0.3
    holey = SampleGrid(g.delta, g.points[keep], g.spacing)
    rep = covering_check(holey, UNIT, 5_000, seed=0)
    assert not rep.passed
    assert abs(rep.witness[0]) < 0.3


def test_covering_check_catches_missing_boundary():
    g = delta_grid(UNIT, 0.1)
    trimmed = SampleGrid(g.delta, g.points[np.abs(g.points[:, 0]) < 1.4], g.spacing)
    assert not covering_check(trimmed, UNIT, 1_000, seed=1).passed


def test_cap_error_names_remedies():
    with pytest.raises(GridTooLarge, match="reduce dim"):
        delta_grid(EnergyForm(np.eye(6), 5.0), 0.01, cap=1_000_000)


def test_tiny_set_collapses_to_origin():
    g = delta_grid(EnergyForm(np.eye(2), 1e-4), 0.5)
    assert g.count == 1
    assert np.all(g.points == 0)


def test_strict_spacing_is_finer():
    a = delta_grid(UNIT, 0.1)
    b = delta_grid(UNIT, 0.1, strict_spacing=True)
    assert b.spacing <= 0.05
    assert b.count > a.count


def test_dim_mismatch_rejected():
    with pytest.raises(ValueError):
        delta_grid(UNIT, 0.1, dim=2)
    with pytest.raises(ValueError):
        delta_grid(UNIT, 0.0)


def test_projection_is_closest_point():
    rng = np.random.default_rng(0)
    X = rng.uniform(-3, 3, (200, 2))
    Y = project_onto_sublevel(ELLIPSE, X)
    assert np.all(np.atleast_1d(energy(ELLIPSE, Y)) <= ELLIPSE.level_ell)
    # compare with a dense boundary parametrisation
    w, V = np.linalg.eigh(ELLIPSE.P)
    th = np.linspace(0, 2 * math.pi, 200_001)
    B = (np.column_stack([np.cos(th), np.sin(th)]) * np.sqrt(2 * ELLIPSE.level_ell / w)) @ V.T
    for x, y in zip(X[:20], Y[:20]):
        if energy(ELLIPSE, x) <= ELLIPSE.level_ell:
            assert np.array_equal(x, y)
        else:
            best = np.min(np.linalg.norm(B - x, axis=1))
            assert np.linalg.norm(y - x) <= best + 1e-9


def test_nearest_distances_brute_vs_tree():
    rng = np.random.default_rng(1)
    P = rng.uniform(-1, 1, (20_000, 2))
    Q = rng.uniform(-1, 1, (500, 2))
    tree = nearest_distances(P, Q)
    brute = np.array([np.min(np.linalg.norm(P - q, axis=1)) for q in Q])
    assert np.allclose(tree, brute, rtol=0, atol=1e-15)


def test_grid_csv(tmp_path):
    from simverify.io import read_csv

    g = delta_grid(ELLIPSE, 0.1)
    g.to_csv(tmp_path / "g.csv")
    comments, header, rows = read_csv(tmp_path / "g.csv")
    assert header == ["x1", "x2"]
    assert np.array_equal(np.array(rows), g.points)
