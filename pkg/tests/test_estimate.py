import numpy as np
import pytest

from simverify.bounds import StabilityParams
from simverify.dynamics import linear_1d, linear_nd, sgn_cubic
from simverify.estimate import (
    NoDecay,
    chatter_floor,
    draw_initial_states,
    ensemble,
    fit_exponential_params,
    monte_carlo_envelope,
)
from simverify.integrate import Trajectory
from simverify.io import read_csv


def test_chatter_floor():
    assert chatter_floor(sgn_cubic(), 0.01) == pytest.approx(0.08)


def test_initial_states_in_ball_and_reproducible():
    X = draw_initial_states(200, 3, 1.5, seed=2)
    assert np.all(np.linalg.norm(X, axis=1) <= 1.5 + 1e-12)
    assert np.all(np.linalg.norm(X[::2], axis=1) >= 0.9 * 1.5 - 1e-12)
    # row i only depends on (seed, i)
    assert np.array_equal(draw_initial_states(50, 3, 1.5, seed=2), X[:50])


def test_reference_constants_have_no_violations(ref_params, sgn, backend):
    rep = monte_carlo_envelope(sgn, ref_params, 1000, 0.01, 500, seed=1)
    assert rep.violations == 0
    assert rep.worst_margin >= 0


def test_k_one_is_violated(sgn):
    rep = monte_carlo_envelope(sgn, StabilityParams(1.0, 3.0, 1.5), 1000, 0.01, 500, seed=1)
    assert rep.violations > 0
    assert rep.point_violations >= rep.violations


def test_envelope_same_for_any_thread_count(ref_params, sgn):
    a = monte_carlo_envelope(sgn, ref_params, 300, 0.01, 200, seed=3, threads=1)
    b = monte_carlo_envelope(sgn, ref_params, 300, 0.01, 200, seed=3, threads=8)
    assert np.array_equal(a.max_norm, b.max_norm)
    assert a.worst_margin == b.worst_margin


def test_explicit_initial_states(ref_params, sgn):
    rep = monte_carlo_envelope(sgn, ref_params, 2, 0.01, 100, x0s=[[1.5], [-1.5]])
    assert rep.max_norm[0] == 1.5
    with pytest.raises(ValueError):
        monte_carlo_envelope(sgn, ref_params, 3, 0.01, 100, x0s=[[1.5], [-1.5]])


def test_envelope_csv(tmp_path, ref_params, sgn):
    rep = monte_carlo_envelope(sgn, ref_params, 20, 0.01, 50, seed=9)
    rep.to_csv(tmp_path / "e.csv")
    comments, header, rows = read_csv(tmp_path / "e.csv")
    assert header == ["t", "max_abs_x", "envelope"]
    assert "seed=9" in comments
    assert len(rows) == 51


def test_fit_recovers_linear_rate_exactly():
    trajs = ensemble(linear_1d(1.0), 50, 1.0, 0.01, 300, seed=0)
    fit = fit_exponential_params(trajs, safety=1.0)
    assert fit.lam_raw == pytest.approx(1.0, rel=1e-6)
    assert fit.k_raw == pytest.approx(1.0, rel=1e-6)
    assert fit.heuristic


def test_fit_deflates_by_safety():
    trajs = ensemble(linear_nd([[-2.0, 0.0], [0.0, -0.5]]), 50, 1.0, 0.01, 300, seed=0)
    fit = fit_exponential_params(trajs, safety=0.8)
    assert fit.lam_hat == pytest.approx(0.8 * fit.lam_raw)
    assert fit.k_hat == pytest.approx(fit.k_raw / 0.8)
    # slowest mode dominates the envelope
    assert fit.lam_raw == pytest.approx(0.5, rel=0.2)


def test_fit_on_sgn_cubic_is_conservative(sgn):
    trajs = ensemble(sgn, 200, 1.5, 0.01, 500, seed=0)
    fit = fit_exponential_params(trajs, safety=0.8, floor=chatter_floor(sgn, 0.01))
    assert 1.5 <= fit.lam_raw <= 3.0
    assert fit.lam_hat <= 3.0
    assert fit.window_end < 1.5
    p = fit.as_params(1.5)
    # the deflated fit passes its own Monte-Carlo envelope check
    assert monte_carlo_envelope(sgn, p, 200, 0.01, 500, seed=5).violations == 0


def test_fit_rejects_non_decaying():
    trajs = ensemble(linear_1d(-0.5, radius=100.0), 10, 1.0, 0.01, 100, seed=0)
    with pytest.raises(NoDecay):
        fit_exponential_params(trajs)


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_exponential_params([], safety=0.8)
    with pytest.raises(ValueError):
        fit_exponential_params([Trajectory(0.1, np.ones((3, 1)))], safety=1.5)
