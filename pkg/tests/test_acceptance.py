"""Acceptance criteria 1-9, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also echoed to the terminal when output is captured.
"""
import math

import numpy as np
import pytest

from oracles import loop_offset_sum, max_eig_bisection
from simverify.bounds import (StabilityParams, alpha, geometric_offset_sum, propagation_bound,
                              sqrt_bound_terms, step_bound)
from simverify.dynamics import sgn_cubic
from simverify.energy import EnergyForm, energy, max_eigenvalue
from simverify.estimate import monte_carlo_envelope
from simverify.integrate import IntegratorKind, propagate_batch
from simverify.repro import FIG4_SAMPLES, FIG4_STEPS, first_threshold_time
from simverify.sample import covering_check, delta_grid
from simverify.verify import VerificationConfig, Verdict, check_invariance, sweep, sweep_delta

L, M, DT = 0.75, 4.0, 0.01
PARAMS = StabilityParams(8.0 / 3.0, 3.0, 1.5)
FORM = EnergyForm(np.eye(1), 1.125)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def test_criterion_1_step_constants(report):
    sb = step_bound(L, M, DT, IntegratorKind.RK4)
    a1, a2 = alpha(L, 0.001), alpha(L, 0.5)
    ok = (f"{sb.multiplier:.4f}" == "1.0075" and f"{sb.offset:.3f}" == "0.040"
          and f"{a1:.4f}" == "0.0010" and abs(a2 - 0.606) <= 1e-3)
    report(1, ok, f"multiplier={sb.multiplier:.4f} offset={sb.offset:.4f} "
                  f"alpha(0.001)={a1:.4f} alpha(0.5)={a2:.4f}")


def test_criterion_2_n2000_bound(report):
    pb = propagation_bound(L, M, DT, 2000)
    sb = step_bound(L, M, DT)
    typo_b = geometric_offset_sum(sb.multiplier, 0.010, 2000)
    ok = (abs(pb.a / 3.27e6 - 1) <= 0.01 and abs(pb.b / 1.74e7 - 1) <= 0.01
          and abs(sb.offset - 0.0401504) < 1e-7 and abs(typo_b / 1.74e7 - 1) > 0.5)
    report(2, ok, f"a={pb.a:.4g} b={pb.b:.4g} (offset 0.010 reading gives b={typo_b:.3g})")


def test_criterion_3_n300_terms(report):
    pb = propagation_bound(L, M, DT, 300)
    ta, tb = sqrt_bound_terms(PARAMS, pb)
    a_rounded = (1 + L * round(alpha(L, DT), 4)) ** 300
    ok = (abs(ta / 0.0094 - 1) <= 0.02 and abs(tb / 0.0447 - 1) <= 0.02
          and f"{pb.a:.2f}" == "9.49" and f"{a_rounded:.2f}" == "9.41")
    report(3, ok, f"terms=({ta:.5f}, {tb:.5f}) a={pb.a:.4f} a_rounded_alpha={a_rounded:.4f}")


def test_criterion_4_n400_terms(report):
    ta, tb = sqrt_bound_terms(PARAMS, propagation_bound(L, M, DT, 400))
    ok = abs(ta / 0.0009 - 1) <= 0.10 and abs(tb / 0.005 - 1) <= 0.05
    report(4, ok, f"terms=({ta:.4e}, {tb:.4e})")


def test_criterion_5_threshold_time(report):
    T = first_threshold_time(sgn_cubic(), PARAMS, dt=DT, t_step=0.1)
    report(5, 4.5 <= T <= 5.5, f"first T with both terms < 1e-3: {T:.1f} s")


def test_criterion_6_monte_carlo(report):
    m = sgn_cubic()
    good = monte_carlo_envelope(m, PARAMS, 1000, DT, 500, seed=0)
    bad = monte_carlo_envelope(m, StabilityParams(1.0, 3.0, 1.5), 1000, DT, 500, seed=0)
    ok = good.violations == 0 and bad.violations > 0
    report(6, ok, f"violations k=8/3: {good.violations}, k=1: {bad.violations} "
                  f"(floor {good.chatter_floor:.2f})")


def test_criterion_7_end_to_end(report):
    m = sgn_cubic()
    rep = check_invariance(m, VerificationConfig(DT, 400, 0.1, PARAMS, FORM))
    X0 = np.linspace(-1.5, 1.5, 10_000)[:, None]
    finals, done = propagate_batch(m, X0, DT, 400)
    brute_max = float(np.max(energy(FORM, finals)))
    ok = (rep.verdict is Verdict.FORWARD_INVARIANT and rep.margin > 1.0
          and bool(np.all(done == 400)) and brute_max <= 1.125)
    report(7, ok, f"verdict={rep.verdict.name} margin={rep.margin:.4f} "
                  f"brute-force max terminal energy={brute_max:.4g}")


def test_criterion_8_sweep(report):
    res = sweep(sgn_cubic(), VerificationConfig(DT, 400, 0.1, PARAMS, FORM), FIG4_STEPS, FIG4_SAMPLES)
    diffs = np.diff(res.margin, axis=1)
    pos = res.margin > 0
    rows_cross = bool(np.all(pos.any(axis=1) & (~pos).any(axis=1)))
    cols_cross = bool(np.any(pos.any(axis=0) & (~pos).any(axis=0)))
    ok = bool(np.all(diffs >= 0)) and rows_cross and not cols_cross
    report(8, ok, f"min step in T={diffs.min():.3g}, rows cross zero={rows_cross}, "
                  f"columns cross zero={cols_cross}")


def _dominance_violations(kind, n_steps, rng):
    m = sgn_cubic()
    r = np.nextafter(1.5, 0)
    x = rng.uniform(-r, r, 100_000)
    y = np.where(np.arange(x.size) % 2 == 0, rng.uniform(-r, r, x.size),
                 np.clip(x + rng.uniform(-0.05, 0.05, x.size), -r, r))
    fx, _ = propagate_batch(m, x[:, None], DT, n_steps, kind)
    fy, _ = propagate_batch(m, y[:, None], DT, n_steps, kind)
    pb = propagation_bound(L, M, DT, n_steps, kind)
    return int(np.sum(np.abs(fx - fy)[:, 0] > pb.a * np.abs(x - y) + pb.b))


def test_criterion_9_property_suites(report):
    rng = np.random.default_rng(2024)
    dom = sum(_dominance_violations(k, n, rng)
              for k in IntegratorKind for n in (1, 50, 300))

    forms = [(FORM, d) for d in (0.05, 0.1, 0.2)] + [(FORM, sweep_delta(FORM, c)[1]) for c in FIG4_SAMPLES]
    forms += [(EnergyForm(np.array([[2.0, 0.6], [0.6, 1.0]]), 0.8), 0.1),
              (EnergyForm(np.eye(3), 0.5), 0.2)]
    cover_fail = sum(not covering_check(delta_grid(f, d), f, 10_000, seed=i).passed
                     for i, (f, d) in enumerate(forms))

    loop_err = 0.0
    for kind in IntegratorKind:
        sb = step_bound(L, M, DT, kind)
        for n in (1, 10, 300, 2000, 10_000):
            ref = loop_offset_sum(sb.multiplier, sb.offset, n)
            loop_err = max(loop_err, abs(propagation_bound(L, M, DT, n, kind).b - ref) / ref)

    eig_err = 0.0
    erng = np.random.default_rng(5)
    for n in range(1, 7):
        for _ in range(10):
            A = erng.standard_normal((n, n))
            P = A @ A.T + 0.1 * np.eye(n)
            ref = max_eig_bisection(P)
            eig_err = max(eig_err, abs(max_eigenvalue(P) - ref) / max(1.0, ref))

    m = sgn_cubic()
    cfg = VerificationConfig(DT, 400, 0.02, PARAMS, FORM)
    reps = [check_invariance(m, cfg, threads=t) for t in (1, 4, 8)]
    thread_ok = all(r.verdict is reps[0].verdict and
                    np.array_equal(r.sample_energies, reps[0].sample_energies) for r in reps)

    ok = dom == 0 and cover_fail == 0 and loop_err <= 1e-12 and eig_err <= 1e-9 and thread_ok
    report(9, ok, f"dominance violations={dom}, covering failures={cover_fail}, "
                  f"b rel err={loop_err:.2e}, max-eig err={eig_err:.2e}, thread-invariant={thread_ok}")
