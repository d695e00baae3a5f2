"""Monte-Carlo envelope checks and a heuristic fit of ``(k, lambda)``.

Nothing here is a certificate. The envelope check tests a claimed
exponential bound against simulated trajectories. The fitter proposes
values to feed the certificate: ``k`` inflated and ``lambda`` deflated
by a safety factor, since overestimating ``k`` is harmless (it only
needs a longer horizon) while ``lambda`` must not be overestimated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import StabilityParams
from .dynamics import SystemModel
from .integrate import IntegratorKind, Trajectory, propagate_batch

__all__ = [
    "NoDecay",
    "EnvelopeReport",
    "ExponentialFit",
    "chatter_floor",
    "draw_initial_states",
    "monte_carlo_envelope",
    "fit_exponential_params",
    "ensemble",
]

CHATTER_FACTOR = 2.0
FIT_WINDOW_FACTOR = 5.0


class NoDecay(ValueError):
    """Trajectories show no exponential decay to fit."""


def chatter_floor(model: SystemModel, dt: float) -> float:
    """``2 M dt``: the residual oscillation a fixed step leaves around a sliding equilibrium."""
    return CHATTER_FACTOR * model.jump_M * dt


def draw_initial_states(n: int, dim: int, r0: float, seed: int) -> np.ndarray:
    """Initial states in ``{||x|| <= r0}``, one independent RNG stream per index.

    Even indices are drawn from the outer shell ``0.9 r0 <= ||x|| <= r0``, odd
    ones uniformly from the ball. Row ``i`` depends only on ``(seed, i)``.
    """
    out = np.empty((n, dim))
    inner = 0.9 ** dim
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        d = rng.standard_normal(dim)
        nd = np.linalg.norm(d)
        while nd == 0.0:
            d = rng.standard_normal(dim)
            nd = np.linalg.norm(d)
        u = rng.random()
        if i % 2 == 0:
            u = inner + (1.0 - inner) * u
        out[i] = d / nd * r0 * u ** (1.0 / dim)
    return out


@dataclass(frozen=True)
class EnvelopeReport:
    n_traj: int
    violations: int
    point_violations: int
    worst_margin: float
    chatter_floor: float
    times: np.ndarray
    max_norm: np.ndarray
    envelope: np.ndarray
    worst_trajectory: int
    seed: int

    def to_csv(self, path, comments=()) -> None:
        from .io import write_csv

        write_csv(path, ["t", "max_abs_x", "envelope"],
                  np.column_stack([self.times, self.max_norm, self.envelope]),
                  comments=[f"seed={self.seed}", f"n_traj={self.n_traj}",
                            f"violations={self.violations}",
                            f"chatter_floor={self.chatter_floor!r}", *comments])


def monte_carlo_envelope(model: SystemModel, p: StabilityParams, n_traj: int, dt: float,
                         n_steps: int, seed: int = 0, *, kind=IntegratorKind.RK4,
                         x0s=None, floor: float | None = None,
                         threads: int = 1) -> EnvelopeReport:
    """Check ``||phi(t)|| <= k ||x0|| exp(-lambda t) + floor`` at every step.

    ``violations`` counts trajectories that break the bound at least once.
    ``envelope`` in the profile is ``k * max||x0|| * exp(-lambda t)``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if x0s is None:
        X0 = draw_initial_states(n_traj, model.dim, p.r0, seed)
    else:
        X0 = np.atleast_2d(np.asarray(x0s, dtype=np.float64))
        if X0.shape != (n_traj, model.dim):
            raise ValueError(f"x0s must have shape ({n_traj}, {model.dim})")
    floor = chatter_floor(model, dt) if floor is None else float(floor)
    hist, done = propagate_batch(model, X0, dt, n_steps, kind, record=True, threads=threads)
    norms = np.linalg.norm(hist, axis=2)                      # (N+1, m)
    t = dt * np.arange(n_steps + 1)
    n0 = np.linalg.norm(X0, axis=1)
    bound = p.k * n0[None, :] * np.exp(-p.lam * t)[:, None] + floor
    # a trajectory truncated by the divergence guard counts as violating
    slack = np.where(np.isnan(norms), -np.inf, bound - norms)
    per_traj = slack.min(axis=0)
    viol = per_traj < 0
    worst = int(np.argmin(per_traj))
    with np.errstate(invalid="ignore"):
        max_norm = np.where(np.all(np.isnan(norms), axis=1), np.nan, np.nanmax(
            np.where(np.isnan(norms), -np.inf, norms), axis=1))
    return EnvelopeReport(
        n_traj=n_traj,
        violations=int(viol.sum()),
        point_violations=int((slack < 0).sum()),
        worst_margin=float(per_traj[worst]),
        chatter_floor=floor,
        times=t,
        max_norm=max_norm,
        envelope=p.k * float(n0.max()) * np.exp(-p.lam * t),
        worst_trajectory=worst,
        seed=seed,
    )


@dataclass(frozen=True)
class ExponentialFit:
    """HEURISTIC estimate; not a certificate input unless the user opts in."""

    k_hat: float
    lam_hat: float
    k_raw: float
    lam_raw: float
    safety: float
    window_end: float
    heuristic: bool = True

    def as_params(self, r0: float) -> StabilityParams:
        return StabilityParams(k=max(1.0, self.k_hat), lam=self.lam_hat, r0=r0)


def fit_exponential_params(trajectories, safety: float = 0.8,
                           floor: float = 0.0) -> ExponentialFit:
    """Fit ``log(||phi(t)||/||x0||) <= log k - lambda t`` to an ensemble.

    The slope comes from least squares on the per-time upper envelope of the
    log ratios; the intercept is then raised until the line dominates every
    point. The window ends where the ensemble max norm first drops below
    ``5 * floor``; points of individual trajectories below that level are
    skipped too.
    """
    if not 0 < safety <= 1:
        raise ValueError("safety must be in (0, 1]")
    trajs = list(trajectories)
    if not trajs:
        raise ValueError("no trajectories")
    dt = trajs[0].dt
    if any(not math.isclose(tr.dt, dt) for tr in trajs):
        raise ValueError("trajectories must share dt")
    n = max(len(tr.states) for tr in trajs)
    norms = np.full((len(trajs), n), np.nan)
    for i, tr in enumerate(trajs):
        norms[i, :len(tr.states)] = np.linalg.norm(tr.states, axis=1)
    n0 = norms[:, 0]
    level = FIT_WINDOW_FACTOR * floor
    with np.errstate(invalid="ignore"):
        ens_max = np.nanmax(np.where(np.isnan(norms), -np.inf, norms), axis=0)
    below = np.flatnonzero(~(ens_max > level))
    end = int(below[0]) if below.size else n
    usable = (n0 > 0) & (n0 > level)
    if end < 2 or not usable.any():
        raise NoDecay("no trajectory stays above the chatter level long enough to fit")
    W = norms[usable, :end]
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.log(W / n0[usable, None])
    logr = np.where((W > level) & np.isfinite(logr), logr, -np.inf)
    u = logr.max(axis=0)
    t = dt * np.arange(end)
    ok = np.isfinite(u)
    if ok.sum() < 2:
        raise NoDecay("fewer than two usable time points")
    slope = np.polyfit(t[ok], u[ok], 1)[0]
    if not slope < 0:
        raise NoDecay(f"envelope slope {slope:g} is not negative")
    lam = -float(slope)
    k = float(np.exp(np.max(u[ok] + lam * t[ok])))
    k = max(k, 1.0)
    return ExponentialFit(k_hat=k / safety, lam_hat=lam * safety, k_raw=k, lam_raw=lam,
                          safety=safety, window_end=float(t[end - 1]))


def ensemble(model: SystemModel, n_traj: int, r0: float, dt: float, n_steps: int, seed: int = 0,
             kind=IntegratorKind.RK4, threads: int = 1) -> list[Trajectory]:
    """Simulated trajectories from :func:`draw_initial_states`, for fitting."""
    X0 = draw_initial_states(n_traj, model.dim, r0, seed)
    hist, done = propagate_batch(model, X0, dt, n_steps, kind, record=True, threads=threads)
    return [Trajectory(dt=dt, states=hist[:done[i] + 1, i, :].copy(), diverged=done[i] < n_steps)
            for i in range(n_traj)]
