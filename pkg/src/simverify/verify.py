"""The sampling certificate for forward invariance of ``S = {E <= ell}``.

Every sample of a delta-covering of ``S`` is simulated for ``N`` steps. With

    gamma = ell - max_s E(phi_N(x_s))
    lhs   = k_E * sqrt(E_T a delta + E_T b),   E_T = 2 k r0 exp(-lambda T)

``gamma > 0`` and ``lhs <= gamma`` certify that no point of ``S`` ends above
``ell``. ``lhs`` does not depend on the sample, so it is computed once per
round rather than inside the per-sample loop.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .bounds import PropagationBound, StabilityParams, propagation_bound, slope_condition_lhs
from .dynamics import SystemModel
from .energy import EnergyForm, energy
from .integrate import DEFAULT_GUARD_FACTOR, Divergence, IntegratorKind, propagate_batch
from .sample import DEFAULT_CAP, SampleGrid, delta_grid, grid_from_pitch

__all__ = [
    "Verdict",
    "VerificationConfig",
    "VerificationReport",
    "AdaptLimitReached",
    "compute_gamma",
    "check_invariance",
    "adapt_and_retry",
    "SweepResult",
    "sweep",
    "sweep_delta",
]


class Verdict(enum.IntEnum):
    """Values double as CLI exit codes."""

    FORWARD_INVARIANT = 0
    INCONCLUSIVE = 1
    FALSIFIED = 2


class AdaptLimitReached(RuntimeError):
    pass


CAVEAT_SLOPE = "k*r0 > 1: slope bound assumes ||P phi|| <= k_E along the segment"
CAVEAT_VACUOUS = "bound vacuous: propagation bound overflowed"
CAVEAT_D0 = "sublevel set extends beyond D0 (ell > k_min r0^2 / 2)"
CAVEAT_D = "sublevel set extends beyond the model domain D"


@dataclass(frozen=True)
class VerificationConfig:
    dt: float
    n_steps: int
    delta: float
    params: StabilityParams
    form: EnergyForm
    kind: IntegratorKind = IntegratorKind.RK4
    adapt_limit: int = 8
    cap: int = DEFAULT_CAP
    guard_factor: float = DEFAULT_GUARD_FACTOR
    strict_spacing: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1 (T = N dt > 0)")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.adapt_limit < 0:
            raise ValueError("adapt_limit must be >= 0")
        object.__setattr__(self, "kind", IntegratorKind.parse(self.kind))

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    @property
    def ell(self) -> float:
        return self.form.level_ell


@dataclass(frozen=True)
class VerificationReport:
    verdict: Verdict
    gamma: float
    condition_lhs: float
    max_energy: float
    argmax_sample: np.ndarray
    samples: np.ndarray = field(repr=False)
    sample_energies: np.ndarray = field(repr=False)
    config: VerificationConfig = field(repr=False)
    bound: PropagationBound = field(repr=False)
    adaptation_trace: tuple = ()
    caveat_flags: tuple = ()
    rounds: int = 1

    @property
    def margin(self) -> float:
        return self.gamma - self.condition_lhs

    def to_csv(self, path, extra_comments=()) -> None:
        """Per-sample terminal energies, with the full parameter set in the header comments."""
        from .io import write_csv

        cfg = self.config
        n = self.samples.shape[1]
        comments = [
            f"verdict={self.verdict.name}",
            f"gamma={self.gamma!r}",
            f"condition_lhs={self.condition_lhs!r}",
            f"max_energy={self.max_energy!r}",
            f"dt={cfg.dt!r} n_steps={cfg.n_steps} T={cfg.T!r} delta={cfg.delta!r} "
            f"kind={cfg.kind.name}",
            f"k={cfg.params.k!r} lambda={cfg.params.lam!r} r0={cfg.params.r0!r} "
            f"ell={cfg.ell!r} k_E={cfg.form.k_E!r}",
            f"a={self.bound.a!r} b={self.bound.b!r}",
            *[f"adapt: {change} ({reason})" for change, reason in self.adaptation_trace],
            *[f"caveat: {c}" for c in self.caveat_flags],
            *extra_comments,
        ]
        header = [f"x{i + 1}" for i in range(n)] + ["terminal_energy"]
        rows = np.column_stack([self.samples, self.sample_energies])
        write_csv(path, header, rows, comments=comments)


def compute_gamma(ell: float, sample_energies) -> float:
    """``ell - max(sample_energies)``; negative when some sample ends above ``ell``."""
    e = np.asarray(sample_energies, dtype=np.float64).ravel()
    if e.size == 0:
        raise ValueError("no sample energies")
    if not np.all(np.isfinite(e)):
        raise ValueError("sample energies must be finite")
    return float(ell - e.max())


def _caveats(model: SystemModel, cfg: VerificationConfig, pb: PropagationBound,
             lhs: float) -> list[str]:
    flags = []
    if cfg.params.k * cfg.params.r0 > 1.0:
        flags.append(CAVEAT_SLOPE)
    if pb.overflow or not math.isfinite(lhs):
        flags.append(CAVEAT_VACUOUS)
    R = cfg.form.radius_bound
    if R > cfg.params.r0 * (1 + 1e-12):
        flags.append(CAVEAT_D0)
    if R >= model.domain_radius * (1 + 1e-12):
        flags.append(CAVEAT_D)
    return flags


def _evaluate(model, cfg, grid: SampleGrid, threads: int):
    finals, done = propagate_batch(model, grid.points, cfg.dt, cfg.n_steps, cfg.kind,
                                   guard_factor=cfg.guard_factor, threads=threads)
    bad = np.flatnonzero(done < cfg.n_steps)
    if bad.size:
        i = int(bad[0])
        raise Divergence(
            f"{model.name}: sample {grid.points[i].tolist()} left "
            f"{cfg.guard_factor:g}*r after {int(done[i])} of {cfg.n_steps} steps "
            f"({bad.size} of {grid.count} samples diverged)")
    return np.atleast_1d(energy(cfg.form, finals))


def _round(model: SystemModel, cfg: VerificationConfig, threads: int, trace, round_no):
    grid = delta_grid(cfg.form, cfg.delta, cap=cfg.cap, strict_spacing=cfg.strict_spacing)
    energies = _evaluate(model, cfg, grid, threads)
    gamma = compute_gamma(cfg.ell, energies)
    pb = propagation_bound(model.lipschitz_L, model.jump_M, cfg.dt, cfg.n_steps, cfg.kind)
    lhs = slope_condition_lhs(cfg.form.k_E, cfg.params, pb, cfg.T, cfg.delta)
    i = int(np.argmax(energies))
    if energies[i] > cfg.ell:
        verdict = Verdict.FALSIFIED
    elif gamma > 0 and lhs <= gamma:
        verdict = Verdict.FORWARD_INVARIANT
    else:
        verdict = Verdict.INCONCLUSIVE
    return VerificationReport(
        verdict=verdict,
        gamma=gamma,
        condition_lhs=lhs,
        max_energy=float(energies[i]),
        argmax_sample=grid.points[i].copy(),
        samples=grid.points,
        sample_energies=energies,
        config=cfg,
        bound=pb,
        adaptation_trace=tuple(trace),
        caveat_flags=tuple(_caveats(model, cfg, pb, lhs)),
        rounds=round_no,
    )


def adapt_and_retry(cfg: VerificationConfig, report: VerificationReport) -> VerificationConfig:
    """Next configuration after an inconclusive round.

    ``gamma > 0`` with the slope condition failing: double ``N``, then halve
    ``delta``, alternating. ``gamma <= 0``: shrink ``ell`` by 10% once.
    Raises :class:`AdaptLimitReached` when no further change is allowed.
    """
    if report.verdict is not Verdict.INCONCLUSIVE:
        raise ValueError("only inconclusive reports are adapted")
    trace = report.adaptation_trace
    if len(trace) >= cfg.adapt_limit:
        raise AdaptLimitReached(f"adaptation limit {cfg.adapt_limit} reached")
    if report.gamma > 0:
        slope_rounds = sum(1 for change, _ in trace if not change.startswith("ell"))
        if slope_rounds % 2 == 0:
            return replace(cfg, n_steps=cfg.n_steps * 2)
        return replace(cfg, delta=cfg.delta / 2.0)
    if any(change.startswith("ell") for change, _ in trace):
        raise AdaptLimitReached("gamma <= 0 after shrinking ell")
    return replace(cfg, form=cfg.form.with_level(0.9 * cfg.ell))


def _describe(old: VerificationConfig, new: VerificationConfig) -> str:
    if new.n_steps != old.n_steps:
        return f"n_steps {old.n_steps} -> {new.n_steps}"
    if new.delta != old.delta:
        return f"delta {old.delta!r} -> {new.delta!r}"
    return f"ell {old.ell!r} -> {new.ell!r}"


def check_invariance(model: SystemModel, cfg: VerificationConfig,
                     threads: int = 1) -> VerificationReport:
    """Run the certificate, adapting ``N``, ``delta`` or ``ell`` on inconclusive rounds.

    A sample ending above ``ell`` is a counterexample for the simulated system
    and stops the loop with ``FALSIFIED``.
    """
    if cfg.form.dim != model.dim:
        raise ValueError(f"energy form is {cfg.form.dim}-dimensional, model is {model.dim}")
    if cfg.params.r0 > model.domain_radius:
        raise ValueError("r0 must not exceed the model domain radius")
    if cfg.form.radius_bound > cfg.params.r0 * (1 + 1e-12):
        warnings.warn("ell exceeds k_min r0^2/2: samples may start outside D0", RuntimeWarning,
                      stacklevel=2)
    trace: list[tuple[str, str]] = []
    round_no = 1
    while True:
        report = _round(model, cfg, threads, trace, round_no)
        if report.verdict is not Verdict.INCONCLUSIVE:
            return report
        reason = ("gamma <= 0" if report.gamma <= 0 else
                  f"slope condition {report.condition_lhs:.6g} > gamma {report.gamma:.6g}")
        try:
            new = adapt_and_retry(cfg, report)
        except AdaptLimitReached:
            return report
        trace.append((_describe(cfg, new), reason))
        cfg = new
        round_no += 1


@dataclass(frozen=True)
class SweepResult:
    """``margin[i, j]`` for ``sample_counts[i]`` and ``n_steps[j]``."""

    n_steps: tuple
    sample_counts: tuple
    deltas: tuple
    actual_counts: tuple
    dt: float
    margin: np.ndarray
    gamma: np.ndarray
    lhs: np.ndarray

    def to_csv(self, path, comments=()) -> None:
        from .io import write_csv

        header = ["n_samp\\N"] + [str(n) for n in self.n_steps]
        rows = [[int(c)] + list(r) for c, r in zip(self.sample_counts, self.margin)]
        notes = [f"dt={self.dt!r}", "T=" + ",".join(repr(n * self.dt) for n in self.n_steps),
                 "delta=" + ",".join(repr(d) for d in self.deltas), *comments]
        write_csv(path, header, rows, comments=notes)


def sweep_delta(form: EnergyForm, n_samp: int) -> tuple[float, float]:
    """``(pitch, delta)`` for ``n_samp`` samples per axis across ``S``.

    Samples span ``[-R, R]`` per axis, ``R = sqrt(2 ell / k_min)``, and
    neighbours are kept ``delta/2`` apart, so ``delta = 2 * pitch``.
    """
    if n_samp < 2:
        raise ValueError("need at least 2 samples per axis")
    pitch = 2.0 * form.radius_bound / (n_samp - 1)
    return pitch, 2.0 * pitch


def sweep(model: SystemModel, cfg: VerificationConfig, n_steps_grid, sample_counts,
          threads: int = 1) -> SweepResult:
    """Margin ``gamma - lhs`` over a grid of horizons and per-axis sample counts.

    ``cfg`` supplies ``dt``, the stability triple and the energy form; its own
    ``n_steps``/``delta`` are ignored.
    """
    n_steps_grid = tuple(int(n) for n in n_steps_grid)
    sample_counts = tuple(int(c) for c in sample_counts)
    if not n_steps_grid or not sample_counts:
        raise ValueError("grids must be nonempty")
    if min(n_steps_grid) < 1:
        raise ValueError("horizons must be >= 1 step")
    n_max = max(n_steps_grid)
    margin = np.empty((len(sample_counts), len(n_steps_grid)))
    gamma = np.empty_like(margin)
    lhs = np.empty_like(margin)
    deltas, actual = [], []
    bounds = [propagation_bound(model.lipschitz_L, model.jump_M, cfg.dt, n, cfg.kind)
              for n in n_steps_grid]
    for i, c in enumerate(sample_counts):
        pitch, delta = sweep_delta(cfg.form, c)
        grid = grid_from_pitch(cfg.form, pitch, delta, cap=cfg.cap)
        deltas.append(delta)
        actual.append(grid.count)
        hist, done = propagate_batch(model, grid.points, cfg.dt, n_max, cfg.kind,
                                     guard_factor=cfg.guard_factor, record=True,
                                     threads=threads)
        for j, n in enumerate(n_steps_grid):
            if np.any(done < n):
                raise Divergence(f"{model.name}: a sweep sample diverged before step {n}")
            e = np.atleast_1d(energy(cfg.form, hist[n]))
            gamma[i, j] = compute_gamma(cfg.ell, e)
            lhs[i, j] = slope_condition_lhs(cfg.form.k_E, cfg.params, bounds[j],
                                            n * cfg.dt, delta)
    margin[:] = gamma - lhs
    return SweepResult(n_steps=n_steps_grid, sample_counts=sample_counts, deltas=tuple(deltas),
                       actual_counts=tuple(actual), dt=cfg.dt, margin=margin, gamma=gamma,
                       lhs=lhs)
