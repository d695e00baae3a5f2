"""Fixed-step Euler / RK4 state transition and its N-fold composition.

Batch propagation is the hot path of the package. It runs on the compiled
kernel when the extension is importable and the model carries a built-in
field, and on vectorized numpy otherwise. ``SIMVERIFY_BACKEND=python``
forces the numpy path.
"""
from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _pykernels
from .dynamics import NonFiniteOutput, SystemModel

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None

__all__ = [
    "IntegratorKind",
    "Trajectory",
    "Divergence",
    "step",
    "propagate",
    "propagate_batch",
    "backend",
    "native_available",
    "DEFAULT_GUARD_FACTOR",
]

DEFAULT_GUARD_FACTOR = 10.0


class IntegratorKind(enum.IntEnum):
    EULER = 0
    RK4 = 1

    @classmethod
    def parse(cls, value) -> "IntegratorKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("-", "")
        aliases = {"EULER": cls.EULER, "RK4": cls.RK4, "RK": cls.RK4}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown integrator {value!r}") from None


class Divergence(RuntimeError):
    """A trajectory left ``guard_factor * domain_radius``."""


def native_available() -> bool:
    return _kernels is not None


def backend() -> str:
    """Name of the backend used for built-in fields: ``"native"`` or ``"python"``."""
    choice = os.environ.get("SIMVERIFY_BACKEND", "auto").lower()
    if choice == "python" or _kernels is None:
        return "python"
    return "native"


@dataclass(frozen=True)
class Trajectory:
    """States at ``t0 + i*dt`` for ``i = 0..len(states)-1``."""

    dt: float
    states: np.ndarray
    diverged: bool = False
    t0: float = 0.0

    def __post_init__(self):
        if self.states.ndim != 2 or len(self.states) < 1:
            raise ValueError("states must be a nonempty (N+1, n) array")

    @property
    def n_steps(self) -> int:
        return len(self.states) - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.states))

    @property
    def last(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path, comments=()) -> None:
        from .io import write_csv

        n = self.states.shape[1]
        header = ["t"] + [f"x{i + 1}" for i in range(n)]
        rows = np.column_stack([self.times, self.states])
        notes = list(comments)
        if self.diverged:
            notes.append("diverged=true")
        write_csv(path, header, rows, comments=notes)


def _as_state(model: SystemModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape != (model.dim,):
        raise ValueError(f"expected state of length {model.dim}, got shape {x.shape}")
    return x


def step(model: SystemModel, x, dt: float, kind=IntegratorKind.RK4) -> np.ndarray:
    """One application of the Euler or RK4 transition map."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    kind = IntegratorKind.parse(kind)
    x = _as_state(model, x)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    with np.errstate(over="ignore", invalid="ignore"):
        if kind is IntegratorKind.EULER:
            out = _pykernels.euler_step(model.field, x, dt)
        else:
            out = _pykernels.rk4_step(model.field, x, dt)
    if not np.all(np.isfinite(out)):
        raise NonFiniteOutput(f"{model.name}: non-finite state after one {kind.name} step")
    return out


def _run_chunk(model, X, dt, n_steps, kind, guard, record, use_native):
    if use_native:
        code, params = model.kernel
        return _kernels.propagate_batch(code, params, np.ascontiguousarray(X), float(dt),
                                        int(n_steps), int(kind), float(guard), bool(record))
    return _pykernels.propagate_batch(model.field, X, dt, n_steps, int(kind), guard, record)


def propagate_batch(model: SystemModel, X0, dt: float, n_steps: int, kind=IntegratorKind.RK4,
                    *, guard_factor: float = DEFAULT_GUARD_FACTOR, record: bool = False,
                    threads: int = 1):
    """Propagate many initial states at once.

    Parameters
    ----------
    X0 : array_like, shape (m, n)
    record : bool
        Keep the full history, shape ``(n_steps+1, m, n)``; otherwise only the
        final states ``(m, n)`` are returned.
    threads : int
        Rows are split into contiguous chunks run on a thread pool. Results do
        not depend on this value.

    Returns
    -------
    states, steps_done
        ``steps_done[i] < n_steps`` flags a trajectory truncated by the
        divergence guard (``||x|| > guard_factor * domain_radius`` or non-finite).
        For truncated rows the stored state is the last one that passed.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    kind = IntegratorKind.parse(kind)
    X0 = np.atleast_2d(np.asarray(X0, dtype=np.float64))
    if X0.shape[1] != model.dim:
        raise ValueError(f"expected rows of length {model.dim}, got shape {X0.shape}")
    guard = guard_factor * model.domain_radius
    use_native = model.kernel is not None and backend() == "native"
    m = X0.shape[0]
    threads = max(1, int(threads))
    if threads == 1 or m < 2 * threads:
        return _run_chunk(model, X0, dt, n_steps, kind, guard, record, use_native)
    bounds = np.linspace(0, m, threads + 1).astype(int)
    chunks = [X0[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(
            lambda c: _run_chunk(model, c, dt, n_steps, kind, guard, record, use_native), chunks))
    axis = 1 if record else 0
    states = np.concatenate([p[0] for p in parts], axis=axis)
    done = np.concatenate([p[1] for p in parts])
    return states, done


def propagate(model: SystemModel, x0, dt: float, n_steps: int, kind=IntegratorKind.RK4,
              *, guard_factor: float = DEFAULT_GUARD_FACTOR, strict: bool = False) -> Trajectory:
    """``phi_N``: the trajectory ``x0, Phi(x0), Phi(Phi(x0)), ...``.

    A trajectory that trips the divergence guard is truncated and returned
    with ``diverged=True``; with ``strict=True`` it raises :class:`Divergence`.
    """
    x0 = _as_state(model, x0)
    hist, done = propagate_batch(model, x0[None, :], dt, n_steps, kind,
                                 guard_factor=guard_factor, record=True)
    k = int(done[0])
    diverged = k < n_steps
    if diverged and strict:
        raise Divergence(f"{model.name}: trajectory from {x0.tolist()} left the guard ball "
                         f"after {k} of {n_steps} steps")
    return Trajectory(dt=float(dt), states=hist[:k + 1, 0, :].copy(), diverged=diverged)
