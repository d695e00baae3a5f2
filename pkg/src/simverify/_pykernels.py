"""Pure numpy batch propagation; the fallback for ``_kernels``.

Works for any vectorized field. For the built-in fields the operation order
matches the compiled kernel exactly.
"""
import numpy as np


def rk4_step(f, x, dt):
    hdt = 0.5 * dt
    dt6 = dt / 6.0
    k1 = f(x)
    k2 = f(x + k1 * hdt)
    k3 = f(x + k2 * hdt)
    k4 = f(x + k3 * dt)
    return x + dt6 * (((k1 + 2.0 * k2) + 2.0 * k3) + k4)


def euler_step(f, x, dt):
    return x + f(x) * dt


def _ok(x, guard):
    finite = np.all(np.isfinite(x), axis=1)
    with np.errstate(over="ignore", invalid="ignore"):
        small = np.sqrt(np.sum(x * x, axis=1)) <= guard
    return finite & small


def propagate_batch(f, X0, dt, n_steps, kind, guard, record):
    """Same contract as ``_kernels.propagate_batch`` but takes the field callable."""
    step = rk4_step if kind == 1 else euler_step
    x = np.array(X0, dtype=np.float64, copy=True)
    m, n = x.shape
    done = np.zeros(m, dtype=np.int64)
    active = np.ones(m, dtype=bool)
    hist = None
    if record:
        hist = np.full((n_steps + 1, m, n), np.nan)
        hist[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, n_steps + 1):
            if not active.any():
                break
            idx = np.flatnonzero(active)
            y = step(f, x[idx], dt)
            ok = _ok(y, guard)
            good = idx[ok]
            x[good] = y[ok]
            done[good] = it
            active[idx[~ok]] = False
            if record:
                hist[it, good] = y[ok]
    if record:
        return hist, done
    return x, done
