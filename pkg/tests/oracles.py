"""Independent reference computations used by the tests.

None of these share code with the package paths they check.
"""
import math

import numpy as np


def loop_offset_sum(multiplier, offset, n_steps):
    """sum_{r<N} multiplier^r * offset, term by term (math.fsum)."""
    terms = []
    p = 1.0
    for _ in range(n_steps):
        terms.append(p * offset)
        p *= multiplier
    return math.fsum(terms)


def _count_eigs_below(A, t):
    """Number of eigenvalues of symmetric A below t, by Sylvester inertia of A - tI.

    Gaussian elimination without pivoting; a zero pivot is nudged, which only
    matters exactly at an eigenvalue.
    """
    B = np.array(A, dtype=float) - t * np.eye(len(A))
    n = len(B)
    neg = 0
    for i in range(n):
        piv = B[i, i]
        if piv == 0.0:
            piv = -1e-300
        if piv < 0:
            neg += 1
        for j in range(i + 1, n):
            f = B[j, i] / piv
            B[j, i:] -= f * B[i, i:]
    return neg


def max_eig_bisection(A, tol=1e-13):
    """Largest eigenvalue by bisection on the inertia count (Gershgorin bracket)."""
    A = np.asarray(A, dtype=float)
    n = len(A)
    radii = np.sum(np.abs(A), axis=1) - np.abs(np.diag(A))
    lo = float(np.min(np.diag(A) - radii)) - 1.0
    hi = float(np.max(np.diag(A) + radii)) + 1.0
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if _count_eigs_below(A, mid) == n:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def dense_scan_gap(points, lo, hi, n_scan):
    """Max distance from a dense 1-D scan of [lo, hi] to the nearest point."""
    pts = np.sort(np.asarray(points, dtype=float).ravel())
    xs = np.linspace(lo, hi, n_scan)
    idx = np.clip(np.searchsorted(pts, xs), 1, len(pts) - 1)
    d = np.minimum(np.abs(xs - pts[idx - 1]), np.abs(xs - pts[idx]))
    if len(pts) == 1:
        d = np.abs(xs - pts[0])
    return float(d.max())


def dense_scan_gap_2d(points, form_P, ell, n_side):
    """Max distance from a dense mesh of {x'Px/2 <= ell} to the nearest point, 2-D."""
    w = np.linalg.eigvalsh(form_P)
    R = math.sqrt(2 * ell / w[0])
    g = np.linspace(-R, R, n_side)
    X, Y = np.meshgrid(g, g)
    Q = np.column_stack([X.ravel(), Y.ravel()])
    e = 0.5 * np.einsum("ij,jk,ik->i", Q, form_P, Q)
    Q = Q[e <= ell]
    pts = np.asarray(points)
    best = np.full(len(Q), np.inf)
    for p in pts:
        best = np.minimum(best, np.hypot(Q[:, 0] - p[0], Q[:, 1] - p[1]))
    return float(best.max())


def rk4_scalar_linear_factor(rate, dt):
    """One RK4 step of x' = -rate*x multiplies x by the 4th-order Taylor polynomial of exp(-rate*dt)."""
    h = -rate * dt
    return 1 + h + h ** 2 / 2 + h ** 3 / 6 + h ** 4 / 24
