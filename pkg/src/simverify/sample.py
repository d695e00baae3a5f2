"""Finite delta-coverings of the energy sublevel set ``S = {x : E(x) <= ell}``.

:func:`delta_grid` builds an axis-aligned grid whose cells have half-diagonal
``delta``. Centers inside ``S`` are kept. A center outside ``S`` is replaced
by its Euclidean projection onto ``S`` when that projection is within
``delta`` of it. Because ``S`` is convex, projection is nonexpansive toward
points of ``S``, so every ``x`` in ``S`` is within ``delta`` of a kept point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .energy import EnergyForm, energy

__all__ = [
    "GridTooLarge",
    "SampleGrid",
    "CoveringReport",
    "DEFAULT_CAP",
    "project_onto_sublevel",
    "delta_grid",
    "grid_from_pitch",
    "nearest_distances",
    "covering_check",
    "sample_sublevel",
]

DEFAULT_CAP = 10_000_000
BRUTE_FORCE_LIMIT = 10_000


class GridTooLarge(ValueError):
    """Grid would exceed the point cap: reduce dim or ell, or raise delta."""


@dataclass(frozen=True)
class SampleGrid:
    delta: float
    points: np.ndarray
    spacing: float

    @property
    def count(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def to_csv(self, path, comments=()) -> None:
        from .io import write_csv

        header = [f"x{i + 1}" for i in range(self.dim)]
        write_csv(path, header, self.points, comments=[f"delta={self.delta!r}", *comments])


def project_onto_sublevel(form: EnergyForm, X) -> np.ndarray:
    """Closest point of ``{x'Px <= 2 ell}`` to each row of ``X`` (rows inside are returned as is).

    In the eigenbasis of ``P`` the projection of ``c`` is ``c_i / (1 + mu p_i)``
    with ``mu >= 0`` the root of ``sum p_i c_i^2 / (1 + mu p_i)^2 = 2 ell``,
    found by bisection.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    out = X.copy()
    outside = energy(form, X) > form.level_ell
    outside = np.atleast_1d(outside)
    if not outside.any():
        return out
    w, V = form.eigvals, form.eigvecs
    C = X[outside] @ V
    target = 2.0 * form.level_ell

    def g(mu):
        return np.sum(w * (C / (1.0 + mu[:, None] * w)) ** 2, axis=1)

    lo = np.zeros(len(C))
    # g is decreasing in mu; double hi until it brackets the root
    hi = np.ones(len(C))
    while True:
        bad = g(hi) > target
        if not bad.any():
            break
        hi[bad] *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        above = g(mid) > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    Y = (C / (1.0 + hi[:, None] * w)) @ V.T
    # pull any rounding spill back inside
    e = np.atleast_1d(energy(form, Y))
    spill = e > form.level_ell
    if spill.any():
        Y[spill] *= np.sqrt(form.level_ell / e[spill])[:, None]
        e = np.atleast_1d(energy(form, Y))
        spill = e > form.level_ell
        while spill.any():
            Y[spill] = np.nextafter(Y[spill], 0.0)
            spill = np.atleast_1d(energy(form, Y)) > form.level_ell
    out[outside] = Y
    return out


def grid_from_pitch(form: EnergyForm, pitch: float, delta: float,
                    cap: int = DEFAULT_CAP) -> SampleGrid:
    """Grid of pitch ``pitch`` anchored at the origin, clipped to ``S`` with boundary projection.

    ``delta`` must be at least the cell half-diagonal ``pitch*sqrt(n)/2``.
    """
    n = form.dim
    if not pitch > 0:
        raise ValueError("pitch must be positive")
    if delta < pitch * math.sqrt(n) / 2.0 * (1 - 1e-12):
        raise ValueError("delta is smaller than the cell half-diagonal")
    R = form.radius_bound
    if R <= delta:
        return SampleGrid(delta=delta, points=np.zeros((1, n)), spacing=pitch)
    K = int(math.ceil(R / pitch)) + 1
    per_axis = 2 * K + 1
    if per_axis ** n > cap:
        raise GridTooLarge(f"{per_axis}^{n} candidate points exceed cap {cap}; "
                           "reduce dim or ell, or raise delta")
    axis = pitch * np.arange(-K, K + 1, dtype=np.float64)
    C = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    inside = np.atleast_1d(energy(form, C)) <= form.level_ell
    Pj = project_onto_sublevel(form, C[~inside])
    # slack so a projection exactly delta away is not lost to rounding; extra points are harmless
    near = np.linalg.norm(Pj - C[~inside], axis=1) <= delta * (1.0 + 1e-9)
    pts = np.concatenate([C[inside], Pj[near]])
    pts = np.unique(pts, axis=0)
    if len(pts) > cap:
        raise GridTooLarge(f"{len(pts)} points exceed cap {cap}")
    pts.setflags(write=False)
    return SampleGrid(delta=delta, points=pts, spacing=pitch)


def delta_grid(form: EnergyForm, delta: float, dim: int | None = None,
               cap: int = DEFAULT_CAP, strict_spacing: bool = False) -> SampleGrid:
    """A finite subset of ``S`` within ``delta`` of every point of ``S``.

    Per-axis pitch is ``2 delta / sqrt(n)``. With ``strict_spacing`` the pitch
    is ``delta / 2`` instead (neighbouring samples closer than ``delta/2``).
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    n = form.dim
    if dim is not None and dim != n:
        raise ValueError(f"dim={dim} does not match the energy form ({n})")
    if strict_spacing:
        pitch = min(delta / 2.0, 2.0 * delta / math.sqrt(n))
    else:
        pitch = 2.0 * delta / math.sqrt(n)
    # a hair under the nominal pitch so rounded grid coordinates never open a gap above delta
    pitch *= 1.0 - 1e-12
    return grid_from_pitch(form, pitch, delta, cap)


def nearest_distances(points: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Distance from each query to its nearest point.

    Brute force below 10^4 points; a k-d tree above.
    """
    points = np.atleast_2d(points)
    queries = np.atleast_2d(queries)
    if len(points) < BRUTE_FORCE_LIMIT:
        out = np.empty(len(queries))
        chunk = max(1, 2_000_000 // max(1, len(points)))
        for lo in range(0, len(queries), chunk):
            q = queries[lo:lo + chunk]
            d2 = np.sum((q[:, None, :] - points[None, :, :]) ** 2, axis=2)
            out[lo:lo + chunk] = np.sqrt(d2.min(axis=1))
        return out
    d, _ = cKDTree(points).query(queries, k=1)
    return d


def sample_sublevel(form: EnergyForm, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` uniform points of ``S`` by rejection from the box ``[-R, R]^dim``."""
    R = form.radius_bound
    out = []
    have = 0
    while have < n:
        cand = rng.uniform(-R, R, size=(max(2 * (n - have), 64), form.dim))
        keep = cand[np.atleast_1d(energy(form, cand)) <= form.level_ell]
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:n]


@dataclass(frozen=True)
class CoveringReport:
    max_gap: float
    witness: np.ndarray
    delta: float
    n_probe: int

    @property
    def passed(self) -> bool:
        return self.max_gap <= self.delta


def covering_check(grid: SampleGrid, form: EnergyForm, n_probe: int, seed: int = 0,
                   include_boundary: bool = True) -> CoveringReport:
    """Largest probe-to-grid distance over random points of ``S``.

    Besides uniform probes, ``include_boundary`` adds the same number of
    probes on the boundary of ``S``, where gaps are largest.
    """
    if n_probe < 1:
        raise ValueError("n_probe must be >= 1")
    rng = np.random.default_rng(seed)
    Q = sample_sublevel(form, n_probe, rng)
    if include_boundary:
        d = rng.standard_normal((n_probe, form.dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        e = np.atleast_1d(energy(form, d))
        B = d * np.sqrt(form.level_ell / e)[:, None]
        Q = np.concatenate([Q, B])
    dist = nearest_distances(grid.points, Q)
    i = int(np.argmax(dist))
    return CoveringReport(float(dist[i]), Q[i].copy(), grid.delta, n_probe)
