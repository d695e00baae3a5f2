"""Quadratic energy ``E(x) = x'Px / 2``, its integral along a trajectory, and their bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import StabilityParams
from .integrate import Trajectory

__all__ = [
    "NotSymmetric",
    "NotPositiveDefinite",
    "EnergyForm",
    "jacobi_eigh",
    "max_eigenvalue",
    "energy",
    "energy_bound",
    "energy_integral",
    "energy_integral_bound",
]

SYM_TOL = 1e-12


class NotSymmetric(ValueError):
    pass


class NotPositiveDefinite(ValueError):
    pass


def _check_symmetric(P: np.ndarray) -> None:
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise NotSymmetric(f"matrix must be square, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise NotSymmetric("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(P))))
    if np.max(np.abs(P - P.T)) > SYM_TOL * scale:
        raise NotSymmetric("matrix is not symmetric")


def jacobi_eigh(P, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi eigen-decomposition of a small symmetric matrix.

    Returns ``(w, V)`` with ascending eigenvalues ``w`` and orthonormal
    eigenvectors in the columns of ``V``. Sweeps stop once the off-diagonal
    Frobenius norm is below ``tol`` times the matrix norm.
    """
    A = np.array(P, dtype=np.float64)
    _check_symmetric(A)
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), V
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, np.sum(A * A) - np.sum(np.diag(A) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-18 * scale:
                    # negligible entry: dropping it moves eigenvalues by O(apq^2)
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                # A <- J' A J with J the (p, q) rotation
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def max_eigenvalue(P) -> float:
    """Largest eigenvalue of symmetric ``P``; raises :class:`NotSymmetric` otherwise."""
    w, _ = jacobi_eigh(P)
    return float(w[-1])


@dataclass(frozen=True)
class EnergyForm:
    """Positive-definite quadratic form plus the level ``ell`` of the sublevel set ``{E <= ell}``.

    ``k_E`` is the largest and ``k_min`` the smallest eigenvalue of ``P``.
    """

    P: np.ndarray
    level_ell: float
    eigvals: np.ndarray = field(init=False, repr=False, compare=False)
    eigvecs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=np.float64))
        if P.ndim == 2 and P.shape[0] == 1 and P.shape[1] > 1:
            n = int(round(math.sqrt(P.size)))
            if n * n == P.size:
                P = P.reshape(n, n)
        w, V = jacobi_eigh(P)
        if not w[0] > 0:
            raise NotPositiveDefinite(f"P is not positive definite (min eigenvalue {w[0]:g})")
        if not self.level_ell > 0:
            raise ValueError("level ell must be positive")
        P = 0.5 * (P + P.T)
        P.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "eigvals", w)
        object.__setattr__(self, "eigvecs", V)

    @classmethod
    def from_flat(cls, values, level_ell: float) -> "EnergyForm":
        vals = np.asarray(values, dtype=np.float64).ravel()
        n = int(round(math.sqrt(vals.size)))
        if n * n != vals.size:
            raise ValueError(f"P needs n*n entries, got {vals.size}")
        return cls(vals.reshape(n, n), level_ell)

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    @property
    def k_E(self) -> float:
        return float(self.eigvals[-1])

    @property
    def k_min(self) -> float:
        return float(self.eigvals[0])

    @property
    def radius_bound(self) -> float:
        """Largest ``||x||`` on the sublevel set: ``sqrt(2 ell / k_min)``."""
        return math.sqrt(2.0 * self.level_ell / self.k_min)

    def with_level(self, level_ell: float) -> "EnergyForm":
        return EnergyForm(np.array(self.P), level_ell)


def energy(form: EnergyForm, x) -> float | np.ndarray:
    """``x'Px/2`` for a state or a batch of states (last axis is the state)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    e = 0.5 * np.einsum("...i,ij,...j->...", x, form.P, x)
    return float(e) if np.ndim(e) == 0 else e


def energy_bound(form: EnergyForm, p: StabilityParams, x0, elapsed: float) -> float:
    """``(k_E/2) k^2 exp(-2 lambda elapsed) ||x0||^2``."""
    if elapsed < 0:
        raise ValueError("elapsed must be >= 0")
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    n2 = float(x0 @ x0)
    return 0.5 * form.k_E * p.k ** 2 * math.exp(-2.0 * p.lam * elapsed) * n2


def energy_integral(form: EnergyForm, traj: Trajectory) -> float:
    """Trapezoidal integral of ``E`` along the trajectory."""
    e = np.atleast_1d(energy(form, traj.states))
    if len(e) < 2:
        return 0.0
    return float(np.sum(0.5 * (e[:-1] + e[1:])) * traj.dt)


def energy_integral_bound(form: EnergyForm, p: StabilityParams, x0, T: float) -> float:
    """``T`` times the energy bound at zero elapsed time, its supremum over the window."""
    if T < 0:
        raise ValueError("T must be >= 0")
    return T * energy_bound(form, p, x0, 0.0)
