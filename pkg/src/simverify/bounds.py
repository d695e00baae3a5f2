"""Closed-form divergence bounds for fixed-step simulators.

One step of Euler or RK4 started from ``x`` and ``y`` satisfies

    ||Phi(x) - Phi(y)|| <= multiplier * ||x - y|| + offset

and N steps satisfy the same with ``(a, b)``. Under an exponential-stability
hypothesis ``(k, lambda, r0)`` the N-step gap is also at most
``2 k r0 exp(-lambda T)``; multiplying the two and taking the square root
gives the bound used by the sampling certificate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .integrate import IntegratorKind

__all__ = [
    "StepBound",
    "PropagationBound",
    "StabilityParams",
    "alpha",
    "step_bound",
    "propagation_bound",
    "geometric_offset_sum",
    "exponential_bound",
    "sqrt_bound_terms",
    "sqrt_bound",
    "slope_condition_lhs",
]


@dataclass(frozen=True)
class StepBound:
    multiplier: float
    offset: float


@dataclass(frozen=True)
class PropagationBound:
    a: float
    b: float
    n_steps: int
    dt: float
    kind: IntegratorKind
    log_a: float = 0.0
    log_b: float = -math.inf

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    @property
    def overflow(self) -> bool:
        """True when ``a`` or ``b`` saturated; the bound is then vacuous."""
        return math.isinf(self.a) or math.isinf(self.b)


@dataclass(frozen=True)
class StabilityParams:
    """``||phi(t)|| <= k ||x0|| exp(-lam t)`` for ``||x0|| <= r0``."""

    k: float
    lam: float
    r0: float

    def __post_init__(self):
        if not self.k >= 1:
            raise ValueError("k must be >= 1")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.r0 > 0:
            raise ValueError("r0 must be positive")


def alpha(L: float, dt: float) -> float:
    """Effective RK4 step length ``dt (1 + h/2 + h^2/6 + h^3/24)`` with ``h = L dt``.

    Evaluated in Horner form without intermediate rounding. Rounding this to
    a few digits before raising ``1 + L*alpha`` to a large power visibly
    changes ``a``.
    """
    if L < 0:
        raise ValueError("L must be nonnegative")
    if not dt > 0:
        raise ValueError("dt must be positive")
    h = L * dt
    return dt * (1.0 + h * (1.0 / 2.0 + h * (1.0 / 6.0 + h * (1.0 / 24.0))))


def step_bound(L: float, M: float, dt: float, kind=IntegratorKind.RK4) -> StepBound:
    if M < 0:
        raise ValueError("M must be nonnegative")
    kind = IntegratorKind.parse(kind)
    if kind is IntegratorKind.EULER:
        if not dt > 0:
            raise ValueError("dt must be positive")
        if L < 0:
            raise ValueError("L must be nonnegative")
        return StepBound(1.0 + L * dt, dt * M)
    al = alpha(L, dt)
    return StepBound(1.0 + L * al, al * M)


def geometric_offset_sum(multiplier: float, offset: float, n_steps: int) -> float:
    """``sum_{r<N} multiplier^r * offset`` in closed form."""
    if n_steps == 0 or offset == 0.0:
        return 0.0
    if multiplier == 1.0:
        return n_steps * offset
    # expm1/log1p keep precision when multiplier is close to 1
    try:
        g = math.expm1(n_steps * math.log1p(multiplier - 1.0)) / (multiplier - 1.0)
    except OverflowError:
        return math.inf
    return offset * g


def propagation_bound(L: float, M: float, dt: float, n_steps: int,
                      kind=IntegratorKind.RK4) -> PropagationBound:
    """``a = multiplier^N`` and ``b`` the geometric sum of the per-step offsets.

    Overflow saturates to ``inf`` (see :attr:`PropagationBound.overflow`).
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    kind = IntegratorKind.parse(kind)
    sb = step_bound(L, M, dt, kind)
    log_a = n_steps * math.log1p(sb.multiplier - 1.0)
    try:
        a = sb.multiplier ** n_steps
    except OverflowError:
        a = math.inf
    b = geometric_offset_sum(sb.multiplier, sb.offset, n_steps)
    if b > 0 and math.isfinite(b):
        log_b = math.log(b)
    elif b > 0:
        # b overflowed: log(offset * expm1(log_a) / (multiplier - 1)) with expm1(z) ~ exp(z)
        log_b = math.log(sb.offset) + log_a - math.log(sb.multiplier - 1.0)
    else:
        log_b = -math.inf
    return PropagationBound(a=a, b=b, n_steps=int(n_steps), dt=float(dt), kind=kind,
                            log_a=log_a, log_b=log_b)


def exponential_bound(p: StabilityParams, T: float) -> float:
    """``2 k r0 exp(-lambda T)``."""
    if T < 0:
        raise ValueError("T must be >= 0")
    return 2.0 * p.k * p.r0 * math.exp(-p.lam * T)


def sqrt_bound_terms(p: StabilityParams, pb: PropagationBound) -> tuple[float, float]:
    """The two coefficients under the square root: ``(E*a, E*b)`` with ``E`` the exponential bound."""
    e = exponential_bound(p, pb.T)
    if e > 0 and not pb.overflow:
        return e * pb.a, e * pb.b
    # product in log space: the decay can win even when a or b alone overflow
    log_e = math.log(2.0 * p.k * p.r0) - p.lam * pb.T
    ta = _safe_exp(log_e + pb.log_a)
    tb = _safe_exp(log_e + pb.log_b) if pb.log_b > -math.inf else 0.0
    return ta, tb


def _safe_exp(z: float) -> float:
    try:
        return math.exp(z)
    except OverflowError:
        return math.inf


def sqrt_bound(p: StabilityParams, pb: PropagationBound, T: float | None = None,
               dist: float = 0.0) -> float:
    """``sqrt(E a dist + E b)``, the N-step gap bound under exponential stability."""
    if dist < 0:
        raise ValueError("dist must be >= 0")
    if T is not None and not math.isclose(T, pb.T, rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError(f"T={T} does not match the propagation bound horizon {pb.T}")
    ta, tb = sqrt_bound_terms(p, pb)
    return math.sqrt(ta * dist + tb)


def slope_condition_lhs(k_E: float, p: StabilityParams, pb: PropagationBound,
                        T: float | None = None, delta: float = 0.0) -> float:
    """``k_E * sqrt(E a delta + E b)``: the energy gap between any point and a sample within ``delta``."""
    if not k_E > 0:
        raise ValueError("k_E must be positive")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    return k_E * sqrt_bound(p, pb, T, delta)
