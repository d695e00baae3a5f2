"""System models: a vector field with declared regularity constants.

A model bundles ``f(x)`` with the domain radius ``r`` and the constants
``L`` and ``M`` of the relaxed Lipschitz inequality

    ||f(x) - f(y)|| <= L ||x - y|| + M      for x, y in D = {||x|| < r}

``M`` absorbs jumps of discontinuous fields. The constants are declared by
the model author; :func:`empirical_LM_check` tries to falsify them.

Fields are vectorized: they accept an array of shape ``(n,)`` or ``(m, n)``
and return an array of the same shape.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "SystemModel",
    "DomainBall",
    "OutOfDomain",
    "OutOfDomainWarning",
    "NonFiniteOutput",
    "UnknownModel",
    "LMCheckReport",
    "eval_dynamics",
    "empirical_LM_check",
    "sgn_cubic",
    "linear_1d",
    "linear_nd",
    "register",
    "get_model",
    "available_models",
]


class NonFiniteOutput(FloatingPointError):
    """The vector field or an integrator stage produced inf/nan."""


class OutOfDomain(ValueError):
    """Raised only when the caller asks for strict domain checking."""


class OutOfDomainWarning(RuntimeWarning):
    pass


class UnknownModel(KeyError):
    pass


@dataclass(frozen=True)
class DomainBall:
    """Closed Euclidean ball ``{x : ||x|| <= radius}``."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def contains(self, x) -> bool | np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.linalg.norm(x, axis=-1) <= self.radius


@dataclass(frozen=True)
class SystemModel:
    """Autonomous vector field with declared constants.

    ``kernel`` optionally names a compiled field understood by the native
    propagation kernel, as ``(code, params)``; models built from arbitrary
    Python callables leave it ``None`` and always run on the numpy path.
    """

    name: str
    dim: int
    field: Callable[[np.ndarray], np.ndarray] = dc_field(repr=False, compare=False)
    domain_radius: float
    lipschitz_L: float
    jump_M: float
    kernel: Optional[tuple] = dc_field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if not self.domain_radius > 0:
            raise ValueError("domain_radius must be positive")
        if self.lipschitz_L < 0 or self.jump_M < 0:
            raise ValueError("L and M must be nonnegative")

    @property
    def domain(self) -> DomainBall:
        return DomainBall(self.domain_radius)


def eval_dynamics(model: SystemModel, x, strict: bool = False) -> np.ndarray:
    """Evaluate ``f(x)``.

    Leaving the domain is reported with :class:`OutOfDomainWarning` (or
    raised as :class:`OutOfDomain` when ``strict``) but the value is still
    returned. Non-finite output always raises :class:`NonFiniteOutput`.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (model.dim,):
        if model.dim == 1 and x.ndim == 0:
            x = x.reshape(1)
        else:
            raise ValueError(f"expected state of length {model.dim}, got shape {x.shape}")
    norms = np.linalg.norm(x, axis=-1)
    if np.any(norms > model.domain_radius):
        msg = f"{model.name}: state outside D (||x|| = {np.max(norms):g} > {model.domain_radius:g})"
        if strict:
            raise OutOfDomain(msg)
        warnings.warn(msg, OutOfDomainWarning, stacklevel=2)
    out = np.asarray(model.field(x), dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise NonFiniteOutput(f"{model.name}: non-finite derivative")
    return out


@dataclass(frozen=True)
class LMCheckReport:
    max_residual: float
    witness_x: np.ndarray
    witness_y: np.ndarray
    n_pairs: int
    seed: int

    @property
    def consistent(self) -> bool:
        return self.max_residual <= 0.0


def _uniform_ball(rng: np.random.Generator, m: int, dim: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((m, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    u = rng.random(m) ** (1.0 / dim)
    return g * (radius * u)[:, None]


def empirical_LM_check(model: SystemModel, n_pairs: int, seed: int = 0,
                       L: float | None = None, M: float | None = None) -> LMCheckReport:
    """Falsification harness for the declared ``(L, M)``.

    Half of the pairs are drawn independently and uniformly in ``D``; the
    other half are close pairs (separation up to 1% of ``r``), which is where
    an understated ``M`` shows up next to a discontinuity.
    ``L``/``M`` override the model's declared values.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    L = model.lipschitz_L if L is None else L
    M = model.jump_M if M is None else M
    rng = np.random.default_rng(seed)
    r = model.domain_radius
    x = _uniform_ball(rng, n_pairs, model.dim, r)
    y = _uniform_ball(rng, n_pairs, model.dim, r)
    n_close = n_pairs // 2
    if n_close:
        eps = _uniform_ball(rng, n_close, model.dim, 0.01 * r)
        y[:n_close] = x[:n_close] + eps
        # keep the perturbed partner inside the open ball
        nrm = np.linalg.norm(y[:n_close], axis=1)
        over = nrm >= r
        y[:n_close][over] *= (np.nextafter(r, 0) / nrm[over])[:, None]
    fx = np.asarray(model.field(x), dtype=np.float64)
    fy = np.asarray(model.field(y), dtype=np.float64)
    resid = (np.linalg.norm(fx - fy, axis=1)
             - L * np.linalg.norm(x - y, axis=1) - M)
    i = int(np.argmax(resid))
    return LMCheckReport(float(resid[i]), x[i].copy(), y[i].copy(), n_pairs, seed)


# --- built-in models -------------------------------------------------------

SGN_CUBIC = 1
LINEAR = 2


def _sgn_cubic_field(gain: float):
    def f(x):
        x = np.asarray(x, dtype=np.float64)
        # np.sign(0.0) == 0.0 keeps the origin an exact fixed point
        return -gain * np.sign(x) + x * x * x / 3.0
    return f


def sgn_cubic(gain: float = 2.0, radius: float = 1.5) -> SystemModel:
    """``x' = -gain*sgn(x) + x^3/3`` on ``|x| < radius``.

    With the defaults the declared constants are ``L = radius^2/3 = 3/4`` and
    ``M = 2*gain = 4``.
    """
    return SystemModel(
        name="sgn-cubic",
        dim=1,
        field=_sgn_cubic_field(gain),
        domain_radius=radius,
        lipschitz_L=radius * radius / 3.0,
        jump_M=2.0 * gain,
        kernel=(SGN_CUBIC, (float(gain),)),
    )


def _linear_field(A: np.ndarray):
    A = np.array(A, dtype=np.float64)
    n = A.shape[0]

    def f(x):
        x = np.asarray(x, dtype=np.float64)
        # explicit left-to-right accumulation so the compiled kernel can match bit for bit
        out = x[..., 0:1] * A[:, 0]
        for j in range(1, n):
            out = out + x[..., j:j + 1] * A[:, j]
        return out
    return f


def linear_nd(A, radius: float = 10.0, name: str = "linear-nd") -> SystemModel:
    """``x' = A x``. ``A`` may be a nested list or a row-major flat list."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        n = int(round(np.sqrt(A.size)))
        if n * n != A.size:
            raise ValueError("flat matrix length must be a perfect square")
        A = A.reshape(n, n)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if not np.all(np.isfinite(A)):
        raise ValueError("A must be finite")
    A = A.copy()
    A.setflags(write=False)
    return SystemModel(
        name=name,
        dim=A.shape[0],
        field=_linear_field(A),
        domain_radius=radius,
        lipschitz_L=float(np.linalg.norm(A, 2)),
        jump_M=0.0,
        kernel=(LINEAR, (A,)),
    )


def linear_1d(rate: float = 1.0, radius: float = 10.0) -> SystemModel:
    """``x' = -rate * x``; a negative rate gives an unstable model."""
    m = linear_nd([[-rate]], radius=radius, name="linear-1d")
    return m


_REGISTRY: dict[str, Callable[..., SystemModel]] = {
    "sgn-cubic": sgn_cubic,
    "linear-1d": linear_1d,
    "linear-nd": linear_nd,
}


def register(name: str, factory: Callable[..., SystemModel]) -> None:
    _REGISTRY[name] = factory


def available_models() -> list[str]:
    return sorted(_REGISTRY)


def get_model(name: str, **kwargs) -> SystemModel:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise UnknownModel(f"unknown model {name!r}; known: {', '.join(available_models())}") from None
    return factory(**kwargs)
