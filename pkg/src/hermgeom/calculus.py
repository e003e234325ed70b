"""Wirtinger calculus for chart-defined scalar and matrix fields.

Chart coordinates are complex arrays of shape ``(..., n)``; leading axes are
batch axes and every evaluator in the package is expected to broadcast over
them.  Indices are 0-based throughout, so ``i = 0`` is the coordinate z¹.

Differentiation is carried out on the underlying real coordinates
``z = x + √-1 y`` and converted with

    ∂/∂zᵃ = (∂/∂xᵃ - √-1 ∂/∂yᵃ) / 2,      ∂/∂z̄ᵃ = (∂/∂xᵃ + √-1 ∂/∂yᵃ) / 2,

so nothing assumes the field is holomorphic.

Array layouts
-------------
scalar ``d1``   ``(..., n)``            ``[a] = ∂_a f``
scalar ``d2``   ``(..., n, n)``         ``[a, b] = ∂_a ∂_b̄ f``
metric ``g``    ``(..., n, n)``         ``[i, j] = g_{i j̄}``
metric ``d1``   ``(..., n, n, n)``      ``[a, i, j] = ∂_a g_{i j̄}``
metric ``d2``   ``(..., n, n, n, n)``   ``[a, b, i, j] = ∂_a ∂_b̄ g_{i j̄}``
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DerivativeError, DomainError, NotPositiveDefiniteError

Evaluator = Callable[[np.ndarray], np.ndarray]

SCHEMES = ("analytic", "central-difference")


def as_chart_point(coords, dim: Optional[int] = None) -> np.ndarray:
    """Validate chart coordinates and return them as a complex array ``(..., n)``."""
    p = np.asarray(coords, dtype=complex)
    if p.ndim == 0:
        p = p.reshape(1)
    if p.shape[-1] < 1:
        raise DomainError("a chart point needs at least one coordinate")
    if dim is not None and p.shape[-1] != dim:
        raise DomainError(f"expected {dim} complex coordinates, got {p.shape[-1]}")
    if not np.all(np.isfinite(p)):
        raise DomainError("chart point has non-finite coordinates")
    return p


@dataclass(frozen=True)
class DerivativeSpec:
    """How derivatives are obtained.

    ``step`` is the first-derivative step; ``second_step`` the step of the
    four-point mixed stencil, which needs a larger step because its roundoff
    error scales like eps/h².  ``None`` means scale with the point:
    ``1e-4 (1 + |p|)`` and ``1e-3 (1 + |p|)`` respectively.
    """

    scheme: str = "analytic"
    step: Optional[float] = None
    richardson_levels: int = 1
    second_step: Optional[float] = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise DerivativeError(f"unknown derivative scheme {self.scheme!r}")
        for name in ("step", "second_step"):
            h = getattr(self, name)
            if h is not None and not (np.isfinite(h) and h > 0):
                raise DerivativeError(f"{name} must be positive and finite, got {h}")
        if not (0 <= int(self.richardson_levels) <= 6):
            raise DerivativeError("richardson_levels must be in 0..6")

    def first_step(self, p: np.ndarray) -> float:
        scale = 1.0 + float(np.max(np.abs(p)))
        h = self.step if self.step is not None else 1e-4 * scale
        _check_step(h, scale)
        return h

    def mixed_step(self, p: np.ndarray) -> float:
        scale = 1.0 + float(np.max(np.abs(p)))
        h = self.second_step if self.second_step is not None else 1e-3 * scale
        _check_step(h, scale)
        return h


FD_SPEC = DerivativeSpec(scheme="central-difference")


def _check_step(h: float, scale: float) -> None:
    if h <= 64 * np.finfo(float).eps * scale:
        raise DerivativeError(f"step {h:g} underflows against coordinate scale {scale:g}")
    if h > 1e3 * scale:
        raise DerivativeError(f"step {h:g} is too large for coordinate scale {scale:g}")


class ScalarField:
    """A (possibly complex) scalar function of chart coordinates.

    ``d1``/``d2`` are optional analytic Wirtinger derivatives (layouts in the
    module docstring).  ``d1bar`` gives ∂_ā f; for real fields it defaults to
    the conjugate of ``d1``.
    """

    def __init__(self, value: Evaluator, dim: int, d1: Optional[Evaluator] = None,
                 d2: Optional[Evaluator] = None, d1bar: Optional[Evaluator] = None,
                 real: bool = True, domain: Optional[Callable] = None, name: str = "scalar"):
        self.value = value
        self.dim = int(dim)
        self.d1 = d1
        self.d2 = d2
        self.real = real
        self.domain = domain
        self.name = name
        if d1bar is None and d1 is not None and real:
            d1bar = lambda z: np.conj(d1(z))  # noqa: E731
        self.d1bar = d1bar

    @property
    def has_analytic(self) -> bool:
        return self.d1 is not None

    def __call__(self, z):
        return self.value(z)

    def check_domain(self, p: np.ndarray) -> None:
        _check_domain(self, p)


class MatrixField:
    """An n×n matrix-valued chart field; as a metric it must be Hermitian PD.

    ``d1`` and ``d2`` are optional analytic derivatives.  When only ``d1`` is
    supplied, second derivatives are finite differences of it.
    """

    kind = "general"

    def __init__(self, value: Evaluator, dim: int, d1: Optional[Evaluator] = None,
                 d2: Optional[Evaluator] = None, domain: Optional[Callable] = None,
                 name: str = "metric"):
        self.value = value
        self.dim = int(dim)
        self.d1 = d1
        self.d2 = d2
        self.domain = domain
        self.name = name

    @property
    def has_analytic(self) -> bool:
        return self.d1 is not None

    def __call__(self, z):
        return self.value(z)

    def check_domain(self, p: np.ndarray) -> None:
        _check_domain(self, p)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name} n={self.dim}>"


def _check_domain(field, p: np.ndarray) -> None:
    if p.shape[-1] != field.dim:
        raise DomainError(f"{field.name}: expected {field.dim} coordinates, got {p.shape[-1]}")
    if field.domain is not None and not np.all(field.domain(p)):
        raise DomainError(f"{field.name}: point outside the declared domain")


# ---------------------------------------------------------------------------
# finite-difference kernels

def _richardson(estimates: list) -> np.ndarray:
    """Extrapolate estimates at h, h/2, h/4, ... with even-power error series."""
    table = list(estimates)
    for k in range(1, len(table)):
        factor = 4.0 ** k
        table = [(factor * table[m + 1] - table[m]) / (factor - 1.0)
                 for m in range(len(table) - 1)]
    return table[0]


def _unit(n: int, a: int, scale: complex = 1.0) -> np.ndarray:
    e = np.zeros(n, dtype=complex)
    e[a] = scale
    return e


def _central(fun: Evaluator, z: np.ndarray, direction: np.ndarray, h: float, levels: int):
    ests = []
    for m in range(levels + 1):
        hk = h / 2 ** m
        ests.append((np.asarray(fun(z + hk * direction)) - np.asarray(fun(z - hk * direction)))
                    / (2.0 * hk))
    return _richardson(ests)


def _mixed(fun: Evaluator, z: np.ndarray, u: np.ndarray, v: np.ndarray, h: float, levels: int):
    ests = []
    for m in range(levels + 1):
        hk = h / 2 ** m
        pp = np.asarray(fun(z + hk * (u + v)))
        pm = np.asarray(fun(z + hk * (u - v)))
        mp = np.asarray(fun(z - hk * (u - v)))
        mm = np.asarray(fun(z - hk * (u + v)))
        ests.append((pp - pm - mp + mm) / (4.0 * hk * hk))
    return _richardson(ests)


def real_partials(fun: Evaluator, p: np.ndarray, h: float, levels: int = 1):
    """Central-difference partials ``(∂f/∂xᵃ, ∂f/∂yᵃ)``, each of shape ``(*B, n, *S)``."""
    n = p.shape[-1]
    axis = p.ndim - 1
    dx = [_central(fun, p, _unit(n, a), h, levels) for a in range(n)]
    dy = [_central(fun, p, _unit(n, a, 1j), h, levels) for a in range(n)]
    return np.stack(dx, axis=axis), np.stack(dy, axis=axis)


def fd_wirtinger(fun: Evaluator, p: np.ndarray, h: float, levels: int = 1,
                 conjugate: bool = False) -> np.ndarray:
    """Wirtinger gradient ``[a] = ∂f/∂zᵃ`` (or ∂f/∂z̄ᵃ) by central differences."""
    dx, dy = real_partials(fun, p, h, levels)
    return 0.5 * (dx + 1j * dy) if conjugate else 0.5 * (dx - 1j * dy)


def fd_wirtinger_mixed(fun: Evaluator, p: np.ndarray, h: float, levels: int = 1) -> np.ndarray:
    """Mixed second derivatives ``[a, b] = ∂²f/∂zᵃ∂z̄ᵇ``, shape ``(*B, n, n, *S)``.

    Uses ∂_a∂_b̄ = (f_{xa xb} + f_{ya yb} + √-1 (f_{xa yb} - f_{ya xb})) / 4 with
    four-point stencils on the real directions.
    """
    n = p.shape[-1]
    axis = p.ndim - 1
    rows = []
    for a in range(n):
        xa, ya = _unit(n, a), _unit(n, a, 1j)
        row = []
        for b in range(n):
            xb, yb = _unit(n, b), _unit(n, b, 1j)
            xx = _mixed(fun, p, xa, xb, h, levels)
            yy = _mixed(fun, p, ya, yb, h, levels)
            xy = _mixed(fun, p, xa, yb, h, levels)
            yx = _mixed(fun, p, ya, xb, h, levels)
            row.append(0.25 * (xx + yy + 1j * (xy - yx)))
        rows.append(np.stack(row, axis=axis))
    return np.stack(rows, axis=axis)


# ---------------------------------------------------------------------------
# public operations

def _resolve(field, spec: Optional[DerivativeSpec]) -> DerivativeSpec:
    if spec is None:
        return DerivativeSpec(scheme="analytic" if field.has_analytic else "central-difference")
    if spec.scheme == "analytic" and not field.has_analytic:
        raise DerivativeError(f"{field.name}: analytic scheme requested but no analytic "
                              "derivatives are supplied")
    return spec


def _index(i: int, n: int) -> int:
    if not 0 <= i < n:
        raise DomainError(f"index {i} out of range for dimension {n}")
    return i


def wirtinger_first(field: ScalarField, p, i: int, spec: Optional[DerivativeSpec] = None,
                    conjugate: bool = False):
    """∂f/∂zⁱ at ``p`` (or ∂f/∂z̄ⁱ with ``conjugate=True``)."""
    p = as_chart_point(p, field.dim)
    field.check_domain(p)
    i = _index(i, field.dim)
    spec = _resolve(field, spec)
    if spec.scheme == "analytic":
        if conjugate:
            if field.d1bar is None:
                raise DerivativeError(f"{field.name}: no analytic z̄-derivative")
            return field.d1bar(p)[..., i]
        return field.d1(p)[..., i]
    grad = fd_wirtinger(field.value, p, spec.first_step(p), spec.richardson_levels, conjugate)
    return grad[..., i]


def wirtinger_second(field: ScalarField, p, i: int, j: int,
                     spec: Optional[DerivativeSpec] = None):
    """∂²f/∂zⁱ∂z̄ʲ at ``p``."""
    p = as_chart_point(p, field.dim)
    field.check_domain(p)
    i, j = _index(i, field.dim), _index(j, field.dim)
    return scalar_hessian(field, p, spec)[..., i, j]


def scalar_hessian(field: ScalarField, p, spec: Optional[DerivativeSpec] = None) -> np.ndarray:
    """Full matrix ``[i, j] = ∂²f/∂zⁱ∂z̄ʲ``."""
    p = as_chart_point(p, field.dim)
    field.check_domain(p)
    spec = _resolve(field, spec)
    if spec.scheme == "analytic" and field.d2 is not None:
        return field.d2(p)
    if spec.scheme == "analytic":
        # FD on the analytic first derivative
        return fd_wirtinger(field.d1, p, spec.first_step(p), spec.richardson_levels,
                            conjugate=True).swapaxes(-1, -2)
    return fd_wirtinger_mixed(field.value, p, spec.mixed_step(p), spec.richardson_levels)


def check_metric(g: np.ndarray, name: str = "metric") -> None:
    """Raise unless every matrix in the stack is Hermitian positive definite."""
    g = np.asarray(g)
    if not np.all(np.isfinite(g)):
        raise NotPositiveDefiniteError(f"{name}: non-finite entries")
    scale = max(1.0, float(np.max(np.abs(g))))
    if np.max(np.abs(g - np.conj(np.swapaxes(g, -1, -2)))) > 1e-12 * scale:
        raise NotPositiveDefiniteError(f"{name}: matrix is not Hermitian")
    if np.min(np.linalg.eigvalsh(g)) <= 0:
        raise NotPositiveDefiniteError(f"{name}: matrix is not positive definite")


def metric_jets(metric: MatrixField, p, spec: Optional[DerivativeSpec] = None):
    """Return ``(g, dg, ddg)`` at ``p``; layouts in the module docstring.

    With the analytic scheme, ``dg`` is analytic and ``ddg`` is analytic when
    supplied, otherwise a central difference of ``dg``.  The central-difference
    scheme uses only metric values.
    """
    p = as_chart_point(p, metric.dim)
    metric.check_domain(p)
    spec = _resolve(metric, spec)
    g = np.asarray(metric.value(p), dtype=complex)
    check_metric(g, metric.name)
    levels = spec.richardson_levels
    if spec.scheme == "analytic":
        dg = np.asarray(metric.d1(p), dtype=complex)
        if metric.d2 is not None:
            ddg = np.asarray(metric.d2(p), dtype=complex)
        else:
            # [b, a, i, j] = ∂_b̄ ∂_a g  ->  [a, b, i, j]
            ddg = fd_wirtinger(metric.d1, p, spec.first_step(p), levels, conjugate=True)
            ddg = np.swapaxes(ddg, p.ndim - 1, p.ndim)
        return g, dg, ddg
    dg = fd_wirtinger(metric.value, p, spec.first_step(p), levels)
    ddg = fd_wirtinger_mixed(metric.value, p, spec.mixed_step(p), levels)
    return g, dg, ddg


def derivative_self_check(field, p, spec: Optional[DerivativeSpec] = None) -> float:
    """Max |analytic - finite difference| over all supplied derivatives at ``p``.

    Works for :class:`ScalarField` and :class:`MatrixField`.  ``spec`` sets the
    finite-difference steps (its scheme is ignored).
    """
    if not field.has_analytic:
        raise DerivativeError(f"{field.name}: no analytic derivatives to check")
    p = as_chart_point(p, field.dim)
    field.check_domain(p)
    spec = spec or FD_SPEC
    levels = spec.richardson_levels
    h1, h2 = spec.first_step(p), spec.mixed_step(p)
    fd1 = fd_wirtinger(field.value, p, h1, levels)
    residual = np.max(np.abs(np.asarray(field.d1(p)) - fd1), initial=0.0)
    if isinstance(field, ScalarField) and field.d1bar is not None:
        fd1b = fd_wirtinger(field.value, p, h1, levels, conjugate=True)
        residual = max(residual, np.max(np.abs(np.asarray(field.d1bar(p)) - fd1b), initial=0.0))
    if field.d2 is not None:
        fd2 = fd_wirtinger_mixed(field.value, p, h2, levels)
        residual = max(residual, np.max(np.abs(np.asarray(field.d2(p)) - fd2), initial=0.0))
    return float(residual)
