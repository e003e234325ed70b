"""Torus-cell quadrature and Monte Carlo averages over direction spheres.

Volume convention: for a metric with matrix g the volume form ωⁿ is taken to
be ``det g`` times Lebesgue measure on the cell, so the flat unit torus has
volume 1.  Every verified identity uses this one convention on both sides.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .calculus import DerivativeSpec, MatrixField, ScalarField, metric_jets
from .curvature import curvature_from_jets, frame_curvature, orthonormal_frame
from .errors import GridTooCoarseError
from .manifolds import TorusDomain, TrigPolynomial, complex_coords


@dataclass(frozen=True)
class GridQuadrature:
    """Uniform product trapezoid rule on a torus cell.

    The weights are all equal to ``volume / number of nodes``; for periodic
    integrands this is spectrally accurate and exact for trigonometric
    polynomials below the Nyquist bound.
    """

    domain: TorusDomain

    @property
    def weight(self) -> float:
        return self.domain.volume / float(np.prod(self.domain.grid))

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.domain.grid, self.weight)

    def integrate(self, values) -> float:
        """Sum of weight × value over the grid.

        ``values`` may be broadcast-reduced (length-1 axes where constant).
        """
        values = np.asarray(values)
        axes = tuple(range(2 * self.domain.dim))
        if values.ndim < len(axes):
            values = values.reshape((1,) * (len(axes) - values.ndim) + values.shape)
        return float(np.real(np.mean(values, axis=axes))) * self.domain.volume

    def refined(self, factor: int = 2) -> "GridQuadrature":
        return GridQuadrature(self.domain.refined(factor))


def _grid_values(f, domain: TorusDomain):
    X = domain.coords()
    if isinstance(f, TrigPolynomial):
        return f(X)
    if isinstance(f, ScalarField):
        return np.asarray(f.value(complex_coords(X)))
    return np.asarray(f(X))


def torus_integral(f, q: GridQuadrature, refine_tol: Optional[float] = None) -> float:
    """∫ f over the cell with the product trapezoid rule.

    ``f`` is a :class:`TrigPolynomial`, a :class:`ScalarField` of chart
    coordinates, or a callable of the real coordinate arrays.  With
    ``refine_tol`` the integral is recomputed on the doubled grid and
    :class:`GridTooCoarseError` is raised if the two differ by more than
    ``refine_tol · max(1, |value|)``.
    """
    value = q.integrate(_grid_values(f, q.domain))
    if refine_tol is not None:
        fine = q.refined().integrate(_grid_values(f, q.domain.refined()))
        if abs(fine - value) > refine_tol * max(1.0, abs(fine)):
            raise GridTooCoarseError(
                f"doubling the grid changed the integral by {abs(fine - value):.3e}")
    return value


# ---------------------------------------------------------------------------
# sphere averages

class Estimate(NamedTuple):
    value: complex
    stderr: float


@dataclass(frozen=True)
class SphereSampler:
    """Uniform directions on the unit sphere of Cⁿ (normalized complex Gaussians)."""

    dim: int
    count: int = 100_000
    seed: int = 0
    chunk: int = 50_000

    def __post_init__(self):
        if self.dim < 1 or self.count < 2:
            raise ValueError("sphere sampler needs dim >= 1 and count >= 2")

    def chunks(self):
        """Yield sample blocks ``(m, n)`` in a fixed order."""
        rng = np.random.default_rng(self.seed)
        left = self.count
        while left > 0:
            m = min(self.chunk, left)
            v = rng.standard_normal((m, self.dim)) + 1j * rng.standard_normal((m, self.dim))
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            yield v
            left -= m

    def samples(self) -> np.ndarray:
        return np.concatenate(list(self.chunks()), axis=0)


def _mean_stderr(blocks):
    """Mean and standard error from an iterable of 1-D sample blocks (fixed-order sums).

    Sums are taken about the first sample so that near-constant samples do not
    lose their variance to cancellation.
    """
    shift, total, total2, count = None, 0.0, 0.0, 0
    for x in blocks:
        if shift is None:
            shift = x[0]
        d = x - shift
        total = total + np.sum(d)
        total2 = total2 + np.sum(np.abs(d) ** 2)
        count += x.shape[0]
    mean = total / count
    var = max(float(total2 / count - abs(mean) ** 2), 0.0) * count / (count - 1)
    return mean + shift, float(np.sqrt(var / count))


def exact_quartic_moment(n: int, i: int, j: int, k: int, l: int) -> float:
    """(δ_ij δ_kl + δ_il δ_kj) / (n(n+1)), the sphere average of ξⁱ ξ̄ʲ ξᵏ ξ̄ˡ."""
    return ((i == j) * (k == l) + (i == l) * (k == j)) / (n * (n + 1))


def sphere_quartic_moment(dim: int, i: int, j: int, k: int, l: int,
                          sampler: Optional[SphereSampler] = None) -> Estimate:
    """Monte Carlo average of ξⁱ ξ̄ʲ ξᵏ ξ̄ˡ over the unit sphere of C^dim."""
    for idx in (i, j, k, l):
        if not 0 <= idx < dim:
            raise IndexError(f"index {idx} out of range for dimension {dim}")
    sampler = sampler or SphereSampler(dim)
    if sampler.dim != dim:
        raise ValueError("sampler dimension mismatch")
    blocks = (x[:, i] * np.conj(x[:, j]) * x[:, k] * np.conj(x[:, l]) for x in sampler.chunks())
    mean, se = _mean_stderr(blocks)
    return Estimate(complex(mean), se)


def fs_average_hsc(metric: MatrixField, p, spec: Optional[DerivativeSpec] = None,
                   sampler: Optional[SphereSampler] = None) -> Estimate:
    """Average of H over uniformly distributed g-unit directions at ``p``.

    Directions are drawn in a g-orthonormal frame (Cholesky factor of g(p)),
    where the average equals (s + ŝ) / (n(n+1)).
    """
    g, dg, ddg = metric_jets(metric, p, spec)
    M = orthonormal_frame(g)
    Rp = frame_curvature(curvature_from_jets(g, dg, ddg), M)
    sampler = sampler or SphereSampler(metric.dim)

    def values(x):
        xb = np.conj(x)
        return np.einsum("ijkl,si,sj,sk,sl->s", Rp, x, xb, x, xb, optimize=True).real

    mean, se = _mean_stderr(values(x) for x in sampler.chunks())
    return Estimate(float(np.real(mean)), se)
