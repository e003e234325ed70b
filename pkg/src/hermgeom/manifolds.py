"""Built-in chart metrics and their test domains.

Torus metrics are written in the real coordinates of a rectangular lattice
cell.  Real axes are ordered ``(x¹, y¹, x², y², ...)``, so axis ``2a`` is
``Re zᵃ`` and axis ``2a + 1`` is ``Im zᵃ``.  Their ``real_jets`` method takes
a tuple of broadcastable coordinate arrays and returns arrays whose leading
axes have length 1 along every axis the metric does not depend on; grid code
relies on this to work on the full tensor-product grid at the cost of its
active axes only.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .calculus import (DerivativeSpec, MatrixField, ScalarField, as_chart_point, check_metric,
                       fd_wirtinger, fd_wirtinger_mixed, metric_jets)
from .errors import DomainError

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# torus domain

@dataclass(frozen=True)
class TorusDomain:
    """Rectangular lattice cell of a complex torus with a tensor-product grid.

    ``periods`` and ``grid`` have one entry per real axis, ordered
    ``(x¹, y¹, x², y², ...)``.
    """

    dim: int = 2
    periods: Optional[tuple] = None
    grid: Optional[tuple] = None

    def __post_init__(self):
        m = 2 * self.dim
        periods = tuple(float(v) for v in (self.periods or (1.0,) * m))
        grid = self.grid if self.grid is not None else 16
        grid = tuple(int(v) for v in ((grid,) * m if np.isscalar(grid) else grid))
        if len(periods) != m or len(grid) != m:
            raise ValueError(f"need {m} periods and {m} grid counts")
        if any(not (L > 0 and np.isfinite(L)) for L in periods):
            raise ValueError("torus periods must be positive")
        if any(N < 4 or N % 2 for N in grid):
            raise ValueError("grid counts must be even and at least 4")
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "grid", grid)

    @property
    def volume(self) -> float:
        return float(np.prod(self.periods))

    @property
    def shape(self) -> tuple:
        return self.grid

    def with_grid(self, grid) -> "TorusDomain":
        return TorusDomain(self.dim, self.periods, grid)

    def refined(self, factor: int = 2) -> "TorusDomain":
        return self.with_grid(tuple(factor * N for N in self.grid))

    def axis(self, m: int) -> np.ndarray:
        N, L = self.grid[m], self.periods[m]
        return np.arange(N) * (L / N)

    def coords(self) -> tuple:
        """Broadcastable coordinate arrays, one per real axis."""
        m = 2 * self.dim
        out = []
        for k in range(m):
            shape = [1] * m
            shape[k] = self.grid[k]
            out.append(self.axis(k).reshape(shape))
        return tuple(out)

    def contains(self, z) -> np.ndarray:
        X = real_coords(np.asarray(z, dtype=complex))
        inside = [(x >= 0) & (x < L) for x, L in zip(X, self.periods)]
        return np.logical_and.reduce(inside)

    def wrap(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        x = np.mod(z.real, np.array(self.periods[0::2]))
        y = np.mod(z.imag, np.array(self.periods[1::2]))
        return x + 1j * y


def real_coords(z: np.ndarray) -> tuple:
    """``(x¹, y¹, x², y², ...)`` from complex coordinates ``(..., n)``."""
    out = []
    for a in range(z.shape[-1]):
        out.append(z[..., a].real)
        out.append(z[..., a].imag)
    return tuple(out)


def complex_coords(X: Sequence[np.ndarray]) -> np.ndarray:
    """Inverse of :func:`real_coords`, broadcasting to a common shape."""
    X = np.broadcast_arrays(*X)
    return np.stack([X[2 * a] + 1j * X[2 * a + 1] for a in range(len(X) // 2)], axis=-1)


def _lead(arrays) -> tuple:
    return np.broadcast_shapes(*(np.shape(a) for a in arrays))


# ---------------------------------------------------------------------------
# trigonometric fields

def _wavevector(k, periods):
    """Real wave numbers κ_m = 2π k_m / L_m and Wirtinger symbols w_a = (κ_xa - √-1 κ_ya)/2."""
    kappa = TWO_PI * np.asarray(k, dtype=float) / np.asarray(periods)
    w = 0.5 * (kappa[0::2] - 1j * kappa[1::2])
    return kappa, w


def _phase(k, periods, X):
    theta = 0.0
    for m, km in enumerate(k):
        if km:
            theta = theta + (TWO_PI * km / periods[m]) * X[m]
    return np.asarray(theta, dtype=float)


class TrigPolynomial:
    """Real lattice-periodic function  c + Σ A cos θ + B sin θ,  θ = 2π Σ k_m X_m / L_m.

    ``terms`` holds ``(A, B, k)`` with integer wave vectors ``k`` over the
    2n real axes.  Derivatives are exact.
    """

    def __init__(self, terms, dim: int = 2, constant: float = 0.0, periods=None):
        self.dim = int(dim)
        self.constant = float(constant)
        self.periods = tuple(periods) if periods is not None else (1.0,) * (2 * self.dim)
        self.terms = []
        for A, B, k in terms:
            k = tuple(int(v) for v in k)
            if len(k) != 2 * self.dim:
                raise ValueError(f"wave vector {k} needs {2 * self.dim} entries")
            self.terms.append((float(A), float(B), k))

    def __repr__(self):
        return f"TrigPolynomial({self.terms!r}, dim={self.dim}, constant={self.constant})"

    def active_axes(self) -> set:
        return {m for _, _, k in self.terms for m, km in enumerate(k) if km}

    def real_jets(self, X):
        """``(u, ∂u, ∂∂̄u)`` with shapes ``lead``, ``lead + (n,)``, ``lead + (n, n)``."""
        n = self.dim
        u = np.asarray(self.constant)
        parts1, parts2 = [], []
        for A, B, k in self.terms:
            theta = _phase(k, self.periods, X)
            c, s = np.cos(theta), np.sin(theta)
            _, w = _wavevector(k, self.periods)
            u = u + A * c + B * s
            first = -A * s + B * c
            second = -(A * c + B * s)
            parts1.append(first[..., None] * w)
            parts2.append(second[..., None, None] * np.outer(w, np.conj(w)))
        lead = _lead([u] + [p[..., 0] for p in parts1])
        d1 = np.zeros(lead + (n,), dtype=complex)
        d2 = np.zeros(lead + (n, n), dtype=complex)
        for p1, p2 in zip(parts1, parts2):
            d1 = d1 + p1
            d2 = d2 + p2
        return np.broadcast_to(u, lead).astype(float), d1, d2

    def __call__(self, X):
        return self.real_jets(X)[0]

    def as_scalar_field(self) -> ScalarField:
        return ScalarField(
            value=lambda z: _batched(self.real_jets(real_coords(z))[0], z.shape[:-1], ()),
            d1=lambda z: _batched(self.real_jets(real_coords(z))[1], z.shape[:-1], (self.dim,)),
            d2=lambda z: _batched(self.real_jets(real_coords(z))[2], z.shape[:-1],
                                  (self.dim, self.dim)),
            dim=self.dim, real=True, name="trig")

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        return TrigPolynomial(self.terms + other.terms, self.dim,
                              self.constant + other.constant, self.periods)

    def __neg__(self):
        return TrigPolynomial([(-A, -B, k) for A, B, k in self.terms], self.dim,
                              -self.constant, self.periods)

    def scaled(self, factor: float) -> "TrigPolynomial":
        return TrigPolynomial([(factor * A, factor * B, k) for A, B, k in self.terms],
                              self.dim, factor * self.constant, self.periods)

    @classmethod
    def parse(cls, text: str, dim: int = 2, periods=None) -> "TrigPolynomial":
        """Parse ``"0.3 cos 1,0,0,0; 0.2 sin 0,0,0,1"`` (wave vector over real axes)."""
        terms, constant = [], 0.0
        for chunk in text.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            parts = chunk.split()
            if len(parts) == 1:
                constant += float(parts[0])
                continue
            if len(parts) != 3 or parts[1] not in ("cos", "sin"):
                raise ValueError(f"cannot parse trigonometric term {chunk!r}")
            amp = float(parts[0])
            k = tuple(int(v) for v in parts[2].split(","))
            terms.append((amp, 0.0, k) if parts[1] == "cos" else (0.0, amp, k))
        return cls(terms, dim, constant, periods)


def default_conformal_factor(a: float = 0.3, b: float = 0.2) -> TrigPolynomial:
    """u = a cos(2π Re z¹) + b sin(2π Im z²)."""
    return TrigPolynomial([(a, 0.0, (1, 0, 0, 0)), (0.0, b, (0, 0, 0, 1))], dim=2)


def _batched(arr, batch, trailing):
    arr = np.asarray(arr)
    return np.broadcast_to(arr, tuple(batch) + tuple(trailing)).copy()


# ---------------------------------------------------------------------------
# metric classes

class TorusMetric(MatrixField):
    """Metric on a complex torus given by exact real-coordinate jets."""

    kind = "general_torus"

    def __init__(self, dim: int, torus: Optional[TorusDomain] = None, name: str = "torus"):
        self.torus = torus if torus is not None else TorusDomain(dim)
        n = dim
        super().__init__(
            value=lambda z: self._at(z, 0, (n, n)),
            d1=lambda z: self._at(z, 1, (n, n, n)),
            d2=lambda z: self._at(z, 2, (n, n, n, n)),
            dim=dim, name=name)

    def _at(self, z, which, trailing):
        return _batched(self.real_jets(real_coords(np.asarray(z, dtype=complex)))[which],
                        np.shape(z)[:-1], trailing)

    def real_jets(self, X):
        raise NotImplementedError

    def sample(self, rng, count):
        u = rng.random((count, 2 * self.dim)) * np.array(self.torus.periods)
        return u[:, 0::2] + 1j * u[:, 1::2]


class FlatTorus(TorusMetric):
    kind = "flat_torus"

    def __init__(self, dim: int = 2, torus: Optional[TorusDomain] = None):
        super().__init__(dim, torus, name="flat_torus")

    def real_jets(self, X):
        n = self.dim
        return (np.eye(n, dtype=complex), np.zeros((n, n, n), dtype=complex),
                np.zeros((n, n, n, n), dtype=complex))


class TrigMetric(TorusMetric):
    """g(X) = G₀ + Σ (A_t cos θ_t + B_t sin θ_t) with Hermitian matrices A_t, B_t."""

    kind = "general_torus"

    def __init__(self, terms, dim: int = 2, base=None, torus: Optional[TorusDomain] = None,
                 name: str = "general_torus"):
        super().__init__(dim, torus, name=name)
        self.base = np.eye(dim, dtype=complex) if base is None else np.asarray(base, complex)
        self.terms = []
        for A, B, k in terms:
            A, B = np.asarray(A, complex), np.asarray(B, complex)
            for M in (A, B, self.base):
                if np.max(np.abs(M - M.conj().T)) > 1e-14:
                    raise ValueError("trigonometric metric coefficients must be Hermitian")
            self.terms.append((A, B, tuple(int(v) for v in k)))

    def real_jets(self, X):
        n = self.dim
        periods = self.torus.periods
        g = self.base
        dg = np.zeros((n, n, n), dtype=complex)
        ddg = np.zeros((n, n, n, n), dtype=complex)
        for A, B, k in self.terms:
            theta = _phase(k, periods, X)[..., None, None]
            c, s = np.cos(theta), np.sin(theta)
            _, w = _wavevector(k, periods)
            F, F1, F2 = A * c + B * s, -A * s + B * c, -(A * c + B * s)
            g = g + F
            dg = dg + w[:, None, None] * F1[..., None, :, :]
            ddg = ddg + np.outer(w, np.conj(w))[:, :, None, None] * F2[..., None, None, :, :]
        return g, dg, ddg


def perturbed_torus(full: bool = False, scale: float = 1.0,
                    torus: Optional[TorusDomain] = None) -> TrigMetric:
    """Default non-conformal, non-Kähler metric on the unit complex 2-torus.

    Depends on ``Re z¹`` and ``Im z²`` only, or on all four real axes when
    ``full`` is set.  The perturbation has operator norm below 1, so the
    metric is positive definite everywhere.
    """
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, 1j], [-1j, 0]], dtype=complex)
    z = np.zeros((2, 2), dtype=complex)
    terms = [
        (0.25 * np.diag([1.0, -0.5]), z, (1, 0, 0, 0)),
        (z, 0.15 * sx, (0, 0, 0, 1)),
        (0.1 * sy, z, (1, 0, 0, 1)),
    ]
    if full:
        terms += [
            (0.1 * np.diag([-0.5, 1.0]), z, (0, 1, 0, 0)),
            (z, 0.08 * sy, (0, 1, 1, 0)),
        ]
    terms = [(scale * A, scale * B, k) for A, B, k in terms]
    return TrigMetric(terms, 2, torus=torus, name="perturbed_torus" + ("_full" if full else ""))


class ConformalMetric(MatrixField):
    """e^u · g for a base metric g and real factor u.

    ``u`` is a :class:`TrigPolynomial` (exact, periodic) or a
    :class:`ScalarField`; a field without analytic derivatives is
    differentiated numerically.
    """

    kind = "conformal"

    def __init__(self, base: MatrixField, u, name: Optional[str] = None):
        self.base = base
        self.u = u
        n = base.dim
        if getattr(u, "dim", n) != n:
            raise ValueError("conformal factor and metric dimensions differ")
        if isinstance(base, TorusMetric):
            self.torus = base.torus
            self.kind = "conformal_torus"
        super().__init__(value=self._value, d1=self._d1, d2=self._d2, dim=n,
                         domain=base.domain, name=name or f"conformal({base.name})")
        self.sample = getattr(base, "sample", None)

    # u jets from chart points
    def _u_jets(self, z):
        if isinstance(self.u, TrigPolynomial):
            return tuple(_batched(a, z.shape[:-1], a.shape[len(a.shape) - t:] if t else ())
                         for a, t in zip(self.u.real_jets(real_coords(z)), (0, 1, 2)))
        u = np.asarray(self.u.value(z), dtype=float)
        if self.u.d1 is not None:
            d1 = self.u.d1(z)
        else:
            d1 = fd_wirtinger(self.u.value, z, DerivativeSpec().first_step(z))
        if self.u.d2 is not None:
            d2 = self.u.d2(z)
        else:
            d2 = fd_wirtinger_mixed(self.u.value, z, DerivativeSpec().mixed_step(z))
        return u, d1, d2

    def _value(self, z):
        z = np.asarray(z, dtype=complex)
        return np.exp(self._u_jets(z)[0])[..., None, None] * self.base.value(z)

    def _d1(self, z):
        z = np.asarray(z, dtype=complex)
        u, du, _ = self._u_jets(z)
        return compose_conformal(u, du, None, self.base.value(z), self.base.d1(z), None)[1]

    def _d2(self, z):
        z = np.asarray(z, dtype=complex)
        g, dg, ddg = metric_jets(self.base, z, DerivativeSpec("analytic"))
        return compose_conformal(*self._u_jets(z), g, dg, ddg)[2]

    def real_jets(self, X):
        if not isinstance(self.base, TorusMetric):
            raise TypeError("real_jets needs a torus base metric")
        if isinstance(self.u, TrigPolynomial):
            ujets = self.u.real_jets(X)
        else:
            z = complex_coords(X)
            ujets = self._u_jets(z)
        return compose_conformal(*ujets, *self.base.real_jets(X))


def compose_conformal(u, du, ddu, g, dg, ddg):
    """Jets of e^u g from jets of a real u and of g (``ddu``/``ddg`` may be None)."""
    eu = np.exp(u)
    G = eu[..., None, None] * g
    dG = eu[..., None, None, None] * (du[..., :, None, None] * g[..., None, :, :] + dg)
    if ddu is None or ddg is None:
        return G, dG, None
    dgbar = np.conj(np.swapaxes(dg, -1, -2))
    dub = np.conj(du)
    ddG = ((ddu + du[..., :, None] * dub[..., None, :])[..., None, None] * g[..., None, None, :, :]
           + du[..., :, None, None, None] * dgbar[..., None, :, :, :]
           + dub[..., None, :, None, None] * dg[..., :, None, :, :]
           + ddg)
    return G, dG, eu[..., None, None, None, None] * ddG


class FubiniStudy(MatrixField):
    """Fubini-Study metric ∂∂̄ log(1 + |z|²) on the affine chart of Pⁿ."""

    kind = "fubini_study"

    def __init__(self, dim: int = 1):
        super().__init__(self._value, dim, d1=self._d1, d2=self._d2, name=f"fubini_study({dim})")

    def _value(self, z):
        z = np.asarray(z, dtype=complex)
        n = z.shape[-1]
        sig = 1.0 + np.sum(np.abs(z) ** 2, axis=-1)[..., None, None]
        return np.eye(n) / sig - np.conj(z)[..., :, None] * z[..., None, :] / sig ** 2

    def _d1(self, z):
        z = np.asarray(z, dtype=complex)
        n = z.shape[-1]
        zb = np.conj(z)
        sig = (1.0 + np.sum(np.abs(z) ** 2, axis=-1))[..., None, None, None]
        eye = np.eye(n)
        t1 = -eye[None, :, :] * zb[..., :, None, None]                     # -δ_ij z̄_a
        t2 = -zb[..., None, :, None] * eye[:, None, :]                      # -z̄_i δ_aj
        t3 = 2 * zb[..., None, :, None] * z[..., None, None, :] * zb[..., :, None, None] / sig
        return (t1 + t2 + t3) / sig ** 2

    def _d2(self, z):
        z = np.asarray(z, dtype=complex)
        n = z.shape[-1]
        zb = np.conj(z)
        sig = (1.0 + np.sum(np.abs(z) ** 2, axis=-1))[..., None, None, None, None]
        e = np.eye(n)
        # axes [a, b, i, j]
        Zb_a = zb[..., :, None, None, None]
        Z_b = z[..., None, :, None, None]
        Zb_i = zb[..., None, None, :, None]
        Z_j = z[..., None, None, None, :]
        d_ab = e[:, :, None, None]
        d_ij = e[None, None, :, :]
        d_aj = e[:, None, None, :]
        d_ib = e[None, :, :, None].swapaxes(1, 2)  # δ_ib at axes (b, i)
        t1 = -d_ij * (d_ab / sig ** 2 - 2 * Zb_a * Z_b / sig ** 3)
        t2 = -d_aj * (d_ib / sig ** 2 - 2 * Zb_i * Z_b / sig ** 3)
        t3 = 2 * Z_j * ((d_ib * Zb_a + d_ab * Zb_i) / sig ** 3 - 3 * Zb_i * Zb_a * Z_b / sig ** 4)
        return t1 + t2 + t3

    def sample(self, rng, count, radius: float = 2.0):
        return _ball(rng, count, self.dim, 0.0, radius)


class HopfSurface(MatrixField):
    """δ_ij / |z|² on C² ∖ {0}, invariant under z -> 2z up to the factor 1/4."""

    kind = "hopf_surface"

    def __init__(self):
        super().__init__(self._value, 2, d1=self._d1, d2=self._d2,
                         domain=lambda z: np.sum(np.abs(z) ** 2, axis=-1) > 0,
                         name="hopf_surface")

    def _value(self, z):
        z = np.asarray(z, dtype=complex)
        r2 = np.sum(np.abs(z) ** 2, axis=-1)[..., None, None]
        return np.eye(2) / r2

    def _d1(self, z):
        z = np.asarray(z, dtype=complex)
        r2 = np.sum(np.abs(z) ** 2, axis=-1)[..., None, None, None]
        return -np.eye(2)[None, :, :] * np.conj(z)[..., :, None, None] / r2 ** 2

    def _d2(self, z):
        z = np.asarray(z, dtype=complex)
        r2 = np.sum(np.abs(z) ** 2, axis=-1)[..., None, None]
        inner = -(np.eye(2) / r2 ** 2 - 2 * np.conj(z)[..., :, None] * z[..., None, :] / r2 ** 3)
        return inner[..., :, :, None, None] * np.eye(2)

    def sample(self, rng, count, r_min: float = 1.0, r_max: float = 2.0):
        return _ball(rng, count, 2, r_min, r_max)


def _ball(rng, count, n, r_min, r_max):
    """Directions uniform on the sphere, radius uniform in [r_min, r_max] (or ball if r_min=0)."""
    v = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    if r_min == 0.0:
        r = r_max * rng.random(count) ** (1.0 / (2 * n))
    else:
        r = r_min + (r_max - r_min) * rng.random(count)
    return v * r[:, None]


# ---------------------------------------------------------------------------
# potential metrics

class HermitianPolynomial:
    """Polynomial Σ c_{αβ} z^α z̄^β in n complex variables with exact Wirtinger derivatives."""

    def __init__(self, coeffs: dict, dim: int):
        self.dim = int(dim)
        self.coeffs = {(tuple(a), tuple(b)): complex(c) for (a, b), c in coeffs.items() if c != 0}

    def diff(self, a: int, conjugate: bool = False) -> "HermitianPolynomial":
        out = {}
        for (alpha, beta), c in self.coeffs.items():
            exps = list(beta if conjugate else alpha)
            if exps[a] == 0:
                continue
            factor = exps[a]
            exps[a] -= 1
            key = (alpha, tuple(exps)) if conjugate else (tuple(exps), beta)
            out[key] = out.get(key, 0) + c * factor
        return HermitianPolynomial(out, self.dim)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        zb = np.conj(z)
        total = np.zeros(z.shape[:-1], dtype=complex)
        for (alpha, beta), c in self.coeffs.items():
            term = np.full(z.shape[:-1], c, dtype=complex)
            for a in range(self.dim):
                if alpha[a]:
                    term = term * z[..., a] ** alpha[a]
                if beta[a]:
                    term = term * zb[..., a] ** beta[a]
            total = total + term
        return total

    def is_real(self) -> bool:
        return all(abs(self.coeffs.get((b, a), 0) - np.conj(c)) < 1e-14
                   for (a, b), c in self.coeffs.items())


def random_psh_polynomial(dim: int = 2, seed: int = 0, eps: float = 0.1) -> HermitianPolynomial:
    """|z|² plus small random real terms of bidegree (p, q), 3 ≤ p + q ≤ 4, p, q ≥ 1.

    The metric equals the identity at the origin; on |z| < 1/2 it stays
    positive definite for the default ``eps``.
    """
    rng = np.random.default_rng(seed)
    coeffs = {}
    for a in range(dim):
        e = tuple(int(i == a) for i in range(dim))
        coeffs[(e, e)] = 1.0
    monos = _multi_indices(dim, 1) + _multi_indices(dim, 2)
    for alpha in monos:
        for beta in monos:
            deg = sum(alpha) + sum(beta)
            if deg < 3 or (alpha, beta) in coeffs or (beta, alpha) in coeffs:
                continue
            c = eps * (rng.standard_normal() + 1j * rng.standard_normal())
            if alpha == beta:
                c = c.real
            coeffs[(alpha, beta)] = coeffs.get((alpha, beta), 0) + c
            if alpha != beta:
                coeffs[(beta, alpha)] = coeffs.get((beta, alpha), 0) + np.conj(c)
    return HermitianPolynomial(coeffs, dim)


def _multi_indices(n, degree):
    if n == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        for rest in _multi_indices(n - 1, degree - first):
            out.append((first,) + rest)
    return out


class PotentialMetric(MatrixField):
    """g_{ij̄} = ∂_i∂_j̄ φ for a potential φ.

    A :class:`HermitianPolynomial` potential gives exact derivatives; a
    :class:`ScalarField` potential is differentiated numerically and the
    metric then carries no analytic derivatives.
    """

    kind = "potential"

    def __init__(self, phi, radius: float = 0.5):
        self.phi = phi
        self.radius = radius
        n = phi.dim
        if isinstance(phi, HermitianPolynomial):
            gpoly = [[phi.diff(i).diff(j, True) for j in range(n)] for i in range(n)]
            dpoly = [[[gpoly[i][j].diff(a) for j in range(n)] for i in range(n)] for a in range(n)]
            ddpoly = [[[[dpoly[a][i][j].diff(b, True) for j in range(n)] for i in range(n)]
                       for b in range(n)] for a in range(n)]
            self._polys = (gpoly, dpoly, ddpoly)
            super().__init__(lambda z: self._eval(0, z), n, d1=lambda z: self._eval(1, z),
                             d2=lambda z: self._eval(2, z), name="potential")
        else:
            def value(z):
                z = np.asarray(z, dtype=complex)
                if phi.d2 is not None:
                    return phi.d2(z)
                return fd_wirtinger_mixed(phi.value, z, DerivativeSpec().mixed_step(z), 2)
            super().__init__(value, n, name="potential")

    def _eval(self, order, z):
        z = np.asarray(z, dtype=complex)
        polys = np.array(self._polys[order], dtype=object)
        out = np.empty(z.shape[:-1] + polys.shape, dtype=complex)
        for idx in np.ndindex(polys.shape):
            out[(...,) + idx] = polys[idx](z)
        return out

    def sample(self, rng, count):
        return _ball(rng, count, self.dim, 0.0, self.radius)


class PeriodicField(TorusMetric):
    """A user metric on a torus; points are reduced into the lattice cell first."""

    def __init__(self, field: MatrixField, torus: Optional[TorusDomain] = None):
        self.field = field
        MatrixField.__init__(
            self, value=lambda z: field.value(self.torus.wrap(z)),
            d1=(lambda z: field.d1(self.torus.wrap(z))) if field.d1 is not None else None,
            d2=(lambda z: field.d2(self.torus.wrap(z))) if field.d2 is not None else None,
            dim=field.dim, name=field.name)
        self.torus = torus if torus is not None else TorusDomain(field.dim)

    def real_jets(self, X):
        z = complex_coords(X)
        spec = DerivativeSpec("analytic" if self.field.has_analytic else "central-difference")
        return metric_jets(self, z, spec)


# ---------------------------------------------------------------------------
# constructors and operations

def flat_torus(dim: int = 2, torus: Optional[TorusDomain] = None) -> FlatTorus:
    return FlatTorus(dim, torus)


def conformal_torus(u=None, dim: int = 2, torus: Optional[TorusDomain] = None) -> ConformalMetric:
    """e^u times the flat metric; ``u`` defaults to 0.3 cos(2π Re z¹) + 0.2 sin(2π Im z²)."""
    if u is None:
        if dim != 2:
            raise ValueError("the default conformal factor is defined for n = 2")
        u = default_conformal_factor()
    return ConformalMetric(FlatTorus(dim, torus), u, name="conformal_torus")


def fubini_study(dim: int = 1) -> FubiniStudy:
    return FubiniStudy(dim)


def hopf_surface() -> HopfSurface:
    return HopfSurface()


def potential(phi, radius: float = 0.5) -> PotentialMetric:
    return PotentialMetric(phi, radius)


def general_torus(g, torus: Optional[TorusDomain] = None) -> TorusMetric:
    """A torus metric from a :class:`TrigMetric` or any :class:`MatrixField`."""
    if isinstance(g, TorusMetric):
        return g
    return PeriodicField(g, torus)


KINDS = ("flat_torus", "conformal_torus", "fubini_study", "hopf_surface", "potential",
         "general_torus")


def builtin(kind: str, **params) -> MatrixField:
    """Construct a built-in metric by name (used by the CLI)."""
    if kind == "flat_torus":
        return flat_torus(params.get("dim", 2))
    if kind == "conformal_torus":
        return conformal_torus(params.get("u"), params.get("dim", 2))
    if kind == "fubini_study":
        return fubini_study(params.get("dim", 1))
    if kind == "hopf_surface":
        return hopf_surface()
    if kind == "potential":
        phi = random_psh_polynomial(params.get("dim", 2), params.get("seed", 0),
                                    params.get("eps", 0.1))
        return potential(phi, params.get("radius", 0.5))
    if kind == "general_torus":
        return perturbed_torus(full=params.get("full", False), scale=params.get("scale", 1.0))
    raise ValueError(f"unknown manifold kind {kind!r}")


def is_torus(metric: MatrixField) -> bool:
    return hasattr(metric, "torus") and hasattr(metric, "real_jets")


def metric_at(b: MatrixField, p):
    """``(g, ∂g)`` at ``p`` from the analytic evaluators, with positivity checked."""
    p = as_chart_point(p, b.dim)
    b.check_domain(p)
    g = np.asarray(b.value(p))
    check_metric(g, b.name)
    return g, (np.asarray(b.d1(p)) if b.d1 is not None else None)


@dataclass(frozen=True)
class SamplePlan:
    count: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("a sample plan needs count >= 1")


def random_points(b: MatrixField, plan: SamplePlan) -> np.ndarray:
    """Deterministic points ``(count, n)`` in the metric's canonical test domain.

    Torus: the fundamental cell.  Hopf: the annulus 1 ≤ |z| ≤ 2.
    Fubini-Study: the ball |z| < 2.  Potential: the ball of its radius.
    """
    sampler = getattr(b, "sample", None)
    if sampler is None:
        raise DomainError(f"{b.name}: no canonical sampling domain")
    return sampler(np.random.default_rng(plan.seed), plan.count)


def periodicity_check(b: MatrixField, samples_per_axis: int = 8) -> float:
    """max |g(p) - g(p + period)| over a grid on each face of the cell."""
    if not is_torus(b):
        raise DomainError(f"{b.name} is not a torus metric")
    dom = b.torus.with_grid(samples_per_axis)
    X = dom.coords()
    z = complex_coords(X)
    g0 = b.value(z)
    worst = 0.0
    for m, L in enumerate(dom.periods):
        shift = np.zeros(b.dim, dtype=complex)
        shift[m // 2] = L if m % 2 == 0 else 1j * L
        worst = max(worst, float(np.max(np.abs(b.value(z + shift) - g0))))
    return worst
