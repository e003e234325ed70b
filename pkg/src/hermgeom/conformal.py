"""Conformal changes, Gauduchon weights and the prescribed Chern scalar equation.

Global operations work on complex surfaces (n = 2) covered by a torus cell,
where ω^{n-1} = ω and the Gauduchon weight enters linearly.  Grid metrics
carry their jets on a :class:`PeriodicGrid`; they are built either from the
exact jets of a built-in metric or by differentiating grid values, and the
two routes are used on opposite sides of every verified identity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .calculus import DerivativeSpec, MatrixField, ScalarField, as_chart_point, metric_jets
from .curvature import (curvature_from_jets, dbar_star_omega, inverse_metric,
                        scalars_from_curvature, torsion_from_jets, torsion_trace)
from .errors import CertificateError, DomainError, NumericalError, SolverError
from .manifolds import (ConformalMetric, TorusDomain, TrigPolynomial, complex_coords,
                        is_torus)
from .quadrature import GridQuadrature
from .report import CheckRecord, VerificationReport
from .spectral import PeriodicGrid

FACTOR_BOUNDS = (1e-6, 1e6)


# ---------------------------------------------------------------------------
# grid metrics

def _lift(arr, naxes: int, trailing: int) -> np.ndarray:
    """Give a grid field exactly ``naxes`` leading grid axes."""
    arr = np.asarray(arr)
    lead = arr.ndim - trailing
    if lead < naxes:
        arr = arr.reshape((1,) * (naxes - lead) + arr.shape)
    return arr


def _as_grid(grid) -> PeriodicGrid:
    if isinstance(grid, PeriodicGrid):
        return grid
    if isinstance(grid, TorusDomain):
        return PeriodicGrid(grid)
    raise TypeError("expected a PeriodicGrid or TorusDomain")


class GridMetric:
    """Metric jets ``(g, ∂g, ∂∂̄g)`` sampled on a periodic grid.

    Arrays have ``2n`` leading grid axes (length 1 where constant) followed
    by the index axes of the layouts in :mod:`hermgeom.calculus`.
    """

    def __init__(self, grid: PeriodicGrid, g, dg, ddg, source: str = "values"):
        self.grid = grid
        self.dim = grid.dim
        na = grid.naxes
        self.g = _lift(g, na, 2)
        self.dg = _lift(dg, na, 3)
        self.ddg = _lift(ddg, na, 4)
        self.source = source
        self.imag_residue = {}
        eig = np.linalg.eigvalsh(self.g)
        if not np.all(eig > 0):
            raise DomainError("grid metric is not positive definite everywhere")

    @classmethod
    def from_metric(cls, metric: MatrixField, grid) -> "GridMetric":
        """Exact jets of a torus metric at the grid nodes."""
        grid = _as_grid(grid)
        if metric.dim != grid.dim:
            raise ValueError("metric and grid dimensions differ")
        X = grid.coords()
        if hasattr(metric, "real_jets"):
            g, dg, ddg = metric.real_jets(X)
        else:
            g, dg, ddg = metric_jets(metric, complex_coords(X))
        return cls(grid, g, dg, ddg, source="jets")

    @classmethod
    def from_values(cls, G, grid) -> "GridMetric":
        """Differentiate grid values of a metric with the grid stencil."""
        grid = _as_grid(grid)
        n = grid.dim
        G = _lift(np.asarray(G, dtype=complex), grid.naxes, 2)
        dg = np.stack([grid.wirtinger(G, a) for a in range(n)], axis=-3)
        ddg = np.stack([np.stack([grid.ddbar(G, a, b) for b in range(n)], axis=-3)
                        for a in range(n)], axis=-4)
        return cls(grid, G, dg, ddg, source="values")

    def scaled(self, phi) -> "GridMetric":
        """φ·g from grid values of φ (differentiated on the grid)."""
        phi = _lift(phi, self.grid.naxes, 0)
        return GridMetric.from_values(phi[..., None, None] * self.g, self.grid)

    @property
    def shape(self) -> tuple:
        return np.broadcast_shapes(self.g.shape[:-2], self.dg.shape[:-3], self.ddg.shape[:-4])

    def _real(self, x, name):
        """Real part of a quantity that is real up to discretization error.

        The largest imaginary residue is kept in ``imag_residue`` as a
        diagnostic of grid resolution.
        """
        x = np.asarray(x)
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"{name} is not finite")
        self.imag_residue[name] = float(np.max(np.abs(x.imag), initial=0.0))
        return x.real

    @cached_property
    def ginv(self):
        return inverse_metric(self.g)

    @cached_property
    def curvature(self):
        return curvature_from_jets(self.g, self.dg, self.ddg, self.ginv)

    @cached_property
    def _scalars(self):
        s, s_hat = scalars_from_curvature(self.curvature, self.ginv)
        return self._real(s, "s"), self._real(s_hat, "s_hat")

    @property
    def s(self):
        return self._scalars[0]

    @property
    def s_hat(self):
        return self._scalars[1]

    @cached_property
    def tau(self):
        """Torsion trace τ_i = T_{ki}^k."""
        return torsion_trace(torsion_from_jets(self.g, self.dg, self.ginv))

    @property
    def dbar_star(self):
        """Coefficients of ∂̄*ω = -√-1 τ_i dzⁱ."""
        return -1j * self.tau

    @cached_property
    def pairing(self):
        """⟨∂̄∂̄*ω, ω⟩ = g^{ij̄} ∂_j̄ τ_i, differentiating τ on the grid."""
        dtau = self.grid.gradient(_lift(self.tau, self.grid.naxes, 1), conjugate=True)
        return self._real(np.einsum("...ij,...ij->...", self.ginv, dtau), "pairing")

    @cached_property
    def dbar_star_norm2(self):
        """|∂̄*ω|² = g^{ij̄} τ_i τ̄_j."""
        t = self.tau
        return self._real(np.einsum("...ij,...i,...j->...", self.ginv, t, np.conj(t)), "norm")

    @cached_property
    def volume(self):
        """det g, the density of ωⁿ against Lebesgue measure."""
        return self._real(np.linalg.det(self.g), "det g")

    @property
    def gauduchon_density(self):
        return self._real(_gamma_from_ddg(self.ddg), "gauduchon density")

    def integral(self, density, weight=None) -> float:
        """∫ density · ωⁿ over the cell (``weight`` multiplies the density)."""
        q = GridQuadrature(self.grid.torus)
        vals = density * self.volume if weight is None else density * weight * self.volume
        return q.integrate(vals)


def _gamma_from_ddg(ddg):
    """Scalar density of ∂∂̄ω on a surface: Σ ε_{ai} ε_{bj} ∂_a∂_b̄ g_{ij̄}."""
    if ddg.shape[-1] != 2:
        raise ValueError("the Gauduchon density is implemented for n = 2")
    return ddg[..., 0, 0, 1, 1] + ddg[..., 1, 1, 0, 0] - ddg[..., 0, 1, 1, 0] - ddg[..., 1, 0, 0, 1]


def _grid_gamma(grid: PeriodicGrid, F):
    """Gauduchon density of a grid matrix field F, differentiated on the grid."""
    gam = (grid.ddbar(F[..., 1, 1], 0, 0) + grid.ddbar(F[..., 0, 0], 1, 1)
           - grid.ddbar(F[..., 1, 0], 0, 1) - grid.ddbar(F[..., 0, 1], 1, 0))
    return gam


# ---------------------------------------------------------------------------
# pointwise conformal operations

def conformal_metric(b: MatrixField, u) -> ConformalMetric:
    """e^u · b, with derivatives composed from both factors.

    ``u`` is a :class:`TrigPolynomial` or a real :class:`ScalarField`.  On a
    torus the factor must be periodic and keep e^u within ``FACTOR_BOUNDS``
    on a sampling grid.
    """
    if getattr(u, "dim", b.dim) != b.dim:
        raise ValueError("conformal factor and metric dimensions differ")
    if is_torus(b):
        dom = b.torus.with_grid(8)
        z = complex_coords(dom.coords())
        uval = np.asarray(_value(u, z), dtype=float)
        lo, hi = np.log(FACTOR_BOUNDS[0]), np.log(FACTOR_BOUNDS[1])
        if np.min(uval) < lo or np.max(uval) > hi:
            raise DomainError("conformal factor leaves the bounds [1e-6, 1e6]")
        for m, L in enumerate(dom.periods):
            shift = np.zeros(b.dim, dtype=complex)
            shift[m // 2] = L if m % 2 == 0 else 1j * L
            if np.max(np.abs(_value(u, z + shift) - uval)) > 1e-10:
                raise DomainError("conformal factor is not lattice periodic")
    return ConformalMetric(b, u)


def _value(u, z):
    if isinstance(u, TrigPolynomial):
        return u.as_scalar_field().value(z)
    return u.value(z)


def log_field(f0) -> ScalarField:
    """log f for a positive :class:`ScalarField` or :class:`TrigPolynomial` f."""
    if isinstance(f0, TrigPolynomial):
        f0 = f0.as_scalar_field()

    def value(z):
        v = np.asarray(f0.value(z), dtype=float)
        if np.any(v <= 0):
            raise DomainError("weight must be positive")
        return np.log(v)

    def _d1(z):
        return f0.d1(z) / np.asarray(f0.value(z))[..., None]

    def _d2(z):
        f = np.asarray(f0.value(z))[..., None, None]
        g1 = f0.d1(z)
        return f0.d2(z) / f - g1[..., :, None] * np.conj(g1)[..., None, :] / f ** 2

    d1 = _d1 if f0.d1 is not None else None
    d2 = _d2 if f0.d1 is not None and f0.d2 is not None else None
    return ScalarField(value, f0.dim, d1=d1, d2=d2, name=f"log({f0.name})")


def dbar_star_conformal_check(metric: MatrixField, f0, p, spec: Optional[DerivativeSpec] = None
                              ) -> float:
    """max_i |∂̄*_G ω_G - (∂̄*ω + √-1 ∂ log f₀)|_i at ``p`` for ω_G = f₀ ω (n = 2).

    The left side differentiates the scaled metric directly; the right side
    uses the original metric and the gradient of log f₀.
    """
    if metric.dim != 2:
        raise ValueError("the conformal law for ∂̄*ω is checked for n = 2")
    p = as_chart_point(p, metric.dim)
    spec = spec or DerivativeSpec("central-difference", richardson_levels=2)
    u = log_field(f0)
    scaled = ConformalMetric(metric, u)
    lhs = dbar_star_omega(scaled, p, spec)
    if u.d1 is not None:
        du = u.d1(p)
    else:
        from .calculus import fd_wirtinger
        du = fd_wirtinger(u.value, p, spec.first_step(p), spec.richardson_levels)
    rhs = dbar_star_omega(metric, p, spec) + 1j * du
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# Gauduchon machinery

def _grid_metric(metric, grid) -> GridMetric:
    if isinstance(metric, GridMetric):
        return metric
    if not is_torus(metric):
        raise DomainError("global operations need a torus metric")
    return GridMetric.from_metric(metric, grid if grid is not None else metric.torus)


def gauduchon_residual(metric, grid=None) -> float:
    """sup over the grid of |density of ∂∂̄ω| (n = 2)."""
    gm = _grid_metric(metric, grid)
    return float(np.max(np.abs(gm.gauduchon_density)))


@dataclass
class EllipticSolve:
    rhs: np.ndarray
    solution: np.ndarray
    residual_norm: float
    iterations: int
    tolerance: float
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.residual_norm <= 10 * self.tolerance:
            raise SolverError(f"solver residual {self.residual_norm:.3e} exceeds 10x "
                              f"tolerance {self.tolerance:.1e}")


def _fft_preconditioner(symbol: np.ndarray, shape: tuple) -> LinearOperator:
    sym = np.broadcast_to(symbol, shape).astype(complex)
    small = np.abs(sym) < 1e-12 * max(1.0, float(np.max(np.abs(sym))))
    inv = np.where(small, 1.0, 1.0 / np.where(small, 1.0, sym))
    size = int(np.prod(shape))

    def apply(r):
        r = np.asarray(r).reshape(shape)
        return np.real(np.fft.ifftn(np.fft.fftn(r) * inv)).ravel()

    return LinearOperator((size, size), matvec=apply, dtype=float)


def _gmres(A, b, M, tol, maxiter, x0):
    count = [0]

    def cb(_):
        count[0] += 1

    # maxiter bounds the total number of inner iterations
    restart = max(1, min(60, maxiter))
    x, info = gmres(A, b, x0=x0, rtol=tol, atol=0.0, restart=restart,
                    maxiter=-(-maxiter // restart), M=M, callback=cb, callback_type="pr_norm")
    if info < 0:
        raise SolverError(f"GMRES breakdown (info={info})")
    res = float(np.linalg.norm(A.matvec(x) - b) / max(np.linalg.norm(b), 1e-300))
    if info > 0 and res > 10 * tol:
        raise SolverError(f"GMRES stagnated after {count[0]} iterations, residual {res:.3e}")
    return x, res, count[0]


def gauduchon_solve(metric, grid=None, tol: float = 1e-12, maxiter: int = 1000,
                    seed: Optional[int] = None) -> EllipticSolve:
    """Gauduchon weight of a torus surface metric as an :class:`EllipticSolve`.

    The operator L(f) = density of ∂∂̄(f ω) has the weight f₀ as its kernel
    and mean-zero range.  Writing f₀ = 1 + v with mean(v) = 0 gives the
    nonsingular system L v + mean(v) = -L(1), solved by GMRES with the
    constant-coefficient symbol of the mean metric as preconditioner.
    ``seed`` draws a random initial guess.
    """
    gm = _grid_metric(metric, grid)
    if gm.dim != 2:
        raise ValueError("Gauduchon weights are computed for n = 2")
    pg = gm.grid
    g = gm.g
    shape = g.shape[:-2]
    size = int(np.prod(shape))

    def L(v):
        v = v.reshape(shape)
        return np.real(_grid_gamma(pg, v[..., None, None] * g))

    rhs = -np.real(_grid_gamma(pg, np.broadcast_to(g, shape + g.shape[-2:])))
    scale = float(np.max(np.abs(rhs))) if size > 1 else 0.0
    if scale == 0.0:
        f0 = np.ones(shape)
        return EllipticSolve(rhs, f0, 0.0, 0, tol, {"already_gauduchon": True})

    A = LinearOperator((size, size), matvec=lambda v: L(v).ravel() + np.mean(v), dtype=float)
    gbar = np.mean(g, axis=pg.grid_axes())
    sym = (gbar[1, 1] * pg.ddbar_symbol(shape, 0, 0) + gbar[0, 0] * pg.ddbar_symbol(shape, 1, 1)
           - gbar[1, 0] * pg.ddbar_symbol(shape, 0, 1) - gbar[0, 1] * pg.ddbar_symbol(shape, 1, 0))
    sym = np.real(sym)
    sym.reshape(-1)[0] = 1.0
    M = _fft_preconditioner(sym, shape)
    x0 = None
    if seed is not None:
        x0 = 0.1 * np.random.default_rng(seed).standard_normal(size)
        x0 -= x0.mean()
    v, res, its = _gmres(A, rhs.ravel(), M, tol, maxiter, x0)
    f0 = 1.0 + v.reshape(shape)
    f0 /= np.mean(f0)
    if np.min(f0) <= 0:
        raise SolverError("Gauduchon weight is not positive (sign-indefinite kernel vector)")
    return EllipticSolve(rhs, f0, res, its, tol, {"grid": pg.shape, "stencil": pg.stencil})


def gauduchon_weight(metric, grid=None, tol: float = 1e-12, seed: Optional[int] = None):
    """Positive weight f₀ (mean 1) with ∂∂̄(f₀ ω) = 0, as a reduced grid array."""
    return gauduchon_solve(metric, grid, tol, seed=seed).solution


# ---------------------------------------------------------------------------
# prescribed Chern scalar

@dataclass
class PositiveScalarCertificate:
    """Outcome of the prescribed-scalar construction ω̃ = f^{1/n} ω_G.

    ``c`` is ∫s_G ω_G^n / ∫ω_G^n, ``f`` the positive conformal factor,
    ``max_deviation`` the sup of |s̃ f^{1/n} - c| relative to ``scale``
    (floored) and ``sign_ok`` whether sign(min s̃) = sign(c) with values
    inside the zero band counted as zero.
    """

    c: float
    f: np.ndarray
    min_s_tilde: float
    max_deviation: float
    scale: float
    sign_ok: bool
    s_tilde: np.ndarray
    solve: EllipticSolve

    def as_dict(self) -> dict:
        return {"c": self.c, "min_f": float(np.min(self.f)), "max_f": float(np.max(self.f)),
                "min_s_tilde": self.min_s_tilde, "max_deviation": self.max_deviation,
                "scale": self.scale, "sign_ok": self.sign_ok,
                "residual_norm": self.solve.residual_norm, "iterations": self.solve.iterations}


def banded_sign(x: float, band: float) -> int:
    return 0 if abs(x) <= band else int(np.sign(x))


def prescribed_scalar(metric, grid=None, tol: float = 1e-12, gauduchon_tol: float = 1e-6,
                      certificate_tol: float = 1e-5, maxiter: int = 1000,
                      scale_floor: float = 1e-8, sign_band: float = 1e-6
                      ) -> PositiveScalarCertificate:
    """Conformal rescaling of a Gauduchon surface metric to Chern scalar f^{-1/n} c.

    Solves g^{ij̄} ∂_i∂_j̄ f' = s_G - c for mean-zero f', shifts it so that
    min f' = 0, sets f = exp(f') and recomputes the Chern scalar s̃ of
    ω̃ = f^{1/n} ω_G from grid values.

    The deviation is measured relative to max(|c|, max |s_G|, scale_floor);
    the floor keeps roundoff-level curvature (a flat Gauduchon metric) from
    being divided by itself.  Signs of c and min s̃ treat
    |x| <= max(sign_band, certificate_tol · scale) as zero.
    """
    gm = _grid_metric(metric, grid)
    n = gm.dim
    res_g = float(np.max(np.abs(gm.gauduchon_density)))
    if res_g > gauduchon_tol:
        raise ValueError(f"input metric is not Gauduchon (residual {res_g:.3e})")
    pg = gm.grid
    shape = gm.shape
    size = int(np.prod(shape))
    vol = np.broadcast_to(gm.volume, shape)
    sG = np.broadcast_to(gm.s, shape)
    c = float(np.sum(sG * vol) / np.sum(vol))
    scale = max(abs(c), float(np.max(np.abs(sG))))
    rhs = sG - c
    ginv = np.broadcast_to(gm.ginv, shape + (n, n))

    def Lp(v):
        v = v.reshape(shape)
        out = 0.0
        for i in range(n):
            for j in range(n):
                out = out + ginv[..., i, j] * pg.ddbar(v, i, j)
        return np.real(out)

    if scale == 0.0 or size == 1:
        fprime = np.zeros(shape)
        solve = EllipticSolve(rhs, fprime, 0.0, 0, tol)
    else:
        A = LinearOperator((size, size), matvec=lambda v: Lp(v).ravel() + np.mean(v),
                           dtype=float)
        gi = np.mean(ginv, axis=pg.grid_axes())
        sym = sum(gi[i, j] * pg.ddbar_symbol(shape, i, j) for i in range(n) for j in range(n))
        sym = np.real(sym)
        sym.reshape(-1)[0] = 1.0
        v, res, its = _gmres(A, rhs.ravel(), _fft_preconditioner(sym, shape), tol, maxiter, None)
        solve = EllipticSolve(rhs, v.reshape(shape), res, its, tol)
        fprime = solve.solution
    fprime = fprime - np.min(fprime)
    f = np.exp(fprime)
    root = f ** (1.0 / n)
    tilde = GridMetric.from_values(root[..., None, None] * gm.g, pg)
    s_tilde = np.broadcast_to(tilde.s, shape)
    product = s_tilde * root
    denom = max(scale, scale_floor)
    dev = float(np.max(np.abs(product - c))) / denom
    # values within the certificate's own accuracy are indistinguishable from zero
    band = max(sign_band, certificate_tol * denom)
    min_s = float(np.min(s_tilde))
    sign_ok = banded_sign(min_s, band) == banded_sign(c, band)
    cert = PositiveScalarCertificate(c, f, min_s, dev, scale, sign_ok, s_tilde, solve)
    if not np.all(f > 0):
        raise CertificateError("conformal factor is not positive")
    if dev > certificate_tol:
        raise CertificateError(f"s̃·f^(1/n) deviates from c by {dev:.3e} (relative)")
    if c > band and min_s <= 0:
        raise CertificateError("c > 0 but s̃ is not positive everywhere")
    return cert


# ---------------------------------------------------------------------------
# integral identities

def _relative(lhs, rhs, scale):
    diff = abs(lhs - rhs)
    return diff / scale if scale > 1e-12 else diff


def _l1(gm: GridMetric, density, weight=None):
    return gm.integral(np.abs(density), None if weight is None else np.abs(weight))


def total_scalar_identities(metric, f0=None, grid=None, rel_tol: float = 1e-5,
                            band: float = 1e-9) -> VerificationReport:
    """Two-sided checks of the total-scalar identities for ω and ω_G = f₀ ω (n = 2).

    Left sides are computed on ω_G from grid values of f₀·g; right sides on
    ω from its exact jets, weighted by f₀.  Residuals are relative to the L1
    size of the integrands (absolute when that is below 1e-12).
    """
    base = _grid_metric(metric, grid)
    if base.dim != 2:
        raise ValueError("the total-scalar identities are checked for n = 2")
    if f0 is None:
        f0 = gauduchon_weight(base)
    f0 = _lift(f0, base.grid.naxes, 0)
    G = base.scaled(f0)
    rep = VerificationReport("conformal")

    def rec(name, lhs, rhs, scale, note=""):
        rep.add(CheckRecord(name, lhs, rhs, _relative(lhs, rhs, scale), rel_tol, note))

    # ∫ŝ = ∫s - ‖∂̄*ω‖² on ω itself
    a = base.integral(base.s_hat)
    b = base.integral(base.s) - base.integral(base.dbar_star_norm2)
    rec("integral_s_hat_vs_s_minus_norm", a, b,
        _l1(base, base.s_hat) + _l1(base, base.s) + _l1(base, base.dbar_star_norm2))

    lhs_s = G.integral(G.s)
    rhs_s = base.integral(base.s, f0)
    rec("total_scalar_weighted", lhs_s, rhs_s, max(_l1(G, G.s), _l1(base, base.s, f0)))

    lhs_p = G.integral(G.pairing)
    rhs_p = base.integral(base.pairing, f0)
    rec("total_pairing_weighted", lhs_p, rhs_p,
        max(_l1(G, G.pairing), _l1(base, base.pairing, f0)))

    lhs_h = G.integral(G.s_hat)
    rhs_h = base.integral(base.s_hat, f0)
    rec("total_s_hat_weighted", lhs_h, rhs_h, max(_l1(G, G.s_hat), _l1(base, base.s_hat, f0)))

    sum_s = base.s + base.s_hat
    norm_G = G.integral(G.dbar_star_norm2)
    rhs_c = 0.5 * base.integral(sum_s, f0) + 0.5 * norm_G
    rec("total_scalar_combined", lhs_s, rhs_c,
        max(_l1(G, G.s), 0.5 * _l1(base, sum_s, f0) + 0.5 * norm_G))

    quasi = bool(np.min(sum_s) >= -band and np.max(sum_s) > band)
    ok = (lhs_s > 0) if quasi else True
    rep.add(CheckRecord("quasi_positive_implies_positive_total", float(np.min(sum_s)), lhs_s,
                        0.0 if ok else 1.0, 0.5,
                        "s+ŝ quasi-positive" if quasi else "s+ŝ not quasi-positive: vacuous"))
    rep.environment.update({"grid": list(base.grid.shape), "stencil": base.grid.stencil})
    return rep


def torus_example_check(u: Optional[TrigPolynomial] = None, torus: Optional[TorusDomain] = None,
                        rel_tol: float = 1e-5, stencil: str = "spectral") -> VerificationReport:
    """Total Chern scalar of e^u ω_flat against 2∫e^u |∂u|² dx on a flat unit 2-torus.

    The left side differentiates grid values of e^u; the right side uses the
    exact gradient of the trigonometric polynomial u.  In the volume
    convention of :mod:`hermgeom.quadrature` the right side equals
    4∫√-1 ∂u ∧ ∂̄u ∧ e^u ω.
    """
    from .manifolds import default_conformal_factor
    u = u if u is not None else default_conformal_factor()
    torus = torus or TorusDomain(u.dim, grid=64)
    pg = PeriodicGrid(torus, stencil)
    uval, du, _ = u.real_jets(pg.coords())
    uval = _lift(uval, pg.naxes, 0)
    du = _lift(du, pg.naxes, 1)
    eu = np.exp(uval)
    G = GridMetric.from_values(eu[..., None, None] * np.eye(u.dim), pg)
    q = GridQuadrature(torus)
    lhs = G.integral(G.s)
    rhs = 2.0 * q.integrate(eu * np.sum(np.abs(du) ** 2, axis=-1))
    rep = VerificationReport("conformal")
    rep.add(CheckRecord("total_scalar_vs_gradient_energy", lhs, rhs,
                        _relative(lhs, rhs, abs(rhs)), rel_tol))
    rep.add(CheckRecord("total_scalar_positive", lhs, 0.0, 0.0 if min(lhs, rhs) > 0 else 1.0,
                        0.5, "both sides strictly positive"))
    rep.environment.update({"grid": list(torus.grid), "stencil": stencil})
    return rep
