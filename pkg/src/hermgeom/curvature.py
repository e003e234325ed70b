"""Chern-connection curvature of Hermitian metrics given in a chart.

All tensors use 0-based indices and the layouts below (leading batch axes are
allowed everywhere):

    R[i, j, k, l]  = R_{i j̄ k l̄}
    T[i, j, k]     = T_{ij}^k
    ginv[p, q]     = g^{p q̄},  so that  g^{p q̄} g_{r q̄} = δ^p_r

The core routines take metric jets ``(g, dg, ddg)`` so the same formulas serve
the pointwise path (jets from :func:`hermgeom.calculus.metric_jets`) and the
torus-grid path (jets from spectral differentiation).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.stats import norm, qmc

from .calculus import (DerivativeSpec, MatrixField, ScalarField, as_chart_point, fd_wirtinger,
                       metric_jets, scalar_hessian)
from .errors import DomainError, InconsistentEvaluatorError, NumericalError

REAL_TOL = 1e-10      # analytic derivatives: imaginary parts are pure roundoff
FD_REAL_TOL = 1e-6    # finite differences: truncation error leaks into imaginary parts


def _real_tol(metric, spec: Optional[DerivativeSpec]) -> float:
    analytic = spec.scheme == "analytic" if spec is not None else metric.has_analytic
    return REAL_TOL if analytic else FD_REAL_TOL


# ---------------------------------------------------------------------------
# jet-level formulas

def inverse_metric(g: np.ndarray) -> np.ndarray:
    """``ginv[p, q] = g^{p q̄}``."""
    return np.swapaxes(np.linalg.inv(g), -1, -2)


def conj_derivative(dg: np.ndarray) -> np.ndarray:
    """``[a, i, j] = ∂_ā g_{i j̄}`` from ``dg``, using that g is Hermitian."""
    return np.conj(np.swapaxes(dg, -1, -2))


def curvature_from_jets(g, dg, ddg, ginv=None) -> np.ndarray:
    """R_{ij̄kl̄} = -∂_i∂_j̄ g_{kl̄} + g^{pq̄} ∂_i g_{kq̄} ∂_j̄ g_{pl̄}."""
    if ginv is None:
        ginv = inverse_metric(g)
    quad = np.einsum("...pq,...ikq,...jpl->...ijkl", ginv, dg, conj_derivative(dg),
                     optimize=True)
    return quad - ddg


def ricci_from_curvature(R, ginv) -> np.ndarray:
    return np.einsum("...kl,...ijkl->...ij", ginv, R)


def scalars_from_curvature(R, ginv):
    """Complex ``(s, ŝ)`` with s = g^{ij̄} g^{kl̄} R_{ij̄kl̄}, ŝ = g^{il̄} g^{kj̄} R_{ij̄kl̄}."""
    s = np.einsum("...ij,...kl,...ijkl->...", ginv, ginv, R, optimize=True)
    s_hat = np.einsum("...il,...kj,...ijkl->...", ginv, ginv, R, optimize=True)
    return s, s_hat


def torsion_from_jets(g, dg, ginv=None) -> np.ndarray:
    """T_{ij}^k = g^{kl̄} (∂_i g_{jl̄} - ∂_j g_{il̄})."""
    if ginv is None:
        ginv = inverse_metric(g)
    anti = dg - np.swapaxes(dg, -3, -2)
    return np.einsum("...kl,...ijl->...ijk", ginv, anti)


def torsion_trace(T: np.ndarray) -> np.ndarray:
    """τ_i = T_{ki}^k."""
    return np.einsum("...kik->...i", T)


def real_part(x, name: str, tol: float = REAL_TOL):
    """Return Re(x) after checking that the imaginary part is negligible."""
    x = np.asarray(x)
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"{name} is not finite")
    bound = tol * np.maximum(1.0, np.abs(x))
    if np.any(np.abs(x.imag) > bound):
        worst = float(np.max(np.abs(x.imag)))
        raise NumericalError(f"{name} has imaginary residue {worst:.3e}")
    return x.real


# ---------------------------------------------------------------------------
# value types

@dataclass(frozen=True)
class CurvatureTensor:
    """R_{ij̄kl̄} as an array ``entries[..., i, j, k, l]``."""

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[-1]

    def conjugate_symmetry_residual(self) -> float:
        """max |R_{ij̄kl̄} - conj(R_{jīlk̄})|."""
        R = self.entries
        flipped = np.conj(np.swapaxes(np.swapaxes(R, -4, -3), -2, -1))
        return float(np.max(np.abs(R - flipped)))

    def kahler_symmetry_residual(self) -> float:
        """max of |R_{ij̄kl̄} - R_{kj̄il̄}| and |R_{ij̄kl̄} - R_{il̄kj̄}|."""
        R = self.entries
        return float(max(np.max(np.abs(R - np.swapaxes(R, -4, -2))),
                         np.max(np.abs(R - np.swapaxes(R, -3, -1)))))

    def quartic_form(self, W) -> np.ndarray:
        """Unnormalized R(W, W̄, W, W̄); ``W`` may carry batch axes."""
        W = np.asarray(W, dtype=complex)
        Wb = np.conj(W)
        return np.einsum("...ijkl,...i,...j,...k,...l->...", self.entries, W, Wb, W, Wb,
                         optimize=True)


@dataclass(frozen=True)
class TorsionTensor:
    """T_{ij}^k as ``entries[..., i, j, k]``."""

    entries: np.ndarray

    def antisymmetry_residual(self) -> float:
        T = self.entries
        return float(np.max(np.abs(T + np.swapaxes(T, -3, -2))))

    def trace(self) -> np.ndarray:
        return torsion_trace(self.entries)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.entries) ** 2)))


@dataclass(frozen=True)
class HscSample:
    direction: np.ndarray
    value: float


@dataclass
class CurvaturePointReport:
    point: np.ndarray
    metric: np.ndarray
    curvature: CurvatureTensor
    ricci: np.ndarray
    ricci_logdet: np.ndarray
    s: float
    s_hat: float
    torsion: TorsionTensor
    dbar_star_form: np.ndarray
    h_min: float
    h_max: float
    identity_residuals: dict = field(default_factory=dict)


class ExtremalHsc(NamedTuple):
    h_max: float
    w_max: np.ndarray
    h_min: float
    w_min: np.ndarray
    converged: bool


# ---------------------------------------------------------------------------
# pointwise operations

def chern_curvature(metric: MatrixField, p, spec: Optional[DerivativeSpec] = None
                    ) -> CurvatureTensor:
    """Chern curvature tensor of ``metric`` at ``p``."""
    g, dg, ddg = metric_jets(metric, p, spec)
    return CurvatureTensor(curvature_from_jets(g, dg, ddg))


def chern_ricci(metric: MatrixField, p, spec: Optional[DerivativeSpec] = None,
                method: str = "trace") -> np.ndarray:
    """Chern-Ricci form R_{ij̄}.

    ``trace`` contracts the curvature tensor with g^{kl̄}; ``logdet``
    differentiates log det g twice, independently of the curvature tensor.
    """
    p = as_chart_point(p, metric.dim)
    if method == "trace":
        g, dg, ddg = metric_jets(metric, p, spec)
        ginv = inverse_metric(g)
        return ricci_from_curvature(curvature_from_jets(g, dg, ddg, ginv), ginv)
    if method == "logdet":
        metric_jets(metric, p, spec)  # domain and positivity checks
        logdet = ScalarField(lambda z: np.log(np.linalg.det(metric.value(z)).real),
                             metric.dim, domain=metric.domain, name=f"logdet {metric.name}")
        fd = DerivativeSpec("central-difference", spec.step if spec else None,
                            spec.richardson_levels if spec else 1,
                            spec.second_step if spec else None)
        return -scalar_hessian(logdet, p, fd)
    raise ValueError(f"unknown Ricci method {method!r}")


def scalar_curvatures(metric: MatrixField, p, spec: Optional[DerivativeSpec] = None):
    """Chern scalar curvatures ``(s, ŝ)`` at ``p``."""
    g, dg, ddg = metric_jets(metric, p, spec)
    ginv = inverse_metric(g)
    s, s_hat = scalars_from_curvature(curvature_from_jets(g, dg, ddg, ginv), ginv)
    tol = _real_tol(metric, spec)
    return real_part(s, "s", tol), real_part(s_hat, "s_hat", tol)


def torsion(metric: MatrixField, p, spec: Optional[DerivativeSpec] = None) -> TorsionTensor:
    g, dg, _ = metric_jets(metric, p, spec)
    return TorsionTensor(torsion_from_jets(g, dg))


def dbar_star_omega(metric: MatrixField, p, spec: Optional[DerivativeSpec] = None
                    ) -> np.ndarray:
    """Coefficients of ∂̄*ω = -√-1 T_{ki}^k dzⁱ."""
    return -1j * torsion(metric, p, spec).trace()


def _first_jets(metric: MatrixField, spec: DerivativeSpec) -> Callable:
    """z -> τ(z), the torsion trace from value and first derivatives only."""
    def tau(z):
        g = metric.value(z)
        if spec.scheme == "analytic" and metric.d1 is not None:
            dg = metric.d1(z)
        else:
            dg = fd_wirtinger(metric.value, z, spec.first_step(z), spec.richardson_levels)
        return torsion_trace(torsion_from_jets(g, dg))
    return tau


def dbar_dbar_star_pairing(metric: MatrixField, p, spec: Optional[DerivativeSpec] = None):
    """⟨∂̄∂̄*ω, ω⟩ = g^{ij̄} ∂τ_i/∂z̄ʲ, differentiating τ numerically."""
    p = as_chart_point(p, metric.dim)
    g, _, _ = metric_jets(metric, p, spec)
    if spec is None:
        spec = DerivativeSpec("analytic" if metric.has_analytic else "central-difference")
    dtau = fd_wirtinger(_first_jets(metric, spec), p, spec.first_step(p),
                        spec.richardson_levels, conjugate=True)  # [b, i] = ∂_b̄ τ_i
    return np.einsum("...ij,...ji->...", inverse_metric(g), dtau)


def identity_s_hat(metric: MatrixField, p, spec: Optional[DerivativeSpec] = None):
    """Residual of s = ŝ + ⟨∂̄∂̄*ω, ω⟩ at ``p``.

    Returns |s - ŝ - Re P| + |Im P| where P is the pairing computed by
    :func:`dbar_dbar_star_pairing`.
    """
    s, s_hat = scalar_curvatures(metric, p, spec)
    pairing = dbar_dbar_star_pairing(metric, p, spec)
    res = np.abs(s - s_hat - pairing.real) + np.abs(pairing.imag)
    return float(res) if np.ndim(res) == 0 else res


def metric_norm_sq(g, W) -> np.ndarray:
    """|W|²_g = g_{ij̄} Wⁱ conj(Wʲ)."""
    return np.einsum("...ij,...i,...j->...", g, W, np.conj(W)).real


def hsc_values(R: np.ndarray, g: np.ndarray, W: np.ndarray, tol: float = REAL_TOL) -> np.ndarray:
    """Normalized H(W) = R(W,W̄,W,W̄)/|W|⁴_g for precomputed R and g (broadcasting)."""
    W = np.asarray(W, dtype=complex)
    q = CurvatureTensor(R).quartic_form(W)
    return real_part(q, "holomorphic sectional curvature", tol) / metric_norm_sq(g, W) ** 2


def hsc(metric: MatrixField, p, W, spec: Optional[DerivativeSpec] = None):
    """Holomorphic sectional curvature of the direction ``W`` at ``p``."""
    W = np.asarray(W, dtype=complex)
    if np.any(np.all(W == 0, axis=-1)):
        raise DomainError("holomorphic sectional curvature of the zero vector")
    g, dg, ddg = metric_jets(metric, p, spec)
    return hsc_values(curvature_from_jets(g, dg, ddg), g, W, _real_tol(metric, spec))


def orthonormal_frame(g: np.ndarray) -> np.ndarray:
    """Matrix M with columns a g-orthonormal basis: W = M ξ has |W|_g = |ξ|."""
    L = np.linalg.cholesky(g)
    return np.swapaxes(np.linalg.inv(L), -1, -2)


def frame_curvature(R: np.ndarray, M: np.ndarray) -> np.ndarray:
    """R expressed in the frame ``M``; with an orthonormal frame g becomes δ."""
    Mb = np.conj(M)
    return np.einsum("ijkl,ia,jb,kc,ld->abcd", R, M, Mb, M, Mb, optimize=True)


def _sphere_starts(n: int, count: int, seed) -> np.ndarray:
    u = qmc.Halton(d=2 * n, scramble=True, seed=seed).random(count)
    x = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    xi = x[:, :n] + 1j * x[:, n:]
    return xi / np.linalg.norm(xi, axis=1, keepdims=True)


def _quartic(Rp, xi):
    xb = np.conj(xi)
    return np.einsum("ijkl,i,j,k,l->", Rp, xi, xb, xi, xb).real


def _quartic_grad(Rp, xi):
    """Real gradient of ξ -> R(ξ,ξ̄,ξ,ξ̄), encoded as a complex vector (2 ∂/∂ξ̄)."""
    xb = np.conj(xi)
    d = (np.einsum("imkl,i,k,l->m", Rp, xi, xi, xb)
         + np.einsum("ijkm,i,j,k->m", Rp, xi, xb, xi))
    return 2.0 * d


def _climb(Rp, xi, sign, max_iter, gtol):
    """Projected gradient ascent of sign·H on the unit sphere with backtracking."""
    val = sign * _quartic(Rp, xi)
    scale = max(1.0, float(np.max(np.abs(Rp))))
    t = 0.25 / scale
    for _ in range(max_iter):
        G = sign * _quartic_grad(Rp, xi)
        G = G - np.real(np.vdot(xi, G)) * xi
        gn2 = float(np.real(np.vdot(G, G)))
        if np.sqrt(gn2) <= gtol * scale:
            return xi, sign * val, True
        while True:
            cand = xi + t * G
            cand /= np.linalg.norm(cand)
            cval = sign * _quartic(Rp, cand)
            if cval >= val + 0.3 * t * gn2:
                xi, val = cand, cval
                t = min(2.0 * t, 1.0 / scale)
                break
            t *= 0.5
            if t < 1e-18:
                # line search stalls at the roundoff floor, where |grad| ~ sqrt(eps)
                return xi, sign * val, bool(np.sqrt(gn2) <= 1e-6 * scale)
    G = sign * _quartic_grad(Rp, xi)
    G = G - np.real(np.vdot(xi, G)) * xi
    return xi, sign * val, bool(np.linalg.norm(G) <= 1e-6 * scale)


def extremal_hsc(metric: MatrixField, p, spec: Optional[DerivativeSpec] = None,
                 restarts: int = 8, seed=0, max_iter: int = 500, gtol: float = 1e-10
                 ) -> ExtremalHsc:
    """Largest and smallest holomorphic sectional curvature at ``p``.

    Multi-start projected gradient ascent/descent over the unit g-sphere,
    started from a scrambled Halton set.  Directions are returned as g-unit
    vectors in chart coordinates.  ``converged`` is False if any restart hit
    the iteration cap before becoming stationary.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    g, dg, ddg = metric_jets(metric, p, spec)
    if g.ndim != 2:
        raise ValueError("extremal_hsc works on a single point")
    M = orthonormal_frame(g)
    Rp = frame_curvature(curvature_from_jets(g, dg, ddg), M)
    starts = _sphere_starts(metric.dim, restarts, seed)
    best = {}
    converged = True
    for sign in (1.0, -1.0):
        found = None
        for xi0 in starts:
            xi, val, ok = _climb(Rp, xi0, sign, max_iter, gtol)
            converged &= ok
            # ties within 1e-9 keep the first found
            if found is None or sign * val > sign * found[1] + 1e-9:
                found = (xi, val)
        best[sign] = found
    (xmax, hmax), (xmin, hmin) = best[1.0], best[-1.0]
    return ExtremalHsc(float(hmax), M @ xmax, float(hmin), M @ xmin, bool(converged))


def sample_hsc(metric: MatrixField, p, W, spec: Optional[DerivativeSpec] = None) -> HscSample:
    """Normalize ``W`` to unit g-length and evaluate H on it."""
    g, _, _ = metric_jets(metric, p, spec)
    W = np.asarray(W, dtype=complex)
    W = W / np.sqrt(metric_norm_sq(g, W))
    return HscSample(W, float(hsc(metric, p, W, spec)))


# ---------------------------------------------------------------------------
# polarization

_ROOTS = np.array([1.0, 1j, -1.0, -1j])
_COMBOS = np.array(np.meshgrid(_ROOTS, _ROOTS, _ROOTS, _ROOTS, indexing="ij")).reshape(4, -1).T
# weight of each sample when extracting the c1 c̄2 c3 c̄4 coefficient; the
# coefficient equals 4 R_{ij̄kl̄} under Kähler symmetry
_WEIGHTS = np.conj(_COMBOS[:, 0]) * _COMBOS[:, 1] * np.conj(_COMBOS[:, 2]) * _COMBOS[:, 3]


def quartic_form(R: CurvatureTensor) -> Callable[[np.ndarray], float]:
    """Evaluator W -> R(W, W̄, W, W̄) (unnormalized, real part)."""
    return lambda W: float(np.real(R.quartic_form(W)))


def polarize_kahler(h_evaluator: Callable[[np.ndarray], float], dim: int, tol: float = 1e-8,
                    checks: int = 8, seed: int = 0) -> CurvatureTensor:
    """Recover the Kähler-symmetric tensor whose quartic form is ``h_evaluator``.

    For each index tuple (i, j, k, l), Q is sampled on
    W = c₁eᵢ + c₂eⱼ + c₃eₖ + c₄eₗ with every cₛ a fourth root of unity; the
    c₁c̄₂c₃c̄₄ coefficient is the average of Q·c̄₁c₂c̄₃c₄ over the 256 samples
    (no other monomial of bidegree (2, 2) aliases onto it) and equals
    4 R_{ij̄kl̄}.  The result is re-evaluated at seeded random directions and
    :class:`InconsistentEvaluatorError` is raised if it does not reproduce
    the evaluator to ``tol`` (relative to the sampled magnitude).
    """
    n = int(dim)
    basis = np.eye(n, dtype=complex)
    R = np.zeros((n, n, n, n), dtype=complex)
    cache = {}
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    key = (i, j, k, l)
                    vectors = _COMBOS @ basis[list(key)]
                    vals = np.array([_cached(cache, h_evaluator, w) for w in vectors])
                    R[key] = np.mean(vals * _WEIGHTS) / 4.0
    tensor = CurvatureTensor(R)
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((checks, n)) + 1j * rng.standard_normal((checks, n))
    expected = np.array([h_evaluator(w) for w in W])
    got = np.real(tensor.quartic_form(W))
    scale = max(1.0, float(np.max(np.abs(expected))))
    if np.max(np.abs(got - expected)) > tol * scale:
        raise InconsistentEvaluatorError(
            "evaluator is not the quartic form of a Kähler-symmetric tensor "
            f"(mismatch {np.max(np.abs(got - expected)):.3e})")
    return tensor


def _cached(cache, fn, w):
    key = tuple(np.round(w, 14))
    if key not in cache:
        cache[key] = fn(w)
    return cache[key]


# ---------------------------------------------------------------------------
# report

def point_report(metric: MatrixField, p, spec: Optional[DerivativeSpec] = None,
                 restarts: int = 8, seed=0) -> CurvaturePointReport:
    """Every pointwise curvature quantity at a single point."""
    p = as_chart_point(p, metric.dim)
    g, dg, ddg = metric_jets(metric, p, spec)
    ginv = inverse_metric(g)
    R = curvature_from_jets(g, dg, ddg, ginv)
    ric = ricci_from_curvature(R, ginv)
    ric_ld = chern_ricci(metric, p, spec, method="logdet")
    s, s_hat = scalars_from_curvature(R, ginv)
    T = TorsionTensor(torsion_from_jets(g, dg, ginv))
    ext = extremal_hsc(metric, p, spec, restarts=restarts, seed=seed)
    tensor = CurvatureTensor(R)
    return CurvaturePointReport(
        point=p, metric=g, curvature=tensor, ricci=ric, ricci_logdet=ric_ld,
        s=float(real_part(s, "s", _real_tol(metric, spec))),
        s_hat=float(real_part(s_hat, "s_hat", _real_tol(metric, spec))),
        torsion=T, dbar_star_form=-1j * T.trace(), h_min=ext.h_min, h_max=ext.h_max,
        identity_residuals={
            "s_minus_s_hat_pairing": identity_s_hat(metric, p, spec),
            "ricci_trace_vs_logdet": float(np.max(np.abs(ric - ric_ld))),
            "conjugate_symmetry": tensor.conjugate_symmetry_residual(),
            "torsion_antisymmetry": T.antisymmetry_residual(),
        })
