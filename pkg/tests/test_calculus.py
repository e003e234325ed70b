import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hermgeom.calculus import (FD_SPEC, DerivativeSpec, MatrixField, ScalarField,
                               as_chart_point, derivative_self_check, metric_jets,
                               scalar_hessian, wirtinger_first, wirtinger_second)
from hermgeom.errors import DerivativeError, DomainError, NotPositiveDefiniteError
from hermgeom.manifolds import conformal_torus, flat_torus, fubini_study

coord = st.floats(-1.5, 1.5)


def norm2(z):
    return np.sum(np.abs(z) ** 2, axis=-1)


def test_abs_squared_first_derivative():
    f = ScalarField(norm2, 1)
    p = np.array([0.3 - 0.7j])
    assert wirtinger_first(f, p, 0, FD_SPEC) == pytest.approx(np.conj(p[0]), abs=1e-10)


def test_real_part_derivative_is_half():
    f = ScalarField(lambda z: z[..., 0].real, 2)
    assert wirtinger_first(f, [0.4 + 0.1j, 2j], 0, FD_SPEC) == pytest.approx(0.5, abs=1e-11)
    assert wirtinger_first(f, [0.4 + 0.1j, 2j], 1, FD_SPEC) == pytest.approx(0.0, abs=1e-11)


def test_inverse_square_mixed_derivative_at_origin():
    # (1 + z z̄)^-2: ∂_z̄ = -2z(1+zz̄)^-3, then ∂_z at 0 gives -2
    f = ScalarField(lambda z: (1 + norm2(z)) ** -2.0, 1)
    assert wirtinger_second(f, [0.0], 0, 0, FD_SPEC).real == pytest.approx(-2.0, abs=1e-6)


def test_log_potential_mixed_derivative_at_origin():
    f = ScalarField(lambda z: np.log1p(norm2(z)), 1)
    assert wirtinger_second(f, [0.0], 0, 0, FD_SPEC) == pytest.approx(1.0, abs=1e-6)


def test_constant_and_quadratic_hessians():
    const = ScalarField(lambda z: np.full(z.shape[:-1], 3.0), 2)
    np.testing.assert_allclose(scalar_hessian(const, [0.2, 1j], FD_SPEC), 0, atol=1e-9)
    quad = ScalarField(lambda z: np.abs(z[..., 0]) ** 2, 2)
    np.testing.assert_allclose(scalar_hessian(quad, [0.2, 1j], FD_SPEC),
                               [[1, 0], [0, 0]], atol=1e-8)


def test_self_check_examples():
    p = np.array([0.31 + 0.12j, -0.4 + 0.25j])
    assert derivative_self_check(flat_torus(), p) <= 1e-12
    spec2 = DerivativeSpec("central-difference", richardson_levels=2)
    assert derivative_self_check(fubini_study(2), p, spec2) <= 1e-8
    assert derivative_self_check(conformal_torus(), p) <= 1e-8


def test_errors():
    f = ScalarField(norm2, 2, domain=lambda z: norm2(z) < 1)
    with pytest.raises(DomainError):
        wirtinger_first(f, [0.9, 0.9], 0)
    with pytest.raises(DomainError):
        wirtinger_first(f, [0.1, 0.1], 2)
    with pytest.raises(DomainError):
        as_chart_point([np.nan, 0])
    with pytest.raises(DerivativeError):
        DerivativeSpec("central-difference", step=0.0)
    with pytest.raises(DerivativeError):
        wirtinger_first(f, [0.1, 0.1], 0, DerivativeSpec("central-difference", step=1e-18))
    with pytest.raises(DerivativeError):
        wirtinger_first(f, [0.1, 0.1], 0, DerivativeSpec("analytic"))
    bad = MatrixField(lambda z: np.array([[1.0, 0], [0, -1.0]]), 2)
    with pytest.raises(NotPositiveDefiniteError):
        metric_jets(bad, [0, 0], FD_SPEC)


@settings(max_examples=30, deadline=None)
@given(coord, coord, coord, coord)
def test_conjugation_symmetry(a, b, c, d):
    p = np.array([a + 1j * b, c + 1j * d])

    def f(z):
        return z[..., 0] ** 2 * np.conj(z[..., 1]) + np.exp(0.3 * z[..., 1])

    fc = ScalarField(lambda z: np.conj(f(z)), 2, real=False)
    fs = ScalarField(f, 2, real=False)
    for i in range(2):
        lhs = wirtinger_first(fc, p, i, FD_SPEC)
        rhs = np.conj(wirtinger_first(fs, p, i, FD_SPEC, conjugate=True))
        assert abs(lhs - rhs) <= 1e-8 * (1 + abs(lhs))


@settings(max_examples=30, deadline=None)
@given(coord, coord, coord, coord)
def test_real_field_hessian_is_hermitian(a, b, c, d):
    p = np.array([a + 1j * b, c + 1j * d])
    f = ScalarField(lambda z: np.cos(z[..., 0].real * z[..., 1].imag) + norm2(z) ** 2, 2)
    H = scalar_hessian(f, p, FD_SPEC)
    assert np.max(np.abs(H - H.conj().T)) <= 1e-6 * (1 + np.max(np.abs(H)))


def _fd_error(levels, h):
    f = ScalarField(lambda z: np.exp(z[..., 0].real) * np.sin(z[..., 0].imag), 1)
    p = np.array([0.3 + 0.4j])
    exact = 0.5 * np.exp(0.3) * (np.sin(0.4) - 1j * np.cos(0.4))
    spec = DerivativeSpec("central-difference", step=h, richardson_levels=levels)
    return abs(wirtinger_first(f, p, 0, spec) - exact)


def test_convergence_orders():
    e1, e2 = _fd_error(0, 0.1), _fd_error(0, 0.05)
    assert np.log2(e1 / e2) >= 1.9
    r1, r2 = _fd_error(1, 0.2), _fd_error(1, 0.1)
    assert np.log2(r1 / r2) >= 3.8


def test_batched_evaluation_matches_pointwise(rng):
    fs = fubini_study(2)
    pts = 0.5 * (rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2)))
    gb, dgb, ddgb = metric_jets(fs, pts)
    for k in range(3):
        g, dg, ddg = metric_jets(fs, pts[k])
        np.testing.assert_allclose(gb[k], g, atol=1e-15)
        np.testing.assert_allclose(ddgb[k], ddg, atol=1e-15)
