import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import i0, i1

from hermgeom.conformal import (GridMetric, banded_sign, conformal_metric,
                                dbar_star_conformal_check, gauduchon_residual, gauduchon_solve,
                                gauduchon_weight, log_field, prescribed_scalar,
                                total_scalar_identities, torus_example_check)
from hermgeom.errors import DomainError
from hermgeom.manifolds import (TorusDomain, TrigPolynomial, conformal_torus,
                                default_conformal_factor, flat_torus, fubini_study, hopf_surface,
                                perturbed_torus, random_points, SamplePlan)
from hermgeom.spectral import PeriodicGrid

# 2∫e^u|∂u|² for u = 0.3 cos 2πx¹ + 0.2 sin 2πy², by separation of variables and
# ∫ sin²θ e^{a cos θ} dθ/2π = I1(a)/a.
TORUS_EXAMPLE = 0.5 * ((0.6 * np.pi) ** 2 * i1(0.3) * i0(0.2) / 0.3
                       + (0.4 * np.pi) ** 2 * i0(0.3) * i1(0.2) / 0.2)


def test_torus_example_closed_form():
    rep = torus_example_check()
    rec = rep["total_scalar_vs_gradient_energy"]
    assert rep.passed
    assert rec.lhs == pytest.approx(TORUS_EXAMPLE, rel=1e-12)
    assert rec.rhs == pytest.approx(TORUS_EXAMPLE, rel=1e-12)
    assert TORUS_EXAMPLE == pytest.approx(1.3130392076644, abs=1e-12)


def test_torus_example_fd2_converges():
    errs = [abs(torus_example_check(torus=TorusDomain(2, grid=N), stencil="fd2")
                ["total_scalar_vs_gradient_energy"].lhs - TORUS_EXAMPLE) for N in (16, 32)]
    assert errs[1] < errs[0] / 3


def test_grid_scalar_of_conformal_flat():
    # s(e^u ω_flat) = -2 e^{-u} Σ_a ∂_a∂_ā u = -(1/2) e^{-u} Δu for n = 2
    u = default_conformal_factor()
    dom = TorusDomain(2, grid=32)
    gm = GridMetric.from_metric(conformal_torus(u), dom)
    X = dom.coords()
    lap = -(2 * np.pi) ** 2 * (0.3 * np.cos(2 * np.pi * X[0]) + 0.2 * np.sin(2 * np.pi * X[3]))
    np.testing.assert_allclose(np.broadcast_to(gm.s, dom.shape),
                               np.broadcast_to(-0.5 * np.exp(-u(X)) * lap, dom.shape), atol=1e-11)
    # τ = -∂u, so ‖∂̄*ω‖² = e^{-u} |∂u|²
    du2 = (0.3 * np.pi * np.sin(2 * np.pi * X[0])) ** 2 + (0.2 * np.pi * np.cos(2 * np.pi * X[3])) ** 2
    np.testing.assert_allclose(np.broadcast_to(gm.dbar_star_norm2, dom.shape),
                               np.broadcast_to(np.exp(-u(X)) * du2, dom.shape), atol=1e-11)


def test_gauduchon_weight_of_conformal_flat():
    f0 = gauduchon_weight(conformal_torus(), TorusDomain(2, grid=32))
    dom = TorusDomain(2, grid=32)
    expect = np.exp(-default_conformal_factor()(dom.coords())) / (i0(0.3) * i0(0.2))
    np.testing.assert_allclose(np.broadcast_to(f0, dom.shape),
                               np.broadcast_to(expect, dom.shape), atol=1e-12)


@settings(max_examples=8, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.integers(1, 2), st.integers(1, 2))
def test_gauduchon_weight_inverts_conformal_factor(a, b, k1, k2):
    u = TrigPolynomial([(a, 0.0, (k1, 0, 0, 0)), (0.0, b, (0, 1, k2, 0))], 2)
    dom = TorusDomain(2, grid=16)
    f0 = np.broadcast_to(gauduchon_weight(conformal_torus(u), dom), dom.shape)
    e = np.broadcast_to(np.exp(-u(dom.coords())), dom.shape)
    np.testing.assert_allclose(f0, e / e.mean(), atol=1e-10)
    assert f0.mean() == pytest.approx(1.0, abs=1e-12)


def test_flat_is_already_gauduchon():
    sol = gauduchon_solve(flat_torus(), TorusDomain(2, grid=8))
    assert np.all(sol.solution == 1.0)
    assert gauduchon_residual(flat_torus(), TorusDomain(2, grid=8)) == 0.0


def test_perturbed_torus_gauduchon():
    dom = TorusDomain(2, grid=16)
    m = perturbed_torus(full=True)
    assert gauduchon_residual(m, dom) > 1e-2
    sol = gauduchon_solve(m, dom)
    f0 = sol.solution
    assert np.all(f0 > 0) and np.mean(f0) == pytest.approx(1.0)
    gm = GridMetric.from_metric(m, dom).scaled(f0)
    assert gauduchon_residual(gm) <= 1e-8
    # uniqueness up to scale: a constant multiple of the metric has the same weight
    f1 = gauduchon_solve(perturbed_torus(full=True, scale=1.0), dom).solution
    np.testing.assert_allclose(f1, f0, atol=1e-12)


def test_prescribed_scalar_full_variant():
    dom = TorusDomain(2, grid=16)
    m = perturbed_torus(full=True)
    gm = GridMetric.from_metric(m, dom).scaled(gauduchon_weight(m, dom))
    cert = prescribed_scalar(gm)
    # the mean of the Chern scalar on a torus vanishes, so c = 0
    assert abs(cert.c) <= 1e-10 * cert.scale
    assert cert.max_deviation <= 1e-5 and np.all(cert.f >= 1.0)
    assert cert.sign_ok


def test_prescribed_scalar_rejects_non_gauduchon():
    with pytest.raises(ValueError):
        prescribed_scalar(perturbed_torus(full=True), TorusDomain(2, grid=8))


def test_banded_sign():
    assert banded_sign(1e-9, 1e-6) == 0 and banded_sign(-1.0, 1e-6) == -1
    assert banded_sign(2.0, 1e-6) == 1


@pytest.mark.parametrize("metric", [conformal_torus(), perturbed_torus(), perturbed_torus(full=True)])
def test_total_scalar_identities(metric):
    rep = total_scalar_identities(metric, grid=TorusDomain(2, grid=16))
    assert rep.passed, rep.summary()


def test_dbar_star_conformal_law():
    m = perturbed_torus(full=True)
    f0 = TrigPolynomial([(0.2, 0.1, (1, 0, 0, 1))], 2, constant=1.0).as_scalar_field()
    for p in random_points(m, SamplePlan(4, 6)):
        assert dbar_star_conformal_check(m, f0, p) <= 1e-6
    h = hopf_surface()
    w = log_field(TrigPolynomial([(0.1, 0.0, (1, 0, 0, 0))], 2, constant=1.0))
    assert np.all(np.isfinite(w.d1(np.array([1.0, 0.5j]))))
    assert dbar_star_conformal_check(h, f0, [1.2, 0.3j]) <= 1e-6


def test_conformal_metric_guards():
    with pytest.raises(DomainError):
        conformal_metric(flat_torus(), TrigPolynomial([], 2, constant=20.0))
    nonperiodic = TrigPolynomial([(0.1, 0.0, (1, 0, 0, 0))], 2, periods=(2.0, 1.0, 1.0, 1.0))
    with pytest.raises(DomainError):
        conformal_metric(flat_torus(), nonperiodic)
    with pytest.raises(DomainError):
        gauduchon_residual(fubini_study(2))


def test_grid_metric_from_values_matches_jets():
    dom = TorusDomain(2, grid=16)
    m = perturbed_torus(full=True)
    exact = GridMetric.from_metric(m, dom)
    G = np.broadcast_to(exact.g, dom.shape + (2, 2))
    vals = GridMetric.from_values(G, PeriodicGrid(dom))
    np.testing.assert_allclose(np.broadcast_to(vals.s, dom.shape),
                               np.broadcast_to(exact.s, dom.shape), atol=1e-9)
    np.testing.assert_allclose(np.broadcast_to(vals.pairing, dom.shape),
                               np.broadcast_to(exact.pairing, dom.shape), atol=1e-9)
