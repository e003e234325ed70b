import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import i0

from hermgeom.curvature import scalar_curvatures
from hermgeom.errors import GridTooCoarseError
from hermgeom.manifolds import (TorusDomain, TrigPolynomial, fubini_study, hopf_surface,
                                perturbed_torus, random_points, SamplePlan)
from hermgeom.quadrature import (GridQuadrature, SphereSampler, exact_quartic_moment,
                                 fs_average_hsc, sphere_quartic_moment, torus_integral)


def test_bessel_integral():
    q = GridQuadrature(TorusDomain(2, None, 64))
    val = torus_integral(lambda X: np.exp(0.3 * np.cos(2 * np.pi * X[0])), q)
    assert val == pytest.approx(i0(0.3), abs=1e-14)


def test_trig_integral_and_volume():
    dom = TorusDomain(2, (1.0, 2.0, 0.5, 3.0), 8)
    q = GridQuadrature(dom)
    u = TrigPolynomial([(0.7, 0.2, (1, 1, 0, 2))], 2, constant=1.5, periods=dom.periods)
    assert torus_integral(u, q) == pytest.approx(1.5 * dom.volume, abs=1e-13)
    assert q.weights.sum() == pytest.approx(dom.volume)
    assert q.integrate(np.ones(())) == pytest.approx(dom.volume)


def test_refinement_guard():
    q = GridQuadrature(TorusDomain(2, None, 4))
    f = lambda X: np.exp(3 * np.cos(2 * np.pi * X[0]))
    with pytest.raises(GridTooCoarseError):
        torus_integral(f, q, refine_tol=1e-8)
    torus_integral(f, GridQuadrature(TorusDomain(2, None, 64)), refine_tol=1e-12)


@pytest.mark.parametrize("idx,expect", [((0, 0, 0, 0), 1 / 3), ((0, 0, 1, 1), 1 / 6),
                                         ((0, 1, 1, 0), 1 / 6), ((0, 1, 0, 1), 0.0)])
def test_quartic_moments(idx, expect):
    assert exact_quartic_moment(2, *idx) == expect
    est = sphere_quartic_moment(2, *idx, SphereSampler(2, 100_000, seed=3))
    assert abs(est.value - expect) <= 3 * est.stderr + 1e-12


def test_sampler_determinism_and_norm():
    a = SphereSampler(3, 1000, seed=5, chunk=300).samples()
    b = SphereSampler(3, 1000, seed=5, chunk=300).samples()
    assert np.array_equal(a, b) and a.shape == (1000, 3)
    np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1, atol=1e-14)
    with pytest.raises(ValueError):
        SphereSampler(0)
    with pytest.raises(IndexError):
        sphere_quartic_moment(2, 0, 0, 0, 2)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2 ** 31))
def test_sampler_first_moments(n, seed):
    x = SphereSampler(n, 20000, seed=seed).samples()
    assert np.all(np.abs(x.mean(0)) < 0.05)
    np.testing.assert_allclose(np.mean(np.abs(x) ** 2, 0), 1 / n, atol=0.02)


def test_fs_average_constant_curvature():
    est = fs_average_hsc(fubini_study(2), [0.3, -0.2j], sampler=SphereSampler(2, 20000, 1))
    assert est.value == pytest.approx(2.0, abs=1e-12) and est.stderr < 1e-12


@pytest.mark.parametrize("metric", [hopf_surface(), perturbed_torus(full=True)])
def test_fs_average_matches_scalars(metric):
    n = metric.dim
    for p in random_points(metric, SamplePlan(3, 4)):
        s, sh = scalar_curvatures(metric, p)
        est = fs_average_hsc(metric, p, sampler=SphereSampler(n, 100_000, 2))
        assert abs(est.value - (s + sh) / (n * (n + 1))) <= 3 * est.stderr + 1e-10
