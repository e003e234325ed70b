import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hermgeom.calculus import FD_SPEC, check_metric, metric_jets, scalar_hessian, wirtinger_first
from hermgeom.errors import DomainError, NotPositiveDefiniteError
from hermgeom.manifolds import (KINDS, ConformalMetric, TorusDomain, TrigPolynomial, builtin,
                                complex_coords, conformal_torus, default_conformal_factor,
                                flat_torus, fubini_study, hopf_surface, is_torus, metric_at,
                                periodicity_check, perturbed_torus, random_points,
                                random_psh_polynomial, real_coords, SamplePlan, potential)


def test_torus_domain_validation():
    dom = TorusDomain(2, (1.0, 2.0, 1.0, 0.5), 8)
    assert dom.volume == pytest.approx(1.0)
    assert dom.grid == (8,) * 4
    assert [c.shape for c in dom.coords()] == [(8, 1, 1, 1), (1, 8, 1, 1), (1, 1, 8, 1), (1, 1, 1, 8)]
    assert dom.refined().grid == (16,) * 4
    for bad in (dict(grid=7), dict(grid=2), dict(periods=(1, 1, 1, -1))):
        with pytest.raises(ValueError):
            TorusDomain(2, **bad)
    z = dom.wrap(np.array([1.25 + 2.5j, -0.25 + 0.75j]))
    np.testing.assert_allclose(z, [0.25 + 0.5j, 0.75 + 0.25j])
    assert dom.contains(z)


def test_coordinate_round_trip(rng):
    z = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    np.testing.assert_array_equal(complex_coords(real_coords(z)), z)


def test_trig_parse_and_values():
    u = TrigPolynomial.parse("0.5; 0.3 cos 1,0,0,0; 0.2 sin 0,0,0,1")
    ref = default_conformal_factor()
    X = [np.array(v) for v in (0.1, 0.3, 0.7, 0.2)]
    assert u(X) == pytest.approx(0.5 + ref(X))
    assert ref(X) == pytest.approx(0.3 * np.cos(0.2 * np.pi) + 0.2 * np.sin(0.4 * np.pi))
    for bad in ("0.3 tan 1,0,0,0", "0.3 cos 1,0", "cos"):
        with pytest.raises(ValueError):
            TrigPolynomial.parse(bad)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=4, max_size=4),
       st.lists(st.integers(-2, 2), min_size=4, max_size=4), st.floats(-1, 1), st.floats(-1, 1))
def test_trig_jets_match_finite_differences(x, k, A, B):
    u = TrigPolynomial([(A, B, tuple(k))], 2)
    f = u.as_scalar_field()
    p = np.array([x[0] + 1j * x[1], x[2] + 1j * x[3]])
    d1 = [wirtinger_first(f, p, a, FD_SPEC) for a in range(2)]
    d2 = scalar_hessian(f, p, FD_SPEC)
    np.testing.assert_allclose(f.d1(p), d1, atol=1e-7)
    np.testing.assert_allclose(f.d2(p), d2, atol=1e-5)


@pytest.mark.parametrize("kind", KINDS)
def test_builtins_positive_and_hermitian(kind):
    m = builtin(kind)
    pts = random_points(m, SamplePlan(16, 7))
    for p in pts:
        g, dg = metric_at(m, p)
        check_metric(g)
        assert np.allclose(g, g.conj().T)
        assert dg.shape == (m.dim,) * 3
    if is_torus(m):
        assert periodicity_check(m) <= 1e-12


def test_periodicity_rejects_non_torus():
    with pytest.raises(DomainError):
        periodicity_check(hopf_surface())


def test_hopf_domain_and_values():
    h = hopf_surface()
    np.testing.assert_allclose(h.value(np.array([1.0, 1j])), 0.5 * np.eye(2))
    with pytest.raises(DomainError):
        metric_at(h, [0, 0])
    r = np.linalg.norm(random_points(h, SamplePlan(200, 1)), axis=1)
    assert r.min() >= 1 and r.max() <= 2


def test_fubini_study_value():
    fs = fubini_study(2)
    z = np.array([1.0, 1j])
    # (1+|z|²)^{-1} δ - (1+|z|²)^{-2} z̄_i z_j in the g[i, j] = g_{i j̄} layout
    expect = np.eye(2) / 3 - np.outer(z.conj(), z) / 9
    np.testing.assert_allclose(fs.value(z), expect, atol=1e-15)


def test_non_positive_metric_rejected():
    m = perturbed_torus(scale=20.0)
    with pytest.raises(NotPositiveDefiniteError):
        for p in random_points(m, SamplePlan(64, 0)):
            metric_at(m, p)


def test_conformal_metric_matches_product(rng):
    u = default_conformal_factor()
    m = conformal_torus(u)
    assert isinstance(m, ConformalMetric) and m.kind == "conformal_torus"
    for p in random_points(m, SamplePlan(5, 3)):
        X = [np.array(v) for v in real_coords(p)]
        np.testing.assert_allclose(m.value(p), np.exp(u(X)) * np.eye(2), rtol=1e-14)
        np.testing.assert_allclose(m.d1(p), metric_jets(m, p, FD_SPEC)[1], atol=1e-7)


def test_potential_metric_is_hessian():
    phi = random_psh_polynomial(2, seed=3)
    m = potential(phi)
    p = random_points(m, SamplePlan(3, 0))
    for q in p:
        np.testing.assert_allclose(m.value(q), scalar_hessian(phi_field(phi), q, FD_SPEC),
                                   atol=1e-5)
        assert np.linalg.norm(q) < 0.5


def phi_field(phi):
    from hermgeom.calculus import ScalarField
    return ScalarField(lambda z: phi(z).real, 2)


def test_batched_evaluation(rng):
    for m in (perturbed_torus(full=True), fubini_study(2), hopf_surface(), conformal_torus()):
        pts = random_points(m, SamplePlan(6, 2))
        G = m.value(pts)
        D = m.d1(pts)
        for i, p in enumerate(pts):
            np.testing.assert_allclose(G[i], m.value(p), atol=1e-15)
            np.testing.assert_allclose(D[i], m.d1(p), atol=1e-15)


def test_flat_defaults():
    m = flat_torus(3)
    assert m.dim == 3 and m.torus.dim == 3
    assert np.array_equal(m.value(np.zeros(3)), np.eye(3))
