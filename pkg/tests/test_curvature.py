import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hermgeom.calculus import FD_SPEC, DerivativeSpec, ScalarField
from hermgeom.curvature import (CurvatureTensor, chern_curvature, chern_ricci, dbar_star_omega,
                                extremal_hsc, hsc, identity_s_hat, point_report,
                                polarize_kahler, quartic_form, sample_hsc, scalar_curvatures,
                                torsion)
from hermgeom.errors import DomainError, InconsistentEvaluatorError
from hermgeom.manifolds import (ConformalMetric, SamplePlan, TrigPolynomial,
                                conformal_torus, flat_torus, fubini_study, hopf_surface,
                                perturbed_torus, potential, random_points, random_psh_polynomial)

HOPF_P = np.array([1.0, 0.0])
# Hopf metric δ/|z|² at (1, 0), derived by hand from ∂_a g = -δ z̄_a/|z|⁴ and
# ∂_a∂_b̄ g = δ(-δ_ab/|z|⁴ + 2 z̄_a z_b/|z|⁶): R_{ij̄kl̄} = δ_kl · diag(0, 1)_ij,
# T_{01}^1 = -1 = -T_{10}^1, τ = (1, 0).
HOPF_R = np.einsum("ij,kl->ijkl", np.diag([0.0, 1.0]), np.eye(2))


def test_flat_is_zero():
    p = [0.3 + 0.2j, 0.7j]
    assert np.all(chern_curvature(flat_torus(), p).entries == 0)
    assert scalar_curvatures(flat_torus(), p) == (0.0, 0.0)
    np.testing.assert_array_equal(chern_ricci(flat_torus(), p), 0)
    np.testing.assert_allclose(chern_ricci(flat_torus(), p, method="logdet"), 0, atol=1e-12)


def test_fubini_study_line_at_origin():
    fs = fubini_study(1)
    assert chern_curvature(fs, [0]).entries[0, 0, 0, 0] == pytest.approx(2.0, abs=1e-14)
    np.testing.assert_allclose(chern_ricci(fs, [0]), [[2.0]], atol=1e-14)
    np.testing.assert_allclose(chern_ricci(fs, [0], method="logdet"), [[2.0]], atol=1e-7)
    assert hsc(fs, [0], [1j]) == pytest.approx(2.0, abs=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fubini_study_scalars_everywhere(n, rng):
    fs = fubini_study(n)
    for p in 0.8 * (rng.standard_normal((4, n)) + 1j * rng.standard_normal((4, n))):
        s, sh = scalar_curvatures(fs, p)
        assert s == pytest.approx(n * (n + 1), abs=1e-10)
        assert sh == pytest.approx(s, abs=1e-10)
        W = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        assert hsc(fs, p, W) == pytest.approx(2.0, abs=1e-10)


def test_hopf_closed_forms():
    h = hopf_surface()
    R = chern_curvature(h, HOPF_P)
    np.testing.assert_allclose(R.entries, HOPF_R, atol=1e-13)
    s, sh = scalar_curvatures(h, HOPF_P)
    assert (s, sh) == (pytest.approx(2.0), pytest.approx(1.0))
    T = torsion(h, HOPF_P).entries
    expect = np.zeros((2, 2, 2))
    expect[0, 1, 1], expect[1, 0, 1] = -1.0, 1.0
    np.testing.assert_allclose(T, expect, atol=1e-13)
    np.testing.assert_allclose(dbar_star_omega(h, HOPF_P), [-1j, 0], atol=1e-13)


def test_hopf_dual_path():
    h = hopf_surface()
    Ra = chern_curvature(h, HOPF_P).entries
    Rf = chern_curvature(h, HOPF_P, FD_SPEC).entries
    assert np.max(np.abs(Ra - Rf)) <= 1e-8
    Tf = torsion(h, HOPF_P, FD_SPEC)
    assert Tf.antisymmetry_residual() <= 1e-12
    assert np.max(np.abs(dbar_star_omega(h, HOPF_P, FD_SPEC) + 1j * Tf.trace())) <= 1e-12


def test_hopf_identity_and_extremes():
    h = hopf_surface()
    assert identity_s_hat(h, HOPF_P) <= 1e-10
    for p in random_points(h, SamplePlan(20, 3)):
        assert identity_s_hat(h, p) <= 1e-6
        assert identity_s_hat(h, p, FD_SPEC) <= 1e-6
    ext = extremal_hsc(h, HOPF_P)
    assert ext.h_min >= -1e-8 and ext.h_max == pytest.approx(1.0, abs=1e-10)
    assert ext.converged


def test_conformal_torus_torsion_and_ricci(rng):
    u = TrigPolynomial([(0.3, 0.1, (1, 0, 0, 2)), (0.0, 0.2, (0, 1, 1, 0))], 2)
    m = conformal_torus(u)
    uf = u.as_scalar_field()
    for p in random_points(m, SamplePlan(5, 11)):
        du = uf.d1(p)
        expect = np.einsum("i,jk->ijk", du, np.eye(2)) - np.einsum("j,ik->ijk", du, np.eye(2))
        np.testing.assert_allclose(torsion(m, p).entries, expect, atol=1e-12)
        # trace: τ_i = (1 - n) ∂_i u, so ∂̄*ω = √-1 ∂u for n = 2
        np.testing.assert_allclose(dbar_star_omega(m, p), 1j * du, atol=1e-12)
        np.testing.assert_allclose(chern_ricci(m, p), -2 * uf.d2(p), atol=1e-12)
        np.testing.assert_allclose(chern_ricci(m, p, method="logdet"), -2 * uf.d2(p), atol=1e-7)
        assert identity_s_hat(m, p) <= 1e-6


def test_kahler_detection_symmetries(rng):
    for m in (fubini_study(2), potential(random_psh_polynomial(2, seed=5))):
        for p in random_points(m, SamplePlan(5, 2)):
            R = chern_curvature(m, p)
            assert torsion(m, p).norm() <= 1e-10
            assert R.kahler_symmetry_residual() <= 1e-8
            s, sh = scalar_curvatures(m, p)
            assert abs(s - sh) <= 1e-8


def test_hsc_errors_and_sample():
    with pytest.raises(DomainError):
        hsc(hopf_surface(), HOPF_P, [0, 0])
    smp = sample_hsc(hopf_surface(), [1.3, 0.4j], [1.0, 2.0j])
    g = hopf_surface().value(np.array([1.3, 0.4j]))
    assert abs(np.real(np.conj(smp.direction) @ g.T @ smp.direction) - 1) <= 1e-12
    assert smp.value == pytest.approx(hsc(hopf_surface(), [1.3, 0.4j], [1.0, 2.0j]))


def test_extremal_examples():
    ext = extremal_hsc(flat_torus(), [0.1, 0.2])
    assert ext.h_max == 0 and ext.h_min == 0
    ext = extremal_hsc(fubini_study(2), [0, 0])
    assert ext.h_max == pytest.approx(2.0, abs=1e-12) and ext.h_min == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ValueError):
        extremal_hsc(flat_torus(), [0, 0], restarts=0)


def test_extremal_brackets_dense_sampling(rng):
    m = perturbed_torus(full=True)
    p = np.array([0.3 + 0.6j, 0.1 + 0.8j])
    ext = extremal_hsc(m, p, restarts=8, seed=4)
    W = rng.standard_normal((20000, 2)) + 1j * rng.standard_normal((20000, 2))
    vals = hsc(m, np.broadcast_to(p, W.shape), W)
    assert ext.h_min <= vals.min() + 1e-12 and vals.max() <= ext.h_max + 1e-12
    assert vals.min() - ext.h_min < 1e-3 and ext.h_max - vals.max() < 1e-3


def test_polarization_examples():
    R = chern_curvature(fubini_study(2), [0, 0])
    rec = polarize_kahler(quartic_form(R), 2)
    assert np.max(np.abs(rec.entries - R.entries)) <= 1e-9
    zero = polarize_kahler(lambda W: 0.0, 2)
    assert np.array_equal(zero.entries, np.zeros((2, 2, 2, 2)))
    m = potential(random_psh_polynomial(2, seed=9, eps=0.15))
    R = chern_curvature(m, [0.2 - 0.1j, 0.15j])
    assert np.max(np.abs(polarize_kahler(quartic_form(R), 2).entries - R.entries)) <= 1e-8


def test_polarization_rejects_non_kahler():
    R = chern_curvature(hopf_surface(), HOPF_P)
    assert R.kahler_symmetry_residual() > 0.1
    with pytest.raises(InconsistentEvaluatorError):
        polarize_kahler(lambda W: float(np.real(W[0] ** 3 * np.conj(W[1]))), 2)


def _random_kahler_tensor(rng, n):
    A = rng.standard_normal((n,) * 4) + 1j * rng.standard_normal((n,) * 4)
    A = A + A.transpose(2, 1, 0, 3)          # i <-> k
    A = A + A.transpose(0, 3, 2, 1)          # j <-> l
    return A + np.conj(A.transpose(1, 0, 3, 2))  # conjugate symmetry


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2 ** 31))
def test_polarization_round_trip(n, seed):
    R = CurvatureTensor(_random_kahler_tensor(np.random.default_rng(seed), n))
    assert R.kahler_symmetry_residual() <= 1e-12
    rec = polarize_kahler(quartic_form(R), n)
    assert np.max(np.abs(rec.entries - R.entries)) <= 1e-8 * max(1, np.max(np.abs(R.entries)))


points = st.tuples(*[st.floats(0, 1)] * 4)


@settings(max_examples=25, deadline=None)
@given(points, st.floats(-2, 2), st.floats(-2, 2), st.floats(0.05, 0.4))
def test_general_metric_invariants(x, re_l, im_l, amp):
    u = TrigPolynomial([(amp, 0.0, (1, 0, 1, 0)), (0.0, amp / 2, (0, 1, 0, 1))], 2)
    m = ConformalMetric(perturbed_torus(full=True), u)
    p = np.array([x[0] + 1j * x[1], x[2] + 1j * x[3]])
    R = chern_curvature(m, p)
    assert R.conjugate_symmetry_residual() <= 1e-10
    assert torsion(m, p).antisymmetry_residual() <= 1e-12
    assert identity_s_hat(m, p) <= 1e-6
    W = np.array([0.3 - 0.2j, 1.1 + 0.4j])
    lam = complex(re_l, im_l)
    if abs(lam) > 1e-3:
        h1, h2 = hsc(m, p, W), hsc(m, p, lam * W)
        assert abs(h1 - h2) <= 1e-10 * max(1.0, abs(h1))


def test_ricci_routes_agree_on_builtins():
    for m in (flat_torus(), conformal_torus(), perturbed_torus(full=True), fubini_study(2),
              hopf_surface(), potential(random_psh_polynomial(2))):
        for p in random_points(m, SamplePlan(4, 1)):
            a = chern_ricci(m, p, method="trace")
            b = chern_ricci(m, p, method="logdet")
            assert np.max(np.abs(a - b)) <= 1e-7
            assert np.max(np.abs(a - a.conj().T)) <= 1e-10


def test_point_report_consistency():
    rp = point_report(hopf_surface(), HOPF_P)
    assert rp.s == pytest.approx(2.0) and rp.s_hat == pytest.approx(1.0)
    g = rp.metric
    assert rp.s == pytest.approx(np.trace(np.linalg.inv(g).T @ rp.ricci.T).real, abs=1e-12)
    assert rp.h_min >= -1e-8 and rp.h_max > 0
    assert max(rp.identity_residuals.values()) <= 1e-6


def test_fd_and_potential_field_paths():
    # potential given only as a value: everything numeric
    phi = ScalarField(lambda z: np.sum(np.abs(z) ** 2, -1) + 0.1 * np.abs(z[..., 0]) ** 4, 2)
    m = potential(phi)
    p = np.array([0.2 + 0.1j, -0.1j])
    assert not m.has_analytic
    assert torsion(m, p).norm() <= 1e-6
    spec = DerivativeSpec("central-difference", step=1e-3, second_step=1e-2)
    s, sh = scalar_curvatures(m, p, spec)
    assert abs(s - sh) <= 1e-4
