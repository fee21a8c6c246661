# -*- coding: utf-8 -*-
"""
Tests for the truncated Fourier-Galerkin dynamics.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from dynamics import (PropagatorCache, SpectralField, apply_localized_control, evolve_adjoint, evolve_free,
                      indicator_coeffs, propagator)
from errors import DimensionMismatch, OverflowRisk
from model import TWO_PI, TorusSubset, eigenprojection_split, find_n_min, validate
from tests.strategies import random_spec, two_by_two, valid_specs

HALF = TorusSubset([(0.0, np.pi)])


def _random_field(rng, N, d):
    return SpectralField(rng.normal(size=(2 * N + 1, d)) + 1j * rng.normal(size=(2 * N + 1, d)))


class TestSpectralField:

    def test_shape_checked(self):
        with pytest.raises(DimensionMismatch):
            SpectralField(np.zeros((4, 2)))

    def test_grid_round_trip_of_trigonometric_polynomial(self):
        x = TWO_PI * np.arange(32) / 32
        values = np.stack([np.cos(3 * x), 1.0 + np.sin(x)], axis=1)
        field = SpectralField.from_grid(values, 8)
        assert field.coeff(3)[0] == pytest.approx(0.5)
        assert field.coeff(0)[1] == pytest.approx(1.0)
        assert field.coeff(1)[1] == pytest.approx(-0.5j)
        np.testing.assert_allclose(field.to_grid(x).real, values, atol=1e-12)

    def test_norms(self):
        field = SpectralField.single_mode(4, 2, [3.0, 4.0])
        assert field.sobolev_norm(0) == pytest.approx(5.0)
        assert field.sobolev_norm(1) == pytest.approx(5.0 * np.sqrt(5.0))
        assert field.l2_norm() == pytest.approx(5.0 * np.sqrt(TWO_PI))

    def test_high_pass(self):
        field = SpectralField(np.ones((9, 1)))
        kept = field.high_pass(2)
        np.testing.assert_array_equal(np.abs(kept.coeffs[:, 0]) > 0, np.abs(field.modes) > 2)

    def test_smooth_is_real(self):
        field = SpectralField.smooth(2, 16, decay=2.0, rng=3, zero_mean=(1,))
        assert field.is_conjugate_symmetric()
        assert field.coeff(0)[1] == 0.0
        assert np.abs(field.to_grid(np.linspace(0, 6, 7)).imag).max() < 1e-12


class TestPropagator:

    def test_time_zero(self):
        spec = random_spec(np.random.default_rng(0))
        np.testing.assert_allclose(propagator(spec, 5, 0.0), np.eye(2))

    def test_zero_mode_without_coupling(self):
        spec = two_by_two(a12=1.0, a21=2.0)
        np.testing.assert_allclose(propagator(spec, 0, 3.7), np.eye(2), atol=1e-14)

    def test_scalar_closed_form(self):
        spec = two_by_two(a_prime=1.5, a22=0.5, d=2.0)
        n, t = 3, 0.4
        P = propagator(spec, n, t)
        assert P[0, 0] == pytest.approx(np.exp(-1j * n * 1.5 * t))
        assert P[1, 1] == pytest.approx(np.exp(-2.0 * n ** 2 * t - 1j * n * 0.5 * t))

    def test_overflow_budget(self):
        spec = two_by_two(k11=-10.0)
        with pytest.raises(OverflowRisk):
            propagator(spec, 1, 100.0)

    def test_negative_time_requires_hyperbolic_flag(self):
        spec = random_spec(np.random.default_rng(1))
        with pytest.raises(ValueError):
            propagator(spec, 20, -0.1)

    def test_hyperbolic_group(self):
        spec = random_spec(np.random.default_rng(2))
        n = 40
        P_h, _ = eigenprojection_split(spec, n)
        forward = propagator(spec, n, 0.3)
        backward = propagator(spec, n, -0.3, hyperbolic=True)
        np.testing.assert_allclose(backward @ forward @ P_h, P_h, atol=1e-9)

    @settings(max_examples=20)
    @given(valid_specs(), st.integers(-12, 12), st.floats(0.01, 1.0))
    def test_duality(self, spec, n, t):
        forward = propagator(spec, n, t)
        adjoint = propagator(spec, n, t, adjoint=True)
        np.testing.assert_allclose(adjoint, forward.conj().T, atol=1e-10 * max(1.0, np.abs(forward).max()))

    def test_cache_reuses_stacks(self):
        spec = random_spec(np.random.default_rng(3))
        cache = PropagatorCache(spec, np.arange(-4, 5))
        first = cache(0.5)
        assert cache(0.5) is first and len(cache) == 1
        np.testing.assert_allclose(first[6], propagator(spec, 2, 0.5))


class TestEvolution:

    def test_time_zero(self):
        rng = np.random.default_rng(4)
        spec = random_spec(rng)
        field = _random_field(rng, 6, 2)
        np.testing.assert_allclose(evolve_free(spec, field, 0.0).coeffs, field.coeffs)

    def test_single_mode(self):
        spec = random_spec(np.random.default_rng(5))
        X = np.array([1.0, -2.0j])
        out = evolve_free(spec, SpectralField.single_mode(5, 3, X), 0.2)
        expected = propagator(spec, 3, 0.2) @ X
        np.testing.assert_allclose(out.coeff(3), expected)
        assert np.abs(np.delete(out.coeffs, 3 + 5, axis=0)).max() == 0.0

    def test_unitary_hyperbolic_block(self):
        A = np.zeros((3, 3))
        A[:2, :2] = [[1.0, 0.5], [0.5, -2.0]]
        spec = validate(2, 1, [[1.0]], A, np.zeros((3, 3)), np.eye(3))
        rng = np.random.default_rng(6)
        c = np.zeros((9, 3), dtype=complex)
        c[:, :2] = rng.normal(size=(9, 2)) + 1j * rng.normal(size=(9, 2))
        out = evolve_free(spec, SpectralField(c), 1.3)
        np.testing.assert_allclose(np.linalg.norm(out.coeffs, axis=1), np.linalg.norm(c, axis=1))

    @settings(max_examples=15)
    @given(valid_specs(), st.floats(0.01, 0.5), st.floats(0.01, 0.5), st.integers(0, 1000))
    def test_semigroup(self, spec, s, t, seed):
        field = _random_field(np.random.default_rng(seed), 8, spec.d)
        once = evolve_free(spec, field, s + t)
        twice = evolve_free(spec, evolve_free(spec, field, s), t)
        scale = max(1.0, np.abs(once.coeffs).max())
        np.testing.assert_allclose(twice.coeffs, once.coeffs, atol=1e-9 * scale)

    @given(valid_specs(), st.floats(0.01, 1.0))
    def test_reality_preserved(self, spec, t):
        field = SpectralField.smooth(spec.d, 10, decay=1.0, rng=7)
        assert evolve_free(spec, field, t).is_conjugate_symmetric(tol=1e-10)

    def test_duality_on_fields(self):
        rng = np.random.default_rng(8)
        spec = random_spec(rng, d_h=2, d_p=2)
        f, g = _random_field(rng, 10, 4), _random_field(rng, 10, 4)
        t = 0.3
        lhs = evolve_free(spec, f, t).inner(g)
        rhs = f.inner(evolve_adjoint(spec, g, t))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_adjoint_phase_is_conjugate(self):
        spec = two_by_two(a_prime=2.0, a22=0.0)
        field = SpectralField.single_mode(4, 3, [1.0, 0.0])
        forward = evolve_free(spec, field, 0.7).coeff(3)[0]
        adjoint = evolve_adjoint(spec, field, 0.7).coeff(3)[0]
        assert adjoint == pytest.approx(np.conj(forward))

    def test_backward_on_hyperbolic_range(self):
        spec = random_spec(np.random.default_rng(9))
        n = 30
        P_h, _ = eigenprojection_split(spec, n)
        field = SpectralField.single_mode(n, n, P_h @ np.array([1.0, 0.0]))
        there = evolve_free(spec, field, 0.2)
        back = evolve_free(spec, there, -0.2)
        np.testing.assert_allclose(back.coeffs, field.coeffs, atol=1e-9)

    def test_backward_refuses_parabolic_data(self):
        spec = random_spec(np.random.default_rng(10))
        with pytest.raises(ValueError):
            evolve_free(spec, SpectralField.single_mode(30, 30, [0.0, 1.0]), -0.1)

    def test_parabolic_smoothing(self):
        spec = random_spec(np.random.default_rng(11))
        rng = np.random.default_rng(12)
        rough = SpectralField(rng.normal(size=(257, 2)) + 1j * rng.normal(size=(257, 2)))
        lo = max(16, find_n_min(spec))
        splits = {n: eigenprojection_split(spec, n)[1] for n in range(-128, 129) if abs(n) >= lo}

        def parabolic_h1(field):
            total = sum((1.0 + n ** 2) * np.sum(np.abs(splits[n] @ field.coeff(n)) ** 2)
                        for n in field.modes if abs(n) >= lo)
            return np.sqrt(total)

        evolved = [evolve_free(spec, rough.truncated(N), 0.5) for N in (32, 64, 128)]
        smooth = [parabolic_h1(field) for field in evolved]
        assert smooth[0] > 0.0
        assert abs(smooth[2] - smooth[1]) <= 1e-10 * smooth[2]
        assert abs(smooth[1] - smooth[0]) <= 1e-6 * smooth[1]
        # the hyperbolic block keeps the roughness of the datum
        full = [field.sobolev_norm(1.0) for field in evolved]
        assert full[2] > full[1] > full[0]


class TestIndicator:

    def test_full_torus(self):
        ind = indicator_coeffs(TorusSubset.full(), 5)
        assert ind[0] == pytest.approx(1.0)
        np.testing.assert_allclose(ind[np.array([-3, 1, 4])], 0.0, atol=1e-14)

    def test_half_torus(self):
        ind = indicator_coeffs(HALF, 4)
        assert ind[0] == pytest.approx(0.5)
        assert ind[1] == pytest.approx(1.0 / (np.pi * 1j))
        assert ind[-1] == pytest.approx(np.conj(ind[1]))

    def test_quadrature_cross_check(self):
        w = TorusSubset([(0.5, 2.0), (4.0, 5.5)])
        ind = indicator_coeffs(w, 6)
        x = np.linspace(0.0, TWO_PI, 200001)
        mask = w.contains(x)
        for m in (-3, 2, 5):
            integrand = mask * np.exp(-1j * m * x)
            expected = trapezoid(integrand, x) / TWO_PI
            assert abs(ind[m] - expected) < 1e-4

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            indicator_coeffs(HALF, 2)[3]


class TestLocalizedControl:

    def test_full_torus_is_identity(self):
        spec = random_spec(np.random.default_rng(13), m=2)
        u = np.random.default_rng(14).normal(size=(7, 2))
        F = apply_localized_control(spec, indicator_coeffs(TorusSubset.full(), 10), u, 5)
        np.testing.assert_allclose(F[2:9], u @ spec.M.T, atol=1e-14)
        np.testing.assert_allclose(F[[0, 1, 9, 10]], 0.0, atol=1e-14)

    def test_single_control_mode(self):
        spec = two_by_two(M=(1.0, 0.0))
        u = np.zeros((3, 1))
        u[1, 0] = 2.0
        ind = indicator_coeffs(HALF, 8)
        F = apply_localized_control(spec, ind, u, 4)
        for n in range(-4, 5):
            np.testing.assert_allclose(F[n + 4], 2.0 * ind[n] * spec.M[:, 0])

    def test_exact_convolution_oracle(self):
        spec = random_spec(np.random.default_rng(15), m=1)
        N, Nc = 16, 8
        rng = np.random.default_rng(16)
        u = rng.normal(size=(2 * Nc + 1, 1)) + 1j * rng.normal(size=(2 * Nc + 1, 1))
        F = apply_localized_control(spec, indicator_coeffs(HALF, N + Nc), u, N)

        def half_coeff(k):
            # 1_[0, pi] has c_0 = 1/2 and c_k = (1 - (-1)^k) / (2 pi i k)
            return 0.5 if k == 0 else (1.0 - (-1.0) ** k) / (2j * np.pi * k)

        oracle = np.zeros((2 * N + 1, spec.d), dtype=complex)
        for n in range(-N, N + 1):
            for m in range(-Nc, Nc + 1):
                oracle[n + N] += half_coeff(n - m) * (spec.M @ u[m + Nc])
        np.testing.assert_allclose(F, oracle, rtol=0.0, atol=1e-9 * np.abs(u).max())

    def test_band_checked(self):
        with pytest.raises(DimensionMismatch):
            apply_localized_control(two_by_two(), indicator_coeffs(HALF, 10), np.zeros((9, 1)), 2)
