# -*- coding: utf-8 -*-
"""
Tests for fictitious control, algebraic reduction and the two-stage pipeline.
"""

import numpy as np
import pytest
import scipy.linalg as la
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

from algsolv import (SmoothModalControl, collapse, fictitious_control, kalman_pinv, pipeline, reduce,
                     telescoping_gap, verify_lemma)
from casebook import SMOKE, get_case
from dynamics import SpectralField
from errors import NotControllable, NotInE, RankDeficientMode, TimeTooShort
from hum import BumpBasis
from model import TorusSubset, mode_matrix, validate
from tests.strategies import random_spec, two_by_two

HALF = TorusSubset([(0.0, np.pi)])


def _steer(spec, n, control, X0):
    Bn = mode_matrix(spec, n)
    sol = solve_ivp(lambda t, y: Bn @ y + spec.M @ control(t), (control.start, control.end),
                    np.asarray(X0, dtype=complex), method="DOP853", rtol=1e-12, atol=1e-14)
    return sol.y[:, -1]


def _random_lemma_instance(seed):
    rng = np.random.default_rng(seed)
    d_h = int(rng.integers(1, 3))
    d_p = int(rng.integers(1, 5 - d_h))
    spec = random_spec(rng, d_h=d_h, d_p=d_p, m=int(rng.integers(1, 3)))
    k = int(rng.integers(1, 5))
    n = int(rng.integers(-20, 21))
    basis = BumpBasis(0.5, 3, flatness=k)
    coeffs = rng.normal(size=(3, k * spec.m)) + 1j * rng.normal(size=(3, k * spec.m))
    w = SmoothModalControl.from_basis(n, basis, coeffs)
    X0 = rng.normal(size=spec.d) + 1j * rng.normal(size=spec.d)
    return spec, n, X0, w


class TestSmoothModalControl:

    def test_flat_at_endpoints(self):
        basis = BumpBasis(1.0, 4, flatness=3)
        w = SmoothModalControl.from_basis(0, basis, np.ones((4, 2)), start=0.5)
        for order in range(3):
            assert np.abs(w.evaluate([0.5, 1.5], order)).max() < 1e-10
        assert np.abs(w.evaluate([0.0, 2.0])).max() == 0.0

    def test_derivative_of_exponential_core(self):
        G = np.array([[-1.0, 0.3], [0.0, -2.0]])
        basis = BumpBasis(1.0, 1, flatness=2)
        v = SmoothModalControl(0, 0.0, basis, G, np.array([[1.0], [2.0]]), [np.eye(2)])
        t, h = 0.4, 1e-5
        fd = (v.evaluate([t + h]) - v.evaluate([t - h])) / (2 * h)
        np.testing.assert_allclose(v.evaluate([t], 1), fd, rtol=1e-6, atol=1e-9)


class TestFictitiousControl:

    def test_zero_state(self):
        v = fictitious_control(random_spec(np.random.default_rng(0)), 3, [0.0, 0.0], 1.0)
        assert np.abs(v.evaluate(np.linspace(0, 1, 11))).max() == 0.0

    def test_scalar_integral(self):
        spec = two_by_two()
        X0 = np.array([1.5, -0.5j])
        v = fictitious_control(spec, 0, X0, 2.0)
        s, wts = leggauss(40)
        t = 1.0 + s
        np.testing.assert_allclose(np.einsum("t,tk->k", wts, v.evaluate(t)), -X0, atol=1e-12)

    def test_steers_to_zero(self):
        spec = random_spec(np.random.default_rng(1), d_h=1, d_p=2)
        X0 = np.array([1.0, -0.5, 0.25j])
        v = fictitious_control(spec, 7, X0, 1.0)
        Bn = mode_matrix(spec, 7)
        sol = solve_ivp(lambda t, y: Bn @ y + v(t), (0.0, 1.0), X0.astype(complex), method="DOP853",
                        rtol=1e-12, atol=1e-14)
        assert np.abs(sol.y[:, -1]).max() <= 1e-10


class TestReduce:

    def test_square_control_is_inverse(self):
        rng = np.random.default_rng(2)
        base = random_spec(rng)
        M = np.array([[1.0, 0.5], [-0.3, 2.0]])
        spec = validate(base.d_h, base.d_p, base.D, base.A, base.K, M)
        v = fictitious_control(spec, 4, [1.0, 2.0], 1.0)
        u = reduce(spec, 4, v)
        t = np.linspace(0.0, 1.0, 9)
        np.testing.assert_allclose(u.evaluate(t), la.solve(M, v.evaluate(t).T).T, atol=1e-12)

    def test_zero_control(self):
        spec = get_case("2x2-h-k21").spec()
        v = fictitious_control(spec, 5, [0.0, 0.0], 1.0, flatness=4)
        assert np.abs(reduce(spec, 5, v).evaluate(np.linspace(0, 1, 7))).max() == 0.0

    @pytest.mark.parametrize("case, n", [("2x2-h-k21", 5), ("2x2-p-both", 3), ("2x2-p-a12zero", -2)])
    def test_reduced_control_steers(self, case, n):
        spec = get_case(case).spec()
        X0 = np.array([1.0, 0.5 - 0.5j])
        v = fictitious_control(spec, n, X0, 1.0, flatness=4)
        u = reduce(spec, n, v)
        assert u.channels == spec.m
        assert np.abs(_steer(spec, n, u, X0)).max() <= 1e-8 * max(1.0, np.abs(X0).max())

    def test_reduced_control_stays_flat(self):
        spec = get_case("2x2-p-a12zero").spec()
        v = fictitious_control(spec, 3, [1.0, 1.0], 1.0, flatness=4)
        u = reduce(spec, 3, v, 2)
        scale = np.abs(u.evaluate(np.linspace(0.0, 1.0, 101))).max()
        assert np.abs(u.evaluate([0.0, 1.0])).max() <= 1e-12 * scale

    def test_exceptional_mode(self):
        spec = get_case("2x2-h-a21").spec()
        with pytest.raises(RankDeficientMode):
            kalman_pinv(spec, 0, 2)

    def test_collapse_checks_blocks(self):
        w = SmoothModalControl.from_basis(0, BumpBasis(1.0, 2, 2), np.ones((2, 3)))
        with pytest.raises(ValueError):
            collapse(w, 2, 2)


class TestLemma:

    def test_zero_w(self):
        spec = random_spec(np.random.default_rng(3))
        w = SmoothModalControl.from_basis(4, BumpBasis(0.7, 2, 2), np.zeros((2, 2)))
        X0 = np.array([1.0, -1.0])
        X_T, Xt_T, gap = verify_lemma(spec, 4, X0, w)
        assert gap == 0.0
        np.testing.assert_allclose(X_T, la.expm(0.7 * mode_matrix(spec, 4)) @ X0, atol=1e-10)

    @pytest.mark.parametrize("seed", range(10))
    def test_random_instances(self, seed):
        spec, n, X0, w = _random_lemma_instance(seed)
        X_T, _, gap = verify_lemma(spec, n, X0, w)
        assert gap <= 1e-8 * (1.0 + la.norm(X_T))

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(10, 110))
    def test_random_instances_extended(self, seed):
        spec, n, X0, w = _random_lemma_instance(seed)
        X_T, _, gap = verify_lemma(spec, n, X0, w)
        assert gap <= 1e-8 * (1.0 + la.norm(X_T))

    def test_lemma_needs_flatness(self):
        spec = get_case("2x2-h-k21").spec()
        w = SmoothModalControl.from_basis(2, BumpBasis(1.0, 1, flatness=1), [[0.0, 0.0, 1.0]])
        _, _, gap = verify_lemma(spec, 2, np.zeros(2), w, k=3)
        assert gap > 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_telescoping_identity(self, seed):
        rng = np.random.default_rng(100 + seed)
        spec = random_spec(rng, d_h=2, d_p=1, m=2)
        k = int(rng.integers(1, 5))
        coeffs = rng.normal(size=(6, k * spec.m)) + 1j * rng.normal(size=(6, k * spec.m))
        assert telescoping_gap(spec, int(rng.integers(-20, 21)), k, coeffs) < 1e-10


class TestPipeline:

    def test_single_mode(self):
        spec = get_case("2x2-h-k21").spec()
        f0 = SpectralField.single_mode(6, 5, [1.0, 0.5])
        report = pipeline(spec, f0, HALF, 2 * np.pi)
        assert report.stage1_modes == ()
        assert set(report.mode_residuals) == {5}
        assert report.mode_residuals[5] <= 1e-8
        assert 0.0 <= report.leakage <= 1.0
        assert report.to_dict()["k0"] == 2

    def test_stage_one_handles_exceptional_mode(self):
        spec = get_case("2x2-h-a21").spec()
        f0 = SpectralField.smooth(2, 3, decay=2.0, rng=4, zero_mean=(1,))
        report = pipeline(spec, f0, HALF, 2 * np.pi)
        assert report.stage1_modes == (0,)
        assert report.stage1_residual < 1e-6
        assert report.max_residual < 1e-6

    def test_full_control(self):
        spec = SMOKE.spec()
        f0 = SpectralField.smooth(2, 4, decay=2.0, rng=5)
        report = pipeline(spec, f0, HALF, 2 * np.pi)
        assert report.k0 == 1
        assert report.max_residual <= 1e-7
        assert 0.0 < report.leakage < 1.0

    @pytest.mark.parametrize("method", ["DOP853", "RK45"])
    def test_complex_modal_states(self, method):
        spec = get_case("2x2-h-k21").spec()
        f0 = SpectralField.single_mode(6, 3, [1.0 + 0.5j, -0.25j])
        report = pipeline(spec, f0, HALF, 2 * np.pi, method=method)
        assert report.mode_residuals[3] <= 1e-7

    def test_not_in_E(self):
        spec = get_case("2x2-h-a21").spec()
        with pytest.raises(NotInE) as info:
            pipeline(spec, SpectralField.single_mode(4, 0, [0.0, 1.0]), HALF, 2 * np.pi)
        assert info.value.mode == 0

    def test_time_too_short(self):
        spec = get_case("2x2-h-k21").spec()
        with pytest.raises(TimeTooShort):
            pipeline(spec, SpectralField.single_mode(4, 1, [1.0, 0.0]), HALF, np.pi)

    def test_never_controllable(self):
        spec = get_case("2x2-h-degenerate").spec()
        with pytest.raises(NotControllable):
            pipeline(spec, SpectralField.single_mode(4, 1, [1.0, 0.0]), HALF, 2 * np.pi)
