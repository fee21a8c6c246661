# -*- coding: utf-8 -*-
"""
Tests for the spectral Kalman analysis.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from casebook import CASES, SMOKE, check, get_case
from errors import DimensionMismatch, EigenvalueNotInSpectrum
from modal import (NEVER_FULL_RANK, Verdict, analyze, exceptional_modes, gram_determinant, k0_deficient_modes,
                   kalman_depth, kalman_matrix, kalman_poly, kalman_rank, mode_depth, regularity_index,
                   rough_obstruction)
from model import TorusSubset, mode_matrix, t_star, validate
from tests.strategies import nested_subsets, random_spec, two_by_two, valid_specs

HALF = TorusSubset([(0.0, np.pi)])


class TestKalmanPoly:

    def test_depth_one_is_control_matrix(self):
        spec = random_spec(np.random.default_rng(0), m=2)
        np.testing.assert_allclose(kalman_poly(spec, 1).evaluate(5), spec.M)

    def test_parabolic_control_columns(self):
        a12, a22, k12, k22, d = 0.7, 0.4, 1.3, 0.2, 2.0
        spec = two_by_two(a12=a12, a22=a22, k12=k12, k22=k22, d=d, M=(0.0, 1.0))
        K = kalman_poly(spec, 2)
        for n in (1, 2, 3):
            expected = [[0.0, -(1j * n * a12 + k12)], [1.0, -d * n ** 2 - 1j * n * a22 - k22]]
            np.testing.assert_allclose(K.evaluate(n), expected)

    def test_matches_direct_products(self):
        spec = random_spec(np.random.default_rng(1), d_h=2, d_p=1, m=1)
        Bn = mode_matrix(spec, 1)
        direct = np.hstack([spec.M, Bn @ spec.M, Bn @ Bn @ spec.M])
        np.testing.assert_allclose(kalman_poly(spec, 3).evaluate(1), direct)
        np.testing.assert_allclose(kalman_matrix(spec, 1, 3), direct)

    def test_depth_range(self):
        with pytest.raises(DimensionMismatch):
            kalman_poly(two_by_two(), 3)


class TestDeterminants:
    """Gram determinants of the 2x2 cases, P = |det [B_n|M]|^2."""

    def test_hyperbolic_control(self):
        a21, k21 = 2.0, 0.5
        spec = two_by_two(a21=a21, k21=k21)
        np.testing.assert_allclose(gram_determinant(spec, 2).coeffs, [k21 ** 2, 0.0, a21 ** 2], atol=1e-12)
        det = np.linalg.det(kalman_matrix(spec, 3, 2))
        assert det == pytest.approx(-(3j * a21 + k21))

    def test_parabolic_control(self):
        a12, k12 = 1.5, 0.25
        spec = two_by_two(a12=a12, k12=k12, d=3.0, M=(0.0, 1.0))
        det = np.linalg.det(kalman_matrix(spec, 2, 2))
        assert det == pytest.approx(2j * a12 + k12)

    def test_simultaneous_control(self):
        a_prime, a22, k11, k22, d = 1.0, 2.5, 4.0, 1.0, 2.0
        spec = two_by_two(a_prime=a_prime, a22=a22, k11=k11, k22=k22, d=d, M=(1.0, 1.0))
        for n in (1, 4):
            det = np.linalg.det(kalman_matrix(spec, n, 2))
            assert det == pytest.approx(-d * n ** 2 + 1j * n * (a_prime - a22) + (k11 - k22))


class TestDepth:

    def test_full_control(self):
        spec = validate(1, 1, [[1.0]], np.eye(2), np.zeros((2, 2)), np.eye(2))
        assert kalman_depth(spec) == 1

    def test_rank_one_control(self):
        assert kalman_depth(two_by_two(a21=1.0, k21=1.0)) == 2

    def test_gram_with_vanishing_permanent(self):
        # M = e1 gives G = diag(1, 0) at depth one, whose permanent is zero
        spec = two_by_two(a21=1.0, k21=1.0)
        assert not np.any(gram_determinant(spec, 1).coeffs)
        assert kalman_depth(spec) == 2
        assert mode_depth(spec, 3) == 2

    def test_never_full_rank(self):
        assert kalman_depth(two_by_two(a12=1.0, k11=0.3)) is NEVER_FULL_RANK

    def test_mode_depth(self):
        spec = two_by_two(a21=1.0)
        assert mode_depth(spec, 0) is NEVER_FULL_RANK
        assert mode_depth(spec, 2) == 2


class TestExceptionalModes:

    def test_none_when_k21_nonzero(self):
        assert exceptional_modes(two_by_two(a21=1.0, k21=1.0)) == ()

    def test_zero_mode_constraint(self):
        modes = exceptional_modes(two_by_two(a21=1.0, k11=0.3))
        assert [m.n for m in modes] == [0]
        assert modes[0].rank == 1
        assert modes[0].violation([1.0, 0.0]) < 1e-10
        assert modes[0].violation([0.0, 1.0]) == pytest.approx(1.0)

    def test_simultaneous_integer_roots(self):
        spec = two_by_two(a22=1.0, k11=9.5, k22=0.5, M=(1.0, 1.0))
        modes = exceptional_modes(spec)
        assert [m.n for m in modes] == [-3, 3]
        for mode in modes:
            assert mode.violation(np.array([1.0, 1.0]) / np.sqrt(2.0)) < 1e-10
            assert not mode.ambiguous

    @settings(max_examples=15)
    @given(valid_specs(max_d_h=2, max_d_p=1))
    def test_symmetric_under_reflection(self, spec):
        if kalman_depth(spec) is NEVER_FULL_RANK:
            return
        found = {m.n for m in exceptional_modes(spec)}
        assert found == {-n for n in found}

    @settings(max_examples=10)
    @given(valid_specs(max_d_h=2, max_d_p=1), st.integers(0, 2 ** 31 - 1))
    def test_full_rank_beyond_deficient_modes(self, spec, seed):
        k0 = kalman_depth(spec)
        if k0 is NEVER_FULL_RANK:
            return
        deficient = k0_deficient_modes(spec, k0)
        top = max([abs(n) for n in deficient] + [0])
        rng = np.random.default_rng(seed)
        for n in rng.integers(top + 1, top + 40, size=20) * rng.choice([-1, 1], size=20):
            assert kalman_rank(spec, int(n), k0) == spec.d


class TestRegularity:

    @pytest.mark.parametrize("kwargs, expected", [
        (dict(a21=1.0, k21=1.0), 0),
        (dict(a21=0.0, k21=1.0), 0),
        (dict(a12=1.0, k12=1.0, M=(0.0, 1.0)), 1),
        (dict(a12=1.0, k12=0.0, M=(0.0, 1.0)), 1),
        (dict(a12=0.0, k12=1.0, M=(0.0, 1.0)), 2),
        (dict(a_prime=1.0, a22=1.0, k11=9.5, k22=0.5, M=(1.0, 1.0)), 0),
    ])
    def test_two_by_two_index(self, kwargs, expected):
        reg = regularity_index(two_by_two(**kwargs))
        assert reg.p_index == expected
        assert reg.p_bound == 8

    def test_full_control(self):
        spec = validate(1, 1, [[1.0]], np.eye(2), np.ones((2, 2)), np.eye(2))
        reg = regularity_index(spec)
        assert (reg.p_index, reg.p_bound, reg.pinv_bound) == (0, 0, 0)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(50))
    def test_degree_bounds(self, seed):
        rng = np.random.default_rng(seed)
        d_h = int(rng.integers(1, 3))
        d_p = int(rng.integers(1, 6 - d_h))
        spec = random_spec(rng, d_h=d_h, d_p=d_p, m=int(rng.integers(1, 3)))
        reg = regularity_index(spec)
        assert reg.pinv_degree <= reg.pinv_bound
        assert reg.p_index <= reg.p_bound

    @given(valid_specs(max_d_h=2, max_d_p=1))
    def test_index_below_bound(self, spec):
        reg = regularity_index(spec)
        assert reg.p_index <= reg.p_bound
        assert reg.pinv_degree <= reg.pinv_bound


class TestRoughObstruction:

    def test_parabolic_control_is_blind(self):
        result = rough_obstruction(two_by_two(a12=1.0, k12=1.0, M=(0.0, 1.0)), 1.0)
        assert result.obstructed and result.witness_dim == 1

    def test_hyperbolic_control_sees(self):
        assert not rough_obstruction(two_by_two(a21=1.0, k21=1.0), 1.0).obstructed

    @given(valid_specs())
    def test_full_control_never_obstructed(self, spec):
        full = validate(spec.d_h, spec.d_p, spec.D, spec.A, spec.K, np.eye(spec.d))
        for mu in full.transport.eigenvalues:
            assert not rough_obstruction(full, mu).obstructed

    def test_unknown_eigenvalue(self):
        with pytest.raises(EigenvalueNotInSpectrum):
            rough_obstruction(two_by_two(), 0.5)


class TestAnalyze:

    def test_controllable(self):
        report = analyze(two_by_two(a21=1.0, k21=1.0), HALF, 2 * np.pi)
        assert report.verdict is Verdict.CONTROLLABLE_REGULAR
        assert report.p_index == 0 and report.exceptional == ()
        assert report.t_star == pytest.approx(np.pi)

    def test_too_short(self):
        report = analyze(two_by_two(a21=1.0, k21=1.0), HALF, np.pi / 2)
        assert report.verdict is Verdict.TOO_SHORT

    def test_boundary_reported_open(self):
        report = analyze(two_by_two(a21=1.0, k21=1.0), HALF, np.pi)
        assert report.verdict is Verdict.BOUNDARY
        assert report.notes

    def test_never(self):
        report = analyze(two_by_two(a12=1.0), HALF, 10.0)
        assert report.verdict is Verdict.NEVER
        assert report.to_dict()["k0"] == "never-full-rank"

    @settings(max_examples=40)
    @given(nested_subsets(), st.floats(0.1, 20.0, allow_nan=False))
    def test_monotone_in_omega(self, pair, T):
        inner, outer = pair
        spec = two_by_two(a21=1.0, k21=1.0)
        assert t_star(spec, outer) <= t_star(spec, inner)
        rank = {Verdict.TOO_SHORT: 0, Verdict.BOUNDARY: 1, Verdict.CONTROLLABLE_REGULAR: 2}
        assert rank[analyze(spec, outer, T).verdict] >= rank[analyze(spec, inner, T).verdict]


class TestCasebook:

    @pytest.mark.parametrize("case", CASES + (SMOKE,), ids=lambda c: c.name)
    def test_case(self, case):
        result = check(case)
        assert result.passed, result.diffs

    def test_lookup(self):
        assert get_case("2x2-sim-int").exceptional == (-3, 3)
        with pytest.raises(KeyError):
            get_case("3x3")
