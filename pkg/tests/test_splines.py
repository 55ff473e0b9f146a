"""Tests for the univariate/tensor spline spaces."""

import numpy as np
import pytest

from igac1.splines import (
    GrevilleInterpolator,
    KnotVector,
    SplineSpace1D,
    TensorSplineSpace,
    collocation_matrix,
    l2_project,
    make_mixed_space,
    make_uniform_space,
    polynomial_space,
)


def count_dimension(space):
    """Oracle: dimension = (#expanded knots) - p - 1."""
    return space.knots.size - space.degree - 1


def fd_derivative(space, coeffs, x, order, step=1e-6):
    """Oracle: central finite differences of the spline itself."""
    if order == 1:
        up = space.eval_spline(coeffs, x + step)[0]
        dn = space.eval_spline(coeffs, x - step)[0]
        return (up - dn) / (2 * step)
    up = space.eval_spline(coeffs, x + step)[0]
    mid = space.eval_spline(coeffs, x)[0]
    dn = space.eval_spline(coeffs, x - step)[0]
    return (up - 2 * mid + dn) / step**2


class TestConstruction:
    def test_uniform_dimension_p3(self):
        space = make_uniform_space(3, 1, 4)
        assert space.dim == 10
        assert space.dim == count_dimension(space)

    def test_linear_bernstein(self):
        space = make_uniform_space(1, 0, 1)
        assert space.dim == 2
        assert space.breakpoints.size == 2

    def test_uniform_dimension_p4(self):
        space = make_uniform_space(4, 3, 6)
        assert space.dim == count_dimension(space)
        assert space.dim == 10

    def test_mixed_dimension(self):
        # coarse knots 1/3, 2/3 keep multiplicity 2, fine-only knots get 1
        space = make_mixed_space(4, 3, 1.0 / 6.0, 2, 1.0 / 3.0)
        assert space.dim == count_dimension(space)
        assert space.dim == 12
        idx = {round(b * 6): m for b, m in zip(space.breakpoints, space.multiplicities_by_breakpoint())} \
            if hasattr(space, "multiplicities_by_breakpoint") else None
        mult = dict(zip(np.round(space.kv.breakpoints * 6).astype(int), space.kv.multiplicities))
        assert mult[2] == 2 and mult[4] == 2
        assert mult[1] == 1 and mult[3] == 1 and mult[5] == 1

    def test_mixed_collapses_to_uniform(self):
        a = make_mixed_space(3, 1, 0.25, 1, 0.25)
        b = make_uniform_space(3, 1, 4)
        assert a.kv == b.kv

    def test_mixed_no_coarse_interior(self):
        a = make_mixed_space(3, 2, 0.5, 1, 1.0)
        b = make_uniform_space(3, 2, 2)
        assert a.kv == b.kv

    def test_invalid_regularity(self):
        with pytest.raises(ValueError):
            make_uniform_space(3, 3, 4)
        with pytest.raises(ValueError):
            make_uniform_space(3, -1, 4)

    def test_invalid_elements(self):
        with pytest.raises(ValueError):
            make_uniform_space(3, 1, 0)

    def test_non_integer_coarse_ratio_rejected(self):
        with pytest.raises(ValueError):
            make_mixed_space(3, 1, 0.25, 1, 0.4)

    def test_knot_vector_invariants(self):
        with pytest.raises(ValueError):
            KnotVector(3, [0.0, 0.5, 1.0], [4, 4, 4])  # interior > p
        with pytest.raises(ValueError):
            KnotVector(3, [0.0, 1.0], [3, 4])  # boundary must be p+1
        with pytest.raises(ValueError):
            KnotVector(3, [0.0, 0.5, 0.5, 1.0], [4, 1, 1, 4])  # not increasing


class TestEvaluation:
    def test_partition_of_unity(self):
        rng = np.random.default_rng(7)
        for space in (
            make_uniform_space(3, 1, 4),
            make_uniform_space(5, 4, 8),
            make_mixed_space(4, 3, 1.0 / 6.0, 2, 1.0 / 3.0),
        ):
            for x in rng.uniform(0.0, 1.0, size=1000):
                _, ders = space.eval_basis(x, 0)
                assert abs(ders[0].sum() - 1.0) < 1e-12

    def test_derivative_rows_sum_to_zero(self):
        space = make_uniform_space(4, 2, 5)
        for x in np.linspace(0.013, 0.987, 23):
            _, ders = space.eval_basis(x, 2)
            assert abs(ders[1].sum()) < 1e-9
            assert abs(ders[2].sum()) < 1e-7

    def test_endpoint_values_p3(self):
        space = make_uniform_space(3, 1, 4)
        first, ders = space.eval_basis(0.0, 1)
        assert first == 0
        assert ders[0, 0] == pytest.approx(1.0, abs=1e-14)
        # second basis function derivative at 0 equals p / h = 12
        assert ders[1, 1] == pytest.approx(12.0, rel=1e-13)
        assert ders[1, 0] == pytest.approx(-12.0, rel=1e-13)

    def test_linear_hats(self):
        space = make_uniform_space(1, 0, 1)
        _, ders = space.eval_basis(0.25, 0)
        np.testing.assert_allclose(ders[0], [0.75, 0.25], atol=1e-15)

    def test_derivatives_match_finite_differences(self):
        rng = np.random.default_rng(3)
        for space in (make_uniform_space(3, 1, 4), make_mixed_space(4, 3, 1 / 6, 2, 1 / 3)):
            coeffs = rng.standard_normal(space.dim)
            for x in rng.uniform(0.05, 0.95, size=40):
                # keep away from knots where one-sided limits differ
                if np.min(np.abs(space.breakpoints - x)) < 1e-3:
                    continue
                d1 = space.eval_spline(coeffs, x, 1)[1]
                d2 = space.eval_spline(coeffs, x, 2)[2]
                ref1 = fd_derivative(space, coeffs, x, 1)
                ref2 = fd_derivative(space, coeffs, x, 2)
                assert abs(d1 - ref1) < 1e-6 * max(1.0, abs(ref1))
                assert abs(d2 - ref2) < 2e-4 * max(1.0, abs(ref2))

    def test_local_support(self):
        space = make_uniform_space(3, 1, 4)
        U = space.knots
        p = space.degree
        xs = np.linspace(0.0, 1.0, 401)
        for x in xs:
            row = space.eval_all(x)[0]
            for i in np.nonzero(np.abs(row) > 1e-14)[0]:
                assert U[i] - 1e-12 <= x <= U[i + p + 1] + 1e-12

    def test_out_of_range_rejected(self):
        space = make_uniform_space(3, 1, 4)
        with pytest.raises(ValueError):
            space.eval_basis(-0.01)
        with pytest.raises(ValueError):
            space.eval_basis(1.01)

    def test_right_limit_convention(self):
        # C0 knot at 0.5: value continuous, slope jumps; x=0.5 must give the
        # right-hand slope, side='left' the left-hand one
        space = make_uniform_space(2, 0, 2)
        coeffs = np.arange(space.dim, dtype=float) ** 2
        right = space.eval_spline(coeffs, 0.5, 1)[1]
        left = space.eval_spline(coeffs, 0.5, 1, side="left")[1]
        just_right = space.eval_spline(coeffs, 0.5 + 1e-9, 1)[1]
        just_left = space.eval_spline(coeffs, 0.5 - 1e-9, 1)[1]
        assert abs(right - just_right) < 1e-6
        assert abs(left - just_left) < 1e-6
        assert abs(left - right) > 1e-3

    def test_value_at_one_uses_left_limit(self):
        space = make_uniform_space(3, 1, 4)
        first, ders = space.eval_basis(1.0, 0)
        assert first + space.degree == space.dim - 1
        assert ders[0, -1] == pytest.approx(1.0, abs=1e-14)


class TestRefinement:
    def test_uniform_halving(self):
        a = make_uniform_space(3, 1, 2).refine_halve()
        assert a.kv == make_uniform_space(3, 1, 4).kv

    def test_mixed_halving_keeps_coarse_knots(self):
        a = make_mixed_space(4, 3, 1 / 6, 2, 1 / 3).refine_halve()
        b = make_mixed_space(4, 3, 1 / 12, 2, 1 / 3)
        assert a.kv == b.kv

    def test_dimension_after_refinement_matches_recount(self):
        for space in (make_uniform_space(3, 2, 3), make_mixed_space(5, 4, 1 / 4, 2, 1 / 2)):
            ref = space.refine_halve()
            assert ref.dim == count_dimension(ref)

    def test_nesting_via_l2_projection(self):
        rng = np.random.default_rng(11)
        coarse = make_uniform_space(3, 1, 2)
        fine = coarse.refine_halve()
        coeffs = rng.standard_normal(coarse.dim)
        f = lambda x: coarse.eval_spline(coeffs, x)[0]
        cf = l2_project(fine, f)
        for x in np.linspace(0, 1, 157):
            assert abs(fine.eval_spline(cf, x)[0] - f(x)) < 1e-10


class TestInterpolation:
    def test_greville_reproduction(self):
        rng = np.random.default_rng(5)
        space = make_mixed_space(5, 2, 1 / 4, 1, 1 / 2)
        interp = GrevilleInterpolator(space)
        coeffs = rng.standard_normal(space.dim)
        fitted = interp.fit(lambda x: space.eval_spline(coeffs, x)[0])
        np.testing.assert_allclose(fitted, coeffs, atol=1e-11)

    def test_collocation_matrix_is_square_and_nonsingular(self):
        space = make_uniform_space(4, 1, 5)
        A = collocation_matrix(space, space.greville())
        assert A.shape == (space.dim, space.dim)
        assert np.linalg.matrix_rank(A) == space.dim

    def test_polynomial_space(self):
        space = polynomial_space(3)
        assert space.dim == 4
        assert space.nelements == 1


class TestTensor:
    def test_flat_index_bijection(self):
        ts = TensorSplineSpace(make_uniform_space(3, 1, 2), make_uniform_space(2, 1, 3))
        n1, n2 = ts.shape
        assert ts.dim == n1 * n2
        seen = set()
        for i2 in range(n2):
            for i1 in range(n1):
                k = ts.flat_index(i1, i2)
                assert ts.unflatten(k) == (i1, i2)
                seen.add(k)
        assert seen == set(range(ts.dim))
