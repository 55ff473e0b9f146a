"""Tests for patches, two-patch domains, the catalog and geometry files."""

import numpy as np
import pytest

from igac1.errors import GeometryError
from igac1.geometry import (
    Patch,
    TwoPatchDomain,
    bilinear_patch,
    catalog,
    load_geometry,
    save_geometry,
)
from igac1.gluing import exact_gluing
from igac1.splines import make_uniform_space

ALL_NAMES = ("ex1", "ex2", "ex3", "ex4")


def fd_patch_derivative(patch, u, v, direction, step=1e-6):
    """Oracle: central finite differences of the geometry map."""
    if direction == "u":
        a = patch.derivs(u + step, v, 0, 0)[0, 0]
        b = patch.derivs(u - step, v, 0, 0)[0, 0]
    else:
        a = patch.derivs(u, v + step, 0, 0)[0, 0]
        b = patch.derivs(u, v - step, 0, 0)[0, 0]
    return (a - b) / (2 * step)


def unit_squares_domain():
    left = bilinear_patch((0, 0), (-1, 0), (0, 1), (-1, 1))
    right = bilinear_patch((0, 0), (1, 0), (0, 1), (1, 1))
    return TwoPatchDomain(left, right)


class TestPatchEval:
    def test_identity_patch(self):
        patch = bilinear_patch((0, 0), (1, 0), (0, 1), (1, 1))
        F, Fu, Fv = patch.eval(0.3, 0.8, 1)
        np.testing.assert_allclose(F, [0.3, 0.8], atol=1e-15)
        np.testing.assert_allclose(Fu, [1, 0], atol=1e-15)
        np.testing.assert_allclose(Fv, [0, 1], atol=1e-15)

    def test_bilinear_corner_interpolation(self):
        patch = bilinear_patch((0, 0), (1, 0), (0, 1), (2, 1))
        F = patch.eval(1.0, 1.0)[0]
        np.testing.assert_allclose(F, [2, 1], atol=1e-15)

    def test_derivatives_match_finite_differences(self):
        patch = catalog("ex2").left
        for u in (0.12, 0.5, 0.83):
            for v in (0.2, 0.61, 0.97):
                d = patch.derivs(u, v, 1, 1)
                for direction, got in (("u", d[1, 0]), ("v", d[0, 1])):
                    ref = fd_patch_derivative(patch, u, v, direction)
                    assert np.max(np.abs(got - ref)) < 1e-6

    def test_out_of_range(self):
        patch = catalog("ex1").left
        with pytest.raises(ValueError):
            patch.eval(1.3, 0.5)

    def test_deriv_order_guard(self):
        with pytest.raises(GeometryError):
            catalog("ex1").left.eval(0.5, 0.5, 3)


class TestInterfaceFrame:
    def test_axis_aligned_squares(self):
        dom = unit_squares_domain()
        f = dom.interface_frame(0.4)
        np.testing.assert_allclose(f.t0, [0, 1], atol=1e-15)
        np.testing.assert_allclose(f.n, [1, 0], atol=1e-15)
        assert f.tau == pytest.approx(1.0)

    def test_normal_matches_gram_schmidt(self):
        # oracle: orthonormalize d_u F against t0 and fix the sign with
        # the outward convention for the left patch
        dom = catalog("ex2")
        for v in np.linspace(0.05, 0.95, 9):
            f = dom.interface_frame(v)
            du = dom.left.derivs(0.0, v, 1, 0)[1, 0]
            w = du - (du @ f.t0) * f.t0
            w /= np.hypot(*w)
            if w @ du > 0:  # d_u F_L points into the left patch
                w = -w
            np.testing.assert_allclose(f.n, w, atol=1e-12)

    def test_frame_orthonormality(self):
        rng = np.random.default_rng(42)
        dom = catalog("ex3")
        for v in rng.uniform(0, 1, 200):
            f = dom.interface_frame(v)
            assert abs(f.n @ f.t0) < 1e-13
            assert abs(np.hypot(*f.n) - 1.0) < 1e-13

    def test_sides_agree(self):
        for name in ALL_NAMES:
            dom = catalog(name)
            for v in np.linspace(0, 1, 200):
                dom.interface_frame(v, cross_check=True)  # raises beyond 1e-10


class TestC0Matching:
    def test_catalog_passes(self):
        rep = catalog("ex1").check_c0_matching()
        assert rep.passed and rep.max_gap < 1e-12

    def test_perturbed_control_point_fails(self):
        left = bilinear_patch((0, 0), (-1, 0), (0, 1), (-1, 1))
        right = bilinear_patch((0, 1e-3), (1, 0), (0, 1), (1, 1))
        with pytest.raises(GeometryError, match="C0"):
            TwoPatchDomain(left, right)
        dom = TwoPatchDomain(left, right, validate=False)
        rep = dom.check_c0_matching()
        # gap equals the perturbation times the basis value at the corner
        assert not rep.passed
        assert rep.max_gap == pytest.approx(1e-3, rel=1e-9)

    def test_identical_interface_gap_zero(self):
        assert unit_squares_domain().check_c0_matching().max_gap == 0.0


class TestCatalog:
    @pytest.mark.parametrize("name", ALL_NAMES)
    def test_validates(self, name):
        catalog(name).validate()

    @pytest.mark.parametrize("name", ALL_NAMES)
    def test_regularity_on_fine_grid(self, name):
        for side in "LR":
            mindet, flipped = catalog(name).patch(side).min_jacobian_det(101)
            assert mindet > 0.0 and not flipped

    @pytest.mark.parametrize("name", ALL_NAMES)
    def test_orientation_convention(self, name):
        dom = catalog(name)
        for v in np.linspace(0, 1, 101):
            t = dom.interface_frame(v).t
            dl = dom.left.derivs(0.0, v, 1, 0)[1, 0]
            dr = dom.right.derivs(0.0, v, 1, 0)[1, 0]
            assert dl[0] * t[1] - dl[1] * t[0] < 0
            assert dr[0] * t[1] - dr[1] * t[0] > 0

    def test_ex1_linear_gluing_data(self):
        data = exact_gluing(catalog("ex1"))
        vs = np.linspace(0, 1, 50)
        for fn in (lambda v: data.alpha("L", v)[0], lambda v: data.alpha("R", v)[0]):
            vals = np.array([fn(v) for v in vs])
            coef = np.polyfit(vs, vals, 1)
            assert np.max(np.abs(vals - np.polyval(coef, vs))) < 1e-13

    def test_ex2_beta_nonlinear(self):
        data = exact_gluing(catalog("ex2"))
        vs = np.linspace(0, 1, 80)
        vals = np.array([data.beta(v)[0] for v in vs])
        coef = np.polyfit(vs, vals, 1)
        assert np.max(np.abs(vals - np.polyval(coef, vs))) > 1e-3

    def test_ex3_corner_and_smooth_end(self):
        data = exact_gluing(catalog("ex3"))
        assert abs(data.beta(0.0)[0]) < 1e-12
        assert abs(data.beta(1.0)[0]) > 0.1

    def test_ex4_gluing_only_c1(self):
        dom = catalog("ex4")
        p2, r_hat2, h_hat2 = dom.vmesh()
        assert (p2, r_hat2, h_hat2) == (3, 2, 0.5)

    def test_unknown_name(self):
        with pytest.raises(GeometryError):
            catalog("ex9")


class TestGeometryIO:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "ex1.txt"
        save_geometry(catalog("ex1"), path)
        dom = load_geometry(path)
        for side in "LR":
            np.testing.assert_allclose(
                dom.patch(side).net, catalog("ex1").patch(side).net, atol=1e-15
            )

    @pytest.mark.parametrize("name", ALL_NAMES)
    def test_round_trip_catalog(self, tmp_path, name):
        path = tmp_path / f"{name}.txt"
        save_geometry(catalog(name), path)
        dom = load_geometry(path)
        rep = dom.check_c0_matching()
        assert rep.passed

    def test_reoriented_patch_recovered(self, tmp_path):
        # write the left patch with u reversed; the loader must undo it
        dom = catalog("ex1")
        flipped = Patch(
            dom.left.space_u, dom.left.space_v, dom.left.net[::-1, :, :]
        )
        path = tmp_path / "flipped.txt"
        save_geometry(TwoPatchDomain(flipped, dom.right, validate=False), path)
        loaded = load_geometry(path)
        assert loaded.check_c0_matching().passed
        loaded.validate()

    def test_mismatched_interface_rejected(self, tmp_path):
        left = bilinear_patch((0, 0), (-1, 0), (0.05, 1), (-1, 1))
        right = bilinear_patch((0, 0), (1, 0), (0, 1), (1, 1))
        path = tmp_path / "bad.txt"
        save_geometry(TwoPatchDomain(left, right, validate=False), path)
        with pytest.raises(GeometryError, match="C0"):
            load_geometry(path)

    def test_low_regularity_geometry_rejected(self, tmp_path):
        # interior v-knot of multiplicity 3 leaves the map C0 only: the
        # gluing data is not differentiable
        sv = make_uniform_space(3, 0, 2)
        su = make_uniform_space(1, 0, 1)
        grev = sv.greville()
        gamma = np.column_stack([np.zeros(sv.dim), grev])
        left = Patch(su, sv, np.stack([gamma, np.column_stack([np.full(sv.dim, -1.0), grev])]))
        right = Patch(su, sv, np.stack([gamma, np.column_stack([np.full(sv.dim, 1.0), grev])]))
        path = tmp_path / "c0geo.txt"
        save_geometry(TwoPatchDomain(left, right, validate=False), path)
        with pytest.raises(GeometryError, match="assumption 4"):
            load_geometry(path)

    def test_not_a_geometry_file(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("hello\n")
        with pytest.raises(GeometryError, match="header"):
            load_geometry(path)
