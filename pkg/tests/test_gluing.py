"""Tests for exact gluing data, the projection and its properties."""

import numpy as np
import pytest

from igac1.errors import ProjectionError
from igac1.geometry import TwoPatchDomain, bilinear_patch, catalog
from igac1.gluing import (
    AS_G1_GAMMA1,
    NOT_AS_G1_GAMMA1,
    classify_as_g1,
    exact_gluing,
    g1_residual,
    modify_beta_for_boundary,
    project_gluing,
)

ALL_NAMES = ("ex1", "ex2", "ex3", "ex4")


def unit_squares():
    left = bilinear_patch((0, 0), (-1, 0), (0, 1), (-1, 1))
    right = bilinear_patch((0, 0), (1, 0), (0, 1), (1, 1))
    return TwoPatchDomain(left, right)


def project_catalog(name, p_tilde, r_tilde, h2):
    dom = catalog(name)
    data = exact_gluing(dom)
    _, r_hat2, h_hat2 = dom.vmesh()
    return dom, data, project_gluing(data, p_tilde, r_tilde, h2, h_hat2, r_hat2)


class TestExactGluing:
    def test_axis_aligned_squares(self):
        data = exact_gluing(unit_squares())
        for v in np.linspace(0, 1, 11):
            al, ar, bl, br, b = data.values(v)
            assert al == pytest.approx(-1.0, abs=1e-15)
            assert ar == pytest.approx(1.0, abs=1e-15)
            assert bl == br == b == 0.0

    def test_sheared_left_patch_hand_derived(self):
        # hand differentiation of the bilinear map gives
        # alpha_L = -1, beta_L = 0.5 (1 - v), beta = -0.5 (1 - v)
        left = bilinear_patch((0, 0), (-1, 0.5), (0, 1), (-1, 1))
        right = bilinear_patch((0, 0), (1, 0), (0, 1), (1, 1))
        data = exact_gluing(TwoPatchDomain(left, right))
        for v in np.linspace(0, 1, 21):
            assert data.alpha("L", v)[0] == pytest.approx(-1.0, abs=1e-14)
            assert data.beta_s("L", v)[0] == pytest.approx(0.5 * (1 - v), abs=1e-14)
            assert data.beta(v)[0] == pytest.approx(-0.5 * (1 - v), abs=1e-14)

    @pytest.mark.parametrize("name", ALL_NAMES)
    def test_splitting_identity(self, name):
        # beta = alpha_L beta_R - alpha_R beta_L at many samples
        data = exact_gluing(catalog(name))
        rng = np.random.default_rng(9)
        for v in rng.uniform(0, 1, 500 if name == "ex2" else 250):
            al, ar, bl, br, b = data.values(v)
            assert abs(b - (al * br - ar * bl)) < 1e-12

    def test_derivatives_match_finite_differences(self):
        data = exact_gluing(catalog("ex2"))
        step = 1e-6
        for v in (0.2, 0.47, 0.8):
            for fn in (
                lambda t: data.alpha("L", t, 1),
                lambda t: data.beta_s("R", t, 1),
            ):
                ref = (fn(v + step)[0] - fn(v - step)[0]) / (2 * step)
                assert fn(v)[1] == pytest.approx(ref, rel=1e-6, abs=1e-8)

    def test_alpha_signs(self):
        for name in ALL_NAMES:
            data = exact_gluing(catalog(name))
            for v in np.linspace(0, 1, 64):
                assert data.alpha("L", v)[0] < 0 < data.alpha("R", v)[0]


class TestG1Residual:
    @pytest.mark.parametrize("name", ALL_NAMES)
    def test_exact_data_residual_vanishes(self, name):
        dom = catalog(name)
        assert g1_residual(dom, exact_gluing(dom), nsamples=401) < 1e-12

    def test_linear_data_reproduced_by_degree_one(self):
        dom, _, approx = project_catalog("ex1", 1, 0, 0.25)
        assert g1_residual(dom, approx, nsamples=401) < 1e-12

    def test_residual_decays_at_projection_order(self):
        dom, data, _ = project_catalog("ex2", 2, 1, 0.5)
        res = []
        for level in range(1, 8):
            approx = project_gluing(data, 2, 1, 2.0 ** -level)
            res.append(g1_residual(dom, approx, nsamples=401))
        orders = [np.log2(a / b) for a, b in zip(res[-3:-1], res[-2:])]
        for q in orders:
            assert 2.6 < q < 3.4


class TestProjector:
    def test_member_reproduction(self):
        # oracle-free: inputs built from the target space itself
        _, _, approx = project_catalog("ex2", 3, 2, 0.25)
        space = approx.space_alpha
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(50):
            coeffs = rng.standard_normal((space.dim, 4)) * 0.5
            coeffs[:, 0] -= 2.0  # alpha_L stays negative
            coeffs[:, 1] += 2.0  # alpha_R stays positive
            fake = _SplineData(space, coeffs)
            out = project_gluing(fake, 3, 2, 0.25)
            for v in np.linspace(0, 1, 47):
                ref = fake.values(v)
                got = out.values(v)
                worst = max(worst, max(abs(a - b) for a, b in zip(ref[:4], got[:4])))
        assert worst < 1e-11

    def test_constant_reproduced(self):
        space_probe = project_catalog("ex1", 2, 1, 0.25)[2].space_alpha
        fake = _SplineData(
            space_probe,
            np.column_stack(
                [
                    np.full(space_probe.dim, -1.0),
                    np.full(space_probe.dim, 1.0),
                    np.zeros(space_probe.dim),
                    np.zeros(space_probe.dim),
                ]
            ),
        )
        out = project_gluing(fake, 2, 1, 0.25)
        for v in np.linspace(0, 1, 33):
            assert out.alpha("L", v)[0] == pytest.approx(-1.0, abs=1e-12)

    def test_boundary_interpolation(self):
        for name in ALL_NAMES:
            dom, data, approx = project_catalog(name, 2, 1, 0.125)
            for vbar in (0.0, 1.0):
                for side in "LR":
                    assert abs(
                        approx.alpha(side, vbar)[0] - data.alpha(side, vbar)[0]
                    ) < 1e-12
                    assert abs(
                        approx.beta_s(side, vbar)[0] - data.beta_s(side, vbar)[0]
                    ) < 1e-12

    def test_sup_error_order(self):
        # dense-sampling sup-norm oracle, degree 3 projection of beta_R
        _, data, _ = project_catalog("ex2", 3, 2, 0.5)
        vs = np.linspace(0, 1, 801)
        exact_vals = np.array([data.beta_s("R", v)[0] for v in vs])
        sups = []
        for level in range(1, 6):
            approx = project_gluing(data, 3, 2, 2.0 ** -level)
            vals = np.array([approx.beta_s("R", v)[0] for v in vs])
            sups.append(np.max(np.abs(vals - exact_vals)))
        orders = [np.log2(a / b) for a, b in zip(sups[-3:-1], sups[-2:])]
        assert orders[-1] == pytest.approx(4.0, abs=0.5)

    def test_stability_budget(self):
        # empirical sup-norm stability on smooth test functions
        _, data, probe = project_catalog("ex2", 2, 1, 0.125)
        space = probe.space_alpha
        rng = np.random.default_rng(11)
        vs = np.linspace(0, 1, 257)
        for _ in range(100):
            k = rng.integers(1, 5)
            a, b, c = rng.standard_normal(3)
            f = lambda v: a * np.sin(np.pi * k * v) + b * np.cos(np.pi * k * v) + c * v
            fake = _CallableData(f)
            out = project_gluing(fake, 2, 1, 0.125)
            fnorm = np.max(np.abs([f(v) for v in vs]))
            pnorm = np.max(np.abs([out.beta_s("L", v)[0] for v in vs]))
            assert pnorm <= 2.0 * fnorm + 1e-12

    def test_sign_loss_raises(self):
        space = project_catalog("ex1", 2, 1, 0.25)[2].space_alpha
        coeffs = np.column_stack(
            [
                np.linspace(-1.0, 1.0, space.dim),  # alpha_L crosses zero
                np.full(space.dim, 1.0),
                np.zeros(space.dim),
                np.zeros(space.dim),
            ]
        )
        with pytest.raises(ProjectionError, match="sign"):
            project_gluing(_SplineData(space, coeffs), 2, 1, 0.25)


class _SplineData:
    """Gluing-data stand-in whose four functions live in a given space."""

    def __init__(self, space, coeffs):
        self.space = space
        self.coeffs = coeffs  # columns: alpha_L, alpha_R, beta_L, beta_R

    def alpha(self, side, v, nderiv=0):
        col = 0 if side == "L" else 1
        return self.space.eval_spline(self.coeffs[:, col], v, nderiv)

    def beta_s(self, side, v, nderiv=0):
        col = 2 if side == "L" else 3
        return self.space.eval_spline(self.coeffs[:, col], v, nderiv)

    def values(self, v):
        al = self.alpha("L", v)[0]
        ar = self.alpha("R", v)[0]
        bl = self.beta_s("L", v)[0]
        br = self.beta_s("R", v)[0]
        return al, ar, bl, br, al * br - ar * bl


class _CallableData:
    """All four gluing functions equal to f, except sign-safe alphas."""

    def __init__(self, f):
        self.f = f

    def alpha(self, side, v, nderiv=0):
        out = np.zeros(nderiv + 1)
        out[0] = -2.0 if side == "L" else 2.0
        return out

    def beta_s(self, side, v, nderiv=0):
        out = np.zeros(nderiv + 1)
        out[0] = self.f(v)
        if nderiv >= 1:
            step = 1e-7
            out[1] = (self.f(v + step) - self.f(v - step)) / (2 * step)
        return out


class TestBoundaryModification:
    def test_single_end_zeroes_beta(self):
        _, _, approx = project_catalog("ex3", 2, 1, 0.125)
        out = modify_beta_for_boundary(approx, 0)
        for side in "LR":
            assert abs(out.beta_s(side, 0.0)[0]) < 1e-13
        assert out.boundary_modified == (True, False)

    def test_combined_beta_unchanged(self):
        _, _, approx = project_catalog("ex2", 2, 1, 0.125)
        out = modify_beta_for_boundary(modify_beta_for_boundary(approx, 0), 1)
        for v in np.linspace(0, 1, 101):
            assert abs(out.beta(v)[0] - approx.beta(v)[0]) < 1e-12

    def test_both_ends_zero_after_affine_blend(self):
        _, _, approx = project_catalog("ex2", 2, 1, 0.125)
        out = modify_beta_for_boundary(modify_beta_for_boundary(approx, 0), 1)
        for side in "LR":
            assert abs(out.beta_s(side, 0.0)[0]) < 1e-13
            assert abs(out.beta_s(side, 1.0)[0]) < 1e-13
        assert out.space_beta.degree == approx.space_beta.degree + 1

    def test_identity_when_beta_already_zero(self):
        _, _, approx = project_catalog("ex1", 1, 0, 0.25)
        out = modify_beta_for_boundary(approx, 0)
        assert out.space_beta.degree == approx.space_beta.degree
        for v in np.linspace(0, 1, 33):
            for side in "LR":
                assert out.beta_s(side, v)[0] == pytest.approx(
                    approx.beta_s(side, v)[0], abs=1e-15
                )

    def test_corner_end_rejected(self):
        _, _, approx = project_catalog("ex3", 2, 1, 0.125)
        with pytest.raises(ProjectionError, match="beta"):
            modify_beta_for_boundary(approx, 1)


class TestClassification:
    def test_catalog(self):
        assert classify_as_g1(exact_gluing(catalog("ex1"))) == AS_G1_GAMMA1
        for name in ("ex2", "ex3", "ex4"):
            assert classify_as_g1(exact_gluing(catalog(name))) == NOT_AS_G1_GAMMA1

    def test_mirrored_patches_constant_data(self):
        dom = unit_squares()
        assert classify_as_g1(exact_gluing(dom)) == AS_G1_GAMMA1
