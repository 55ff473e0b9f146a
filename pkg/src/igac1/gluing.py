"""Gluing data along the interface and its spline approximation.

The exact gluing data of a two-patch domain (with the free scaling fixed
to one) is

    alpha_R(v) = det(d_u F_R(0,v), t(v))
    alpha_L(v) = det(d_u F_L(0,v), t(v))
    beta(v)    = det(d_u F_L(0,v), d_u F_R(0,v))

together with the (non-unique) splitting

    beta_S(v)  = d_u F_S(0,v) . t(v) / |t(v)|^2

which satisfies beta = alpha_L beta_R - alpha_R beta_L.  The alphas are
piecewise polynomial, the beta_S generally piecewise rational; both are
evaluated pointwise from patch derivatives, never simplified
symbolically.

``project_gluing`` approximates the four functions in a spline space of
prescribed degree and regularity by a constrained least-squares fit that
preserves members of the target space, interpolates at v = 0 and v = 1,
and matches values and derivatives of the input at interior geometry
knots (which glues the per-segment fits to the full target regularity).
"""

from math import comb

import numpy as np
from scipy.linalg import lstsq, null_space

from .errors import ProjectionError
from .splines import MixedPattern, _space_from_pattern, gauss_rule

AS_G1_GAMMA1 = "AS_G1_gamma1"
NOT_AS_G1_GAMMA1 = "not_AS_G1_gamma1"

SIGN_SAMPLES = 1001


def _det2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


class GluingData:
    """Exact interface gluing data evaluated from the patch geometry.

    Evaluators return value and derivatives up to order 2 with respect
    to the interface parameter.
    """

    def __init__(self, domain):
        self.domain = domain

    def _edge_derivs(self, side, v, order):
        # a^(i) = d_v^i (d_u F)(0, v),  t^(i) = d_v^(i+1) F(0, v)
        d = self.domain.patch(side).derivs(0.0, v, 1, order + 1)
        return d[1, :order + 1], d[0, 1:order + 2]

    def alpha(self, side, v, nderiv=0):
        """det(d_u F_S, t) and its v-derivatives; shape (nderiv + 1,)."""
        a, t = self._edge_derivs(side, v, nderiv)
        out = np.empty(nderiv + 1)
        for k in range(nderiv + 1):
            out[k] = sum(comb(k, i) * _det2(a[i], t[k - i]) for i in range(k + 1))
        return out

    def beta(self, v, nderiv=0):
        """det(d_u F_L, d_u F_R) and its v-derivatives."""
        al, _ = self._edge_derivs("L", v, nderiv)
        ar, _ = self._edge_derivs("R", v, nderiv)
        out = np.empty(nderiv + 1)
        for k in range(nderiv + 1):
            out[k] = sum(comb(k, i) * _det2(al[i], ar[k - i]) for i in range(k + 1))
        return out

    def beta_s(self, side, v, nderiv=0):
        """Rational splitting component (d_u F_S . t) / |t|^2."""
        if nderiv > 2:
            raise ValueError("beta_s derivatives supported up to order 2")
        a, t = self._edge_derivs(side, v, nderiv)
        num = np.empty(nderiv + 1)
        den = np.empty(nderiv + 1)
        for k in range(nderiv + 1):
            num[k] = sum(comb(k, i) * (a[i] @ t[k - i]) for i in range(k + 1))
            den[k] = sum(comb(k, i) * (t[i] @ t[k - i]) for i in range(k + 1))
        out = np.empty(nderiv + 1)
        out[0] = num[0] / den[0]
        if nderiv >= 1:
            out[1] = (num[1] - out[0] * den[1]) / den[0]
        if nderiv >= 2:
            out[2] = (num[2] - 2.0 * out[1] * den[1] - out[0] * den[2]) / den[0]
        return out

    def values(self, v):
        """Convenience: (alpha_L, alpha_R, beta_L, beta_R, beta) at v."""
        return (
            self.alpha("L", v)[0],
            self.alpha("R", v)[0],
            self.beta_s("L", v)[0],
            self.beta_s("R", v)[0],
            self.beta(v)[0],
        )


def exact_gluing(domain):
    """Exact gluing data evaluators for a validated domain."""
    return GluingData(domain)


class ApproxGluingData:
    """Spline approximations of the four gluing functions.

    The alphas live in the projection space; the betas start there as
    well but may be carried in a once-degree-raised space after the
    boundary modification that zeroes them at smooth interface ends.
    """

    def __init__(self, space_alpha, alpha_l, alpha_r, space_beta, beta_l, beta_r,
                 p_tilde, r_tilde, boundary_modified=(False, False)):
        self.space_alpha = space_alpha
        self.space_beta = space_beta
        self._alpha = {"L": np.asarray(alpha_l, float), "R": np.asarray(alpha_r, float)}
        self._beta = {"L": np.asarray(beta_l, float), "R": np.asarray(beta_r, float)}
        self.p_tilde = int(p_tilde)
        self.r_tilde = int(r_tilde)
        self.boundary_modified = tuple(boundary_modified)

    def alpha(self, side, v, nderiv=0):
        return self.space_alpha.eval_spline(self._alpha[side], v, nderiv)

    def beta_s(self, side, v, nderiv=0):
        return self.space_beta.eval_spline(self._beta[side], v, nderiv)

    def beta(self, v, nderiv=0):
        """Combined function alpha_L beta_R - alpha_R beta_L (with derivatives)."""
        al = self.alpha("L", v, nderiv)
        ar = self.alpha("R", v, nderiv)
        bl = self.beta_s("L", v, nderiv)
        br = self.beta_s("R", v, nderiv)
        out = np.empty(nderiv + 1)
        for k in range(nderiv + 1):
            out[k] = sum(
                comb(k, i) * (al[i] * br[k - i] - ar[i] * bl[k - i])
                for i in range(k + 1)
            )
        return out

    def alpha_coeffs(self, side):
        return self._alpha[side].copy()

    def beta_coeffs(self, side):
        return self._beta[side].copy()

    def values(self, v):
        return (
            self.alpha("L", v)[0],
            self.alpha("R", v)[0],
            self.beta_s("L", v)[0],
            self.beta_s("R", v)[0],
            self.beta(v)[0],
        )


def _projection_space(p_tilde, r_tilde, h2, r_hat2, h_hat2):
    r_hat = None
    if r_hat2 is not None and h_hat2 < 1.0:
        r_hat = r_hat2 - 1
    if r_tilde >= p_tilde and r_hat is None:
        # polynomial reproduction: knot-free space of degree p_tilde
        return _space_from_pattern(p_tilde, MixedPattern(p_tilde - 1, 1.0))
    return _space_from_pattern(p_tilde, MixedPattern(r_tilde, h2, r_hat, h_hat2))


def _constrained_fit(space, funcs, constraint_order, npoints, h_hat=None):
    """Least-squares fit in ``space`` with end-point interpolation and
    derivative matching (up to ``constraint_order``) at the interior
    coarse knots ``j * h_hat``.

    ``funcs`` is a list of callables f(v, nderiv) -> array; returns one
    coefficient column per callable.
    """
    xs, ws = gauss_rule(npoints)
    rows, rhs = [], []
    for e in range(space.nelements):
        a, b = space.breakpoints[e], space.breakpoints[e + 1]
        for x, w in zip(a + (b - a) * xs, (b - a) * ws):
            sw = np.sqrt(w)
            rows.append(sw * space.eval_all(x)[0])
            rhs.append([sw * f(x, 0)[0] for f in funcs])
    A = np.asarray(rows)
    b = np.asarray(rhs)

    cons_rows, cons_rhs = [], []
    for x in (0.0, 1.0):
        cons_rows.append(space.eval_all(x)[0])
        cons_rhs.append([f(x, 0)[0] for f in funcs])
    if h_hat is not None and h_hat < 1.0:
        coarse = [
            x for x in space.breakpoints[1:-1]
            if abs(x / h_hat - round(x / h_hat)) < 1e-10
        ]
        for x in coarse:
            dense = space.eval_all(x, constraint_order)
            vals = [f(x, constraint_order) for f in funcs]
            for k in range(constraint_order + 1):
                cons_rows.append(dense[k])
                cons_rhs.append([val[k] for val in vals])
    C = np.asarray(cons_rows)
    d = np.asarray(cons_rhs)

    xp = lstsq(C, d, lapack_driver="gelsd")[0]
    N = null_space(C)
    if N.shape[1]:
        z = lstsq(A @ N, b - A @ xp, lapack_driver="gelsd")[0]
        xp = xp + N @ z
    return xp


def project_gluing(data, p_tilde, r_tilde, h2, h_hat2=1.0, r_hat2=None):
    """Project the four gluing functions into the spline space of degree
    ``p_tilde``, regularity ``r_tilde`` at fine knots and ``r_hat2 - 1``
    at the coarse geometry knots.

    The fit preserves splines of the target space, interpolates the
    input at v = 0 and v = 1, and is locally accurate of order
    ``p_tilde + 1``.  Raises ProjectionError if the projected alphas do
    not keep their sign (refine the interface mesh in that case).
    """
    p_tilde, r_tilde = int(p_tilde), int(r_tilde)
    if p_tilde < 1:
        raise ValueError("gluing approximation degree must be at least 1")
    if not 0 <= r_tilde <= p_tilde:
        raise ValueError(f"gluing regularity {r_tilde} invalid for degree {p_tilde}")
    space = _projection_space(p_tilde, r_tilde, h2, r_hat2, h_hat2)
    constraint_order = 0 if r_hat2 is None else min(r_hat2 - 1, 2)
    funcs = [
        lambda v, k: data.alpha("L", v, k),
        lambda v, k: data.alpha("R", v, k),
        lambda v, k: data.beta_s("L", v, k),
        lambda v, k: data.beta_s("R", v, k),
    ]
    coeffs = _constrained_fit(
        space, funcs, constraint_order, 4 * (p_tilde + 1),
        h_hat=None if r_hat2 is None else h_hat2,
    )
    approx = ApproxGluingData(
        space, coeffs[:, 0], coeffs[:, 1], space, coeffs[:, 2], coeffs[:, 3],
        p_tilde, r_tilde,
    )
    for v in np.linspace(0.0, 1.0, SIGN_SAMPLES):
        al = approx.alpha("L", v)[0]
        ar = approx.alpha("R", v)[0]
        if not (al < 0.0 < ar):
            raise ProjectionError(
                f"projected gluing data loses its sign at v={v:.4f} "
                f"(alpha_L={al:.3e}, alpha_R={ar:.3e}); refine the interface mesh"
            )
    return approx


def g1_residual(domain, data, nsamples=1601):
    """Sup-norm of the first-order matching defect along the interface.

    For exact gluing data the defect vanishes identically; for projected
    data it decays like the approximation error of the gluing data.
    """
    worst = 0.0
    for v in np.linspace(0.0, 1.0, nsamples):
        dl = domain.left.derivs(0.0, v, 1, 1)
        dr = domain.right.derivs(0.0, v, 1, 1)
        al = data.alpha("L", v)[0]
        ar = data.alpha("R", v)[0]
        beta = data.beta(v)[0]
        res = ar * dl[1, 0] - al * dr[1, 0] + beta * dr[0, 1]
        worst = max(worst, float(np.hypot(*res)))
    return worst


def modify_beta_for_boundary(approx, end, tol=1e-10):
    """Shift the beta components by a multiple of the alphas so they
    vanish at the given interface end (0 or 1).

    Requires the combined beta to vanish there (smooth boundary); the
    combined function is unchanged by the shift.  When the other end has
    already been modified, the shift is blended linearly so both ends
    stay zero; the stored beta degree grows by one in that case.
    """
    if end not in (0, 1):
        raise ValueError("end must be 0 or 1")
    vbar = float(end)
    beta_bar = approx.beta(vbar)[0]
    scale = max(abs(approx.alpha("L", vbar)[0]), abs(approx.alpha("R", vbar)[0]))
    if abs(beta_bar) > tol * max(1.0, scale):
        raise ProjectionError(
            f"boundary modification needs beta({vbar}) = 0, got {beta_bar:.3e}"
        )
    shift = approx.beta_s("L", vbar)[0] / approx.alpha("L", vbar)[0]
    modified = list(approx.boundary_modified)
    modified[end] = True

    other_done = approx.boundary_modified[1 - end]
    if abs(shift) < 1e-13:
        return ApproxGluingData(
            approx.space_alpha,
            approx.alpha_coeffs("L"),
            approx.alpha_coeffs("R"),
            approx.space_beta,
            approx.beta_coeffs("L"),
            approx.beta_coeffs("R"),
            approx.p_tilde,
            approx.r_tilde,
            modified,
        )

    if not other_done:
        # constant shift keeps the projection space
        new_beta = {
            s: approx.beta_coeffs(s) - shift * approx.alpha_coeffs(s) for s in "LR"
        }
        space_beta = approx.space_beta
        coeff_l, coeff_r = new_beta["L"], new_beta["R"]
    else:
        # blend linearly so the previously treated end stays zero; the
        # affine weight raises the stored beta degree by one
        from .splines import GrevilleInterpolator

        weight = (lambda v: v) if end == 1 else (lambda v: 1.0 - v)
        sb = approx.space_beta
        space_beta = _space_from_pattern(sb.degree + 1, sb.pattern)
        interp = GrevilleInterpolator(space_beta)
        coeff_l = interp.fit(
            lambda v: approx.beta_s("L", v)[0] - weight(v) * shift * approx.alpha("L", v)[0]
        )
        coeff_r = interp.fit(
            lambda v: approx.beta_s("R", v)[0] - weight(v) * shift * approx.alpha("R", v)[0]
        )
    return ApproxGluingData(
        approx.space_alpha,
        approx.alpha_coeffs("L"),
        approx.alpha_coeffs("R"),
        space_beta,
        coeff_l,
        coeff_r,
        approx.p_tilde,
        approx.r_tilde,
        modified,
    )


def classify_as_g1(data, tol=1e-10):
    """Report whether the gluing data (with unit scaling) is linear.

    This is the sufficient condition actually computable from the
    determinant formulas; geometries admitting linear data only under a
    different scaling are not detected.
    """
    vs = np.linspace(0.0, 1.0, 101)
    for fn in (
        lambda v: data.alpha("L", v)[0],
        lambda v: data.alpha("R", v)[0],
        lambda v: data.beta_s("L", v)[0],
        lambda v: data.beta_s("R", v)[0],
    ):
        vals = np.array([fn(v) for v in vs])
        coef = np.polyfit(vs, vals, 1)
        if np.max(np.abs(vals - np.polyval(coef, vs))) > tol:
            return NOT_AS_G1_GAMMA1
    return AS_G1_GAMMA1
