"""Construction of the approximately C1 basis over a two-patch domain.

The space splits into patch-interior functions (tensor B-splines whose
first two u-rows are dropped, so value and transversal derivative vanish
on the interface) and interface functions built from two univariate
families: trace profiles ``b_j_plus`` and cross-derivative profiles
``b_j_minus``.  On each patch the interface functions read

    f_plus[j](u, v)  = b_j_plus(v) (b1(u) + b2(u))
                       + beta_S(v) b_j_plus'(v) (h1/p1) b2(u)
    f_minus[j](u, v) = alpha_S(v) b_j_minus(v) (h1/p1) b2(u)

with b1, b2 the first two u-direction B-splines and (alpha_S, beta_S)
the projected gluing data.  Both products are splines, so the functions
are stored exactly in a lifted tensor space: the u factor is the patch
space, the v factor has degree ``max(p+, p+ + deg(beta) - 1, p- +
deg(alpha))`` and matching reduced regularity.  Coefficients are
obtained by interpolation at the Greville points of the lifted space,
which reproduces members exactly.
"""

from collections import namedtuple

import numpy as np

from .errors import GeometryError
from .gluing import exact_gluing, modify_beta_for_boundary
from .splines import (
    MAX_DEGREE,
    GrevilleInterpolator,
    MixedPattern,
    _space_from_pattern,
    make_mixed_space,
)

SMOOTH_END_TOL = 1e-10
AMBIGUOUS_END_TOL = 1e-6

SIDES = ("L", "R")


class InterfaceSpaces:
    """Univariate trace/cross-derivative spaces along the interface.

    The trace space has degree p2 and regularity p2 - 1, the
    cross-derivative space degree p2 - 1 and regularity p2 - 2 (the
    most economical refineable choice); at coarse geometry knots the
    regularities are r_hat2 and r_hat2 - 1.
    """

    def __init__(self, p2, s_plus, s_minus):
        self.p2 = p2
        self.s_plus = s_plus
        self.s_minus = s_minus

    @property
    def n_plus(self):
        return self.s_plus.dim

    @property
    def n_minus(self):
        return self.s_minus.dim


def build_interface_spaces(p2, h2, r_hat2=None, h_hat2=1.0):
    """Trace and cross-derivative spaces for interface degree ``p2 >= 3``."""
    p2 = int(p2)
    if p2 < 3:
        raise ValueError(
            f"interface degree must satisfy p2 >= 3 (assumption 5), got {p2}"
        )
    if r_hat2 is None or h_hat2 >= 1.0:
        s_plus = _space_from_pattern(p2, MixedPattern(p2 - 1, h2))
        s_minus = _space_from_pattern(p2 - 1, MixedPattern(p2 - 2, h2))
    else:
        s_plus = _space_from_pattern(p2, MixedPattern(p2 - 1, h2, r_hat2, h_hat2))
        s_minus = _space_from_pattern(
            p2 - 1, MixedPattern(p2 - 2, h2, r_hat2 - 1, h_hat2)
        )
    return InterfaceSpaces(p2, s_plus, s_minus)


def discretization_spaces(domain, p, r, level):
    """Per-side tensor discretization spaces at refinement ``level``.

    Mesh size is ``2**-level`` in both directions; the coarse geometry
    knots keep their geometry regularity.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    n = 2 ** level
    h = 1.0 / n
    _, r_hat2, h_hat2 = domain.vmesh()
    if r_hat2 is not None and abs(round(h_hat2 / h) * h - h_hat2) > 1e-12:
        raise ValueError(f"level {level} mesh does not resolve the geometry knots")
    space_v = make_mixed_space(p, r, h, r_hat2, h_hat2)
    space_u = {}
    for side in SIDES:
        _, r_hat1, h_hat1 = domain.umesh(side)
        space_u[side] = make_mixed_space(p, r, h, r_hat1, h_hat1)
    return space_u, space_v


EndRecord = namedtuple("EndRecord", ["end", "smooth", "psi", "modified"])

BoundaryPartition = namedtuple(
    "BoundaryPartition", ["interior_ids", "boundary_ids", "end_records"]
)


class C1Basis:
    """Basis of the approximately C1 space: interface + patch interior.

    Interface functions are stored through three coefficient blocks per
    side (all in the lifted v-space): the trace embedding ``E_plus``,
    the beta-weighted derivative products ``W_plus`` and the
    alpha-weighted products ``W_minus``.
    """

    def __init__(self, domain, approx, spaces, space_u, space_v):
        self.domain = domain
        self.approx = approx
        self.spaces = spaces
        self.space_u = dict(space_u)
        self.space_v = space_v
        self.partition = None
        self._dof_map = None

        _, r_hat2, h_hat2 = domain.vmesh()
        p_plus = spaces.s_plus.degree
        p_minus = spaces.s_minus.degree
        deg_a = approx.space_alpha.degree
        deg_b = approx.space_beta.degree
        p2star = max(p_plus, p_plus + deg_b - 1, p_minus + deg_a)
        if p2star > MAX_DEGREE:
            raise ValueError(
                f"lifted interface degree {p2star} exceeds the supported "
                f"maximum {MAX_DEGREE}; lower p or the gluing degree"
            )
        r2star = min(
            self._fine_regularity(approx.space_alpha, deg_a),
            self._fine_regularity(approx.space_beta, deg_b),
            p_plus - 2,
            p_minus - 1,
        )
        h2 = np.min(np.diff(space_v.breakpoints))
        if r_hat2 is None or h_hat2 >= 1.0:
            vstar = _space_from_pattern(p2star, MixedPattern(r2star, h2))
        else:
            vstar = _space_from_pattern(
                p2star, MixedPattern(r2star, h2, r_hat2 - 1, h_hat2)
            )
        if not np.allclose(vstar.breakpoints, space_v.breakpoints, atol=1e-12):
            raise GeometryError("lifted space breakpoints disagree with the mesh")
        self.space_vstar = vstar
        self.p2star = p2star
        self.r2star = r2star

        interp = GrevilleInterpolator(vstar)
        grev = interp.points
        splus, sminus = spaces.s_plus, spaces.s_minus
        plus_tab = np.array([splus.eval_all(x, 1) for x in grev])  # (nG, 2, N+)
        minus_tab = np.array([sminus.eval_all(x, 0)[0] for x in grev])
        alpha_tab = {
            s: np.array([approx.alpha(s, x)[0] for x in grev]) for s in SIDES
        }
        beta_tab = {
            s: np.array([approx.beta_s(s, x)[0] for x in grev]) for s in SIDES
        }
        self.E_plus = interp.fit_values(plus_tab[:, 0, :])
        self.W_plus = {
            s: interp.fit_values(beta_tab[s][:, None] * plus_tab[:, 1, :])
            for s in SIDES
        }
        self.W_minus = {
            s: interp.fit_values(alpha_tab[s][:, None] * minus_tab)
            for s in SIDES
        }
        self._mask_outside_support()

        self.scale = {}
        for side in SIDES:
            su = self.space_u[side]
            h1 = su.knots[su.degree + 1]  # first interior knot
            self.scale[side] = h1 / su.degree

    @staticmethod
    def _fine_regularity(space, degree):
        # regularity at fine-only knots (the mesh pattern carries it even
        # when the current level has no such knots)
        if space.pattern is not None:
            return space.pattern.r
        mults = space.kv.multiplicities[1:-1]
        if mults.size == 0:
            return 10 ** 6
        return int(degree - mults.max())

    def _mask_outside_support(self):
        # expansion coefficients of a locally supported profile vanish
        # outside its knot support; zero the numerical dust there
        vstar = self.space_vstar
        U = vstar.knots
        pst = vstar.degree

        def mask(mat, space):
            p = space.degree
            for j in range(space.dim):
                a, b = space.knots[j], space.knots[j + p + 1]
                keep = (U[:vstar.dim] >= a - 1e-12) & (U[pst + 1:] <= b + 1e-12)
                mat[~keep, j] = 0.0

        mask(self.E_plus, self.spaces.s_plus)
        for s in SIDES:
            mask(self.W_plus[s], self.spaces.s_plus)
            mask(self.W_minus[s], self.spaces.s_minus)

    # -- counts ---------------------------------------------------------

    @property
    def n_plus(self):
        return self.spaces.n_plus

    @property
    def n_minus(self):
        return self.spaces.n_minus

    def patch_shape(self, side):
        return (self.space_u[side].dim - 2, self.space_v.dim)

    @property
    def n_total(self):
        return (
            self.n_plus
            + self.n_minus
            + sum(int(np.prod(self.patch_shape(s))) for s in SIDES)
        )

    # -- interface function coefficients --------------------------------

    def iface_rows(self, side, kind, j):
        """Lifted-space coefficient rows (2, N*) of one interface function,
        for the first two u-direction basis functions."""
        rows = np.zeros((2, self.space_vstar.dim))
        if kind == "plus":
            rows[0] = self.E_plus[:, j]
            rows[1] = self.E_plus[:, j] + self.scale[side] * self.W_plus[side][:, j]
        elif kind == "minus":
            rows[1] = self.scale[side] * self.W_minus[side][:, j]
        else:
            raise ValueError(f"unknown interface function kind {kind!r}")
        return rows

    def iface_support(self, kind, j):
        """v-support interval of interface function (kind, j)."""
        space = self.spaces.s_plus if kind == "plus" else self.spaces.s_minus
        p = space.degree
        return space.knots[j], space.knots[j + p + 1]

    def eval_interface(self, side, kind, j, u, v, max_du=1, max_dv=1):
        """Pullback values/derivatives of one interface function;
        ``out[a, b]`` is d^a_u d^b_v."""
        rows = self.iface_rows(side, kind, j)
        fu, du = self.space_u[side].eval_basis(u, max_du)
        fv, dv = self.space_vstar.eval_basis(v, max_dv)
        out = np.zeros((max_du + 1, max_dv + 1))
        for i in (0, 1):
            pos = i - fu
            if 0 <= pos < du.shape[1]:
                out += np.outer(du[:, pos], dv @ rows[i, fv:fv + dv.shape[1]])
        return out

    # -- boundary split ---------------------------------------------------

    def end_dofs(self, end):
        """Interface indices not vanishing on the boundary edge at an end:
        (trace_first, trace_second, derivative)."""
        if end == 0:
            return 0, 1, 0
        return self.n_plus - 1, self.n_plus - 2, self.n_minus - 1

    def dof_map(self):
        if self._dof_map is None:
            self._dof_map = DofMap(self)
        return self._dof_map


class DofMap:
    """Stable enumeration: interface traces, interface derivatives, then
    patch-interior blocks (left before right, first index fastest)."""

    def __init__(self, basis):
        self.basis = basis
        self.n_plus = basis.n_plus
        self.n_minus = basis.n_minus
        self.offset_minus = self.n_plus
        self.offsets = {}
        off = self.n_plus + self.n_minus
        self.shapes = {}
        for side in SIDES:
            shape = basis.patch_shape(side)
            self.offsets[side] = off
            self.shapes[side] = shape
            off += shape[0] * shape[1]
        self.n_total = off

    def id_plus(self, j):
        return j

    def id_minus(self, j):
        return self.offset_minus + j

    def id_patch(self, side, i1, i2):
        """Global id of patch basis function with absolute 0-based tensor
        index (i1 >= 2, any i2)."""
        n1m2 = self.shapes[side][0]
        return self.offsets[side] + (i1 - 2) + n1m2 * i2

    def describe(self, gid):
        if gid < self.n_plus:
            return ("plus", gid)
        if gid < self.n_plus + self.n_minus:
            return ("minus", gid - self.n_plus)
        for side in SIDES:
            n = self.shapes[side][0] * self.shapes[side][1]
            if gid < self.offsets[side] + n:
                local = gid - self.offsets[side]
                n1m2 = self.shapes[side][0]
                return ("patch", side, 2 + local % n1m2, local // n1m2)
        raise IndexError(gid)


def build_interface_functions(domain, approx, spaces, space_u, space_v):
    """Assemble the interface coefficient blocks into a C1Basis.

    ``space_u`` maps side tags to the per-patch u-direction spaces,
    ``space_v`` is the matching v-direction space shared by both patches.
    """
    return C1Basis(domain, approx, spaces, space_u, space_v)


def classify_interface_ends(domain, tol=SMOOTH_END_TOL):
    """(smooth at v=0, smooth at v=1) from the exact combined beta.

    Ends must be authored as exactly smooth or clearly cornered; values
    in the ambiguous band raise.
    """
    data = exact_gluing(domain)
    smooth = []
    for end in (0, 1):
        b = abs(data.beta(float(end))[0])
        if b < tol:
            smooth.append(True)
        elif b < AMBIGUOUS_END_TOL:
            raise GeometryError(
                f"interface end {end} is nearly but not exactly smooth "
                f"(|beta| = {b:.2e}); author the geometry with exact ends"
            )
        else:
            smooth.append(False)
    return tuple(smooth)


def split_boundary_dofs(basis, domain, approx=None):
    """Partition the basis into homogeneous-interior and boundary parts.

    At a smooth interface end the betas are first shifted so the single
    trace function that would otherwise mix with the derivative function
    has vanishing boundary trace and joins the interior space; at a
    corner end all three end functions are boundary functions.  Returns
    a (possibly rebuilt) basis with ``partition`` populated.
    """
    if approx is None:
        approx = basis.approx
    smooth = classify_interface_ends(domain)
    records = []
    changed = False
    for end in (0, 1):
        if smooth[end]:
            psi_space = basis.spaces.s_plus
            vbar = float(end)
            _, second, _ = basis.end_dofs(end)
            dval = psi_space.eval_spline(
                np.eye(psi_space.dim)[second], vbar, 1
            )[1]
            psi = approx.beta_s("L", vbar)[0] / approx.alpha("L", vbar)[0] * dval
            if not approx.boundary_modified[end]:
                approx = modify_beta_for_boundary(approx, end)
                changed = True
            records.append(EndRecord(end, True, float(psi), True))
        else:
            records.append(EndRecord(end, False, None, False))
    if changed:
        basis = C1Basis(domain, approx, basis.spaces, basis.space_u, basis.space_v)

    dm = basis.dof_map()
    boundary = np.zeros(dm.n_total, dtype=bool)
    for end in (0, 1):
        first, second, dminus = basis.end_dofs(end)
        boundary[dm.id_plus(first)] = True
        boundary[dm.id_minus(dminus)] = True
        if not smooth[end]:
            boundary[dm.id_plus(second)] = True
    for side in SIDES:
        n1 = basis.space_u[side].dim
        n2 = basis.space_v.dim
        for i2 in range(n2):
            for i1 in range(2, n1):
                if i1 == n1 - 1 or i2 in (0, n2 - 1):
                    boundary[dm.id_patch(side, i1, i2)] = True

    ids = np.arange(dm.n_total)
    basis.partition = BoundaryPartition(ids[~boundary], ids[boundary], records)
    basis.boundary_mask = boundary
    return basis


def build_c1_basis(domain, p, r, level, p_tilde, r_tilde):
    """One-shot pipeline: spaces, projected gluing data, interface
    functions and boundary split at one refinement level."""
    from .gluing import project_gluing

    space_u, space_v = discretization_spaces(domain, p, r, level)
    h2 = 1.0 / 2 ** level
    _, r_hat2, h_hat2 = domain.vmesh()
    data = exact_gluing(domain)
    approx = project_gluing(data, p_tilde, r_tilde, h2, h_hat2, r_hat2)
    spaces = build_interface_spaces(p, h2, r_hat2, h_hat2)
    basis = build_interface_functions(domain, approx, spaces, space_u, space_v)
    return split_boundary_dofs(basis, domain)


def eval_member(basis, coeffs, side, u, v, max_du=1, max_dv=1):
    """Pointwise pullback of a member of the space given global
    coefficients (slow path used by tests and diagnostics)."""
    dm = basis.dof_map()
    out = np.zeros((max_du + 1, max_dv + 1))
    for j in range(basis.n_plus):
        c = coeffs[dm.id_plus(j)]
        if c != 0.0:
            out += c * basis.eval_interface(side, "plus", j, u, v, max_du, max_dv)
    for j in range(basis.n_minus):
        c = coeffs[dm.id_minus(j)]
        if c != 0.0:
            out += c * basis.eval_interface(side, "minus", j, u, v, max_du, max_dv)
    su, sv = basis.space_u[side], basis.space_v
    fu, du = su.eval_basis(u, max_du)
    fv, dv = sv.eval_basis(v, max_dv)
    for a in range(du.shape[1]):
        i1 = fu + a
        if i1 < 2:
            continue
        for b in range(dv.shape[1]):
            c = coeffs[dm.id_patch(side, i1, fv + b)]
            if c != 0.0:
                out += c * np.outer(du[:, a], dv[:, b])
    return out
