"""Two-patch planar spline geometries.

A domain is the union of a left and a right spline patch whose images
meet along a common interface curve.  By convention the interface is the
parameter edge ``u = 0`` on both patches and both patches carry the same
v-direction space, so they share the tangent ``t(v)`` along the
interface.  The orientation convention is
``det(d_u F_L, t) < 0 < det(d_u F_R, t)``.
"""

import functools
from collections import namedtuple

import numpy as np

from .errors import GeometryError
from .splines import KnotVector, SplineSpace1D, make_uniform_space

C0_TOL = 1e-12
FRAME_TOL = 1e-12


def _det2(a, b):
    return a[0] * b[1] - a[1] * b[0]


class Patch:
    """Tensor-product spline patch mapping [0,1]^2 into the plane.

    Parameters
    ----------
    space_u, space_v : SplineSpace1D
        Univariate factors of the geometry space.
    net : array_like, shape (N1, N2, 2)
        Control points, first index for the u direction.
    side : str, optional
        'L' or 'R' tag inside a two-patch domain.
    """

    def __init__(self, space_u, space_v, net, side=None):
        net = np.asarray(net, dtype=float)
        if net.shape != (space_u.dim, space_v.dim, 2):
            raise GeometryError(
                f"control net shape {net.shape} does not match spaces "
                f"({space_u.dim}, {space_v.dim}, 2)"
            )
        self.space_u = space_u
        self.space_v = space_v
        self.net = net
        self.side = side

    def derivs(self, u, v, max_du=1, max_dv=1):
        """Point and partial derivatives; ``out[a, b]`` is d^a_u d^b_v F."""
        fu, du = self.space_u.eval_basis(u, max_du)
        fv, dv = self.space_v.eval_basis(v, max_dv)
        block = self.net[fu:fu + du.shape[1], fv:fv + dv.shape[1], :]
        return np.einsum("ai,bj,ijc->abc", du, dv, block)

    def eval(self, u, v, deriv_order=0):
        """Evaluate the map; with ``deriv_order`` >= 1 also the partials.

        Returns the tuple ``(F, F_u, F_v[, F_uu, F_uv, F_vv])`` truncated
        according to ``deriv_order``.
        """
        if deriv_order < 0 or deriv_order > 2:
            raise GeometryError("deriv_order must be 0, 1 or 2")
        d = self.derivs(u, v, deriv_order, deriv_order)
        out = [d[0, 0]]
        if deriv_order >= 1:
            out += [d[1, 0], d[0, 1]]
        if deriv_order >= 2:
            out += [d[2, 0], d[1, 1], d[0, 2]]
        return tuple(out)

    def jacobian_det(self, u, v):
        d = self.derivs(u, v, 1, 1)
        return _det2(d[1, 0], d[0, 1])

    def min_jacobian_det(self, nsamples=33):
        """Minimum of |det grad F| over an nsamples^2 grid; also reports
        whether the determinant changes sign."""
        xs = np.linspace(0.0, 1.0, nsamples)
        dets = np.array([[self.jacobian_det(u, v) for v in xs] for u in xs])
        return float(np.min(np.abs(dets))), bool(dets.max() * dets.min() < 0.0)

    def interior_regularity(self, direction):
        """Smallest regularity over interior knots of one direction.

        Returns None if the direction has no interior knots.
        """
        space = self.space_u if direction == "u" else self.space_v
        mults = space.kv.multiplicities[1:-1]
        if mults.size == 0:
            return None
        return int(space.degree - mults.max())

    def mesh_info(self, direction):
        """(coarse regularity, coarse mesh size) of one direction.

        For a knot-free direction this is ``(None, 1.0)``.  Interior
        geometry knots must be uniformly spaced.
        """
        space = self.space_u if direction == "u" else self.space_v
        bk = space.breakpoints
        if bk.size == 2:
            return None, 1.0
        gaps = np.diff(bk)
        if np.any(np.abs(gaps - gaps[0]) > 1e-12):
            raise GeometryError(
                f"interior geometry knots in direction {direction} are not uniform"
            )
        return self.interior_regularity(direction), float(gaps[0])


InterfaceFrame = namedtuple("InterfaceFrame", ["t", "t0", "tau", "n"])

C0Report = namedtuple("C0Report", ["max_gap", "tol", "passed", "nsamples"])


class TwoPatchDomain:
    """Left and right patch sharing the interface edge ``u = 0``.

    Validation checks C0 matching at sampled interface points, matching
    v-direction spaces, the orientation convention on the transversal
    derivatives, regularity of both maps, and that interior geometry
    knots leave the interface data differentiable (assumption 4 of the
    model; sufficient condition: v-regularity >= 2 at geometry knots).
    """

    def __init__(self, left, right, validate=True):
        self.left = left
        self.right = right
        left.side, right.side = "L", "R"
        if validate:
            self.validate()

    def patch(self, side):
        return self.left if side == "L" else self.right

    @property
    def sides(self):
        return ("L", "R")

    # -- interface frame ----------------------------------------------------

    def interface_frame(self, v, cross_check=False):
        """Tangent ``t``, unit tangent ``t0``, speed ``tau`` and unit
        normal ``n`` (outward for the left patch) at interface parameter v."""
        d = self.left.derivs(0.0, v, 1, 1)
        t = d[0, 1]
        tau = float(np.hypot(t[0], t[1]))
        if tau < FRAME_TOL:
            raise GeometryError(f"degenerate interface tangent at v={v}")
        t0 = t / tau
        n = self._normal_from(d[1, 0], t0)
        if cross_check:
            dr = self.right.derivs(0.0, v, 1, 1)
            nr = self._normal_from(dr[1, 0], t0)
            if np.max(np.abs(n - nr)) > 1e-10:
                raise GeometryError(f"normal vectors from both sides disagree at v={v}")
        return InterfaceFrame(t, t0, tau, n)

    @staticmethod
    def _normal_from(du_f, t0):
        det = _det2(du_f, t0)
        if abs(det) < FRAME_TOL:
            raise GeometryError("transversal derivative parallel to the interface")
        return (du_f - (du_f @ t0) * t0) / det

    # -- validation ---------------------------------------------------------

    def check_c0_matching(self, nsamples=257):
        """Maximum interface position gap over sampled parameters."""
        vs = np.union1d(
            np.linspace(0.0, 1.0, nsamples), self.left.space_v.greville()
        )
        gap = 0.0
        for v in vs:
            fl = self.left.derivs(0.0, v, 0, 0)[0, 0]
            fr = self.right.derivs(0.0, v, 0, 0)[0, 0]
            gap = max(gap, float(np.hypot(*(fl - fr))))
        return C0Report(gap, C0_TOL, gap < C0_TOL, vs.size)

    def validate(self):
        if not (
            self.left.space_v.degree == self.right.space_v.degree
            and self.left.space_v.kv == self.right.space_v.kv
        ):
            raise GeometryError("v-direction geometry spaces of the patches differ")
        rep = self.check_c0_matching()
        if not rep.passed:
            raise GeometryError(
                f"patches do not match C0 along the interface (gap {rep.max_gap:.3e})"
            )
        for patch in (self.left, self.right):
            ru = patch.interior_regularity("u")
            if ru is not None and ru < 1:
                raise GeometryError(
                    f"patch {patch.side}: geometry only C{ru} across interior u-knots"
                )
            rv = patch.interior_regularity("v")
            if rv is not None and rv < 2:
                raise GeometryError(
                    f"patch {patch.side}: v-regularity {rv} < 2 leaves the "
                    "interface gluing data non-differentiable (assumption 4)"
                )
            mindet, flipped = patch.min_jacobian_det()
            if flipped or mindet <= 1e-10:
                raise GeometryError(
                    f"patch {patch.side} is not regular (min |det| {mindet:.3e})"
                )
            patch.mesh_info("u")
            patch.mesh_info("v")
        for v in np.linspace(0.0, 1.0, 101):
            frame = self.interface_frame(v, cross_check=True)
            t = frame.t
            al = _det2(self.left.derivs(0.0, v, 1, 0)[1, 0], t)
            ar = _det2(self.right.derivs(0.0, v, 1, 0)[1, 0], t)
            if not (al < 0.0 < ar):
                raise GeometryError(
                    f"orientation convention violated at v={v}: "
                    f"det_L={al:.3e}, det_R={ar:.3e}"
                )
        return self

    # -- mesh descriptors used by the discretization -------------------------

    def vmesh(self):
        """Coarse v-mesh data shared by both patches: (p_hat2, r_hat2, h_hat2)."""
        r_hat, h_hat = self.left.mesh_info("v")
        return self.left.space_v.degree, r_hat, h_hat

    def umesh(self, side):
        patch = self.patch(side)
        r_hat, h_hat = patch.mesh_info("u")
        return patch.space_u.degree, r_hat, h_hat


# ---------------------------------------------------------------------------
# catalog of built-in example geometries
# ---------------------------------------------------------------------------

def _bezier_spaces(p1, p2):
    return make_uniform_space(p1, p1 - 1, 1), make_uniform_space(p2, p2 - 1, 1)


def bilinear_patch(p00, p10, p01, p11):
    """Bilinear patch interpolating the four corners F(0,0), F(1,0), F(0,1), F(1,1)."""
    su, sv = _bezier_spaces(1, 1)
    net = np.array([[p00, p01], [p10, p11]], dtype=float)
    return Patch(su, sv, net)


def _elevated_segment(a, b):
    """Cubic Bezier control points of the straight segment a -> b."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.array([a, (2 * a + b) / 3.0, (a + 2 * b) / 3.0, b])


def _coons_bicubic(c_u0, c_u1, c_v0, c_v1):
    """Bicubic net of the bilinearly blended patch with the given cubic
    edge control points (c_u0 = F(0,.), c_u1 = F(1,.), c_v0 = F(.,0),
    c_v1 = F(.,1))."""
    c_u0, c_u1 = np.asarray(c_u0, float), np.asarray(c_u1, float)
    c_v0, c_v1 = np.asarray(c_v0, float), np.asarray(c_v1, float)
    corners = np.array([[c_u0[0], c_u0[3]], [c_u1[0], c_u1[3]]])
    net = np.zeros((4, 4, 2))
    for i in range(4):
        s = i / 3.0
        for j in range(4):
            t = j / 3.0
            ruled_u = (1 - s) * c_u0[j] + s * c_u1[j]
            ruled_v = (1 - t) * c_v0[i] + t * c_v1[i]
            bil = (
                (1 - s) * (1 - t) * corners[0, 0]
                + (1 - s) * t * corners[0, 1]
                + s * (1 - t) * corners[1, 0]
                + s * t * corners[1, 1]
            )
            net[i, j] = ruled_u + ruled_v - bil
    return net


def _catalog_ex1():
    # straight vertical interface, slanted outer edges: the transversal
    # derivatives stay horizontal, so the gluing data is linear with
    # beta identically zero (both interface ends are smooth boundary points)
    left = bilinear_patch((0, 0), (-1, 0), (0, 1), (-1.4, 1))
    right = bilinear_patch((0, 0), (1, 0), (0, 1), (1.4, 1))
    return TwoPatchDomain(left, right)


_EX2_INTERFACE = np.array([[0.0, 0.0], [0.30, 0.25], [-0.35, 0.62], [0.0, 1.0]])


def _catalog_ex2():
    # same outline as ex1 but a curved cubic interface; ruled bicubic patches
    su, sv = _bezier_spaces(3, 3)
    gamma = _EX2_INTERFACE
    patches = []
    for xsign in (-1.0, 1.0):
        delta = _elevated_segment((xsign, 0.0), (1.4 * xsign, 1.0))
        net = np.zeros((4, 4, 2))
        for i in range(4):
            s = i / 3.0
            net[i] = (1 - s) * gamma + s * delta
        patches.append(Patch(su, sv, net))
    return TwoPatchDomain(patches[0], patches[1])


def _catalog_ex3():
    # quarter of a plate with a circular hole; the arc is a cubic Bezier
    # split at its midpoint, the interface runs from the arc to the outer
    # corner (smooth boundary at v=0, corner at v=1)
    k = 4.0 * (np.sqrt(2.0) - 1.0) / 3.0
    arc = np.array([[1.0, 0.0], [1.0, k], [k, 1.0], [0.0, 1.0]])
    half_a, half_b = _split_cubic_half(arc)  # A -> M, M -> B
    m = half_a[3]
    corner_a, corner_b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    corner_c, corner_d = np.array([2.0, 0.0]), np.array([0.0, 2.0])
    corner_e = np.array([2.0, 2.0])
    # bow the interface sideways: a straight blended interface would make
    # the transversal derivatives linear in v and the gluing data linear
    gamma = _elevated_segment(m, corner_e)
    perp = np.array([corner_e[1] - m[1], m[0] - corner_e[0]])
    perp /= np.hypot(*perp)
    gamma[1] += 0.18 * perp
    gamma[2] -= 0.12 * perp
    su, sv = _bezier_spaces(3, 3)
    net_r = _coons_bicubic(
        gamma,
        _elevated_segment(corner_a, corner_c),
        half_a[::-1],  # M -> A
        _elevated_segment(corner_e, corner_c),
    )
    net_l = _coons_bicubic(
        gamma,
        _elevated_segment(corner_b, corner_d),
        half_b,  # M -> B
        _elevated_segment(corner_e, corner_d),
    )
    return TwoPatchDomain(Patch(su, sv, net_l), Patch(su, sv, net_r))


def _split_cubic_half(ctrl):
    """de Casteljau subdivision of a cubic at t = 1/2."""
    p0, p1, p2, p3 = (np.asarray(p, float) for p in ctrl)
    a = 0.5 * (p0 + p1)
    b = 0.5 * (p1 + p2)
    c = 0.5 * (p2 + p3)
    d = 0.5 * (a + b)
    e = 0.5 * (b + c)
    m = 0.5 * (d + e)
    return np.array([p0, a, d, m]), np.array([m, e, c, p3])


def _catalog_ex4():
    # cubic B-spline geometry with an interior v-knot of regularity 2,
    # so the gluing data is only C1; corner at the v=1 end of the interface
    sv = SplineSpace1D(KnotVector(3, [0.0, 0.5, 1.0], [4, 1, 4]))
    su = make_uniform_space(1, 0, 1)
    gamma = np.array(
        [[0.0, 0.0], [0.25, 0.4], [0.0, 1.0], [-0.25, 1.6], [0.0, 2.0]]
    )
    grev = sv.greville()
    delta_l = np.column_stack([np.full(5, -1.5), 2.0 * grev])
    delta_r = np.column_stack([np.full(5, 1.5), 2.4 * grev])
    net_l = np.stack([gamma, delta_l])
    net_r = np.stack([gamma, delta_r])
    return TwoPatchDomain(Patch(su, sv, net_l), Patch(su, sv, net_r))


_CATALOG = {
    "ex1": _catalog_ex1,
    "ex2": _catalog_ex2,
    "ex3": _catalog_ex3,
    "ex4": _catalog_ex4,
}


@functools.lru_cache(maxsize=None)
def catalog(name):
    """Built-in two-patch geometries ``ex1`` ... ``ex4``.

    ex1: bilinear patches, straight interface, linear gluing data.
    ex2: same outline, curved interface, bicubic patches.
    ex3: quarter plate with circular hole, corner at one interface end.
    ex4: B-spline geometry whose gluing data is only C1.

    Domains are immutable; repeated calls return the same instance.
    """
    try:
        builder = _CATALOG[name]
    except KeyError:
        raise GeometryError(
            f"unknown geometry {name!r}; available: {sorted(_CATALOG)}"
        ) from None
    return builder()


# ---------------------------------------------------------------------------
# plain-text geometry files
# ---------------------------------------------------------------------------

_HEADER = "two-patch-geometry v1"


def save_geometry(domain, path):
    """Write a domain in the plain-text geometry format."""
    lines = [_HEADER]
    for side in ("L", "R"):
        patch = domain.patch(side)
        n1, n2 = patch.net.shape[:2]
        lines.append(f"patch {side}")
        lines.append(f"degrees {patch.space_u.degree} {patch.space_v.degree}")
        lines.append("knots-u " + " ".join(f"{t:.17g}" for t in patch.space_u.knots))
        lines.append("knots-v " + " ".join(f"{t:.17g}" for t in patch.space_v.knots))
        lines.append(f"net {n1} {n2}")
        for i2 in range(n2):
            for i1 in range(n1):
                x, y = patch.net[i1, i2]
                lines.append(f"{x:.17g} {y:.17g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_patch(lines, pos):
    def expect(prefix):
        nonlocal pos
        if pos >= len(lines) or not lines[pos].startswith(prefix):
            raise GeometryError(f"expected '{prefix} ...' at line {pos + 1}")
        parts = lines[pos].split()
        pos += 1
        return parts

    tag = expect("patch")[1]
    p1, p2 = (int(t) for t in expect("degrees")[1:3])
    ku = np.array([float(t) for t in expect("knots-u")[1:]])
    kv = np.array([float(t) for t in expect("knots-v")[1:]])
    n1, n2 = (int(t) for t in expect("net")[1:3])
    try:
        su = SplineSpace1D(KnotVector.from_knots(p1, ku))
        sv = SplineSpace1D(KnotVector.from_knots(p2, kv))
    except ValueError as exc:
        raise GeometryError(f"invalid knot vector for patch {tag}: {exc}") from exc
    if (su.dim, sv.dim) != (n1, n2):
        raise GeometryError(
            f"patch {tag}: net {n1}x{n2} does not match knot vectors "
            f"({su.dim}x{sv.dim})"
        )
    net = np.zeros((n1, n2, 2))
    for i2 in range(n2):
        for i1 in range(n1):
            if pos >= len(lines):
                raise GeometryError("unexpected end of file inside control net")
            x, y = (float(t) for t in lines[pos].split())
            net[i1, i2] = (x, y)
            pos += 1
    return tag, Patch(su, sv, net), pos


def _mirrored_space(space):
    return SplineSpace1D(
        KnotVector.from_knots(space.degree, (1.0 - space.knots)[::-1])
    )


def _patch_orientations(patch):
    """All eight parameter reorientations of a patch."""
    su, sv, net = patch.space_u, patch.space_v, patch.net
    msu, msv = _mirrored_space(su), _mirrored_space(sv)
    variants = [
        Patch(su, sv, net),
        Patch(msu, sv, net[::-1, :, :]),
        Patch(su, msv, net[:, ::-1, :]),
        Patch(msu, msv, net[::-1, ::-1, :]),
    ]
    tnet = net.transpose(1, 0, 2)
    variants += [
        Patch(sv, su, tnet),
        Patch(msv, su, tnet[::-1, :, :]),
        Patch(sv, msu, tnet[:, ::-1, :]),
        Patch(msv, msu, tnet[::-1, ::-1, :]),
    ]
    return variants


def _quick_c0_gap(a, b):
    gap = 0.0
    for v in np.linspace(0.0, 1.0, 9):
        fa = a.derivs(0.0, v, 0, 0)[0, 0]
        fb = b.derivs(0.0, v, 0, 0)[0, 0]
        gap = max(gap, float(np.hypot(*(fa - fb))))
    return gap


def load_geometry(path):
    """Read a geometry file and return a validated TwoPatchDomain.

    The loader tries the eight parameter reorientations of each patch
    (edge permutation and reversal) to bring the shared edge to ``u = 0``
    with the left/right orientation convention, and reports the violated
    invariant if no orientation achieves a C0 match.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != _HEADER:
        raise GeometryError(f"not a geometry file (missing '{_HEADER}' header)")
    pos = 1
    tag_a, patch_a, pos = _parse_patch(lines, pos)
    tag_b, patch_b, pos = _parse_patch(lines, pos)
    if {tag_a, tag_b} != {"L", "R"}:
        raise GeometryError("file must contain exactly one 'patch L' and one 'patch R'")
    if tag_a == "R":
        patch_a, patch_b = patch_b, patch_a

    last_error = None
    matched = False
    for cand_a in _patch_orientations(patch_a):
        for cand_b in _patch_orientations(patch_b):
            if cand_a.space_v.kv != cand_b.space_v.kv:
                continue
            if _quick_c0_gap(cand_a, cand_b) > 1e-9:
                continue
            matched = True
            for lft, rgt in ((cand_a, cand_b), (cand_b, cand_a)):
                try:
                    return TwoPatchDomain(
                        Patch(lft.space_u, lft.space_v, lft.net.copy()),
                        Patch(rgt.space_u, rgt.space_v, rgt.net.copy()),
                    )
                except GeometryError as exc:
                    last_error = exc
    if matched and last_error is not None:
        raise last_error
    raise GeometryError(
        "patches do not match C0 along the interface in any orientation"
    )
