"""Univariate and tensor-product B-spline spaces of mixed regularity.

Knot vectors are open (boundary multiplicity ``p + 1``) on the unit
interval.  Interior regularity may differ between *fine* knots ``i*h``
and *coarse* knots ``j*hhat`` sitting on a coarser geometry mesh; this
mixed pattern is what keeps discretization spaces compatible with the
geometry mesh under h-refinement.

Evaluation uses the standard triangular recurrences for values and
derivatives.  At an interior knot the limit from the right is returned;
at ``x = 1`` the limit from the left.
"""

import functools

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import lu_factor, lu_solve

#: absolute tolerance for breakpoint comparisons
BREAKPOINT_TOL = 1e-13

#: largest supported polynomial degree (keeps workspace sizes bounded)
MAX_DEGREE = 8


# ---------------------------------------------------------------------------
# low-level kernels
# ---------------------------------------------------------------------------

def find_span(knots, degree, x, side="right"):
    """Index ``i`` of the nonempty knot span containing ``x``.

    With ``side='right'`` the span satisfies ``knots[i] <= x < knots[i+1]``
    (limit from the right); ``side='left'`` gives ``knots[i] < x <= knots[i+1]``.
    At the ends of the domain the convention degenerates to the only
    one-sided limit that exists.
    """
    n = len(knots) - degree - 1
    if side == "left" and x > knots[0] + BREAKPOINT_TOL:
        i = int(np.searchsorted(knots, x, side="left")) - 1
    else:
        i = int(np.searchsorted(knots, x, side="right")) - 1
    i = min(max(i, degree), n - 1)
    while knots[i] == knots[i + 1]:  # skip empty spans next to multiple knots
        i -= 1
    return i


def basis_derivatives(knots, degree, span, x, nderiv):
    """Values and derivatives of the active B-splines at ``x``.

    Returns an array of shape ``(nderiv + 1, degree + 1)``; row ``k``
    holds the k-th derivatives of the ``degree + 1`` basis functions
    ``b_{span-degree}, ..., b_{span}``.  Derivatives of order beyond the
    degree are zero.
    """
    p = degree
    ndu = np.empty((p + 1, p + 1))
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((nderiv + 1, p + 1))
    ders[0, :] = ndu[:, p]
    nd = min(nderiv, p)
    a = np.empty((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, nd + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1

    fact = float(p)
    for k in range(1, nd + 1):
        ders[k, :] *= fact
        fact *= p - k
    return ders


@functools.lru_cache(maxsize=64)
def gauss_rule(npoints):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = leggauss(npoints)
    return 0.5 * (x + 1.0), 0.5 * w


# ---------------------------------------------------------------------------
# knot vectors and spaces
# ---------------------------------------------------------------------------

class KnotVector:
    """Open knot vector on [0, 1] given by breakpoints and multiplicities.

    Parameters
    ----------
    degree : int
        Polynomial degree ``p`` with ``1 <= p <= MAX_DEGREE``.
    breakpoints : array_like
        Strictly increasing, ``breakpoints[0] == 0`` and
        ``breakpoints[-1] == 1``.
    multiplicities : array_like of int
        One entry per breakpoint.  Boundary multiplicity must equal
        ``p + 1`` (open vector); interior multiplicities lie in
        ``[1, p]`` so the space is at least C0.
    """

    def __init__(self, degree, breakpoints, multiplicities):
        degree = int(degree)
        if not 1 <= degree <= MAX_DEGREE:
            raise ValueError(f"degree must be in [1, {MAX_DEGREE}], got {degree}")
        bk = np.asarray(breakpoints, dtype=float)
        mult = np.asarray(multiplicities, dtype=int)
        if bk.ndim != 1 or bk.size < 2:
            raise ValueError("need at least the two boundary breakpoints")
        if mult.shape != bk.shape:
            raise ValueError("breakpoints and multiplicities must align")
        if abs(bk[0]) > BREAKPOINT_TOL or abs(bk[-1] - 1.0) > BREAKPOINT_TOL:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(bk) <= BREAKPOINT_TOL):
            raise ValueError("breakpoints must be strictly increasing")
        if mult[0] != degree + 1 or mult[-1] != degree + 1:
            raise ValueError("boundary multiplicity must equal degree + 1")
        if bk.size > 2:
            inner = mult[1:-1]
            if np.any(inner < 1) or np.any(inner > degree):
                raise ValueError("interior multiplicities must lie in [1, degree]")
        bk = bk.copy()
        bk[0], bk[-1] = 0.0, 1.0
        self.degree = degree
        self.breakpoints = bk
        self.multiplicities = mult
        self.knots = np.repeat(bk, mult)
        self.dim = self.knots.size - degree - 1

    @classmethod
    def from_knots(cls, degree, knots):
        """Build from an expanded (repeated) knot list."""
        knots = np.asarray(knots, dtype=float)
        bk = [knots[0]]
        mult = [1]
        for t in knots[1:]:
            if t - bk[-1] > BREAKPOINT_TOL:
                bk.append(t)
                mult.append(1)
            else:
                mult[-1] += 1
        return cls(degree, bk, mult)

    def __eq__(self, other):
        return (
            isinstance(other, KnotVector)
            and self.degree == other.degree
            and self.knots.size == other.knots.size
            and np.allclose(self.knots, other.knots, rtol=0.0, atol=BREAKPOINT_TOL)
        )

    def __repr__(self):
        inner = ", ".join(
            f"{b:g}^{m}" for b, m in zip(self.breakpoints, self.multiplicities)
        )
        return f"KnotVector(p={self.degree}, [{inner}])"


class MixedPattern:
    """Regularity descriptor of a uniform mesh with coarse geometry knots.

    ``r`` applies at fine-only knots ``i*h``, ``r_hat`` at coarse knots
    ``j*h_hat`` (``h_hat = k*h`` for an integer ``k``).  ``r_hat=None``
    means there are no interior coarse knots.
    """

    def __init__(self, r, h, r_hat=None, h_hat=1.0):
        self.r = int(r)
        self.h = float(h)
        self.r_hat = None if r_hat is None else int(r_hat)
        self.h_hat = float(h_hat)

    def halved(self):
        return MixedPattern(self.r, self.h / 2.0, self.r_hat, self.h_hat)


class SplineSpace1D:
    """Univariate spline space over an open knot vector.

    Instances are immutable after construction; evaluation is reentrant.
    """

    def __init__(self, kv, pattern=None):
        self.kv = kv
        self.pattern = pattern

    @property
    def degree(self):
        return self.kv.degree

    @property
    def dim(self):
        return self.kv.dim

    @property
    def knots(self):
        return self.kv.knots

    @property
    def breakpoints(self):
        return self.kv.breakpoints

    @property
    def nelements(self):
        return self.kv.breakpoints.size - 1

    def __eq__(self, other):
        return isinstance(other, SplineSpace1D) and self.kv == other.kv

    def __repr__(self):
        return f"SplineSpace1D({self.kv!r}, dim={self.dim})"

    def eval_basis(self, x, nderiv=0, side="right"):
        """Active basis values/derivatives at ``x``.

        Returns ``(first_active, ders)`` where ``ders`` has shape
        ``(nderiv + 1, degree + 1)`` and ``first_active`` is the index of
        the first active basis function.
        """
        if x < -BREAKPOINT_TOL or x > 1.0 + BREAKPOINT_TOL:
            raise ValueError(f"evaluation point {x} outside [0, 1]")
        x = min(max(x, 0.0), 1.0)
        span = find_span(self.knots, self.degree, x, side)
        ders = basis_derivatives(self.knots, self.degree, span, x, nderiv)
        return span - self.degree, ders

    def eval_all(self, x, nderiv=0, side="right"):
        """Dense row(s) of all basis values/derivatives at ``x``."""
        first, ders = self.eval_basis(x, nderiv, side)
        out = np.zeros((nderiv + 1, self.dim))
        out[:, first:first + ders.shape[1]] = ders
        return out

    def eval_spline(self, coeffs, x, nderiv=0, side="right"):
        """Evaluate a spline given its coefficient vector.

        Returns an array of shape ``(nderiv + 1,)`` (or
        ``(nderiv + 1, m)`` for stacked coefficient columns).
        """
        coeffs = np.asarray(coeffs)
        first, ders = self.eval_basis(x, nderiv, side)
        return ders @ coeffs[first:first + ders.shape[1]]

    def greville(self):
        """Greville abscissae (one interpolation node per basis function)."""
        p = self.degree
        U = self.knots
        return np.array([U[i + 1:i + p + 1].mean() for i in range(self.dim)])

    def element_span(self, e):
        """Knot-span index of element ``e`` (breakpoint interval e)."""
        xmid = 0.5 * (self.breakpoints[e] + self.breakpoints[e + 1])
        return find_span(self.knots, self.degree, xmid)

    def refine_halve(self):
        """Same degree and regularity pattern on the halved mesh.

        Coarse knots keep their coarse regularity; the mixed pattern is
        preserved under refinement.  Requires the space to have been
        built from a mesh descriptor.
        """
        if self.pattern is None:
            raise ValueError("refine_halve needs a space built from a mesh pattern")
        pat = self.pattern.halved()
        return _space_from_pattern(self.degree, pat)


def _space_from_pattern(p, pat):
    n = int(round(1.0 / pat.h))
    if abs(n * pat.h - 1.0) > 1e-12 or n < 1:
        raise ValueError(f"mesh size {pat.h} does not divide [0, 1]")
    if pat.r_hat is None:
        k = 0
    else:
        k = int(round(pat.h_hat / pat.h))
        if abs(k * pat.h - pat.h_hat) > 1e-12 or k < 1:
            raise ValueError(
                f"coarse mesh size {pat.h_hat} is not an integer multiple of {pat.h}"
            )
    bk = [0.0]
    mult = [p + 1]
    for i in range(1, n):
        if k and i % k == 0:
            m = p - pat.r_hat
        else:
            m = p - pat.r
        if m > 0:
            bk.append(i * pat.h)
            mult.append(m)
    bk.append(1.0)
    mult.append(p + 1)
    return SplineSpace1D(KnotVector(p, bk, mult), pat)


def make_uniform_space(p, r, n):
    """Spline space of degree ``p`` and regularity ``r`` on a uniform
    mesh with ``n`` elements.

    The dimension is ``p + 1 + (p - r)(n - 1)``.
    """
    p, r, n = int(p), int(r), int(n)
    if n < 1:
        raise ValueError(f"need at least one element, got n={n}")
    if not 0 <= r <= p - 1:
        raise ValueError(f"regularity must satisfy 0 <= r <= p-1, got r={r}, p={p}")
    return _space_from_pattern(p, MixedPattern(r, 1.0 / n))


def make_mixed_space(p, r, h, r_hat, h_hat):
    """Spline space with regularity ``r_hat`` at coarse knots ``j*h_hat``
    and ``r`` at the remaining fine knots ``i*h``.

    ``h_hat`` must be an integer multiple of ``h``.  ``r_hat=None`` (or
    ``h_hat=1``) collapses to the uniform space.
    """
    p = int(p)
    if not 0 <= r <= p - 1:
        raise ValueError(f"regularity must satisfy 0 <= r <= p-1, got r={r}, p={p}")
    if r_hat is not None and not 0 <= r_hat <= p - 1:
        raise ValueError(f"coarse regularity must satisfy 0 <= r_hat <= p-1, got {r_hat}")
    if r_hat is None or h_hat >= 1.0 - BREAKPOINT_TOL:
        return _space_from_pattern(p, MixedPattern(r, h))
    return _space_from_pattern(p, MixedPattern(r, h, r_hat, h_hat))


def polynomial_space(p):
    """Global polynomials of degree ``p`` on [0, 1] (knot-free Bernstein)."""
    return _space_from_pattern(int(p), MixedPattern(int(p) - 1, 1.0))


# ---------------------------------------------------------------------------
# interpolation, projection, quadrature tables
# ---------------------------------------------------------------------------

def collocation_matrix(space, points, deriv=0):
    """Dense matrix ``A[i, j] = d^deriv b_j(points[i])``."""
    A = np.zeros((len(points), space.dim))
    for i, x in enumerate(points):
        first, ders = space.eval_basis(x, deriv)
        A[i, first:first + ders.shape[1]] = ders[deriv]
    return A


class GrevilleInterpolator:
    """Interpolation at Greville abscissae; exact on members of the space.

    One step of iterative refinement keeps the reproduction error near
    machine precision even for the lower-regularity product spaces.
    """

    def __init__(self, space):
        self.space = space
        self.points = space.greville()
        self._A = collocation_matrix(space, self.points)
        self._lu = lu_factor(self._A)

    def fit_values(self, values):
        values = np.asarray(values, dtype=float)
        c = lu_solve(self._lu, values)
        c += lu_solve(self._lu, values - self._A @ c)
        return c

    def fit(self, f):
        return self.fit_values(np.asarray([f(x) for x in self.points], dtype=float))


def l2_project(space, f, npoints=None):
    """L2 projection of a callable onto the space (per-element Gauss)."""
    g = npoints or space.degree + 2
    xs, ws = gauss_rule(g)
    M = np.zeros((space.dim, space.dim))
    b = np.zeros(space.dim)
    for e in range(space.nelements):
        a, c = space.breakpoints[e], space.breakpoints[e + 1]
        for xq, wq in zip(a + (c - a) * xs, (c - a) * ws):
            first, ders = space.eval_basis(xq)
            vals = ders[0]
            sl = slice(first, first + vals.size)
            M[sl, sl] += wq * np.outer(vals, vals)
            b[sl] += wq * f(xq) * vals
    return np.linalg.solve(M, b)


def basis_tables(space, points_per_element, nderiv=2):
    """Per-element basis tables at mapped Gauss points.

    Returns ``(points, weights, first_active, tables)`` where ``tables[e]``
    has shape ``(nq, nderiv + 1, degree + 1)``.
    """
    xs, ws = gauss_rule(points_per_element)
    points, weights, firsts, tables = [], [], [], []
    for e in range(space.nelements):
        a, b = space.breakpoints[e], space.breakpoints[e + 1]
        xq = a + (b - a) * xs
        wq = (b - a) * ws
        tab = np.empty((xq.size, nderiv + 1, space.degree + 1))
        first = None
        for q, x in enumerate(xq):
            f, ders = space.eval_basis(x, nderiv)
            tab[q] = ders
            first = f
        points.append(xq)
        weights.append(wq)
        firsts.append(first)
        tables.append(tab)
    return points, weights, firsts, tables


class TensorSplineSpace:
    """Tensor product of two univariate spaces (directions u and v).

    The basis index ``(i1, i2)`` maps to the flat index ``i2*N1 + i1``
    (first direction fastest).
    """

    def __init__(self, space_u, space_v):
        self.space_u = space_u
        self.space_v = space_v

    @property
    def shape(self):
        return (self.space_u.dim, self.space_v.dim)

    @property
    def dim(self):
        return self.space_u.dim * self.space_v.dim

    def flat_index(self, i1, i2):
        return i2 * self.space_u.dim + i1

    def unflatten(self, idx):
        n1 = self.space_u.dim
        return idx % n1, idx // n1
