"""Quadrature, Galerkin assembly of the biharmonic form, essential
boundary conditions and the sparse solve.

The bilinear form is the product of physical Laplacians integrated
patchwise; second derivatives of pullbacks use the full second-order
chain rule through the geometry map.  The integrands are piecewise
rational, so Gauss rules are not exact: the assembly budget is one extra
point beyond polynomial exactness per direction, validated by the
doubling-invariance property test.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .c1_basis import SIDES
from .errors import SolveError
from .splines import gauss_rule

STRIP_TOL = 1e-12


class QuadratureRule:
    """Per-side tensor Gauss point counts.

    ``g_u[side]`` and ``g_v`` cover the patch spaces; elements next to
    the interface carry higher-degree lifted functions in the v
    direction and use ``g_v_strip`` there.
    """

    def __init__(self, g_u, g_v, g_v_strip):
        self.g_u = dict(g_u)
        self.g_v = int(g_v)
        self.g_v_strip = int(g_v_strip)

    def counts(self, side, strip):
        return self.g_u[side], (self.g_v_strip if strip else self.g_v)

    def bumped(self, extra):
        """Rule with `extra` more points per direction (sufficiency checks)."""
        return QuadratureRule(
            {s: g + extra for s, g in self.g_u.items()},
            self.g_v + extra,
            self.g_v_strip + extra,
        )


def build_quadrature(space_u, space_v, p2star, margin=0):
    """Gauss counts with ``2g - 1 >= 2 * (max degree present)`` per
    direction; near-interface elements account for the lifted degree."""
    g_u = {side: space.degree + 1 + margin for side, space in space_u.items()}
    g_v = space_v.degree + 1 + margin
    g_v_strip = max(space_v.degree, p2star) + 1 + margin
    return QuadratureRule(g_u, g_v, g_v_strip)


# ---------------------------------------------------------------------------
# element iteration
# ---------------------------------------------------------------------------

class _DirTables:
    """Quadrature points of one direction, with basis tables for the
    discretization space(s) and the geometry space on the same grid."""

    def __init__(self, grid, npoints):
        self.grid = np.asarray(grid)
        xs, ws = gauss_rule(npoints)
        self.points = [a + (b - a) * xs for a, b in zip(grid[:-1], grid[1:])]
        self.weights = [(b - a) * ws for a, b in zip(grid[:-1], grid[1:])]

    def tables(self, space, nderiv):
        firsts, tabs = [], []
        for pts in self.points:
            tab = np.empty((pts.size, nderiv + 1, space.degree + 1))
            first = 0
            for q, x in enumerate(pts):
                first, ders = space.eval_basis(x, nderiv)
                tab[q] = ders
            firsts.append(first)
            tabs.append(tab)
        return firsts, tabs


def _geometry_fields(patch, gu_first, gu_tab, gv_first, gv_tab):
    """Geometry derivatives at tensor quadrature points.

    Returns dict with J (2x2), det, inv (inverse Jacobian), hess
    (parametric Hessians of both components) and xy, all shaped with a
    trailing flat quadrature axis of length gu*gv.
    """
    block = patch.net[
        gu_first:gu_first + gu_tab.shape[2],
        gv_first:gv_first + gv_tab.shape[2],
    ]
    # F[a, b, c] at (q, r): derivative orders a (u) and b (v), component c
    F = np.einsum("qai,rbj,ijc->abqrc", gu_tab, gv_tab, block)
    nq = F.shape[2] * F.shape[3]
    F = F.reshape(3, 3, nq, 2)
    J = np.stack([F[1, 0], F[0, 1]], axis=-1)  # (nq, 2 comp, 2 dir)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv = np.empty_like(J)  # rows: (u_x, u_y), (v_x, v_y)
    inv[:, 0, 0] = J[:, 1, 1] / det
    inv[:, 0, 1] = -J[:, 0, 1] / det
    inv[:, 1, 0] = -J[:, 1, 0] / det
    inv[:, 1, 1] = J[:, 0, 0] / det
    hess = np.stack([F[2, 0], F[1, 1], F[0, 2]], axis=1)  # (nq, [uu,uv,vv], comp)
    return {"xy": F[0, 0], "J": J, "det": det, "inv": inv, "hess": hess}


def _physical_derivs(D, geo):
    """Map parametric rows [f, fu, fv, fuu, fuv, fvv] (nloc, 6, nq) to
    physical value/grad/hess/laplacian arrays."""
    inv = geo["inv"]
    gx = D[:, 1] * inv[:, 0, 0] + D[:, 2] * inv[:, 1, 0]
    gy = D[:, 1] * inv[:, 0, 1] + D[:, 2] * inv[:, 1, 1]
    hg = geo["hess"]
    # subtract the geometry curvature term, then rotate both indices
    muu = D[:, 3] - gx * hg[:, 0, 0] - gy * hg[:, 0, 1]
    muv = D[:, 4] - gx * hg[:, 1, 0] - gy * hg[:, 1, 1]
    mvv = D[:, 5] - gx * hg[:, 2, 0] - gy * hg[:, 2, 1]
    a, b = inv[:, 0, 0], inv[:, 0, 1]
    c, d = inv[:, 1, 0], inv[:, 1, 1]
    hxx = muu * a * a + 2.0 * muv * a * c + mvv * c * c
    hxy = muu * a * b + muv * (a * d + b * c) + mvv * c * d
    hyy = muu * b * b + 2.0 * muv * b * d + mvv * d * d
    return {
        "value": D[:, 0],
        "grad": np.stack([gx, gy], axis=1),
        "hess": np.stack([hxx, hxy, hyy], axis=1),
        "lap": hxx + hyy,
    }


def _interface_actives(basis):
    """Per v-element list of active interface functions (kind, j)."""
    grid = basis.space_v.breakpoints
    active = [[] for _ in range(grid.size - 1)]
    for kind, count in (("plus", basis.n_plus), ("minus", basis.n_minus)):
        for j in range(count):
            a, b = basis.iface_support(kind, j)
            for e in range(grid.size - 1):
                if a < grid[e + 1] - STRIP_TOL and b > grid[e] + STRIP_TOL:
                    active[e].append((kind, j))
    return active


def iterate_volume(domain, basis, rule, nderiv=2):
    """Yield per-element evaluation data over both patches.

    Each item is a dict with global ``ids``, physical ``value``/``grad``/
    ``hess``/``lap`` arrays of shape (nloc, [...,] nq), quadrature
    weights ``w`` (already times |det J|) and points ``xy``.
    """
    dm = basis.dof_map()
    iface_active = _interface_actives(basis)
    for side in SIDES:
        patch = domain.patch(side)
        su = basis.space_u[side]
        sv = basis.space_v
        vstar = basis.space_vstar
        strip_end = su.knots[su.degree + 2]  # u-support of the interface funcs
        ugrid = su.breakpoints
        gu, gvs = rule.counts(side, True)
        _, gvi = rule.counts(side, False)

        utab = _DirTables(ugrid, gu)
        u_first, u_tabs = utab.tables(su, nderiv)
        gu_first, gu_tabs = utab.tables(patch.space_u, nderiv)
        vtabs = {}
        for strip, g in ((True, gvs), (False, gvi)):
            vt = _DirTables(sv.breakpoints, g)
            entry = {
                "dir": vt,
                "v": vt.tables(sv, nderiv),
                "geo": vt.tables(patch.space_v, nderiv),
            }
            if strip:
                entry["vstar"] = vt.tables(vstar, nderiv)
            vtabs[strip] = entry

        iface_rows = {}
        for ev, items in enumerate(iface_active):
            iface_rows[ev] = [
                (kind, j, basis.iface_rows(side, kind, j)) for kind, j in items
            ]

        for eu in range(ugrid.size - 1):
            strip = ugrid[eu] < strip_end - STRIP_TOL
            vt = vtabs[strip]
            Bu = u_tabs[eu]
            fu = u_first[eu]
            for ev in range(sv.breakpoints.size - 1):
                Bv = vt["v"][1][ev]
                fv = vt["v"][0][ev]
                geo = _geometry_fields(
                    patch, gu_first[eu], gu_tabs[eu],
                    vt["geo"][0][ev], vt["geo"][1][ev],
                )
                nqu, nqv = Bu.shape[0], Bv.shape[0]
                nq = nqu * nqv

                ids = []
                rows = []
                # patch-interior tensor functions (u-index >= 2)
                for a in range(Bu.shape[2]):
                    i1 = fu + a
                    if i1 < 2:
                        continue
                    for b in range(Bv.shape[2]):
                        ids.append(dm.id_patch(side, i1, fv + b))
                        d = np.empty((6, nq))
                        d[0] = np.outer(Bu[:, 0, a], Bv[:, 0, b]).ravel()
                        d[1] = np.outer(Bu[:, 1, a], Bv[:, 0, b]).ravel()
                        d[2] = np.outer(Bu[:, 0, a], Bv[:, 1, b]).ravel()
                        d[3] = np.outer(Bu[:, 2, a], Bv[:, 0, b]).ravel()
                        d[4] = np.outer(Bu[:, 1, a], Bv[:, 1, b]).ravel()
                        d[5] = np.outer(Bu[:, 0, a], Bv[:, 2, b]).ravel()
                        rows.append(d)
                if strip and fu <= 1:
                    Bvs = vt["vstar"][1][ev]
                    fvs = vt["vstar"][0][ev]
                    for kind, j, crows in iface_rows[ev]:
                        block = crows[:, fvs:fvs + Bvs.shape[2]]  # (2, p*+1)
                        prof = np.einsum("ik,qbk->iqb", block, Bvs)  # (2, nqv, 3)
                        d = np.zeros((6, nqu, nqv))
                        for i in (0, 1):
                            pos = i - fu
                            if not 0 <= pos < Bu.shape[2]:
                                continue
                            d[0] += np.multiply.outer(Bu[:, 0, pos], prof[i, :, 0])
                            d[1] += np.multiply.outer(Bu[:, 1, pos], prof[i, :, 0])
                            d[2] += np.multiply.outer(Bu[:, 0, pos], prof[i, :, 1])
                            d[3] += np.multiply.outer(Bu[:, 2, pos], prof[i, :, 0])
                            d[4] += np.multiply.outer(Bu[:, 1, pos], prof[i, :, 1])
                            d[5] += np.multiply.outer(Bu[:, 0, pos], prof[i, :, 2])
                        kid = dm.id_plus(j) if kind == "plus" else dm.id_minus(j)
                        ids.append(kid)
                        rows.append(d.reshape(6, nq))

                D = np.stack(rows)
                fields = _physical_derivs(D, geo)
                w = np.outer(utab.weights[eu], vt["dir"].weights[ev]).ravel()
                fields["ids"] = np.asarray(ids)
                fields["w"] = w * np.abs(geo["det"])
                fields["xy"] = geo["xy"]
                fields["side"] = side
                yield fields


_EDGES = ("u1", "v0", "v1")  # u0 is the interface, not a boundary edge


def iterate_boundary(domain, basis, rule):
    """Yield per-edge-element boundary data: ids, value, grad, arclength
    weights, outward unit normal and physical points."""
    dm = basis.dof_map()
    iface_active = _interface_actives(basis)
    for side in SIDES:
        patch = domain.patch(side)
        su, sv, vstar = basis.space_u[side], basis.space_v, basis.space_vstar
        gu, gvs = rule.counts(side, True)
        for edge in _EDGES:
            if edge == "u1":
                g, fixed = gvs, 1.0
                run = _DirTables(sv.breakpoints, g)
                v_first, v_tabs = run.tables(sv, 1)
                gv_first, gv_tabs = run.tables(patch.space_v, 1)
                vs_first, vs_tabs = run.tables(vstar, 1)
                ufix, udt = su.eval_basis(fixed, 1)
                gufix, gudt = patch.space_u.eval_basis(fixed, 1)
            else:
                g, fixed = gu, (0.0 if edge == "v0" else 1.0)
                run = _DirTables(su.breakpoints, g)
                u_first, u_tabs = run.tables(su, 1)
                gu_first, gu_tabs = run.tables(patch.space_u, 1)
                vfix, vdt = sv.eval_basis(fixed, 1)
                gvfix, gvdt = patch.space_v.eval_basis(fixed, 1)
                vsfix, vsdt = vstar.eval_basis(fixed, 1)
                ev_edge = 0 if edge == "v0" else sv.breakpoints.size - 2

            for e in range(len(run.points)):
                npts = run.points[e].size
                if edge == "u1":
                    Gu, Gv = (
                        np.broadcast_to(gudt, (npts, 2, gudt.shape[1])),
                        gv_tabs[e],
                    )
                    gfu, gfv = gufix, gv_first[e]
                else:
                    Gu, Gv = gu_tabs[e], np.broadcast_to(gvdt, (npts, 2, gvdt.shape[1]))
                    gfu, gfv = gu_first[e], gvfix
                block = patch.net[gfu:gfu + Gu.shape[2], gfv:gfv + Gv.shape[2]]
                F = np.einsum("qai,qbj,ijc->abqc", Gu, Gv, block)
                J = np.stack([F[1, 0], F[0, 1]], axis=-1)
                det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
                inv = np.empty_like(J)
                inv[:, 0, 0] = J[:, 1, 1] / det
                inv[:, 0, 1] = -J[:, 0, 1] / det
                inv[:, 1, 0] = -J[:, 1, 0] / det
                inv[:, 1, 1] = J[:, 0, 0] / det
                if edge == "u1":
                    tangent = F[0, 1]
                    inward = -F[1, 0]
                else:
                    tangent = F[1, 0]
                    inward = F[0, 1] if edge == "v0" else -F[0, 1]
                tau = np.hypot(tangent[:, 0], tangent[:, 1])
                normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
                normal /= tau[:, None]
                flip = np.sign(np.sum(normal * inward, axis=1))
                normal *= -np.where(flip == 0.0, 1.0, flip)[:, None]

                ids, rows = [], []
                if edge == "u1":
                    Bv, fv = v_tabs[e], v_first[e]
                    for a in range(udt.shape[1]):
                        i1 = ufix + a
                        if i1 < 2:
                            continue
                        for b in range(Bv.shape[2]):
                            ids.append(dm.id_patch(side, i1, fv + b))
                            d = np.zeros((3, npts))
                            d[0] = udt[0, a] * Bv[:, 0, b]
                            d[1] = udt[1, a] * Bv[:, 0, b]
                            d[2] = udt[0, a] * Bv[:, 1, b]
                            rows.append(d)
                    # interface functions vanish identically at u = 1
                else:
                    Bu, fu = u_tabs[e], u_first[e]
                    for a in range(Bu.shape[2]):
                        i1 = fu + a
                        if i1 < 2:
                            continue
                        for b in range(vdt.shape[1]):
                            ids.append(dm.id_patch(side, i1, vfix + b))
                            d = np.zeros((3, npts))
                            d[0] = Bu[:, 0, a] * vdt[0, b]
                            d[1] = Bu[:, 1, a] * vdt[0, b]
                            d[2] = Bu[:, 0, a] * vdt[1, b]
                            rows.append(d)
                    for kind, j in iface_active[ev_edge]:
                        crows = basis.iface_rows(side, kind, j)
                        blockc = crows[:, vsfix:vsfix + vsdt.shape[1]]
                        pv = blockc @ vsdt[0]
                        pdv = blockc @ vsdt[1]
                        d = np.zeros((3, npts))
                        for i in (0, 1):
                            pos = i - fu
                            if not 0 <= pos < Bu.shape[2]:
                                continue
                            d[0] += Bu[:, 0, pos] * pv[i]
                            d[1] += Bu[:, 1, pos] * pv[i]
                            d[2] += Bu[:, 0, pos] * pdv[i]
                        kid = dm.id_plus(j) if kind == "plus" else dm.id_minus(j)
                        ids.append(kid)
                        rows.append(d)

                D = np.stack(rows)
                gx = D[:, 1] * inv[:, 0, 0] + D[:, 2] * inv[:, 1, 0]
                gy = D[:, 1] * inv[:, 0, 1] + D[:, 2] * inv[:, 1, 1]
                yield {
                    "side": side,
                    "edge": edge,
                    "ids": np.asarray(ids),
                    "value": D[:, 0],
                    "grad": np.stack([gx, gy], axis=1),
                    "w": run.weights[e] * tau,
                    "normal": normal,
                    "xy": F[0, 0],
                }


# ---------------------------------------------------------------------------
# system assembly and solve
# ---------------------------------------------------------------------------

class DiscreteSystem:
    """Sparse Galerkin system for the biharmonic form.

    Holds the full symmetric matrix and load vector over all basis
    functions; boundary data is attached by ``apply_essential_bc`` and
    the solution coefficients by ``solve``.
    """

    def __init__(self, matrix, load, basis, rule):
        self.A = matrix
        self.F = load
        self.basis = basis
        self.rule = rule
        self.boundary_ids = None
        self.boundary_values = None
        self.interior_ids = None
        self.reduced_matrix = None
        self.reduced_rhs = None
        self.solution = None


def assemble(domain, basis, rule, f=None, g1=None):
    """Assemble the patchwise biharmonic stiffness matrix and the load
    vector ``(f, phi) + (g1, d_n phi)_boundary``.

    ``f`` and ``g1`` are callables of physical coordinate arrays
    ``(x, y)``; either may be None.
    """
    dm = basis.dof_map()
    n = dm.n_total
    ii, jj, vv = [], [], []
    F = np.zeros(n)
    for el in iterate_volume(domain, basis, rule):
        det = el["w"]
        local = el["lap"] * det
        amat = local @ el["lap"].T
        ids = el["ids"]
        ii.append(np.repeat(ids, ids.size))
        jj.append(np.tile(ids, ids.size))
        vv.append(amat.ravel())
        if f is not None:
            fv = f(el["xy"][:, 0], el["xy"][:, 1])
            F[ids] += el["value"] @ (fv * det)
    if g1 is not None:
        for ed in iterate_boundary(domain, basis, rule):
            gv = g1(ed["xy"][:, 0], ed["xy"][:, 1])
            dn = np.einsum("iaq,qa->iq", ed["grad"], ed["normal"])
            F[ed["ids"]] += dn @ (gv * ed["w"])
    A = sp.coo_matrix(
        (np.concatenate(vv), (np.concatenate(ii), np.concatenate(jj))),
        shape=(n, n),
    ).tocsr()
    return DiscreteSystem(A, F, basis, rule)


def apply_essential_bc(system, g0):
    """Set boundary coefficients from the L2 projection of ``g0`` onto
    the boundary trace span and form the reduced interior system."""
    basis = system.basis
    if basis.partition is None:
        raise ValueError("basis has no boundary partition; run split_boundary_dofs")
    boundary = basis.partition.boundary_ids
    interior = basis.partition.interior_ids
    pos = -np.ones(basis.dof_map().n_total, dtype=int)
    pos[boundary] = np.arange(boundary.size)

    G = np.zeros((boundary.size, boundary.size))
    r = np.zeros(boundary.size)
    for ed in iterate_boundary(system.basis.domain, basis, system.rule):
        sel = pos[ed["ids"]] >= 0
        if not np.any(sel):
            continue
        loc = pos[ed["ids"][sel]]
        vals = ed["value"][sel] * ed["w"]
        G[np.ix_(loc, loc)] += vals @ ed["value"][sel].T
        gv = g0(ed["xy"][:, 0], ed["xy"][:, 1]) if g0 is not None else 0.0
        r[loc] += vals @ (np.broadcast_to(gv, ed["w"].shape))
    try:
        gb = np.linalg.solve(G, r)
    except np.linalg.LinAlgError as exc:
        raise SolveError(f"boundary trace Gram matrix is singular: {exc}") from exc

    system.boundary_ids = boundary
    system.interior_ids = interior
    system.boundary_values = gb
    A = system.A
    system.reduced_matrix = A[interior][:, interior].tocsc()
    system.reduced_rhs = system.F[interior] - A[interior][:, boundary] @ gb
    return system


def solve(system, method="direct", rtol=1e-10):
    """Solve the reduced system and return the full coefficient vector
    (interior solution plus boundary lifting)."""
    if system.reduced_matrix is None:
        raise ValueError("apply_essential_bc must run before solve")
    A0, b0 = system.reduced_matrix, system.reduced_rhs
    if method == "direct":
        try:
            lu = spla.splu(A0)
            x0 = lu.solve(b0)
            x0 += lu.solve(b0 - A0 @ x0)  # one refinement step
        except RuntimeError as exc:
            raise SolveError(f"sparse factorization failed: {exc}") from exc
    elif method == "cg":
        diag = A0.diagonal()
        M = sp.diags(np.where(diag > 0.0, 1.0 / diag, 1.0))
        try:
            x0, info = spla.cg(
                A0, b0, rtol=rtol * 1e-2, atol=0.0, maxiter=20 * b0.size, M=M
            )
        except TypeError:  # older scipy spells the tolerance 'tol'
            x0, info = spla.cg(
                A0, b0, tol=rtol * 1e-2, atol=0.0, maxiter=20 * b0.size, M=M
            )
        if info != 0:
            raise SolveError(f"conjugate gradients did not converge (info={info})")
    else:
        raise ValueError(f"unknown solver {method!r}")
    scale = np.linalg.norm(b0)
    if scale > 0.0:
        rel = np.linalg.norm(A0 @ x0 - b0) / scale
        if rel > rtol:
            raise SolveError(
                f"solver residual {rel:.3e} above tolerance {rtol:.1e} "
                f"(n={b0.size}, cond estimate unavailable)"
            )
    x = np.zeros(system.basis.dof_map().n_total)
    x[system.interior_ids] = x0
    x[system.boundary_ids] = system.boundary_values
    system.solution = x
    return x
