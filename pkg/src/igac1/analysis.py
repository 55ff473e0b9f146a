"""Error measurement, interface jump diagnostics and convergence orders.

Errors are accumulated patchwise and combined as the broken norm (square
root of the sum of squared per-patch Sobolev norms).  The H2 norm uses
the full second-derivative tensor, with the mixed derivative counted
twice.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import build_quadrature, iterate_volume
from .c1_basis import SIDES
from .splines import gauss_rule

ERROR_FLOOR = 1e-14


def error_norms(domain, basis, coeffs, exact, rule=None):
    """(errL2, errH1, errH2) of ``coeffs`` against an exact solution with
    gradient and Hessian callables; full norms summed over both patches."""
    if rule is None:
        rule = build_quadrature(basis.space_u, basis.space_v, basis.p2star, margin=1)
    acc = np.zeros(3)
    for el in iterate_volume(domain, basis, rule):
        c = coeffs[el["ids"]]
        x, y = el["xy"][:, 0], el["xy"][:, 1]
        dv = c @ el["value"] - exact.value(x, y)
        dg = np.einsum("i,iaq->qa", c, el["grad"]) - exact.grad(x, y)
        dh = np.einsum("i,iaq->qa", c, el["hess"]) - exact.hess(x, y)
        w = el["w"]
        acc[0] += w @ dv**2
        acc[1] += w @ (dg[:, 0] ** 2 + dg[:, 1] ** 2)
        acc[2] += w @ (dh[:, 0] ** 2 + 2.0 * dh[:, 1] ** 2 + dh[:, 2] ** 2)
    err_l2 = math.sqrt(acc[0])
    err_h1 = math.sqrt(acc[0] + acc[1])
    err_h2 = math.sqrt(acc[0] + acc[1] + acc[2])
    return err_l2, err_h1, err_h2


def _interface_parametric_grads(basis, side, coeffs, v, dm):
    """(f_u, f_v) of the interface part of a member at (0, v) on one side.

    Patch-interior functions have vanishing value and first derivatives
    there, so only the interface blocks contribute.
    """
    su = basis.space_u[side]
    first_u, bu = su.eval_basis(0.0, 1)
    vstar = basis.space_vstar
    fv, dv = vstar.eval_basis(v, 1)
    fu_val = 0.0
    fv_val = 0.0
    for kind, count, base in (
        ("plus", basis.n_plus, dm.id_plus),
        ("minus", basis.n_minus, dm.id_minus),
    ):
        for j in range(count):
            c = coeffs[base(j)]
            if c == 0.0:
                continue
            rows = basis.iface_rows(side, kind, j)
            block = rows[:, fv:fv + dv.shape[1]]
            for i in (0, 1):
                pos = i - first_u
                if not 0 <= pos < bu.shape[1]:
                    continue
                fu_val += c * bu[1, pos] * (block[i] @ dv[0])
                fv_val += c * bu[0, pos] * (block[i] @ dv[1])
    return fu_val, fv_val


def interface_gradients(domain, basis, coeffs, v):
    """One-sided physical gradients of a member on the interface,
    together with the frame; used for jump diagnostics."""
    dm = basis.dof_map()
    frame = domain.interface_frame(v)
    grads = {}
    for side in SIDES:
        fu, fv = _interface_parametric_grads(basis, side, coeffs, v, dm)
        d = domain.patch(side).derivs(0.0, v, 1, 1)
        jxu, jxv = d[1, 0][0], d[0, 1][0]
        jyu, jyv = d[1, 0][1], d[0, 1][1]
        det = jxu * jyv - jxv * jyu
        gx = (jyv * fu - jyu * fv) / det
        gy = (-jxv * fu + jxu * fv) / det
        grads[side] = np.array([gx, gy])
    jump = (grads["R"] - grads["L"]) @ frame.n
    return {
        "frame": frame,
        "grad_L": grads["L"],
        "grad_R": grads["R"],
        "d_t0": grads["L"] @ frame.t0,
        "d_n_L": grads["L"] @ frame.n,
        "jump": jump,
    }


def jump_norm(domain, basis, coeffs):
    """L2 norm over the interface of the normal-derivative jump."""
    npts = 2 * (basis.p2star + 1)
    xs, ws = gauss_rule(npts)
    grid = basis.space_v.breakpoints
    total = 0.0
    for a, b in zip(grid[:-1], grid[1:]):
        for x, w in zip(a + (b - a) * xs, (b - a) * ws):
            info = interface_gradients(domain, basis, coeffs, x)
            total += w * info["frame"].tau * info["jump"] ** 2
    return math.sqrt(total)


def jump_factors(domain, exact, approx, v):
    """Factors (E1, E2) of the pointwise jump representation

        jump = E1 * d_t0(phi) + E2 * d_n(phi_L)

    both of size O(h^(ptilde+1)); they vanish at the interface ends by
    the boundary interpolation of the projection."""
    tau = domain.interface_frame(v).tau
    al, ar = exact.alpha("L", v)[0], exact.alpha("R", v)[0]
    bl, br = exact.beta_s("L", v)[0], exact.beta_s("R", v)[0]
    tal, tar = approx.alpha("L", v)[0], approx.alpha("R", v)[0]
    tbl, tbr = approx.beta_s("L", v)[0], approx.beta_s("R", v)[0]
    e1 = tau * tau * (tar * (bl - tbl) / (ar * tal) - (br - tbr) / ar)
    e2 = tar * (al - tal) / (ar * tal) - (ar - tar) / ar
    return e1, e2


def eoc(errors):
    """Orders log2(e_h / e_{h/2}) for a mesh-halving error sequence.

    Entries where either error sits below the measurement floor are
    reported as NaN."""
    errors = list(errors)
    if len(errors) < 2:
        raise ValueError("need at least two levels")
    out = []
    for a, b in zip(errors[:-1], errors[1:]):
        if a <= ERROR_FLOOR or b <= ERROR_FLOOR:
            out.append(float("nan"))
        else:
            out.append(math.log2(a / b))
    return out


@dataclass
class ErrorRecord:
    """Per-level measurements of one convergence run."""

    level: int
    h: float
    dofs: int
    errL2: float
    errH1: float
    errH2: float
    jumpL2: float
    seconds: float = 0.0


CSV_HEADER = [
    "level", "h", "dofs", "errL2", "errH1", "errH2", "jumpL2",
    "eocL2", "eocH1", "eocH2", "eocJump", "seconds",
]


@dataclass
class ConvergenceReport:
    """A refinement sequence with derived empirical orders."""

    records: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def add(self, record):
        self.records.append(record)

    def series(self, quantity):
        return [getattr(r, quantity) for r in self.records]

    def orders(self, quantity):
        if len(self.records) < 2:
            return []
        return eoc(self.series(quantity))

    def csv_text(self):
        """Fixed-schema CSV; EOC columns are blank on the first level and
        where below-floor errors make the order undefined."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        orders = {q: self.orders(q) for q in ("errL2", "errH1", "errH2", "jumpL2")}

        def fmt(x):
            return f"{x:.16g}"

        for i, rec in enumerate(self.records):
            eocs = ["", "", "", ""]
            if i > 0:
                eocs = [
                    "" if math.isnan(orders[q][i - 1]) else fmt(orders[q][i - 1])
                    for q in ("errL2", "errH1", "errH2", "jumpL2")
                ]
            writer.writerow(
                [
                    rec.level,
                    fmt(rec.h),
                    rec.dofs,
                    fmt(rec.errL2),
                    fmt(rec.errH1),
                    fmt(rec.errH2),
                    fmt(rec.jumpL2),
                    *eocs,
                    f"{rec.seconds:.3f}",
                ]
            )
        return buf.getvalue()
