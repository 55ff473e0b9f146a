"""Experiment driver: configuration, refinement runs, CSV and plots.

A run sweeps refinement levels for one geometry and discretization
choice, solving the biharmonic problem with the manufactured solution
``(cos 4 pi x - 1)(cos 4 pi y - 1)`` and recording errors, the interface
jump and empirical orders.  Validation enforces the model assumptions:

  1. discretization regularity r >= 1
  5. interface degree p >= 3
  6. gluing approximation 1 <= rtilde <= ptilde - 1 for non-polynomial
     gluing data (rtilde = ptilde is accepted when the gluing data is
     polynomial of degree <= ptilde; rtilde = 0 is accepted with a
     warning since it is the documented way to reproduce the degraded
     rates)
"""

import argparse
import os
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

from .analysis import ConvergenceReport, ErrorRecord, error_norms, jump_norm
from .assembly import apply_essential_bc, assemble, build_quadrature, solve
from .c1_basis import build_c1_basis
from .errors import ConfigError, GeometryError, ProjectionError, SolveError
from .geometry import catalog, load_geometry
from .gluing import exact_gluing
from .problems import ManufacturedSolution

MAX_LEVELS = 8


@dataclass(frozen=True)
class RunConfig:
    """One experiment: geometry, degrees, regularities and level range."""

    geometry: str
    p: int
    r: int
    levels: int
    ptilde: int = None
    rtilde: int = None
    solver: str = "direct"
    out: str = None
    seed: int = 0

    def resolved(self):
        """Fill the default gluing degrees: ptilde = max(p - 2, 2) and
        rtilde = ptilde - 1."""
        pt = self.ptilde if self.ptilde is not None else max(self.p - 2, 2)
        rt = self.rtilde if self.rtilde is not None else pt - 1
        return replace(self, ptilde=pt, rtilde=rt)


def _load_domain(name):
    if os.path.exists(name):
        return load_geometry(name)
    return catalog(name)


def _gluing_is_polynomial(data, degree):
    vs = np.linspace(0.0, 1.0, 201)
    for fn in ("L", "R"):
        for get in (lambda v, s=fn: data.alpha(s, v)[0],
                     lambda v, s=fn: data.beta_s(s, v)[0]):
            vals = np.array([get(v) for v in vs])
            scale = max(1.0, np.max(np.abs(vals)))
            fit = np.polyval(np.polyfit(vs, vals, degree), vs)
            if np.max(np.abs(vals - fit)) > 1e-9 * scale:
                return False
    return True


def validate_config(config, domain=None):
    """Resolve defaults and reject assumption violations.

    Returns the resolved config; raises ConfigError with the violated
    assumption number in the message.
    """
    cfg = config.resolved()
    if cfg.p < 3:
        raise ConfigError(
            f"p={cfg.p} violates assumption 5 (interface degree requires p >= 3)"
        )
    if cfg.r < 1:
        raise ConfigError(
            f"r={cfg.r} violates assumption 1 (minimum regularity r >= 1)"
        )
    if cfg.r > cfg.p - 1:
        raise ConfigError(f"r={cfg.r} must satisfy 1 <= r <= p-1 = {cfg.p - 1}")
    if not 1 <= cfg.levels <= MAX_LEVELS:
        raise ConfigError(f"levels must lie in [1, {MAX_LEVELS}], got {cfg.levels}")
    if cfg.ptilde < 1:
        raise ConfigError(f"ptilde={cfg.ptilde} must be at least 1")
    if cfg.rtilde < 0 or cfg.rtilde > cfg.ptilde:
        raise ConfigError(
            f"rtilde={cfg.rtilde} must lie in [0, ptilde] = [0, {cfg.ptilde}]"
        )
    if cfg.solver not in ("direct", "cg"):
        raise ConfigError(f"solver must be 'direct' or 'cg', got {cfg.solver!r}")
    if cfg.rtilde == cfg.ptilde:
        domain = domain if domain is not None else _load_domain(cfg.geometry)
        if not _gluing_is_polynomial(exact_gluing(domain), cfg.ptilde):
            raise ConfigError(
                f"rtilde=ptilde={cfg.ptilde} violates assumption 6 "
                "(needs 1 <= rtilde <= ptilde-1 for non-polynomial gluing data)"
            )
    elif cfg.rtilde == 0 and cfg.ptilde > 1:
        print(
            f"warning: rtilde=0 drops below assumption 6 (rtilde >= 1); "
            "rates will degrade",
            file=sys.stderr,
        )
    return cfg


def _csv_name(cfg):
    stem = os.path.splitext(os.path.basename(cfg.geometry))[0]
    return f"run_{stem}_p{cfg.p}_r{cfg.r}_pt{cfg.ptilde}_rt{cfg.rtilde}.csv"


def run(config, exact=None, quiet=True):
    """Execute one refinement study and return the ConvergenceReport.

    Each level rebuilds spaces, projected gluing data, basis, system and
    solution; a CSV file is written when the config names an output
    directory.  Stage failures abort with a stage-labeled message.
    """
    cfg = validate_config(config)
    domain = _load_domain(cfg.geometry)
    if exact is None:
        exact = ManufacturedSolution.cos4pi()
    report = ConvergenceReport(config=vars(cfg).copy())
    for level in range(1, cfg.levels + 1):
        t0 = time.perf_counter()
        stage = "basis construction"
        try:
            basis = build_c1_basis(domain, cfg.p, cfg.r, level, cfg.ptilde, cfg.rtilde)
            stage = "assembly"
            rule = build_quadrature(basis.space_u, basis.space_v, basis.p2star, margin=1)
            system = assemble(
                domain, basis, rule, f=exact.bilaplacian, g1=exact.laplacian
            )
            stage = "boundary conditions"
            apply_essential_bc(system, exact.value)
            stage = "solve"
            coeffs = solve(system, method=cfg.solver)
            stage = "error measurement"
            el2, eh1, eh2 = error_norms(domain, basis, coeffs, exact)
            jl2 = jump_norm(domain, basis, coeffs)
        except (GeometryError, ProjectionError, SolveError, ValueError) as exc:
            raise type(exc)(f"level {level}, stage '{stage}': {exc}") from exc
        report.add(
            ErrorRecord(
                level=level,
                h=2.0 ** -level,
                dofs=basis.dof_map().n_total,
                errL2=el2,
                errH1=eh1,
                errH2=eh2,
                jumpL2=jl2,
                seconds=time.perf_counter() - t0,
            )
        )
        if not quiet:
            rec = report.records[-1]
            print(
                f"level {level}: dofs={rec.dofs} errH2={rec.errH2:.3e} "
                f"jump={rec.jumpL2:.3e} ({rec.seconds:.1f}s)"
            )
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        path = os.path.join(cfg.out, _csv_name(cfg))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report.csv_text())
    return report


def sweep(configs, out=None):
    """Run several configs and emit a combined error-vs-DOF table."""
    reports = [run(cfg) for cfg in configs]
    if out:
        os.makedirs(out, exist_ok=True)
        lines = ["geometry,p,r,ptilde,rtilde,level,dofs,errL2,errH1,errH2,jumpL2"]
        for rep in reports:
            c = rep.config
            for rec in rep.records:
                lines.append(
                    f"{c['geometry']},{c['p']},{c['r']},{c['ptilde']},{c['rtilde']},"
                    f"{rec.level},{rec.dofs},{rec.errL2:.16g},{rec.errH1:.16g},"
                    f"{rec.errH2:.16g},{rec.jumpL2:.16g}"
                )
        with open(os.path.join(out, "sweep.csv"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return reports


_PLOT_KINDS = ("error_vs_h", "error_vs_dof", "jump_vs_h")


def emit_plot_script(report, kind):
    """Standalone matplotlib script (returned as text) with log-log axes
    and reference-slope triangles for the expected orders."""
    if kind not in _PLOT_KINDS:
        raise ValueError(f"kind must be one of {_PLOT_KINDS}")
    cfg = report.config
    lines = [
        "#!/usr/bin/env python3",
        f"# {kind} plot for geometry={cfg.get('geometry')} "
        f"p={cfg.get('p')} r={cfg.get('r')} "
        f"ptilde={cfg.get('ptilde')} rtilde={cfg.get('rtilde')}",
        "import matplotlib.pyplot as plt",
        "",
    ]
    if not report.records:
        lines.append("# empty report: nothing to plot")
        return "\n".join(lines) + "\n"

    hs = [rec.h for rec in report.records]
    dofs = [rec.dofs for rec in report.records]
    p = cfg.get("p", 3)
    pt = cfg.get("ptilde", 2)
    q = min(p - 1, pt + 1)
    lines.append(f"h = {hs!r}")
    lines.append(f"dofs = {dofs!r}")
    for quantity in ("errL2", "errH1", "errH2", "jumpL2"):
        lines.append(f"{quantity} = {report.series(quantity)!r}")
    lines.append("fig, ax = plt.subplots(figsize=(5, 4))")
    if kind == "jump_vs_h":
        lines.append("ax.loglog(h, jumpL2, 'o-', label='normal-derivative jump')")
        lines += _slope_marker("h", "jumpL2", pt + 1)
        lines.append("ax.set_xlabel('h')")
    elif kind == "error_vs_h":
        for quantity, mark in (("errL2", "o-"), ("errH1", 's-'), ("errH2", '^-')):
            lines.append(f"ax.loglog(h, {quantity}, '{mark}', label='{quantity}')")
        for slope in (q, q + 1, q + 2):
            lines += _slope_marker("h", "errH2", slope)
        lines.append("ax.set_xlabel('h')")
    else:
        for quantity, mark in (("errL2", "o-"), ("errH1", 's-'), ("errH2", '^-')):
            lines.append(f"ax.loglog(dofs, {quantity}, '{mark}', label='{quantity}')")
        lines.append("ax.set_xlabel('degrees of freedom')")
    lines += [
        "ax.set_ylabel('error')",
        "ax.grid(True, which='both', alpha=0.3)",
        "ax.legend()",
        "fig.tight_layout()",
        "plt.show()",
    ]
    return "\n".join(lines) + "\n"


def _slope_marker(xname, yname, slope):
    # small reference triangle anchored at the last data point
    return [
        f"x0, x1 = {xname}[-1], {xname}[-2]",
        f"y0 = {yname}[-1]",
        f"ax.loglog([x0, x1], [y0, y0 * (x1 / x0) ** {slope}], 'k--', lw=0.8)",
        f"ax.annotate('{slope}', xy=(x1, y0 * (x1 / x0) ** {slope}), fontsize=8)",
    ]


def main(argv=None):
    """Entry point; exit code 0 on success, 2 on config errors, 3 on
    numerical failures."""
    parser = argparse.ArgumentParser(
        prog="igac1",
        description="Biharmonic convergence studies with approximately C1 "
        "two-patch spline spaces",
    )
    parser.add_argument("--geometry", required=True,
                        help="catalog name (ex1..ex4) or geometry file path")
    parser.add_argument("--p", type=int, required=True, help="spline degree")
    parser.add_argument("--r", type=int, required=True, help="spline regularity")
    parser.add_argument("--ptilde", type=int, default=None,
                        help="gluing approximation degree (default max(p-2, 2))")
    parser.add_argument("--rtilde", type=int, default=None,
                        help="gluing approximation regularity (default ptilde-1)")
    parser.add_argument("--levels", type=int, required=True,
                        help="number of refinement levels (1..8)")
    parser.add_argument("--out", default=None, help="output directory for CSV files")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized diagnostics")
    parser.add_argument("--solver", choices=("direct", "cg"), default="direct")
    parser.add_argument("--sweep-r", action="store_true",
                        help="sweep the regularity r over 1..p-1")
    parser.add_argument("--plot", choices=_PLOT_KINDS, default=None,
                        help="also emit a plot script of the given kind")
    args = parser.parse_args(argv)

    base = RunConfig(
        geometry=args.geometry, p=args.p, r=args.r, levels=args.levels,
        ptilde=args.ptilde, rtilde=args.rtilde, solver=args.solver,
        out=args.out, seed=args.seed,
    )
    try:
        if args.sweep_r:
            configs = [replace(base, r=r) for r in range(1, args.p)]
            for cfg in configs:
                validate_config(cfg)
            reports = sweep(configs, out=args.out)
            report = reports[0]
        else:
            report = run(base, quiet=False)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (GeometryError, ProjectionError, SolveError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    if args.plot:
        script = emit_plot_script(report, args.plot)
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            path = os.path.join(args.out, f"plot_{args.plot}.py")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(script)
        else:
            print(script)
    if not args.out and not args.plot:
        print(report.csv_text(), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
