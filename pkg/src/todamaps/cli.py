"""Command-line front end.

Every subcommand writes ``<out>/<name>.json`` with the schema
``{command, config_echo, residuals: {name: {max_abs, rms, tolerance, pass}},
artifacts, details}`` and exits 0 (all residuals within tolerance), 1
(some residual failed, report still written) or 2 (usage or domain error).
The output directory defaults to ``$TODAMAPS_OUT_DIR`` or ``./todamaps_out``.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

ENV_OUT = "TODAMAPS_OUT_DIR"


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# deterministic JSON


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return {True: "true", False: "false", None: "null"}[v]
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return '"%s"' % v
        return format(v, ".17g")
    if isinstance(v, (complex, np.complexfloating)):
        return _fmt([float(v.real), float(v.imag)])
    if isinstance(v, str):
        import json

        return json.dumps(v)
    if isinstance(v, dict):
        items = sorted((str(k), val) for k, val in v.items())
        return "{" + ", ".join(f"{_fmt(k)}: {_fmt(val)}" for k, val in items) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(f"cannot serialise {type(v).__name__}")


def dumps(obj) -> str:
    """JSON with sorted keys and 17 significant digits for every float."""
    return _fmt(obj) + "\n"


# ---------------------------------------------------------------------------
# report assembly


class Report:
    def __init__(self, command: str, config: dict):
        self.command = command
        self.config = config
        self.residuals: dict[str, dict] = {}
        self.artifacts: list[str] = []
        self.details: dict = {}

    def add(self, name: str, value, tol: float, rms=None):
        v = float(value.max_abs) if hasattr(value, "max_abs") else float(value)
        r = float(value.rms) if hasattr(value, "rms") else (v if rms is None else float(rms))
        self.residuals[name] = {"max_abs": v, "rms": r, "tolerance": float(tol), "pass": bool(v <= tol)}

    @property
    def ok(self) -> bool:
        return all(r["pass"] for r in self.residuals.values())

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "config_echo": self.config,
            "residuals": self.residuals,
            "artifacts": self.artifacts,
            "details": self.details,
        }


def _echo(args) -> dict:
    skip = {"func", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _out_dir(args) -> Path:
    d = Path(args.out or os.environ.get(ENV_OUT) or "todamaps_out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _dump_field(rep: Report, out: Path, name: str, fieldv, fmt: str):
    from .field_grid import dump_csv, dump_json

    if fmt in ("csv", "both"):
        dump_csv(fieldv, out / f"{name}.csv")
        rep.artifacts.append(f"{name}.csv")
    if fmt in ("json", "both"):
        dump_json(fieldv, out / f"{name}.json")
        rep.artifacts.append(f"{name}.json")


def _resolution(n: int) -> int:
    if n < 8:
        raise UsageError("resolution must be at least 8")
    return n


def _positive(t: float) -> float:
    if not t > 0:
        raise UsageError("tolerances must be positive")
    return t


def _poly(text: str):
    from .field_grid import parse_poly

    try:
        return parse_poly(text)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _cplx(text: str) -> complex:
    from .field_grid import parse_complex

    try:
        return parse_complex(text)
    except ValueError as e:
        raise UsageError(str(e)) from e


# ---------------------------------------------------------------------------
# subcommands; each returns a Report


def cmd_algebra_verify(args) -> Report:
    from .lie_core import build_sl_chevalley, verify_chevalley_relations, verify_jacobi

    rep = Report("algebra verify", _echo(args))
    b = build_sl_chevalley(args.n)
    rel, jac = verify_chevalley_relations(b), verify_jacobi(b)
    rep.add("chevalley_relations", len(rel), 0)
    rep.add("jacobi", len(jac), 0)
    rep.details = {"violations": rel + jac, "cartan_matrix": b.cartan.tolist(), "dim": b.dim}
    return rep


def cmd_affine_verify(args) -> Report:
    from .affine_algebra import H, AffineElement, bracket_defects, loop_bracket, random_element

    rep = Report("affine verify", _echo(args))
    rng = np.random.default_rng(args.seed)
    el = [random_element(rng) for _ in range(args.samples)]
    d = bracket_defects(el)
    rep.add("antisymmetry", d["antisymmetry"], args.tol)
    rep.add("jacobi", d["jacobi"], args.tol)
    hc = loop_bracket(AffineElement({1: H}), AffineElement({-1: H}))
    dev = float((hc - AffineElement.central(2)).norm())
    rep.add("h_lambda_cocycle", dev, 0)
    return rep


def cmd_toda_residual(args) -> Report:
    import jax.numpy as jnp

    from .field_grid import su2_grid
    from .lax_connection import curvature
    from .field_grid import residual
    from .lie_core import build_sl_chevalley
    from .toda_systems import TodaData, leznov_saveliev_connection, toda_residual

    rep = Report("toda residual", _echo(args))
    f = _poly(args.phi_from_f)
    alpha, beta = _cplx(args.alpha), _cplx(args.beta)
    if beta == 0:
        raise UsageError("beta must be nonzero")
    g = su2_grid(_resolution(args.n))

    def phi(x, y):
        a = f.xy(x, y)
        return jnp.real(-2 * jnp.log(1 + a * jnp.conj(a)))

    d = TodaData.canonical(build_sl_chevalley(2), [phi], alpha=alpha, beta=beta)
    rep.add("toda", toda_residual(d, g)[0], args.tol)
    rep.add("ls_curvature", residual(curvature(leznov_saveliev_connection(d, g))), args.tol)
    return rep


def cmd_toda_connection(args) -> Report:
    import jax.numpy as jnp

    from .field_grid import PolyField, residual, su2_grid
    from .lax_connection import curvature
    from .lie_core import build_sl_chevalley
    from .toda_systems import (
        TodaData,
        curvature_cartan_part,
        expected_cartan_part,
        leznov_saveliev_connection,
        sl2_liouville_data,
        toda_from_curvature,
        toda_residual_fields,
    )

    rep = Report("toda connection", _echo(args))
    g = su2_grid(_resolution(args.n))
    rep.add("sl2_curvature", residual(curvature(leznov_saveliev_connection(sl2_liouville_data(), g))),
            args.tol)
    rng = np.random.default_rng(args.seed)
    b = build_sl_chevalley(args.rank)
    phis = []
    for _ in range(b.rank):
        c = rng.normal(size=6) * 0.3
        P = PolyField({(0, 0): c[0], (1, 0): c[1] + 1j * c[2], (0, 1): c[1] - 1j * c[2],
                       (1, 1): c[3], (2, 0): c[4] + 1j * c[5], (0, 2): c[4] - 1j * c[5]})
        phis.append(lambda x, y, P=P: jnp.real(P.xy(x, y)))
    d = TodaData.canonical(b, phis, alpha=complex(rng.uniform(0.5, 1.5)), beta=float(rng.uniform(0.5, 1.5)))
    R = np.stack([f.values for f in toda_residual_fields(d, g)])
    rep.add("cartan_identity", np.abs(toda_from_curvature(d, g) - R).max(), 1e-9)
    rep.add("cartan_part", np.abs(curvature_cartan_part(d, g) - expected_cartan_part(d, g)).max(), 1e-9)
    rep.details = {"toda_residual_size": float(np.abs(R).max())}
    return rep


def _cat_fields(args):
    from .field_grid import Grid
    from .toda_systems import cat_solution

    F = _poly(args.F)
    return cat_solution(F, args.x0), Grid.square(args.half_width, _resolution(args.n))


def cmd_cat_verify(args) -> Report:
    from .lax_connection import pencil_curvature
    from .toda_systems import cat_connection, cat_residual

    rep = Report("cat verify", _echo(args))
    sol, g = _cat_fields(args)
    for k, v in cat_residual(sol.fields, g).items():
        rep.add(f"cat_{k}", v, args.tol)
    pc = pencil_curvature(cat_connection(sol.fields, g), (1.0, 2j))
    for k, v in pc.coefficients.items():
        rep.add(f"curvature_{k}", v, args.tol)
    return rep


def cmd_cat_limit(args) -> Report:
    from .field_grid import Grid, GridField, PolyField
    from .toda_systems import CatFields, cat_limits, cat_residual_fields, cat_solution, liouville_cat_fields

    rep = Report("cat limit", _echo(args))
    n = _resolution(args.n)
    if args.which == "sinh":
        g = Grid.square(0.75, n)
        sol = cat_solution(PolyField.holomorphic([2.0, np.exp(1j * args.theta)]))
        rep.add("sinh_gordon", cat_limits(sol.fields, "sinh", g), args.tol)
        # with eta = 0 the CAT phi equation is the sinh-Gordon equation, for any phi
        probe = CatFields(lambda x, y: 0.3 * x * y + 0.1 * x, 0.0, 0.0)
        r_cat = cat_residual_fields(probe, g)["phi"].values
        import jax.numpy as jnp

        from .field_grid import laplacian_zzbar

        lap = laplacian_zzbar(probe.phi)
        r_sg = g.evaluate(lambda x, y: lap(x, y) - jnp.exp(2 * probe.phi(x, y)) + jnp.exp(-2 * probe.phi(x, y)))
        rep.add("structural", np.abs(r_cat - r_sg).max(), 0)
    else:
        g = Grid.square(0.6, n)
        f = liouville_cat_fields(PolyField.z(), eta=args.eta)
        rep.add("liouville", cat_limits(f, "liouville", g, tol=args.tol), args.tol)
    return rep


def cmd_reduce_theorem2(args) -> Report:
    from dataclasses import replace

    from .field_grid import Grid
    from .toda_systems import HypothesisViolationError, random_theorem2_instance, theorem2_reduce

    rep = Report("reduce theorem2", _echo(args))
    g = Grid.square(0.75, _resolution(args.n))
    inst = random_theorem2_instance(np.random.default_rng(args.seed))
    r = theorem2_reduce(inst.f, inst.fprime, inst.theta, g)
    for k, v in r.cat.items():
        rep.add(f"cat_{k}", v, args.tol)
    for k, v in r.curvature.coefficients.items():
        rep.add(f"curvature_{k}", v, args.tol)
    rep.add("xi_closure", r.xi_closure, 1e-8)
    bad = replace(inst.theta, beta=lambda x, y: inst.theta.beta(x, y) + 0.1)
    try:
        theorem2_reduce(inst.f, inst.fprime, bad, g)
        rejected = False
    except HypothesisViolationError:
        rejected = True
    rep.add("gate_rejects_violation", 0 if rejected else 1, 0)
    rep.details = {"xi_fd_check": r.xi_fd.to_dict()}
    return rep


def cmd_reduce_result4(args) -> Report:
    from .affine_algebra import H
    from .field_grid import Grid
    from .lax_connection import Connection, Pencil
    from .lie_core import build_sl_chevalley
    from .toda_systems import ShapeError, random_result4_pencil, result4_reduce, result4_shape_check

    rep = Report("reduce result4", _echo(args))
    g = Grid.square(0.75, _resolution(args.n))
    rng = np.random.default_rng(args.seed)
    worst: dict[str, float] = {}
    last = None
    for _ in range(args.count):
        last = random_result4_pencil(rng, g)
        for k, v in result4_reduce(last.pencil).residuals.items():
            worst[k] = max(worst.get(k, 0.0), v.max_abs)
    holo = 10 * g.h**2
    for k, v in worst.items():
        tol = holo if "holomorphic" in k else args.tol
        rep.add(k, v, tol)
    p = last.pencil
    bz = p.B.az
    diag = Pencil(p.A, Connection(g, lambda x, y: bz(x, y) + 0.5 * np.asarray(H, complex), p.B.azbar),
                  orientation="z")
    verdict = result4_shape_check(diag, build_sl_chevalley(2))
    try:
        result4_reduce(diag)
        rejected = False
    except ShapeError:
        rejected = True
    rep.add("shape_rejects_diagonal", 0 if (rejected and not verdict.ok) else 1, 0)
    return rep


def cmd_uniton_generate(args) -> Report:
    from .field_grid import Grid, GridField, residual
    from .harmonic_maps import (
        diagonalized_commutator,
        harmonic_map_evaluator,
        harmonic_map_from_projector,
        harmonic_residual,
        liouville_density,
        liouville_residual,
        uniton_harmonic_residual,
        uniton_projector,
    )

    rep = Report("uniton generate", _echo(args))
    f = _poly(args.f)
    if not f.is_holomorphic():
        raise UsageError("f must be holomorphic")
    from .harmonic_maps import default_grid

    g = default_grid(f, args.signature, _resolution(args.n))
    p = uniton_projector(f, args.signature, g)
    for k, v in p.invariants().items():
        rep.add(k, v, 1e-10)
    h = harmonic_map_from_projector(p)
    rep.add("harmonic", uniton_harmonic_residual(p), args.tol)
    hfd = harmonic_residual(h)
    if args.signature == "su2":
        rep.add("harmonic_fd", hfd, 10 * g.h**2)
    rep.add("liouville", residual(liouville_residual(f, args.signature, g)), args.tol)
    dens = liouville_density(f, args.signature, g)
    dc = diagonalized_commutator(f, args.signature, g)
    diff = np.abs(np.abs(dc.values[..., 0, 0]) - dens.density.values.real)
    # absolute for moderate densities, relative once they grow near the disk edge
    scale = max(1.0, float(np.abs(dens.density.values[~g.mask]).max()))
    rep.add("density_equality", residual(GridField(g, diff)), 1e-9 * scale)
    out = _out_dir(args)
    _dump_field(rep, out, "uniton_p", GridField(g, p.p), args.format)
    _dump_field(rep, out, "uniton_h", h, args.format)
    _dump_field(rep, out, "uniton_density", dens.density, args.format)
    iy, ix = g.index_of((0.0, 0.0))
    rep.details = {"density_at_origin": float(dens.density.values[iy, ix].real),
                   "harmonic_fd": hfd.max_abs,
                   "density_scale": scale,
                   "origin": [float(g.x[ix]), float(g.y[iy])]}
    return rep


def cmd_sdcs_verify(args) -> Report:
    import jax.numpy as jnp

    from .field_grid import su2_grid
    from .harmonic_maps import sdcs_gauge_check, sdcs_residual, uniton_sdcs

    rep = Report("sdcs verify", _echo(args))
    f = _poly(args.f)
    g = su2_grid(_resolution(args.n))
    d = uniton_sdcs(f, args.kappa, g)
    for k, v in sdcs_residual(d).items():
        rep.add(k, v, args.tol)
    gc = sdcs_gauge_check(d)
    rep.add("chi_equation", gc.chi_equation, args.tol)
    rep.add("identity", gc.identity, 1e-8)
    pert = lambda x, y: 0.05 * jnp.stack([jnp.stack([x * y, x + 0j * y], -1),
                                          jnp.stack([y * y + 0j, -x * y], -1)], -2)
    dp = uniton_sdcs(f, args.kappa, g, perturb=pert)
    gp = sdcs_gauge_check(dp, use_frame=True)
    rep.add("identity_off_shell", gp.identity, 1e-8)
    rep.details = {"off_shell_field_strength": gp.field_strength.to_dict(), "plaquette_defect": gc.plaquette_defect}
    return rep


def cmd_wzw_decompose(args) -> Report:
    from .wzw_local import gauss_compose, gauss_decompose, random_regular_unimodular

    rep = Report("wzw decompose", _echo(args))
    if args.matrix:
        vals = [_cplx(t) for t in args.matrix.split(",")]
        if len(vals) != 4:
            raise UsageError("--matrix needs four entries a,b,c,d")
        m = np.array(vals, dtype=complex).reshape(2, 2)
        f = gauss_decompose(m, args.signature)
        rep.add("round_trip", np.abs(gauss_compose(f) - m).max(), 1e-12)
        rep.details = {"x": complex(f.x), "y": complex(f.y), "phi": complex(f.phi)}
    else:
        m = random_regular_unimodular(np.random.default_rng(args.seed), args.count, args.signature)
        f = gauss_decompose(m, args.signature)
        rep.add("round_trip", np.abs(gauss_compose(f) - m).max(), 1e-12)
        rep.details = {"real_coordinates": f.is_real(1e-9)}
    return rep


def cmd_wzw_orc(args) -> Report:
    from .field_grid import Grid, PolyField
    from .wzw_local import bc_frame_check, kink_liouville_phi, munu_constants, orc_coefficient, orc_reduction

    rep = Report("wzw orc", _echo(args))
    g = Grid.square(1.0, _resolution(args.n))
    nu, mu = munu_constants(args.theta)
    r = orc_reduction(PolyField.constant(nu), PolyField.constant(mu),
                      kink_liouville_phi(args.k, args.theta, args.eps), g)
    rep.add("liouville", r.liouville, max(args.tol, 2 * args.eps))
    bound = 2 * r.liouville.max_abs + 10 * g.h**2
    for k, v in r.eom.items():
        rep.add(f"eom_{k}", v, bound)
    rng = np.random.default_rng(args.seed)
    fp = PolyField.holomorphic(rng.normal(size=3) + 1j * rng.normal(size=3))
    gp = PolyField.holomorphic(rng.normal(size=3) + 1j * rng.normal(size=3))
    M = g.evaluate(orc_coefficient(fp, gp))
    rep.add("M_imaginary", np.abs(M.real).max(), 1e-12)
    bc = bc_frame_check(r.fields, g)
    rep.add("bc_off_diagonal", bc.off_diagonal, 1e-6)
    rep.add("bc_diagonal_formula", bc.diagonal_formula, 1e-8)
    rep.details = {"closure_defect": r.closure_defect, "variant": r.variant}
    return rep


def cmd_prop1_normalform(args) -> Report:
    from .field_grid import Grid
    from .harmonic_maps import gauged_uniton_pencil
    from .lax_connection import uhlenbeck_form

    rep = Report("prop1 normalform", _echo(args))
    f = _poly(args.f)
    n = _resolution(args.n)
    defects = []
    last = None
    for m in (n, 2 * n - 1):
        g = Grid.square(args.half_width, m)
        p, _, _ = gauged_uniton_pencil(f, g)
        _, last = uhlenbeck_form(p)
        defects.append(last.plaquette_defect)
    ratio = defects[0] / defects[1] if defects[1] > 0 else math.inf
    rep.add("plaquette_shrink_shortfall", max(0.0, 8.0 - ratio), 0)
    for lam, v in last.match.items():
        rep.add(f"match_{complex(lam)}", v, 1e-6)
    rep.add("harmonic", last.harmonic, 1e-5)
    rep.details = {"plaquette_defects": defects, "shrink_ratio": ratio}
    return rep


def cmd_report_bundle(args) -> Report:
    """Deterministic summary over small instances of every subsystem."""
    rep = Report("report bundle", _echo(args))
    p = build_parser()
    runs = [
        ["algebra", "verify", "--n", "3"],
        ["affine", "verify", "--samples", "60"],
        ["toda", "residual", "--n", "24"],
        ["toda", "connection", "--n", "24"],
        ["cat", "verify", "--n", "24"],
        ["cat", "limit", "--which", "liouville", "--n", "24"],
        ["reduce", "result4", "--count", "3", "--n", "24"],
        ["uniton", "generate", "--f", "0,1", "--n", "24", "--format", "json"],
        ["wzw", "decompose", "--count", "100"],
        ["wzw", "orc", "--n", "97"],
    ]
    sub = {}
    for argv in runs:
        a = p.parse_args(argv + ["--seed", str(args.seed)] + (["--out", str(_out_dir(args))]))
        r = a.func(a)
        key = " ".join(argv[:2])
        sub[key] = {"residuals": r.residuals, "pass": r.ok}
        for name, v in r.residuals.items():
            rep.residuals[f"{key}/{name}"] = v
    rep.details = {"runs": sorted(sub)}
    return rep


# ---------------------------------------------------------------------------
# parser


def _common(sp, n=64, tol=1e-6):
    sp.add_argument("--n", type=int, default=n, help="grid resolution per axis")
    sp.add_argument("--tol", type=float, default=tol)
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--out", default=None, help=f"output directory (default ${ENV_OUT} or ./todamaps_out)")
    sp.add_argument("--format", choices=("json", "csv", "both"), default="json")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="todamaps", description=__doc__.splitlines()[0])
    top = p.add_subparsers(dest="group", required=True)

    def group(name):
        return top.add_parser(name).add_subparsers(dest="action", required=True)

    s = group("algebra").add_parser("verify")
    _common(s)
    s.set_defaults(func=cmd_algebra_verify)

    s = group("affine").add_parser("verify")
    _common(s, tol=1e-12)
    s.add_argument("--samples", type=int, default=500)
    s.set_defaults(func=cmd_affine_verify)

    t = group("toda")
    s = t.add_parser("residual")
    _common(s, n=96, tol=1e-8)
    s.add_argument("--phi-from-f", default="0,1")
    s.add_argument("--alpha", default="i")
    s.add_argument("--beta", default="1")
    s.set_defaults(func=cmd_toda_residual)
    s = t.add_parser("connection")
    _common(s, n=96, tol=1e-8)
    s.add_argument("--rank", type=int, default=3)
    s.set_defaults(func=cmd_toda_connection)

    c = group("cat")
    s = c.add_parser("verify")
    _common(s)
    s.add_argument("--F", default="2,0.8,0.1")
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--half-width", type=float, default=0.75)
    s.set_defaults(func=cmd_cat_verify)
    s = c.add_parser("limit")
    _common(s)
    s.add_argument("--which", choices=("sinh", "liouville"), required=True)
    s.add_argument("--eta", type=float, default=-20.0)
    s.add_argument("--theta", type=float, default=0.3)
    s.set_defaults(func=cmd_cat_limit)

    r = group("reduce")
    s = r.add_parser("theorem2")
    _common(s)
    s.set_defaults(func=cmd_reduce_theorem2)
    s = r.add_parser("result4")
    _common(s, tol=1e-5)
    s.add_argument("--count", type=int, default=50)
    s.set_defaults(func=cmd_reduce_result4)

    s = group("uniton").add_parser("generate")
    _common(s, n=96, tol=1e-8)
    s.add_argument("--f", required=True)
    s.add_argument("--signature", choices=("su2", "su11"), default="su2")
    s.set_defaults(func=cmd_uniton_generate)

    s = group("sdcs").add_parser("verify")
    _common(s, n=48)
    s.add_argument("--f", default="0,1")
    s.add_argument("--kappa", type=float, default=2.0)
    s.set_defaults(func=cmd_sdcs_verify)

    w = group("wzw")
    s = w.add_parser("decompose")
    _common(s)
    s.add_argument("--signature", choices=("sl2r", "su11"), default="sl2r")
    s.add_argument("--matrix", default=None, help="a,b,c,d")
    s.add_argument("--count", type=int, default=1000)
    s.set_defaults(func=cmd_wzw_decompose)
    s = w.add_parser("orc")
    _common(s, n=97, tol=1e-8)
    s.add_argument("--theta", type=float, default=0.4)
    s.add_argument("--k", type=float, default=1.3)
    s.add_argument("--eps", type=float, default=0.0)
    s.set_defaults(func=cmd_wzw_orc)

    s = group("prop1").add_parser("normalform")
    _common(s, n=33)
    s.add_argument("--f", default="0.1,1,0.3")
    s.add_argument("--half-width", type=float, default=0.6)
    s.set_defaults(func=cmd_prop1_normalform)

    s = group("report").add_parser("bundle")
    _common(s)
    s.set_defaults(func=cmd_report_bundle)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        for name in ("tol",):
            _positive(getattr(args, name))
        rep = args.func(args)
    except (UsageError, ValueError, ArithmeticError) as e:
        print(f"todamaps: error: {e}", file=sys.stderr)
        return 2
    out = _out_dir(args)
    name = f"{args.group}_{args.action}.json"
    (out / name).write_text(dumps(rep.as_dict()))
    status = "pass" if rep.ok else "FAIL"
    print(f"{rep.command}: {status} ({out / name})")
    for k, v in rep.residuals.items():
        if not v["pass"]:
            print(f"  {k}: max_abs={v['max_abs']:.3e} > tol={v['tolerance']:.1e}")
    return 0 if rep.ok else 1


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
