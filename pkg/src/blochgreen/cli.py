"""Command-line interface: ``blochgreen <verb> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bloch, floquet, green, profiles, resolvent, runner
from .config import load_config
from .errors import BlochGreenError


def _profile(args):
    if getattr(args, "profile", None):
        return profiles.load_profile(args.profile)
    name = args.fixture
    if name == "heat":
        return profiles.heat_profile()
    if name == "advection-diffusion":
        return profiles.advection_diffusion_profile(args.drift)
    return profiles.manufactured_fixture()


def _add_profile_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--profile", help="profile file")
    g.add_argument("--fixture", default="advection-diffusion",
                   choices=["heat", "advection-diffusion", "manufactured"])
    p.add_argument("--drift", type=float, default=1.0, help="drift of the advection-diffusion fixture")


def _print_json(obj, out=None):
    text = runner.to_json(obj) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_profile(args):
    if args.action == "make":
        prof = _profile(args)
        profiles.save_profile(prof, args.out)
        print(f"wrote {args.out} (n={prof.n}, a={prof.a:g}, Nx={prof.grid_size})")
    else:
        prof = profiles.load_profile(args.file)
        info = {"n": prof.n, "a": prof.a, "grid_size": prof.grid_size, "source": prof.source,
                "constant": prof.is_constant}
        if prof.derivative_samples is not None:
            info["manufactured_residual"] = profiles.manufactured_residual(prof)
        _print_json(info)
    return 0


def cmd_evans(args):
    prof = _profile(args)
    if args.radius is not None:
        contour = floquet.circle_contour(complex(args.lam), args.radius, args.nodes)
        w = floquet.winding_number(prof, args.xi, contour, args.tol)
        print(f"winding number {w}")
    elif args.root:
        r = floquet.evans_root(prof, args.xi, complex(args.lam), args.tol)
        print(f"root {r.real:.17g} {r.imag:+.17g}i")
    else:
        d = floquet.evans(prof, complex(args.lam), args.xi, args.tol)
        print(f"D = {d.real:.17g} {d.imag:+.17g}i")
    return 0


def cmd_spectrum(args):
    prof = _profile(args)
    if args.stability:
        rep = bloch.check_diffusive_stability(prof, args.K)
        out = rep.as_dict()
        if rep.D1:
            out["branch"] = bloch.critical_branch(prof, args.K).summary()
        _print_json(out)
        return 0 if rep.D1 and rep.D2 else 1
    vals = bloch.spectrum(prof, args.xi, args.K).values[: args.count]
    for v in vals:
        print(f"{v.real:.17g} {v.imag:+.17g}i")
    return 0


def cmd_resolvent(args):
    prof = _profile(args)
    sys_ = floquet.FloquetSystem(prof, args.xi, complex(args.lam))
    x = (np.arange(args.points) + 0.5) / args.points
    if args.kind == "whole":
        kf = resolvent.whole_line_kernel(sys_, x, x, args.tol)
    else:
        kf = resolvent.periodic_kernel(sys_, x, x, args.tol)
    G = kf.scalar()
    rows = [[x[i], x[j], G[i, j].real, G[i, j].imag] for i in range(len(x)) for j in range(len(x))]
    if args.out:
        runner.write_csv(args.out, ["x", "y", "G_re", "G_im"], rows)
    else:
        for r in rows:
            print(",".join("%.17g" % v for v in r))
    return 0


def cmd_green(args):
    prof = _profile(args)
    y = np.array([args.y])
    if args.route == "direct":
        gf = green.green_direct(prof, [args.t], y, cells=args.cells, dt=args.dt)[0]
    else:
        x = np.linspace(args.xmin, args.xmax, args.nx)
        if args.route == "bloch":
            gf = green.green_bloch(prof, args.t, x, y, n_xi=args.cells)
        else:
            gf = green.green_laplace(prof, args.t, x, y)
    rows = [[xv, gv] for xv, gv in zip(gf.x, gf.scalar()[:, 0])]
    if args.out:
        runner.write_csv(args.out, ["x", "G"], rows)
    else:
        for r in rows:
            print("%.17g,%.17g" % tuple(r))
    return 0


def cmd_simulate(args):
    from .nonlinear import heat, modulation
    if args.model == "heat-q":
        kind = {1: "weighted", 2: "gaussian", 3: "algebraic"}[args.data_class]
        x = np.linspace(-200, 200, 4001)
        init = heat.make_initial_data(kind, args.E0, x, M=args.M, r=args.r)
        rep = heat.decay_report_heat(init, args.q, args.T, t_fit=(10.0, args.T))
        out = rep.as_dict()
        checks = []
        if kind == "gaussian":
            checks.append({"name": "pointwise_ratio",
                           **heat.pointwise_ratio_check(rep, init, 4 * args.M).__dict__})
        if kind == "algebraic":
            checks.append({"name": "envelope_constant",
                           "constants": heat.envelope_constants(
                               rep, args.r, 4 * args.M, ((5.0, args.T / 10), (args.T / 10, args.T)))})
        out["envelope_checks"] = checks
        _print_json(out, args.out)
        return 0
    prof = _profile(args)
    br = bloch.critical_branch(prof)
    res = modulation.modulation_pipeline(prof, br, lambda x: modulation.gaussian_data(x, args.E0),
                                         T=args.T, cells=args.cells)
    _print_json(res.as_dict(), args.out)
    return 0 if res.converged else 1


def cmd_report(args):
    out = Path(args.dir)
    manifest = json.loads((out / "manifest.json").read_text())
    bad = [f["name"] for f in manifest["files"] if runner.sha256(out / f["name"]) != f["sha256"]]
    listed = {f["name"] for f in manifest["files"]} | {"manifest.json"}
    extra = sorted(p.name for p in out.iterdir() if p.name not in listed)
    summary = json.loads((out / "summary.json").read_text())
    for name, res in summary["tasks"].items():
        print(f"{name:14s} {'PASS' if res.get('pass', True) else 'FAIL'}")
    if bad or extra:
        print(f"manifest mismatch: changed={bad} unlisted={extra}")
        return 2
    return 0 if summary.get("all_pass") else 1


def cmd_run(args):
    cfg = load_config(args.config, output=args.output)
    status, summary = runner.run(cfg)
    for name, res in summary["tasks"].items():
        print(f"{name:14s} {'PASS' if res.get('pass', True) else 'FAIL'}")
    print(f"outputs in {cfg.output}")
    return status


def build_parser():
    ap = argparse.ArgumentParser(prog="blochgreen",
                                 description="Bloch-wave Green functions of periodic waves")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("profile", help="create or inspect a profile file")
    p.add_argument("action", choices=["make", "show"])
    p.add_argument("file", nargs="?")
    p.add_argument("--out")
    _add_profile_args(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("evans", help="periodic Evans function, roots and winding numbers")
    _add_profile_args(p)
    p.add_argument("--lam", default="0", help="lambda (or contour centre / root guess), e.g. 1-2j")
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--root", action="store_true", help="find a zero near --lam")
    p.add_argument("--radius", type=float, help="winding number around a circle of this radius")
    p.add_argument("--nodes", type=int, default=32)
    p.set_defaults(func=cmd_evans)

    p = sub.add_parser("spectrum", help="Galerkin Bloch spectrum and stability checks")
    _add_profile_args(p)
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--K", type=int, default=16)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--stability", action="store_true")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("resolvent", help="resolvent kernel on a cell grid")
    _add_profile_args(p)
    p.add_argument("--lam", default="1")
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--kind", choices=["whole", "periodic"], default="whole")
    p.add_argument("--points", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_resolvent)

    p = sub.add_parser("green", help="time-domain Green function G(x, t; y)")
    _add_profile_args(p)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--y", type=float, default=0.0)
    p.add_argument("--route", choices=["bloch", "direct", "laplace"], default="bloch")
    p.add_argument("--xmin", type=float, default=-8.0)
    p.add_argument("--xmax", type=float, default=8.0)
    p.add_argument("--nx", type=int, default=161)
    p.add_argument("--cells", type=int, default=64)
    p.add_argument("--dt", type=float, default=0.005)
    p.add_argument("--out")
    p.set_defaults(func=cmd_green)

    p = sub.add_parser("simulate", help="nonlinear simulations")
    p.add_argument("model", choices=["heat-q", "modulation"])
    p.add_argument("--q", type=int, default=4)
    p.add_argument("--class", dest="data_class", type=int, choices=[1, 2, 3], default=1)
    p.add_argument("--E0", type=float, default=0.01)
    p.add_argument("--T", type=float, default=500.0)
    p.add_argument("--M", type=float, default=2.0)
    p.add_argument("--r", type=float, default=3.0)
    p.add_argument("--cells", type=int, default=256)
    p.add_argument("--out")
    _add_profile_args(p)
    p.set_defaults(func=cmd_simulate, fixture="manufactured")

    p = sub.add_parser("report", help="verify a run directory and print its checks")
    p.add_argument("dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--output", help="override the output directory")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BlochGreenError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
