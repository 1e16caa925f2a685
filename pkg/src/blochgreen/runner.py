"""Experiment orchestration: run the tasks of a config and persist the results.

Outputs go to an exclusive directory: one CSV per task, ``summary.json``
with every metric and pass/fail flag, and ``manifest.json`` listing each
file with its sha256. Floats are written with 17 significant digits, so
reruns with the same config are byte-identical. If a task fails, every
file written so far is removed and :class:`RunError` names the module,
operation and parameters.
"""

from __future__ import annotations

import hashlib
import math
import shutil
from pathlib import Path

import numpy as np

from . import bloch, exact, floquet, green, profiles, resolvent
from .errors import BlochGreenError
from .nonlinear import heat, inequalities, modulation


class RunError(BlochGreenError):
    def __init__(self, module, operation, params, cause):
        super().__init__(f"{module}.{operation} failed with {params}: "
                         f"{type(cause).__name__}: {cause}")
        self.module = module
        self.operation = operation
        self.params = params
        self.cause = cause


# serialization


def fmt_float(v):
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return "%.17g" % v


def to_json(obj, indent=0):
    """JSON text with floats at 17 significant digits and sorted keys."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}"{k}": {to_json(obj[k], indent + 1)}' for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(to_json(v, indent + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    if isinstance(obj, complex):
        return to_json([obj.real, obj.imag], indent)
    return '"' + str(obj).replace("\\", "\\\\").replace('"', '\\"') + '"'


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt_float(float(v)).strip('"') for v in row) + "\n")


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# fixtures


def make_fixture(cfg):
    name = cfg.get("experiment", "fixture")
    grid_size = cfg.get("numerics", "grid")
    if name == "heat":
        return profiles.heat_profile(grid_size)
    if name == "advection-diffusion":
        return profiles.advection_diffusion_profile(cfg.get("experiment", "drift"), grid_size)
    if name == "manufactured":
        return profiles.manufactured_fixture(grid_size=grid_size)
    return profiles.load_profile(name[len("file:"):])


def _constant_scalar(profile):
    return profile.n == 1 and profile.is_constant and abs(profile.coeffs[0, 0, 0]) < 1e-14


# tasks: each returns (summary dict, {file name: (header, rows)})


def task_evans(profile, cfg):
    tol = cfg.get("numerics", "tol")
    K = cfg.get("numerics", "K")
    xis = np.linspace(-np.pi, np.pi, 16)
    rows, errs = [], []
    for xi in xis:
        if _constant_scalar(profile):
            ref = -1j * (-profile.a) * xi - xi ** 2
        else:
            ref = bloch.spectrum(profile, xi, K).values[0]
        root = floquet.evans_root(profile, xi, ref + 1e-2 * (1 + 1j), tol)
        errs.append(abs(root - ref))
        rows.append([xi, root.real, root.imag, ref.real, ref.imag, abs(root - ref)])
    vals = bloch.spectrum(profile, 0.3, K).values
    center = vals[0]
    w = floquet.winding_number(profile, 0.3, floquet.circle_contour(center, 0.5, 32), tol)
    count = int(np.sum(np.abs(vals - center) < 0.5))
    summary = {"max_root_error": max(errs), "winding": w, "galerkin_count": count,
               "pass": bool(max(errs) <= 1e-6 and w == count)}
    return summary, {"evans.csv": (["xi", "root_re", "root_im", "ref_re", "ref_im", "error"], rows)}


def task_resolvent(profile, cfg):
    tol = cfg.get("numerics", "tol")
    x = (np.arange(32) + 0.5) / 32
    cases = [(0.5 + 0.5j, 0.3), (4.0, -1.0), (10.0 - 3.0j, 2.5), (50.0, np.pi)]
    rows = []
    ok = True
    for lam, xi in cases:
        sys = floquet.FloquetSystem(profile, xi, lam)
        if _constant_scalar(profile):
            a = profile.a
            got_w = resolvent.whole_line_kernel(sys, x, x, tol).scalar()
            got_p = resolvent.periodic_kernel(sys, x, x, tol).scalar()
            ref_w = exact.whole_line_kernel(lam, xi, a, x[:, None], x[None, :])
            ref_p = exact.periodic_kernel(lam, xi, a, x[:, None], x[None, :])
            err = max(np.max(np.abs(got_w - ref_w) / np.abs(ref_w)),
                      np.max(np.abs(got_p - ref_p) / np.abs(ref_p)))
            good = err <= 1e-8
            rows.append([lam.real if isinstance(lam, complex) else lam,
                         lam.imag if isinstance(lam, complex) else 0.0, xi, err, float(good)])
        else:
            res = resolvent.method_of_images_check(sys, 10, x[::4], x[::4], tol)
            # below ~1e-14 the deviation is rounding, however small the tail bound
            good = res.deviation <= res.bound + 1e-14
            rows.append([complex(lam).real, complex(lam).imag, xi, res.deviation, float(good)])
        ok &= bool(good)
    measure = "max_relative_error" if _constant_scalar(profile) else "images_deviation"
    return ({"pass": ok, "measure": measure, "worst": max(r[3] for r in rows)},
            {"resolvent.csv": (["lam_re", "lam_im", "xi", measure, "pass"], rows)})


def task_spectrum(profile, cfg):
    K = cfg.get("numerics", "K")
    rep = bloch.check_diffusive_stability(profile, K)
    xis = np.linspace(-np.pi, np.pi, 65)
    rows = [[xi, *(lambda v: (v.real, v.imag))(bloch.spectrum(profile, xi, K).values[0])]
            for xi in xis]
    summary = {"stability": rep.as_dict(), "pass": bool(rep.D1 and rep.D2)}
    if rep.D1:
        summary["branch"] = bloch.critical_branch(profile, K).summary()
    return summary, {"spectrum.csv": (["xi", "top_re", "top_im"], rows)}


def task_green(profile, cfg):
    times = cfg.get("green", "times")
    cells = cfg.get("green", "cells")
    K = cfg.get("numerics", "K")
    dt = cfg.get("numerics", "dt")
    y = np.array([0.0, 0.25, 0.5])
    direct = green.green_direct(profile, times, y, cells=cells, dt=dt)
    rows = []
    ok = True
    for t, gd in zip(times, direct):
        gb = green.green_bloch(profile, t, gd.x, y, K=K, n_xi=cells)
        d = green.relative_l1(gb.scalar(), gd.scalar())
        rows.append([t, d])
        ok &= d <= 1e-3
    summary = {"pass": bool(ok), "max_relative_l1": max(r[1] for r in rows)}
    # leading-term residuals at the last time, reported only
    br = bloch.critical_branch(profile, K)
    t, gd = times[-1], direct[-1]
    xs = gd.x[::4]
    split = green.leading_split(green.green_bloch(profile, t, xs, y, K=K, n_xi=cells), br)
    summary["leading_split"] = {"t": t, "a": split.a, "b": split.b,
                                "sup_residual": split.sup_residual, "sup_G": split.sup_G}
    summary["G_y_readings"] = green.derivative_residuals(profile, br, t, xs, y, n_xi=cells, K=K)
    return summary, {"green.csv": (["t", "relative_l1"], rows)}


def task_heat(profile, cfg):
    kind = {1: "weighted", 2: "gaussian", 3: "algebraic"}[cfg.get("heat", "class")]
    E0, T = cfg.get("heat", "E0"), cfg.get("heat", "T")
    M, r = cfg.get("heat", "M"), cfg.get("heat", "r")
    x = np.linspace(-200, 200, 4001)
    init = heat.make_initial_data(kind, E0, x, M=M, r=r)
    rep = heat.decay_report_heat(init, cfg.get("heat", "q"), T, t_fit=(10.0, T))
    summary = rep.as_dict()
    summary.pop("times")
    summary.pop("norms")
    checks = []
    if kind == "gaussian":
        chk = heat.pointwise_ratio_check(rep, init, 4 * M, seed=cfg.seed)
        checks.append({"name": "pointwise_ratio", **chk.__dict__})
    if kind == "algebraic":
        cs = heat.envelope_constants(rep, r, 4 * M, windows=((5.0, T / 10), (T / 10, T)))
        mean = float(np.mean(cs))
        checks.append({"name": "envelope_constant", "constants": cs,
                       "passed": bool(all(abs(c - mean) <= 0.5 * mean for c in cs))})
    summary["envelope_checks"] = checks
    summary["pass"] = bool(rep.u_star_converged and all(c["passed"] for c in checks))
    rows = [[t] + [rep.norms[p][i] for p in rep.norms] + [rep.deviation[p][i] for p in rep.deviation]
            for i, t in enumerate(rep.times)]
    names = ["L1", "L2", "Linf"]
    header = ["t"] + [f"norm_{n}" for n in names] + [f"deviation_{n}" for n in names]
    return summary, {"heat.csv": (header, rows)}


def task_inequalities(profile, cfg):
    rep = inequalities.inequality_suite(cfg.get("inequalities", "samples"), cfg.seed)
    rows = [[i, c.C, c.max_validation_ratio, c.violations, float(c.passed)]
            for i, c in enumerate(rep.values())]
    summary = {name: c.as_dict() for name, c in rep.items()}
    summary["pass"] = bool(all(c.passed for c in rep.values()))
    return summary, {"inequalities.csv": (["lemma_index", "C", "max_validation_ratio",
                                           "violations", "pass"], rows)}


def task_modulation(profile, cfg):
    K = cfg.get("numerics", "K")
    br = bloch.critical_branch(profile, K)
    E0 = cfg.get("modulation", "E0")
    T = cfg.get("modulation", "T")
    res = modulation.modulation_pipeline(profile, br, lambda x: modulation.gaussian_data(x, E0),
                                         T=T, cells=cfg.get("modulation", "cells"))
    sv = res.sup_v()
    ts = res.state.grid.t
    summary = {k: v for k, v in res.as_dict().items() if k not in ("times", "sup_v",
                                                                  "deviation_from_leading")}
    summary["pass"] = bool(res.converged and (not res.ratios or res.max_ratio < 0.5))
    rows = [[t, sv[i], np.max(np.abs(res.state.psi[i])), res.diagnostics["deviation_from_leading"][i]]
            for i, t in enumerate(ts) if i % 10 == 0]
    return summary, {"modulation.csv": (["t", "sup_v", "sup_psi", "deviation_from_leading"], rows)}


TASK_FUNCS = {
    "evans": ("floquet", "evans", task_evans),
    "resolvent": ("resolvent", "kernels", task_resolvent),
    "spectrum": ("bloch", "check_diffusive_stability", task_spectrum),
    "green": ("green", "green_bloch/green_direct", task_green),
    "heat": ("nonlinear.heat", "decay_report_heat", task_heat),
    "inequalities": ("nonlinear.inequalities", "inequality_suite", task_inequalities),
    "modulation": ("nonlinear.modulation", "modulation_pipeline", task_modulation),
}


def run(cfg):
    """Run every task of ``cfg``; return (exit status, summary).

    Exit status is 0 when every check passes and 1 otherwise. Raises
    :class:`RunError` (after removing partial outputs) when a task fails.
    """
    out = Path(cfg.output)
    created = not out.exists()
    if not created and any(out.iterdir()):
        raise RunError("runner", "run", {"output": str(out)},
                       FileExistsError("output directory is not empty"))
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        try:
            profile = make_fixture(cfg)
        except Exception as exc:
            raise RunError("profiles", "load", {"fixture": cfg.get("experiment", "fixture")},
                           exc) from exc
        summary = {"config": cfg.as_dict(), "tasks": {}}
        for name in cfg.tasks:
            module, op, func = TASK_FUNCS[name]
            try:
                res, files = func(profile, cfg)
            except Exception as exc:
                params = {k: v for (s, k), v in cfg.values.items() if s in (name, "numerics")}
                raise RunError(module, op, params, exc) from exc
            summary["tasks"][name] = res
            for fname, (header, rows) in files.items():
                write_csv(out / fname, header, rows)
                written.append(out / fname)
        summary["all_pass"] = bool(all(t.get("pass", True) for t in summary["tasks"].values()))
        (out / "summary.json").write_text(to_json(summary) + "\n")
        written.append(out / "summary.json")
        manifest = {"files": [{"name": p.name, "sha256": sha256(p), "bytes": p.stat().st_size}
                              for p in sorted(written)]}
        (out / "manifest.json").write_text(to_json(manifest) + "\n")
    except BaseException:
        if created:
            shutil.rmtree(out, ignore_errors=True)
        else:
            for p in written + [out / "summary.json", out / "manifest.json"]:
                p.unlink(missing_ok=True)
        raise
    return (0 if summary["all_pass"] else 1), summary
