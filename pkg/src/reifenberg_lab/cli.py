"""Command-line entry point ``lab``.

Every command writes ``summary.json`` (sorted keys, no timestamps) and any
CSV tables into its output directory, plus ``run_info.json`` with the wall
clock data.  Exit codes: 0 pass, 2 scientific check failed, 1 operational
error (a JSON error record goes to stderr and ``error.json``).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import shlex
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import certifier as cf
from . import fdsolver as fd
from . import geometry as geo
from . import modulus as mod
from . import probes as pr
from .errors import LabError
from .pucci import Ellipticity, stencil

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


# --------------------------------------------------------------------------
# helpers


def parse_number(text):
    """Float from ``0.5``, ``2e-3``, ``1/64`` or ``2^-9``."""
    s = str(text).strip()
    if "^" in s:
        base, _, exp = s.partition("^")
        return float(base) ** float(exp)
    if "/" in s:
        num, _, den = s.partition("/")
        return float(num) / float(den)
    return float(s)


def parse_vector(text):
    parts = [parse_number(p) for p in str(text).split(",")]
    v = np.array(parts, dtype=float)
    return v / np.linalg.norm(v)


def parse_scales(text):
    """``2:7`` means ``2^-7 .. 2^-2``; otherwise a comma list of numbers."""
    s = str(text).strip()
    if ":" in s:
        lo, _, hi = s.partition(":")
        return pr.dyadic_scales(int(lo), int(hi))
    return sorted(parse_number(p) for p in s.split(","))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, data):
    Path(path).write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def output_dir(args, default_name):
    if getattr(args, "out", None):
        d = Path(args.out)
    else:
        d = Path(os.environ.get("LAB_OUTPUT_DIR", "lab_output")) / default_name
    d.mkdir(parents=True, exist_ok=True)
    return d


def _config(args):
    skip = {"func", "started"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def finish(args, outdir, name, summary, passed, verdict):
    summary = dict(summary)
    summary["scenario"] = name
    summary["config"] = _config(args)
    summary["passed"] = passed
    summary["verdict"] = verdict
    summary["version"] = __version__
    write_json(outdir / "summary.json", summary)
    write_json(
        outdir / "run_info.json",
        {
            "finished": datetime.now(timezone.utc).isoformat(),
            "elapsed_seconds": time.perf_counter() - args.started,
        },
    )
    print(f"{name}: {verdict}")
    return EXIT_PASS if passed else EXIT_FAIL


def _ellipticity(args):
    return Ellipticity(args.lam, args.Lam)


def _shape(args):
    r = parse_number(args.r) if args.r is not None else None
    if args.shape == "half_disc":
        return fd.HalfDisc(1.0 if r is None else r, parse_vector(args.normal), parse_number(args.shift))
    if args.shape == "half_cube":
        return fd.HalfCube(1.0 if r is None else r)
    if args.shape == "graph":
        return fd.GraphShape(geo.builtin_domain(args.domain), r)
    raise LabError(f"unknown shape {args.shape!r}")


# --------------------------------------------------------------------------
# commands


def cmd_dini(args):
    outdir = output_dir(args, "dini")
    m = mod.from_name(args.family if args.alpha is None else f"power:{args.alpha}")
    v = mod.dini_integral(m, parse_number(args.r0), args.tol)
    summary = {"modulus": m.to_dict(), "result": v.to_dict()}
    code = finish(args, outdir, "dini-check", summary, True, v.verdict)
    return EXIT_PASS if code == EXIT_PASS else code


def cmd_reifenberg(args):
    outdir = output_dir(args, "reifenberg")
    dom = geo.builtin_domain(args.domain)
    m = mod.from_name(args.modulus)
    cert = geo.check_reifenberg(dom, m, args.side, parse_number(args.eta), args.k_max, args.k_min)
    summary = {"certificate": cert.to_dict()}
    if cert.passed:
        summary["limit_normal"] = geo.limit_normal(cert).to_dict()
    write_json(outdir / "certificate.json", cert.to_dict())
    write_csv(
        outdir / "frames.csv",
        ["scale", "n_x", "n_y", "slack", "omega", "pass"],
        [(f.scale, f.normal[0], f.normal[1], f.slack, om, int(ok))
         for f, om, ok in zip(cert.frames, cert.omegas, cert.passes)],
    )
    verdict = f"{'PASS' if cert.passed else 'FAIL'} (fitted K = {cert.fitted_K:.6g})"
    return finish(args, outdir, "reifenberg-verify", summary, cert.passed, verdict)


def cmd_solve(args):
    outdir = output_dir(args, "solve")
    h = parse_number(args.h)
    dom = fd.build_domain(_shape(args), h, stencil(args.stencil_width))
    e = _ellipticity(args)
    g = fd.parse_bc(args.bc)
    tol = parse_number(args.tol) if args.tol is not None else None
    u, rep = fd.solve(dom, args.mode, e, f=parse_number(args.f), g=g, tol=tol, method=args.method)
    fd.save_solution(u, outdir / "solution.csv", outdir / "solution.json",
                     {"mode": args.mode, "ellipticity": e.to_dict(), "residual": rep.residual,
                      "bc": args.bc})
    summary = {"report": rep.to_dict(), "nodes": dom.node_count, "h": h}
    passed = True
    if args.bc in ("linear-y", "y") and parse_number(args.f) == 0:
        X, Y = dom.mesh()
        err = float(np.max(np.abs(u.values[dom.inside] - Y[dom.inside])))
        summary["max_error_vs_y"] = err
        passed = err <= 1e-6
    return finish(args, outdir, "solve", summary, passed,
                  f"converged in {rep.iterations} iterations, residual {rep.residual:.3e}")


def cmd_probe(args):
    outdir = output_dir(args, f"probe-{args.kind}")
    u = fd.load_solution(args.solution)
    name = f"probe-{args.kind}"
    if args.kind == "lipschitz":
        t = pr.lipschitz_probe(u, parse_scales(args.scales))
        q = np.array(t.quotients)
        ratio = float(q.max() / np.median(q)) if np.median(q) > 0 else math.inf
        write_csv(outdir / "lipschitz.csv", ["r", "q"], t.rows())
        passed = ratio <= args.max_ratio
        return finish(args, outdir, name, {"table": t.to_dict(), "max_over_median": ratio}, passed,
                      f"max q = {t.lipschitz:.6g}, max/median = {ratio:.4g}")
    if args.kind == "hopf":
        ts = np.geomspace(parse_number(args.t_min), parse_number(args.t_max), args.count).tolist()
        radius = parse_number(args.anchor_radius) if args.anchor_radius else None
        t = pr.hopf_probe(u, parse_vector(args.direction), ts, radius=radius)
        write_csv(outdir / "hopf.csv", ["t", "u_over_t"], list(zip(t.ts, t.ratios)))
        passed = t.c_min > 0
        return finish(args, outdir, name, {"table": t.to_dict()}, passed, f"c_min = {t.c_min:.6g}")
    if args.kind == "c1alpha":
        fit = pr.c1alpha_fit(u, parse_scales(args.scales))
        write_csv(outdir / "c1alpha.csv", ["r", "sup_residual"], list(zip(fit.scales, fit.residuals)))
        passed = fit.a > 0 and fit.alpha_hat > 0
        return finish(args, outdir, name, {"fit": fit.to_dict()}, passed,
                      f"a = {fit.a:.6g}, alpha_hat = {fit.alpha_hat:.4g}")
    if args.kind == "fmod":
        scales = parse_scales(args.scales)
        m = pr.f_modulus(u, scales)
        v = mod.dini_integral(m, scales[-1])
        write_csv(outdir / "fmod.csv", ["r", "omega_f"], [(r, m.eval(r)) for r in scales])
        return finish(args, outdir, name, {"modulus": m.to_dict(), "dini": v.to_dict()}, v.is_dini,
                      v.verdict)
    raise LabError(f"unknown probe {args.kind!r}")


def _inputs(args, K=None):
    return cf.ProofInputs(
        Ellipticity(args.lam, args.Lam), args.alpha, args.C1, args.C2, args.C3,
        parse_number(args.K) if K is None else K, mod.from_name(args.modulus),
    )


def _constants_summary(pc, inp, k_max):
    rows = cf.check_constants(pc)
    seq = cf.scale_sequence(inp.modulus, pc.eta, pc.alpha0, pc.c0, k_max)
    ok = all(r["ok"] for r in rows.values()) and seq.passed is not False and all(seq.recursion_bounds())
    return {"constants": pc.to_dict(), "check": rows, "scale_sequence": seq.to_dict(),
            "inputs": inp.to_dict()}, ok


def cmd_certify(args):
    name = f"certify-{args.kind}"
    outdir = output_dir(args, name)
    if args.kind in ("lipschitz", "hopf"):
        inp = _inputs(args)
        if args.kind == "lipschitz":
            pc = cf.select_constants_lipschitz(inp)
        else:
            pc = cf.select_constants_hopf(inp, parse_number(args.delta1), parse_number(args.c2))
        summary, ok = _constants_summary(pc, inp, args.k_max)
        write_json(outdir / "constants.json", pc.to_dict())
        write_csv(outdir / "constraints.csv", ["constraint", "lhs", "rhs", "slack", "ok"],
                  [(k, r["lhs"], r["rhs"], r["slack"], int(r["ok"])) for k, r in summary["check"].items()])
        return finish(args, outdir, name, summary, ok,
                      f"{'PASS' if ok else 'FAIL'} eta = {pc.eta:.6g}, c0 = {pc.c0:.6g}, Chat = {pc.Chat:.6g}")
    if args.kind == "induction":
        u = fd.load_solution(args.solution)
        cert = geo.ReifenbergCertificate.from_dict(json.loads(Path(args.cert).read_text()))
        pc = cf.ProofConstants.from_dict(json.loads(Path(args.constants).read_text()))
        eta = parse_number(args.eta) if args.eta else cert.eta
        seq = cf.scale_sequence(cert.modulus if not args.modulus else mod.from_name(args.modulus),
                                eta, pc.alpha0, pc.c0, args.k_max)
        steps = cf.verify_induction(u, cert, pc, seq, pc.kind, range(args.k_min, args.k_max + 1),
                                    M=parse_number(args.M) if args.M else None,
                                    with_aux_solves=args.with_aux_solves)
        write_csv(outdir / "induction.csv", ["k", "radius", "a_k", "lhs", "rhs", "slack", "ok", "note"],
                  [(s.k, s.radius, s.a_k, s.lhs, s.rhs, s.slack, s.ok, s.note) for s in steps])
        checked = [s for s in steps if s.ok is not None]
        ok = bool(checked) and all(s.ok for s in checked)
        return finish(args, outdir, name, {"steps": [s.to_dict() for s in steps]}, ok,
                      f"{sum(s.ok for s in checked)}/{len(checked)} scales satisfy the induction inequality")
    raise LabError(f"unknown certify kind {args.kind!r}")


def barrier_c1(h=1 / 64, e=Ellipticity()):
    """``min over B+_{1/4} of u / x_n`` for the half-cube barrier problem."""
    dom = fd.build_domain(fd.HalfCube(1.0), h, stencil(3))
    u, _ = fd.solve(dom, "inf", e, g=fd.parse_bc("barrier"))
    X, Y = dom.mesh()
    m = dom.inside & (np.hypot(X, Y) < 0.25)
    return float(np.min(u.values[m] / Y[m]))


def cmd_demo(args):
    outdir = output_dir(args, "demo-log-domain")
    h = parse_number(args.h)
    dom = geo.log_example()
    m = mod.inv_log_sq()
    summary, checks = {"h": h}, {}

    certs = {}
    for side in ("exterior", "interior"):
        certs[side] = geo.check_reifenberg(dom, m, side, 0.5, 11, k_min=1)
        checks[f"geometry_{side}"] = certs[side].passed
    cert = certs["exterior"]
    summary["geometry"] = {s: {"passed": c.passed, "fitted_K": c.fitted_K} for s, c in certs.items()}
    write_json(outdir / "certificate.json", cert.to_dict())

    grid = fd.build_domain(fd.GraphShape(dom), h, stencil(3))
    bc = fd.parse_bc("graph=0,arc=1")
    fields = {}
    fields["harmonic"], rep_h = fd.solve(grid, "laplace", Ellipticity(1.0, 1.0), g=bc)
    fields["pucci_inf"], rep_p = fd.solve(grid, "inf", _ellipticity(args), g=bc)
    summary["solves"] = {"nodes": grid.node_count, "harmonic": rep_h.to_dict(), "pucci_inf": rep_p.to_dict()}
    fd.save_solution(fields["harmonic"], outdir / "harmonic.csv", outdir / "harmonic.json",
                     {"mode": "laplace", "bc": "graph=0,arc=1"})

    k_hi = max(k for k in range(2, 8) if 2.0**-k >= 3 * h)
    scales = pr.dyadic_scales(2, k_hi)
    t_lo = max(2.0**-8, 3 * h)
    ts = np.geomspace(t_lo, 2.0**-3, 12).tolist()
    probes = {}
    for name, u in fields.items():
        lt = pr.lipschitz_probe(u, scales)
        q = np.array(lt.quotients)
        ratio = float(q.max() / np.median(q))
        hopf = {}
        for label, l in (("e2", (0.0, 1.0)), ("diag", (2**-0.5, 2**-0.5))):
            hp = pr.hopf_probe(u, l, ts, radius=dom.outer_radius)
            hopf[label] = hp.to_dict()
            checks[f"hopf_{name}_{label}"] = hp.c_min > 0
            write_csv(outdir / f"hopf_{name}_{label}.csv", ["t", "u_over_t"], list(zip(hp.ts, hp.ratios)))
        probes[name] = {"lipschitz": lt.to_dict(), "max_over_median": ratio, "hopf": hopf}
        checks[f"lipschitz_{name}_bounded"] = ratio <= 1.5
        write_csv(outdir / f"lipschitz_{name}.csv", ["r", "q"], lt.rows())
    summary["probes"] = probes

    c1 = barrier_c1(1 / 64, _ellipticity(args))
    inp = cf.ProofInputs(_ellipticity(args), K=max(cert.fitted_K, 1.0), modulus=m)
    pc_l = cf.select_constants_lipschitz(inp)
    pc_h = cf.select_constants_hopf(inp, 0.25, c1)
    cons = {}
    for pc in (pc_l, pc_h):
        s, ok = _constants_summary(pc, inp, 60)
        cons[pc.kind] = s
        checks[f"constants_{pc.kind}"] = ok
    summary["barrier_c1"] = c1
    summary["constants"] = cons

    induction = {}
    for pc, field_name in ((pc_l, "harmonic"), (pc_h, "pucci_inf")):
        seq = cf.scale_sequence(m, cert.eta, pc.alpha0, pc.c0, 12)
        steps = cf.verify_induction(fields[field_name], cert, pc, seq, pc.kind, range(2, 8))
        induction[pc.kind] = [s.to_dict() for s in steps]
        write_csv(outdir / f"induction_{pc.kind}.csv", ["k", "radius", "a_k", "lhs", "rhs", "slack", "ok", "note"],
                  [(s.k, s.radius, s.a_k, s.lhs, s.rhs, s.slack, s.ok, s.note) for s in steps])
    summary["induction"] = induction  # reported, not gating
    summary["checks"] = checks
    passed = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    verdict = "PASS" if passed else "FAIL: " + ", ".join(failed)
    return finish(args, outdir, "demo-log-domain", summary, passed, verdict)


SCENARIOS = {
    "dini-check": ["dini", "check"],
    "reifenberg-verify": ["reifenberg", "verify"],
    "solve": ["solve"],
    "probe-lipschitz": ["probe", "lipschitz"],
    "probe-hopf": ["probe", "hopf"],
    "probe-c1alpha": ["probe", "c1alpha"],
    "probe-fmod": ["probe", "fmod"],
    "certify-lipschitz": ["certify", "lipschitz"],
    "certify-hopf": ["certify", "hopf"],
    "certify-induction": ["certify", "induction"],
    "demo-log-domain": ["demo-log-domain"],
}


def config_argv(path):
    """Translate an INI scenario file into an argument vector.

    ``[scenario] name = solve`` picks the command; every key in ``[args]``
    becomes ``--key value`` (``true`` for a bare flag).
    """
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise LabError(f"cannot read config {path}")
    name = cp.get("scenario", "name")
    if name not in SCENARIOS:
        raise LabError(f"unknown scenario {name!r}")
    argv = list(SCENARIOS[name])
    if cp.has_section("args"):
        for key, value in cp.items("args"):
            flag = "--" + key.replace("_", "-")
            if value.lower() == "true":
                argv.append(flag)
            elif value.lower() != "false":
                argv += [flag, value]
    return argv


# --------------------------------------------------------------------------
# parser


def _add_ellipticity(p):
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--Lambda", dest="Lam", type=float, default=2.0)


def _add_proof_inputs(p):
    _add_ellipticity(p)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--C1", type=float, default=1.0)
    p.add_argument("--C2", type=float, default=1.0)
    p.add_argument("--C3", type=float, default=1.0)
    p.add_argument("--K", default="1")
    p.add_argument("--modulus", default="inv-log-sq")
    p.add_argument("--k-max", type=int, default=60)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default $LAB_OUTPUT_DIR/<scenario>)")

    p = argparse.ArgumentParser(prog="lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    dini = sub.add_parser("dini").add_subparsers(dest="action", required=True)
    q = dini.add_parser("check", parents=[common])
    q.add_argument("--family", default="inv-log-sq", help="power:<a>, inv-log-sq, inv-log, zero or a CSV path")
    q.add_argument("--alpha", type=float, default=None, help="shorthand for --family power:<alpha>")
    q.add_argument("--r0", default="0.5")
    q.add_argument("--tol", type=float, default=1e-8)
    q.set_defaults(func=cmd_dini)

    reif = sub.add_parser("reifenberg").add_subparsers(dest="action", required=True)
    q = reif.add_parser("verify", parents=[common])
    q.add_argument("--domain", default="log")
    q.add_argument("--modulus", default="inv-log-sq")
    q.add_argument("--side", default="exterior", choices=["exterior", "interior"])
    q.add_argument("--eta", default="0.5")
    q.add_argument("--k-min", type=int, default=1)
    q.add_argument("--k-max", type=int, default=11)
    q.set_defaults(func=cmd_reifenberg)

    q = sub.add_parser("solve", parents=[common])
    q.add_argument("--shape", default="half_disc", choices=["half_disc", "half_cube", "graph"])
    q.add_argument("--domain", default="log", help="graph domain name for --shape graph")
    q.add_argument("--r", default=None)
    q.add_argument("--normal", default="0,1")
    q.add_argument("--shift", default="0")
    q.add_argument("--mode", default="sup", choices=["sup", "inf", "laplace"])
    _add_ellipticity(q)
    q.add_argument("--bc", default="linear-y")
    q.add_argument("--f", default="0")
    q.add_argument("--h", default="1/64")
    q.add_argument("--tol", default=None)
    q.add_argument("--method", default="howard", choices=["howard", "gauss-seidel"])
    q.add_argument("--stencil-width", type=int, default=3)
    q.set_defaults(func=cmd_solve)

    probe = sub.add_parser("probe").add_subparsers(dest="kind", required=True)
    for kind in ("lipschitz", "hopf", "c1alpha", "fmod"):
        q = probe.add_parser(kind, parents=[common])
        q.add_argument("--solution", required=True, help="solution CSV written by 'lab solve'")
        if kind == "hopf":
            q.add_argument("--direction", default="0,1")
            q.add_argument("--t-min", default="2^-8")
            q.add_argument("--t-max", default="2^-3")
            q.add_argument("--count", type=int, default=12)
            q.add_argument("--anchor-radius", default=None)
        else:
            q.add_argument("--scales", default="2:5")
        if kind == "lipschitz":
            q.add_argument("--max-ratio", type=float, default=1.5)
        q.set_defaults(func=cmd_probe, kind=kind)

    cert = sub.add_parser("certify").add_subparsers(dest="kind", required=True)
    q = cert.add_parser("lipschitz", parents=[common])
    _add_proof_inputs(q)
    q.set_defaults(func=cmd_certify, kind="lipschitz")
    q = cert.add_parser("hopf", parents=[common])
    _add_proof_inputs(q)
    q.add_argument("--delta1", default="0.25")
    q.add_argument("--c2", default="0.1")
    q.set_defaults(func=cmd_certify, kind="hopf")
    q = cert.add_parser("induction", parents=[common])
    q.add_argument("--solution", required=True)
    q.add_argument("--cert", required=True, help="certificate JSON from 'lab reifenberg verify'")
    q.add_argument("--constants", required=True, help="constants JSON from 'lab certify lipschitz|hopf'")
    q.add_argument("--eta", default=None, help="scale ratio (default: the certificate's)")
    q.add_argument("--modulus", default=None)
    q.add_argument("--k-min", type=int, default=2)
    q.add_argument("--k-max", type=int, default=7)
    q.add_argument("--M", default=None)
    q.add_argument("--with-aux-solves", action="store_true")
    q.set_defaults(func=cmd_certify, kind="induction")

    q = sub.add_parser("demo-log-domain", parents=[common])
    q.add_argument("--h", default="2^-9")
    _add_ellipticity(q)
    q.set_defaults(func=cmd_demo)

    q = sub.add_parser("run", parents=[common])
    q.add_argument("--config", required=True)
    q.add_argument("overrides", nargs=argparse.REMAINDER, help="extra flags appended after the config")
    q.set_defaults(func=None)
    return p


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    outdir = None
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            inner = config_argv(args.config)
            extra = [a for a in args.overrides if a != "--"]
            if args.out:
                extra += ["--out", args.out]
            args = parser.parse_args(inner + extra)
        args.started = time.perf_counter()
        outdir = getattr(args, "out", None)
        return args.func(args)
    except (LabError, ValueError, OSError, KeyError, configparser.Error, ArithmeticError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "argv": argv}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        if outdir:
            Path(outdir).mkdir(parents=True, exist_ok=True)
            write_json(Path(outdir) / "error.json", err)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
