"""Batch front door: parse a run config, dispatch, emit JSON/CSV artifacts.

Every output file carries the tool version and a hash of the parsed config,
and reruns of the same config are byte-identical (fixed seeds, deterministic
reductions, no timestamps).  Exit codes: 0 success, 1 input error, 2 a
property audit failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, capacity, estimates
from . import examples as _examples
from . import manifold as _manifold
from . import mesh as _mesh
from . import radial as _radial
from .classify import classify as _classify
from .classify import nondegenerate_boundary_test as _boundary_test
from .errors import WarpcapError

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_AUDIT = 2


def _config_hash(ns):
    # the output directory is where results land, not part of the run config
    doc = {k: v for k, v in sorted(vars(ns).items())
           if k not in ("func", "out")}
    blob = json.dumps(doc, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return float(x)
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _write_json(path, ns, payload):
    doc = {"tool": "warpcap", "version": __version__,
           "config_hash": _config_hash(ns)}
    doc.update(_jsonable(payload))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_csv(path, ns, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# warpcap {__version__} config={_config_hash(ns)}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{x:.17g}" if isinstance(x, float) else str(x)
                              for x in row) + "\n")


def _resolve_manifold(ns):
    if getattr(ns, "manifold", None):
        with open(ns.manifold) as fh:
            return _manifold.manifold_from_json(json.load(fh))
    if getattr(ns, "example", None):
        params = {}
        for key in ("n", "alpha", "lam"):
            val = getattr(ns, key, None)
            if val is not None:
                params[key] = val
        spec = _examples._parse_id(ns.example)
        merged = dict(spec.params)
        merged.update(params)
        return _examples.build(_examples.ExampleSpec(spec.id, merged))
    raise WarpcapError("provide --example or --manifold")


def _out(ns):
    return Path(ns.out)


# --------------------------------------------------------------------------
# subcommands


def _cmd_capacity(ns):
    m = _resolve_manifold(ns)
    r_b = math.inf if ns.rb in (None, "inf") else float(ns.rb)
    results = []
    rows = []
    for t in ns.t:
        if t == 0.0:
            res = capacity.CapacityResult(0.0, 0.0, ns.ra, r_b, "shooting", 0.0)
        else:
            res = capacity.minimal_capacity(m, ns.ra, r_b, t, rel_tol=ns.tol,
                                            cross_check=ns.discrete_check,
                                            check_grid=ns.grid)
        results.append(res)
        rows.append((ns.ra, r_b, t, res.value, res.method, res.interior_area,
                     res.trace_inner, res.trace_outer))
    classical = capacity.classical_capacity(m, ns.ra, r_b, rel_tol=ns.tol)
    rows.append((ns.ra, r_b, float("nan"), classical.value, "closed_form",
                 classical.interior_area, 0.0, 0.0))
    _write_csv(_out(ns) / "capacity.csv", ns,
               ["r_a", "r_b", "t", "cap", "method", "interior",
                "trace_inner", "trace_outer"], rows)
    _write_json(_out(ns) / "capacity.json", ns,
                {"classical": classical.to_json(),
                 "graph_area": [r.to_json() for r in results]})
    for t, res in zip(ns.t, results):
        print(f"cap_{t:g} = {res.value:.10g}  "
              f"(interior {res.interior_area:.4g}, traces "
              f"{res.trace_inner:.4g}/{res.trace_outer:.4g})")
    print(f"cap (classical) = {classical.value:.10g}")
    return EXIT_OK


def _cmd_classify(ns):
    m = _resolve_manifold(ns)
    cls = _classify(m, r0=ns.r0, inner_r=ns.ra, t=ns.t[0])
    bnd = _boundary_test(m, ns.r0)
    _write_json(_out(ns) / "classification.json", ns,
                {"classification": cls.to_json(),
                 "boundary_at_infinity": bnd.to_json()})
    print(f"parabolicity: {cls.parabolicity}")
    print(f"M-parabolicity: {cls.m_parabolicity}")
    print(f"boundary at infinity: {bnd.verdict}")
    return EXIT_OK


def _cmd_profile(ns):
    m = _resolve_manifold(ns)
    prof = _radial.shoot_for_drop(m, ns.ra, float(ns.rb), ns.t[0],
                                  rel_tol=ns.tol)
    path = _out(ns) / "profile.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    prof.to_csv(path, m)
    _write_json(_out(ns) / "profile.json", ns,
                {"flux_q": prof.flux_q, "jump_inner": prof.jump_inner,
                 "jump_outer": prof.jump_outer,
                 "interior_drop": prof.interior_drop})
    print(f"flux q = {prof.flux_q:.12g}, jumps = "
          f"({prof.jump_inner:.6g}, {prof.jump_outer:.6g})")
    return EXIT_OK


def _cmd_mesh_capacity(ns):
    mesh = _mesh.load_mesh(ns.mesh, ns.tags)
    sol = _mesh.solve(mesh, ns.t[0], "relaxed" if ns.relaxed else "dirichlet")
    total, per_edge = _mesh.boundary_flux(sol, mesh)
    rows = [(i, mesh.vertices[i, 0], mesh.vertices[i, 1], float(sol.u[i]))
            for i in range(len(mesh.vertices))]
    _write_csv(_out(ns) / "mesh_solution.csv", ns, ["vertex", "x", "y", "u"],
               rows)
    _write_json(_out(ns) / "mesh_capacity.json", ns,
                {"J": sol.J, "mode": sol.mode, "t": sol.t,
                 "flux_total": total,
                 "flux_window": [sol.J / sol.t, 2.0 * sol.J / sol.t],
                 "iterations": sol.diagnostics["iterations"]})
    print(f"J = {sol.J:.10g}, flux = {total:.10g} "
          f"(window [{sol.J / sol.t:.6g}, {2 * sol.J / sol.t:.6g}])")
    return EXIT_OK


def _cmd_asymptotics(ns):
    m = _resolve_manifold(ns)
    R_list = [float(x) for x in ns.R.split(",")]
    audit = estimates.asymptotic_audit(m, ns.ra, ns.t[0], R_list)
    rows = list(zip(audit.radii, audit.u_values, audit.phi_values,
                    audit.ratios))
    _write_csv(_out(ns) / "asymptotics.csv", ns, ["R", "u", "phi", "ratio"],
               rows)
    _write_json(_out(ns) / "asymptotics.json", ns, audit.to_json())
    print(f"Theta* = {audit.theta_star:.6g}, stable = {audit.stable}")
    return EXIT_OK if audit.stable else EXIT_AUDIT


def _demo_field(kind, dim, n):
    xs = np.linspace(0.0, 1.0, n)
    if dim == 1:
        if kind == "step":
            return np.where(xs < 0.5, 0.0, 1.0)
        return np.exp(-((xs - 0.5) / 0.12) ** 2)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    if kind == "step":
        return np.where(X + Y < 1.0, 0.0, 1.0)
    return np.exp(-(((X - 0.5) ** 2 + (Y - 0.5) ** 2) / 0.12 ** 2))


def _cmd_mollify(ns):
    field = _demo_field(ns.demo, ns.dim, ns.grid)
    spacing = 1.0 / (ns.grid - 1)
    rows = []
    for lam in ns.lam:
        res = estimates.mollify(field, spacing, lam)
        rows.append((lam, res.ratio_gradient, res.ratio_energy))
        print(f"lam={lam:g}: gradient ratio {res.ratio_gradient:.6g}, "
              f"energy ratio {res.ratio_energy:.6g}")
    _write_csv(_out(ns) / "mollify.csv", ns,
               ["lam", "ratio_gradient", "ratio_energy"], rows)
    _write_json(_out(ns) / "mollify.json", ns,
                {"demo": ns.demo, "dim": ns.dim,
                 "rows": [{"lam": a, "ratio_gradient": b, "ratio_energy": c}
                          for a, b, c in rows]})
    return EXIT_OK


def _cmd_audit_scaling(ns):
    reports = []
    ok = True
    if ns.random:
        rng = np.random.default_rng(ns.seed)
        for _ in range(ns.random):
            m = _examples.random_smooth_manifold(rng, n=int(rng.integers(2, 4)))
            r_a = float(rng.uniform(0.5, 1.5))
            r_b = r_a + float(rng.uniform(3.0, 8.0))
            cap1 = capacity.minimal_capacity(m, r_a, r_b, 0.05)
            scale = 0.05 / max(cap1.diagnostics["flux_q"], 1e-6)
            t = 0.05
            T = min(5.0 * t, 0.5 * scale)
            rep = capacity.scaling_audit(m, r_a, r_b, t, max(T, t))
            reports.append(rep.to_json())
            ok &= rep.passed
    else:
        m = _resolve_manifold(ns)
        rep = capacity.scaling_audit(m, ns.ra, float(ns.rb), ns.t[0], ns.T)
        reports.append(rep.to_json())
        ok = rep.passed
    _write_json(_out(ns) / "audit_scaling.json", ns,
                {"passed": ok, "reports": reports})
    for rep in reports:
        for name, chk in rep["checks"].items():
            print(f"{name}: lhs={chk['lhs']:.8g} rhs={chk['rhs']:.8g} "
                  f"{'ok' if chk['ok'] else 'VIOLATED'}")
    print("scaling audit:", "pass" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_AUDIT


def _cmd_audit_flux(ns):
    m = _resolve_manifold(ns)
    prof = _radial.shoot_for_drop(m, ns.ra, float(ns.rb), ns.t[0])
    rep = estimates.flux_from_profile(m, prof)
    t = rep.t
    lam_checks = estimates.slice_identity_check(
        m, prof, [t / 4.0, t / 2.0, t]) if prof.flux_q > 0 else []
    slice_ok = all(abs(a - b) <= 1e-8 * max(1.0, abs(a))
                   for _, a, b in lam_checks)
    ok = rep.window_ok and slice_ok
    _write_json(_out(ns) / "audit_flux.json", ns,
                {"flux": rep.to_json(),
                 "slice_identity": [{"lam": l, "lhs": a, "rhs": b}
                                    for l, a, b in lam_checks],
                 "passed": ok})
    print(f"mu = {rep.mu_norm:.10g} in [{rep.lower:.10g}, {rep.upper:.10g}]"
          f" -> {'ok' if rep.window_ok else 'VIOLATED'}")
    print("flux audit:", "pass" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_AUDIT


def _cmd_audit_sandwich(ns):
    m = _resolve_manifold(ns)
    r_list = [float(x) for x in ns.r_list.split(",")]
    rep = estimates.capacity_sandwich_audit(m, r_list, ns.t[0])
    _write_json(_out(ns) / "audit_sandwich.json", ns, rep.to_json())
    print(f"vartheta* = {rep.vartheta_star:.6g}, beta* = {rep.beta_star:.6g},"
          f" quadratic upper bound: {'ok' if rep.upper_ok else 'VIOLATED'}")
    return EXIT_OK if rep.upper_ok else EXIT_AUDIT


def _cmd_reproduce(ns):
    ex = ns.example_id
    out = _out(ns)
    if ex == "staircase":
        rep = capacity.staircase_reproduction(ns.i, ns.k)
        _write_json(out / "reproduce_staircase.json", ns, rep.to_json())
        print(f"E_k(alpha_k) = {rep.E_k} (exact target 2)")
        print(f"alpha* = {rep.alpha_star!r}, I = {rep.I_at_alpha_star!r}")
        print(f"cap_3 = {rep.cap_steps:.8g} <= bound {rep.cap_bound:.8g}; "
              f"u(s_k) = {rep.u_at_s_k:.6g} (interior ok: {rep.interior_ok})")
        return EXIT_OK if rep.passed else EXIT_AUDIT
    if ex.startswith("prop2_6"):
        n = ns.n or 2
        m = _examples.build(_examples.ExampleSpec("prop2_6", {"n": n}))
        cls = _classify(m, r0=math.pi)
        certs = {f"f^-{n}": _manifold.improper_integral(m, -float(n), math.pi),
                 f"f^-{n + 1}": _manifold.improper_integral(m, -float(n + 1),
                                                            math.pi)}
        _write_json(out / "reproduce_prop2_6.json", ns,
                    {"n": n, "classification": cls.to_json(),
                     "certificates": {k: v.to_json() for k, v in certs.items()}})
        print(f"prop2_6(n={n}): {cls.parabolicity}, {cls.m_parabolicity}")
        ok = (cls.parabolicity == "nonparabolic"
              and cls.m_parabolicity == "m_parabolic"
              and all(c.verdict == "convergent" for c in certs.values()))
        return EXIT_OK if ok else EXIT_AUDIT
    if ex.startswith("exp_warp"):
        lam = ns.lam or 1.0
        r_a, r_b = 0.5, 2.5
        formula = _radial.oscillation_sup(lam, r_a, r_b, 50.0)
        bound = math.pi / (2.0 * lam)
        _write_json(out / "reproduce_exp_warp.json", ns,
                    {"lam": lam, "osc_sup": formula, "bound": bound})
        print(f"oscillation sup = {formula:.10g} <= pi/(2 lam) = {bound:.10g}")
        return EXIT_OK if formula <= bound + 1e-9 else EXIT_AUDIT
    # generic example: classification + a default condenser capacity
    m = _examples.build(ex)
    cls = _classify(m)
    cap = capacity.minimal_capacity(m, 1.0, 8.0, 0.1)
    _write_json(out / f"reproduce_{ex}.json", ns,
                {"classification": cls.to_json(), "cap": cap.to_json()})
    print(f"{ex}: {cls.parabolicity}, {cls.m_parabolicity}; "
          f"cap_0.1(B1, B8) = {cap.value:.8g}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _add_manifold_args(p):
    p.add_argument("--example", help="builtin example id (e.g. flat2, prop2_6)")
    p.add_argument("--manifold", help="path to a manifold JSON spec")
    p.add_argument("--n", type=int, help="dimension for parametric examples")
    p.add_argument("--alpha", type=float, help="power-warp exponent")
    p.add_argument("--lam", type=float, help="exponential-warp rate")


def _add_common(p):
    p.add_argument("--ra", type=float, default=1.0)
    p.add_argument("--rb", default="10")
    p.add_argument("--t", type=lambda s: [float(x) for x in s.split(",")],
                   default=[0.1], help="height(s), comma separated")
    p.add_argument("--grid", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", default="warpcap_out")


def build_parser():
    ap = argparse.ArgumentParser(prog="warpcap",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version",
                    version=f"warpcap {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="radial classical and graph-area caps")
    _add_manifold_args(p)
    _add_common(p)
    p.add_argument("--discrete-check", action="store_true")
    p.set_defaults(func=_cmd_capacity)

    p = sub.add_parser("classify", help="parabolic / M-parabolic verdicts")
    _add_manifold_args(p)
    _add_common(p)
    p.add_argument("--r0", type=float, default=1.0)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("profile", help="solve and export a radial profile")
    _add_manifold_args(p)
    _add_common(p)
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser("mesh-capacity", help="triangulated-domain capacity")
    p.add_argument("--mesh", required=True, help="OFF mesh file")
    p.add_argument("--tags", required=True, help="JSON boundary tag file")
    p.add_argument("--relaxed", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_mesh_capacity)

    p = sub.add_parser("asymptotics", help="decay-ratio audit")
    _add_manifold_args(p)
    _add_common(p)
    p.add_argument("--R", default="2,4,8,16,32", help="comma list of radii")
    p.set_defaults(func=_cmd_asymptotics)

    p = sub.add_parser("mollify", help="grid mollifier ratio sweep")
    p.add_argument("--demo", choices=["step", "bump"], default="bump")
    p.add_argument("--dim", type=int, choices=[1, 2], default=1)
    p.add_argument("--grid", type=int, default=801)
    p.add_argument("--lam", type=lambda s: [float(x) for x in s.split(",")],
                   default=[0.1, 0.2, 0.5])
    p.add_argument("--out", default="warpcap_out")
    p.set_defaults(func=_cmd_mollify)

    p = sub.add_parser("audit", help="property sweeps")
    asub = p.add_subparsers(dest="audit_kind", required=True)
    pa = asub.add_parser("scaling")
    _add_manifold_args(pa)
    _add_common(pa)
    pa.add_argument("--T", type=float, default=0.5)
    pa.add_argument("--random", type=int, default=0,
                    help="sweep N random smooth warps instead")
    pa.add_argument("--seed", type=int, default=20260810)
    pa.set_defaults(func=_cmd_audit_scaling)
    pa = asub.add_parser("flux")
    _add_manifold_args(pa)
    _add_common(pa)
    pa.set_defaults(func=_cmd_audit_flux)
    pa = asub.add_parser("sandwich")
    _add_manifold_args(pa)
    _add_common(pa)
    pa.add_argument("--r-list", default="1,2,4")
    pa.set_defaults(func=_cmd_audit_sandwich)

    p = sub.add_parser("reproduce", help="one-liner paper reproductions")
    p.add_argument("example_id")
    p.add_argument("--i", type=int, default=3)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--n", type=int)
    p.add_argument("--lam", type=float)
    p.add_argument("--out", default="warpcap_out")
    p.set_defaults(func=_cmd_reproduce)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
        return ns.func(ns)
    except WarpcapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
