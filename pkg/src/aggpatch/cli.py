"""Command line entry point: ``aggpatch {run,asymptotics,oracle-check,probe}``.

Exit codes: 0 when every enabled check passes, 1 on an invariant or
acceptance failure, 2 on bad input.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import asymptotics as A
from . import cauchyops, oracle
from .evolve import InvariantError, run
from .graphstate import interpolate
from .scenario import (Scenario, ScenarioError, build_initial, load_shipped, scenario_from_dict,
                       shipped_scenarios)
from .velocity import u1_at, u2_at

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serializable: {type(o)}")


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _load_scenario(args) -> Scenario:
    src = args.scenario
    if src is None:
        raise ScenarioError(["--scenario is required"])
    if os.path.exists(src):
        with open(src) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ScenarioError([f"{src}: malformed JSON at line {exc.lineno}: {exc.msg}"])
    elif src in shipped_scenarios():
        d = load_shipped(src, check_cfl=False).to_dict()
    else:
        raise ScenarioError([f"{src}: no such file or shipped scenario "
                             f"(shipped: {', '.join(shipped_scenarios())})"])
    d = dict(d)
    solver = dict(d.get("solver") or {})
    for key, val in (("t_end", args.t_end), ("dt", args.dt), ("mode", args.mode), ("eps", args.eps)):
        if val is not None:
            solver[key] = val
    d["solver"] = solver
    if args.seed is not None:
        d["seed"] = args.seed
    return scenario_from_dict(d)


def _outdir(args, sc: Scenario | None = None) -> str:
    out = args.out or (sc.outputs.get("directory") if sc else None) or "out"
    os.makedirs(out, exist_ok=True)
    return out


def _check(name, passed, **detail):
    return {"name": name, "passed": bool(passed), **detail}


def _finish(out, checks, enforce: bool) -> int:
    fails = [c for c in checks if not c["passed"]]
    _dump(os.path.join(out, "checks.json"), {"checks": checks, "failures": [c["name"] for c in fails]})
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}")
    return EXIT_FAIL if (fails and enforce) else EXIT_OK


def _run_record(sc, out):
    try:
        rec = run(sc)
    except InvariantError as exc:
        fail = {"failures": [{"name": exc.name, "detail": str(exc)}]}
        if exc.snapshot is not None:
            fail["snapshot"] = exc.snapshot.to_dict()
        _dump(os.path.join(out, "failure.json"), fail)
        print(f"FAIL {exc.name}: {exc}")
        return None
    _write(os.path.join(out, "monitors.csv"), rec.monitors_csv())
    _dump(os.path.join(out, "invariants.json"), rec.invariant_report())
    snapdir = os.path.join(out, "snapshots")
    os.makedirs(snapdir, exist_ok=True)
    for i in range(len(rec.snapshots)):
        _write(os.path.join(snapdir, f"state_{i:04d}.json"), rec.snapshot_json(i))
    return rec


def cmd_run(args) -> int:
    sc = _load_scenario(args)
    out = _outdir(args, sc)
    rec = _run_record(sc, out)
    if rec is None:
        return EXIT_FAIL
    checks = [_check(r["name"], r["passed"], max_violation=r["max_violation"],
                     time_of_max=r["time_of_max"]) for r in rec.invariant_report()]
    return _finish(out, checks, True)


def cmd_asymptotics(args) -> int:
    sc = _load_scenario(args)
    out = _outdir(args, sc)
    rec = _run_record(sc, out)
    if rec is None:
        return EXIT_FAIL
    g0, comps = build_initial(sc)
    prof = A.scattering_profile(rec)
    checks = [_check(r["name"], r["passed"]) for r in rec.invariant_report()]
    try:
        K = A.limit_support(prof, comps)
        merged = False
    except ValueError:
        K = prof.K_inf
        merged = True
    prof.K_inf = K
    fc = A.flow_convergence(rec)
    rates = dict(prof.rates)
    rates["flow_increment"] = fc["rate"]
    try:
        rates["hausdorff"] = A.hausdorff_decay(rec, K)
    except ValueError:
        rates["hausdorff"] = None
    g = A.reconstruct_g(prof, g0)
    prof.rates = rates
    _write(os.path.join(out, "limit_profile.json"), prof.to_json())
    wk = A.weak_convergence_test(rec, prof)
    _dump(os.path.join(out, "weak_convergence.json"), wk)
    mass_err = abs(prof.mass() / (2 * np.trapezoid(g0.values, g0.x)) - 1) if np.any(g0.values) else 0.0
    report = {"K_inf": K, "components": len(K), "mass_rel_err": mass_err, "rates": rates,
              "cauchy_gap": prof.cauchy_gap, "J_min": fc["J_min"], "J_max": fc["J_max"],
              "g_two_path_gap": g["max_gap"]}
    _dump(os.path.join(out, "asymptotics.json"), report)
    checks += [
        _check("limit_mass", mass_err < 1e-3, value=mass_err),
        _check("profile_cauchy", prof.converging),
        _check("component_count", len(K) == len(comps) and not merged, value=len(K)),
        _check("component_length", all(b - a >= 0.5 * (d - c) for (a, b), (c, d) in zip(K, comps))),
        _check("flow_rate", not np.isfinite(fc["rate"]) or fc["rate"] <= -0.4, value=fc["rate"]),
        _check("jacobian_band", 0.5 <= fc["J_min"] and fc["J_max"] <= 1.5),
    ]
    return _finish(out, checks, args.check)


def _bump_oracle(sc, seed):
    g, comps = build_initial(sc)
    rng = np.random.default_rng(seed)
    rows = []
    pts = []
    for a, b in comps:
        w = b - a
        pts.append(rng.uniform(a + 0.02 * w, b - 0.02 * w, 20 // len(comps) + 1))
    xs = np.sort(np.concatenate(pts))[:20]
    for x in xs:
        y = interpolate(g, x)
        v1, v2 = oracle.biot_savart_patch(g, (x, y))
        rows.append((x, "u1", u1_at(g, x), v1))
        rows.append((x, "u2", u2_at(g, x), v2))
    return rows


def _ellipse_oracle(sc, seed):
    a, b = sc.initial["a"], sc.initial["b"]
    e = oracle.EllipseState(a, b)
    rng = np.random.default_rng(seed)
    rows = []
    while len(rows) < 40:
        p = rng.uniform(-1, 1, 2) * (a, b)
        if (p[0] / a) ** 2 + (p[1] / b) ** 2 >= 0.9:
            continue
        lin = oracle.ellipse_interior_field(e, p)
        num = oracle.biot_savart_profile(e.profile, -a, a, p)
        rows.append((p[0], f"v1@y={p[1]:.6f}", lin[0], num[0]))
        rows.append((p[0], f"v2@y={p[1]:.6f}", lin[1], num[1]))
    return rows


def _ellipse_ode_checks(sc):
    a0, b0 = sc.initial["a"], sc.initial["b"]
    states = oracle.ellipse_evolve(oracle.EllipseState(a0, b0), 10.0, 1e-3)
    drift = max(abs((s.a - s.b) - (a0 - b0)) for s in states)
    area = max(abs(s.a * s.b / (a0 * b0 * np.exp(-s.time)) - 1) for s in states)
    checks = [_check("axes_difference_conserved", drift <= 1e-10, value=drift),
              _check("area_law", area <= 1e-8, value=area)]
    if a0 > b0:
        s6 = min(states, key=lambda s: abs(s.time - 6.0))
        xs = np.linspace(-s6.a, s6.a, 4001)
        gap = float(np.max(np.abs(oracle.ellipse_marginal(s6, xs) - oracle.semicircle_density(a0 - b0, xs))))
        checks.append(_check("semicircle_marginal_tau6", gap < 2e-2, value=gap))
    return checks


def cmd_oracle_check(args) -> int:
    sc = _load_scenario(args)
    out = _outdir(args, sc)
    seed = sc.seed
    if sc.initial["kind"] == "ellipse":
        rows = _ellipse_oracle(sc, seed)
        checks = _ellipse_ode_checks(sc)
        name = "interior_field_vs_oracle"
    else:
        rows = _bump_oracle(sc, seed)
        checks = []
        name = "velocity_vs_oracle"
    _write(os.path.join(out, "oracle_comparison.csv"), oracle.comparison_csv(rows))
    err = max(abs(m - o) for _, _, m, o in rows)
    print(f"max abs error {err:.3e}")
    checks.insert(0, _check(name, err < 1e-4, value=err))
    _dump(os.path.join(out, "oracle_report.json"), {"max_abs_error": err, "points": len(rows) // 2})
    return _finish(out, checks, args.check)


def cmd_probe(args) -> int:
    out = _outdir(args)
    seed = 0 if args.seed is None else args.seed
    reps = cauchyops.probe_bounds(args.samples, seed=seed)
    sweep = cauchyops.beta_sweep(args.samples, seed=seed)
    _dump(os.path.join(out, "probe_reports.json"),
          {"reports": [json.loads(r.to_json()) for r in reps], "beta_sweep": sweep})
    raw = sweep["raw"]
    inv = [1.0 / b for b in sweep["betas"]]
    mono = all(r1 >= r0 for r0, r1 in zip(raw, raw[1:]))
    sub = all(r1 / raw[0] < i1 / inv[0] for r1, i1 in zip(raw[1:], inv[1:])) if raw[0] > 0 else True
    checks = [_check(f"probe_{r.operator}", r.passed, max_ratio=r.max_ratio,
                     refinement=[r.refinement_factor_min, r.refinement_factor_max]) for r in reps]
    checks.append(_check("beta_sweep_shape", mono and sub, raw=raw))
    return _finish(out, checks, args.check)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aggpatch", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    cmds = {"run": cmd_run, "asymptotics": cmd_asymptotics,
            "oracle-check": cmd_oracle_check, "probe": cmd_probe}
    for name, fn in cmds.items():
        s = sub.add_parser(name)
        s.set_defaults(func=fn)
        s.add_argument("--scenario", help="scenario JSON file or shipped scenario name")
        s.add_argument("--out", help="output directory")
        s.add_argument("--t-end", type=float, dest="t_end")
        s.add_argument("--dt", type=float)
        s.add_argument("--mode", choices=("plain", "rescaled"))
        s.add_argument("--eps", type=float)
        s.add_argument("--seed", type=int)
        s.add_argument("--check", action="store_true", help="acceptance mode: failed checks exit 1")
        if name == "probe":
            s.add_argument("--samples", type=int, default=50)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(json.dumps({"input_errors": exc.errors}, indent=1), file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(json.dumps({"input_errors": [str(exc)]}), file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
