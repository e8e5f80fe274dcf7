"""Scenario files: initial data, grid, solver settings and output plan."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .graphstate import SampledGraph, support_components

__all__ = ["Scenario", "ScenarioError", "parse_scenario", "scenario_from_dict",
           "build_initial", "bump", "shipped_scenarios", "load_shipped"]

KINDS = ("bump_sum", "from_samples", "ellipse")
MODES = ("plain", "rescaled")

DEFAULTS = {
    "grid": {"n": 257, "margin": 0.0},
    "solver": {"dt": 0.01, "t_end": 3.0, "mode": None, "eps": None},
    "outputs": {"snapshot_cadence": 0.25, "directory": "out"},
    "seed": 0,
}


class ScenarioError(ValueError):
    """All validation problems of a scenario, reported together."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class Scenario:
    name: str
    initial: dict
    grid: dict = field(default_factory=lambda: dict(DEFAULTS["grid"]))
    solver: dict = field(default_factory=lambda: dict(DEFAULTS["solver"]))
    outputs: dict = field(default_factory=lambda: dict(DEFAULTS["outputs"]))
    seed: int = 0

    def to_dict(self) -> dict:
        return {"name": self.name, "initial": self.initial, "grid": self.grid,
                "solver": self.solver, "outputs": self.outputs, "seed": self.seed}


def bump(x, center, halfwidth, amplitude, exponent=3.0):
    """``amplitude * (1 - ((x - c)/w)^2)^p`` on ``|x - c| < w``, zero outside."""
    z = (np.asarray(x, dtype=float) - center) / halfwidth
    return amplitude * np.clip(1.0 - z * z, 0.0, None) ** exponent


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


def _validate(d: dict) -> list:
    errs = []
    if not isinstance(d.get("name"), str) or not d.get("name"):
        errs.append("name: missing or not a string")
    init = d.get("initial")
    if not isinstance(init, dict):
        errs.append("initial: missing object")
        init = {}
    kind = init.get("kind")
    if kind not in KINDS:
        errs.append(f"initial.kind: expected one of {KINDS}, got {kind!r}")
    if kind == "bump_sum":
        comps = init.get("components")
        if not isinstance(comps, list) or not comps:
            errs.append("initial.components: expected a nonempty list")
            comps = []
        spans = []
        for i, c in enumerate(comps):
            p = f"initial.components[{i}]"
            if not isinstance(c, dict):
                errs.append(f"{p}: expected an object")
                continue
            ok = True
            for key in ("center", "halfwidth", "amplitude"):
                if not _num(c.get(key)):
                    errs.append(f"{p}.{key}: missing or not a finite number")
                    ok = False
            exp = c.get("exponent", 3.0)
            if not _num(exp):
                errs.append(f"{p}.exponent: not a finite number")
            elif exp <= 1.0:
                errs.append(f"{p}.exponent: hypothesis 'C^1 initial data' violated "
                            f"(exponent {exp} <= 1)")
            if _num(c.get("amplitude")) and c["amplitude"] <= 0:
                errs.append(f"{p}.amplitude: hypothesis 'positive initial data' violated "
                            f"(amplitude {c['amplitude']} <= 0)")
            if _num(c.get("halfwidth")) and c["halfwidth"] <= 0:
                errs.append(f"{p}.halfwidth: hypothesis 'compact support of positive length' "
                            f"violated (halfwidth {c['halfwidth']} <= 0)")
                ok = False
            if ok:
                spans.append((c["center"] - c["halfwidth"], c["center"] + c["halfwidth"], i))
        spans.sort()
        for (a0, b0, i0), (a1, b1, i1) in zip(spans, spans[1:]):
            if a1 < b0:
                errs.append(f"initial.components[{i0}] and [{i1}]: hypothesis "
                            f"'disjoint support components' violated (overlap on [{a1}, {b0}])")
    elif kind == "from_samples":
        s = init.get("samples")
        if not isinstance(s, dict):
            errs.append("initial.samples: expected an object {x_lo, x_hi, values}")
        else:
            vals = s.get("values")
            if not isinstance(vals, list) or len(vals) < 5 or not all(_num(v) for v in vals):
                errs.append("initial.samples.values: expected >= 5 finite numbers")
            else:
                if min(vals) < 0:
                    errs.append("initial.samples.values: hypothesis 'positive initial data' violated")
                if vals[0] != 0 or vals[-1] != 0:
                    errs.append("initial.samples.values: hypothesis 'compact support inside the "
                                "grid' violated (boundary values must be 0)")
            if not (_num(s.get("x_lo")) and _num(s.get("x_hi")) and s["x_hi"] > s["x_lo"]):
                errs.append("initial.samples.x_lo/x_hi: expected finite numbers with x_hi > x_lo")
    elif kind == "ellipse":
        a, b = init.get("a"), init.get("b")
        if not (_num(a) and _num(b)) or not (a >= b > 0):
            errs.append("initial.a/b: expected semi-axes with a >= b > 0")

    grid = d.get("grid", {})
    n = grid.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 9:
        errs.append(f"grid.n: expected an integer >= 9, got {n!r}")
    if not _num(grid.get("margin")) or grid.get("margin") < 0:
        errs.append("grid.margin: expected a nonnegative number")

    sol = d.get("solver", {})
    dt, t_end = sol.get("dt"), sol.get("t_end")
    if not _num(dt) or dt <= 0:
        errs.append(f"solver.dt: expected a positive number, got {dt!r}")
    if not _num(t_end) or t_end <= 0:
        errs.append(f"solver.t_end: expected a positive number, got {t_end!r}")
    if _num(dt) and _num(t_end) and dt > 0 and t_end > 0:
        k = round(t_end / dt)
        if k < 1 or abs(k * dt - t_end) > 1e-9 * max(1.0, t_end):
            errs.append("solver.t_end: must be a positive multiple of solver.dt")
    if sol.get("mode") not in MODES:
        errs.append(f"solver.mode: expected one of {MODES}, got {sol.get('mode')!r}")
    eps = sol.get("eps")
    if eps is not None and (not _num(eps) or eps <= 0):
        errs.append(f"solver.eps: expected a positive number or null, got {eps!r}")

    out = d.get("outputs", {})
    if not _num(out.get("snapshot_cadence")) or out.get("snapshot_cadence") <= 0:
        errs.append("outputs.snapshot_cadence: expected a positive number")
    if not isinstance(out.get("directory"), str):
        errs.append("outputs.directory: expected a string")
    seed = d.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool):
        errs.append(f"seed: expected an integer, got {seed!r}")
    return errs


def _fill_defaults(d: dict) -> dict:
    d = copy.deepcopy(d)
    for key in ("grid", "solver", "outputs"):
        sub = d.get(key)
        if sub is None:
            sub = {}
        if isinstance(sub, dict):
            d[key] = {**DEFAULTS[key], **sub}
    d.setdefault("seed", DEFAULTS["seed"])
    sol = d.get("solver")
    if isinstance(sol, dict) and sol.get("mode") is None:
        t_end = sol.get("t_end")
        sol["mode"] = "rescaled" if _num(t_end) and t_end > 3 else "plain"
    init = d.get("initial")
    if isinstance(init, dict) and isinstance(init.get("components"), list):
        for c in init["components"]:
            if isinstance(c, dict):
                c.setdefault("exponent", 3.0)
    return d


def scenario_from_dict(d: dict, check_cfl: bool = True) -> Scenario:
    """Validate a scenario mapping; every problem is reported in one error."""
    if not isinstance(d, dict):
        raise ScenarioError(["top level: expected a JSON object"])
    d = _fill_defaults(d)
    errs = _validate(d)
    if errs:
        raise ScenarioError(errs)
    sc = Scenario(d["name"], d["initial"], d["grid"], d["solver"], d["outputs"], d["seed"])
    if check_cfl:
        from .evolve import dt_max
        g0, _ = build_initial(sc)
        dtm = dt_max(g0, eps=sc.solver.get("eps"))
        if sc.solver["dt"] > dtm:
            raise ScenarioError([f"solver.dt: CFL condition violated, dt={sc.solver['dt']} "
                                 f"> dt_max={dtm:.6g}"])
    return sc


def parse_scenario(path, check_cfl: bool = True) -> Scenario:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise ScenarioError([f"{path}: {exc.strerror}"]) from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}"]) from exc
    return scenario_from_dict(d, check_cfl)


def build_initial(sc: Scenario):
    """Initial graph on the hull grid and the list of support components."""
    init = sc.initial
    n = sc.grid["n"]
    margin = sc.grid.get("margin", 0.0)
    kind = init["kind"]
    if kind == "bump_sum":
        comps = sorted((c["center"] - c["halfwidth"], c["center"] + c["halfwidth"])
                       for c in init["components"])
        lo, hi = comps[0][0], comps[-1][1]
        pad = margin * (hi - lo)
        x = np.linspace(lo - pad, hi + pad, n)
        v = np.zeros(n)
        for c in init["components"]:
            v += bump(x, c["center"], c["halfwidth"], c["amplitude"], c["exponent"])
        return SampledGraph(lo - pad, hi + pad, v), [tuple(c) for c in comps]
    if kind == "ellipse":
        a, b = init["a"], init["b"]
        pad = margin * 2 * a
        x = np.linspace(-a - pad, a + pad, n)
        v = b * np.sqrt(np.clip(1.0 - (x / a) ** 2, 0.0, None))
        return SampledGraph(-a - pad, a + pad, v), [(-a, a)]
    s = init["samples"]
    g = SampledGraph(float(s["x_lo"]), float(s["x_hi"]), np.asarray(s["values"], dtype=float))
    if g.n != n:
        raise ScenarioError([f"grid.n={n} does not match {g.n} samples"])
    return g, support_components(g, 0.0)


def shipped_scenarios() -> list:
    root = resources.files("aggpatch") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_shipped(name: str, check_cfl: bool = True) -> Scenario:
    root = resources.files("aggpatch") / "scenarios"
    with resources.as_file(root / f"{name}.json") as p:
        return parse_scenario(p, check_cfl)
