"""Semi-Lagrangian time stepping of the graph equation and its flow map.

Each step is second order in time:

1. velocities at ``f^n``; a first-order predictor gives ``f^{n+1/2}``;
2. velocities at ``f^{n+1/2}``;
3. the arrival node ``x`` is traced back through the midpoint
   ``x_mid = x - dt/2 * u1(x_mid)`` to the departure point ``X``, and the
   vertical velocity is applied at ``x_mid``.

The vertical velocity is carried as ``u2 = f U`` with ``U = -(1 + R)``, so
nodes where the graph vanishes receive no source at all.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .graphstate import (SampledGraph, default_threshold, interpolate_many,
                         norm_report, slope, support_components, trapezoid)
from .velocity import velocity_arrays

__all__ = [
    "FlowMap",
    "TrajectoryRecord",
    "InvariantError",
    "CFLError",
    "VelocityPack",
    "velocity_pack",
    "dt_max",
    "step",
    "step_eps",
    "advance",
    "run",
    "run_graph",
    "flow_inverse",
]

log = logging.getLogger(__name__)

CFL = 0.5
U1_FLOOR = 1e-12
POS_TOL = 1e-12
CLAMP_TOL = 1e-8
SLOPE_BLOWUP = 10.0


class InvariantError(RuntimeError):
    """A monitored invariant failed; carries the last good state."""

    def __init__(self, name: str, message: str, snapshot=None, node=None):
        super().__init__(f"{name}: {message}")
        self.name = name
        self.snapshot = snapshot
        self.node = node


class CFLError(ValueError):
    def __init__(self, dt: float, dtmax: float):
        super().__init__(f"dt={dt:.6g} exceeds the CFL limit dt_max={dtmax:.6g}")
        self.dt = dt
        self.dt_max = dtmax


@dataclass(frozen=True)
class FlowMap:
    """Characteristic map sampled at tracker points.

    ``tracker_intR`` accumulates ``int_0^t R(s, psi(s, x0)) ds``, which gives
    the amplitude along each characteristic:
    ``f(t, psi) = f0(x0) exp(-t - tracker_intR)``.
    """

    tracker_x0: np.ndarray
    tracker_x: np.ndarray
    tracker_J: np.ndarray
    tracker_intR: np.ndarray
    time: float = 0.0

    @classmethod
    def identity(cls, x0, time: float = 0.0) -> "FlowMap":
        x0 = np.asarray(x0, dtype=float)
        return cls(x0.copy(), x0.copy(), np.ones_like(x0), np.zeros_like(x0), time)

    def to_dict(self) -> dict:
        return {"time": self.time, "x0": self.tracker_x0.tolist(), "x": self.tracker_x.tolist(),
                "J": self.tracker_J.tolist(), "intR": self.tracker_intR.tolist()}


def flow_inverse(flow: FlowMap, x: float) -> float:
    """``psi^{-1}(t, x)`` by monotone interpolation of the tracker pairs."""
    xs = flow.tracker_x
    if np.isnan(x) or x < xs[0] or x > xs[-1]:
        raise ValueError(f"x={x} outside the tracked range [{xs[0]}, {xs[-1]}]")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("tracker positions are not strictly increasing")
    return float(PchipInterpolator(xs, flow.tracker_x0)(x))


@dataclass
class VelocityPack:
    u1: np.ndarray
    u2: np.ndarray
    U: np.ndarray
    R: np.ndarray
    du1: np.ndarray


def velocity_pack(g: SampledGraph, eps: float | None = None) -> VelocityPack:
    u1, u2 = velocity_arrays(g, eps)
    f = g.values
    mask = f > default_threshold(g)
    U = np.zeros_like(f)
    U[mask] = u2[mask] / f[mask]
    R = np.where(mask, -U - 1.0, 0.0)
    du1 = slope(g.with_values(u1)).values
    return VelocityPack(u1, u2, U, R, du1)


def dt_max(g: SampledGraph, pack: VelocityPack | None = None, eps: float | None = None) -> float:
    if pack is None:
        pack = velocity_pack(g, eps)
    return CFL * g.h / max(float(np.max(np.abs(pack.u1))), U1_FLOOR)


@dataclass
class StepInfo:
    pre_clamp_min: float
    clamped_mass: float
    pack_next: VelocityPack | None = None


def _check_values(values, name, g=None):
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise InvariantError("finite", f"non-finite {name} at node {int(bad[0])}", g, int(bad[0]))


def advance(g: SampledGraph, flow: FlowMap, dt: float, mode: str = "plain",
            eps: float | None = None, pack: VelocityPack | None = None):
    """One step; returns ``(g_next, flow_next, info)``.

    ``pack`` may carry the velocities of ``g`` from the previous step.
    """
    if mode not in ("plain", "rescaled"):
        raise ValueError(f"unknown mode {mode!r}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if pack is None:
        pack = velocity_pack(g, eps)
    _check_values(pack.u1, "u1", g)
    _check_values(pack.u2, "u2", g)
    dtm = dt_max(g, pack)
    if dt > dtm * (1 + 1e-12):
        raise CFLError(dt, dtm)
    x = g.x

    # predictor for the half step
    Xh = x - 0.5 * dt * pack.u1
    fh = interpolate_many(g, Xh) * np.exp(0.5 * dt * pack.U)
    gh = g.with_values(fh, g.time + 0.5 * dt)
    ph = velocity_pack(gh, eps)
    _check_values(ph.u1, "u1", gh)

    # midpoint backtrace under the half-step velocity
    xm = x - 0.5 * dt * ph.u1
    for _ in range(4):
        xm = x - 0.5 * dt * np.interp(xm, x, ph.u1)
    X = 2.0 * xm - x
    fX = interpolate_many(g, X)
    Um = np.interp(xm, x, ph.U)
    if mode == "plain":
        u2m = interpolate_many(gh, xm) * Um
        new = fX + dt * u2m
    else:
        # exact exponential damping of e^t f
        new = fX * np.exp(dt * Um)
    _check_values(new, "graph value", g)
    pre_min = float(new.min())
    neg = new < 0.0
    clamped = float(-new[neg].sum() * g.h)
    new = np.where(neg, 0.0, new)
    g_next = g.with_values(new, g.time + dt)

    # trackers: explicit midpoint rule
    p = flow.tracker_x
    pm = p + 0.5 * dt * np.interp(p, x, pack.u1)
    p_next = p + dt * np.interp(pm, x, ph.u1)
    J_next = flow.tracker_J * np.exp(dt * np.interp(pm, x, ph.du1))
    intR = flow.tracker_intR + dt * np.interp(pm, x, ph.R)
    flow_next = FlowMap(flow.tracker_x0, p_next, J_next, intR, flow.time + dt)
    return g_next, flow_next, StepInfo(pre_min, clamped)


def step(g: SampledGraph, flow: FlowMap, dt: float, mode: str = "plain"):
    """Advance graph and flow by ``dt``; returns ``(g_next, flow_next)``."""
    g_next, flow_next, _ = advance(g, flow, dt, mode)
    return g_next, flow_next


def step_eps(g: SampledGraph, flow: FlowMap, dt: float, eps: float, mode: str = "plain"):
    """As :func:`step` with the ``|y| >= eps`` truncated velocities."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    g_next, flow_next, _ = advance(g, flow, dt, mode, eps=eps)
    return g_next, flow_next


# orchestration ---------------------------------------------------------------

MONITOR_KEYS = ("time", "mass_et", "linf", "slope_linf", "R_linf", "support_lo", "support_hi",
                "tracker_lo", "tracker_hi", "min_f_support", "v_linf", "J_min", "J_max")


@dataclass
class TrajectoryRecord:
    snapshots: list = field(default_factory=list)
    monitors: dict = field(default_factory=lambda: {k: [] for k in MONITOR_KEYS})
    invariants: dict = field(default_factory=dict)
    initial_components: list = field(default_factory=list)
    mode: str = "plain"
    eps: float | None = None
    clamped_mass_total: float = 0.0
    mass0: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return np.array([s[0] for s in self.snapshots])

    @property
    def graphs(self) -> list:
        return [s[1] for s in self.snapshots]

    @property
    def flows(self) -> list:
        return [s[3] for s in self.snapshots]

    @property
    def initial(self) -> SampledGraph:
        return self.snapshots[0][1]

    @property
    def final(self) -> SampledGraph:
        return self.snapshots[-1][1]

    def monitor(self, key) -> np.ndarray:
        return np.asarray(self.monitors[key], dtype=float)

    def monitors_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(MONITOR_KEYS)
        for row in zip(*(self.monitors[k] for k in MONITOR_KEYS)):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def invariant_report(self) -> list:
        return [{"name": k, "max_violation": v["max_violation"], "time_of_max": v["time_of_max"],
                 "tolerance": v["tolerance"], "passed": v["max_violation"] <= v["tolerance"]}
                for k, v in self.invariants.items()]

    def passed(self) -> bool:
        return all(r["passed"] for r in self.invariant_report())

    def snapshot_json(self, i: int) -> str:
        t, g, rep, fl = self.snapshots[i]
        return json.dumps({"state": g.to_dict(), "norms": rep.to_dict(), "flow": fl.to_dict()})


def _tracker_seeds(g: SampledGraph, components, n_uniform: int | None = None) -> np.ndarray:
    ends = [v for c in components for v in c]
    n_uniform = g.n if n_uniform is None else n_uniform
    seeds = np.concatenate((np.linspace(g.x_lo, g.x_hi, n_uniform), ends))
    return np.unique(np.clip(seeds, g.x_lo, g.x_hi))


INVARIANT_TOL = {
    "positivity": POS_TOL,
    "max_principle": 1e-12,
    "support_leakage": 0.0,
    "endpoint_monotone": 1e-12,
    "clamped_mass": CLAMP_TOL,
    "tracker_monotone": 0.0,
}
ABORTING = ("positivity", "max_principle", "support_leakage", "clamped_mass")


def run_graph(g0: SampledGraph, t_end: float, dt: float, mode: str = "plain",
              eps: float | None = None, cadence: float | None = None,
              components=None, s: float = 0.5, strict: bool = True) -> TrajectoryRecord:
    """Integrate from ``g0`` to ``t_end`` recording snapshots every ``cadence``.

    ``components`` are the initial support intervals (defaults to the
    detected ones); their endpoints are always tracked.  With ``strict`` an
    invariant breach raises :class:`InvariantError` carrying the last state.
    """
    if np.any(g0.values < 0):
        raise ValueError("initial graph must be nonnegative")
    if components is None:
        components = support_components(g0, 0.0)
    nsteps = int(round(t_end / dt))
    if nsteps < 1 or abs(nsteps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be a positive multiple of dt")
    cad = max(1, int(round((cadence if cadence else t_end) / dt)))
    rec = TrajectoryRecord(mode=mode, eps=eps, initial_components=[tuple(c) for c in components])
    rec.invariants = {k: {"max_violation": 0.0, "time_of_max": 0.0, "tolerance": tol}
                      for k, tol in INVARIANT_TOL.items()}
    base_support = g0.values > 0
    mass0 = trapezoid(g0)
    slope0 = float(np.max(np.abs(slope(g0).values)))
    end_idx = []
    flow = FlowMap.identity(_tracker_seeds(g0, components), g0.time)
    if components:
        xs = flow.tracker_x0
        end_idx = [(int(np.argmin(np.abs(xs - a))), int(np.argmin(np.abs(xs - b)))) for a, b in components]

    def note(name, value, t):
        slot = rec.invariants[name]
        if value > slot["max_violation"]:
            slot["max_violation"] = float(value)
            slot["time_of_max"] = float(t)
        if strict and name in ABORTING and value > slot["tolerance"]:
            raise InvariantError(name, f"violation {value:.3e} at t={t:.6g}", g)

    def record(g, fl, pack):
        t = g.time
        rep = norm_report(g, s)
        rec.snapshots.append((t, g, rep, fl))
        m = rec.monitors
        f = g.values
        m["time"].append(t)
        m["mass_et"].append(np.exp(t - g0.time) * trapezoid(g))
        m["linf"].append(rep.linf)
        m["slope_linf"].append(rep.slope_linf)
        m["R_linf"].append(float(np.max(np.abs(pack.R))))
        thr = default_threshold(g0)
        sup = support_components(g, thr)
        m["support_lo"].append(sup[0][0] if sup else np.nan)
        m["support_hi"].append(sup[-1][1] if sup else np.nan)
        if end_idx:
            m["tracker_lo"].append(float(fl.tracker_x[end_idx[0][0]]))
            m["tracker_hi"].append(float(fl.tracker_x[end_idx[-1][1]]))
        else:
            m["tracker_lo"].append(np.nan)
            m["tracker_hi"].append(np.nan)
        m["min_f_support"].append(float(f[base_support].min()) if base_support.any() else 0.0)
        m["v_linf"].append(float(np.max(np.hypot(pack.u1, pack.u2))))
        m["J_min"].append(float(fl.tracker_J.min()))
        m["J_max"].append(float(fl.tracker_J.max()))

    g = g0
    pack = velocity_pack(g, eps)
    record(g, flow, pack)
    for k in range(1, nsteps + 1):
        g_next, flow_next, info = advance(g, flow, dt, mode, eps, pack)
        t = g_next.time
        fmax = float(np.max(g.values))
        note("positivity", max(0.0, -info.pre_clamp_min), t)
        note("max_principle", max(0.0, float(np.max(g_next.values)) - fmax * (1 + 1e-12)), t)
        note("support_leakage", float(np.max(np.where(base_support, 0.0, g_next.values))), t)
        cur_mass = trapezoid(g)
        note("clamped_mass", info.clamped_mass / cur_mass if cur_mass > 0 else 0.0, t)
        rec.clamped_mass_total += info.clamped_mass
        if info.clamped_mass > 0:
            log.debug("clamped mass %.3e at t=%.6g", info.clamped_mass, t)
        drift = 0.0
        for (ia, ib) in end_idx:
            drift = max(drift, flow.tracker_x[ia] - flow_next.tracker_x[ia],
                        flow_next.tracker_x[ib] - flow.tracker_x[ib])
        note("endpoint_monotone", max(0.0, drift), t)
        gaps = np.diff(flow_next.tracker_x)
        note("tracker_monotone", max(0.0, float(-gaps.min())) if gaps.size else 0.0, t)
        if slope0 > 0 and float(np.max(np.abs(slope(g_next).values))) > SLOPE_BLOWUP * slope0:
            raise InvariantError("slope_blowup", f"slope exceeds {SLOPE_BLOWUP}x initial at t={t:.6g}", g)
        g, flow = g_next, flow_next
        pack = velocity_pack(g, eps)
        if k % cad == 0 or k == nsteps:
            record(g, flow, pack)
    rec.mass0 = mass0
    return rec


def run(scenario, **overrides) -> TrajectoryRecord:
    """Run a :class:`aggpatch.scenario.Scenario`; keyword overrides replace solver settings."""
    from .scenario import build_initial
    sol = dict(scenario.solver)
    sol.update({k: v for k, v in overrides.items() if v is not None})
    g0, comps = build_initial(scenario)
    return run_graph(g0, sol["t_end"], sol["dt"], sol.get("mode", "plain"), sol.get("eps"),
                     scenario.outputs.get("snapshot_cadence"), comps)
