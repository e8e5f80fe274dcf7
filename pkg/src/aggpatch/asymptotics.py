"""Long-time behaviour: scattering profile, limit flow, limit support, collapse.

The profile is ``Phi = lim e^t f(t)``, so ``int 2 Phi`` equals the initial
patch area.  All routines post-process an immutable
:class:`~aggpatch.evolve.TrajectoryRecord`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .evolve import FlowMap, TrajectoryRecord, flow_inverse
from .graphstate import SampledGraph, default_threshold, interpolate_many, trapezoid
from .rates import fit_exponential_rate, successive_ratios

__all__ = [
    "LimitProfile",
    "scattering_profile",
    "limit_flow",
    "flow_convergence",
    "limit_support",
    "hausdorff_series",
    "hausdorff_decay",
    "default_test_functions",
    "weak_convergence_test",
    "reconstruct_g",
]

SLOW_FLOW_RATE = -0.3


@dataclass
class LimitProfile:
    phi: SampledGraph
    psi_inf: FlowMap
    K_inf: list
    g_exponent: np.ndarray | None
    cauchy_gap: float
    gaps: np.ndarray = field(default_factory=lambda: np.array([]))
    gap_times: np.ndarray = field(default_factory=lambda: np.array([]))
    rates: dict = field(default_factory=dict)
    converging: bool = True

    def mass(self) -> float:
        """``int 2 Phi``, comparable with the initial patch area."""
        return 2.0 * trapezoid(self.phi)

    def to_json(self) -> str:
        return json.dumps({
            "phi": self.phi.values.tolist(), "x_lo": self.phi.x_lo, "x_hi": self.phi.x_hi,
            "K_inf": [list(k) for k in self.K_inf],
            "g": None if self.g_exponent is None else np.nan_to_num(self.g_exponent).tolist(),
            "cauchy_gap": self.cauchy_gap, "rates": self.rates, "converging": self.converging,
        })


def _rescaled(rec: TrajectoryRecord):
    t0 = rec.times[0]
    return [np.exp(t - t0) * g.values for t, g in zip(rec.times, rec.graphs)]


def scattering_profile(rec: TrajectoryRecord, late_from: float | None = None) -> LimitProfile:
    """``Phi`` from the final ``e^t f`` snapshot with the successive-gap history.

    Gaps ``sup |e^t f(t_k) - e^t f(t_{k-1})|`` are fitted to an exponential
    over the snapshots after ``late_from`` (default: half of the run); a
    non-decreasing late gap marks the profile as not converging.
    """
    if len(rec.snapshots) < 3:
        raise ValueError("need at least 3 snapshots")
    h = _rescaled(rec)
    times = rec.times
    gaps = np.array([np.max(np.abs(b - a)) for a, b in zip(h[:-1], h[1:])])
    gap_times = times[1:]
    phi = rec.final.with_values(h[-1])
    late_from = 0.5 * (times[-1] + times[0]) if late_from is None else late_from
    late = gaps[gap_times >= late_from]
    rates = {}
    converging = True
    if late.size >= 2:
        ratios = successive_ratios(late)
        converging = bool(np.all(ratios < 1.0)) or bool(np.all(late == 0.0))
        if np.all(late > 0):
            rates["profile_gap"] = fit_exponential_rate(gap_times, gaps, t_min=late_from)
    psi = rec.flows[-1]
    K = limit_support_from_flow(psi, rec.initial_components)
    return LimitProfile(phi, psi, K, None, float(gaps[-1]), gaps, gap_times, rates, converging)


def limit_flow(rec: TrajectoryRecord) -> FlowMap:
    """The final tracker snapshot, taken as ``psi_inf``."""
    return rec.flows[-1]


def flow_convergence(rec: TrajectoryRecord, t_min: float = 1.0) -> dict:
    """Decay rate of tracker increments and the Jacobian band over the run.

    The increment between snapshots is normalized by the time step, so it
    estimates ``sup |u1|`` along the trackers.
    """
    times = rec.times
    xs = [fl.tracker_x for fl in rec.flows]
    inc = np.array([np.max(np.abs(b - a)) / (t1 - t0)
                    for a, b, t0, t1 in zip(xs[:-1], xs[1:], times[:-1], times[1:])])
    Js = np.concatenate([fl.tracker_J for fl in rec.flows])
    try:
        rate = fit_exponential_rate(times[1:], inc, t_min=t_min)
    except ValueError:
        rate = float("nan") if np.any(inc > 0) else float("-inf")
    mono = all(np.all(np.diff(x) > 0) for x in xs)
    return {"rate": rate, "J_min": float(Js.min()), "J_max": float(Js.max()),
            "monotone": bool(mono), "slow": bool(np.isfinite(rate) and rate > SLOW_FLOW_RATE)}


def limit_support_from_flow(psi: FlowMap, initial) -> list:
    x0, x = psi.tracker_x0, psi.tracker_x
    return [(float(np.interp(a, x0, x)), float(np.interp(b, x0, x))) for a, b in initial]


def limit_support(profile: LimitProfile, initial) -> list:
    """Images of the initial support components under ``psi_inf``.

    Raises ``ValueError`` when two images overlap (components merged).
    """
    K = limit_support_from_flow(profile.psi_inf, initial)
    order = sorted(K)
    for (a0, b0), (a1, b1) in zip(order, order[1:]):
        if a1 <= b0:
            raise ValueError(f"limit support components merged: [{a0}, {b0}] and [{a1}, {b1}]")
    return K


def hausdorff_series(rec: TrajectoryRecord, K_inf, t_min: float = 1.0):
    """``d_H(D_t, K_inf x {0})`` as amplitude plus endpoint displacement.

    For a graph region over intervals whose endpoints move to those of
    ``K_inf`` the distance is the larger of ``sup f_t`` and the endpoint
    displacement.
    """
    ends = [v for c in rec.initial_components for v in c]
    times, dh = [], []
    for t, g, _, fl in rec.snapshots:
        if t < t_min - 1e-12:
            continue
        amp = float(np.max(g.values))
        disp = 0.0
        if ends:
            now = np.interp(ends, fl.tracker_x0, fl.tracker_x)
            lim = np.array([v for c in K_inf for v in c])
            disp = float(np.max(np.abs(now - lim)))
        times.append(t)
        dh.append(max(amp, disp))
    return np.array(times), np.array(dh)


def hausdorff_decay(rec: TrajectoryRecord, K_inf, t_min: float = 1.0) -> float:
    """Least-squares exponential rate of the Hausdorff distance series."""
    t, d = hausdorff_series(rec, K_inf, t_min)
    if t.size < 3:
        raise ValueError("fewer than 3 snapshots after t_min")
    if np.all(d == 0):
        return float("-inf")
    return fit_exponential_rate(t, d, min_points=3)


def default_test_functions() -> dict:
    return {
        "one": lambda x, y: np.ones_like(x * y),
        "x": lambda x, y: x + 0.0 * y,
        "x2": lambda x, y: x * x + 0.0 * y,
        "gauss_left": lambda x, y: np.exp(-((x + 0.4) ** 2 + y * y) / 0.1),
        "gauss_right": lambda x, y: np.exp(-((x - 0.3) ** 2 + y * y) / 0.05),
        "y": lambda x, y: y + 0.0 * x,
        "y2": lambda x, y: y * y + 0.0 * x,
    }


_GX, _GW = np.polynomial.legendre.leggauss(8)


def _patch_integral(g: SampledGraph, phi) -> float:
    """``int int_{|y| <= f(x)} phi dy dx``: Gauss columns, trapezoid in x."""
    x = g.x
    f = g.values
    y = f[:, None] * _GX[None, :]
    col = (phi(np.broadcast_to(x[:, None], y.shape), y) * _GW[None, :]).sum(axis=1) * f
    return float(g.h * (col.sum() - 0.5 * (col[0] + col[-1])))


def weak_convergence_test(rec: TrajectoryRecord, profile: LimitProfile, test_fns=None) -> list:
    """``I_t = e^t int_{D_t} phi`` against ``2 int Phi(x) phi(x, 0) dx``.

    Returns one row per test function with the time series, the limit
    value, the gaps and (when the gaps are positive) their fitted rate.
    """
    if test_fns is None:
        test_fns = default_test_functions()
    t0 = rec.times[0]
    xg = profile.phi.x
    rows = []
    for name, phi in test_fns.items():
        lim_col = 2.0 * profile.phi.values * phi(xg, np.zeros_like(xg))
        target = float(profile.phi.h * (lim_col.sum() - 0.5 * (lim_col[0] + lim_col[-1])))
        It = np.array([np.exp(t - t0) * _patch_integral(g, phi) for t, g in zip(rec.times, rec.graphs)])
        gaps = np.abs(It - target)
        rate = None
        late = rec.times >= 1.0
        if np.count_nonzero(gaps[late][:-1] > 0) >= 3:
            try:
                rate = fit_exponential_rate(rec.times[late][:-1], gaps[late][:-1])
            except ValueError:
                rate = None
        rows.append({"name": name, "times": rec.times.tolist(), "I_t": It.tolist(),
                     "target": target, "gaps": gaps.tolist(), "rate": rate})
    return rows


def reconstruct_g(profile: LimitProfile, f0: SampledGraph, psi_inf: FlowMap | None = None,
                  log_guard: float = 1e-2) -> dict:
    """Two reconstructions of the exponent ``g`` in ``Phi = f0(psi_inf^{-1}) e^g``.

    * algebraic: ``g = log(Phi / f0(psi_inf^{-1}(x)))`` on the grid;
    * dynamic: ``g = -int_0^T R(s, psi(s, x0)) ds`` read off the trackers at
      ``x = psi_inf(x0)``.

    Values within ``2h`` of a component endpoint, or where ``Phi`` is below
    ``log_guard * max(Phi)``, are masked (NaN).  Near its zeros the grid
    profile has a large relative interpolation error, which the logarithm
    turns into an O(1) error of the algebraic path.
    """
    psi = profile.psi_inf if psi_inf is None else psi_inf
    phi = profile.phi
    x = phi.x
    h = phi.h
    thr = max(default_threshold(phi), log_guard * float(np.max(phi.values)))
    K = profile.K_inf
    mask = phi.values > thr
    inside = np.zeros_like(mask)
    for a, b in K:
        inside |= (x >= a + 2 * h) & (x <= b - 2 * h)
    mask &= inside
    g_alg = np.full(x.size, np.nan)
    if np.any(mask):
        pre = np.array([flow_inverse(psi, xi) for xi in x[mask]])
        base = interpolate_many(f0, pre)
        ok = base > 0
        vals = np.full(pre.size, np.nan)
        vals[ok] = np.log(phi.values[mask][ok] / base[ok])
        g_alg[mask] = vals
    # dynamic reconstruction at tracker images
    xt = psi.tracker_x
    keep = np.zeros(xt.size, dtype=bool)
    for a, b in K:
        keep |= (xt >= a + 2 * h) & (xt <= b - 2 * h)
    keep &= np.interp(xt, x, phi.values) > thr
    g_dyn = -psi.tracker_intR[keep]
    x_dyn = xt[keep]
    # compare at tracker images through the algebraic profile
    good = np.isfinite(g_alg)
    if np.count_nonzero(good) >= 2 and x_dyn.size:
        g_alg_at = np.interp(x_dyn, x[good], g_alg[good])
        gap = float(np.max(np.abs(g_alg_at - g_dyn)))
    else:
        g_alg_at = np.array([])
        gap = 0.0
    profile.g_exponent = g_alg
    return {"x": x, "g_alg": g_alg, "x_dyn": x_dyn, "g_dyn": g_dyn, "g_alg_at_dyn": g_alg_at,
            "max_gap": gap}
