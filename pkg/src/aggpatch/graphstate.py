"""Sampled graph representation, interpolation and discrete regularity norms.

A :class:`SampledGraph` holds the upper boundary ``y = f(x)`` of a one-fold
symmetric patch on a fixed uniform grid.  Everything here is a pure function
of an immutable snapshot.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import PchipInterpolator

__all__ = [
    "SampledGraph",
    "NormReport",
    "interpolate",
    "interpolate_many",
    "modulus_of_continuity",
    "modulus_table",
    "dini_norm",
    "holder_seminorm",
    "holder_norm",
    "slope",
    "lemma1_check",
    "support_components",
    "default_threshold",
    "norm_report",
    "trapezoid",
]


@dataclass(frozen=True)
class SampledGraph:
    """Graph values on the uniform grid ``x_lo + i*h``, ``i = 0..n-1``.

    Values are not forced to be nonnegative here, because slopes and test
    functions share the type; positivity is enforced by the evolver.
    """

    x_lo: float
    x_hi: float
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("values must be a 1-d array with at least 2 nodes")
        if not self.x_hi > self.x_lo:
            raise ValueError("x_hi must exceed x_lo")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise ValueError(f"non-finite graph value at node {bad}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def h(self) -> float:
        return (self.x_hi - self.x_lo) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.n)

    def with_values(self, values, time=None) -> "SampledGraph":
        return replace(self, values=np.asarray(values, dtype=float),
                       time=self.time if time is None else float(time))

    def scaled(self, lam: float) -> "SampledGraph":
        return self.with_values(lam * self.values)

    @classmethod
    def from_function(cls, fn, x_lo: float, x_hi: float, n: int, time: float = 0.0):
        x = np.linspace(x_lo, x_hi, n)
        return cls(x_lo, x_hi, np.asarray(fn(x), dtype=float), time)

    @classmethod
    def zeros(cls, x_lo: float, x_hi: float, n: int):
        return cls(x_lo, x_hi, np.zeros(n))

    # serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {"x_lo": self.x_lo, "x_hi": self.x_hi, "n": self.n,
                "time": self.time, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "SampledGraph":
        values = np.asarray(d["values"], dtype=float)
        if "n" in d and int(d["n"]) != values.size:
            raise ValueError(f"n={d['n']} does not match {values.size} values")
        return cls(float(d["x_lo"]), float(d["x_hi"]), values, float(d.get("time", 0.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SampledGraph":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "f"])
        for xi, fi in zip(self.x, self.values):
            w.writerow([repr(float(xi)), repr(float(fi))])
        return buf.getvalue()


@dataclass(frozen=True)
class NormReport:
    linf: float
    l1: float
    slope_linf: float
    dini: float
    holder_s: float
    s: float
    support: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"linf": self.linf, "l1": self.l1, "slope_linf": self.slope_linf,
                "dini": self.dini, "holder_s": self.holder_s, "s": self.s,
                "support": [list(iv) for iv in self.support]}


def trapezoid(g: SampledGraph) -> float:
    v = g.values
    return float(g.h * (v.sum() - 0.5 * (v[0] + v[-1])))


def default_threshold(g: SampledGraph) -> float:
    """Support threshold, 1e-10 of the sup norm (0 for the zero graph)."""
    return 1e-10 * float(np.max(np.abs(g.values)))


# interpolation ----------------------------------------------------------------

def _pchip(g: SampledGraph) -> PchipInterpolator:
    return PchipInterpolator(g.x, g.values, extrapolate=False)


def interpolate_many(g: SampledGraph, x) -> np.ndarray:
    """Monotone cubic interpolant at many points; zero outside the grid."""
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise ValueError("NaN interpolation point")
    out = _pchip(g)(x)
    out = np.where(np.isnan(out), 0.0, out)
    if g.values.min() >= 0.0:
        out = np.maximum(out, 0.0)
    return out


def interpolate(g: SampledGraph, x: float) -> float:
    """Monotone piecewise-cubic value of the graph at ``x``.

    Outside ``[x_lo, x_hi]`` the graph is extended by zero.  Node values are
    reproduced exactly and, for a nonnegative graph, the result is never
    negative.
    """
    if math.isnan(x):
        raise ValueError("NaN interpolation point")
    return float(interpolate_many(g, np.array([x]))[0])


# modulus of continuity and norms ---------------------------------------------

def modulus_table(g: SampledGraph) -> np.ndarray:
    """``w[k] = max |g_i - g_j|`` over node pairs with ``|i - j| <= k``."""
    v = g.values
    n = v.size
    d = np.zeros(n)
    for k in range(1, n):
        d[k] = np.max(np.abs(v[k:] - v[:-k]))
    return np.maximum.accumulate(d)


def _modulus_at(table: np.ndarray, h: float, r) -> np.ndarray:
    k = np.floor(np.asarray(r, dtype=float) / h * (1 + 1e-12)).astype(int)
    return table[np.clip(k, 0, table.size - 1)]


def modulus_of_continuity(g: SampledGraph, r: float) -> float:
    """Grid modulus of continuity: max ``|g_i - g_j|`` over ``|x_i - x_j| <= r``."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    return float(_modulus_at(modulus_table(g), g.h, r))


def _log_grid(h: float, npts: int = 400) -> np.ndarray:
    if h >= 1.0:
        return np.array([1.0])
    return np.geomspace(h, 1.0, npts)


def dini_norm(g: SampledGraph, table: np.ndarray | None = None) -> float:
    """Estimate of ``int_0^1 omega(r)/r dr`` with the lower cutoff at ``r = h``.

    The modulus is linearly interpolated between the grid lags ``k*h`` and the
    integral is taken by the trapezoid rule in ``log r``.  The cutoff makes
    this a lower-biased estimator; compare values across resolutions rather
    than in absolute terms.
    """
    if table is None:
        table = modulus_table(g)
    h = g.h
    r = _log_grid(h)
    if r.size < 2:
        return 0.0
    lags = np.arange(table.size) * h
    w = np.interp(r, lags, table)
    return float(np.trapezoid(w, np.log(r)))


def holder_seminorm(g: SampledGraph, s: float, table: np.ndarray | None = None) -> float:
    """``max omega(r)/r**s`` over grid lags ``0 < r <= 1``."""
    if not 0.0 < s < 1.0:
        raise ValueError("Holder exponent must lie in (0, 1)")
    if table is None:
        table = modulus_table(g)
    h = g.h
    kmax = min(table.size - 1, int(math.floor(1.0 / h * (1 + 1e-12))))
    if kmax < 1:
        return 0.0
    k = np.arange(1, kmax + 1)
    return float(np.max(table[k] / (k * h) ** s))


def holder_norm(g: SampledGraph, s: float) -> float:
    """Full ``C^s`` norm: sup norm plus seminorm."""
    return float(np.max(np.abs(g.values))) + holder_seminorm(g, s)


def slope(g: SampledGraph) -> SampledGraph:
    """Fourth-order finite-difference derivative on the same grid."""
    v = g.values
    n = v.size
    if n < 5:
        raise ValueError("slope needs at least 5 nodes")
    h = g.h
    d = np.empty(n)
    d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    # one-sided fourth-order stencils
    d[0] = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * h)
    d[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12 * h)
    d[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12 * h)
    d[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / (12 * h)
    return g.with_values(d)


def lemma1_check(g: SampledGraph, s: float, threshold: float | None = None) -> float:
    """Empirical constant in ``|g'| <= C ||g'||_s^{1/(1+s)} g^{s/(1+s)}``."""
    if not 0.0 < s < 1.0:
        raise ValueError("Holder exponent must lie in (0, 1)")
    if threshold is None:
        threshold = default_threshold(g)
    dg = slope(g)
    semi = holder_seminorm(dg, s)
    mask = g.values > threshold
    if semi == 0.0 or not np.any(mask):
        return 0.0
    num = np.abs(dg.values[mask])
    den = semi ** (1 / (1 + s)) * g.values[mask] ** (s / (1 + s))
    return float(np.max(num / den))


def support_components(g: SampledGraph, threshold: float | None = None) -> list:
    """Maximal intervals where the graph exceeds ``threshold``.

    Each run of nodes above the threshold is reported as the closed interval
    between the neighbouring nodes at or below it (the support of the
    piecewise-linear interpolant), clipped to the grid.
    """
    if threshold is None:
        threshold = default_threshold(g)
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    above = g.values > threshold
    if not np.any(above):
        return []
    x = g.x
    idx = np.flatnonzero(np.diff(np.concatenate(([0], above.astype(np.int8), [0]))))
    starts, stops = idx[::2], idx[1::2] - 1
    out = []
    for i0, i1 in zip(starts, stops):
        lo = x[max(i0 - 1, 0)]
        hi = x[min(i1 + 1, g.n - 1)]
        out.append((float(lo), float(hi)))
    return out


def norm_report(g: SampledGraph, s: float = 0.5, threshold: float | None = None) -> NormReport:
    dg = slope(g)
    table = modulus_table(dg)
    return NormReport(
        linf=float(np.max(np.abs(g.values))),
        l1=float(np.abs(g.values).sum() * g.h - 0.5 * g.h * (abs(g.values[0]) + abs(g.values[-1]))),
        slope_linf=float(np.max(np.abs(dg.values))),
        dini=dini_norm(dg, table),
        holder_s=holder_seminorm(dg, s, table),
        s=s,
        support=support_components(g, threshold),
    )
