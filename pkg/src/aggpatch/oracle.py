"""Independent ground truth for the patch velocity and the ellipse solution.

The 2D field of the patch ``{|y| <= F(x)}`` is reduced by Fubini to a
single integral over columns: the vertical integral of the Biot-Savart
kernel over a column is elementary, and the remaining column integral is
done with composite Gauss-Legendre panels graded towards the evaluation
abscissa.  Nothing here shares code with :mod:`aggpatch.velocity`; the
graph is represented by its monotone cubic interpolant rather than the
polygon used there.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .graphstate import SampledGraph

__all__ = [
    "EllipseState",
    "biot_savart_patch",
    "biot_savart_profile",
    "ellipse_interior_field",
    "ellipse_ode_step",
    "ellipse_evolve",
    "ellipse_exact_b",
    "semicircle_density",
    "ellipse_marginal",
    "endpoint_gap_monitor",
    "comparison_csv",
]

_GX, _GW = np.polynomial.legendre.leggauss(8)


def _gl_panels(edges):
    """Gauss nodes/weights on consecutive panels ``edges[k], edges[k+1]``."""
    a = edges[:-1, None]
    w = (edges[1:] - edges[:-1])[:, None]
    x = a + 0.5 * w * (_GX[None, :] + 1.0)
    return x.ravel(), (0.5 * w * _GW[None, :]).ravel()


def _graded(c, e, depth=40):
    """Panel edges on [c, e] (either order) refined geometrically towards ``c``."""
    t = np.concatenate(([0.0], 2.0 ** -np.arange(depth, -1, -1, dtype=float)))
    return c + (e - c) * t


def _log_kernel(y1, F, px, py):
    """Vertical integral over the column ``|y2| <= F`` of the log kernel."""
    d = px - y1
    with np.errstate(divide="ignore", invalid="ignore"):
        k2 = np.log((d * d + (py + F) ** 2) / (d * d + (py - F) ** 2))
    return np.where((F > 0) & np.isfinite(k2), k2, 0.0)


def _wrap_angle_sum(y1, F, px, py):
    # arctan((F-py)/d) + arctan((F+py)/d), the vertical integral of d/(d^2+(py-s)^2)
    d = px - y1
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.arctan((F - py) / d) + np.arctan((F + py) / d)
    return np.where((F > 0) & (d != 0), s, 0.0)


def _integrate(nodes, weights, F, px, py):
    s1 = _wrap_angle_sum(nodes, F, px, py)
    k2 = _log_kernel(nodes, F, px, py)
    v1 = -np.dot(weights, s1) / (2 * np.pi)
    v2 = -np.dot(weights, k2) / (4 * np.pi)
    return float(v1), float(v2)


def biot_savart_patch(f: SampledGraph, point) -> tuple[float, float]:
    """Velocity ``-(1/2pi) int (X - Y)/|X - Y|^2 dY`` of the patch ``|y| <= f(x)``.

    The column integral is split at the evaluation abscissa and every grid
    cell within one cell of it is graded geometrically towards it, which
    resolves the jump of the arctan sum and the log singularity of the
    vertical component when the point lies on the boundary.
    """
    px, py = float(point[0]), float(point[1])
    if np.isnan(px) or np.isnan(py):
        raise ValueError("NaN evaluation point")
    if not np.any(f.values):
        return 0.0, 0.0
    xn = f.x
    h = f.h
    interp = PchipInterpolator(xn, f.values, extrapolate=False)
    edges_all = []
    plain = []
    for j in range(f.n - 1):
        a, b = xn[j], xn[j + 1]
        if f.values[j] == 0.0 and f.values[j + 1] == 0.0:
            continue
        if b < px - h or a > px + h:
            plain.append(j)
            continue
        if a < px < b:
            edges_all.append(_graded(px, a)[::-1])
            edges_all.append(_graded(px, b))
        elif px <= a:
            edges_all.append(_graded(a, b))
        else:
            edges_all.append(_graded(b, a)[::-1])
    plain = np.asarray(plain, dtype=int)
    nodes, weights = [], []
    if plain.size:
        a = xn[plain][:, None]
        w = h
        nodes.append((a + 0.5 * w * (_GX[None, :] + 1.0)).ravel())
        weights.append(np.tile(0.5 * w * _GW, plain.size))
    for e in edges_all:
        e = np.sort(e)
        x, w = _gl_panels(e)
        nodes.append(x)
        weights.append(w)
    if not nodes:
        return 0.0, 0.0
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    F = interp(nodes)
    F = np.maximum(np.where(np.isnan(F), 0.0, F), 0.0)
    return _integrate(nodes, weights, F, px, py)


def biot_savart_profile(F, lo: float, hi: float, point, panels: int = 64) -> tuple[float, float]:
    """Patch velocity for an analytic half-width ``F`` supported on ``[lo, hi]``.

    Columns are parametrized by ``y1 = c - r cos(phi)``, which removes the
    square-root endpoint behaviour of elliptic profiles; panels are graded
    towards the evaluation abscissa.
    """
    px, py = float(point[0]), float(point[1])
    c, r = 0.5 * (lo + hi), 0.5 * (hi - lo)
    base = np.linspace(0.0, np.pi, panels + 1)
    if lo < px < hi:
        phip = np.arccos(np.clip((c - px) / r, -1.0, 1.0))
        left = base[base < phip]
        right = base[base > phip]
        edges = np.unique(np.concatenate((
            left, _graded(phip, left[-1] if left.size else 0.0),
            _graded(phip, right[0] if right.size else np.pi), right)))
    else:
        edges = base
    phi, w = _gl_panels(edges)
    y1 = c - r * np.cos(phi)
    w = w * r * np.sin(phi)
    Fv = np.maximum(np.asarray(F(y1), dtype=float), 0.0)
    return _integrate(y1, w, Fv, px, py)


# ellipse ---------------------------------------------------------------------

@dataclass(frozen=True)
class EllipseState:
    a: float
    b: float
    time: float = 0.0

    def __post_init__(self):
        if not (self.a >= self.b > 0):
            raise ValueError("ellipse axes must satisfy a >= b > 0")

    @property
    def area(self) -> float:
        return np.pi * self.a * self.b

    def profile(self, x):
        x = np.asarray(x, dtype=float)
        return self.b * np.sqrt(np.clip(1.0 - (x / self.a) ** 2, 0.0, None))


def ellipse_interior_field(e: EllipseState, point) -> tuple[float, float]:
    """Linear velocity inside the ellipse patch, ``(-b x1, -a x2)/(a + b)``."""
    x1, x2 = float(point[0]), float(point[1])
    if (x1 / e.a) ** 2 + (x2 / e.b) ** 2 >= 1.0:
        raise ValueError("point is not strictly inside the ellipse")
    s = e.a + e.b
    return -e.b * x1 / s, -e.a * x2 / s


def _axes_rhs(a, b):
    r = -a * b / (a + b)
    return r, r


def ellipse_ode_step(e: EllipseState, dt: float) -> EllipseState:
    """One classical Runge-Kutta step of ``a' = b' = -ab/(a+b)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    a, b = e.a, e.b
    k1 = _axes_rhs(a, b)[0]
    k2 = _axes_rhs(a + 0.5 * dt * k1, b + 0.5 * dt * k1)[0]
    k3 = _axes_rhs(a + 0.5 * dt * k2, b + 0.5 * dt * k2)[0]
    k4 = _axes_rhs(a + dt * k3, b + dt * k3)[0]
    inc = dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    # both axes get the same increment, so a - b is untouched
    return EllipseState(a + inc, b + inc, e.time + dt)


def ellipse_evolve(e: EllipseState, t_end: float, dt: float = 1e-3, a0: float | None = None):
    """Integrate the axes ODE to ``t_end``; returns the list of states.

    Stops early once ``b < 1e-12 * a0``.
    """
    a0 = e.a if a0 is None else a0
    out = [e]
    nsteps = int(round((t_end - e.time) / dt))
    for _ in range(nsteps):
        nxt = ellipse_ode_step(out[-1], dt)
        if nxt.b < 1e-12 * a0:
            break
        out.append(nxt)
    return out


def ellipse_exact_b(a0: float, b0: float, tau):
    """Closed form of the minor axis: ``b (b + a0 - b0) = a0 b0 exp(-tau)``."""
    c = a0 - b0
    p = a0 * b0 * np.exp(-np.asarray(tau, dtype=float))
    return 0.5 * (-c + np.sqrt(c * c + 4 * p))


def semicircle_density(x0: float, x):
    """Semicircle law ``2 sqrt(x0^2 - x^2)/(pi x0^2)`` on ``[-x0, x0]``."""
    if not x0 > 0:
        raise ValueError("x0 must be positive")
    x = np.asarray(x, dtype=float)
    out = 2.0 * np.sqrt(np.clip(x0 * x0 - x * x, 0.0, None)) / (np.pi * x0 * x0)
    return out if out.ndim else float(out)


def ellipse_marginal(e: EllipseState, x):
    """x-marginal of the uniform unit-mass ellipse, ``2b sqrt(1-x^2/a^2)/(pi a b)``."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < e.a
    val = 2.0 * e.b * np.sqrt(np.clip(1.0 - (x / e.a) ** 2, 0.0, None)) / (np.pi * e.a * e.b)
    out = np.where(inside, val, 0.0)
    return out if out.ndim else float(out)


def endpoint_gap_monitor(times, vnorms, d0: float) -> np.ndarray:
    """Certified lower bound ``d0 - 2 int_0^t ||v||_inf`` at every sample time."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(vnorms, dtype=float)
    if t.shape != v.shape:
        raise ValueError("times and norms must have the same length")
    if t.size == 0:
        return np.array([])
    inc = np.concatenate(([0.0], 0.5 * (v[1:] + v[:-1]) * np.diff(t)))
    return d0 - 2.0 * np.cumsum(inc)


def comparison_csv(rows) -> str:
    """CSV ``x, quantity, model_value, oracle_value, abs_err`` from 4-tuples."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "quantity", "model_value", "oracle_value", "abs_err"])
    for x, q, m, o in rows:
        w.writerow([repr(float(x)), q, repr(float(m)), repr(float(o)), repr(abs(float(m) - float(o)))])
    return buf.getvalue()
