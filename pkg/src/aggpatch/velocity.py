"""Boundary velocity of the symmetric patch and the singular integrals built on it.

``u1``/``u2`` are integrated exactly over every cell of the piecewise-linear
interpolant of the graph (closed-form arctan/log antiderivatives), so the
y = 0 jump of the arctan kernel and the log singularity of the vertical
kernel never meet a quadrature node.  The derivative fields and the source
terms ``F``/``G`` are principal values evaluated with Gauss-Legendre cells,
geometrically graded towards ``y = 0`` down to the scale ``f(x)`` and paired
``+y``/``-y`` before summation.
"""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .graphstate import SampledGraph, default_threshold, slope

__all__ = [
    "VelocityField",
    "u1_at",
    "u2_at",
    "velocity_arrays",
    "u1_eps",
    "u2_eps",
    "dx_u1",
    "dx_u2",
    "source_F",
    "source_G",
    "decompose_G",
    "damping_R",
    "pv_terms",
    "velocity_field",
]

TWO_PI = 2.0 * np.pi
FOUR_PI = 4.0 * np.pi
_CHUNK = 256


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("AGGRE_THREADS", "1")))
    except ValueError:
        return 1


def _check_finite(g: SampledGraph):
    if not np.all(np.isfinite(g.values)):
        raise ValueError("graph contains non-finite values")


# exact cell integrals for the piecewise-linear graph ---------------------------

def _antiderivatives(y, alpha, beta):
    """Antiderivatives in ``y`` of ``arctan((a+b*y)/y)`` and ``log(y^2+(a+b*y)^2)``."""
    A = 1.0 + beta * beta
    lin = alpha + beta * y
    q = y * y + lin * lin
    absa = np.abs(alpha)
    nz = absa > 0.0
    logq = np.log(np.where(q > 0.0, q, 1.0))
    at = np.where(nz, np.arctan((A * y + alpha * beta) / np.where(nz, absa, 1.0)), 0.0)
    ynz = y != 0.0
    ya = np.where(ynz, y * np.arctan(lin / np.where(ynz, y, 1.0)), 0.0)
    P = ya + alpha / (2.0 * A) * logq - absa * beta / A * at
    Q = (y + alpha * beta / A) * logq - 2.0 * y + 2.0 * absa / A * at
    return P, Q


def _piece_sums(lo, hi, a_minus, a_plus, beta):
    """Integrals of the u1/u2 kernels over ``[lo, hi]`` (zero where lo >= hi)."""
    valid = hi > lo
    hi = np.where(valid, hi, lo)
    Pm_hi, Qm_hi = _antiderivatives(hi, a_minus, beta)
    Pm_lo, Qm_lo = _antiderivatives(lo, a_minus, beta)
    Pp_hi, Qp_hi = _antiderivatives(hi, a_plus, beta)
    Pp_lo, Qp_lo = _antiderivatives(lo, a_plus, beta)
    s1 = np.where(valid, (Pm_hi - Pm_lo) + (Pp_hi - Pp_lo), 0.0)
    s2 = np.where(valid, (Qm_hi - Qm_lo) - (Qp_hi - Qp_lo), 0.0)
    return s1.sum(axis=-1), s2.sum(axis=-1)


def _aligned_chunk(xn, fv, active, xt, ft):
    """Grid-target version of the cell sums.

    ``log q`` and ``y arctan(lin/y)`` only depend on the node, so they are
    evaluated once per node and differenced; the cell-dependent arctan is
    differenced in one ``arctan2`` call.
    """
    h = xn[1] - xn[0]
    nodes = np.union1d(active, active + 1)
    pos = np.searchsorted(nodes, active)
    Y = xn[nodes][None, :] - xt[:, None]
    fn = fv[nodes][None, :]
    fx = ft[:, None]
    s = (fv[active + 1] - fv[active]) / h
    A = 1.0 + s * s
    out = []
    for lin in (fn - fx, fn + fx):
        q = Y * Y + lin * lin
        logq = np.log(np.where(q > 0.0, q, 1.0))
        ynz = Y != 0.0
        ya = np.where(ynz, Y * np.arctan(lin / np.where(ynz, Y, 1.0)), 0.0)
        ylq = Y * logq
        lo, hi = pos, pos + 1
        Ylo = Y[:, lo]
        alpha = lin[:, lo] - s * Ylo
        absa = np.abs(alpha)
        ab = alpha * s
        dat = np.arctan2(A * h * absa, alpha * alpha + (A * (Ylo + h) + ab) * (A * Ylo + ab))
        dlq = logq[:, hi] - logq[:, lo]
        out.append((ya[:, hi] - ya[:, lo], ylq[:, hi] - ylq[:, lo], dlq, alpha, absa, dat))
    (dya_m, dyl_m, dlq_m, a_m, aa_m, dat_m), (dya_p, dyl_p, dlq_p, a_p, aa_p, dat_p) = out
    s1 = (dya_m + dya_p + (a_m * dlq_m + a_p * dlq_p) / (2.0 * A)
          - s * (aa_m * dat_m + aa_p * dat_p) / A)
    s2 = (dyl_m - dyl_p + s * (a_m * dlq_m - a_p * dlq_p) / A
          + 2.0 * (aa_m * dat_m - aa_p * dat_p) / A)
    return s1.sum(axis=1), s2.sum(axis=1)


def _polygon_chunk(xn, fv, active, xt, ft, eps, aligned):
    if aligned and eps == 0.0:
        return _aligned_chunk(xn, fv, active, xt, ft)
    y0 = xn[active][None, :] - xt[:, None]
    h = xn[1] - xn[0]
    y1 = y0 + h
    s = ((fv[active + 1] - fv[active]) / h)[None, :]
    base = fv[active][None, :] - s * y0
    a_minus = base - ft[:, None]
    a_plus = base + ft[:, None]
    beta = np.broadcast_to(s, y0.shape)
    l1, l2 = _piece_sums(y0, np.minimum(y1, -eps), a_minus, a_plus, beta)
    r1, r2 = _piece_sums(np.maximum(y0, eps), y1, a_minus, a_plus, beta)
    return l1 + r1, l2 + r2


def _polygon_velocity(g: SampledGraph, xt, ft, eps=0.0, aligned=False):
    """(u1, u2) of the polygonal patch at boundary points ``(xt, ft)``."""
    _check_finite(g)
    xn = g.x
    fv = g.values
    xt = np.atleast_1d(np.asarray(xt, dtype=float))
    ft = np.atleast_1d(np.asarray(ft, dtype=float))
    if np.any(np.isnan(xt)) or np.any(np.isnan(ft)):
        raise ValueError("NaN evaluation point")
    # cells where the graph vanishes identically contribute nothing
    active = np.flatnonzero((fv[:-1] != 0.0) | (fv[1:] != 0.0))
    u1 = np.zeros(xt.size)
    u2 = np.zeros(xt.size)
    if active.size == 0:
        return u1, u2
    chunks = [slice(i, min(i + _CHUNK, xt.size)) for i in range(0, xt.size, _CHUNK)]

    def work(sl):
        return _polygon_chunk(xn, fv, active, xt[sl], ft[sl], eps, aligned)

    nthreads = _threads()
    if nthreads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            results = list(ex.map(work, chunks))
    else:
        results = [work(sl) for sl in chunks]
    for sl, (s1, s2) in zip(chunks, results):
        u1[sl] = s1 / TWO_PI
        u2[sl] = s2 / FOUR_PI
    # the log-ratio vanishes identically where the graph touches the axis
    u2[ft == 0.0] = 0.0
    return u1, u2


def _point_value(g: SampledGraph, x: float) -> float:
    if np.isnan(x):
        raise ValueError("NaN evaluation point")
    if x < g.x_lo or x > g.x_hi:
        return 0.0
    return float(np.interp(x, g.x, g.values))


def u1_at(f: SampledGraph, x: float) -> float:
    """Horizontal boundary velocity at abscissa ``x``."""
    u1, _ = _polygon_velocity(f, [x], [_point_value(f, x)])
    return float(u1[0])


def u2_at(f: SampledGraph, x: float) -> float:
    """Vertical boundary velocity at abscissa ``x`` (nonpositive for f >= 0)."""
    _, u2 = _polygon_velocity(f, [x], [_point_value(f, x)])
    return float(u2[0])


def velocity_arrays(f: SampledGraph, eps: float | None = None):
    """(u1, u2) at every grid node; ``eps`` truncates ``|y| < eps``."""
    if eps is None:
        return _polygon_velocity(f, f.x, f.values, aligned=True)
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    return _polygon_velocity(f, f.x, f.values, eps=float(eps), aligned=True)


def u1_eps(f: SampledGraph, eps: float) -> np.ndarray:
    return velocity_arrays(f, eps)[0]


def u2_eps(f: SampledGraph, eps: float) -> np.ndarray:
    return velocity_arrays(f, eps)[1]


# principal-value engine ------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _graded_nodes(depth: int):
    """Gauss nodes/weights on (0, 1) graded geometrically towards 0."""
    edges = np.concatenate(([0.0], 2.0 ** -np.arange(depth, -1, -1, dtype=float)))
    a, b = edges[:-1], edges[1:]
    eta = (a[:, None] + (b - a)[:, None] * _GL_X[None, :]).ravel()
    w = ((b - a)[:, None] * _GL_W[None, :]).ravel()
    return eta, w


def _table(interp, x, shift):
    """interp(x_j + shift) for each node j (rows) and shift (columns)."""
    pts = x[:, None] + shift[None, :]
    vals = interp(pts.ravel()).reshape(pts.shape)
    return np.where(np.isnan(vals), 0.0, vals)


def _samples(g: SampledGraph, depth: int | None = None):
    """Values of f and f' at ``x_i +- y`` on the shared y-quadrature.

    Returns (y, w, fx, dx, fp, fm, dp, dm) with rows indexing grid targets and
    columns the positive quadrature nodes ``y``.
    """
    x = g.x
    n = g.n
    h = g.h
    v = g.values
    d = slope(g).values
    fi = PchipInterpolator(x, v, extrapolate=False)
    di = PchipInterpolator(x, d, extrapolate=False)
    if depth is None:
        pos = np.abs(v[v != 0.0])
        fmin = pos.min() if pos.size else h
        depth = int(np.clip(np.ceil(np.log2(h / min(fmin, h))) + 4, 4, 60))
    eta, weta = _graded_nodes(depth)
    K = n - 1
    # uniform cells [k h, (k+1) h], k = 1..K-1
    ks = np.arange(1, K)
    y_uni = ((ks[:, None] + _GL_X[None, :]) * h).ravel()
    w_uni = np.tile(_GL_W * h, ks.size)
    y = np.concatenate((eta * h, y_uni))
    w = np.concatenate((weta * h, w_uni))

    # lookup tables: f(x_j + h*xi) for the shared local coordinates
    Tp_f = _table(fi, x, _GL_X * h)
    Tm_f = _table(fi, x, (1.0 - _GL_X) * h)
    Tp_d = _table(di, x, _GL_X * h)
    Tm_d = _table(di, x, (1.0 - _GL_X) * h)
    Gp_f = _table(fi, x, eta * h)
    Gm_f = _table(fi, x, (1.0 - eta) * h)
    Gp_d = _table(di, x, eta * h)
    Gm_d = _table(di, x, (1.0 - eta) * h)
    # cells j = n-1 and beyond lie outside the grid: zero rows
    zpad = np.zeros((n, Tp_f.shape[1]))
    Tp_f[-1] = Tm_f[-1] = Tp_d[-1] = Tm_d[-1] = 0.0
    Gp_f[-1] = Gp_d[-1] = Gm_f[-1] = Gm_d[-1] = 0.0

    i = np.arange(n)[:, None]
    jp = i + ks[None, :]               # cell index on the + side
    jm = i - ks[None, :] - 1           # cell index on the - side

    def gather(T, j):
        ok = (j >= 0) & (j <= n - 2)
        out = T[np.clip(j, 0, n - 1)]          # (n, K-1, p)
        out = np.where(ok[..., None], out, 0.0)
        return out.reshape(n, -1)

    fp = np.concatenate((Gp_f, gather(Tp_f, jp)), axis=1)
    dp = np.concatenate((Gp_d, gather(Tp_d, jp)), axis=1)
    gm_f = np.where((i - 1 >= 0), Gm_f[np.clip(i[:, 0] - 1, 0, n - 1)], 0.0)
    gm_d = np.where((i - 1 >= 0), Gm_d[np.clip(i[:, 0] - 1, 0, n - 1)], 0.0)
    fm = np.concatenate((gm_f, gather(Tm_f, jm)), axis=1)
    dm = np.concatenate((gm_d, gather(Tm_d, jm)), axis=1)
    del zpad
    return y, w, v, d, fp, fm, dp, dm


def pv_terms(f: SampledGraph) -> dict:
    """All principal-value integrals of the slope equation in one pass.

    Keys: ``derr_a``/``derr_b`` (the two integrals whose sum is
    ``2 pi dx u1``), ``derr1_a``/``derr1_b`` (difference is ``2 pi dx u2``),
    ``F`` and ``G``.
    """
    _check_finite(f)
    y, w, fx, dx, fp, fm, dp, dm = _samples(f)
    fx = fx[:, None]
    dx = dx[:, None]
    Y = y[None, :]
    out = {}

    def paired(func):
        return ((func(Y, fp, dp) + func(-Y, fm, dm)) * w[None, :]).sum(axis=1)

    def dm_(yy, fy, dy):
        return fy - fx

    def k_a(yy, fy, dy):
        dl = fy - fx
        return (dy - dx) * yy / (yy * yy + dl * dl)

    def k_b(yy, fy, dy):
        dl = fy + fx
        return (dy + dx) * yy / (yy * yy + dl * dl)

    def k_c(yy, fy, dy):
        dl = fy - fx
        return dl * (dy - dx) / (yy * yy + dl * dl)

    def k_d(yy, fy, dy):
        dl = fy + fx
        return dl * (dy + dx) / (yy * yy + dl * dl)

    def k_F(yy, fy, dy):
        dl = fy - fx
        return (dl - yy * dx) * (dy - dx) / (yy * yy + dl * dl)

    def k_G(yy, fy, dy):
        dl = fy + fx
        return (dl + yy * dx) * (dy + dx) / (yy * yy + dl * dl)

    with np.errstate(invalid="ignore", divide="ignore"):
        out["derr_a"] = paired(k_a)
        out["derr_b"] = paired(k_b)
        out["derr1_a"] = paired(k_c)
        out["derr1_b"] = paired(k_d)
        out["F"] = paired(k_F)
        out["G"] = paired(k_G)
    for k in out:
        out[k] = np.nan_to_num(out[k])
    return out


def dx_u1(f: SampledGraph, terms: dict | None = None) -> np.ndarray:
    t = pv_terms(f) if terms is None else terms
    return (t["derr_a"] + t["derr_b"]) / TWO_PI


def dx_u2(f: SampledGraph, terms: dict | None = None) -> np.ndarray:
    t = pv_terms(f) if terms is None else terms
    out = (t["derr1_a"] - t["derr1_b"]) / TWO_PI
    # the two integrals cancel identically outside the support
    out[f.values == 0.0] = np.where(np.abs(out[f.values == 0.0]) < 1e-300, 0.0,
                                    out[f.values == 0.0])
    return out


def source_F(f: SampledGraph, terms: dict | None = None) -> np.ndarray:
    t = pv_terms(f) if terms is None else terms
    return t["F"].copy()


def source_G(f: SampledGraph, terms: dict | None = None) -> np.ndarray:
    t = pv_terms(f) if terms is None else terms
    return t["G"].copy()


_THETA, _THETA_W = np.polynomial.legendre.leggauss(256)


def decompose_G(f: SampledGraph, terms: dict | None = None):
    """Split ``G = 2 pi f' + L + N``.

    ``L(x) = 2 int (f'(x + f(x) z) - f'(x)) / (z^2 + 4) dz`` is evaluated with
    ``z = 2 tan(theta)``, which turns the Poisson-type weight into ``d theta/2``.
    Where ``f(x) = 0`` the substitution degenerates and ``L = 0``.
    """
    G = source_G(f, terms)
    d = slope(f).values
    linear = TWO_PI * d
    di = PchipInterpolator(f.x, d, extrapolate=False)
    theta = 0.5 * np.pi * _THETA
    wt = 0.5 * np.pi * _THETA_W
    fx = f.values
    pts = f.x[:, None] + 2.0 * fx[:, None] * np.tan(theta)[None, :]
    vals = di(pts.ravel()).reshape(pts.shape)
    vals = np.where(np.isnan(vals), 0.0, vals)
    L = (vals * wt[None, :]).sum(axis=1) - np.pi * d
    L[fx <= 0.0] = 0.0
    N = G - linear - L
    return linear, L, N


def damping_R(f: SampledGraph, u2: np.ndarray | None = None,
              threshold: float | None = None) -> np.ndarray:
    """``R = -u2/f - 1`` on the guarded support, 0 elsewhere."""
    if u2 is None:
        u2 = velocity_arrays(f)[1]
    if threshold is None:
        threshold = default_threshold(f)
    fv = f.values
    mask = fv > threshold
    R = np.zeros_like(fv)
    R[mask] = -u2[mask] / fv[mask] - 1.0
    return R


@dataclass(frozen=True)
class VelocityField:
    x: np.ndarray
    f: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    du1: np.ndarray
    du2: np.ndarray
    F: np.ndarray
    G: np.ndarray
    R: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["x", "f", "u1", "u2", "du1", "du2", "F", "G", "R"]
        w.writerow(cols)
        for row in zip(*(getattr(self, c) for c in cols)):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def velocity_field(f: SampledGraph) -> VelocityField:
    u1, u2 = velocity_arrays(f)
    terms = pv_terms(f)
    return VelocityField(
        x=f.x, f=f.values.copy(), u1=u1, u2=u2,
        du1=dx_u1(f, terms), du2=dx_u2(f, terms),
        F=source_F(f, terms), G=source_G(f, terms),
        R=damping_R(f, u2),
    )
