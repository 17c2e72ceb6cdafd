"""Empirical regularity measurements on solved grid functions.

All probes read values only; none of them extrapolates below three grid
spacings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from . import modulus as mod
from .errors import GeometryError, PreconditionError, ResolutionError
from .fdsolver import GridFunction

__all__ = [
    "LipschitzTable",
    "C1AlphaFit",
    "HopfTable",
    "lipschitz_probe",
    "c1alpha_fit",
    "hopf_probe",
    "f_modulus",
    "dyadic_scales",
]

MIN_CELLS = 3


def dyadic_scales(k_lo, k_hi):
    """``[2^-k_hi, ..., 2^-k_lo]`` in increasing order."""
    return [2.0**-k for k in range(k_hi, k_lo - 1, -1)]


def _check_scales(scales, h, what="scale"):
    scales = sorted(float(r) for r in scales)
    if not scales:
        raise ResolutionError(f"no {what}s requested")
    if scales[0] < MIN_CELLS * h * (1 - 1e-12):
        raise ResolutionError(f"{what} {scales[0]:g} is below {MIN_CELLS}h = {MIN_CELLS * h:g}")
    return scales


def _origin_value(u: GridFunction):
    v = u.at_node(0.0, 0.0)
    if not math.isfinite(v):
        raise PreconditionError("origin carries no value")
    return v


def _inside_polar(u: GridFunction):
    x, y, v = u.inside_points()
    return x, y, v, np.hypot(x, y)


# --------------------------------------------------------------------------


@dataclass
class LipschitzTable:
    scales: list
    quotients: list
    u0: float

    @property
    def lipschitz(self):
        return max(self.quotients)

    def rows(self):
        return list(zip(self.scales, self.quotients))

    def to_dict(self):
        return {"scales": self.scales, "quotients": self.quotients, "u0": self.u0, "lipschitz": self.lipschitz}


def lipschitz_probe(u: GridFunction, scales) -> LipschitzTable:
    """``q(r) = sup_{inside, |x| <= r} |u - u(0)| / r``."""
    scales = _check_scales(scales, u.domain.h)
    u0 = _origin_value(u)
    _, _, v, rad = _inside_polar(u)
    dev = np.abs(v - u0)
    q = []
    for r in scales:
        m = rad <= r * (1 + 1e-12)
        q.append(float(dev[m].max()) / r if m.any() else 0.0)
    return LipschitzTable(scales, q, u0)


# --------------------------------------------------------------------------


@dataclass
class C1AlphaFit:
    a: float
    alpha_hat: float
    C_hat: float
    scales: list
    residuals: list
    a_initial: float
    ray_refined: bool = False

    def to_dict(self):
        return {
            "a": self.a,
            "alpha_hat": self.alpha_hat,
            "C_hat": self.C_hat,
            "scales": self.scales,
            "residuals": self.residuals,
            "a_initial": self.a_initial,
            "ray_refined": self.ray_refined,
        }


def _sup_residuals(dev, y, rad, a, scales):
    res = np.abs(dev - a * y)
    return np.array([res[rad <= r * (1 + 1e-12)].max() for r in scales])


def _loglog(scales, s):
    lr = np.log(scales)
    ls = np.log(np.maximum(s, 1e-300))
    slope, icpt = np.polyfit(lr, ls, 1)
    return slope, icpt


RAY_FIT_RTOL = 1e-8


def _ray_slope(u: GridFunction, u0, r_max, a0):
    """Linear coefficient of ``u(0, y) - u(0) = a y + b y^(1+p)`` fitted on the
    normal ray (nodes with ``3h <= y <= r_max``).

    The fit is used only when this two-term law reproduces the ray to
    ``RAY_FIT_RTOL``; otherwise the ball slope ``a0`` is kept.
    """
    d = u.domain
    i = -d.i0
    y = d.y
    m = d.inside[i] & (y >= MIN_CELLS * d.h * (1 - 1e-12)) & (y <= r_max * (1 + 1e-12))
    if m.sum() < 6:
        return a0, False
    yy, vv = y[m], u.values[i, m] - u0
    scale = yy.max()

    def resid(p):
        a, b, q = p
        return (a * yy + b * yy * (yy / scale) ** q - vv) / scale

    fit = least_squares(resid, x0=(a0, 0.0, 0.5), bounds=([-np.inf, -np.inf, 0.01], [np.inf, np.inf, 3.0]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    rms = float(np.sqrt(np.mean(fit.fun**2))) * scale
    if fit.success and rms <= RAY_FIT_RTOL * max(float(np.abs(vv).max()), 1e-300):
        return float(fit.x[0]), True
    return a0, False


def c1alpha_fit(u: GridFunction, scales, refine=True) -> C1AlphaFit:
    """Fit ``|u(x) - u(0) - a x_n| <= C |x|^{1+alpha}`` at a flat boundary point.

    ``a`` is the least-squares slope of ``u - u(0)`` against ``x_n`` on
    the smallest ball.  With ``refine``, when the normal ray follows
    ``a y + b y^{1+p}`` to fit precision, the fitted ``a`` replaces it; this
    removes the ``O(r^alpha)`` bias of the ball average on such fields.
    ``alpha_hat`` and ``C_hat`` come from the log-log line through the
    sup-residuals over the balls.
    """
    scales = _check_scales(scales, u.domain.h)
    if len(scales) < 3:
        raise ResolutionError("need at least three usable scales")
    u0 = _origin_value(u)
    _, y, v, rad = _inside_polar(u)
    keep = rad <= scales[-1] * (1 + 1e-12)
    y, dev, rad = y[keep], v[keep] - u0, rad[keep]
    m = rad <= scales[0] * (1 + 1e-12)
    if not m.any():
        raise ResolutionError("no nodes inside the smallest ball")
    a0 = float(np.dot(dev[m], y[m]) / np.dot(y[m], y[m]))
    a, refined = _ray_slope(u, u0, scales[-1], a0) if refine else (a0, False)
    s = _sup_residuals(dev, y, rad, a, scales)
    slope, icpt = _loglog(scales, s)
    return C1AlphaFit(a, float(slope - 1.0), float(math.exp(icpt)), scales, s.tolist(), a0, refined)


# --------------------------------------------------------------------------


@dataclass
class HopfTable:
    direction: tuple
    ts: list
    ratios: list
    anchor: tuple
    anchor_value: float

    @property
    def c_min(self):
        return min(self.ratios) / self.anchor_value

    def to_dict(self):
        return {
            "direction": list(self.direction),
            "ts": self.ts,
            "ratios": self.ratios,
            "anchor": list(self.anchor),
            "anchor_value": self.anchor_value,
            "c_min": self.c_min,
        }


def _inside_point(u: GridFunction, p):
    d = u.domain
    if d.shape is not None:
        return bool(d.shape.inside(np.array([p[0]]), np.array([p[1]]))[0])
    fx, fy = p[0] / d.h - d.i0, p[1] / d.h - d.j0
    i, j = int(math.floor(fx)), int(math.floor(fy))
    nx, ny = d.inside.shape
    if not (0 <= i < nx - 1 and 0 <= j < ny - 1):
        return False
    return bool(d.inside[i : i + 2, j : j + 2].any())


def hopf_probe(u: GridFunction, direction, ts, anchor=None, radius=None) -> HopfTable:
    """Ratios ``u(t l) / t`` along a ray from the origin, normalized by ``u``
    at ``anchor`` (default ``(R/2) e_2``).

    ``ts`` is a list of ray parameters, or ``(t_lo, t_hi, count)`` for a
    geometric grid.
    """
    l = np.asarray(direction, dtype=float)
    if not np.isclose(np.linalg.norm(l), 1.0, atol=1e-12):
        raise GeometryError("direction must be a unit vector")
    if isinstance(ts, tuple) and len(ts) == 3 and isinstance(ts[2], int):
        ts = np.geomspace(ts[0], ts[1], ts[2]).tolist()
    ts = _check_scales(ts, u.domain.h, "ray parameter")
    if anchor is None:
        if radius is None:
            shape = u.domain.shape
            radius = getattr(shape, "r", None) or (u.domain.meta.get("shape") or {}).get("r")
            if radius is None:
                raise PreconditionError("cannot infer the anchor radius; pass anchor or radius")
        anchor = (0.0, radius / 2.0)
    anchor = (float(anchor[0]), float(anchor[1]))
    if not _inside_point(u, anchor):
        raise GeometryError(f"anchor {anchor} is not inside the domain")
    anchor_value = u.at(*anchor)
    if not anchor_value > 0:
        raise PreconditionError("u must be positive at the anchor")
    ratios = []
    for t in ts:
        p = t * l
        if not _inside_point(u, p):
            raise GeometryError(f"ray point t={t:g} along {l.tolist()} leaves the domain")
        val = u.at(*p)
        if val < -1e-12 * abs(anchor_value):
            raise PreconditionError(f"u is negative ({val:g}) at t={t:g}")
        ratios.append(val / t)
    return HopfTable(tuple(l.tolist()), ts, ratios, anchor, anchor_value)


# --------------------------------------------------------------------------


def f_modulus(f: GridFunction, scales, radius=None) -> mod.Modulus:
    """``omega_f(r) = ||f||_{L^2(inside ∩ B_r)} / ||f||_{L^2(inside)}`` on the
    given scales, as a table modulus (zero modulus when ``f`` vanishes)."""
    scales = sorted(float(r) for r in scales)
    R = scales[-1] if radius is None else float(radius)
    _, _, v, rad = _inside_polar(f)
    w = v**2
    total = float(w.sum())
    if total == 0.0:
        return mod.zero(R)
    vals = [math.sqrt(float(w[rad <= r * (1 + 1e-12)].sum()) / total) for r in scales]
    vals = np.maximum.accumulate(vals)  # guard against roundoff
    return mod.table(scales, vals.tolist(), R)
