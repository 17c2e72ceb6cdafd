"""Dirichlet problems for the discrete Pucci equations on 2-D grids.

Nodes sit at integer multiples of ``h`` so the origin is always a node.
A :class:`GridDomain` marks the nodes strictly inside the shape and a
boundary band: every outside node reachable by a stencil offset from an
inside node.  Band nodes take the boundary datum at their nearest boundary
point (first-order transfer, which keeps the scheme monotone).

Two solvers share the same nodal equation:

* ``howard`` (default): policy iteration.  Each step fixes, per node, the
  maximizing (minimizing) direction pair and coefficients, solves the
  resulting M-matrix system with a sparse direct solver, and re-selects.
  For a finite policy set this terminates in a handful of steps.
* ``gauss-seidel``: colored nonlinear Gauss-Seidel.  Each node update
  solves its one-point equation in closed form; colors are
  ``(i mod (w+1), j mod (w+1))`` so no two nodes of a color share a stencil.

The convergence measure is the fixed-point residual
``max_i |u_i - T_i(u)|`` where ``T_i`` is the closed-form one-point
update; it is in the units of ``u`` and independent of ``h``.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import splu
from scipy.spatial import cKDTree

from .errors import DegenerateDomainError, DomainError, GeometryError, NonConvergenceError
from .geometry import GraphDomain2D, rotation
from .pucci import Ellipticity, StencilSet, axis_stencil, stencil

__all__ = [
    "HalfDisc",
    "HalfCube",
    "GraphShape",
    "GridDomain",
    "GridFunction",
    "SolveReport",
    "build_domain",
    "solve",
    "grid_function",
    "const_bc",
    "linear_bc",
    "piecewise_bc",
    "function_bc",
    "parse_bc",
    "save_solution",
    "load_solution",
]


# --------------------------------------------------------------------------
# shapes


class HalfDisc:
    """``(B_r ∩ {x . n > 0}) - shift * n``; boundary labels ``flat``/``arc``."""

    kind = "half_disc"

    def __init__(self, r=1.0, normal=(0.0, 1.0), shift=0.0):
        n = np.asarray(normal, dtype=float)
        self.r = float(r)
        self.normal = n / np.linalg.norm(n)
        self.shift = float(shift)
        self._rot = rotation(math.atan2(self.normal[1], self.normal[0]) - math.pi / 2)

    def _local(self, x, y):
        p = np.stack([x, y], axis=-1) + self.shift * self.normal
        return p @ self._rot  # rotate n onto e2

    def _global(self, z):
        return z @ self._rot.T - self.shift * self.normal

    def inside(self, x, y):
        z = self._local(x, y)
        return (z[..., 0] ** 2 + z[..., 1] ** 2 < self.r**2) & (z[..., 1] > 0)

    def project(self, x, y, h):
        z = self._local(np.asarray(x, float), np.asarray(y, float))
        r = self.r
        flat = np.column_stack([np.clip(z[:, 0], -r, r), np.zeros(len(z))])
        nz = np.hypot(z[:, 0], z[:, 1])
        arc = np.where(
            (z[:, 1] >= 0)[:, None] & (nz > 0)[:, None],
            r * z / np.where(nz > 0, nz, 1.0)[:, None],
            np.column_stack([np.where(z[:, 0] >= 0, r, -r), np.zeros(len(z))]),
        )
        arc[nz == 0] = (0.0, r)
        d_flat = np.hypot(*(z - flat).T)
        d_arc = np.hypot(*(z - arc).T)
        use_arc = d_arc < d_flat
        pts = np.where(use_arc[:, None], arc, flat)
        return self._global(pts), np.where(use_arc, "arc", "flat")

    def bbox(self):
        c = -self.shift * self.normal
        return (c[0] - self.r, c[0] + self.r, c[1] - self.r, c[1] + self.r)

    def describe(self):
        return {"kind": self.kind, "r": self.r, "normal": self.normal.tolist(), "shift": self.shift}


class HalfCube:
    """``(-r, r) x (0, r)``; labels ``bottom``, ``side``, ``top``."""

    kind = "half_cube"

    def __init__(self, r=1.0):
        self.r = float(r)

    def inside(self, x, y):
        return (np.abs(x) < self.r) & (y > 0) & (y < self.r)

    def project(self, x, y, h):
        r = self.r
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        xc, yc = np.clip(x, -r, r), np.clip(y, 0, r)
        cands = np.stack(
            [
                np.column_stack([xc, np.zeros_like(x)]),
                np.column_stack([np.full_like(x, -r), yc]),
                np.column_stack([np.full_like(x, r), yc]),
                np.column_stack([xc, np.full_like(x, r)]),
            ]
        )
        d = np.hypot(cands[..., 0] - x, cands[..., 1] - y)
        k = np.argmin(d, axis=0)  # ties go to bottom, then sides
        labels = np.array(["bottom", "side", "side", "top"])[k]
        return cands[k, np.arange(len(x))], labels

    def bbox(self):
        return (-self.r, self.r, 0.0, self.r)

    def describe(self):
        return {"kind": self.kind, "r": self.r}


class GraphShape:
    """``Ω ∩ B_r`` for a :class:`GraphDomain2D`; labels ``graph``/``arc``."""

    kind = "graph"

    def __init__(self, dom: GraphDomain2D, r=None):
        self.dom = dom
        self.r = float(dom.outer_radius if r is None else r)
        if self.r > dom.outer_radius * (1 + 1e-12):
            raise DomainError("graph shape radius exceeds the domain radius")

    def inside(self, x, y):
        p = np.stack([x, y], axis=-1)
        shp = p.shape[:-1]
        flat = p.reshape(-1, 2)
        ok = (flat[:, 0] ** 2 + flat[:, 1] ** 2 < self.r**2) & self.dom.contains(flat)
        return ok.reshape(shp)

    def boundary_samples(self, h):
        dom, r = self.dom, self.r
        rho = r / dom.scale
        spacing = h / 8.0
        curve = dom.boundary_curve(rho, max(64, int(math.ceil(2 * rho / (spacing / dom.scale)))))
        n_arc = max(256, int(math.ceil(2 * math.pi * r / spacing)))
        th = np.linspace(0, 2 * np.pi, n_arc, endpoint=False)
        arc = rho * np.column_stack([np.cos(th), np.sin(th)])
        arc = arc[arc[:, 1] >= dom.f(arc[:, 0])]
        pts = np.vstack([dom.to_global(curve), dom.to_global(arc)])
        labels = np.array(["graph"] * len(curve) + ["arc"] * len(arc))
        return pts, labels

    def project(self, x, y, h):
        pts, labels = self.boundary_samples(h)
        _, k = cKDTree(pts).query(np.column_stack([x, y]))
        return pts[k], labels[k]

    def bbox(self):
        return (-self.r, self.r, -self.r, self.r)

    def describe(self):
        return {"kind": self.kind, "r": self.r, "domain": self.dom.describe()}


# --------------------------------------------------------------------------
# grids


@dataclass
class GridDomain:
    h: float
    i0: int
    j0: int
    inside: np.ndarray
    band: np.ndarray
    band_points: np.ndarray
    band_labels: np.ndarray
    stencil: StencilSet
    shape: object = None
    meta: dict = field(default_factory=dict)

    @property
    def x(self):
        return (self.i0 + np.arange(self.inside.shape[0])) * self.h

    @property
    def y(self):
        return (self.j0 + np.arange(self.inside.shape[1])) * self.h

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def node_count(self):
        return int(self.inside.sum())

    def node(self, x, y):
        """Array index of the grid node at ``(x, y)`` (must be a node)."""
        i = int(round(x / self.h)) - self.i0
        j = int(round(y / self.h)) - self.j0
        if abs((i + self.i0) * self.h - x) > 1e-9 * self.h or abs((j + self.j0) * self.h - y) > 1e-9 * self.h:
            raise DomainError(f"({x}, {y}) is not a grid node")
        if not (0 <= i < self.inside.shape[0] and 0 <= j < self.inside.shape[1]):
            raise DomainError(f"({x}, {y}) lies outside the grid box")
        return i, j

    @property
    def origin(self):
        return self.node(0.0, 0.0)

    def header(self):
        nx, ny = self.inside.shape
        return {
            "h": self.h,
            "i0": self.i0,
            "j0": self.j0,
            "nx": nx,
            "ny": ny,
            "bbox": [float(self.x[0]), float(self.x[-1]), float(self.y[0]), float(self.y[-1])],
            "stencil_width": self.stencil.width,
            "shape": self.shape.describe() if self.shape is not None else self.meta.get("shape"),
        }


def _structure(S: StencilSet):
    w = S.width
    st = np.zeros((2 * w + 1, 2 * w + 1), dtype=bool)
    st[w, w] = True
    for row in S.offsets().reshape(-1, 2):
        st[w + row[0], w + row[1]] = True
    return st


def build_domain(shape, h: float, S: StencilSet | None = None) -> GridDomain:
    """Grid the shape at spacing ``h`` with a boundary band wide enough for ``S``."""
    S = stencil(3) if S is None else S
    if not h > 0:
        raise DomainError("h must be positive")
    xmin, xmax, ymin, ymax = shape.bbox()
    pad = S.width + 1
    i_lo, i_hi = math.floor(xmin / h + 1e-9) - pad, math.ceil(xmax / h - 1e-9) + pad
    j_lo, j_hi = math.floor(ymin / h + 1e-9) - pad, math.ceil(ymax / h - 1e-9) + pad
    X, Y = np.meshgrid(np.arange(i_lo, i_hi + 1) * h, np.arange(j_lo, j_hi + 1) * h, indexing="ij")
    inside = np.asarray(shape.inside(X, Y), dtype=bool)
    if not inside.any():
        raise DegenerateDomainError("no grid node lies inside the shape")
    _, ncomp = ndimage.label(inside)
    if ncomp != 1:
        raise DegenerateDomainError(f"inside set has {ncomp} components")
    band = ndimage.binary_dilation(inside, structure=_structure(S)) & ~inside
    bi, bj = np.nonzero(band)
    pts, labels = shape.project(X[bi, bj], Y[bi, bj], h)
    return GridDomain(h, i_lo, j_lo, inside, band, np.asarray(pts), np.asarray(labels), S, shape)


@dataclass
class GridFunction:
    """Values on a :class:`GridDomain` (NaN off the inside set and band)."""

    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        known = self.domain.inside | self.domain.band
        if not np.all(np.isfinite(self.values[known])):
            raise DomainError("grid function has non-finite values on known nodes")

    def scaled(self, c):
        return GridFunction(self.domain, self.values * c)

    def __add__(self, other):
        return GridFunction(self.domain, self.values + other.values)

    def __sub__(self, other):
        return GridFunction(self.domain, self.values - other.values)

    def at_node(self, x, y):
        return float(self.values[self.domain.node(x, y)])

    def at(self, x, y):
        """Bilinear interpolation at an arbitrary point."""
        d = self.domain
        fx, fy = x / d.h - d.i0, y / d.h - d.j0
        i, j = int(math.floor(fx)), int(math.floor(fy))
        nx, ny = self.values.shape
        if not (0 <= i < nx - 1 and 0 <= j < ny - 1):
            raise GeometryError(f"({x}, {y}) outside the grid box")
        tx, ty = fx - i, fy - j
        corners = self.values[i : i + 2, j : j + 2]
        weights = np.array([[(1 - tx) * (1 - ty), (1 - tx) * ty], [tx * (1 - ty), tx * ty]])
        used = weights > 0
        if not np.all(np.isfinite(corners[used])):
            raise GeometryError(f"({x}, {y}) is not surrounded by known nodes")
        return float(np.sum(np.where(used, corners, 0.0) * weights))

    def inside_points(self):
        d = self.domain
        X, Y = d.mesh()
        m = d.inside
        return X[m], Y[m], self.values[m]


def grid_function(domain: GridDomain, values) -> GridFunction:
    """Sample a callable ``values(x, y)`` (or a constant) on inside and band nodes."""
    known = domain.inside | domain.band
    out = np.full(domain.inside.shape, np.nan)
    X, Y = domain.mesh()
    if callable(values):
        out[known] = values(X[known], Y[known])
    else:
        out[known] = float(values)
    return GridFunction(domain, out)


# --------------------------------------------------------------------------
# boundary data: callables (x, y, labels) -> values


def const_bc(c):
    def g(x, y, labels):
        return np.full(np.shape(x), float(c))

    g.spec = f"const:{c}"
    g.at_node = True
    return g


def linear_bc(a=0.0, b=0.0, c=0.0):
    """``g = a + b x + c y``."""

    def g(x, y, labels):
        return a + b * np.asarray(x) + c * np.asarray(y)

    g.spec = f"linear:{a},{b},{c}"
    g.at_node = True
    return g


def piecewise_bc(mapping, default=None):
    """Constant per boundary label, e.g. ``{"flat": 0, "arc": 1}``."""

    def g(x, y, labels):
        labels = np.asarray(labels)
        out = np.full(labels.shape, np.nan if default is None else float(default))
        for k, v in mapping.items():
            out[labels == k] = float(v)
        if np.isnan(out).any():
            missing = sorted(set(labels[np.isnan(out)].tolist()))
            raise DomainError(f"no boundary value for labels {missing}")
        return out

    g.spec = ",".join(f"{k}={v}" for k, v in mapping.items()) + ("" if default is None else f",*={default}")
    return g


def function_bc(fn):
    def g(x, y, labels):
        return np.asarray(fn(np.asarray(x), np.asarray(y)), dtype=float)

    g.spec = getattr(fn, "__name__", "function")
    g.at_node = True
    return g


def parse_bc(spec: str):
    """``linear-y``, ``zero``, ``const:<v>``, ``barrier``, or ``label=v,...``
    (``*=v`` sets a default)."""
    s = spec.strip()
    if s in ("linear-y", "y"):
        return linear_bc(c=1.0)
    if s in ("zero", "0"):
        return const_bc(0.0)
    if s.startswith("const:"):
        return const_bc(float(s.split(":", 1)[1]))
    if s == "barrier":
        return piecewise_bc({"bottom": 0.0, "side": 0.0, "top": 1.0})
    if "=" in s:
        mapping, default = {}, None
        for item in s.split(","):
            k, _, v = item.partition("=")
            if k.strip() == "*":
                default = float(v)
            else:
                mapping[k.strip()] = float(v)
        return piecewise_bc(mapping, default)
    raise DomainError(f"cannot parse boundary spec {spec!r}")


# --------------------------------------------------------------------------
# solver


@dataclass
class SolveReport:
    iterations: int
    residual: float
    history: list
    method: str
    mode: str
    nodes: int
    elapsed: float = field(default=0.0, compare=False)

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "history": self.history,
            "method": self.method,
            "mode": self.mode,
            "nodes": self.nodes,
        }


class _Problem:
    """Index bookkeeping shared by both solvers."""

    def __init__(self, dom: GridDomain, mode, e: Ellipticity, f, g):
        if mode not in ("sup", "inf", "laplace"):
            raise DomainError(f"unknown mode {mode!r}")
        self.mode, self.e, self.dom = mode, e, dom
        S = axis_stencil() if mode == "laplace" else dom.stencil
        if S.width > dom.stencil.width:
            raise DomainError("operator stencil wider than the domain band")
        self.S = S
        nx, ny = dom.inside.shape
        ii, jj = np.nonzero(dom.inside)
        self.N = len(ii)
        self.flat_inside = ii * ny + jj
        unk = np.full(nx * ny, -1, dtype=np.int64)
        unk[self.flat_inside] = np.arange(self.N)
        off = S.offsets()  # (P, 4, 2)
        self.nb_flat = (ii[None, None, :] + off[:, :, 0, None]) * ny + (jj[None, None, :] + off[:, :, 1, None])
        self.nb_unk = unk[self.nb_flat]
        self.n2h2 = S.norms_sq * dom.h**2  # (P,)

        base = np.full(nx * ny, np.nan)
        if dom.band.any():
            bi, bj = np.nonzero(dom.band)
            if not callable(g):
                gvals = float(g)
            elif getattr(g, "at_node", False):
                # data given on a neighborhood: sample it at the band node itself
                X, Y = dom.mesh()
                gvals = g(X[bi, bj], Y[bi, bj], dom.band_labels)
            else:
                gvals = g(dom.band_points[:, 0], dom.band_points[:, 1], dom.band_labels)
            base[bi * ny + bj] = gvals
        self.base = base
        if callable(f):
            X, Y = dom.mesh()
            self.f = np.asarray(f(X[dom.inside], Y[dom.inside]), dtype=float)
        else:
            fa = np.asarray(f, dtype=float)
            self.f = np.full(self.N, float(fa)) if fa.ndim == 0 else fa[dom.inside]
        self.g_scale = float(np.nanmax(np.abs(base))) if dom.band.any() else 0.0

    def full(self, u):
        U = self.base.copy()
        U[self.flat_inside] = u
        return U

    def sums(self, U, idx=None):
        nb = self.nb_flat if idx is None else self.nb_flat[:, :, idx]
        vals = U[nb]
        return vals[:, 0] + vals[:, 1], vals[:, 2] + vals[:, 3]  # (P, n) each

    def coefficient_sets(self):
        e = self.e
        if self.mode == "laplace":
            return [(e.lam, e.lam)]
        return [(e.lam, e.lam), (e.lam, e.Lam), (e.Lam, e.lam), (e.Lam, e.Lam)]

    def one_point(self, U, idx=None):
        """Closed-form nodal update ``T_i(u)``."""
        Sv, Sw = self.sums(U, idx)
        f = self.f if idx is None else self.f[idx]
        rhs = self.n2h2[:, None] * f[None, :]
        best = None
        for av, aw in self.coefficient_sets():
            cand = (av * Sv + aw * Sw - rhs) / (2.0 * (av + aw))
            cand = cand.max(axis=0) if self.mode == "sup" else cand.min(axis=0)
            if best is None:
                best = cand
            else:
                best = np.maximum(best, cand) if self.mode == "sup" else np.minimum(best, cand)
        return best

    def residual(self, u):
        return float(np.max(np.abs(u - self.one_point(self.full(u))))) if self.N else 0.0

    def policy(self, u, prev=None):
        """Per-node (pair, cv, cw) optimizing the operator at ``u``."""
        e, N = self.e, self.N
        if self.mode == "laplace":
            return np.zeros(N, dtype=np.int64), np.full(N, e.lam), np.full(N, e.lam)
        U = self.full(u)
        Sv, Sw = self.sums(U)
        dv = (Sv - 2 * u[None, :]) / self.n2h2[:, None]
        dw = (Sw - 2 * u[None, :]) / self.n2h2[:, None]
        if self.mode == "sup":
            val = np.maximum(e.lam * dv, e.Lam * dv) + np.maximum(e.lam * dw, e.Lam * dw)
            p = np.argmax(val, axis=0)
            hi, lo = e.Lam, e.lam
        else:
            val = np.minimum(e.lam * dv, e.Lam * dv) + np.minimum(e.lam * dw, e.Lam * dw)
            p = np.argmin(val, axis=0)
            hi, lo = e.lam, e.Lam
        cols = np.arange(N)
        if prev is not None:
            # keep the previous pair on (near) ties so the iteration cannot cycle
            pp = prev[0]
            scale = 1e-12 * (np.abs(val[p, cols]) + 1.0 / self.dom.h**2 * max(self.g_scale, 1e-300))
            keep = np.abs(val[pp, cols] - val[p, cols]) <= scale
            p = np.where(keep, pp, p)
        dvp, dwp = dv[p, cols], dw[p, cols]
        cv = np.where(dvp > 0, hi, lo)
        cw = np.where(dwp > 0, hi, lo)
        return p, cv, cw

    def linear_solve(self, pol):
        p, cv, cw = pol
        N = self.N
        cols_n = np.arange(N)
        coef = [cv, cv, cw, cw]
        rows = [cols_n]
        cols = [cols_n]
        data = [2.0 * (cv + cw)]
        rhs = -self.n2h2[p] * self.f
        for s in range(4):
            nbu = self.nb_unk[p, s, cols_n]
            nbf = self.nb_flat[p, s, cols_n]
            known = nbu < 0
            rhs = rhs + np.where(known, coef[s] * np.nan_to_num(self.base[nbf]), 0.0)
            m = ~known
            rows.append(cols_n[m])
            cols.append(nbu[m])
            data.append(-coef[s][m])
        A = sparse.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
        )
        return splu(A.tocsc(), permc_spec="COLAMD").solve(rhs)


def _default_tol(prob):
    scale = max(prob.g_scale, float(np.max(np.abs(prob.f))) if prob.N else 0.0, 1.0)
    return 1e-8 * scale


def solve(
    dom: GridDomain,
    mode: str = "sup",
    e: Ellipticity = Ellipticity(),
    f=0.0,
    g=0.0,
    tol: float | None = None,
    max_iter: int | None = None,
    method: str = "howard",
    damping: float = 1.0,
    u0=None,
):
    """Solve ``F[u] = f`` in the domain with ``u = g`` on the band.

    ``mode`` is ``sup`` (Pucci M+), ``inf`` (M-) or ``laplace`` (lambda times
    the 5-point Laplacian).  ``g`` is a constant or a callable
    ``g(x, y, labels)``; ``f`` a constant, a full-grid array, or a callable
    ``f(x, y)``.  Returns ``(GridFunction, SolveReport)``.
    """
    t_start = time.perf_counter()
    prob = _Problem(dom, mode, e, f, g)
    tol = _default_tol(prob) if tol is None else tol
    if not tol > 0:
        raise DomainError("tol must be positive")
    if prob.N == 0:
        raise DegenerateDomainError("no unknowns")
    if u0 is None:
        u = np.zeros(prob.N)
    else:
        u0 = u0.values if isinstance(u0, GridFunction) else np.asarray(u0)
        u = np.array(u0[dom.inside], dtype=float)
    history = []
    if method == "howard":
        max_iter = 100 if max_iter is None else max_iter
        pol = None
        for it in range(1, max_iter + 1):
            new = prob.policy(u, pol)
            same = pol is not None and all(np.array_equal(a, b) for a, b in zip(new, pol))
            pol = new
            if not same:
                u = prob.linear_solve(pol)
            res = prob.residual(u)
            history.append(res)
            if res <= tol:
                break
            if same:
                raise NonConvergenceError(
                    f"policy iteration stalled at residual {res:.3e} > tol {tol:.3e}", history
                )
        else:
            raise NonConvergenceError(f"no convergence in {max_iter} policy iterations", history)
    elif method in ("gauss-seidel", "gs"):
        method = "gauss-seidel"
        max_iter = 100_000 if max_iter is None else max_iter
        w = prob.S.width
        nx, ny = dom.inside.shape
        ii, jj = np.divmod(prob.flat_inside, ny)
        color = ((ii + dom.i0) % (w + 1)) * (w + 1) + (jj + dom.j0) % (w + 1)
        groups = [np.nonzero(color == c)[0] for c in range((w + 1) ** 2)]
        groups = [gidx for gidx in groups if len(gidx)]
        U = prob.full(u)
        for it in range(1, max_iter + 1):
            order = groups if it % 2 else groups[::-1]
            for idx in order:
                T = prob.one_point(U, idx)
                tgt = prob.flat_inside[idx]
                U[tgt] += damping * (T - U[tgt])
            u = U[prob.flat_inside]
            res = prob.residual(u)
            history.append(res)
            if res <= tol:
                break
        else:
            raise NonConvergenceError(f"no convergence in {max_iter} sweeps", history)
    else:
        raise DomainError(f"unknown method {method!r}")
    values = np.full(dom.inside.shape, np.nan)
    values.ravel()[:] = prob.full(u)
    report = SolveReport(it, history[-1], history, method, mode, prob.N, time.perf_counter() - t_start)
    return GridFunction(dom, values), report


# --------------------------------------------------------------------------
# serialization


def save_solution(u: GridFunction, csv_path, json_path=None, extra=None):
    """Write ``x, y, value, inside`` rows plus a JSON header."""
    d = u.domain
    X, Y = d.mesh()
    known = d.inside | d.band
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "value", "inside"])
        for x, y, v, ins in zip(X[known], Y[known], u.values[known], d.inside[known]):
            wr.writerow([repr(float(x)), repr(float(y)), repr(float(v)), int(ins)])
    header = d.header()
    header.update(extra or {})
    json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
    json_path.write_text(json.dumps(header, indent=2, sort_keys=True))
    return csv_path, json_path


def load_solution(csv_path, json_path=None) -> GridFunction:
    csv_path = Path(csv_path)
    json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
    hd = json.loads(json_path.read_text())
    h, i0, j0, nx, ny = hd["h"], hd["i0"], hd["j0"], hd["nx"], hd["ny"]
    values = np.full((nx, ny), np.nan)
    inside = np.zeros((nx, ny), dtype=bool)
    band = np.zeros((nx, ny), dtype=bool)
    with csv_path.open(newline="") as fh:
        rd = csv.DictReader(fh)
        for row in rd:
            i = int(round(float(row["x"]) / h)) - i0
            j = int(round(float(row["y"]) / h)) - j0
            values[i, j] = float(row["value"])
            if int(row["inside"]):
                inside[i, j] = True
            else:
                band[i, j] = True
    S = stencil(hd.get("stencil_width", 3)) if hd.get("stencil_width", 3) > 1 else stencil(1)
    dom = GridDomain(h, i0, j0, inside, band, np.full((band.sum(), 2), np.nan), np.array([""] * band.sum()), S, None, {"shape": hd.get("shape")})
    return GridFunction(dom, values)
