"""Pucci extremal operators and their monotone wide-stencil discretization.

For a symmetric matrix ``M`` with eigenvalues ``e_i``::

    M+(M) = Lam * sum(e_i > 0) + lam * sum(e_i < 0)
    M-(M) = lam * sum(e_i > 0) + Lam * sum(e_i < 0)

i.e. the sup / inf of ``tr(A M)`` over symmetric ``A`` with spectrum in
``[lam, Lam]``.  The discrete operator replaces the eigen-decomposition by a
max (min) over orthogonal pairs of grid directions ``(v, w)``::

    sup mode:  max_pairs  phi(d_v) + phi(d_w),   phi(d) = max(lam d, Lam d)
    inf mode:  min_pairs  psi(d_v) + psi(d_w),   psi(d) = min(lam d, Lam d)

where ``d_v = (u(x + h v) + u(x - h v) - 2 u(x)) / (h |v|)^2``.  Both
``phi`` and ``psi`` are nondecreasing, so the scheme is monotone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, NeedsBoundaryError

__all__ = [
    "Ellipticity",
    "StencilSet",
    "stencil",
    "axis_stencil",
    "pucci_sup",
    "pucci_inf",
    "eigenvalues",
    "discrete_pucci",
    "directional_values",
]


@dataclass(frozen=True)
class Ellipticity:
    lam: float = 1.0
    Lam: float = 2.0

    def __post_init__(self):
        if not (0 < self.lam <= self.Lam):
            raise DomainError(f"need 0 < lambda <= Lambda, got ({self.lam}, {self.Lam})")

    def to_dict(self):
        return {"lambda": self.lam, "Lambda": self.Lam}


def _as_symmetric(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * scale):
        raise DomainError("matrix is not symmetric")
    return 0.5 * (M + M.T)


def eigenvalues(M):
    """Eigenvalues of a symmetric matrix (closed form for 2x2)."""
    M = _as_symmetric(M)
    if M.shape == (2, 2):
        a, b, c = M[0, 0], M[0, 1], M[1, 1]
        mean = 0.5 * (a + c)
        rad = math.hypot(0.5 * (a - c), b)
        return np.array([mean - rad, mean + rad])
    return np.linalg.eigvalsh(M)


def pucci_sup(M, e: Ellipticity) -> float:
    ev = eigenvalues(M)
    return float(e.Lam * ev[ev > 0].sum() + e.lam * ev[ev < 0].sum())


def pucci_inf(M, e: Ellipticity) -> float:
    ev = eigenvalues(M)
    return float(e.lam * ev[ev > 0].sum() + e.Lam * ev[ev < 0].sum())


# --------------------------------------------------------------------------
# stencils


@dataclass(frozen=True)
class StencilSet:
    """Orthogonal pairs ``(v, w)`` of integer grid directions.

    ``w`` is ``v`` rotated by 90 degrees, so ``|v| = |w|``.  ``width`` is the
    largest component over all directions (the boundary padding needed).
    """

    pairs: tuple

    def __post_init__(self):
        if not self.pairs:
            raise DomainError("empty stencil set")
        dirs = []
        for v, w in self.pairs:
            if v[0] * w[0] + v[1] * w[1] != 0:
                raise DomainError(f"pair {v}, {w} is not orthogonal")
            dirs += [v, w]
        for i, a in enumerate(dirs):
            for b in dirs[i + 1 :]:
                if a[0] * b[1] - a[1] * b[0] == 0:
                    raise DomainError(f"directions {a} and {b} are parallel")
        axis = {(1, 0), (0, 1), (-1, 0), (0, -1)}
        if not any(set(p) <= axis for p in self.pairs):
            raise DomainError("stencil must contain the axis pair")

    @property
    def width(self):
        return max(max(abs(c) for c in v + w) for v, w in self.pairs)

    @property
    def norms_sq(self):
        return np.array([v[0] ** 2 + v[1] ** 2 for v, _ in self.pairs], dtype=float)

    def offsets(self):
        """All ``+-v`` and ``+-w`` offsets, one row per (pair, slot)."""
        out = []
        for v, w in self.pairs:
            out += [v, (-v[0], -v[1]), w, (-w[0], -w[1])]
        return np.array(out, dtype=int).reshape(len(self.pairs), 4, 2)

    def __len__(self):
        return len(self.pairs)


@lru_cache(maxsize=None)
def stencil(width: int = 3) -> StencilSet:
    """All primitive directions with max-norm ``<= width``, paired with their
    90-degree rotations (width 1: 2 pairs, width 3: 8 pairs / 16 directions)."""
    if width < 1:
        raise DomainError("stencil width must be >= 1")
    vs = []
    for a in range(1, width + 1):
        for b in range(0, width + 1):
            if math.gcd(a, b) == 1:
                vs.append((a, b))  # angles in [0, pi/2)
    vs.sort(key=lambda v: math.atan2(v[1], v[0]))
    return StencilSet(tuple((v, (-v[1], v[0])) for v in vs))


@lru_cache(maxsize=None)
def axis_stencil() -> StencilSet:
    return StencilSet((((1, 0), (0, 1)),))


# --------------------------------------------------------------------------
# discrete operator


def directional_values(values, i, j, h, S: StencilSet):
    """Second differences ``d_v, d_w`` for every pair at node ``(i, j)``.

    Returns an array of shape ``(len(S), 2)``.
    """
    nx, ny = values.shape
    c = values[i, j]
    out = np.empty((len(S), 2))
    for p, (v, w) in enumerate(S.pairs):
        n2 = (v[0] ** 2 + v[1] ** 2) * h * h
        for s, d in enumerate((v, w)):
            ip, jp, im, jm = i + d[0], j + d[1], i - d[0], j - d[1]
            if not (0 <= ip < nx and 0 <= im < nx and 0 <= jp < ny and 0 <= jm < ny):
                raise NeedsBoundaryError(f"stencil leaves the grid at node {(i, j)}")
            up, um = values[ip, jp], values[im, jm]
            if not (np.isfinite(up) and np.isfinite(um)):
                raise NeedsBoundaryError(f"neighbor of {(i, j)} carries no value")
            out[p, s] = (up + um - 2.0 * c) / n2
    return out


def discrete_pucci(u, node, e: Ellipticity, S: StencilSet, mode: str = "sup") -> float:
    """Wide-stencil Pucci operator of grid function ``u`` at ``node=(i, j)``.

    ``u`` is a :class:`~reifenberg_lab.fdsolver.GridFunction` or a tuple
    ``(values, h)`` of a 2-D array and a grid spacing.
    """
    if isinstance(u, tuple):
        values, h = u
    else:
        values, h = u.values, u.domain.h
    i, j = node
    if not np.isfinite(values[i, j]):
        raise NeedsBoundaryError(f"node {(i, j)} carries no value")
    d = directional_values(values, i, j, h, S)
    if mode == "sup":
        per_pair = np.maximum(e.lam * d, e.Lam * d).sum(axis=1)
        return float(per_pair.max())
    if mode == "inf":
        per_pair = np.minimum(e.lam * d, e.Lam * d).sum(axis=1)
        return float(per_pair.min())
    raise DomainError(f"unknown mode {mode!r}")
