"""Graph domains, supporting lines, and Reifenberg certificates in 2-D.

A :class:`GraphDomain2D` is ``s * Rot(phi) (B_R ∩ {y > f(x)})`` for a
profile ``f`` with ``f(0) = 0``; the boundary point of interest is the
origin.  At each scale ``r`` we fit a unit normal ``n`` minimizing the
one-sided defect

    exterior:  -min { x . n : x in Ω ∩ B_r }
    interior:   max { x . n : x in Ωᶜ ∩ B_r }

and report ``slack = defect / r``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import modulus as mod
from .errors import DegenerateDomainError, DomainError, PreconditionError

__all__ = [
    "GraphDomain2D",
    "HyperplaneFrame",
    "ReifenbergCertificate",
    "LimitNormal",
    "flat",
    "tilted",
    "log_example",
    "power_cusp",
    "profile_from_csv",
    "builtin_domain",
    "fit_supporting_plane",
    "check_reifenberg",
    "limit_normal",
    "rotation",
]

CURVE_SAMPLES = 4096
FILL_SAMPLES = 128
FLAT_TOL = 1e-9
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def rotation(phi):
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class GraphDomain2D:
    """``scale * Rot(rotation) (B_R ∩ {y > f(x)})`` with ``f(0) = 0``."""

    profile: Callable
    radius: float
    name: str = "custom"
    rotation: float = 0.0
    scale: float = 1.0
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if not self.radius > 0 or not self.scale > 0:
            raise DomainError("radius and scale must be positive")
        if self.check:
            f0 = float(self.profile(np.array([0.0]))[0])
            if abs(f0) > 1e-12:
                raise DomainError(f"profile must vanish at 0, got f(0)={f0}")
            if not _looks_continuous(self.profile, self.radius):
                raise DomainError("profile has a jump on [-R, R]")

    @property
    def outer_radius(self):
        return self.radius * self.scale

    def rotated(self, phi):
        return GraphDomain2D(self.profile, self.radius, self.name, self.rotation + phi, self.scale, False)

    def dilated(self, s):
        return GraphDomain2D(self.profile, self.radius, self.name, self.rotation, self.scale * s, False)

    # coordinates --------------------------------------------------------
    def to_local(self, pts):
        pts = np.asarray(pts, dtype=float)
        return pts @ rotation(self.rotation) / self.scale  # Rot(-phi) p / s

    def to_global(self, q):
        return (np.asarray(q, dtype=float) @ rotation(self.rotation).T) * self.scale

    def f(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, -self.radius, self.radius)
        return np.asarray(self.profile(xc), dtype=float)

    def contains(self, pts):
        """Membership in the open set Ω (points as an ``(N, 2)`` array)."""
        q = self.to_local(pts)
        r2 = q[..., 0] ** 2 + q[..., 1] ** 2
        ok = r2 < self.radius**2
        out = np.zeros(ok.shape, dtype=bool)
        out[ok] = q[ok][..., 1] > self.f(q[ok][..., 0])
        return out

    def boundary_curve(self, rho, count=CURVE_SAMPLES):
        """Local-coordinate graph points with ``|x| <= rho``."""
        s = np.linspace(-rho, rho, count)
        pts = np.column_stack([s, self.f(s)])
        return pts[np.hypot(pts[:, 0], pts[:, 1]) <= rho * (1 + 1e-12)]

    def sample(self, r, side, curve=CURVE_SAMPLES, fill=FILL_SAMPLES):
        """Points of Ω̄ ∩ B_r (exterior) or Ωᶜ ∩ B_r (interior), global coords."""
        rho = r / self.scale
        if rho > self.radius * (1 + 1e-12):
            raise DomainError(f"scale {r} exceeds domain radius {self.outer_radius}")
        parts = [self.boundary_curve(rho, curve)]
        th = np.linspace(0.0, 2.0 * np.pi, curve, endpoint=False)
        arc = rho * np.column_stack([np.cos(th), np.sin(th)])
        g = np.linspace(-rho, rho, fill)
        X, Y = np.meshgrid(g, g, indexing="ij")
        grid = np.column_stack([X.ravel(), Y.ravel()])
        grid = grid[grid[:, 0] ** 2 + grid[:, 1] ** 2 <= rho * rho]
        for cloud in (arc, grid):
            above = cloud[:, 1] > self.f(cloud[:, 0])
            parts.append(cloud[above] if side == "exterior" else cloud[~above])
        pts = np.vstack(parts)
        if len(pts) == 0:
            raise DegenerateDomainError(f"no sample points at scale {r}")
        return self.to_global(pts)

    def describe(self):
        return {"name": self.name, "radius": self.radius, "rotation": self.rotation, "scale": self.scale}


def _looks_continuous(f, R, n=4001):
    """A jump survives refinement; a continuous profile's increments shrink."""

    def max_jump(k):
        x = np.linspace(-R, R, k)
        return float(np.max(np.abs(np.diff(np.asarray(f(x), dtype=float)))))

    coarse, fine = max_jump(n), max_jump(4 * n - 3)
    return not (fine > 1e-9 and fine >= 0.9 * coarse)


# built-in profiles ------------------------------------------------------


def flat(radius=1.0):
    return GraphDomain2D(lambda x: np.zeros_like(np.asarray(x, dtype=float)), radius, "flat")


def tilted(slope=1.0, radius=1.0):
    return GraphDomain2D(lambda x: slope * np.asarray(x, dtype=float), radius, f"tilted({slope})")


def _log_profile(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    nz = x != 0
    out[nz] = x[nz] / np.log(np.abs(x[nz]))
    return out


def log_example(radius=0.5):
    """``f(x) = x / ln|x|`` on ``[-1/2, 1/2]``: Reifenberg C^{1,Dini} at 0
    with modulus ``1/ln^2 r`` although ``1/|ln r|`` (not Dini) is the best
    modulus for a single fixed tangent line."""
    if radius > 0.5:
        raise DomainError("the log profile is only used on |x| <= 1/2")
    return GraphDomain2D(_log_profile, radius, "log_example")


def power_cusp(alpha=0.5, radius=1.0):
    """``f(x) = |x|**alpha``; for ``alpha < 1`` the domain is an inward cusp."""
    return GraphDomain2D(lambda x: np.abs(np.asarray(x, dtype=float)) ** alpha, radius, f"power_cusp({alpha})")


def profile_from_csv(path, radius=None):
    """Profile tabulated as CSV rows ``(x, f(x))``, linearly interpolated."""
    xs, fs = [], []
    with Path(path).open(newline="") as fh:
        for row in csv.reader(fh):
            try:
                xs.append(float(row[0]))
                fs.append(float(row[1]))
            except (ValueError, IndexError):
                continue
    xs, fs = np.array(xs), np.array(fs)
    order = np.argsort(xs)
    xs, fs = xs[order], fs[order]
    R = float(min(-xs[0], xs[-1])) if radius is None else float(radius)
    return GraphDomain2D(lambda x: np.interp(x, xs, fs), R, Path(path).stem)


def builtin_domain(name):
    """Resolve ``flat``, ``tilted:<slope>``, ``log_example``,
    ``power_cusp:<alpha>``, optionally suffixed ``@<angle>`` (rotation in
    radians), or a CSV path."""
    name, _, rot = name.partition("@")
    key, _, arg = name.replace("-", "_").partition(":")
    if key == "flat":
        dom = flat()
    elif key == "tilted":
        dom = tilted(float(arg) if arg else 1.0)
    elif key in ("log_example", "log", "log_domain"):
        dom = log_example()
    elif key == "power_cusp":
        dom = power_cusp(float(arg) if arg else 0.5)
    elif Path(name).exists():
        dom = profile_from_csv(name)
    else:
        raise DomainError(f"unknown domain {name!r}")
    return dom.rotated(float(rot)) if rot else dom


# --------------------------------------------------------------------------
# frames


@dataclass
class HyperplaneFrame:
    scale: float
    normal: np.ndarray
    slack: float

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=float)
        if not self.scale > 0 or abs(np.linalg.norm(self.normal) - 1.0) > 1e-12:
            raise DomainError("frame needs scale > 0 and a unit normal")

    def to_dict(self):
        return {"scale": self.scale, "normal": [float(c) for c in self.normal], "slack": self.slack}

    @classmethod
    def from_dict(cls, d):
        n = np.asarray(d["normal"], dtype=float)
        return cls(d["scale"], n / np.linalg.norm(n), d["slack"])


def _defect(pts, phi, side):
    proj = pts @ np.array([math.cos(phi), math.sin(phi)])
    return -proj.min() if side == "exterior" else proj.max()


def _side(side):
    side = {"ext": "exterior", "int": "interior"}.get(side, side)
    if side not in ("exterior", "interior"):
        raise DomainError(f"side must be exterior or interior, got {side!r}")
    return side


def fit_supporting_plane(dom: GraphDomain2D, r: float, side="exterior", samples=720) -> HyperplaneFrame:
    """Defect-minimizing unit normal at scale ``r``: coarse sweep of
    ``samples`` angles, then golden-section refinement around the best."""
    side = _side(side)
    if samples < 64:
        raise DomainError("need at least 64 sweep angles")
    if not 0 < r <= dom.outer_radius * (1 + 1e-12):
        raise DomainError(f"scale {r} outside (0, {dom.outer_radius}]")
    pts = dom.sample(r, side)
    phis = 2.0 * np.pi * np.arange(samples) / samples
    N = np.column_stack([np.cos(phis), np.sin(phis)])
    proj = pts @ N.T
    coarse = -proj.min(axis=0) if side == "exterior" else proj.max(axis=0)
    k = int(np.argmin(coarse))
    step = 2.0 * np.pi / samples
    a, b = phis[k] - step, phis[k] + step
    c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    fc, fd = _defect(pts, c, side), _defect(pts, d, side)
    while b - a > 1e-12:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = _defect(pts, c, side)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = _defect(pts, d, side)
    phi = 0.5 * (a + b)
    best = _defect(pts, phi, side)
    if coarse[k] < best:  # golden step lost to the sweep (non-unimodal)
        phi, best = phis[k], coarse[k]
    n = np.array([math.cos(phi), math.sin(phi)])
    return HyperplaneFrame(r, n, float(best) / r)


# --------------------------------------------------------------------------
# certificates


@dataclass
class ReifenbergCertificate:
    side: str
    eta: float
    frames: list
    omegas: list
    passes: list
    drifts: list
    fitted_K: float
    modulus: mod.Modulus
    k_min: int = 0
    domain: dict = field(default_factory=dict)
    K_theta: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.passes) and math.isfinite(self.fitted_K)

    @property
    def scales(self):
        return [fr.scale for fr in self.frames]

    def frame_at(self, r, rtol=1e-9):
        for fr in self.frames:
            if abs(fr.scale - r) <= rtol * r:
                return fr
        return None

    def to_dict(self):
        return {
            "side": self.side,
            "eta": self.eta,
            "k_min": self.k_min,
            "passed": self.passed,
            "fitted_K": self.fitted_K if math.isfinite(self.fitted_K) else None,
            "frames": [fr.to_dict() for fr in self.frames],
            "omegas": self.omegas,
            "passes": self.passes,
            "drifts": self.drifts,
            "modulus": self.modulus.to_dict(),
            "domain": self.domain,
            "K_theta": {str(k): v for k, v in self.K_theta.items()},
        }

    @classmethod
    def from_dict(cls, d):
        K = d.get("fitted_K")
        return cls(
            side=d["side"],
            eta=d["eta"],
            frames=[HyperplaneFrame.from_dict(f) for f in d["frames"]],
            omegas=list(d["omegas"]),
            passes=list(d["passes"]),
            drifts=list(d["drifts"]),
            fitted_K=math.inf if K is None else float(K),
            modulus=mod.Modulus.from_dict(d["modulus"]),
            k_min=d.get("k_min", 0),
            domain=d.get("domain", {}),
            K_theta={float(k): v for k, v in d.get("K_theta", {}).items()},
        )


def _ratio(drift, omega):
    if omega > 0:
        return drift / omega
    return 0.0 if drift <= FLAT_TOL else math.inf


def check_reifenberg(
    dom: GraphDomain2D,
    m: mod.Modulus,
    side="exterior",
    eta=0.5,
    k_max=10,
    k_min=0,
    samples=720,
    thetas=None,
) -> ReifenbergCertificate:
    """Fit frames at ``r_k = R eta^k`` (``k_min <= k <= k_max``) and test
    ``slack_k <= omega(r_k)``; ``fitted_K = max_k |n_k - n_{k+1}| / omega(r_k)``.

    ``thetas`` optionally requests ``K(theta)`` for other ratios, measured
    as ``max_k |n(r_k) - n(theta r_k)| / omega(r_k)``.
    """
    side = _side(side)
    if not 0 < eta < 1:
        raise DomainError("eta must lie in (0, 1)")
    if k_max < 4:
        raise DomainError("k_max must be at least 4")
    R = dom.outer_radius
    radii = [R * eta**k for k in range(k_min, k_max + 1)]
    if radii[0] > m.domain_radius * (1 + 1e-12):
        raise DomainError(f"modulus defined on (0, {m.domain_radius}] but largest scale is {radii[0]}")
    frames = [fit_supporting_plane(dom, r, side, samples) for r in radii]
    omegas = [m.eval(r) for r in radii]
    passes = [
        fr.slack <= om if om > 0 else fr.slack <= FLAT_TOL for fr, om in zip(frames, omegas)
    ]
    drifts = [float(np.linalg.norm(a.normal - b.normal)) for a, b in zip(frames, frames[1:])]
    ratios = [_ratio(d, om) for d, om in zip(drifts, omegas)]
    K_theta = {}
    for theta in thetas or ():
        vals = []
        for fr, om in zip(frames, omegas):
            other = fit_supporting_plane(dom, theta * fr.scale, side, samples)
            vals.append(_ratio(float(np.linalg.norm(fr.normal - other.normal)), om))
        K_theta[float(theta)] = max(vals)
    return ReifenbergCertificate(
        side=side,
        eta=eta,
        frames=frames,
        omegas=omegas,
        passes=passes,
        drifts=drifts,
        fitted_K=max(ratios) if ratios else 0.0,
        modulus=m,
        k_min=k_min,
        domain=dom.describe(),
        K_theta=K_theta,
    )


@dataclass
class LimitNormal:
    normal: np.ndarray
    cauchy_tail: list  # (k, sup_l |n_k - n_{k+l}|, bound)

    @property
    def within_bound(self):
        return all(sup <= bound + 1e-12 for _, sup, bound in self.cauchy_tail)

    def to_dict(self):
        return {
            "normal": [float(c) for c in self.normal],
            "cauchy_tail": [list(t) for t in self.cauchy_tail],
            "within_bound": self.within_bound,
        }


def limit_normal(cert: ReifenbergCertificate) -> LimitNormal:
    """Deepest fitted normal, with the Cauchy tail checked against
    ``K * sum_{i >= k} omega(r_i)``."""
    if not cert.passed:
        raise PreconditionError("certificate did not pass")
    normals = [fr.normal for fr in cert.frames]
    tail = []
    for k in range(len(normals) - 1):
        sup = max(float(np.linalg.norm(normals[k] - normals[l])) for l in range(k + 1, len(normals)))
        bound = cert.fitted_K * sum(cert.omegas[k:])
        tail.append((k + cert.k_min, sup, bound))
    return LimitNormal(normals[-1].copy(), tail)
