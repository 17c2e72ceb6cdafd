"""Dini moduli of continuity.

A modulus is a nondecreasing function ``omega`` on ``(0, R]``.  Every family
can also be evaluated in the log variable ``t = -ln r`` through
:meth:`Modulus.eval_log`; all quadrature runs in that variable, where
``d r / r = -d t`` and the integrand ``omega(e^{-t})`` has no singularity.
Working in ``t`` also keeps radii such as ``e^{-10^6}`` (which underflow as
floats) usable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, PreconditionError

__all__ = [
    "Modulus",
    "DiniVerdict",
    "power",
    "inv_log_sq",
    "inv_log",
    "zero",
    "table",
    "max_of",
    "scaled",
    "dilated",
    "from_csv",
    "from_name",
    "dini_integral",
    "integral",
    "rescale_radius",
    "rescale_log_radius",
]

# Divergence surrogate: growth of more than DIVERGENCE_THRESHOLD while the
# log cutoff t = -ln(eps) grows by a factor of 100, with eps below 1e-6.
DIVERGENCE_THRESHOLD = 1.0
DIVERGENCE_START = -math.log(1e-6)
DIVERGENCE_WINDOW = 100.0
# Chunk-to-chunk ratio above which increments count as non-decaying.
STALL_RATIO = 0.95
MAX_DOUBLINGS = 200


@dataclass(frozen=True)
class Modulus:
    """A nondecreasing modulus ``omega`` on ``(0, domain_radius]``.

    Build instances with the module-level constructors (:func:`power`,
    :func:`table`, ...) rather than directly.
    """

    family: str
    params: tuple = ()
    parts: tuple = ()
    domain_radius: float = 1.0

    def eval(self, r):
        """Return ``omega(r)``; raises :class:`DomainError` off ``(0, R]``."""
        r = float(r)
        if not (r > 0.0) or r > self.domain_radius * (1.0 + 1e-12):
            raise DomainError(
                f"radius {r!r} outside (0, {self.domain_radius}] for {self.family}"
            )
        return self._value(r)

    __call__ = eval

    def eval_log(self, t):
        """Return ``omega(e^{-t})`` without forming ``e^{-t}`` when avoidable."""
        fam = self.family
        if fam == "power":
            return math.exp(-self.params[0] * t)
        if fam == "inv_log_sq":
            return 1.0 / (t * t)
        if fam == "inv_log":
            return 1.0 / t
        if fam == "zero":
            return 0.0
        if fam == "table":
            return self._table_value(math.exp(-t))
        if fam == "max_of":
            return max(p.eval_log(t) for p in self.parts)
        if fam == "scaled":
            return self.params[0] * self.parts[0].eval_log(t)
        if fam == "dilated":
            return self.parts[0].eval_log(t + self.params[0])
        raise DomainError(f"unknown modulus family {fam!r}")

    def _value(self, r):
        fam = self.family
        if fam == "power":
            return r ** self.params[0]
        if fam in ("inv_log_sq", "inv_log"):
            return self.eval_log(-math.log(r))
        if fam == "zero":
            return 0.0
        if fam == "table":
            return self._table_value(r)
        if fam == "max_of":
            return max(p._value(r) for p in self.parts)
        if fam == "scaled":
            return self.params[0] * self.parts[0]._value(r)
        if fam == "dilated":
            return self.eval_log(-math.log(r))
        raise DomainError(f"unknown modulus family {fam!r}")

    def _table_value(self, r):
        radii, values = self.params
        if r <= radii[0]:
            # linear extension to 0 at r = 0
            return values[0] * r / radii[0]
        return float(np.interp(r, radii, values))

    def knots_log(self):
        """Kinks of ``t -> omega(e^{-t})`` (table knots), for quadrature."""
        if self.family == "table":
            return [-math.log(r) for r in self.params[0]]
        if self.family == "dilated":
            shift = self.params[0]
            return [t - shift for t in self.parts[0].knots_log()]
        out = []
        for p in self.parts:
            out.extend(p.knots_log())
        return out

    def samples(self, count=256):
        """Log-spaced sample radii in ``(0, R]`` used by invariant checks."""
        lo = max(self.domain_radius * 1e-12, 1e-300)
        return np.geomspace(lo, self.domain_radius, count)

    def is_nondecreasing(self, count=256):
        vals = [self.eval(r) for r in self.samples(count)]
        return all(b >= a - 1e-15 * max(1.0, abs(a)) for a, b in zip(vals, vals[1:]))

    def to_dict(self):
        d = {"family": self.family, "domain_radius": self.domain_radius}
        if self.family == "table":
            d["radii"] = list(self.params[0])
            d["values"] = list(self.params[1])
        elif self.params:
            d["params"] = list(self.params)
        if self.parts:
            d["parts"] = [p.to_dict() for p in self.parts]
        return d

    @classmethod
    def from_dict(cls, d):
        fam = d["family"]
        parts = tuple(cls.from_dict(p) for p in d.get("parts", ()))
        if fam == "table":
            return table(d["radii"], d["values"], radius=d["domain_radius"])
        return cls(fam, tuple(d.get("params", ())), parts, float(d["domain_radius"]))


def power(alpha, radius=1.0):
    """``omega(r) = r**alpha`` (Hölder modulus)."""
    if not alpha > 0:
        raise DomainError("power modulus needs alpha > 0")
    return Modulus("power", (float(alpha),), (), float(radius))


def inv_log_sq(radius=0.5):
    """``omega(r) = 1 / ln(r)**2`` on ``(0, radius]``, radius < 1 (Dini)."""
    if not 0 < radius < 1:
        raise DomainError("inv_log_sq needs 0 < radius < 1")
    return Modulus("inv_log_sq", (), (), float(radius))


def inv_log(radius=0.5):
    """``omega(r) = 1 / |ln r|`` on ``(0, radius]`` (continuous but not Dini)."""
    if not 0 < radius < 1:
        raise DomainError("inv_log needs 0 < radius < 1")
    return Modulus("inv_log", (), (), float(radius))


def zero(radius=1.0):
    return Modulus("zero", (), (), float(radius))


def table(radii: Sequence[float], values: Sequence[float], radius=None):
    """Piecewise-linear modulus through ``(radii[i], values[i])``.

    Radii must be strictly increasing and values nondecreasing and
    nonnegative; below the first knot the modulus falls linearly to 0.
    """
    radii = tuple(float(r) for r in radii)
    values = tuple(float(v) for v in values)
    if len(radii) == 0 or len(radii) != len(values):
        raise DomainError("table modulus needs matching, nonempty radii and values")
    if radii[0] <= 0 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise DomainError("table radii must be positive and strictly increasing")
    if values[0] < 0 or any(b < a for a, b in zip(values, values[1:])):
        raise DomainError("table values must be nonnegative and nondecreasing")
    R = radii[-1] if radius is None else float(radius)
    if R > radii[-1] * (1 + 1e-12):
        # beyond the last knot the table is held constant
        radii, values = radii + (R,), values + (values[-1],)
    return Modulus("table", (radii, values), (), R)


def max_of(*moduli):
    if len(moduli) == 1 and not isinstance(moduli[0], Modulus):
        moduli = tuple(moduli[0])
    if not moduli:
        raise DomainError("max_of needs at least one modulus")
    return Modulus("max_of", (), tuple(moduli), min(m.domain_radius for m in moduli))


def scaled(m, factor):
    if not factor > 0:
        raise DomainError("scale factor must be positive")
    return Modulus("scaled", (float(factor),), (m,), m.domain_radius)


def dilated(m, log_factor):
    """``s -> omega(e^{-log_factor} s)``: the modulus seen after rescaling
    the radius ``e^{-log_factor}`` to 1."""
    log_factor = float(log_factor)
    log_R = math.log(m.domain_radius) + log_factor
    return Modulus("dilated", (log_factor,), (m,), math.exp(min(log_R, 700.0)))


def from_csv(path, radius=None):
    """Load a table modulus from a two-column CSV of (radius, value)."""
    radii, values = [], []
    with Path(path).open(newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                r, v = float(row[0]), float(row[1])
            except ValueError:
                continue  # header line
            radii.append(r)
            values.append(v)
    return table(radii, values, radius=radius)


def from_name(name, radius=None):
    """Parse a family name as used on the command line.

    Accepted: ``power:<alpha>``, ``inv-log-sq``, ``inv-log``, ``zero``, or
    a path to a CSV table.
    """
    key = name.strip().lower().replace("-", "_")
    kw = {} if radius is None else {"radius": radius}
    if key.startswith("power"):
        _, _, alpha = key.partition(":")
        return power(float(alpha) if alpha else 1.0, **kw)
    if key == "inv_log_sq":
        return inv_log_sq(**kw)
    if key == "inv_log":
        return inv_log(**kw)
    if key == "zero":
        return zero(**kw)
    if Path(name).exists():
        return from_csv(name, radius=radius)
    raise DomainError(f"unknown modulus name {name!r}")


# --------------------------------------------------------------------------
# quadrature in the log variable


def _quad_log(m, t_lo, t_hi):
    """``int_{t_lo}^{t_hi} omega(e^{-t}) dt``."""
    if t_hi <= t_lo:
        return 0.0
    pts = [t for t in m.knots_log() if t_lo < t < t_hi]
    val, _ = integrate.quad(
        m.eval_log, t_lo, t_hi, points=pts or None, limit=400, epsabs=1e-300, epsrel=1e-12
    )
    return val


@dataclass
class DiniVerdict:
    """Outcome of :func:`dini_integral`.

    For a convergent verdict ``integral_estimate`` approximates the integral
    and ``log_cutoff_used`` is the deepest ``-ln(eps)`` reached.  For a
    divergent verdict ``integral_estimate`` is a lower bound and ``witness``
    holds ``(t1, t2, growth)``: the integral over ``e^{-t2} < r < e^{-t1}``
    exceeds the divergence threshold.
    """

    is_dini: bool
    integral_estimate: float
    cutoff_used: float
    log_cutoff_used: float
    witness: tuple | None = None
    history: list = field(default_factory=list, repr=False)

    @property
    def verdict(self):
        return "Dini" if self.is_dini else "NOT Dini"

    def to_dict(self):
        return {
            "is_dini": self.is_dini,
            "verdict": self.verdict,
            "integral_estimate": self.integral_estimate,
            "cutoff_used": self.cutoff_used,
            "log_cutoff_used": self.log_cutoff_used,
            "witness": None if self.witness is None else list(self.witness),
        }


def _scan(m, t0, tol, detect_divergence=True):
    """Integrate ``omega(e^{-t})`` from ``t0`` over doubling chunks.

    Returns a :class:`DiniVerdict` whose estimate is ``int_{t0}^{inf}``.
    """
    unit = max(1.0, abs(t0))
    value = 0.0
    prev_inc = None
    s_prev = t0
    hist = [(t0, 0.0)]
    for j in range(1, MAX_DOUBLINGS + 1):
        s = t0 + (2.0**j - 1.0) * unit
        inc = _quad_log(m, s_prev, s)
        value += inc
        hist.append((s, value))
        ratio = None if not prev_inc else inc / prev_inc
        if detect_divergence and s >= DIVERGENCE_WINDOW * DIVERGENCE_START:
            anchors = [(sa, va) for sa, va in hist if DIVERGENCE_START <= sa <= s / DIVERGENCE_WINDOW]
            if anchors and ratio is not None and ratio >= STALL_RATIO:
                sa, va = anchors[-1]
                growth = value - va
                if growth > DIVERGENCE_THRESHOLD:
                    return DiniVerdict(False, value, math.exp(-s), s, (sa, s, growth), hist)
        if inc == 0.0:
            return DiniVerdict(True, value, math.exp(-s), s, None, hist)
        if ratio is not None and 0.0 <= ratio < 1.0:
            tail = inc * ratio / (1.0 - ratio)
            if inc + tail < tol:
                return DiniVerdict(True, value + tail, math.exp(-s), s, None, hist)
        prev_inc = inc
        s_prev = s
    # never settled: report as not Dini with the last window as witness
    return DiniVerdict(False, value, math.exp(-s_prev), s_prev, (t0, s_prev, value), hist)


def dini_integral(m: Modulus, r0: float, tol: float = 1e-8) -> DiniVerdict:
    """Decide whether ``int_0^{r0} omega(r)/r dr`` is finite and estimate it."""
    if not 0 < r0 <= m.domain_radius * (1 + 1e-12):
        raise DomainError(f"r0={r0} outside (0, {m.domain_radius}]")
    if not tol > 0:
        raise DomainError("tol must be positive")
    try:
        m.eval(r0)
    except (DomainError, ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"modulus not evaluable: {exc}") from exc
    return _scan(m, -math.log(r0), tol)


def integral(m: Modulus, a: float, b: float, tol: float = 1e-10) -> float:
    """``int_a^b omega(r)/r dr`` for ``0 <= a < b <= R``; ``a = 0`` allowed."""
    if not 0 <= a < b <= m.domain_radius * (1 + 1e-12):
        raise DomainError(f"need 0 <= a < b <= {m.domain_radius}")
    if a == 0:
        verdict = dini_integral(m, b, tol)
        if not verdict.is_dini:
            raise PreconditionError("integral diverges at 0")
        return verdict.integral_estimate
    return integral_log(m, -math.log(b), -math.log(a))


def _tail(m, t, tol):
    v = _scan(m, t, tol, detect_divergence=False)
    return v.integral_estimate


def rescale_log_radius(m: Modulus, c0: float) -> float:
    """Return ``t1 = -ln r1`` for the largest ``r1 <= R`` with
    ``omega(r1) <= c0`` and ``int_0^{r1} omega(s)/s ds <= c0``."""
    if not c0 > 0:
        raise DomainError("c0 must be positive")
    verdict = dini_integral(m, m.domain_radius)
    if not verdict.is_dini:
        raise PreconditionError(f"{m.family} modulus is not Dini")
    t_min = -math.log(m.domain_radius)
    tail_tol = c0 * 1e-12

    def omega_ok(t):
        return m.eval_log(t) <= c0

    # smallest t meeting the pointwise constraint
    if omega_ok(t_min):
        t_om = t_min
    else:
        lo, hi = t_min, t_min + 1.0
        while not omega_ok(hi):
            lo, hi = hi, t_min + 2.0 * (hi - t_min)
        while hi - lo > max(1e-12, 4e-16 * hi):
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if omega_ok(mid) else (mid, hi)
        t_om = hi

    tail_ref = _tail(m, t_om, tail_tol)
    if tail_ref <= c0:
        return t_om

    def tail_at(t):
        return tail_ref - integral_log(m, t_om, t)

    lo, hi = t_om, t_om + 1.0
    while tail_at(hi) > c0:
        lo, hi = hi, t_om + 2.0 * (hi - t_om)
    while hi - lo > max(1e-10, 4e-16 * hi):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if tail_at(mid) <= c0 else (mid, hi)
    # confirm with a fresh tail evaluation; step outward if cancellation bit
    step = max(1e-10, 4e-16 * hi)
    while _tail(m, hi, tail_tol) > c0:
        hi += step
        step *= 2.0
    return hi


def integral_log(m, t_lo, t_hi):
    """``int_{t_lo}^{t_hi} omega(e^{-t}) dt`` split into geometric chunks."""
    total = 0.0
    s = t_lo
    unit = max(1.0, abs(t_lo))
    j = 0
    while s < t_hi:
        j += 1
        nxt = min(t_hi, t_lo + (2.0**j - 1.0) * unit)
        total += _quad_log(m, s, nxt)
        s = nxt
    return total


def rescale_radius(m: Modulus, c0: float) -> float:
    """Largest ``r1 <= R`` with ``omega(r1) <= c0`` and
    ``int_0^{r1} omega(s)/s ds <= c0`` (may underflow to 0.0; use
    :func:`rescale_log_radius` for the exact log value)."""
    return math.exp(-rescale_log_radius(m, c0))
