"""Constant selection and scale iteration for the boundary estimates.

Two smallness systems are solved by a staged deterministic search:

* Lipschitz estimate: ``eta`` first, then ``c0``, then ``Chat``, with
  ``Cbar = C2 / eta^alpha0``.
* Hopf estimate: ``eta`` first, then ``Chat``, then ``c0``, with
  ``Cbar = C2 / eta^(1+alpha0)``.

``eta`` and ``c0`` are taken as half the largest admissible value; ``Chat``
as the smallest admissible value nudged up by one part in 1e12.
:func:`check_constants` re-evaluates every inequality from its own formula
table and is what the tests trust.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import modulus as mod
from .errors import DomainError, InfeasibleError, PreconditionError
from .fdsolver import GridFunction, HalfDisc, build_domain, piecewise_bc, solve
from .pucci import Ellipticity, stencil

__all__ = [
    "ProofInputs",
    "ProofConstants",
    "ScaleSequence",
    "InductionStep",
    "select_constants_lipschitz",
    "select_constants_hopf",
    "check_constants",
    "scale_sequence",
    "check_increments",
    "verify_induction",
    "K_from_certificate",
]

SLACK_FLOOR = 1e-12
CHAT_NUDGE = 1 + 1e-12


@dataclass
class ProofInputs:
    e: Ellipticity = field(default_factory=Ellipticity)
    alpha: float = 0.5
    C1: float = 1.0
    C2: float = 1.0
    C3: float = 1.0
    K: object = 1.0  # number or callable eta -> K(eta)
    modulus: mod.Modulus | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise DomainError("alpha must lie in (0, 1)")
        for name in ("C1", "C2", "C3"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not callable(self.K) and not self.K > 0:
            raise DomainError("K must be positive")

    @property
    def alpha0(self):
        return self.alpha / 2.0

    def K_at(self, eta):
        """``K(eta)``, clamped to at least 1."""
        k = float(self.K(eta)) if callable(self.K) else float(self.K)
        if not k > 0 or not math.isfinite(k):
            raise DomainError(f"K({eta}) = {k} is not a positive number")
        return max(k, 1.0)

    def to_dict(self):
        return {
            "ellipticity": self.e.to_dict(),
            "alpha": self.alpha,
            "C1": self.C1,
            "C2": self.C2,
            "C3": self.C3,
            "K": "callable" if callable(self.K) else self.K,
            "modulus": self.modulus.to_dict() if self.modulus is not None else None,
        }


@dataclass
class ProofConstants:
    kind: str  # "lipschitz" | "hopf"
    alpha0: float
    eta: float
    c0: float
    Cbar: float
    Chat: float
    K_eta: float
    C1: float
    C2: float
    C3: float
    a_tilde: float | None = None
    c2: float | None = None
    delta1: float | None = None
    c_tilde: float | None = None
    slacks: dict = field(default_factory=dict)

    def to_dict(self):
        out = {k: getattr(self, k) for k in (
            "kind", "alpha0", "eta", "c0", "Cbar", "Chat", "K_eta", "C1", "C2", "C3",
            "a_tilde", "c2", "delta1", "c_tilde")}
        out["slacks"] = dict(self.slacks)
        return out

    @classmethod
    def from_dict(cls, d):
        keys = ("kind", "alpha0", "eta", "c0", "Cbar", "Chat", "K_eta", "C1", "C2", "C3",
                "a_tilde", "c2", "delta1", "c_tilde")
        return cls(**{k: d.get(k) for k in keys}, slacks=dict(d.get("slacks", {})))


def K_from_certificate(cert):
    """``K(eta)`` from a Reifenberg certificate: the fitted drift constant,
    or the measured ``K(theta)`` for the nearest tabulated ratio."""
    table = dict(cert.K_theta)

    def K(eta):
        if table:
            theta = min(table, key=lambda th: abs(th - eta))
            if abs(theta - eta) <= 1e-9 * max(eta, 1e-300):
                return max(table[theta], cert.fitted_K)
        return cert.fitted_K

    return K


# --------------------------------------------------------------------------
# staged search


def _largest(ok, hi=1.0, iters=200):
    """Largest ``x`` in ``(0, hi]`` with ``ok(x)`` for a downward-closed predicate."""
    if ok(hi):
        return hi
    lo = hi
    while not ok(lo):
        lo *= 0.5
        if lo < 1e-300:
            return 0.0
    hi_ = min(hi, lo * 2.0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi_)
        if ok(mid):
            lo = mid
        else:
            hi_ = mid
        if hi_ - lo <= 1e-15 * hi_:
            break
    return lo


def _ew(eta, a0):
    return (1.0 - eta**a0) * (1.0 - eta)


def select_constants_lipschitz(inp: ProofInputs) -> ProofConstants:
    a0 = inp.alpha0
    eta_max = _largest(lambda t: inp.C1 * t**a0 <= 1 / 6 and _ew(t, a0) >= 0.5, hi=1.0 - 1e-15)
    if not eta_max > 0:
        raise InfeasibleError("no admissible eta", binding="C1*eta^a0<=1/6 and (1-eta^a0)(1-eta)>=1/2")
    eta = eta_max / 2.0
    K = inp.K_at(eta)
    Cbar = inp.C2 / eta**a0
    c0_caps = {
        "c0*K<1/4": 1.0 / (4.0 * K),
        "C2*K*c0/eta^(1+a0)<=1/6": eta ** (1 + a0) / (6.0 * inp.C2 * K),
        "3*c0*Cbar/eta^(1+a0)<=1/6": eta ** (1 + a0) / (18.0 * Cbar),
        "3*c0*K*Cbar/eta^a0<=1/3": eta**a0 / (9.0 * K * Cbar),
        "c0<=1/4": 0.25,
    }
    c0 = min(c0_caps.values()) / 2.0
    if not c0 > 0:
        raise InfeasibleError("no admissible c0", binding=min(c0_caps, key=c0_caps.get))
    Chat = max(1.0 / c0, 6.0 * (inp.C3 + 1.0) / eta ** (1 + a0)) * CHAT_NUDGE
    pc = ProofConstants("lipschitz", a0, eta, c0, Cbar, Chat, K, inp.C1, inp.C2, inp.C3)
    pc.slacks = {name: row["slack"] for name, row in check_constants(pc).items()}
    return pc


def select_constants_hopf(inp: ProofInputs, delta1: float, c2: float, c_tilde=None) -> ProofConstants:
    if not (delta1 > 0 and c2 > 0):
        raise DomainError("delta1 and c2 must be positive")
    a0 = inp.alpha0
    eta_max = _largest(
        lambda t: t <= delta1 and inp.C1 * t**a0 <= 1 / 6 and _ew(t, a0) >= 0.5,
        hi=min(1.0 - 1e-15, delta1),
    )
    if not eta_max > 0:
        raise InfeasibleError("no admissible eta", binding="eta<=delta1, C1*eta^a0<=1/6, (1-eta^a0)(1-eta)>=1/2")
    eta = eta_max / 2.0
    K = inp.K_at(eta)
    Cbar = inp.C2 / eta ** (1 + a0)
    Chat = 3.0 * (K + 1.0) / eta**a0 * CHAT_NUDGE
    a_tilde = c2
    c0_caps = {
        "3*c0*Cbar*Chat<=a_tilde/2": a_tilde / (6.0 * Cbar * Chat),
        "C2*c0*K/eta<=1/6": eta / (6.0 * inp.C2 * K),
        "c0<=1/4": 0.25,
    }
    c0 = min(c0_caps.values()) / 2.0
    if not c0 > 0:
        raise InfeasibleError("no admissible c0", binding=min(c0_caps, key=c0_caps.get))
    pc = ProofConstants("hopf", a0, eta, c0, Cbar, Chat, K, inp.C1, inp.C2, inp.C3,
                        a_tilde=a_tilde, c2=c2, delta1=delta1, c_tilde=c_tilde)
    pc.slacks = {name: row["slack"] for name, row in check_constants(pc).items()}
    return pc


# --------------------------------------------------------------------------
# independent re-check


def _row(lhs, rhs, sense):
    slack = rhs - lhs if sense == "<=" else lhs - rhs
    return {"lhs": lhs, "rhs": rhs, "sense": sense, "slack": slack, "ok": slack >= 0.0,
            "tight": 0.0 <= slack < SLACK_FLOOR}


def check_constants(pc: ProofConstants) -> dict:
    """Re-evaluate every displayed inequality for ``pc`` (independent of the
    search).  Each row carries ``lhs``, ``rhs``, ``slack`` and ``ok``."""
    e, a, c0, K = pc.eta, pc.alpha0, pc.c0, pc.K_eta
    Cb, Ch = pc.Cbar, pc.Chat
    ew_lhs = (1 - math.pow(e, a)) * (1 - e)
    if pc.kind == "lipschitz":
        rows = {
            "Cbar=C2/eta^a0": _row(abs(Cb - pc.C2 / math.pow(e, a)), 1e-12 * Cb, "<="),
            "Chat*c0>=1": _row(Ch * c0, 1.0, ">="),
            "c0*K<1/4": _row(c0 * K, 0.25, "<="),
            "(1-eta^a0)(1-eta)>=1/2": _row(ew_lhs, 0.5, ">="),
            "C1*eta^a0<=1/6": _row(pc.C1 * math.pow(e, a), 1 / 6, "<="),
            "C2*K*c0/eta^(1+a0)<=1/6": _row(pc.C2 * K * c0 / math.pow(e, 1 + a), 1 / 6, "<="),
            "3*c0*Cbar/eta^(1+a0)<=1/6": _row(3 * c0 * Cb / math.pow(e, 1 + a), 1 / 6, "<="),
            "3*c0*K*Cbar/eta^a0<=1/3": _row(3 * c0 * K * Cb / math.pow(e, a), 1 / 3, "<="),
            "(C3+1)/(Chat*eta^(1+a0))<=1/6": _row((pc.C3 + 1) / (Ch * math.pow(e, 1 + a)), 1 / 6, "<="),
            "c0<=1/4": _row(c0, 0.25, "<="),
        }
        # strict inequality: equality would not be admissible
        rows["c0*K<1/4"]["ok"] = c0 * K < 0.25
    elif pc.kind == "hopf":
        rows = {
            "Cbar=C2/eta^(1+a0)": _row(abs(Cb - pc.C2 / math.pow(e, 1 + a)), 1e-12 * Cb, "<="),
            "eta<=delta1": _row(e, pc.delta1, "<="),
            "(1-eta^a0)(1-eta)>=1/2": _row(ew_lhs, 0.5, ">="),
            "C1*eta^a0<=1/6": _row(pc.C1 * math.pow(e, a), 1 / 6, "<="),
            "(K+1)/(Chat*eta^a0)<=1/3": _row((K + 1) / (Ch * math.pow(e, a)), 1 / 3, "<="),
            "3*c0*Cbar*Chat<=a_tilde/2": _row(3 * c0 * Cb * Ch, pc.a_tilde / 2, "<="),
            "C2*c0*K/eta<=1/6": _row(pc.C2 * c0 * K / e, 1 / 6, "<="),
            "c0<=1/4": _row(c0, 0.25, "<="),
        }
    else:
        raise DomainError(f"unknown constants kind {pc.kind!r}")
    return rows


# --------------------------------------------------------------------------
# scale sequence


@dataclass
class ScaleSequence:
    eta: float
    alpha0: float
    c0: float
    log_rescale: float
    omegas: list
    A: list
    partial_sums: list
    proviso: bool
    a: list | None = None

    @property
    def bound(self):
        return 3.0 * self.c0

    @property
    def passed(self):
        """``True``/``False`` under the proviso, ``None`` when not applicable."""
        if not self.proviso:
            return None
        return self.partial_sums[-1] <= self.bound * (1 + 1e-12)

    def recursion_bounds(self):
        """``omega(eta^k) <= A_k <= A_{k+1} / eta^alpha0`` for every ``k``."""
        q = self.eta**self.alpha0
        ok = []
        for k in range(len(self.A) - 1):
            lo = self.omegas[k] <= self.A[k] * (1 + 1e-12)
            hi = self.A[k] <= self.A[k + 1] / q * (1 + 1e-12)
            ok.append(lo and hi)
        return ok

    def to_dict(self):
        return {
            "eta": self.eta,
            "alpha0": self.alpha0,
            "c0": self.c0,
            "log_rescale": self.log_rescale,
            "omegas": self.omegas,
            "A": self.A,
            "partial_sums": self.partial_sums,
            "bound_3c0": self.bound,
            "proviso_holds": self.proviso,
            "passed": self.passed,
            "recursion_bounds_hold": all(self.recursion_bounds()),
            "a": self.a,
        }


def scale_sequence(m: mod.Modulus, eta: float, alpha0: float, c0: float, k_max: int = 60) -> ScaleSequence:
    """``A_0 = c0``, ``A_k = max(omega~(eta^k), eta^alpha0 A_{k-1})`` for the
    modulus rescaled so that ``omega~ <= c0`` and ``int_0^1 omega~/r <= c0``."""
    if not 0 < eta < 1 or not alpha0 > 0 or not c0 > 0:
        raise DomainError("need 0 < eta < 1, alpha0 > 0, c0 > 0")
    t1 = mod.rescale_log_radius(m, c0)
    q = eta**alpha0
    step = -math.log(eta)
    omegas = [0.0] + [m.eval_log(t1 + k * step) for k in range(1, k_max + 1)]
    omegas[0] = m.eval_log(t1)
    A = [c0]
    for k in range(1, k_max + 1):
        A.append(max(omegas[k], q * A[-1]))
    partial = np.cumsum(A).tolist()
    return ScaleSequence(eta, alpha0, c0, t1, omegas, A, partial, _ew(eta, alpha0) >= 0.5)


def check_increments(a_seq, seq: ScaleSequence, Cbar, Chat, M=1.0):
    """Per-``k`` check of ``|a_k - a_{k-1}| <= Cbar Chat M A_k`` (``a_{-1} = 0``)."""
    out = []
    prev = 0.0
    for k, a in enumerate(a_seq):
        cap = Cbar * Chat * M * seq.A[k]
        out.append(abs(a - prev) <= cap * (1 + 1e-12))
        prev = a
    return out


# --------------------------------------------------------------------------
# induction check on grid fields


@dataclass
class InductionStep:
    k: int
    radius: float
    normal: tuple | None
    a_k: float | None
    lhs: float | None
    rhs: float | None
    slack: float | None
    ok: bool | None
    note: str = ""
    a_bar: float | None = None

    def to_dict(self):
        return dict(self.__dict__)


def _aux_slope(pc, seq, k, r, normal, M, K, omega, h_cells=64):
    """Solve the comparison problem on the shifted half-disc of radius ``r``
    and return the slope of its solution along the normal near the origin."""
    shift = K * r * omega
    top = pc.Chat * M * r * seq.A[k]
    shape = HalfDisc(r, normal, shift)
    dom = build_domain(shape, r / h_cells, stencil(3))
    v, _ = solve(dom, "sup", Ellipticity(), g=piecewise_bc({"flat": 0.0, "arc": top}))
    X, Y = dom.mesh()
    n = np.asarray(normal, float)
    s = (X * n[0] + Y * n[1] + shift)[dom.inside]
    vals = v.values[dom.inside]
    near = (np.hypot(X, Y)[dom.inside] <= seq.eta * r) & (s > 0)
    if not near.any():
        return None
    return float(np.dot(vals[near], s[near]) / np.dot(s[near], s[near]))


def verify_induction(
    u: GridFunction,
    cert,
    pc: ProofConstants,
    seq: ScaleSequence,
    mode: str = "lipschitz",
    ks=None,
    M: float | None = None,
    scale_unit: float = 1.0,
    with_aux_solves: bool = False,
    a_seq=None,
):
    """Check the per-scale induction inequality on a solved field.

    Scales are ``r_k = scale_unit * seq.eta^k`` and frames ``n_k`` are taken
    from ``cert`` at matching radii.  ``a_k`` is fitted greedily within the
    allowed increment; with ``with_aux_solves`` the increment is instead the
    slope of the comparison solution on the shifted half-disc.  ``a_seq``
    (indexed by ``k``) prescribes the sequence instead of fitting it.

    lipschitz: ``sup_{|x|<=r_k} (u - u(0) - a_k n_k.x) <= Chat M r_k A_k``
    hopf:      ``inf_{|x|<=r_{k+1}} (u - u(0) - (a~ - a_k) n_k.x) >= -Chat r_k A_k``
    """
    if mode not in ("lipschitz", "hopf"):
        raise DomainError(f"unknown mode {mode!r}")
    if mode == "hopf" and pc.a_tilde is None:
        raise PreconditionError("hopf mode needs constants carrying a_tilde")
    X, Y = u.domain.mesh()
    ins = u.domain.inside
    x, y = X[ins], Y[ins]
    u0 = u.at_node(0.0, 0.0)
    dev = u.values[ins] - u0
    rad = np.hypot(x, y)
    if M is None:
        M = float(np.max(np.abs(u.values[ins])))
    ks = list(range(len(seq.A))) if ks is None else list(ks)
    steps = []
    a_prev = 0.0
    h = u.domain.h
    for k in ks:
        r = scale_unit * seq.eta**k
        r_set = r if mode == "lipschitz" else scale_unit * seq.eta ** (k + 1)
        frame = cert.frame_at(r) if cert is not None else None
        if frame is None:
            steps.append(InductionStep(k, r, None, None, None, None, None, None, "no frame at this scale"))
            continue
        if r_set < 3 * h:
            steps.append(InductionStep(k, r, tuple(frame.normal), None, None, None, None, None, "below resolution"))
            continue
        n = np.asarray(frame.normal, float)
        sel = rad <= r_set * (1 + 1e-12)
        p = (x * n[0] + y * n[1])[sel]
        d = dev[sel]
        Mk = M if mode == "lipschitz" else 1.0
        cap = pc.Cbar * pc.Chat * Mk * seq.A[k]
        a_bar = None
        if a_seq is not None:
            a_k = float(a_seq[k])
        elif with_aux_solves:
            omega = cert.omegas[cert.scales.index(frame.scale)] if frame.scale in cert.scales else 0.0
            a_bar = _aux_slope(pc, seq, k, r, n, Mk, pc.K_eta, omega)
            a_k = a_prev + min(a_bar or 0.0, cap)
        else:
            if mode == "lipschitz":
                def obj(a):
                    return float(np.max(d - a * p))
            else:
                def obj(a):
                    return -float(np.min(d - (pc.a_tilde - a) * p))
            if cap > 0:
                res = minimize_scalar(obj, bounds=(a_prev - cap, a_prev + cap), method="bounded",
                                      options={"xatol": 1e-12 * max(1.0, cap)})
                a_k = float(res.x) if res.fun <= obj(a_prev) else a_prev
            else:
                a_k = a_prev
        if mode == "lipschitz":
            lhs = float(np.max(d - a_k * p))
            rhs = pc.Chat * M * r * seq.A[k]
            slack = rhs - lhs
        else:
            lhs = float(np.min(d - (pc.a_tilde - a_k) * p))
            rhs = -pc.Chat * r * seq.A[k]
            slack = lhs - rhs
        steps.append(InductionStep(k, r, tuple(n.tolist()), a_k, lhs, rhs, slack, slack >= 0, "", a_bar))
        a_prev = a_k
    return steps
