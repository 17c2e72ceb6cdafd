import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from reifenberg_lab.errors import DomainError, NeedsBoundaryError
from reifenberg_lab.geometry import rotation
from reifenberg_lab.pucci import (
    Ellipticity,
    StencilSet,
    axis_stencil,
    discrete_pucci,
    pucci_inf,
    pucci_sup,
    stencil,
)

E12 = Ellipticity(1.0, 2.0)


def brute_force(M, e, n=200):
    """Extremize tr(AM) over A = Q diag(a1, a2) Q^T, a_i on an n-point grid of [lam, Lam]."""
    ev, Q = np.linalg.eigh(M)
    a = np.linspace(e.lam, e.Lam, n)
    vals = a[:, None] * ev[0] + a[None, :] * ev[1]
    return vals.max(), vals.min()


def test_examples():
    assert pucci_sup(np.eye(2), E12) == 4
    assert pucci_inf(np.eye(2), E12) == 2
    assert pucci_sup(np.diag([3.0, -1.0]), E12) == 5
    assert pucci_inf(np.diag([3.0, -1.0]), E12) == 1
    M = np.array([[1.0, 0.3], [0.3, -2.0]])
    assert pucci_sup(M, Ellipticity(0.7, 0.7)) == pytest.approx(0.7 * np.trace(M))


def test_ellipticity_validation():
    with pytest.raises(DomainError):
        Ellipticity(2.0, 1.0)
    with pytest.raises(DomainError):
        Ellipticity(0.0, 1.0)


def test_rejects_nonsymmetric():
    with pytest.raises(DomainError):
        pucci_sup(np.array([[1.0, 2.0], [0.0, 1.0]]), E12)


def test_general_dimension():
    M = np.diag([1.0, -2.0, 3.0])
    assert pucci_sup(M, E12) == pytest.approx(2 * 4 - 2)
    assert pucci_inf(M, E12) == pytest.approx(4 - 4)


sym2 = arrays(np.float64, 3, elements=st.floats(-5, 5)).map(
    lambda a: np.array([[a[0], a[1]], [a[1], a[2]]])
)
ellipticities = st.sampled_from([Ellipticity(1, 2), Ellipticity(0.5, 4)])


@settings(max_examples=200, deadline=None)
@given(M=sym2, e=ellipticities)
def test_brute_force_agreement(M, e):
    hi, lo = brute_force(M, e)
    assert pucci_sup(M, e) == pytest.approx(hi, abs=1e-3)
    assert pucci_inf(M, e) == pytest.approx(lo, abs=1e-3)


@settings(max_examples=200, deadline=None)
@given(M=sym2, N=sym2, e=ellipticities, t=st.floats(0, 10))
def test_algebraic_invariants(M, N, e, t):
    tol = 1e-12 * (1 + np.abs(M).max() + np.abs(N).max()) * (1 + t)
    assert pucci_inf(M, e) <= pucci_sup(M, e) + tol
    assert pucci_sup(-M, e) == pytest.approx(-pucci_inf(M, e), abs=tol)
    assert pucci_sup(t * M, e) == pytest.approx(t * pucci_sup(M, e), abs=tol * 10)
    assert pucci_sup(M + N, e) <= pucci_sup(M, e) + pucci_sup(N, e) + tol
    assert pucci_inf(M + N, e) >= pucci_inf(M, e) + pucci_inf(N, e) - tol


@settings(max_examples=200, deadline=None)
@given(M=sym2, e=ellipticities, phi=st.floats(0, math.pi), a=st.floats(0, 1), b=st.floats(0, 1))
def test_sandwich(M, e, phi, a, b):
    R = rotation(phi)
    A = R @ np.diag([e.lam + a * (e.Lam - e.lam), e.lam + b * (e.Lam - e.lam)]) @ R.T
    tr = float(np.trace(A @ M))
    tol = 1e-12 * (1 + np.abs(M).max())
    assert pucci_inf(M, e) - tol <= tr <= pucci_sup(M, e) + tol


def test_stencil_counts():
    assert len(stencil(1)) == 2
    assert len(stencil(3)) == 8  # 16 directions
    assert stencil(3).width == 3
    with pytest.raises(DomainError):
        StencilSet((((1, 1), (1, 0)),))
    with pytest.raises(DomainError):
        StencilSet((((1, 1), (-1, 1)),))  # no axis pair


def quadratic_grid(M, h=0.1, n=21):
    x = (np.arange(n) - n // 2) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    P = np.stack([X, Y], -1)
    return 0.5 * np.einsum("...i,ij,...j->...", P, M, P), h, (n // 2, n // 2)


def test_discrete_quadratic_exact_on_axis_stencil():
    vals, h, c = quadratic_grid(np.eye(2))
    assert discrete_pucci((vals, h), c, E12, axis_stencil(), "sup") == pytest.approx(4.0, abs=1e-10)


def test_discrete_affine_vanishes():
    x = np.arange(11) * 0.1
    X, Y = np.meshgrid(x, x, indexing="ij")
    vals = 2 + 3 * X - Y
    for mode in ("sup", "inf"):
        assert discrete_pucci((vals, 0.1), (5, 5), E12, stencil(3), mode) == pytest.approx(0.0, abs=1e-10)


def test_discrete_needs_boundary():
    vals = np.zeros((5, 5))
    with pytest.raises(NeedsBoundaryError):
        discrete_pucci((vals, 0.1), (1, 1), E12, stencil(3), "sup")
    vals[2, 3] = np.nan
    with pytest.raises(NeedsBoundaryError):
        discrete_pucci((vals, 0.1), (2, 2), E12, axis_stencil(), "sup")


def rotated_gap(width, phi=math.pi / 8):
    R = rotation(phi)
    M = R @ np.diag([3.0, -1.0]) @ R.T
    vals, h, c = quadratic_grid(M)
    return pucci_sup(M, E12) - discrete_pucci((vals, h), c, E12, stencil(width), "sup"), M


def test_consistency_on_rotated_quadratic():
    gaps = [rotated_gap(w)[0] for w in (1, 2, 3)]
    _, M = rotated_gap(3)
    assert all(g >= -1e-10 for g in gaps)  # discrete value never exceeds the algebraic one
    assert gaps[0] > gaps[2]  # the axis-only stencil is strictly worse
    assert all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:]))
    assert gaps[2] <= 0.1 * np.linalg.norm(M, 2)


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    mode=st.sampled_from(["sup", "inf"]),
    bump=st.floats(1e-6, 5.0),
)
def test_discrete_monotone_in_neighbors(seed, mode, bump):
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-1, 1, (9, 9))
    S = stencil(3)
    base = discrete_pucci((vals, 0.1), (4, 4), E12, S, mode)
    off = S.offsets().reshape(-1, 2)[rng.integers(len(S) * 4)]
    vals[4 + off[0], 4 + off[1]] += bump
    assert discrete_pucci((vals, 0.1), (4, 4), E12, S, mode) >= base - 1e-12
    vals[4, 4] += bump
    assert discrete_pucci((vals, 0.1), (4, 4), E12, S, mode) <= discrete_pucci(
        (vals - np.where(np.arange(81).reshape(9, 9) == 40, bump, 0), 0.1), (4, 4), E12, S, mode
    ) + 1e-12
