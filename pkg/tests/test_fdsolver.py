import math

import numpy as np
import pytest

from reifenberg_lab import fdsolver as fd
from reifenberg_lab.errors import DegenerateDomainError, DomainError, GeometryError, NonConvergenceError
from reifenberg_lab.geometry import flat, log_example
from reifenberg_lab.pucci import Ellipticity, axis_stencil, stencil

E12 = Ellipticity(1.0, 2.0)


def test_half_disc_node_count():
    d = fd.build_domain(fd.HalfDisc(1.0), 1 / 64)
    assert d.node_count == pytest.approx(math.pi / 2 * 64**2, rel=0.02)


def test_half_cube_mask_is_exact():
    d = fd.build_domain(fd.HalfCube(1.0), 1 / 16)
    X, Y = d.mesh()
    expect = (np.abs(X) < 1 - 1e-12) & (Y > 1e-12) & (Y < 1 - 1e-12)
    assert np.array_equal(d.inside, expect)
    assert d.node_count == 31 * 15


def test_graph_shape_contains_axis_point():
    d = fd.build_domain(fd.GraphShape(log_example()), 1 / 256)
    i, j = d.node(0.0, 0.25)
    assert d.inside[i, j]
    assert not d.inside[d.node(0.0, 0.0)]


def test_band_labels():
    d = fd.build_domain(fd.HalfDisc(1.0), 1 / 16)
    assert set(d.band_labels.tolist()) == {"flat", "arc"}
    # projected points lie on the boundary
    p = d.band_points
    on_flat = np.abs(p[:, 1]) < 1e-12
    on_arc = np.abs(np.hypot(p[:, 0], p[:, 1]) - 1) < 1e-12
    assert np.all(on_flat | on_arc)


def test_degenerate_domain():
    with pytest.raises(DegenerateDomainError):
        fd.build_domain(fd.HalfDisc(0.01), 0.1)
    with pytest.raises(DomainError):
        fd.build_domain(fd.HalfDisc(1.0), 0.0)


@pytest.mark.parametrize("mode", ["laplace", "sup", "inf"])
def test_linear_data_reproduced(mode):
    d = fd.build_domain(fd.HalfDisc(1.0), 1 / 64)
    u, rep = fd.solve(d, mode, Ellipticity(1.0, 1.0) if mode == "laplace" else E12, g=fd.parse_bc("linear-y"))
    X, Y = d.mesh()
    assert np.max(np.abs(u.values[d.inside] - Y[d.inside])) <= 1e-6
    assert rep.residual <= 1e-8


def test_maximum_principle(half_disc_sup_128):
    u, _ = half_disc_sup_128
    v = u.values[u.domain.inside]
    assert v.min() >= -1e-12 and v.max() <= 1 + 1e-12


def _random_band_data(d, rng):
    nb = int(d.band.sum())
    return rng.uniform(-1, 1, nb)


@pytest.mark.parametrize("mode", ["sup", "inf"])
def test_comparison_principle(mode):
    d = fd.build_domain(fd.HalfDisc(1.0), 1 / 32)
    rng = np.random.default_rng(7)
    for _ in range(5):
        g1 = _random_band_data(d, rng)
        g2 = g1 + rng.uniform(0, 0.5, g1.shape)
        f1 = rng.uniform(-2, 2, d.inside.shape)
        f2 = f1 - rng.uniform(0, 1, f1.shape)
        u1, _ = fd.solve(d, mode, E12, f=f1, g=lambda x, y, lab, v=g1: v)
        u2, _ = fd.solve(d, mode, E12, f=f2, g=lambda x, y, lab, v=g2: v)
        assert np.all(u1.values[d.inside] <= u2.values[d.inside] + 1e-9)


def test_inf_solution_below_sup_solution():
    d = fd.build_domain(fd.HalfDisc(1.0), 1 / 32)
    g = fd.parse_bc("flat=0,arc=1")
    hi, _ = fd.solve(d, "sup", E12, g=g)
    lo, _ = fd.solve(d, "inf", E12, g=g)
    # M-[u_sup] <= M+[u_sup] = 0: the M+ solution is a supersolution for M-
    assert np.all(lo.values[d.inside] <= hi.values[d.inside] + 1e-10)
    assert np.any(lo.values[d.inside] < hi.values[d.inside] - 1e-3)


def test_positive_homogeneity():
    d = fd.build_domain(fd.HalfDisc(1.0), 1 / 32)
    u, _ = fd.solve(d, "sup", E12, f=1.0, g=fd.parse_bc("flat=0,arc=1"))
    v, _ = fd.solve(d, "sup", E12, f=3.0, g=fd.parse_bc("flat=0,arc=3"))
    assert np.allclose(3 * u.values[d.inside], v.values[d.inside], atol=1e-9)


def test_equal_ellipticity_matches_scaled_laplacian():
    d = fd.build_domain(fd.HalfDisc(1.0), 1 / 32, axis_stencil())
    g = fd.parse_bc("flat=0,arc=1")
    a, _ = fd.solve(d, "sup", Ellipticity(1.5, 1.5), f=1.0, g=g)
    b, _ = fd.solve(d, "laplace", Ellipticity(1.5, 1.5), f=1.0, g=g)
    assert np.allclose(a.values[d.inside], b.values[d.inside], atol=1e-10)


def test_harmonic_quadratic_exact():
    # the 5-point scheme is exact on x^2 - y^2
    d = fd.build_domain(fd.HalfDisc(1.0), 1 / 32)
    g = fd.function_bc(lambda x, y: x**2 - y**2)
    u, _ = fd.solve(d, "laplace", Ellipticity(1.0, 1.0), g=g)
    X, Y = d.mesh()
    assert np.max(np.abs(u.values[d.inside] - (X**2 - Y**2)[d.inside])) <= 1e-10


def test_mesh_refinement_converges():
    g = fd.parse_bc("flat=0,arc=1")
    vals = []
    for h in (1 / 16, 1 / 32, 1 / 64):
        u, _ = fd.solve(fd.build_domain(fd.HalfDisc(1.0), h), "inf", E12, g=g)
        vals.append(u.at(0.0, 0.5))
    d1, d2 = abs(vals[1] - vals[0]), abs(vals[2] - vals[1])
    assert d2 < d1


def test_gauss_seidel_agrees_with_howard():
    d = fd.build_domain(fd.HalfDisc(1.0), 1 / 16)
    g = fd.parse_bc("flat=0,arc=1")
    a, ra = fd.solve(d, "sup", E12, g=g, tol=1e-11)
    b, rb = fd.solve(d, "sup", E12, g=g, tol=1e-11, method="gauss-seidel")
    assert ra.method == "howard" and rb.method == "gauss-seidel"
    assert np.max(np.abs(a.values[d.inside] - b.values[d.inside])) <= 1e-8


def test_nonconvergence_reported():
    d = fd.build_domain(fd.HalfDisc(1.0), 1 / 16)
    with pytest.raises(NonConvergenceError) as ei:
        fd.solve(d, "sup", E12, g=fd.parse_bc("flat=0,arc=1"), method="gauss-seidel", max_iter=3)
    assert len(ei.value.history) == 3


def test_bad_mode_and_method():
    d = fd.build_domain(fd.HalfDisc(1.0), 1 / 8)
    with pytest.raises(DomainError):
        fd.solve(d, "median", E12)
    with pytest.raises(DomainError):
        fd.solve(d, "sup", E12, method="magic")
    with pytest.raises(DomainError):
        fd.solve(d, "sup", E12, g=fd.parse_bc("flat=0"))


def test_parse_bc():
    assert fd.parse_bc("zero")(np.zeros(2), np.zeros(2), np.array(["a", "b"])).tolist() == [0, 0]
    g = fd.parse_bc("top=1,*=0.5")
    assert g(np.zeros(2), np.zeros(2), np.array(["top", "side"])).tolist() == [1.0, 0.5]
    with pytest.raises(DomainError):
        fd.parse_bc("nonsense")


def test_interpolation_and_range():
    d = fd.build_domain(fd.HalfDisc(1.0), 1 / 16)
    u = fd.grid_function(d, lambda x, y: 2 * x + y)
    assert u.at(0.1234, 0.4321) == pytest.approx(2 * 0.1234 + 0.4321, abs=1e-12)
    with pytest.raises(GeometryError):
        u.at(5.0, 5.0)


def test_save_load_roundtrip(tmp_path):
    d = fd.build_domain(fd.HalfDisc(1.0), 1 / 16)
    u, _ = fd.solve(d, "sup", E12, g=fd.parse_bc("flat=0,arc=1"))
    csv_path, _ = fd.save_solution(u, tmp_path / "u.csv")
    back = fd.load_solution(csv_path)
    assert np.array_equal(back.domain.inside, d.inside)
    assert np.array_equal(back.values[d.inside], u.values[d.inside])
    assert back.domain.meta["shape"]["r"] == 1.0


def test_graph_shape_flat_matches_half_disc():
    h = 1 / 16
    a = fd.build_domain(fd.GraphShape(flat(1.0)), h)
    b = fd.build_domain(fd.HalfDisc(1.0), h)
    assert np.array_equal(a.inside, b.inside)


def test_stencil_width_controls_band():
    narrow = fd.build_domain(fd.HalfDisc(1.0), 1 / 16, stencil(1))
    wide = fd.build_domain(fd.HalfDisc(1.0), 1 / 16, stencil(3))
    assert wide.band.sum() > narrow.band.sum()
