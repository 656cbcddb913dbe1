import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcsnn import geometry as g
from dcsnn import problems as P

SQUARE = g.Hypercube((-1.0, -1.0), (1.0, 1.0))
EX1 = g.LevelSetGeometry(SQUARE, g.Ellipse(0.2, 0.5))
STAR_DOMAIN = g.PolarStarDomain(g.PolarCurve(1.0, -0.3, 5, "cos"))


# -- classify ---------------------------------------------------------------------

def test_classify_examples():
    assert g.classify(EX1, (0.0, 0.0)) == -1
    assert g.classify(EX1, (0.9, 0.9)) == 1
    # a point on the interface belongs to the inner region
    assert g.classify(EX1, (0.2, 0.0)) == -1
    assert g.classify(EX1, (0.0, 0.5)) == -1


def test_classify_batch_and_errors():
    z = g.classify(EX1, np.array([[0.0, 0.0], [0.9, 0.9], [0.1, 0.4]]))
    assert z.tolist() == [-1, 1, -1]
    with pytest.raises(ValueError):
        g.classify(EX1, (1.5, 0.0))
    with pytest.raises(ValueError):
        g.classify(EX1, np.zeros((2, 3)))


def test_classify_one_dimensional():
    geom = P.preset("fit1d").problem.geom
    assert g.classify(geom, 0.25) == -1
    assert g.classify(geom, 0.75) == 1
    assert g.classify(geom, np.array([0.1, 0.5, 0.9])).tolist() == [-1, -1, 1]


# -- nodes ------------------------------------------------------------------------

def test_chebyshev_small():
    assert np.array_equal(g.chebyshev_nodes(1), [0.0])
    assert np.allclose(g.chebyshev_nodes(2), [-math.sqrt(2) / 2, math.sqrt(2) / 2], rtol=0, atol=2.3e-16)


def test_chebyshev_formula():
    k = np.arange(1, 9)
    direct = np.sort(np.cos((2 * k - 1) * np.pi / 16))
    assert np.abs(g.chebyshev_nodes(8) - direct).max() < 1e-15


@given(st.integers(1, 300))
def test_chebyshev_exactly_symmetric(m):
    t = g.chebyshev_nodes(m)
    assert np.array_equal(t, -t[::-1])
    assert np.all(np.diff(t) > 0) and np.all(np.abs(t) < 1)


def test_chebyshev_mapped_interval():
    t = g.chebyshev_nodes(5, 0.0, 1.0)
    assert np.allclose(t, 0.5 + 0.5 * g.chebyshev_nodes(5))
    with pytest.raises(ValueError):
        g.chebyshev_nodes(0)


def test_uniform_nodes_exclude_endpoints():
    assert np.allclose(g.uniform_nodes(4), [-0.75, -0.25, 0.25, 0.75])


# -- interior ---------------------------------------------------------------------

def test_chebyshev_tensor_grid():
    X, z = g.sample_interior(EX1, 64, "chebyshev")
    t = g.chebyshev_nodes(8)
    expected = np.array([(a, b) for a in t for b in t])
    assert np.array_equal(X, expected)
    assert np.array_equal(z, g.classify(EX1, X))


def test_grid_needs_perfect_power():
    with pytest.raises(ValueError):
        g.sample_interior(EX1, 50, "chebyshev")
    with pytest.raises(ValueError):
        g.sample_interior(EX1, 64, "lobatto")


def test_ball_interior_membership():
    geom = P.preset("ex5").problem.geom
    X, _ = g.sample_interior(geom, 100, "random", seed=3)
    assert np.all(np.linalg.norm(X, axis=1) < 0.6)


def test_ball_interior_radial_law():
    # for uniform points in a d-ball, (|x|/R)^d is uniform on [0, 1]
    ball = g.Ball((0.0,) * 6, 0.6)
    X = ball.sample_interior(20000, "random", np.random.default_rng(0))
    u = (np.linalg.norm(X, axis=1) / 0.6) ** 6
    assert abs(u.mean() - 0.5) < 4 * math.sqrt(1 / 12 / len(u))


def test_rejection_acceptance_ratio():
    X, draws = g.rejection_sample(STAR_DOMAIN, 60_000, np.random.default_rng(12))
    lo, hi = STAR_DOMAIN.bounding_box()
    p = STAR_DOMAIN.area() / np.prod(hi - lo)
    sd = math.sqrt(p * (1 - p) / draws)
    assert draws >= 100_000
    assert abs(len(X) / draws - p) < 3 * sd
    assert np.all(STAR_DOMAIN.contains(X))


def test_polar_curve_area_by_monte_carlo():
    curve = g.PolarCurve(1.0, -0.3, 5, "cos")
    lo, hi = curve.bounding_box()
    U = np.random.default_rng(5).uniform(lo, hi, size=(200_000, 2))
    frac = np.mean(curve.psi(U) <= 0)
    box = np.prod(hi - lo)
    sd = math.sqrt(frac * (1 - frac) / len(U)) * box
    assert abs(frac * box - curve.area()) < 4 * sd


def test_polar_bounding_box_encloses_curve():
    for curve in (g.PolarCurve(1.0, -0.3, 5, "cos"), g.PolarCurve(0.5, 1 / 7, 5, "sin")):
        lo, hi = curve.bounding_box()
        pts = curve.points(np.random.default_rng(0).uniform(0, 2 * np.pi, 100_000))
        assert np.all(pts >= lo) and np.all(pts <= hi)


def test_polar_curve_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        g.PolarCurve(0.2, 0.3, 5)


# -- boundary ---------------------------------------------------------------------

def test_square_boundary_uniform_per_edge():
    Xb = g.sample_boundary(EX1, 32, "uniform")
    assert len(Xb) == 32
    assert np.all(np.max(np.abs(Xb), axis=1) == 1.0)
    for axis in range(2):
        for side in (-1.0, 1.0):
            assert np.sum(Xb[:, axis] == side) == 8
    with pytest.raises(ValueError):
        g.sample_boundary(EX1, 30, "uniform")


def test_cube_boundary_chebyshev_faces():
    geom = P.preset("ex4").problem.geom
    Xb = g.sample_boundary(geom, 216, "chebyshev")
    assert np.all(np.max(np.abs(Xb), axis=1) == 1.0)
    assert np.allclose(geom.domain.boundary_residual(Xb), 0.0)


def test_six_ball_boundary_norms():
    geom = P.preset("ex5").problem.geom
    Xb = g.sample_boundary(geom, 141, "random", seed=2)
    assert np.abs(np.linalg.norm(Xb, axis=1) - 0.6).max() <= 1e-12


def test_circle_boundary_angles():
    Xb = g.Ball((0.0, 0.0), 1.0).sample_boundary(4, "uniform", None)
    angles = np.mod(np.arctan2(Xb[:, 1], Xb[:, 0]), 2 * np.pi)
    assert np.allclose(angles, [0, np.pi / 2, np.pi, 3 * np.pi / 2], atol=1e-15)


def test_polar_star_boundary_on_curve():
    Xb = STAR_DOMAIN.sample_boundary(40, "random", np.random.default_rng(0))
    assert np.abs(STAR_DOMAIN.curve.psi(Xb)).max() < 1e-14


# -- interface --------------------------------------------------------------------

def test_hypersphere_normals():
    geom = P.preset("ex5").problem.geom
    X, n = g.sample_interface(geom, 50, seed=1)
    assert np.abs(n - X / np.linalg.norm(X, axis=1, keepdims=True)).max() <= 1e-12


def test_ellipse_axis_normal():
    n = EX1.normals(np.array([[0.2, 0.0]]))
    assert np.allclose(n, [[1.0, 0.0]], rtol=0, atol=1e-15)


def _fd_psi_normal(x, h=1e-6):
    """Normalised central-difference gradient of |x| - rho(atan2(x2, x1)), rho = 0.4 - 0.2 cos 5t."""

    def psi(p):
        return math.hypot(p[0], p[1]) - (0.4 - 0.2 * math.cos(5 * math.atan2(p[1], p[0])))

    grad = np.array([(psi(x + h * e) - psi(x - h * e)) / (2 * h) for e in np.eye(2)])
    return grad / np.linalg.norm(grad)


def test_polar_star_normals_against_finite_differences():
    geom = P.preset("ex3").problem.geom
    X, n = g.sample_interface(geom, 50, seed=4)
    fd = np.array([_fd_psi_normal(x) for x in X])
    assert np.abs(n - fd).max() < 1e-6


def test_ellipsoid_interface_points():
    geom = P.preset("ex4").problem.geom
    X, n = g.sample_interface(geom, 100, seed=0)
    assert np.abs(geom.psi(X)).max() < 1e-14
    assert np.all(np.sum(n * X, axis=1) > 0)


def test_interfaces_lie_inside_domains():
    for name in P.PRESETS:
        assert P.preset(name).problem.geom.check_interface_inside()


def test_geometry_dimension_mismatch():
    with pytest.raises(ValueError):
        g.LevelSetGeometry(SQUARE, g.Ellipsoid(0.1, 0.1, 0.1))


# -- collocation sets -------------------------------------------------------------

@pytest.mark.parametrize("name", [n for n in P.PRESETS if n != "fit1d"])
def test_collocation_invariants_on_presets(name):
    pr = P.preset(name)
    cs = pr.collocation()
    assert (cs.M, cs.M_b, cs.M_gamma) == tuple(pr.counts)
    checks = cs.check(pr.problem.geom)
    assert all(checks.values()), checks


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["ex1", "ex2", "ex3", "ex4", "ex5"]), st.integers(0, 2**31 - 1))
def test_collocation_invariants_any_seed(name, seed):
    pr = P.preset(name)
    cs = pr.collocation("random", seed)
    assert all(cs.check(pr.problem.geom).values())


def test_collocation_reproducible_and_streams_independent():
    geom = EX1
    a = g.sample_collocation(geom, 64, 32, 32, "random", seed=9)
    b = g.sample_collocation(geom, 64, 32, 32, "random", seed=9)
    c = g.sample_collocation(geom, 100, 32, 32, "random", seed=9)
    assert np.array_equal(a.interior_x, b.interior_x) and np.array_equal(a.interface_n, b.interface_n)
    assert np.array_equal(a.boundary_x, c.boundary_x)
    assert np.array_equal(a.interface_x, c.interface_x)


def test_collocation_check_detects_bad_labels():
    cs = g.sample_collocation(EX1, 64, 32, 32, "chebyshev")
    cs.interior_z = -cs.interior_z
    assert not cs.check(EX1)["labels"]


def test_collocation_csv(tmp_path):
    cs = g.sample_collocation(EX1, 16, 8, 4, "uniform", seed=0)
    path = tmp_path / "points.csv"
    cs.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "role,x1,x2,z,n1,n2"
    assert len(lines) == 1 + 16 + 8 + 4
    roles = [ln.split(",")[0] for ln in lines[1:]]
    assert roles.count("interior") == 16 and roles.count("interface") == 4
    first = lines[1].split(",")
    assert np.allclose([float(first[1]), float(first[2])], cs.interior_x[0], rtol=0, atol=0)


def test_test_points_cover_domain():
    geom = P.preset("ex3").problem.geom
    X = g.sample_test_points(geom, 500, seed=1)
    assert X.shape == (500, 2) and np.all(geom.domain.contains(X))
