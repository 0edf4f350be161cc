"""Graph transport metric: closed forms, solver cross-checks, geodesics."""

import numpy as np
import pytest

from vvot.errors import BoundaryAnchorsError, DomainError
from vvot.graph import WeightedGraph
from vvot.graph_metric import (SolverConfig, regularized_geodesic,
                               simplex_distance, simplex_distance_matrix,
                               two_node_geodesic, wg_dynamic, wg_two_node)
from vvot.interpolation import ARITHMETIC, GEOMETRIC, custom_interpolation

TWO = WeightedGraph(np.array([[0.0, 1.0], [1.0, 0.0]]))
PATH3 = WeightedGraph(np.array([[0.0, 1.0, 0.0],
                                [1.0, 0.0, 1.0],
                                [0.0, 1.0, 0.0]]))
FAST = SolverConfig(tol=1e-6, check_every=100)


def adaptive_simpson(fun, a, b, tol=1e-10, depth=40):
    # independent oracle for the two-node quadrature
    def simp(f, a, m, b):
        return (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))

    def rec(f, a, b, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        left, right = simp(f, a, lm, m), simp(f, m, rm, b)
        if depth <= 0 or abs(left + right - whole) <= 15 * tol:
            return left + right + (left + right - whole) / 15.0
        return (rec(f, a, m, left, tol / 2, depth - 1)
                + rec(f, m, b, right, tol / 2, depth - 1))

    m = 0.5 * (a + b)
    return rec(fun, a, b, simp(fun, a, m, b), tol, depth)


GEOM_HALF_34 = adaptive_simpson(lambda a: (a * (1 - a)) ** -0.25, 0.5, 0.75)


class TestTwoNodeQuadrature:
    def test_zero_at_equal_endpoints(self):
        assert wg_two_node(GEOMETRIC, 1.0, 0.3, 0.3) == 0.0

    def test_arithmetic_full_interval(self):
        assert wg_two_node(ARITHMETIC, 1.0, 0.0, 1.0) == pytest.approx(
            np.sqrt(2.0), abs=1e-10)

    def test_geometric_against_simpson_oracle(self):
        assert wg_two_node(GEOMETRIC, 1.0, 0.5, 0.75) == pytest.approx(
            GEOM_HALF_34, abs=1e-8)

    def test_symmetry_and_additivity(self):
        d1 = wg_two_node(GEOMETRIC, 1.0, 0.2, 0.9)
        assert wg_two_node(GEOMETRIC, 1.0, 0.9, 0.2) == pytest.approx(d1, abs=1e-12)
        d2 = (wg_two_node(GEOMETRIC, 1.0, 0.2, 0.5)
              + wg_two_node(GEOMETRIC, 1.0, 0.5, 0.9))
        assert d1 == pytest.approx(d2, abs=1e-9)

    def test_metric_axioms_random_triples(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a, b, c = rng.uniform(0, 1, 3)
            dab = wg_two_node(GEOMETRIC, 2.0, a, b)
            dbc = wg_two_node(GEOMETRIC, 2.0, b, c)
            dac = wg_two_node(GEOMETRIC, 2.0, a, c)
            assert dac <= dab + dbc + 1e-9
            assert dab >= 0

    def test_weight_scaling(self):
        d1 = wg_two_node(ARITHMETIC, 1.0, 0.0, 1.0)
        d4 = wg_two_node(ARITHMETIC, 4.0, 0.0, 1.0)
        assert d4 == pytest.approx(d1 / 2.0, abs=1e-12)

    def test_invalid_inputs(self):
        with pytest.raises(DomainError):
            wg_two_node(GEOMETRIC, 0.0, 0.0, 1.0)
        with pytest.raises(DomainError):
            wg_two_node(GEOMETRIC, 1.0, -0.1, 1.0)


class TestDynamicSolver:
    def test_equal_endpoints_zero(self):
        d, path = wg_dynamic(TWO, GEOMETRIC, [0.4, 0.6], [0.4, 0.6], T=16,
                             cfg=FAST)
        assert d <= 1e-8
        assert np.allclose(path.states, path.states[0])

    def test_two_node_arithmetic_deltas(self):
        d, path = wg_dynamic(TWO, ARITHMETIC, [1.0, 0.0], [0.0, 1.0], T=64,
                             cfg=FAST)
        assert d == pytest.approx(np.sqrt(2.0), abs=2e-2)
        assert path.converged

    def test_two_node_geometric_interior(self):
        d, _ = wg_dynamic(TWO, GEOMETRIC, [0.5, 0.5], [0.75, 0.25], T=64,
                          cfg=FAST)
        assert d == pytest.approx(GEOM_HALF_34, abs=5e-3)

    def test_symmetry(self):
        d1, _ = wg_dynamic(TWO, GEOMETRIC, [0.5, 0.5], [0.9, 0.1], T=32,
                           cfg=FAST)
        d2, _ = wg_dynamic(TWO, GEOMETRIC, [0.9, 0.1], [0.5, 0.5], T=32,
                           cfg=FAST)
        assert d1 == pytest.approx(d2, abs=1e-4)

    def test_action_matches_distance(self):
        d, path = wg_dynamic(PATH3, ARITHMETIC, [0.7, 0.1, 0.2],
                             [0.1, 0.3, 0.6], T=32, cfg=FAST)
        assert path.action(PATH3, ARITHMETIC) == pytest.approx(d * d, rel=1e-8)

    def test_path_exactly_feasible(self):
        d, path = wg_dynamic(PATH3, GEOMETRIC, [0.6, 0.2, 0.2],
                             [0.1, 0.2, 0.7], T=32, cfg=FAST)
        assert path.continuity_residual(PATH3) < 1e-12

    def test_lower_bound_euclidean(self):
        # W >= |p1 - p0|/sqrt(2)
        rng = np.random.default_rng(5)
        for _ in range(5):
            p0 = rng.dirichlet(np.ones(3))
            p1 = rng.dirichlet(np.ones(3))
            d, _ = wg_dynamic(PATH3, ARITHMETIC, p0, p1, T=32, cfg=FAST)
            assert d >= np.linalg.norm(p1 - p0) / np.sqrt(2.0) - 1e-3

    def test_upper_bound_ratio_bounded(self):
        # W <= C sqrt(|p1-p0|): assert boundedness of the ratio only
        rng = np.random.default_rng(6)
        ratios = []
        for _ in range(5):
            p0 = rng.dirichlet(np.ones(3))
            p1 = rng.dirichlet(np.ones(3))
            d, _ = wg_dynamic(PATH3, GEOMETRIC, p0, p1, T=32, cfg=FAST)
            gap = np.linalg.norm(p1 - p0)
            if gap > 1e-6:
                ratios.append(d / np.sqrt(gap))
        assert max(ratios) < 50.0

    def test_boundary_touching_instance_converges(self):
        # tree graph instances may have geodesics through the boundary;
        # the solver must not assume interior iterates
        d, path = wg_dynamic(PATH3, ARITHMETIC, [0.45, 0.1, 0.45],
                             [0.1, 0.8, 0.1], T=32, cfg=FAST)
        assert np.isfinite(d)
        assert path.continuity_residual(PATH3) < 1e-12

    def test_delta_to_delta_three_node_routes_mass(self):
        d13, _ = wg_dynamic(PATH3, ARITHMETIC, [1.0, 0.0, 0.0],
                            [0.0, 0.0, 1.0], T=32, cfg=FAST)
        d12, _ = wg_dynamic(PATH3, ARITHMETIC, [1.0, 0.0, 0.0],
                            [0.0, 1.0, 0.0], T=32, cfg=FAST)
        assert d13 <= d12 * 2 + 1e-3
        assert d13 >= d12 - 1e-3


class TestSimplexDistance:
    def test_equal_points(self):
        assert simplex_distance(TWO, GEOMETRIC, [0.3], [0.3]) == 0.0

    def test_two_node_delegates_to_quadrature(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            r0, r1 = rng.uniform(0, 1, 2)
            assert simplex_distance(TWO, GEOMETRIC, [r0], [r1]) == pytest.approx(
                wg_two_node(GEOMETRIC, 1.0, r0, r1), abs=1e-12)

    def test_n2_solver_consistency(self):
        rng = np.random.default_rng(8)
        for _ in range(3):
            r0, r1 = rng.uniform(0.05, 0.95, 2)
            quad = wg_two_node(GEOMETRIC, 1.0, r0, r1)
            d, _ = wg_dynamic(TWO, GEOMETRIC, [r0, 1 - r0], [r1, 1 - r1],
                              T=64, cfg=FAST)
            assert d == pytest.approx(quad, abs=2e-2)

    def test_lower_bound_against_euclidean(self):
        rng = np.random.default_rng(9)
        pts = rng.dirichlet(np.ones(3), size=4)[:, :2]
        from vvot.measures import simplex_to_distribution
        mat = simplex_distance_matrix(PATH3, ARITHMETIC, pts, T=24, cfg=FAST)
        for i in range(4):
            for j in range(4):
                gap = np.linalg.norm(simplex_to_distribution(pts[i])
                                     - simplex_to_distribution(pts[j]))
                assert mat[i, j] >= gap / np.sqrt(2.0) - 2e-3

    def test_matrix_consistent_with_scalar(self):
        pts = [np.array([0.2, 0.3]), np.array([0.5, 0.1]), np.array([0.0, 0.0])]
        mat = simplex_distance_matrix(PATH3, ARITHMETIC, pts, T=16, cfg=FAST)
        assert np.allclose(mat, mat.T)
        assert np.all(np.diag(mat) == 0)
        d01 = simplex_distance(PATH3, ARITHMETIC, pts[0], pts[1], T=16, cfg=FAST)
        assert mat[0, 1] == pytest.approx(d01, abs=1e-6)


class TestTwoNodeGeodesic:
    def test_constant_path(self):
        path = two_node_geodesic(GEOMETRIC, 1.0, 0.4, 0.4, steps=8)
        assert np.allclose(path.states[:, 0], 0.4)

    def test_arithmetic_linear(self):
        # theta(r,1-r) = 1/2 constant, so r(t) = 1/2 + t/4
        path = two_node_geodesic(ARITHMETIC, 1.0, 0.5, 0.75, steps=16)
        expect = 0.5 + 0.25 * path.times
        assert np.allclose(path.states[:, 0], expect, atol=1e-9)

    def test_geometric_endpoint_accuracy(self):
        path = two_node_geodesic(GEOMETRIC, 1.0, 0.5, 0.75, steps=64)
        assert abs(path.states[-1, 0] - 0.75) <= 1e-6

    def test_constant_speed_via_quadrature(self):
        # d(r(s), r(t)) == |t-s| * d(r0, r1) along the path
        path = two_node_geodesic(GEOMETRIC, 1.0, 0.5, 0.75, steps=64)
        total = wg_two_node(GEOMETRIC, 1.0, 0.5, 0.75)
        for k in (16, 32, 48):
            seg = wg_two_node(GEOMETRIC, 1.0, 0.5, float(path.states[k, 0]))
            assert seg == pytest.approx(path.times[k] * total, abs=1e-6)

    def test_boundary_endpoint_falls_back(self):
        # theta -> 0 at r=1; endpoint still hit to 1e-6
        path = two_node_geodesic(GEOMETRIC, 1.0, 0.25, 1.0, steps=32)
        assert abs(path.states[-1, 0] - 1.0) <= 1e-6
        assert np.all(np.diff(path.states[:, 0]) >= -1e-12)


class TestRegularizedGeodesic:
    def test_identity_at_zero(self):
        pts = [np.array([0.1, 0.2]), np.array([0.4, 0.4])]
        out = regularized_geodesic(pts, 0.0, np.array([1 / 3, 1 / 3]),
                                   np.array([1 / 3, 1 / 3]))
        assert all(np.allclose(a, b) for a, b in zip(out, pts))

    def test_full_pull_is_segment(self):
        pts = [np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        s0 = np.array([0.2, 0.3])
        s1 = np.array([0.5, 0.25])
        out = regularized_geodesic(pts, 1.0, s0, s1)
        ts = np.linspace(0, 1, 3)
        for o, t in zip(out, ts):
            assert np.allclose(o, (1 - t) * s0 + t * s1)

    def test_margin_guarantee(self):
        from vvot.measures import simplex_min_margin
        bary = np.array([1 / 3, 1 / 3])
        pts = [np.array([1.0, 0.0]), np.array([0.0, 0.0]), np.array([0.0, 1.0])]
        out = regularized_geodesic(pts, 0.1, bary, bary)
        for o in out:
            assert simplex_min_margin(o) >= 0.1 / 3 - 1e-12

    def test_boundary_anchor_rejected(self):
        with pytest.raises(BoundaryAnchorsError):
            regularized_geodesic([np.array([0.5, 0.2])], 0.5,
                                 np.array([1.0, 0.0]), np.array([0.3, 0.3]))


def test_max_mean_nonvanishing_flag():
    f = custom_interpolation(lambda s, t: np.minimum(s, t))
    # minimum vanishes at the boundary; distance still computable
    d = wg_two_node(f, 1.0, 0.25, 0.75)
    assert np.isfinite(d) and d > 0
