"""Graph operators: validation, gradient/divergence duality, Laplacian."""

import math

import numpy as np
import pytest

from vvot.errors import (DomainError, GraphValidationError, NotInRangeError,
                         RankDeficientError)
from vvot.graph import (WeightedGraph, conjugate_cone_contains,
                        graph_divergence, graph_gradient, graph_validate,
                        laplacian_pinv_apply, perspective_energy,
                        tangent_inner_product, weighted_laplacian)
from vvot.interpolation import ARITHMETIC, GEOMETRIC


def two_node():
    return WeightedGraph(np.array([[0.0, 1.0], [1.0, 0.0]]))


def path3():
    return WeightedGraph(np.array([[0.0, 1.0, 0.0],
                                   [1.0, 0.0, 1.0],
                                   [0.0, 1.0, 0.0]]))


class TestValidation:
    def test_two_node_ok(self):
        graph_validate(two_node())

    def test_disconnected(self):
        g = WeightedGraph(np.array([[0.0, 1.0, 0.0],
                                    [1.0, 0.0, 0.0],
                                    [0.0, 0.0, 0.0]]))
        with pytest.raises(GraphValidationError) as e:
            graph_validate(g)
        assert e.value.reason == "disconnected"

    def test_asymmetric(self):
        g = WeightedGraph(np.array([[0.0, 1.0], [2.0, 0.0]]))
        with pytest.raises(GraphValidationError) as e:
            graph_validate(g)
        assert e.value.reason == "asymmetric"

    def test_negative(self):
        g = WeightedGraph(np.array([[0.0, -1.0], [-1.0, 0.0]]))
        with pytest.raises(GraphValidationError) as e:
            graph_validate(g)
        assert e.value.reason == "negative_weight"


class TestGradientDivergence:
    def test_gradient_values(self):
        grad = graph_gradient(two_node(), np.array([0.0, 1.0]))
        assert np.array_equal(grad, np.array([[0.0, 1.0], [-1.0, 0.0]]))

    def test_constants_in_kernel(self):
        g = path3()
        assert np.all(graph_gradient(g, 3.7 * np.ones(3)) == 0.0)

    def test_entry_value(self):
        g = path3()
        grad = graph_gradient(g, np.array([1.0, 2.0, 4.0]))
        assert grad[0, 2] == 3.0

    def test_symmetric_field_has_zero_divergence(self):
        g = path3()
        rng = np.random.default_rng(0)
        v = rng.standard_normal((3, 3))
        v = v + v.T
        assert np.allclose(graph_divergence(g, v), 0.0)

    def test_two_node_divergence(self):
        g = two_node()
        v = np.array([[0.0, 1.0], [-1.0, 0.0]])
        assert np.allclose(graph_divergence(g, v), [-1.0, 1.0])

    def test_divergence_sums_to_zero(self):
        g = path3()
        rng = np.random.default_rng(1)
        for _ in range(5):
            v = rng.standard_normal((3, 3))
            assert abs(graph_divergence(g, v).sum()) < 1e-14

    def test_adjoint_identity(self):
        # <phi, div v> == +1/2 sum (grad phi)_ij v_ij q_ij for antisymmetric
        # v; follows from the operator definitions and makes the entrywise
        # weighted Laplacian B(p) = div(theta grad .) positive semidefinite
        g = path3()
        rng = np.random.default_rng(2)
        for _ in range(10):
            phi = rng.standard_normal(3)
            v = rng.standard_normal((3, 3))
            v = 0.5 * (v - v.T)
            lhs = float(phi @ graph_divergence(g, v))
            grad = graph_gradient(g, phi)
            rhs = 0.5 * float((grad * v * g.q).sum())
            assert lhs == pytest.approx(rhs, abs=1e-12)


class TestWeightedLaplacian:
    def test_two_node_arithmetic(self):
        B = weighted_laplacian(two_node(), ARITHMETIC, np.array([0.5, 0.5]))
        assert np.allclose(B, np.array([[0.5, -0.5], [-0.5, 0.5]]))

    def test_rows_sum_zero(self):
        g = path3()
        rng = np.random.default_rng(3)
        for _ in range(5):
            p = rng.dirichlet(np.ones(3))
            B = weighted_laplacian(g, GEOMETRIC, p)
            assert np.allclose(B @ np.ones(3), 0.0, atol=1e-14)

    def test_path_graph_geometric_entry(self):
        # hand evaluation: B_11 = theta(1/4,1/4)*q_12 = 1/4 on the path graph
        B = weighted_laplacian(path3(), GEOMETRIC, np.array([0.25, 0.25, 0.5]))
        assert B[0, 0] == pytest.approx(0.25, abs=1e-15)

    def test_psd_with_simple_kernel(self):
        g = path3()
        rng = np.random.default_rng(4)
        for _ in range(5):
            p = rng.dirichlet(np.ones(3)) * 0.9 + 0.1 / 3
            B = weighted_laplacian(g, GEOMETRIC, p)
            evals = np.linalg.eigvalsh(B)
            assert evals[0] > -1e-12
            assert evals[1] > 1e-10  # kernel is exactly the constants

    def test_pinv_examples(self):
        B = np.array([[0.5, -0.5], [-0.5, 0.5]])
        assert np.allclose(laplacian_pinv_apply(B, np.zeros(2)), 0.0)
        psi = laplacian_pinv_apply(B, np.array([1.0, -1.0]))
        assert np.allclose(B @ psi, [1.0, -1.0])
        assert abs(psi.sum()) < 1e-12
        assert np.allclose(psi, [1.0, -1.0])

    def test_pinv_residual_random(self):
        g = path3()
        rng = np.random.default_rng(5)
        for _ in range(10):
            p = rng.dirichlet(np.ones(3)) * 0.8 + 0.2 / 3
            B = weighted_laplacian(g, GEOMETRIC, p)
            rhs = rng.standard_normal(3)
            rhs -= rhs.mean()
            psi = laplacian_pinv_apply(B, rhs)
            assert np.linalg.norm(B @ psi - rhs) < 1e-9
            assert abs(psi.sum()) < 1e-10

    def test_pinv_error_cases(self):
        B = np.array([[0.5, -0.5], [-0.5, 0.5]])
        with pytest.raises(NotInRangeError):
            laplacian_pinv_apply(B, np.array([1.0, 1.0]))
        with pytest.raises(RankDeficientError):
            laplacian_pinv_apply(np.zeros((3, 3)), np.zeros(3))


class TestTangentInnerProduct:
    def test_zero(self):
        g = two_node()
        assert tangent_inner_product(g, ARITHMETIC, np.array([0.5, 0.5]),
                                     np.zeros((2, 2)), np.zeros((2, 2))) == 0.0

    def test_two_node_value(self):
        g = two_node()
        u = np.array([[0.0, 1.0], [-1.0, 0.0]])
        val = tangent_inner_product(g, ARITHMETIC, np.array([0.5, 0.5]), u, u)
        assert val == pytest.approx(0.5, abs=1e-15)

    def test_dirichlet_form_identity(self):
        # <grad phi, grad phi>_p equals phi^T B(p) phi
        g = path3()
        rng = np.random.default_rng(6)
        for _ in range(10):
            p = rng.dirichlet(np.ones(3))
            phi = rng.standard_normal(3)
            grad = graph_gradient(g, phi)
            lhs = tangent_inner_product(g, GEOMETRIC, p, grad, grad)
            rhs = float(phi @ weighted_laplacian(g, GEOMETRIC, p) @ phi)
            assert lhs == pytest.approx(rhs, abs=1e-12)


class TestPerspective:
    def test_conventions(self):
        assert perspective_energy(0.0, 0.0, 0.0, GEOMETRIC) == 0.0
        assert perspective_energy(2.0, 1.0, 1.0, ARITHMETIC) == pytest.approx(4.0)
        assert perspective_energy(1.0, 0.0, 0.0, GEOMETRIC) == math.inf
        assert perspective_energy(1.0, -0.5, 1.0, ARITHMETIC) == math.inf

    def test_vector_argument(self):
        v = np.array([3.0, 4.0])
        assert perspective_energy(v, 1.0, 1.0, ARITHMETIC) == pytest.approx(25.0)


class TestConjugateCone:
    def test_simple_members(self):
        assert conjugate_cone_contains(-1.0, -1.0, 0.0, ARITHMETIC)
        assert not conjugate_cone_contains(1.0, 0.0, 0.0, ARITHMETIC)

    def test_paper_sufficient_region(self):
        # {a + |c|^2/8 <= 0} cap {b + |c|^2/8 <= 0} lies inside the cone
        for c in (0.5, 1.0, 2.0):
            a = b = -c * c / 8.0
            assert conjugate_cone_contains(a, b, c, ARITHMETIC, tol=1e-9)
            assert conjugate_cone_contains(a, b, c, GEOMETRIC, tol=1e-9)

    def test_fenchel_spot_check(self):
        # sup over directions of a t + b s + c m - alpha(m,t,s): zero-ish
        # for members, strictly positive (growing linearly in radius)
        # for non-members
        rng = np.random.default_rng(7)
        f = GEOMETRIC
        xs = np.linspace(0.0, 1.0, 41)
        for _ in range(40):
            a, b, c = rng.uniform(-2, 2, 3)
            member = conjugate_cone_contains(a, b, c, f, tol=1e-9)
            best = -np.inf
            for xi in xs:
                t, s = xi, 1.0 - xi
                th = float(f(t, s))
                # optimal m for fixed (t,s): m = c*th/2
                m = c * th / 2.0
                val = a * t + b * s + c * m - (m * m / th if th > 0 else 0.0)
                best = max(best, val)
            if member:
                assert best <= 1e-8
            else:
                assert best > 0
                # 1-homogeneity: value at radius R scales linearly
                assert best * 1e3 > 100 * best
