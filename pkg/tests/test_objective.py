import numpy as np
import pytest

from byzopt import objective as ob


def finite_diff(fun, x, h=1e-6):
    g = np.zeros_like(x)
    for e in range(x.size):
        step = np.zeros_like(x)
        step[e] = h
        g[e] = (fun(x + step) - fun(x - step)) / (2 * h)
    return g


def make_softmax_instance(rng, m=2, q=4, n_classes=3, feat_dim=5, beta1=0.3, beta2=0.05):
    shards = []
    for _ in range(m):
        feats = rng.standard_normal((q, feat_dim))
        labels = rng.integers(0, n_classes, size=q)
        shards.append((feats, labels))
    return ob.make_softmax(shards, n_classes, feat_dim, beta1, beta2)


class TestComponentGrad:
    def test_lasso_by_inspection(self):
        p = ob.ProblemInstance(kind="synthetic_lasso", n=2,
                               shards=((np.array([[1.0, 0.0]]), np.array([0.0])),),
                               beta1=0.0, beta2=0.0,
                               mu_i=np.array([0.0]), L_i=np.array([1.0]))
        g = ob.component_grad(p, 0, 0, np.array([2.0, 3.0]))
        np.testing.assert_allclose(g, [2.0, 0.0], atol=1e-15)

    def test_softmax_at_origin(self, rng):
        # ridge gradient vanishes at the origin, so beta1 does not enter
        p = make_softmax_instance(rng, m=1, q=1, n_classes=4, feat_dim=3, beta1=0.3)
        feats, labels = p.shards[0]
        g = ob.component_grad(p, 0, 0, np.zeros(p.n)).reshape(4, 3)
        for t in range(4):
            expect = (1.0 / 4 - (1.0 if t == labels[0] else 0.0)) * feats[0]
            np.testing.assert_allclose(g[t], expect, atol=1e-12)

    @pytest.mark.parametrize("kind", ["lasso", "softmax"])
    def test_finite_difference_agreement(self, rng, kind):
        if kind == "lasso":
            p = ob.make_synthetic_lasso(2, 5, 3, seed=3, beta1=0.4, beta2=0.0)
        else:
            p = make_softmax_instance(rng)
        for _ in range(10):
            x = rng.standard_normal(p.n)
            agent = int(rng.integers(p.m))
            l = int(rng.integers(p.q(agent)))
            g = ob.component_grad(p, agent, l, x)
            fd = finite_diff(lambda z: ob.component_value(p, agent, l, z), x)
            assert np.max(np.abs(g - fd)) <= 1e-5

    def test_index_out_of_range(self, small_lasso):
        with pytest.raises(IndexError):
            ob.component_grad(small_lasso, 0, 99, np.zeros(small_lasso.n))


class TestFullGrad:
    def test_single_sample_equals_component(self, rng):
        p = ob.make_synthetic_lasso(1, 4, 1, seed=5, beta1=0.2, beta2=0.0)
        x = rng.standard_normal(4)
        np.testing.assert_allclose(ob.full_grad(p, 0, x),
                                   ob.component_grad(p, 0, 0, x), atol=1e-14)

    def test_matches_component_mean(self, small_lasso, rng):
        p = small_lasso
        for agent in range(p.m):
            x = rng.standard_normal(p.n)
            brute = sum(ob.component_grad(p, agent, l, x) for l in range(p.q(agent)))
            brute /= p.q(agent)
            assert np.max(np.abs(ob.full_grad(p, agent, x) - brute)) <= 1e-12

    def test_softmax_full_matches_mean(self, rng):
        p = make_softmax_instance(rng)
        x = rng.standard_normal(p.n)
        brute = sum(ob.component_grad(p, 0, l, x) for l in range(p.q(0))) / p.q(0)
        np.testing.assert_allclose(ob.full_grad(p, 0, x), brute, atol=1e-12)


class TestProx:
    def test_identity_when_no_l1(self, rng):
        p = ob.make_synthetic_lasso(1, 3, 2, seed=1, beta2=0.0)
        v = rng.standard_normal(3)
        np.testing.assert_array_equal(ob.prox_g(p, 0.7, v), v)

    def test_closed_form(self):
        p = ob.make_synthetic_lasso(1, 2, 2, seed=1, beta2=1.0)
        np.testing.assert_allclose(ob.prox_g(p, 1.0, np.array([3.0, -0.5])),
                                   [2.0, 0.0], atol=1e-15)

    def test_matches_scalar_minimization(self, rng):
        p = ob.make_synthetic_lasso(1, 1, 2, seed=1, beta2=0.3)
        alpha = 0.8
        for _ in range(20):
            v = float(rng.standard_normal())
            center, half = v, 3.0
            for _ in range(3):  # coarse-to-fine grid minimization
                grid = np.linspace(center - half, center + half, 100_001)
                vals = p.beta2 * np.abs(grid) + (grid - v) ** 2 / (2 * alpha)
                center = grid[np.argmin(vals)]
                half = 2 * (grid[1] - grid[0])
            got = float(ob.prox_g(p, alpha, np.array([v]))[0])
            assert abs(got - center) <= 1e-6

    def test_nonexpansive(self, small_lasso, rng):
        p = small_lasso
        for _ in range(200):
            x, y = rng.standard_normal((2, p.n))
            dx = np.linalg.norm(ob.prox_g(p, 0.5, x) - ob.prox_g(p, 0.5, y))
            assert dx <= np.linalg.norm(x - y) * (1 + 1e-12) + 1e-15


class TestBregman:
    def test_zero_at_optimum_point(self, small_lasso):
        p = small_lasso
        x_star = ob.solve_centralized(p, range(p.m), tol=1e-11)
        stack = np.tile(x_star, (p.m, 1))
        assert ob.bregman(p, stack, x_star, range(p.m)) == pytest.approx(0.0, abs=1e-12)

    def test_quadratic_closed_form(self, rng):
        # components 1/2 (x_e - y)^2 summed over orthonormal rows: Hessian = I
        n = 3
        a = np.eye(n)
        shards = tuple((a, rng.standard_normal(n)) for _ in range(2))
        p = ob.ProblemInstance(kind="synthetic_lasso", n=n, shards=shards,
                               beta1=0.0, beta2=0.0,
                               mu_i=np.array([1.0 / n, 1.0 / n]),
                               L_i=np.array([1.0, 1.0]))
        x_star = rng.standard_normal(n)
        stack = x_star + rng.standard_normal((2, n))
        expect = sum(0.5 / n * np.sum((stack[i] - x_star) ** 2) for i in range(2))
        got = ob.bregman(p, stack, x_star, range(2))
        assert got == pytest.approx(expect, rel=1e-10)

    def test_nonnegative(self, small_lasso, rng):
        p = small_lasso
        x_star = rng.standard_normal(p.n)
        for _ in range(100):
            stack = rng.standard_normal((p.m, p.n)) * 3
            assert ob.bregman(p, stack, x_star, range(p.m)) >= -1e-10

    def test_zero_iff_consensus_at_optimum(self, small_lasso, rng):
        p = small_lasso
        x_star = ob.solve_centralized(p, range(p.m), tol=1e-11)
        stack = np.tile(x_star, (p.m, 1))
        stack[1] += 1e-3 * rng.standard_normal(p.n)
        assert ob.bregman(p, stack, x_star, range(p.m)) > 1e-10


class TestOracle:
    def test_scalar_lasso(self):
        p = ob.ProblemInstance(kind="synthetic_lasso", n=1,
                               shards=((np.array([[1.0]]), np.array([3.0])),),
                               beta1=0.0, beta2=1.0,
                               mu_i=np.array([1.0]), L_i=np.array([1.0]))
        x = ob.solve_centralized(p, [0], tol=1e-12)
        assert x[0] == pytest.approx(2.0, abs=1e-10)

    def test_symmetric_quadratics(self):
        shards = ((np.array([[1.0]]), np.array([1.0])),
                  (np.array([[1.0]]), np.array([-1.0])))
        p = ob.ProblemInstance(kind="synthetic_lasso", n=1, shards=shards,
                               beta1=0.0, beta2=0.0,
                               mu_i=np.array([1.0, 1.0]), L_i=np.array([1.0, 1.0]))
        x = ob.solve_centralized(p, [0, 1], tol=1e-12)
        assert x[0] == pytest.approx(0.0, abs=1e-10)

    def test_kkt_fixed_point(self, rng):
        p = ob.make_synthetic_lasso(4, 8, 6, seed=13, beta1=0.3, beta2=0.05)
        tol = 1e-9
        x = ob.solve_centralized(p, range(4), tol=tol)
        step = 1.0 / np.mean(p.L_i)
        grad = sum(ob.full_grad(p, i, x) for i in range(4)) / 4
        resid = np.linalg.norm(x - ob.prox_g(p, step, x - step * grad))
        assert resid <= tol

    def test_nonconvergence_reports_residual(self):
        p = ob.make_synthetic_lasso(2, 6, 4, seed=3, beta1=0.1, beta2=0.05)
        with pytest.raises(ob.ObjectiveError, match="residual"):
            ob.solve_centralized(p, range(2), tol=1e-14, max_iter=2)


class TestAccuracy:
    def test_uniform_scores_predict_class_zero(self, rng):
        p = make_softmax_instance(rng, n_classes=10, feat_dim=4)
        labels = np.repeat(np.arange(10), 5)
        test = ob.SampleBatch(features=rng.standard_normal((50, 4)), labels=labels)
        acc = ob.test_accuracy(p, np.zeros(p.n), test)
        assert acc == pytest.approx(np.mean(labels == 0))

    def test_separable_toy_reaches_one(self):
        feats = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 0.1], [0.3, 3.0]])
        labels = np.array([0, 1, 0, 1])
        p = ob.make_softmax([(feats, labels)], n_classes=2, feat_dim=2,
                            beta1=0.1, beta2=0.0)
        oracle_x = np.array([1.0, 0.0, 0.0, 1.0]) * 10
        assert ob.test_accuracy(p, oracle_x, ob.SampleBatch(feats, labels)) == 1.0

    def test_rejects_lasso(self, small_lasso):
        batch = ob.SampleBatch(np.zeros((1, 2)), np.zeros(1, dtype=int))
        with pytest.raises(ob.ObjectiveError):
            ob.test_accuracy(small_lasso, np.zeros(small_lasso.n), batch)


class TestCurvatureProperties:
    def test_lipschitz_empirical(self, rng):
        for p in (ob.make_synthetic_lasso(3, 5, 6, seed=9, beta1=0.2, beta2=0.0),
                  make_softmax_instance(rng)):
            L = p.L
            for _ in range(200):
                agent = int(rng.integers(p.m))
                x, z = rng.standard_normal((2, p.n))
                lhs = np.linalg.norm(ob.full_grad(p, agent, x) - ob.full_grad(p, agent, z))
                assert lhs <= L * np.linalg.norm(x - z) * (1 + 1e-10)

    def test_strong_monotonicity_empirical(self, rng):
        p = ob.make_synthetic_lasso(3, 5, 6, seed=9, beta1=0.2, beta2=0.0)
        rel = range(p.m)
        mu = p.constants(rel)[0]
        for _ in range(200):
            agent = int(rng.integers(p.m))
            x, z = rng.standard_normal((2, p.n))
            diff = ob.full_grad(p, agent, x) - ob.full_grad(p, agent, z)
            assert diff @ (x - z) >= mu * np.sum((x - z) ** 2) * (1 - 1e-10)

    def test_component_smoothness_covered_by_L(self, rng):
        # L is the component-max constant, so it must cover every component
        p = ob.make_synthetic_lasso(3, 5, 6, seed=9, beta1=0.2, beta2=0.0)
        for _ in range(100):
            agent = int(rng.integers(p.m))
            l = int(rng.integers(p.q(agent)))
            x, z = rng.standard_normal((2, p.n))
            lhs = np.linalg.norm(ob.component_grad(p, agent, l, x)
                                 - ob.component_grad(p, agent, l, z))
            assert lhs <= p.L * np.linalg.norm(x - z) * (1 + 1e-10)
