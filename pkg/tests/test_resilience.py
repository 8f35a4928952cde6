import numpy as np
import pytest

from byzopt import objective as ob
from byzopt import topology as tp
from byzopt.resilience import (
    InboxMessage,
    PenaltyConfig,
    norm_subgradient,
    prox_step,
    resilient_descent_step,
)


class TestNormSubgradient:
    def test_zero_at_kink(self):
        for a in (1, 2):
            np.testing.assert_array_equal(norm_subgradient(np.zeros(4), a), 0.0)

    def test_sign_vector_identity(self):
        d = np.array([2.0, -3.0, 0.0])
        z = norm_subgradient(d, 1)
        np.testing.assert_array_equal(z, [1.0, -1.0, 0.0])
        assert z @ d == np.sum(np.abs(d)) == 5.0
        assert np.max(np.abs(z)) == 1.0

    def test_unit_direction(self):
        z = norm_subgradient(np.array([3.0, 4.0]), 2)
        np.testing.assert_allclose(z, [0.6, 0.8], atol=1e-15)
        assert z @ np.array([3.0, 4.0]) == pytest.approx(5.0, abs=1e-12)

    def test_duality_properties_random(self, rng):
        for _ in range(1000):
            d = rng.standard_normal(rng.integers(1, 12))
            z1 = norm_subgradient(d, 1)
            assert abs(z1 @ d - np.sum(np.abs(d))) <= 1e-12 * max(1, np.sum(np.abs(d)))
            assert np.max(np.abs(z1)) <= 1.0
            z2 = norm_subgradient(d, 2)
            assert abs(z2 @ d - np.linalg.norm(d)) <= 1e-12 * max(1, np.linalg.norm(d))
            assert np.linalg.norm(z2) <= 1.0 + 1e-12


class TestDescentStep:
    def test_consensus_is_fixed_point(self, rng):
        x = rng.standard_normal(5)
        inbox = [InboxMessage(j, x.copy()) for j in range(3)]
        out = resilient_descent_step(x, np.zeros(5), inbox, PenaltyConfig(0.7), alpha=0.2)
        np.testing.assert_array_equal(out, x)

    def test_huge_payload_is_saturated(self):
        x = np.zeros(3)
        inbox = [InboxMessage(0, np.full(3, 1e30))]
        cfg = PenaltyConfig(phi=0.5, a_norm=1)
        out = resilient_descent_step(x, np.zeros(3), inbox, cfg, alpha=0.1)
        np.testing.assert_array_equal(out, np.full(3, 0.05))  # exactly alpha*phi

    def test_hand_arithmetic(self):
        x = np.array([1.0])
        inbox = [InboxMessage(0, np.array([0.0])), InboxMessage(1, np.array([2.0]))]
        out = resilient_descent_step(x, np.array([0.5]), inbox,
                                     PenaltyConfig(phi=0.3, a_norm=1), alpha=0.1)
        assert out[0] == pytest.approx(0.95, abs=1e-15)

    def test_bounded_influence_cap(self, rng):
        cfg = PenaltyConfig(phi=0.8, a_norm=1)
        alpha = 0.05
        for _ in range(50):
            n = int(rng.integers(1, 8))
            deg = int(rng.integers(1, 7))
            x = rng.standard_normal(n)
            r = rng.standard_normal(n)
            scale = 10.0 ** rng.integers(0, 28)
            inbox = [InboxMessage(j, scale * rng.standard_normal(n)) for j in range(deg)]
            out = resilient_descent_step(x, r, inbox, cfg, alpha)
            displacement = out - x + alpha * r
            assert np.max(np.abs(displacement)) <= alpha * cfg.phi * deg + 1e-15

    def test_permutation_invariance(self, rng):
        x = rng.standard_normal(4)
        r = rng.standard_normal(4)
        inbox = [InboxMessage(j, rng.standard_normal(4)) for j in range(5)]
        cfg = PenaltyConfig(phi=0.4, a_norm=2)
        ref = resilient_descent_step(x, r, inbox, cfg, alpha=0.3)
        for _ in range(5):
            shuffled = list(rng.permutation(len(inbox)))
            out = resilient_descent_step(x, r, [inbox[s] for s in shuffled], cfg, alpha=0.3)
            np.testing.assert_array_equal(out, ref)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            resilient_descent_step(np.zeros(3), np.zeros(3),
                                   [InboxMessage(0, np.zeros(4))],
                                   PenaltyConfig(1.0), alpha=0.1)


class TestProxStep:
    def test_identity_without_l1(self, rng):
        p = ob.make_synthetic_lasso(1, 3, 2, seed=1, beta2=0.0)
        v = rng.standard_normal(3)
        np.testing.assert_array_equal(prox_step(v, p, 0.5), v)

    def test_blockwise_equals_stacked(self, small_lasso, rng):
        p = small_lasso
        stack = rng.standard_normal((4, p.n))
        stacked = prox_step(stack, p, 0.3)
        for b in range(4):
            np.testing.assert_array_equal(stacked[b], prox_step(stack[b], p, 0.3))

    def test_nonexpansive(self, small_lasso, rng):
        p = small_lasso
        for _ in range(200):
            x, y = rng.standard_normal((2, 3 * p.n))
            lhs = np.linalg.norm(prox_step(x, p, 0.4) - prox_step(y, p, 0.4))
            assert lhs <= np.linalg.norm(x - y) * (1 + 1e-12) + 1e-15


class TestConsensusFixedPoint:
    def test_certificate_stationarity(self, rng):
        """At the consensus optimum, the certificate edge multipliers make
        every agent's penalized prox-gradient step stationary."""
        for seed in (3, 11, 29):
            m = int(rng.integers(2, 5))
            edges = [(i, j) for i in range(m) for j in range(i + 1, m)]
            t = tp.make_topology(m, edges)
            p = ob.make_synthetic_lasso(m, 4, 6, seed=seed, beta1=0.4, beta2=0.05,
                                        noise_std=0.3)
            x_star = ob.solve_centralized(p, range(m), tol=1e-12)
            grads = [ob.full_grad(p, i, x_star) for i in range(m)]
            g_shared = -np.mean(grads, axis=0)
            psi = np.stack([g + g_shared for g in grads])
            inc = tp.incidence(t)
            phi = 1.01 * tp.min_penalty(inc, list(psi), inc.pi.shape[1])
            y, valid = tp.consensus_certificate(inc, psi, phi, b_norm=np.inf)
            assert valid
            alpha = 0.1
            for row, i in enumerate(inc.reliable_ids):
                pen = inc.pi[row] @ y  # signed certificate sum at agent i
                step = x_star - alpha * (grads[i] + phi * pen)
                resid = np.linalg.norm(x_star - prox_step(step, p, alpha))
                assert resid <= 1e-8
