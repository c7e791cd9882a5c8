import numpy as np
import pytest

from payofflab import (DegenerateChainError, GameParams, MemoryOneStrategy,
                       average_payoffs, discounted_fallback_gradient,
                       multilinear_components, payoff_gradient,
                       press_dyson_payoff, stationary_set, transition_matrix)
from payofflab.payoff import (f_components_raw, f_jacobian,
                              f_jacobian_two_point, gradient_raw, _y_weights)
from payofflab.zd import ZDParams, equalizer_strategy, phi_max, zd_strategy
from conftest import interior_strategy, random_game


def numerator_matrix(p, q, payoffs):
    pcc, pcd, pdc, pdd = p.components()
    qcc, qcd, qdc, qdd = q.components()
    return np.array([
        [pcc * qcc - 1, pcc - 1, qcc - 1, payoffs[0]],
        [pdc * qcd, pdc, qcd - 1, payoffs[1]],
        [pcd * qdc, pcd - 1, qdc, payoffs[2]],
        [pdd * qdd, pdd, qdd, payoffs[3]],
    ])


def fd_gradient(p, q, game, h=1e-6):
    grad = np.empty(4)
    base = q.as_array()
    for j in range(4):
        hi = base.copy()
        hi[j] += h
        lo = base.copy()
        lo[j] -= h
        f_hi = np.stack(f_components_raw(p.as_array(), hi))
        f_lo = np.stack(f_components_raw(p.as_array(), lo))
        w = _y_weights(game)
        pi_hi = (f_hi * w).sum() / f_hi.sum()
        pi_lo = (f_lo * w).sum() / f_lo.sum()
        grad[j] = (pi_hi - pi_lo) / (2 * h)
    return grad


class TestPressDysonPayoff:
    def test_all_cooperators_give_reward(self, gen):
        s = MemoryOneStrategy(1, 1, 1, 1)
        for _ in range(10):
            game = random_game(gen)
            pair = press_dyson_payoff(s, s, game)
            assert pair.pi_y == pytest.approx(game.R, abs=1e-12)
            assert pair.pi_x == pytest.approx(game.R, abs=1e-12)

    def test_win_stay_lose_shift_point(self, g_mid):
        p = MemoryOneStrategy(0.860, 0, 0.225, 0.252)
        pair = press_dyson_payoff(p, MemoryOneStrategy(1, 0, 0, 1), g_mid)
        assert pair.rounded() == (1.87, 2.83)

    def test_matches_stationary_solve(self, gen):
        worst = 0.0
        for _ in range(1000):
            p = interior_strategy(gen)
            q = interior_strategy(gen)
            game = random_game(gen)
            a = press_dyson_payoff(p, q, game)
            b = average_payoffs(p, q, game)
            worst = max(worst, abs(a.pi_y - b.pi_y), abs(a.pi_x - b.pi_x))
        assert worst < 1e-9

    def test_degenerate_raises(self, g_mid):
        rep = MemoryOneStrategy(1, 1, 0, 0)
        with pytest.raises(DegenerateChainError):
            press_dyson_payoff(rep, MemoryOneStrategy(0.5, 0.5, 0.5, 0.5), g_mid)

    def test_matches_determinant_ratio(self, gen, g_mid):
        for _ in range(50):
            p = interior_strategy(gen)
            q = interior_strategy(gen)
            num = np.linalg.det(numerator_matrix(p, q, g_mid.y_payoffs()[[0, 2, 1, 3]]))
            den = np.linalg.det(numerator_matrix(p, q, np.ones(4)))
            pair = press_dyson_payoff(p, q, g_mid)
            assert pair.pi_y == pytest.approx(num / den, abs=1e-9)


class TestMultilinearComponents:
    def test_all_cooperators(self):
        s = MemoryOneStrategy(1, 1, 1, 1)
        comp = multilinear_components(s, s)
        assert (comp.f_cc, comp.f_dc, comp.f_cd, comp.f_dd) == (1, 0, -0.0, 0)
        assert comp.f_sigma == 1.0

    def test_sigma_equals_denominator_determinant(self, gen):
        for _ in range(200):
            p = interior_strategy(gen)
            q = interior_strategy(gen)
            comp = multilinear_components(p, q)
            den = np.linalg.det(numerator_matrix(p, q, np.ones(4)))
            assert comp.f_sigma == pytest.approx(den, abs=1e-10)

    def test_ratios_are_stationary_distribution(self, gen):
        for _ in range(200):
            p = interior_strategy(gen)
            q = interior_strategy(gen)
            comp = multilinear_components(p, q)
            nu = stationary_set(transition_matrix(p, q)).distribution()
            # (f_cc, f_cd, f_dd, f_dc) pair with (CC, CD, DD, DC): f_dc is the
            # S coefficient and S is Y's payoff in state DC
            ratios = comp.as_array() / comp.f_sigma
            assert ratios[0] == pytest.approx(nu[0], abs=1e-9)
            assert ratios[1] == pytest.approx(nu[2], abs=1e-9)
            assert ratios[2] == pytest.approx(nu[1], abs=1e-9)
            assert ratios[3] == pytest.approx(nu[3], abs=1e-9)


class TestPayoffGradient:
    def test_appendix_counterexample_signs(self, g_high):
        p = MemoryOneStrategy(1, 0.12, 0.88, 0)
        q = MemoryOneStrategy(0.08, 0.77, 0.95, 0.68)
        grad = payoff_gradient(p, q, g_high)
        assert grad.d_cc < 0
        assert grad.d_cd < 0

    def test_vanishes_against_equalizer(self, gen, g_mid):
        p, _ = equalizer_strategy(g_mid, 0.7, 0.05)
        for _ in range(20):
            grad = payoff_gradient(p, interior_strategy(gen), g_mid)
            assert grad.max_norm() < 1e-9

    def test_matches_central_differences(self, gen):
        worst = 0.0
        for _ in range(1000):
            p = interior_strategy(gen, 0.05, 0.95)
            q = interior_strategy(gen, 0.05, 0.95)
            game = random_game(gen, -3, 6)
            exact = payoff_gradient(p, q, game).as_array()
            approx = fd_gradient(p, q, game)
            worst = max(worst, np.max(np.abs(exact - approx) / (1 + np.abs(exact))))
        assert worst < 1e-6

    def test_fused_jacobian_matches_two_point(self, gen):
        for _ in range(300):
            p = gen.random(4)
            q = gen.random(4)
            f1, j1 = f_jacobian(p, q)
            f2, j2 = f_jacobian_two_point(p, q)
            assert np.max(np.abs(f1 - f2)) < 1e-13
            assert np.max(np.abs(j1 - j2)) < 1e-13

    def test_monotone_sections(self, gen, g_mid):
        # holding three components fixed, pi_Y is monotone in the fourth
        for _ in range(40):
            p = interior_strategy(gen)
            q = gen.uniform(0.05, 0.95, 4)
            j = int(gen.integers(0, 4))
            values = []
            for x in np.linspace(0.0, 1.0, 50):
                qq = q.copy()
                qq[j] = x
                values.append(press_dyson_payoff(
                    p, MemoryOneStrategy.from_array(qq), g_mid).pi_y)
            diffs = np.diff(values)
            assert np.all(diffs >= -1e-12) or np.all(diffs <= 1e-12)

    def test_control_aligns_both_gradients(self, gen, g_high):
        # a positive-slope relation ties the two players' gradients by chi
        for chi in (1.0, 2.0, 5.0):
            phi = 0.8 * phi_max(g_high, 0.0, chi)
            p = zd_strategy(g_high, ZDParams(kappa=0.0, chi=chi, phi=phi))
            for _ in range(20):
                q = interior_strategy(gen)
                gy = payoff_gradient(p, q, g_high, player="y").as_array()
                gx = payoff_gradient(p, q, g_high, player="x").as_array()
                assert np.max(np.abs(gx - chi * gy)) < 1e-8

    def test_degenerate_fallback_close_to_exact_nearby(self, g_mid):
        # the repeat co-player makes the formula 0/0; the discounted fallback
        # still produces a finite gradient
        p = MemoryOneStrategy(1, 1, 0, 0)
        q = MemoryOneStrategy(0.5, 0.5, 0.5, 0.5)
        with pytest.raises(DegenerateChainError):
            payoff_gradient(p, q, g_mid)
        grad = discounted_fallback_gradient(p, q, g_mid)
        assert np.all(np.isfinite(grad.as_array()))

    def test_gradient_raw_batches(self, gen, g_mid):
        p = gen.uniform(0.1, 0.9, (32, 4))
        q = gen.uniform(0.1, 0.9, (32, 4))
        grad, pi, sigma = gradient_raw(p, q, _y_weights(g_mid))
        assert grad.shape == (32, 4) and pi.shape == (32,)
        for k in (0, 7, 31):
            single = payoff_gradient(MemoryOneStrategy.from_array(p[k]),
                                     MemoryOneStrategy.from_array(q[k]), g_mid)
            assert np.allclose(single.as_array(), grad[k], atol=1e-12)
