import numpy as np
import pytest

from payofflab import (GameParams, MemoryOneStrategy, StrategyNature,
                       classify_fixed_strategy, feasible_region,
                       full_payoff_hull, sample_arcsine_strategy)
from payofflab.region import monotone_chain_hull, point_in_hull
from payofflab.zd import ZDParams, zd_strategy


class TestHull:
    def test_square(self):
        pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5], [0.2, 0.9]])
        hull = monotone_chain_hull(pts)
        assert len(hull) == 4
        assert {tuple(v) for v in hull} == {(0, 0), (1, 0), (1, 1), (0, 1)}

    def test_counterclockwise(self):
        hull = monotone_chain_hull(np.array([[0, 0], [2, 0], [1, 2], [1, 0.5]]))
        area2 = 0.0
        for i in range(len(hull)):
            a, b = hull[i], hull[(i + 1) % len(hull)]
            area2 += a[0] * b[1] - b[0] * a[1]
        assert area2 > 0

    def test_collinear_collapse(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [0.5, 0.5]])
        hull = monotone_chain_hull(pts)
        assert len(hull) == 2

    def test_point_membership(self):
        hull = monotone_chain_hull(np.array([[0, 0], [4, 0], [4, 4], [0, 4]]))
        assert point_in_hull((2, 2), hull)
        assert point_in_hull((0, 0), hull)
        assert not point_in_hull((5, 2), hull)


class TestFeasibleRegion:
    def test_fair_control_is_segment_with_known_optimum(self, g_high):
        p = zd_strategy(g_high, ZDParams(0, 1, 0.11))
        fr = feasible_region(p, g_high)
        assert fr.degeneracy == "segment"
        assert fr.rightmost.rounded() == (2.79, 2.79)
        # all candidates on the diagonal
        for c in fr.candidates:
            assert c.payoff.pi_x == pytest.approx(c.payoff.pi_y, abs=1e-9)

    def test_generous_control_rightmost_is_mutual_cooperation(self, g_unit):
        p = zd_strategy(g_unit, ZDParams(kappa=1, chi=2, phi=0.2))
        fr = feasible_region(p, g_unit)
        assert fr.rightmost.pi_y == pytest.approx(1.0, abs=1e-9)
        assert fr.rightmost.pi_x == pytest.approx(1.0, abs=1e-9)

    def test_unconditional_cooperator_fully_exploited(self, g_mid):
        fr = feasible_region(MemoryOneStrategy(1, 1, 1, 1), g_mid)
        assert fr.rightmost.pi_y == pytest.approx(5.0)
        assert fr.rightmost.pi_x == pytest.approx(0.0)

    def test_control_candidates_collinear(self, gen, g_mid):
        from payofflab.zd import phi_max
        for chi in (1.0, 4.0):
            top = phi_max(g_mid, g_mid.P, chi)
            p = zd_strategy(g_mid, ZDParams(g_mid.P, chi, 0.7 * top))
            fr = feasible_region(p, g_mid)
            assert fr.degeneracy in ("segment", "point")

    def test_hull_inside_full_payoff_hull(self, gen, g_mid):
        full = full_payoff_hull(g_mid)
        for _ in range(300):
            fr = feasible_region(sample_arcsine_strategy(gen), g_mid)
            for v in fr.hull:
                assert point_in_hull(v.as_tuple(), full, tol=1e-9)

    def test_vertex_count_bound(self, gen, g_mid):
        # the attainable region is a hull of at most 11 points
        for _ in range(2000):
            fr = feasible_region(sample_arcsine_strategy(gen), g_mid)
            assert len(fr.hull) <= 11

    def test_candidates_tagged_for_audit(self, g_mid):
        fr = feasible_region(MemoryOneStrategy(1, 1, 0, 0), g_mid)
        assert all(len(c.states) >= 1 for c in fr.candidates)
        assert any(len(c.states) == 1 for c in fr.candidates)


class TestClassification:
    def test_extortionate_is_exploiting(self, g_unit):
        p = zd_strategy(g_unit, ZDParams(0, 2, 0.2))
        assert classify_fixed_strategy(p, g_unit) is StrategyNature.EXPLOITING

    def test_generous_is_fair(self, g_unit):
        p = zd_strategy(g_unit, ZDParams(1, 2, 0.2))
        assert classify_fixed_strategy(p, g_unit) is StrategyNature.FAIR

    def test_unconditional_cooperator_is_exploitable(self, g_mid):
        s = MemoryOneStrategy(1, 1, 1, 1)
        assert classify_fixed_strategy(s, g_mid) is StrategyNature.EXPLOITABLE
