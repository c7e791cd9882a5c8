import math

import numpy as np
import pytest

from payofflab import (GameParams, MemoryOneStrategy, Regime, ValidationError,
                       arcsine_sample, classify_game, sample_arcsine_strategy,
                       validate_strategy)
from payofflab.rng import stream


class TestClassifyGame:
    def test_high_alternation_ipd(self):
        cls = classify_game(GameParams(2, -1, 7, 0))
        assert cls.is_ipd and cls.regime is Regime.HIGH_ALTERNATION

    def test_middle_ipd(self):
        cls = classify_game(GameParams(3, 0, 5, 1))
        assert cls.is_ipd and cls.regime is Regime.MIDDLE

    def test_low_alternation_ipd(self):
        cls = classify_game(GameParams(4, 0, 5, 3))
        assert cls.is_ipd and cls.regime is Regime.LOW_ALTERNATION

    def test_non_ipd_still_classified(self):
        cls = classify_game(GameParams(1, 2, 3, 4))
        assert not cls.is_ipd
        assert cls.regime is Regime.HIGH_ALTERNATION  # S+T=5 > 2R=2

    def test_boundary_regime_reported(self):
        assert GameParams(3, 1, 5, 1).regime() is Regime.BOUNDARY  # S+T = 2R
        assert GameParams(4, 1, 5, 3).regime() is Regime.BOUNDARY  # S+T = 2P

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            GameParams(float("nan"), 0, 5, 1)
        with pytest.raises(ValidationError):
            GameParams(3, 0, float("inf"), 1)

    def test_translation_invariance(self, gen):
        for _ in range(200):
            r, s, t, p = gen.uniform(-5, 5, 4)
            c = gen.uniform(-10, 10)
            base = GameParams(r, s, t, p)
            shifted = GameParams(r + c, s + c, t + c, p + c)
            assert base.regime() is shifted.regime()


class TestValidateStrategy:
    def test_repeat_flag(self):
        s = validate_strategy((1, 1, 0, 0))
        assert s.is_repeat()

    def test_plain_mixed(self):
        s = validate_strategy((0.5, 0.5, 0.5, 0.5))
        assert not s.is_repeat()
        assert not any(s.is_deterministic_component(i) for i in range(4))

    def test_out_of_range_names_component(self):
        with pytest.raises(ValidationError, match="p_cc"):
            validate_strategy((1.2, 0, 0, 0))
        with pytest.raises(ValidationError, match="p_dc"):
            validate_strategy((0.5, 0.5, -0.01, 0.5))

    def test_p0_bounds(self):
        assert validate_strategy((1, 1, 1, 1), p0=0.3).p0 == 0.3
        with pytest.raises(ValidationError):
            validate_strategy((1, 1, 1, 1), p0=1.5)

    def test_round_trip_identity(self, gen):
        for _ in range(100):
            s = MemoryOneStrategy.from_array(gen.random(4))
            again = validate_strategy(s.components(), s.p0)
            assert again == s

    def test_default_initial_cooperation(self):
        assert validate_strategy((1, 0, 1, 0)).initial_cooperation() == 0.5


class TestArcsineSampling:
    def test_mean_is_half(self):
        g = stream(7)
        draws = arcsine_sample(g, (10**6,))
        assert abs(draws.mean() - 0.5) < 0.002

    def test_median_is_half(self):
        g = stream(8)
        draws = arcsine_sample(g, (10**6,))
        assert abs(np.mean(draws <= 0.5) - 0.5) < 0.005

    def test_cdf_at_quarter(self):
        # closed form: P(X <= x) = (2/pi) asin(sqrt(x)); at 0.25 the value is
        # (2/pi) asin(0.5) = 1/3
        expected = (2.0 / math.pi) * math.asin(math.sqrt(0.25))
        assert abs(expected - 1.0 / 3.0) < 1e-15
        g = stream(9)
        draws = arcsine_sample(g, (10**6,))
        assert abs(np.mean(draws <= 0.25) - expected) < 0.005

    def test_samples_strictly_interior(self):
        g = stream(10)
        for _ in range(500):
            s = sample_arcsine_strategy(g)
            assert all(0.0 < v < 1.0 for v in s.components())
