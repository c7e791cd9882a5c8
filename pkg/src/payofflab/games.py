"""Domain types for iterated 2x2 games: payoff vectors, memory-one strategies,
game-regime classification, and arcsine strategy sampling.

Conventions used throughout the package:

* joint-action states are ordered ``(CC, CD, DC, DD)``, read as
  (focal player's action, co-player's action);
* a memory-one strategy is ``(p_cc, p_cd, p_dc, p_dd)``, the probability of
  cooperating after each previous joint action seen from the strategy owner's
  own perspective;
* payoff pairs are ``(pi_y, pi_x)`` -- the adapting player Y first.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

STATE_LABELS = ("CC", "CD", "DC", "DD")
COMPONENT_LABELS = ("p_cc", "p_cd", "p_dc", "p_dd")


class Regime(enum.Enum):
    """Position of S+T relative to 2R and 2P.

    MIDDLE (2P < S+T < 2R) is the classical setting where mutual cooperation is
    socially optimal; HIGH_ALTERNATION (S+T > 2R) makes anti-coordinated
    alternation the social optimum; LOW_ALTERNATION (S+T < 2P); BOUNDARY when
    either comparison is an exact tie.
    """

    MIDDLE = "middle"
    HIGH_ALTERNATION = "high_alternation"
    LOW_ALTERNATION = "low_alternation"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class GameParams:
    """One-shot payoffs (R, S, T, P) to the focal player for CC, CD, DC, DD."""

    R: float
    S: float
    T: float
    P: float

    def __post_init__(self):
        for name in ("R", "S", "T", "P"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ValidationError(f"game payoff {name} must be finite, got {value!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.R, self.S, self.T, self.P], dtype=float)

    def x_payoffs(self) -> np.ndarray:
        """X's state payoffs over (CC, CD, DC, DD)."""
        return np.array([self.R, self.S, self.T, self.P], dtype=float)

    def y_payoffs(self) -> np.ndarray:
        """Y's state payoffs over (CC, CD, DC, DD): Y earns T in CD and S in DC."""
        return np.array([self.R, self.T, self.S, self.P], dtype=float)

    def bounds(self) -> tuple[float, float]:
        values = (self.R, self.S, self.T, self.P)
        return min(values), max(values)

    def is_ipd(self) -> bool:
        return self.T > self.R > self.P > self.S

    def regime(self) -> Regime:
        st = self.S + self.T
        if st == 2.0 * self.R or st == 2.0 * self.P:
            return Regime.BOUNDARY
        if st > 2.0 * self.R:
            return Regime.HIGH_ALTERNATION
        if st < 2.0 * self.P:
            return Regime.LOW_ALTERNATION
        return Regime.MIDDLE


@dataclass(frozen=True)
class GameClass:
    is_ipd: bool
    regime: Regime


def classify_game(game: GameParams) -> GameClass:
    """Classify a game by the strict IPD ordering and its S+T regime."""
    return GameClass(is_ipd=game.is_ipd(), regime=game.regime())


@dataclass(frozen=True)
class MemoryOneStrategy:
    """Cooperation probabilities conditioned on the previous joint action,
    plus an optional first-round cooperation probability ``p0``."""

    p_cc: float
    p_cd: float
    p_dc: float
    p_dd: float
    p0: float | None = None

    def __post_init__(self):
        for name, value in zip(COMPONENT_LABELS, self.components()):
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ValidationError(f"strategy component {name} must be finite, got {value!r}")
            if not 0.0 <= value <= 1.0:
                raise ValidationError(
                    f"strategy component {name} = {value!r} outside [0, 1]")
        if self.p0 is not None and not 0.0 <= self.p0 <= 1.0:
            raise ValidationError(f"initial cooperation p0 = {self.p0!r} outside [0, 1]")

    def components(self) -> tuple[float, float, float, float]:
        return (self.p_cc, self.p_cd, self.p_dc, self.p_dd)

    def as_array(self) -> np.ndarray:
        return np.array(self.components(), dtype=float)

    @classmethod
    def from_array(cls, values, p0: float | None = None) -> "MemoryOneStrategy":
        a, b, c, d = (float(v) for v in values)
        return cls(a, b, c, d, p0)

    def initial_cooperation(self) -> float:
        """p0 with the 0.5 default used whenever no initial action was given."""
        return 0.5 if self.p0 is None else self.p0

    def is_repeat(self) -> bool:
        """True for (1, 1, 0, 0), the strategy that repeats its own last action."""
        return self.components() == (1.0, 1.0, 0.0, 0.0)

    def is_deterministic_component(self, index: int) -> bool:
        value = self.components()[index]
        return value == 0.0 or value == 1.0

    def deterministic_mask(self, tol: float = 0.0) -> tuple[bool, bool, bool, bool]:
        return tuple(min(v, 1.0 - v) <= tol for v in self.components())


def validate_strategy(values, p0: float | None = None) -> MemoryOneStrategy:
    """Build a MemoryOneStrategy from four reals, rejecting out-of-range components.

    The error message names the first offending component.
    """
    values = tuple(values)
    if len(values) != 4:
        raise ValidationError(f"expected 4 strategy components, got {len(values)}")
    return MemoryOneStrategy.from_array(values, p0=None if p0 is None else float(p0))


@dataclass(frozen=True)
class PayoffPair:
    """Long-run payoff pair, adapting player Y first to match plotting axes."""

    pi_y: float
    pi_x: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.pi_y, self.pi_x)

    def rounded(self, ndigits: int = 2) -> tuple[float, float]:
        return (round(self.pi_y, ndigits), round(self.pi_x, ndigits))


def arcsine_sample(rng: np.random.Generator, size=None):
    """Draw arcsine-distributed (Beta(1/2, 1/2) on [0, 1]) values via sin^2(pi*u/2).

    Values are strictly inside (0, 1): a uniform draw of exactly 0 is redrawn.
    """
    if size is None:
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        return float(np.sin(0.5 * np.pi * u) ** 2)
    u = rng.random(size)
    while True:
        zero = u == 0.0
        if not zero.any():
            break
        u[zero] = rng.random(int(zero.sum()))
    return np.sin(0.5 * np.pi * u) ** 2


def sample_arcsine_strategy(rng: np.random.Generator) -> MemoryOneStrategy:
    """Sample the four strategy components i.i.d. from the arcsine distribution."""
    return MemoryOneStrategy.from_array(arcsine_sample(rng, 4))
