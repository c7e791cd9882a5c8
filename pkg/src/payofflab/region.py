"""Feasible payoff region against a fixed strategy: candidate payoffs at
deterministic co-player behavior, their convex hull, the rightmost point, and
the exploitable / exploiting / fair classification.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .games import GameParams, MemoryOneStrategy, PayoffPair
from .markov import stationary_set, transition_matrix

FAIR_TOL = 1e-9


class StrategyNature(enum.Enum):
    EXPLOITABLE = "exploitable"   # co-player's optimum pays the co-player more
    EXPLOITING = "exploiting"
    FAIR = "fair"


@dataclass(frozen=True)
class CandidatePoint:
    """One attainable payoff pair, tagged with the deterministic co-player
    strategy and the closed class that produced it (for audit)."""

    q: tuple[float, float, float, float]
    states: tuple[int, ...]
    payoff: PayoffPair


@dataclass(frozen=True)
class FeasibleRegion:
    candidates: tuple[CandidatePoint, ...]
    hull: tuple[PayoffPair, ...]          # counterclockwise vertices
    rightmost: PayoffPair                 # max pi_y, ties broken by max pi_x
    degeneracy: str | None                # "point", "segment", or None

    def hull_array(self) -> np.ndarray:
        return np.array([[v.pi_y, v.pi_x] for v in self.hull])


def monotone_chain_hull(points: np.ndarray) -> np.ndarray:
    """Counterclockwise convex hull of 2-D points (collinear points dropped)."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts
    ordered = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in ordered:
        while len(lower) > 1 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in ordered[::-1]:
        while len(upper) > 1 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:  # all points collinear
        lo, hi = ordered[0], ordered[-1]
        return np.array([lo]) if np.allclose(lo, hi) else np.array([lo, hi])
    return np.array(hull)


def full_payoff_hull(game: GameParams) -> np.ndarray:
    """Hull of every payoff the game can produce, in (pi_y, pi_x) coordinates."""
    corners = np.array([
        [game.R, game.R],
        [game.T, game.S],
        [game.S, game.T],
        [game.P, game.P],
    ])
    return monotone_chain_hull(corners)


def _hull_with_degeneracy(pts: np.ndarray, tol: float = 1e-9):
    """Convex hull that recognizes point- and segment-shaped candidate clouds.

    Float noise keeps exactly-collinear payoffs (every positive-slope control
    strategy produces them) off a common line by an ulp or two, so degeneracy
    is decided within ``tol`` before running the exact hull.
    """
    scale = max(1.0, float(np.max(np.abs(pts))))
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    if np.max(hi - lo) <= tol * scale:
        center = 0.5 * (lo + hi)
        return center[None, :], "point"
    # distance of every point from the line through the two spread extremes
    ordered = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    a, b = ordered[0], ordered[-1]
    d = b - a
    norm = np.hypot(*d)
    if norm <= tol * scale:
        # spread is perpendicular to the lexicographic axis; use that direction
        ordered = pts[np.lexsort((pts[:, 0], pts[:, 1]))]
        a, b = ordered[0], ordered[-1]
        d = b - a
        norm = np.hypot(*d)
    offsets = np.abs((pts[:, 0] - a[0]) * d[1] - (pts[:, 1] - a[1]) * d[0]) / norm
    if np.max(offsets) <= tol * scale:
        return np.array([a, b]), "segment"
    return monotone_chain_hull(pts), None


def feasible_region(p: MemoryOneStrategy, game: GameParams) -> FeasibleRegion:
    """Candidate payoffs across the 16 deterministic co-player strategies.

    Every closed communicating class of each induced chain contributes one
    payoff pair, a superset of the region's extreme points, so the hull of the
    candidates is the feasible region's hull.
    """
    candidates = []
    for bits in itertools.product((0.0, 1.0), repeat=4):
        q = MemoryOneStrategy.from_array(bits)
        stat = stationary_set(transition_matrix(p, q))
        for cls in stat.classes:
            nu = cls.distribution
            payoff = PayoffPair(pi_y=float(nu @ game.y_payoffs()),
                                pi_x=float(nu @ game.x_payoffs()))
            candidates.append(CandidatePoint(q=bits, states=cls.states, payoff=payoff))

    pts = np.array([[c.payoff.pi_y, c.payoff.pi_x] for c in candidates])
    hull_pts, degeneracy = _hull_with_degeneracy(pts)

    order = np.lexsort((pts[:, 1], pts[:, 0]))
    best = pts[order[-1]]
    return FeasibleRegion(
        candidates=tuple(candidates),
        hull=tuple(PayoffPair(float(a), float(b)) for a, b in hull_pts),
        rightmost=PayoffPair(float(best[0]), float(best[1])),
        degeneracy=degeneracy,
    )


def classify_fixed_strategy(p: MemoryOneStrategy, game: GameParams) -> StrategyNature:
    """Side of the diagonal on which the co-player's selfish optimum lands."""
    best = feasible_region(p, game).rightmost
    gap = best.pi_x - best.pi_y
    if abs(gap) < FAIR_TOL:
        return StrategyNature.FAIR
    return StrategyNature.EXPLOITING if gap > 0 else StrategyNature.EXPLOITABLE


def point_in_hull(point, hull_pts: np.ndarray, tol: float = 1e-9) -> bool:
    """True if the point lies in the convex hull (vertices in CCW order)."""
    hull_pts = np.asarray(hull_pts, dtype=float)
    x, y = float(point[0]), float(point[1])
    n = len(hull_pts)
    if n == 1:
        return bool(np.hypot(x - hull_pts[0, 0], y - hull_pts[0, 1]) <= tol)
    if n == 2:
        a, b = hull_pts
        d = b - a
        t = np.dot([x - a[0], y - a[1]], d) / max(np.dot(d, d), 1e-300)
        proj = a + np.clip(t, 0.0, 1.0) * d
        return bool(np.hypot(x - proj[0], y - proj[1]) <= tol)
    scale = max(1.0, np.max(np.abs(hull_pts)))
    for i in range(n):
        a = hull_pts[i]
        b = hull_pts[(i + 1) % n]
        cross = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])
        if cross < -tol * scale:
            return False
    return True
