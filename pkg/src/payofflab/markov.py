"""Joint-action Markov chain: transition matrices, stationary distributions
(including non-unique cases), Cesaro limits, and long-run payoffs.

The chain lives on the four joint actions (CC, CD, DC, DD) from X's
perspective.  Row CD of the transition matrix uses Y's component q_dc and row
DC uses q_cd: the co-player reads the same round from the opposite seat.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .games import GameParams, MemoryOneStrategy, PayoffPair

# Entries below this are treated as structural zeros when reading the chain's
# support graph; it separates true zeros from float rounding.
SUPPORT_EPS = 1e-14


def initial_distribution(p0: float, q0: float) -> np.ndarray:
    """Distribution over (CC, CD, DC, DD) induced by independent first moves."""
    return np.array([
        p0 * q0,
        p0 * (1.0 - q0),
        (1.0 - p0) * q0,
        (1.0 - p0) * (1.0 - q0),
    ])


def _pair_matrix(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Transition matrix for component arrays; supports leading batch axes.

    ``p`` and ``q`` have shape (..., 4) in component order (cc, cd, dc, dd);
    the result has shape (..., 4, 4) in state order (CC, CD, DC, DD).
    """
    pc = np.asarray(p, dtype=float)
    # Y conditions on the transposed view of the previous round.
    qc = np.asarray(q, dtype=float)[..., (0, 2, 1, 3)]
    m = np.empty(pc.shape + (4,))
    m[..., 0] = pc * qc
    m[..., 1] = pc * (1.0 - qc)
    m[..., 2] = (1.0 - pc) * qc
    m[..., 3] = (1.0 - pc) * (1.0 - qc)
    return m


def transition_matrix(p: MemoryOneStrategy, q: MemoryOneStrategy) -> np.ndarray:
    """4x4 row-stochastic matrix of the iterated game under strategies (p, q)."""
    return _pair_matrix(p.as_array(), q.as_array())


@dataclass(frozen=True)
class ClosedClass:
    """A closed communicating class and its stationary distribution (on all 4 states)."""

    states: tuple[int, ...]
    distribution: np.ndarray


@dataclass(frozen=True)
class StationarySet:
    """All closed classes of a chain; ``unique`` iff there is exactly one."""

    classes: tuple[ClosedClass, ...]
    unique: bool

    def distribution(self) -> np.ndarray:
        """The stationary distribution when it is unique."""
        if not self.unique:
            raise ValueError("stationary distribution is not unique")
        return self.classes[0].distribution


def _reachability(support: np.ndarray) -> np.ndarray:
    reach = support | np.eye(4, dtype=bool)
    for _ in range(2):  # 4 states: closure after squaring twice
        reach = reach | (reach @ reach)
    return reach


def stationary_set(matrix: np.ndarray) -> StationarySet:
    """Enumerate closed communicating classes and solve each restricted system."""
    m = np.asarray(matrix, dtype=float)
    support = m > SUPPORT_EPS
    reach = _reachability(support)
    mutual = reach & reach.T

    seen: set[frozenset] = set()
    classes = []
    for i in range(4):
        comm = frozenset(np.flatnonzero(mutual[i]))
        if comm in seen:
            continue
        seen.add(comm)
        members = sorted(comm)
        outside = [j for j in range(4) if j not in comm]
        if outside and reach[np.ix_(members, outside)].any():
            continue  # class can leak out: not closed
        sub = m[np.ix_(members, members)]
        k = len(members)
        # Solve nu (sub - I) = 0 with one equation replaced by sum(nu) = 1.
        a = (sub.T - np.eye(k)).copy()
        a[-1, :] = 1.0
        b = np.zeros(k)
        b[-1] = 1.0
        nu_sub = np.linalg.solve(a, b)
        nu = np.zeros(4)
        nu[members] = nu_sub
        classes.append(ClosedClass(states=tuple(members), distribution=nu))

    classes.sort(key=lambda c: c.states)
    return StationarySet(classes=tuple(classes), unique=len(classes) == 1)


def cesaro_limit(matrix: np.ndarray, tol: float = 1e-12, max_doublings: int = 200) -> np.ndarray:
    """Time-average limit of matrix powers, well-defined even for periodic chains.

    Averages the first 2^k powers via the doubling identity
    sum_{i<2n} M^i = (I + M^n) sum_{i<n} M^i, stopping once successive averages
    differ by less than ``tol`` in max norm.  Doubling reaches the O(1/n)
    Cesaro tail of periodic chains in a few dozen steps.
    """
    m = np.asarray(matrix, dtype=float)
    avg = m.copy()          # average of M^1 .. M^(2^k)
    power = m.copy()        # M^(2^k)
    residual = np.inf
    for _ in range(max_doublings):
        nxt = 0.5 * (avg + power @ avg)
        power = power @ power
        # row sums drift by ~1 ulp per multiply and the squaring amplifies the
        # drift geometrically; both iterates are exactly row-stochastic, so
        # renormalize
        power /= power.sum(axis=1, keepdims=True)
        nxt /= nxt.sum(axis=1, keepdims=True)
        residual = np.max(np.abs(nxt - avg))
        avg = nxt
        if residual < tol:
            return avg
    raise ConvergenceError(
        f"Cesaro averaging did not reach tol={tol:g}", residual=residual)


def _payoffs_from_nu(nu: np.ndarray, game: GameParams) -> PayoffPair:
    return PayoffPair(pi_y=float(nu @ game.y_payoffs()), pi_x=float(nu @ game.x_payoffs()))


def _default_nu0(p: MemoryOneStrategy, q: MemoryOneStrategy, nu0) -> np.ndarray:
    if nu0 is not None:
        return np.asarray(nu0, dtype=float)
    return initial_distribution(p.initial_cooperation(), q.initial_cooperation())


def average_payoffs(p: MemoryOneStrategy, q: MemoryOneStrategy, game: GameParams,
                    nu0=None) -> PayoffPair:
    """Undiscounted long-run payoffs ``(pi_y, pi_x)``.

    With a unique stationary distribution the initial actions are irrelevant;
    otherwise the payoffs follow nu0 . M* with the Cesaro limit M*, so the
    outcome reflects where the chain started (nu0 defaults to independent
    first moves with p0 = q0 = 0.5).
    """
    m = transition_matrix(p, q)
    stat = stationary_set(m)
    if stat.unique:
        nu = stat.distribution()
    else:
        nu = _default_nu0(p, q, nu0) @ cesaro_limit(m)
    return _payoffs_from_nu(nu, game)


def discounted_payoffs(p: MemoryOneStrategy, q: MemoryOneStrategy, game: GameParams,
                       nu0=None, lam: float = 0.9999) -> PayoffPair:
    """Expected per-round payoffs of the lambda-discounted game.

    Solves v (I - lam M) = (1 - lam) nu0 instead of inverting; the system is
    nonsingular for every row-stochastic M and lam < 1.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"discount factor must be in (0, 1), got {lam}")
    m = transition_matrix(p, q)
    start = _default_nu0(p, q, nu0)
    v = np.linalg.solve((np.eye(4) - lam * m).T, (1.0 - lam) * start)
    return _payoffs_from_nu(v, game)
