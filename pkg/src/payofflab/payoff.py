"""Determinant formula for long-run payoffs, its multilinear decomposition,
and exact analytic payoff gradients.

The 4x4 determinant ratio expresses pi_Y as N/D where both determinants share
three strategy columns and differ only in the payoff column.  Expanding the
numerator along that column yields multilinear coefficients
(f_cc, f_dc, f_cd, f_dd) pairing with Y's state payoffs (R, S, T, P); their sum
equals D.  All helpers broadcast over leading batch axes so sweeps evaluate
thousands of strategy pairs per call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChainError
from .games import GameParams, MemoryOneStrategy, PayoffPair
from .markov import _pair_matrix, initial_distribution

# |denominator| below this means the chain has no unique stationary
# distribution (entries are O(1), rounding noise sits far below).
DEGENERACY_EPS = 1e-12

# Discounted fallback used when the determinant formula degenerates.
FALLBACK_LAMBDA = 1.0 - 1e-6
FALLBACK_STEP = 1e-6


def _det3(a1, a2, a3, b1, b2, b3, c1, c2, c3):
    return (a1 * (b2 * c3 - b3 * c2)
            - a2 * (b1 * c3 - b3 * c1)
            + a3 * (b1 * c2 - b2 * c1))


def _csum4(x1, x2, x3, x4):
    """Neumaier-compensated sum of four (possibly array) terms."""
    s = x1
    c = np.zeros_like(np.asarray(x1, dtype=float))
    for x in (x2, x3, x4):
        t = s + x
        c = c + np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
        s = t
    return s + c


def f_components_raw(p, q):
    """Multilinear coefficients (f_cc, f_dc, f_cd, f_dd) of (R, S, T, P) in pi_Y's numerator.

    ``p`` and ``q`` are arrays of shape (..., 4); the four outputs broadcast
    accordingly.  Cofactor expansion of the payoff column; determinant rows
    are in state order (CC, DC, CD, DD).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pcc, pcd, pdc, pdd = (p[..., i] for i in range(4))
    qcc, qcd, qdc, qdd = (q[..., i] for i in range(4))

    # rows of the shared 4x3 strategy block
    r1 = (pcc * qcc - 1.0, pcc - 1.0, qcc - 1.0)
    r2 = (pdc * qcd, pdc, qcd - 1.0)
    r3 = (pcd * qdc, pcd - 1.0, qdc)
    r4 = (pdd * qdd, pdd, qdd)

    f_cc = -_det3(*r2, *r3, *r4)
    f_dc = _det3(*r1, *r3, *r4)
    f_cd = -_det3(*r1, *r2, *r4)
    f_dd = _det3(*r1, *r2, *r3)
    return f_cc, f_dc, f_cd, f_dd


def f_jacobian_two_point(p, q):
    """Reference Jacobian via the affinity identity df/dq_j = f|q_j=1 - f|q_j=0.

    Returns ``(f, jac)`` with ``f`` shaped (..., 4) in order (cc, dc, cd, dd)
    and ``jac[..., s, j] = d f_s / d q_j`` for j over (q_cc, q_cd, q_dc, q_dd).
    Slower than :func:`f_jacobian` but independent of it; kept as a test oracle.
    """
    q = np.asarray(q, dtype=float)
    lo = np.empty(q.shape[:-1] + (4, 4))
    hi = np.empty_like(lo)
    for j in range(4):
        qj = q.copy()
        qj[..., j] = 0.0
        lo[..., j] = np.stack(f_components_raw(p, qj), axis=-1)
        qj[..., j] = 1.0
        hi[..., j] = np.stack(f_components_raw(p, qj), axis=-1)
    jac = hi - lo
    # reconstruct f via affinity in q_cc: f = f|q_cc=0 + q_cc * df/dq_cc
    f = lo[..., 0] + jac[..., 0] * q[..., 0:1]
    return f, jac


def _cross3(a, b):
    return (a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0])


def _dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def f_jacobian(p, q):
    """f quadruple plus its exact partials with respect to each q component.

    Each determinant row depends on exactly one q component, so every partial
    is the same determinant with that row replaced by its (constant) derivative:
    exact, no truncation.  Shared cross products keep this cheap inside the
    learner loop.  Shapes as in :func:`f_jacobian_two_point`.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pcc, pcd, pdc, pdd = (p[..., i] for i in range(4))
    qcc, qcd, qdc, qdd = (q[..., i] for i in range(4))

    r1 = (pcc * qcc - 1.0, pcc - 1.0, qcc - 1.0)
    r2 = (pdc * qcd, pdc, qcd - 1.0)
    r3 = (pcd * qdc, pcd - 1.0, qdc)
    r4 = (pdd * qdd, pdd, qdd)
    # row derivatives w.r.t. the single q component each row carries
    d1 = (pcc, 0.0, 1.0)
    d2 = (pdc, 0.0, 1.0)
    d3 = (pcd, 0.0, 1.0)
    d4 = (pdd, 0.0, 1.0)

    c34 = _cross3(r3, r4)
    c24 = _cross3(r2, r4)
    c23 = _cross3(r2, r3)
    c3d4 = _cross3(r3, d4)
    cd34 = _cross3(d3, r4)
    c2d4 = _cross3(r2, d4)
    cd24 = _cross3(d2, r4)
    c2d3 = _cross3(r2, d3)
    cd23 = _cross3(d2, r3)

    f_cc = -_dot3(r2, c34)
    f_dc = _dot3(r1, c34)
    f_cd = -_dot3(r1, c24)
    f_dd = _dot3(r1, c23)

    shape = np.broadcast(p[..., 0], q[..., 0]).shape
    jac = np.zeros(shape + (4, 4))
    # rows: f order (cc, dc, cd, dd); columns: q order (cc, cd, dc, dd)
    jac[..., 0, 1] = -_dot3(d2, c34)
    jac[..., 0, 2] = -_dot3(r2, cd34)
    jac[..., 0, 3] = -_dot3(r2, c3d4)
    jac[..., 1, 0] = _dot3(d1, c34)
    jac[..., 1, 2] = _dot3(r1, cd34)
    jac[..., 1, 3] = _dot3(r1, c3d4)
    jac[..., 2, 0] = -_dot3(d1, c24)
    jac[..., 2, 1] = -_dot3(r1, cd24)
    jac[..., 2, 3] = -_dot3(r1, c2d4)
    jac[..., 3, 0] = _dot3(d1, c23)
    jac[..., 3, 1] = _dot3(r1, cd23)
    jac[..., 3, 2] = _dot3(r1, c2d3)

    f = np.stack(np.broadcast_arrays(f_cc, f_dc, f_cd, f_dd), axis=-1)
    return f, jac


@dataclass(frozen=True)
class MultilinearComponents:
    """Coefficients of (R, S, T, P) in pi_Y's determinant numerator.

    When the stationary distribution is unique, (f_cc, f_cd, f_dc, f_dd) / f_sigma
    reproduces (nu_CC, nu_CD, nu_DC, nu_DD); note f_dc pairs with S because Y
    earns S in state DC.
    """

    f_cc: float
    f_dc: float
    f_cd: float
    f_dd: float

    @property
    def f_sigma(self) -> float:
        return float(_csum4(self.f_cc, self.f_dc, self.f_cd, self.f_dd))

    def as_array(self) -> np.ndarray:
        return np.array([self.f_cc, self.f_dc, self.f_cd, self.f_dd])


def multilinear_components(p: MemoryOneStrategy, q: MemoryOneStrategy) -> MultilinearComponents:
    f_cc, f_dc, f_cd, f_dd = f_components_raw(p.as_array(), q.as_array())
    return MultilinearComponents(float(f_cc), float(f_dc), float(f_cd), float(f_dd))


def _y_weights(game: GameParams) -> np.ndarray:
    """Y's payoffs in f order (CC, DC, CD, DD) = (R, S, T, P)."""
    return np.array([game.R, game.S, game.T, game.P])


def _x_weights(game: GameParams) -> np.ndarray:
    """X's payoffs in f order (CC, DC, CD, DD) = (R, T, S, P)."""
    return np.array([game.R, game.T, game.S, game.P])


def press_dyson_payoff(p: MemoryOneStrategy, q: MemoryOneStrategy,
                       game: GameParams) -> PayoffPair:
    """Long-run payoffs from the determinant ratio.

    Raises DegenerateChainError when the shared denominator is (numerically)
    zero, i.e. the stationary distribution is not unique; callers fall back to
    a discounted evaluation.
    """
    f = np.stack(f_components_raw(p.as_array(), q.as_array()), axis=-1)
    sigma = _csum4(*f.T)
    if abs(sigma) < DEGENERACY_EPS:
        raise DegenerateChainError(
            f"denominator determinant {sigma:.3e} below {DEGENERACY_EPS:g}: "
            "no unique stationary distribution")
    pi_y = _csum4(*(f * _y_weights(game)).T) / sigma
    pi_x = _csum4(*(f * _x_weights(game)).T) / sigma
    return PayoffPair(pi_y=float(pi_y), pi_x=float(pi_x))


@dataclass(frozen=True)
class PayoffGradient:
    """Partials of pi_Y with respect to (q_cc, q_cd, q_dc, q_dd)."""

    d_cc: float
    d_cd: float
    d_dc: float
    d_dd: float

    def as_array(self) -> np.ndarray:
        return np.array([self.d_cc, self.d_cd, self.d_dc, self.d_dd])

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.as_array())))


def gradient_raw(p, q, weights):
    """Batched exact gradient of (f . weights) / f_sigma w.r.t. q.

    Returns (grad, pi, sigma): grad shaped (..., 4), the payoff value, and the
    denominator (so callers can detect degeneracy themselves).
    """
    f, jac = f_jacobian(p, q)
    weights = np.asarray(weights, dtype=float)
    sigma = f.sum(axis=-1)
    numer = (f * weights).sum(axis=-1)
    jw = (jac * weights[..., :, None]).sum(axis=-2)   # (..., 4) over q components
    js = jac.sum(axis=-2)
    grad = (jw * sigma[..., None] - numer[..., None] * js) / (sigma ** 2)[..., None]
    return grad, numer / sigma, sigma


def payoff_gradient(p: MemoryOneStrategy, q: MemoryOneStrategy,
                    game: GameParams, player: str = "y") -> PayoffGradient:
    """Exact analytic gradient of the requested player's payoff in q.

    Uses the affinity of numerator and denominator in each q component and the
    quotient rule; no finite-difference truncation error.  Raises
    DegenerateChainError when the denominator vanishes.
    """
    weights = _y_weights(game) if player.lower() == "y" else _x_weights(game)
    grad, _, sigma = gradient_raw(p.as_array(), q.as_array(), weights)
    if abs(float(sigma)) < DEGENERACY_EPS:
        raise DegenerateChainError(
            f"denominator determinant {float(sigma):.3e} below {DEGENERACY_EPS:g}")
    g = np.asarray(grad, dtype=float).reshape(4)
    return PayoffGradient(*map(float, g))


def discounted_payoff_raw(p, q, weights, nu0, lam):
    """Batched discounted payoff <v, weights'> with v (I - lam M) = (1-lam) nu0.

    ``weights`` is in f order (CC, DC, CD, DD); it is re-ordered internally to
    the state order (CC, CD, DC, DD) used by the transition matrix.  Solved in
    closed form (Cramer) to stay fast and bit-deterministic for batches.
    """
    m = _pair_matrix(p, q)
    a = np.eye(4) - lam * np.swapaxes(m, -1, -2)   # transpose: row-vector system
    b = np.broadcast_to((1.0 - lam) * np.asarray(nu0, dtype=float), a.shape[:-1])
    v = _cramer_solve4(a, b)
    w_state = np.asarray(weights, dtype=float)[..., (0, 2, 1, 3)]
    return (v * w_state).sum(axis=-1)


def _det4(a):
    m01 = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    m02 = a[..., 0, 0] * a[..., 1, 2] - a[..., 0, 2] * a[..., 1, 0]
    m03 = a[..., 0, 0] * a[..., 1, 3] - a[..., 0, 3] * a[..., 1, 0]
    m12 = a[..., 0, 1] * a[..., 1, 2] - a[..., 0, 2] * a[..., 1, 1]
    m13 = a[..., 0, 1] * a[..., 1, 3] - a[..., 0, 3] * a[..., 1, 1]
    m23 = a[..., 0, 2] * a[..., 1, 3] - a[..., 0, 3] * a[..., 1, 2]
    n01 = a[..., 2, 0] * a[..., 3, 1] - a[..., 2, 1] * a[..., 3, 0]
    n02 = a[..., 2, 0] * a[..., 3, 2] - a[..., 2, 2] * a[..., 3, 0]
    n03 = a[..., 2, 0] * a[..., 3, 3] - a[..., 2, 3] * a[..., 3, 0]
    n12 = a[..., 2, 1] * a[..., 3, 2] - a[..., 2, 2] * a[..., 3, 1]
    n13 = a[..., 2, 1] * a[..., 3, 3] - a[..., 2, 3] * a[..., 3, 1]
    n23 = a[..., 2, 2] * a[..., 3, 3] - a[..., 2, 3] * a[..., 3, 2]
    return m01 * n23 - m02 * n13 + m03 * n12 + m12 * n03 - m13 * n02 + m23 * n01


def _cramer_solve4(a, b):
    """Solve a @ x = b for batches of 4x4 systems via Cramer's rule."""
    det = _det4(a)
    x = np.empty_like(b)
    for i in range(4):
        ai = a.copy()
        ai[..., :, i] = b
        x[..., i] = _det4(ai) / det
    return x


def discounted_gradient_raw(p, q, weights, nu0, lam=FALLBACK_LAMBDA, step=FALLBACK_STEP):
    """Central-difference gradient of the discounted payoff; fallback for
    degenerate chains.  The multilinear payoff extends smoothly outside [0, 1],
    so perturbed points are not clamped."""
    q = np.asarray(q, dtype=float)
    grad = np.empty(q.shape)
    for j in range(4):
        hi = q.copy()
        hi[..., j] += step
        lo = q.copy()
        lo[..., j] -= step
        grad[..., j] = (discounted_payoff_raw(p, hi, weights, nu0, lam)
                        - discounted_payoff_raw(p, lo, weights, nu0, lam)) / (2.0 * step)
    return grad


def discounted_fallback_gradient(p: MemoryOneStrategy, q: MemoryOneStrategy,
                                 game: GameParams, nu0=None,
                                 lam: float = FALLBACK_LAMBDA,
                                 step: float = FALLBACK_STEP) -> PayoffGradient:
    """Gradient of Y's discounted payoff, used where the exact formula is 0/0."""
    if nu0 is None:
        nu0 = initial_distribution(p.initial_cooperation(), q.initial_cooperation())
    g = discounted_gradient_raw(p.as_array(), q.as_array(), _y_weights(game), nu0, lam, step)
    return PayoffGradient(*map(float, np.asarray(g).reshape(4)))
