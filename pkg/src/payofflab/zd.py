"""Payoff-control strategies: zero-determinant construction and verification,
equalizers, the vanishing-gradient coefficient matrices, and the sufficient
conditions under which positive-slope control provably channels a selfish
co-player to mutual-benefit payoffs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChainError, InfeasibleError, ValidationError
from .games import COMPONENT_LABELS, GameParams, MemoryOneStrategy
from .payoff import (DEGENERACY_EPS, f_components_raw, f_jacobian,
                     press_dyson_payoff, _y_weights)

# Components within this of a bound are clamped: exact boundary strategies
# (e.g. a construction landing exactly on p_cd = 0) may miss by one ulp.
CLAMP_EPS = 1e-12

# Relative singular-value cutoff for kernel dimensions.  The underlying minor
# conditions are algebraically exact but numerically fragile; SVD thresholding
# is the robust equivalent.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ZDParams:
    """Parameters of the enforced relation pi_X - kappa = chi (pi_Y - kappa):
    baseline payoff kappa, slope chi, and scale phi."""

    kappa: float
    chi: float
    phi: float


def _zd_components(game: GameParams, kappa: float, chi: float, phi: float) -> np.ndarray:
    r, s, t, p = game.R, game.S, game.T, game.P
    return np.array([
        1.0 - phi * (chi - 1.0) * (r - kappa),
        1.0 - phi * (kappa - s + chi * (t - kappa)),
        phi * (t - kappa + chi * (kappa - s)),
        phi * (chi - 1.0) * (kappa - p),
    ])


def zd_strategy(game: GameParams, params: ZDParams) -> MemoryOneStrategy:
    """Strategy enforcing pi_X - kappa = chi (pi_Y - kappa).

    Components within CLAMP_EPS of {0, 1} are clamped; anything further outside
    raises InfeasibleError listing the offending components.
    """
    raw = _zd_components(game, params.kappa, params.chi, params.phi)
    violations = [(name, float(v)) for name, v in zip(COMPONENT_LABELS, raw)
                  if v < -CLAMP_EPS or v > 1.0 + CLAMP_EPS]
    if violations:
        detail = ", ".join(f"{n}={v:.6g}" for n, v in violations)
        raise InfeasibleError(
            f"(kappa={params.kappa:g}, chi={params.chi:g}, phi={params.phi:g}) "
            f"leaves [0, 1]: {detail}", violations=violations)
    return MemoryOneStrategy.from_array(np.clip(raw, 0.0, 1.0))


def phi_max(game: GameParams, kappa: float, chi: float) -> float:
    """Largest phi > 0 keeping all four construction components inside [0, 1].

    Each component is affine in phi with value in {0, 1} at phi = 0, so the
    bound is the minimum of the active linear constraints.  Raises
    InfeasibleError when no positive phi qualifies.
    """
    base = _zd_components(game, kappa, chi, 0.0)      # components at phi = 0
    slope = _zd_components(game, kappa, chi, 1.0) - base
    bound = np.inf
    for a, b in zip(base, slope):
        if b > 0.0:
            bound = min(bound, (1.0 - a) / b)
        elif b < 0.0:
            bound = min(bound, -a / b)
    if not np.isfinite(bound):
        return np.inf
    if bound <= 0.0:
        raise InfeasibleError(
            f"no feasible phi > 0 for kappa={kappa:g}, chi={chi:g}")
    return float(bound)


def zd_relation_residual(p: MemoryOneStrategy, params: ZDParams,
                         q: MemoryOneStrategy, game: GameParams) -> float:
    """|pi_X - kappa - chi (pi_Y - kappa)| for the given co-player strategy."""
    pair = press_dyson_payoff(p, q, game)
    return abs(pair.pi_x - params.kappa - params.chi * (pair.pi_y - params.kappa))


def equalizer_enforced_value(game: GameParams, p_cc: float, p_dd: float) -> float:
    """Co-player payoff pinned by an equalizer built from (p_cc, p_dd)."""
    denom = 1.0 - p_cc + p_dd
    if denom == 0.0:
        raise ZeroDivisionError(
            "equalizer enforced value undefined at 1 - p_cc + p_dd = 0 "
            "(repeat-like degenerate corner)")
    return ((1.0 - p_cc) * game.P + p_dd * game.R) / denom


def equalizer_strategy(game: GameParams, p_cc: float,
                       p_dd: float) -> tuple[MemoryOneStrategy, float]:
    """Strategy fixing the co-player's long-run payoff, plus that pinned value.

    The inner components follow from (p_cc, p_dd) and the game; raises
    InfeasibleError when either lands outside [0, 1].
    """
    if not (0.0 <= p_cc <= 1.0 and 0.0 <= p_dd <= 1.0):
        raise ValidationError(f"p_cc={p_cc!r}, p_dd={p_dd!r} must lie in [0, 1]")
    value = equalizer_enforced_value(game, p_cc, p_dd)
    r, s, t, p = game.R, game.S, game.T, game.P
    p_cd = (p_cc * (t - p) - (1.0 + p_dd) * (t - r)) / (r - p)
    p_dc = ((1.0 - p_cc) * (p - s) + p_dd * (r - s)) / (r - p)
    raw = np.array([p_cc, p_cd, p_dc, p_dd])
    violations = [(name, float(v)) for name, v in zip(COMPONENT_LABELS, raw)
                  if v < -CLAMP_EPS or v > 1.0 + CLAMP_EPS]
    if violations:
        detail = ", ".join(f"{n}={v:.6g}" for n, v in violations)
        raise InfeasibleError(
            f"equalizer from p_cc={p_cc:g}, p_dd={p_dd:g} leaves [0, 1]: {detail}",
            violations=violations)
    return MemoryOneStrategy.from_array(np.clip(raw, 0.0, 1.0)), value


def _vertex_grid(eps: float) -> np.ndarray:
    """The 16 strategies with every component in {eps, 1-eps}."""
    return np.array(list(itertools.product((eps, 1.0 - eps), repeat=4)))


def is_equalizer(p: MemoryOneStrategy, game: GameParams,
                 eps: float = 0.01, tol: float = 1e-9) -> bool:
    """True iff pi_Y is constant (within tol) across all 16 near-vertex
    co-player strategies {eps, 1-eps}^4.

    Constancy on that finite grid characterizes equalizers for every p other
    than repeat (where payoffs against interior opponents are undefined).
    """
    if not 0.0 < eps < 0.5:
        raise ValidationError(f"eps must lie in (0, 0.5), got {eps!r}")
    vertices = _vertex_grid(eps)
    values = [press_dyson_payoff(p, MemoryOneStrategy.from_array(v), game).pi_y
              for v in vertices]
    return max(values) - min(values) < tol


def equalizer_e0_solve(p: MemoryOneStrategy, game: GameParams,
                       residual_tol: float = 1e-9):
    """Recover (beta, gamma) with p = (1+bR+g, 1+bT+g, bS+g, bP+g), if any.

    Solves the overdetermined 4x2 system by least squares and accepts only
    when the residual is tiny and beta is nonzero; returns None otherwise.
    The solvable set is a strict subset of all equalizer games for some p.
    """
    a = np.array([[game.R, 1.0], [game.T, 1.0], [game.S, 1.0], [game.P, 1.0]])
    b = np.array([p.p_cc - 1.0, p.p_cd - 1.0, p.p_dc, p.p_dd])
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    if np.max(np.abs(a @ sol - b)) >= residual_tol or abs(sol[0]) < 1e-12:
        return None
    return float(sol[0]), float(sol[1])


@dataclass(frozen=True)
class CoefficientMatrix:
    """A matrix of game-parameter coefficients together with its kernel size.

    The kernel consists of payoff vectors (R, S, T, P) annihilated by the
    matrix; its dimension is computed from singular values with a relative
    threshold.
    """

    matrix: np.ndarray
    kernel_dim: int


def _kernel_dim(matrix: np.ndarray) -> int:
    sv = np.linalg.svd(matrix, compute_uv=False)
    top = sv[0] if sv.size else 0.0
    if top <= 0.0:
        return matrix.shape[1]
    rank = int(np.sum(sv > RANK_RTOL * top))
    return matrix.shape[1] - rank


def gradient_coeff_matrix(p: MemoryOneStrategy, q: MemoryOneStrategy) -> CoefficientMatrix:
    """Rows give, per q component, the (R, S, T, P) coefficients of the payoff
    gradient; the kernel is the space of games whose gradient vanishes at q.

    Entry (j, s) is d f_s / d q_j - (f_s / f_sigma) d f_sigma / d q_j with the
    column order (CC, DC, CD, DD) rearranged to pair with (R, S, T, P).  At
    p = repeat every f and every partial vanishes, so the matrix is identically
    zero (kernel dimension 4).
    """
    f, jac = f_jacobian(p.as_array(), q.as_array())
    f = np.asarray(f, dtype=float).reshape(4)
    jac = np.asarray(jac, dtype=float).reshape(4, 4)   # [s, j]
    sigma = f.sum()
    if abs(sigma) < DEGENERACY_EPS:
        if np.max(np.abs(f)) < DEGENERACY_EPS and np.max(np.abs(jac)) < DEGENERACY_EPS:
            return CoefficientMatrix(matrix=np.zeros((4, 4)), kernel_dim=4)
        raise DegenerateChainError("payoff denominator vanishes at this (p, q)")
    js = jac.sum(axis=0)                                # d f_sigma / d q_j
    # [j, s]: the f order (cc, dc, cd, dd) already pairs with (R, S, T, P)
    m = jac.T - np.outer(js, f) / sigma
    return CoefficientMatrix(matrix=m, kernel_dim=_kernel_dim(m))


def boundary_payoff_matrix(p: MemoryOneStrategy, eps: float = 0.05) -> CoefficientMatrix:
    """15x4 matrix of payoff differences across the near-vertex grid.

    Row per q in {eps, 1-eps}^4 minus the all-eps corner: the coefficients v
    with pi_Y(p, q) - pi_Y(p, all-eps) = <v, (R, S, T, P)>.  Its kernel equals
    the space of games making p an equalizer, regardless of eps.
    """
    if not 0.0 < eps < 0.5:
        raise ValidationError(f"eps must lie in (0, 0.5), got {eps!r}")
    vertices = _vertex_grid(eps)
    f = np.stack(f_components_raw(p.as_array(), vertices), axis=-1)  # (16, 4)
    sigma = f.sum(axis=-1)
    if np.any(np.abs(sigma) < DEGENERACY_EPS):
        raise DegenerateChainError(
            "payoff denominator vanishes on the vertex grid (p is repeat)")
    ratios = f / sigma[:, None]       # rows pair with (R, S, T, P) in f order
    base = ratios[0]                  # the all-eps corner comes first
    m = ratios[1:] - base
    return CoefficientMatrix(matrix=m, kernel_dim=_kernel_dim(m))


@dataclass(frozen=True)
class ConditionReport:
    """Sufficient conditions for positive-slope control to make every payoff
    partial of the adapting player non-negative (the robustness-covered case).

    Payoffs are rescaled so R = 1 and P = 0.  ``cc_ge_cd`` / ``dc_ge_dd``
    follow the supplied strategy when given; without one they report whether
    the inequality holds for every positive-slope construction in this game.
    ``pczd_a`` / ``pczd_b`` are the closed-form equivalents for a known slope.
    """

    cc_ge_cd: bool
    dc_ge_dd: bool
    payoff_sum_in_range: bool
    prefactor_nonneg: bool
    rescaled_s: float
    rescaled_t: float
    pczd_a: bool | None = None
    pczd_b: bool | None = None

    @property
    def robust(self) -> bool:
        return (self.cc_ge_cd and self.dc_ge_dd
                and self.payoff_sum_in_range and self.prefactor_nonneg)


def chen_zinger_conditions(game: GameParams, p: MemoryOneStrategy | None = None,
                           chi: float | None = None) -> ConditionReport:
    """Evaluate the four sufficient robustness conditions for this game.

    Rescales payoffs by z -> (z - P)/(R - P).  With a strategy, the two
    component inequalities are checked directly; with a slope, their
    closed-form equivalents are reported as well.
    """
    if game.R == game.P:
        raise ValidationError("rescaling requires R != P")
    scale = game.R - game.P
    s = (game.S - game.P) / scale
    t = (game.T - game.P) / scale

    if p is not None:
        cc_ge_cd = p.p_cc >= p.p_cd
        dc_ge_dd = p.p_dc >= p.p_dd
        prefactor = 1.0 - p.p_cd - (1.0 - p.p_cc) * s + p.p_dd * (1.0 - s) >= 0.0
    else:
        # bounds that make the inequalities hold for every chi > 0 and every
        # strategy the construction can produce
        cc_ge_cd = t >= 1.0 and s <= 1.0
        dc_ge_dd = s <= 0.0 and t >= 0.0
        prefactor = s <= 0.0

    report = dict(
        cc_ge_cd=bool(cc_ge_cd),
        dc_ge_dd=bool(dc_ge_dd),
        payoff_sum_in_range=bool(0.0 <= s + t <= 2.0),
        prefactor_nonneg=bool(prefactor),
        rescaled_s=float(s),
        rescaled_t=float(t),
    )
    if chi is not None:
        report["pczd_a"] = bool(chi * (t - 1.0) + (1.0 - s) >= 0.0)
        report["pczd_b"] = bool(t - chi * s >= 0.0)
    return ConditionReport(**report)


def pi_y_at_vertices(p: MemoryOneStrategy, game: GameParams, eps: float) -> np.ndarray:
    """pi_Y against every co-player strategy in {eps, 1-eps}^4, vertex-grid order."""
    vertices = _vertex_grid(eps)
    f = np.stack(f_components_raw(p.as_array(), vertices), axis=-1)
    sigma = f.sum(axis=-1)
    return (f * _y_weights(game)).sum(axis=-1) / sigma
