"""Selfish-learner dynamics against a fixed co-player: projected gradient
ascent, local random search, trembling-hand implementation errors, and
endpoint-form classification.

The engines run batches of independent runs as (N, 4) arrays.  Every update is
elementwise per lane, so a lane's trajectory is bit-identical no matter how
runs are grouped into batches -- the property the sweep layer's determinism
contract relies on.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .games import GameParams, MemoryOneStrategy, PayoffPair
from .markov import initial_distribution
from .payoff import (DEGENERACY_EPS, FALLBACK_LAMBDA, f_components_raw,
                     f_jacobian, discounted_gradient_raw, discounted_payoff_raw,
                     _x_weights, _y_weights)

# Consecutive steps without a new best payoff (beyond tolerance) before a run
# is declared converged; guards against alternating-sign float noise that
# keeps per-step deltas just above tolerance without net progress.
STALL_WINDOW = 10

_LRS_BLOCK = 256  # candidate draws buffered per lane between generator refills


class Termination(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    STALLED = "stalled"


_TERM_CODES = {0: Termination.CONVERGED, 1: Termination.MAX_ITERATIONS,
               2: Termination.STALLED}


class EndpointKind(enum.Enum):
    TOP_FACE = "top_face"                    # q_cc = q_cd = 1
    BOTTOM_FACE = "bottom_face"              # q_dc = q_dd = 0
    FULLY_DETERMINISTIC = "fully_deterministic"
    OTHER_BOUNDARY = "other_boundary"
    INTERIOR = "interior"


@dataclass(frozen=True)
class EndpointForm:
    kind: EndpointKind
    deterministic: tuple[bool, bool, bool, bool]


@dataclass
class LearnerConfig:
    """Knobs shared by both learners.

    PGA: step size ``learning_rate``, stopping rule ``payoff_tolerance`` on
    successive payoff changes, ``max_iterations`` cap, trembling-hand
    ``error_rate``.  LRS: sampling ``lrs_radius``, ``lrs_patience`` consecutive
    rejections before stalling, and the ``lrs_discount`` used to keep payoffs
    defined at every sampled strategy.
    """

    learning_rate: float = 1e-2
    payoff_tolerance: float = 1e-15
    max_iterations: int = 2_000_000
    error_rate: float = 0.0
    lrs_radius: float = 0.05
    lrs_patience: int = 10_000
    lrs_discount: float = 0.9999
    record_every: int = 1

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.payoff_tolerance <= 0:
            raise ValidationError("payoff_tolerance must be > 0")
        if not 0.0 <= self.error_rate < 0.5:
            raise ValidationError(f"error_rate must lie in [0, 0.5), got {self.error_rate}")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not 0.0 < self.lrs_discount < 1.0:
            raise ValidationError("lrs_discount must lie in (0, 1)")


@dataclass
class Trajectory:
    """Recorded run: one row per kept record, plus the endpoint summary."""

    iterations: np.ndarray
    strategies: np.ndarray
    pi_y: np.ndarray
    pi_x: np.ndarray
    grad_norm: np.ndarray
    endpoint: MemoryOneStrategy
    endpoint_payoff: PayoffPair
    termination: Termination
    n_steps: int


@dataclass
class BatchOutcome:
    """Endpoint-only result of a batch of runs (arrays indexed by run)."""

    q_final: np.ndarray
    pi_y: np.ndarray
    pi_x: np.ndarray
    n_steps: np.ndarray
    termination: np.ndarray      # int8: 0 converged, 1 max-iterations, 2 stalled
    degenerate_final: np.ndarray  # bool: final payoff needed the discounted fallback

    def termination_of(self, i: int) -> Termination:
        return _TERM_CODES[int(self.termination[i])]


def project_to_hypercube(x) -> np.ndarray:
    """Componentwise clamp onto [0, 1]^m."""
    return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)


def effective_strategy(q: MemoryOneStrategy, error_rate: float) -> MemoryOneStrategy:
    """Strategy actually played by a trembling hand: (1-e) q + e (1-q)."""
    if not 0.0 <= error_rate < 1.0:
        raise ValidationError(f"error_rate must lie in [0, 1), got {error_rate}")
    mixed = (1.0 - error_rate) * q.as_array() + error_rate * (1.0 - q.as_array())
    return MemoryOneStrategy.from_array(mixed, p0=q.p0)


def classify_endpoint(q, tol: float = 1e-9) -> EndpointForm:
    """Endpoint form with components within tol of {0, 1} counted deterministic.

    Precedence: fully deterministic > top face > bottom face > other boundary
    > interior.
    """
    arr = q.as_array() if isinstance(q, MemoryOneStrategy) else np.asarray(q, dtype=float)
    at_one = arr >= 1.0 - tol
    at_zero = arr <= tol
    det = at_one | at_zero
    mask = tuple(bool(b) for b in det)
    if det.all():
        kind = EndpointKind.FULLY_DETERMINISTIC
    elif at_one[0] and at_one[1]:
        kind = EndpointKind.TOP_FACE
    elif at_zero[2] and at_zero[3]:
        kind = EndpointKind.BOTTOM_FACE
    elif det.any():
        kind = EndpointKind.OTHER_BOUNDARY
    else:
        kind = EndpointKind.INTERIOR
    return EndpointForm(kind=kind, deterministic=mask)


def _row_align(p: np.ndarray, n: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        return np.broadcast_to(p, (n, 4))
    if p.shape != (n, 4):
        raise ValidationError(f"fixed strategy batch has shape {p.shape}, expected ({n}, 4)")
    return p


def clean_payoffs(p, q, game: GameParams, nu0=None):
    """Batched error-free payoff pairs at the given strategies.

    Uses the determinant formula and falls back to a near-one discounted
    evaluation on lanes whose chain has no unique stationary distribution.
    Returns (pi_y, pi_x, degenerate_mask).
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    p = _row_align(p, len(q))
    if nu0 is None:
        nu0 = np.full(4, 0.25)
    w_y = _y_weights(game)
    w_x = _x_weights(game)
    f = np.stack(f_components_raw(p, q), axis=-1)
    sigma = f.sum(axis=-1)
    deg = np.abs(sigma) < DEGENERACY_EPS
    safe = np.where(deg, 1.0, sigma)
    pi_y = (f * w_y).sum(axis=-1) / safe
    pi_x = (f * w_x).sum(axis=-1) / safe
    if deg.any():
        pi_y[deg] = discounted_payoff_raw(p[deg], q[deg], w_y, nu0, FALLBACK_LAMBDA)
        pi_x[deg] = discounted_payoff_raw(p[deg], q[deg], w_x, nu0, FALLBACK_LAMBDA)
    return pi_y, pi_x, deg


def pga_batch_reference(p, q0, game: GameParams, cfg: LearnerConfig, nu0=None,
                        recorder=None) -> BatchOutcome:
    """Array-engine twin of :func:`pga_batch`, kept as a cross-check and for
    recorded runs; produces the same trajectories as the compiled kernel.

    Each lane follows q <- proj(q + eta * grad) with the exact analytic
    gradient of the (possibly trembling) objective; on the rare lanes whose
    chain degenerates, that step's gradient and payoff use the discounted
    fallback instead of aborting.  A lane stops when successive payoffs differ
    by less than the tolerance (or the stall guard fires), else at the
    iteration cap.
    """
    q0 = np.atleast_2d(np.asarray(q0, dtype=float))
    n = len(q0)
    p_all = _row_align(p, n)
    if nu0 is None:
        nu0 = np.full(4, 0.25)
    w_y = _y_weights(game)
    eta = cfg.learning_rate
    tol = cfg.payoff_tolerance
    eps = cfg.error_rate
    chain = 1.0 - 2.0 * eps

    q = q0.copy()
    p_act = p_all.copy()
    idx = np.arange(n)
    pi_prev = np.zeros(n)
    best = np.full(n, -np.inf)
    stall = np.zeros(n, dtype=np.int32)

    q_final = q0.copy()
    n_steps = np.zeros(n, dtype=np.int64)
    term = np.zeros(n, dtype=np.int8)

    it = 0
    while idx.size:
        e = eps + chain * q if eps else q
        f, jac = f_jacobian(p_act, e)
        sigma = f.sum(axis=-1)
        deg = np.abs(sigma) < DEGENERACY_EPS
        safe = np.where(deg, 1.0, sigma)
        numer = (f * w_y).sum(axis=-1)
        pi = numer / safe
        jw = (jac * w_y[:, None]).sum(axis=-2)
        js = jac.sum(axis=-2)
        grad = (jw * safe[:, None] - numer[:, None] * js) / (safe * safe)[:, None]
        if deg.any():
            pi[deg] = discounted_payoff_raw(p_act[deg], e[deg], w_y, nu0, FALLBACK_LAMBDA)
            grad[deg] = discounted_gradient_raw(p_act[deg], e[deg], w_y, nu0)
        grad *= chain  # d(effective)/d(intended)

        if it == 0:
            conv = np.zeros(idx.size, dtype=bool)
            best = pi.copy()
            stall = np.zeros(idx.size, dtype=np.int32)
        else:
            conv = np.abs(pi - pi_prev) < tol
            improved = pi > best + tol
            best = np.where(improved, pi, best)
            stall = np.where(improved, 0, stall + 1)
            conv |= stall >= STALL_WINDOW

        if recorder is not None and it % cfg.record_every == 0:
            recorder(it, idx, q, pi, np.max(np.abs(grad), axis=-1), p_act)

        hit_cap = np.full(idx.size, it >= cfg.max_iterations) & ~conv
        done = conv | hit_cap
        if done.any():
            sel = idx[done]
            q_final[sel] = q[done]
            n_steps[sel] = it
            term[sel] = np.where(conv[done], 0, 1)
            if recorder is not None and it % cfg.record_every != 0:
                recorder(it, sel, q[done], pi[done],
                         np.max(np.abs(grad[done]), axis=-1), p_act[done])
            keep = ~done
            q = q[keep]
            p_act = p_act[keep]
            idx = idx[keep]
            pi = pi[keep]
            best = best[keep]
            stall = stall[keep]
            grad = grad[keep]
            if not idx.size:
                break
        q = np.clip(q + eta * grad, 0.0, 1.0)
        pi_prev = pi
        it += 1

    pi_y, pi_x, deg_final = clean_payoffs(p_all, q_final, game, nu0)
    return BatchOutcome(q_final=q_final, pi_y=pi_y, pi_x=pi_x, n_steps=n_steps,
                        termination=term, degenerate_final=deg_final)


def lrs_batch_reference(p, q0, game: GameParams, cfg: LearnerConfig, generators,
                        radius=None, recorder=None) -> BatchOutcome:
    """Array-engine twin of :func:`lrs_batch`; same draws, same trajectories.

    Each lane draws candidates coordinatewise uniform in a radius box around
    its current strategy (clamped to [0, 1]) from its own random stream, and
    accepts only improvements above the payoff tolerance.  A lane stalls after
    ``lrs_patience`` consecutive rejections.
    """
    q0 = np.atleast_2d(np.asarray(q0, dtype=float))
    n = len(q0)
    p_all = _row_align(p, n)
    if len(generators) != n:
        raise ValidationError(f"{n} runs need {n} generators, got {len(generators)}")
    if radius is None:
        radius = cfg.lrs_radius
    rad = np.broadcast_to(np.asarray(radius, dtype=float), (n,)).copy()
    lam = cfg.lrs_discount
    tol = cfg.payoff_tolerance
    nu0 = np.full(4, 0.25)
    w_y = _y_weights(game)

    q = q0.copy()
    p_act = p_all.copy()
    idx = np.arange(n)
    gens = list(generators)
    pi = discounted_payoff_raw(p_act, q, w_y, nu0, lam)
    rejections = np.zeros(n, dtype=np.int64)

    q_final = q0.copy()
    n_steps = np.zeros(n, dtype=np.int64)
    term = np.full(n, 2, dtype=np.int8)

    blocks = np.empty((n, _LRS_BLOCK, 4))
    for i, g in enumerate(gens):
        blocks[i] = g.random((_LRS_BLOCK, 4))

    it = 0
    while idx.size:
        if recorder is not None and it % cfg.record_every == 0:
            recorder(it, idx, q, pi, np.full(idx.size, np.nan), p_act)
        cursor = it % _LRS_BLOCK
        if cursor == 0 and it > 0:
            for i, g in enumerate(gens):
                blocks[i] = g.random((_LRS_BLOCK, 4))
        u = blocks[:, cursor, :]
        cand = np.clip(q + rad[:, None] * (2.0 * u - 1.0), 0.0, 1.0)
        pi_cand = discounted_payoff_raw(p_act, cand, w_y, nu0, lam)
        accept = pi_cand - pi > tol
        q = np.where(accept[:, None], cand, q)
        pi = np.where(accept, pi_cand, pi)
        rejections = np.where(accept, 0, rejections + 1)
        it += 1

        stalled = rejections >= cfg.lrs_patience
        hit_cap = np.full(idx.size, it >= cfg.max_iterations) & ~stalled
        done = stalled | hit_cap
        if done.any():
            sel = idx[done]
            q_final[sel] = q[done]
            n_steps[sel] = it
            term[sel] = np.where(stalled[done], 2, 1)
            if recorder is not None:
                recorder(it, sel, q[done], pi[done],
                         np.full(int(done.sum()), np.nan), p_act[done])
            keep = ~done
            q = q[keep]
            p_act = p_act[keep]
            idx = idx[keep]
            pi = pi[keep]
            rejections = rejections[keep]
            rad = rad[keep]
            blocks = blocks[keep]
            gens = [g for g, k in zip(gens, keep) if k]

    w_x = _x_weights(game)
    pi_y = discounted_payoff_raw(p_all, q_final, w_y, nu0, lam)
    pi_x = discounted_payoff_raw(p_all, q_final, w_x, nu0, lam)
    return BatchOutcome(q_final=q_final, pi_y=pi_y, pi_x=pi_x, n_steps=n_steps,
                        termination=term,
                        degenerate_final=np.zeros(n, dtype=bool))


def pga_batch(p, q0, game: GameParams, cfg: LearnerConfig, nu0=None) -> BatchOutcome:
    """Projected gradient ascent for a batch of initial strategies.

    Compiled per-lane loop; trajectories match :func:`pga_batch_reference`
    step for step.  Lanes are independent, so outcomes do not depend on how
    runs are grouped into batches.
    """
    from . import _fastpath
    q0 = np.atleast_2d(np.asarray(q0, dtype=float))
    n = len(q0)
    p_all = np.ascontiguousarray(_row_align(p, n))
    if nu0 is None:
        nu0 = np.full(4, 0.25)
    q_final = np.empty((n, 4))
    n_steps = np.empty(n, dtype=np.int64)
    term = np.empty(n, dtype=np.int8)
    _fastpath.pga_endpoints(
        p_all, np.ascontiguousarray(q0), _y_weights(game), game.y_payoffs(),
        np.asarray(nu0, dtype=float), cfg.learning_rate, cfg.payoff_tolerance,
        cfg.error_rate, cfg.max_iterations, q_final, n_steps, term)
    pi_y, pi_x, deg_final = clean_payoffs(p_all, q_final, game, nu0)
    return BatchOutcome(q_final=q_final, pi_y=pi_y, pi_x=pi_x, n_steps=n_steps,
                        termination=term, degenerate_final=deg_final)


def lrs_batch(p, q0, game: GameParams, cfg: LearnerConfig, generators,
              radius=None) -> BatchOutcome:
    """Accept-if-better local random search on discounted payoffs.

    Candidates for lane i come from ``generators[i]`` in blocks, exactly the
    sequence :func:`lrs_batch_reference` consumes, with the per-step loop
    compiled.  A lane stalls after ``lrs_patience`` consecutive rejections.
    """
    from . import _fastpath
    q0 = np.atleast_2d(np.asarray(q0, dtype=float))
    n = len(q0)
    p_all = np.ascontiguousarray(_row_align(p, n))
    if len(generators) != n:
        raise ValidationError(f"{n} runs need {n} generators, got {len(generators)}")
    if radius is None:
        radius = cfg.lrs_radius
    rad = np.broadcast_to(np.asarray(radius, dtype=float), (n,)).copy()
    lam = cfg.lrs_discount
    nu0 = np.full(4, 0.25)
    w_y_state = game.y_payoffs()

    q = q0.copy()
    pi = discounted_payoff_raw(p_all, q, _y_weights(game), nu0, lam)
    rejections = np.zeros(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    q_final = q0.copy()
    pi_final = np.empty(n)
    n_steps = np.zeros(n, dtype=np.int64)
    term = np.full(n, 2, dtype=np.int8)

    gens = list(generators)
    blocks = np.empty((n, _LRS_BLOCK, 4))
    for i, g in enumerate(gens):
        blocks[i] = g.random((_LRS_BLOCK, 4))
    start_it = 0
    while True:
        remaining = _fastpath.lrs_block(
            p_all, q, pi, rejections, active, rad, blocks, start_it,
            _LRS_BLOCK, w_y_state, nu0, lam, cfg.payoff_tolerance,
            cfg.lrs_patience, cfg.max_iterations, q_final, pi_final, n_steps, term)
        if remaining == 0:
            break
        start_it += _LRS_BLOCK
        for i in range(n):
            if active[i]:
                blocks[i] = gens[i].random((_LRS_BLOCK, 4))

    w_x = _x_weights(game)
    pi_y = discounted_payoff_raw(p_all, q_final, _y_weights(game), nu0, lam)
    pi_x = discounted_payoff_raw(p_all, q_final, w_x, nu0, lam)
    return BatchOutcome(q_final=q_final, pi_y=pi_y, pi_x=pi_x, n_steps=n_steps,
                        termination=term, degenerate_final=np.zeros(n, dtype=bool))


class _Recorder:
    """Collects (iteration, strategy, payoffs, gradient norm) rows for one run.

    The co-player payoff pi_x is derived the same way the engine derives pi:
    error-free determinant payoffs at the effective strategy for gradient
    ascent, discounted payoffs for random search.
    """

    def __init__(self, game: GameParams, error_rate: float = 0.0,
                 discount: float | None = None):
        self.rows = []
        self._game = game
        self._eps = error_rate
        self._discount = discount

    def __call__(self, it, idx, q, pi, gnorm, p_act):
        if self._discount is not None:
            pi_x = discounted_payoff_raw(p_act, q, _x_weights(self._game),
                                         np.full(4, 0.25), self._discount)
        else:
            e = self._eps + (1.0 - 2.0 * self._eps) * q if self._eps else q
            _, pi_x, _ = clean_payoffs(p_act, e, self._game)
        for k in range(len(idx)):
            self.rows.append((it, q[k].copy(), float(pi[k]), float(pi_x[k]),
                              float(gnorm[k])))

    def arrays(self):
        if not self.rows:
            z = np.zeros(0)
            return z.astype(int), np.zeros((0, 4)), z, z, z
        iters = np.array([r[0] for r in self.rows], dtype=int)
        qs = np.stack([r[1] for r in self.rows])
        return (iters, qs, np.array([r[2] for r in self.rows]),
                np.array([r[3] for r in self.rows]),
                np.array([r[4] for r in self.rows]))


def _single_outcome(out: BatchOutcome, rec: _Recorder) -> Trajectory:
    iters, qs, piy, pix, gn = rec.arrays()
    endpoint = MemoryOneStrategy.from_array(out.q_final[0])
    return Trajectory(
        iterations=iters, strategies=qs, pi_y=piy, pi_x=pix, grad_norm=gn,
        endpoint=endpoint,
        endpoint_payoff=PayoffPair(float(out.pi_y[0]), float(out.pi_x[0])),
        termination=out.termination_of(0),
        n_steps=int(out.n_steps[0]),
    )


def pga_run(p: MemoryOneStrategy, q0: MemoryOneStrategy, game: GameParams,
            cfg: LearnerConfig | None = None) -> Trajectory:
    """Single recorded projected-gradient-ascent run of Y against fixed p.

    Works for any p; against an equalizer the landscape is flat and the run
    terminates immediately.  The endpoint payoff pair is the error-free payoff
    of the final intended strategy.
    """
    from . import _fastpath
    cfg = cfg or LearnerConfig()
    nu0 = initial_distribution(p.initial_cooperation(), q0.initial_cooperation())
    p_arr = p.as_array()
    state = np.zeros(9)
    state[0:4] = q0.as_array()
    segment = 200_000
    rec_rows = segment // cfg.record_every + 2
    chunks = []
    code = -1
    while code < 0:
        rec = np.empty((rec_rows, 7))
        wrote, code = _fastpath.pga_lane_segment(
            p_arr, state, _y_weights(game), game.y_payoffs(), nu0,
            cfg.learning_rate, cfg.payoff_tolerance, cfg.error_rate,
            cfg.max_iterations, cfg.record_every, segment, rec)
        if wrote:
            chunks.append(rec[:wrote].copy())
    rows = np.concatenate(chunks) if chunks else np.zeros((0, 7))
    q_final = state[0:4].copy()
    pi_y, pi_x, _ = clean_payoffs(p_arr, q_final[None, :], game, nu0)

    rec_q = rows[:, 1:5]
    eps = cfg.error_rate
    rec_e = eps + (1.0 - 2.0 * eps) * rec_q if eps else rec_q
    _, rec_pix, _ = clean_payoffs(p_arr, rec_e, game, nu0) if len(rows) else (None, np.zeros(0), None)
    return Trajectory(
        iterations=rows[:, 0].astype(int), strategies=rec_q,
        pi_y=rows[:, 5], pi_x=rec_pix, grad_norm=rows[:, 6],
        endpoint=MemoryOneStrategy.from_array(q_final),
        endpoint_payoff=PayoffPair(float(pi_y[0]), float(pi_x[0])),
        termination=_TERM_CODES[int(code)],
        n_steps=int(state[7]),
    )


def lrs_run(p: MemoryOneStrategy, q0: MemoryOneStrategy, game: GameParams,
            cfg: LearnerConfig, rng: np.random.Generator) -> Trajectory:
    """Single recorded local-random-search run; payoffs are discounted at
    cfg.lrs_discount so every sampled strategy (repeat included) has a
    well-defined value."""
    rec = _Recorder(game, discount=cfg.lrs_discount)
    out = lrs_batch_reference(p.as_array(), q0.as_array()[None, :], game, cfg,
                              [rng], recorder=rec)
    return _single_outcome(out, rec)
