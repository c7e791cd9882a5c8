"""Batch replication harness: endpoint-distribution censuses, the
positive-slope control sweep, the random-search noise sweep, and the
trembling-hand study, with clustering, reporting, and CSV/JSON persistence.

Runs are addressed by index: run i draws its strategy sample and any search
randomness from its own counter-based stream, so reports are byte-identical
for a given (inputs, seed) no matter how runs are chunked across workers.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng as _rng
from .errors import InfeasibleError, ValidationError
from .games import GameParams, MemoryOneStrategy, PayoffPair, arcsine_sample
from .learn import (LearnerConfig, Termination, classify_endpoint, lrs_batch,
                    pga_batch)
from .region import feasible_region
from .zd import ZDParams, phi_max, zd_strategy

_CHUNK = 2048          # runs per batch; fixed so chunking never depends on workers
_TERM_NAMES = {0: "converged", 1: "max_iterations", 2: "stalled"}


@dataclass(frozen=True)
class EndpointCluster:
    """All runs whose final payoff pair rounds to the same 2-decimal point."""

    pi_y_2dp: float
    pi_x_2dp: float
    count: int
    frequency: float
    representatives: tuple[tuple[float, float, float, float], ...]
    form_counts: dict[str, int]

    def key(self) -> tuple[float, float]:
        return (self.pi_y_2dp, self.pi_x_2dp)


@dataclass
class CensusResult:
    """Full record of an endpoint-distribution study."""

    game: GameParams
    p: tuple[float, float, float, float]
    learner: str
    n_samples: int
    seed: int
    config: LearnerConfig
    q0: np.ndarray
    q_final: np.ndarray
    pi_y: np.ndarray
    pi_x: np.ndarray
    n_steps: np.ndarray
    termination: np.ndarray
    endpoint_form: list[str]
    clusters: list[EndpointCluster] = field(default_factory=list)

    def cluster_by_key(self, key) -> EndpointCluster | None:
        for c in self.clusters:
            if c.key() == tuple(key):
                return c
        return None

    def global_cluster(self) -> EndpointCluster:
        """Cluster at the best co-player payoff (ties broken by pi_x)."""
        return max(self.clusters, key=lambda c: c.key())

    def suboptimal_frequency(self) -> float:
        return 1.0 - self.global_cluster().frequency


def _cluster(census: CensusResult, max_representatives: int = 5) -> None:
    y2 = np.round(census.pi_y, 2) + 0.0   # normalize -0.0
    x2 = np.round(census.pi_x, 2) + 0.0
    groups: dict[tuple[float, float], list[int]] = {}
    for i in range(census.n_samples):
        groups.setdefault((float(y2[i]), float(x2[i])), []).append(i)
    clusters = []
    for key, idxs in groups.items():
        forms: dict[str, int] = {}
        for i in idxs:
            forms[census.endpoint_form[i]] = forms.get(census.endpoint_form[i], 0) + 1
        reps = tuple(tuple(float(v) for v in census.q_final[i])
                     for i in idxs[:max_representatives])
        clusters.append(EndpointCluster(
            pi_y_2dp=key[0], pi_x_2dp=key[1], count=len(idxs),
            frequency=len(idxs) / census.n_samples,
            representatives=reps, form_counts=forms))
    clusters.sort(key=lambda c: (-c.count, c.pi_y_2dp, c.pi_x_2dp))
    census.clusters = clusters


def _chunk_ranges(n: int, chunk: int = _CHUNK):
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def _run_chunks(worker, n: int, workers: int | None, chunk: int = _CHUNK):
    """Evaluate worker(lo, hi) over fixed chunks, merged in index order."""
    ranges = _chunk_ranges(n, chunk)
    if workers is None or workers <= 1 or len(ranges) <= 1:
        return [worker(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: worker(*r), ranges))


def endpoint_distribution(p, game: GameParams, n_samples: int,
                          learner: str = "pga", cfg: LearnerConfig | None = None,
                          seed: int = 0, workers: int | None = None,
                          stream_prefix: tuple[int, ...] = ()) -> CensusResult:
    """Run ``n_samples`` arcsine-initialized learner runs against fixed p and
    cluster the final payoffs rounded to two decimals.

    Run i uses the stream addressed by ``(*stream_prefix, i)`` under ``seed``
    for both its initial strategy and (for random search) its candidate draws,
    making the census deterministic given the seed and independent of worker
    count.
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    if learner not in ("pga", "lrs"):
        raise ValidationError(f"unknown learner {learner!r}")
    cfg = cfg or LearnerConfig()
    p_arr = p.as_array() if isinstance(p, MemoryOneStrategy) else np.asarray(p, dtype=float)

    def worker(lo, hi):
        gens = [_rng.stream(seed, *stream_prefix, i) for i in range(lo, hi)]
        q0 = np.stack([arcsine_sample(g, 4) for g in gens])
        if learner == "pga":
            return q0, pga_batch(p_arr, q0, game, cfg)
        return q0, lrs_batch(p_arr, q0, game, cfg, gens)

    parts = _run_chunks(worker, n_samples, workers)
    q0 = np.concatenate([part[0] for part in parts])
    outs = [part[1] for part in parts]
    census = CensusResult(
        game=game,
        p=tuple(float(v) for v in p_arr),
        learner=learner, n_samples=n_samples, seed=int(seed), config=cfg,
        q0=q0,
        q_final=np.concatenate([o.q_final for o in outs]),
        pi_y=np.concatenate([o.pi_y for o in outs]),
        pi_x=np.concatenate([o.pi_x for o in outs]),
        n_steps=np.concatenate([o.n_steps for o in outs]),
        termination=np.concatenate([o.termination for o in outs]),
        endpoint_form=[],
    )
    census.endpoint_form = [classify_endpoint(census.q_final[i]).kind.value
                            for i in range(n_samples)]
    _cluster(census)
    return census


# ---------------------------------------------------------------------------
# positive-slope control sweep


@dataclass
class SweepCell:
    chi: float
    phi: float
    p: tuple[float, float, float, float] | None
    feasible: bool
    clusters: list[EndpointCluster] = field(default_factory=list)
    n_clusters: int = 0
    suboptimal_frequency: float = 0.0
    global_payoff: tuple[float, float] | None = None


@dataclass
class SweepReport:
    game: GameParams
    kappa: float
    n_q0: int
    seed: int
    cells: list[SweepCell]

    @property
    def feasible_cells(self) -> list[SweepCell]:
        return [c for c in self.cells if c.feasible]

    @property
    def multi_endpoint_cells(self) -> list[SweepCell]:
        return [c for c in self.feasible_cells if c.n_clusters > 1]

    @property
    def mean_suboptimal_frequency(self) -> float:
        multi = self.multi_endpoint_cells
        if not multi:
            return 0.0
        return float(np.mean([c.suboptimal_frequency for c in multi]))


def pczd_sweep(game: GameParams, chi_values, phi_count: int = 5, n_q0: int = 100,
               seed: int = 0, cfg: LearnerConfig | None = None,
               workers: int | None = None, kappa: float | None = None) -> SweepReport:
    """Endpoint census per (chi, phi) cell of positive-slope control strategies.

    For each slope, phi ranges over ``phi_count`` linearly spaced values
    between 1e-4 and 0.99 of the largest feasible scale.  Infeasible slopes
    are recorded as infeasible cells rather than aborting the sweep.
    """
    cfg = cfg or LearnerConfig()
    kappa = game.P if kappa is None else kappa
    cells: list[SweepCell] = []
    cell_index = 0
    for chi in chi_values:
        try:
            top = 0.99 * phi_max(game, kappa, chi)
            phis = np.linspace(1e-4, top, phi_count)
            if top < 1e-4:
                raise InfeasibleError(f"phi range empty for chi={chi}")
        except InfeasibleError:
            for _ in range(phi_count):
                cells.append(SweepCell(chi=float(chi), phi=float("nan"),
                                       p=None, feasible=False))
                cell_index += 1
            continue
        for phi in phis:
            p = zd_strategy(game, ZDParams(kappa=kappa, chi=float(chi), phi=float(phi)))
            census = endpoint_distribution(
                p, game, n_q0, learner="pga", cfg=cfg, seed=seed,
                workers=workers, stream_prefix=(cell_index,))
            best = census.global_cluster()
            cells.append(SweepCell(
                chi=float(chi), phi=float(phi), p=census.p, feasible=True,
                clusters=census.clusters, n_clusters=len(census.clusters),
                suboptimal_frequency=census.suboptimal_frequency(),
                global_payoff=best.key()))
            cell_index += 1
    return SweepReport(game=game, kappa=float(kappa), n_q0=n_q0, seed=int(seed),
                       cells=cells)


# ---------------------------------------------------------------------------
# random-search noise sweep


def default_noise_levels() -> np.ndarray:
    return np.linspace(0.01, 0.5, 10)


@dataclass
class NoiseReport:
    game: GameParams
    eps_values: np.ndarray
    n_q0: int
    seed: int
    mean_payoffs: np.ndarray       # (n_p, n_eps) means of 2-dp endpoint payoffs
    increments: np.ndarray         # (n_p, n_eps - 1)

    @property
    def positive_fraction(self) -> float:
        return float(np.mean(self.increments > 0.0))

    @property
    def negative_fraction(self) -> float:
        return float(np.mean(self.increments < 0.0))

    @property
    def zero_fraction(self) -> float:
        return float(np.mean(self.increments == 0.0))

    def strategies_with_decreases(self, at_least: int) -> float:
        """Fraction of fixed strategies with >= at_least decreasing increments."""
        counts = (self.increments < 0.0).sum(axis=1)
        return float(np.mean(counts >= at_least))


def lrs_noise_sweep(p_set, game: GameParams, eps_values=None, n_q0: int = 200,
                    seed: int = 0, cfg: LearnerConfig | None = None,
                    workers: int | None = None) -> NoiseReport:
    """Local random search across noise radii for each fixed strategy.

    Every radius reuses the same initial strategies per p (streams keyed by
    (p, run)); candidate draws are keyed by (p, radius, run).  The performance
    metric per radius is the mean endpoint payoff rounded to two decimals,
    matching the clustering convention, so equal outcomes produce exactly-zero
    increments.
    """
    cfg = cfg or LearnerConfig()
    eps_values = default_noise_levels() if eps_values is None else np.asarray(eps_values, dtype=float)
    p_arrs = [p.as_array() if isinstance(p, MemoryOneStrategy) else np.asarray(p, dtype=float)
              for p in p_set]
    n_eps = len(eps_values)

    def run_cell(ip: int) -> np.ndarray:
        q0 = np.stack([arcsine_sample(_rng.stream(seed, ip, run), 4)
                       for run in range(n_q0)])
        # one mega-batch per fixed strategy: lanes = radii x runs
        lanes_q0 = np.tile(q0, (n_eps, 1))
        radius = np.repeat(eps_values, n_q0)
        gens = [_rng.stream(seed, ip, ie, run)
                for ie in range(n_eps) for run in range(n_q0)]
        p_lane = np.broadcast_to(p_arrs[ip], (n_eps * n_q0, 4))
        out = lrs_batch(p_lane, lanes_q0, game, cfg, gens, radius=radius)
        finals = np.round(out.pi_y, 2).reshape(n_eps, n_q0)
        return finals.mean(axis=1)

    if workers is None or workers <= 1 or len(p_arrs) <= 1:
        means = [run_cell(ip) for ip in range(len(p_arrs))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            means = list(pool.map(run_cell, range(len(p_arrs))))
    mean_payoffs = np.stack(means)
    return NoiseReport(game=game, eps_values=eps_values, n_q0=n_q0, seed=int(seed),
                       mean_payoffs=mean_payoffs,
                       increments=np.diff(mean_payoffs, axis=1))


# ---------------------------------------------------------------------------
# trembling-hand study


@dataclass
class TremblingStrategyResult:
    p: tuple[float, float, float, float]
    global_payoff: tuple[float, float]       # region rightmost, 2 dp
    baseline_global: tuple[float, float]     # best error-free census cluster
    n_converged: int
    n_max_iterations: int
    n_at_global: int

    @property
    def fraction_global(self) -> float:
        return self.n_at_global / self.n_converged if self.n_converged else float("nan")


@dataclass
class TremblingGameResult:
    game: GameParams
    error_rate: float
    results: list[TremblingStrategyResult]

    @property
    def all_converged_global(self) -> bool:
        return all(r.n_at_global == r.n_converged for r in self.results)

    @property
    def total_max_iterations(self) -> int:
        return sum(r.n_max_iterations for r in self.results)


def trembling_sweep(games, n_p: int = 50, n_q0: int = 50, error_rate: float = 1e-3,
                    seed: int = 0, cfg: LearnerConfig | None = None,
                    workers: int | None = None) -> list[TremblingGameResult]:
    """Gradient ascent with implementation errors from arcsine-sampled fixed
    strategies, measured against each strategy's global payoff point.

    The per-strategy global point is the feasible region's rightmost payoff
    (cross-checked against the error-free census run from the same initial
    strategies).  Run payoffs are the error-free payoffs of the final intended
    strategies, rounded to two decimals.
    """
    cfg = cfg or LearnerConfig()
    cfg_err = LearnerConfig(**{**asdict(cfg), "error_rate": error_rate})
    reports = []
    for gi, game in enumerate(games):
        results = []
        for ip in range(n_p):
            p = MemoryOneStrategy.from_array(arcsine_sample(_rng.stream(seed, gi, ip), 4))
            q0 = np.stack([arcsine_sample(_rng.stream(seed, gi, ip, run), 4)
                           for run in range(n_q0)])
            base = pga_batch(p.as_array(), q0, game, cfg)
            trem = pga_batch(p.as_array(), q0, game, cfg_err)
            rightmost = feasible_region(p, game).rightmost
            global_key = rightmost.rounded(2)
            base_best = max(zip(np.round(base.pi_y, 2), np.round(base.pi_x, 2)))
            conv = trem.termination == 0
            at_global = conv & (np.round(trem.pi_y, 2) == global_key[0]) \
                & (np.round(trem.pi_x, 2) == global_key[1])
            results.append(TremblingStrategyResult(
                p=tuple(float(v) for v in p.as_array()),
                global_payoff=global_key,
                baseline_global=(float(base_best[0]), float(base_best[1])),
                n_converged=int(conv.sum()),
                n_max_iterations=int((trem.termination == 1).sum()),
                n_at_global=int(at_global.sum())))
        reports.append(TremblingGameResult(game=game, error_rate=error_rate,
                                           results=results))
    return reports


# ---------------------------------------------------------------------------
# heatmaps


@dataclass
class HeatmapGrid:
    counts: np.ndarray        # (bins, bins): [pi_y bin, pi_x bin]
    y_edges: np.ndarray
    x_edges: np.ndarray

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def nonzero_bins(self) -> int:
        return int(np.count_nonzero(self.counts))


def heatmap_grid(data, bins: int, game: GameParams) -> HeatmapGrid:
    """Uniform 2-D histogram of payoff pairs over the game's payoff bounding box.

    ``data`` may be a CensusResult, a list of clusters (weighted by count), or
    an (N, 2) array of (pi_y, pi_x) pairs.
    """
    if bins < 2:
        raise ValidationError("bins must be >= 2")
    if isinstance(data, CensusResult):
        pts = np.column_stack([data.pi_y, data.pi_x])
        weights = None
    elif len(data) and isinstance(data[0], EndpointCluster):
        pts = np.array([[c.pi_y_2dp, c.pi_x_2dp] for c in data])
        weights = np.array([c.count for c in data], dtype=float)
    else:
        pts = np.asarray(data, dtype=float).reshape(-1, 2)
        weights = None
    lo, hi = game.bounds()
    edges = np.linspace(lo, hi, bins + 1)
    counts = np.zeros((bins, bins))
    iy = np.clip(np.searchsorted(edges, pts[:, 0], side="right") - 1, 0, bins - 1)
    ix = np.clip(np.searchsorted(edges, pts[:, 1], side="right") - 1, 0, bins - 1)
    np.add.at(counts, (iy, ix), 1.0 if weights is None else weights)
    return HeatmapGrid(counts=counts, y_edges=edges, x_edges=edges.copy())


# ---------------------------------------------------------------------------
# persistence

RUNS_FIELDS = ["run_id", "q0_cc", "q0_cd", "q0_dc", "q0_dd",
               "qf_cc", "qf_cd", "qf_dc", "qf_dd",
               "pi_y", "pi_x", "pi_y_2dp", "pi_x_2dp",
               "n_steps", "termination", "endpoint_form"]


def _config_echo(census: CensusResult) -> dict:
    return {
        "game": [census.game.R, census.game.S, census.game.T, census.game.P],
        "p": list(census.p),
        "learner": census.learner,
        "n_samples": census.n_samples,
        "seed": census.seed,
        "config": asdict(census.config),
    }


def write_runs_csv(census: CensusResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUNS_FIELDS)
        for i in range(census.n_samples):
            writer.writerow([
                i,
                *(repr(float(v)) for v in census.q0[i]),
                *(repr(float(v)) for v in census.q_final[i]),
                repr(float(census.pi_y[i])), repr(float(census.pi_x[i])),
                f"{census.pi_y[i]:.2f}", f"{census.pi_x[i]:.2f}",
                int(census.n_steps[i]),
                _TERM_NAMES[int(census.termination[i])],
                census.endpoint_form[i],
            ])


def write_clusters_csv(census: CensusResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pi_y_2dp", "pi_x_2dp", "count", "frequency"])
        for c in census.clusters:
            writer.writerow([f"{c.pi_y_2dp:.2f}", f"{c.pi_x_2dp:.2f}",
                             c.count, repr(c.frequency)])


def census_report(census: CensusResult) -> dict:
    """JSON-ready mirror of the runs and clusters files plus the config echo."""
    return {
        **_config_echo(census),
        "clusters": [{
            "pi_y_2dp": c.pi_y_2dp, "pi_x_2dp": c.pi_x_2dp,
            "count": c.count, "frequency": c.frequency,
            "representatives": [list(r) for r in c.representatives],
            "form_counts": c.form_counts,
        } for c in census.clusters],
        "runs": [{
            "run_id": i,
            "q0": [float(v) for v in census.q0[i]],
            "q_final": [float(v) for v in census.q_final[i]],
            "pi_y": float(census.pi_y[i]), "pi_x": float(census.pi_x[i]),
            "pi_y_2dp": round(float(census.pi_y[i]), 2),
            "pi_x_2dp": round(float(census.pi_x[i]), 2),
            "n_steps": int(census.n_steps[i]),
            "termination": _TERM_NAMES[int(census.termination[i])],
            "endpoint_form": census.endpoint_form[i],
        } for i in range(census.n_samples)],
    }


def write_census_json(census: CensusResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(census_report(census), fh, indent=1)
        fh.write("\n")
