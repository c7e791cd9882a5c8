"""Command-line front end.

Subcommands cover payoff evaluation, gradients, control-strategy construction
and checking, feasible regions, single learner runs, batch sweeps, and canned
replications of the headline experiments.  Output is JSON on stdout plus
optional CSV/SVG files; every report embeds the effective configuration and
seed so it can be reproduced exactly.

Exit codes: 0 success, 1 validation/usage error, 2 infeasible parameters,
3 convergence failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import rng as _rng
from .errors import (ConvergenceError, DegenerateChainError, InfeasibleError,
                     PayoffLabError, ValidationError)
from .games import (GameParams, MemoryOneStrategy, arcsine_sample,
                    classify_game, validate_strategy)
from .markov import average_payoffs, discounted_payoffs
from .payoff import discounted_fallback_gradient, payoff_gradient
from .zd import (ZDParams, chen_zinger_conditions, equalizer_strategy,
                 is_equalizer, equalizer_e0_solve, phi_max, zd_strategy,
                 zd_relation_residual)
from .region import classify_fixed_strategy, feasible_region
from .learn import (LearnerConfig, Termination, classify_endpoint, lrs_run,
                    pga_run)
from .experiments import (CensusResult, endpoint_distribution, heatmap_grid,
                          lrs_noise_sweep, pczd_sweep, trembling_sweep,
                          write_clusters_csv, write_runs_csv,
                          write_census_json, census_report,
                          default_noise_levels)
from .svg import heatmap_svg, trajectory_svg

# documented initial strategies landing in each basin of the fair-control
# study (the replication uses these fixed starts, not undisclosed originals)
FIG2_GAME = (2.0, -1.0, 7.0, 0.0)
FIG2_ZD = (0.0, 1.0, 0.11)
FIG2_STARTS = {
    "a_cooperation": (0.9, 0.05, 0.01, 0.01),
    "b_mixed_alternation": (0.01, 0.99, 0.97, 0.05),
    "c_pure_alternator": (0.3, 0.3, 0.7, 0.7),
}
FIG3B_GAME = (4.0, 0.0, 5.0, 3.0)
FIG3B_ZD = (3.0, 1.0, 0.03)
FIG4_GAME = (3.0, 0.0, 5.0, 1.0)
FIG4A_P = (0.997, 0.005, 0.018, 0.015)
FIG4B_P = (0.860, 0.0, 0.225, 0.252)
FIG5_START = (0.2, 0.2, 0.1, 0.05)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageError(message)


def _parse_reals(text: str, n: int, what: str) -> tuple[float, ...]:
    parts = [s.strip() for s in str(text).split(",")]
    if len(parts) != n:
        raise ValidationError(f"{what} needs {n} comma-separated values, got {len(parts)}")
    try:
        return tuple(float(s) for s in parts)
    except ValueError as exc:
        raise ValidationError(f"{what}: {exc}") from None


def _game(args) -> GameParams:
    if args.game is None:
        raise ValidationError("--game R,S,T,P is required")
    return GameParams(*_parse_reals(args.game, 4, "--game"))


def _strategy(text, what="strategy") -> MemoryOneStrategy:
    return validate_strategy(_parse_reals(text, 4, what))


def _fixed_strategy(args, game: GameParams) -> MemoryOneStrategy:
    """Resolve the fixed player's strategy from exactly one source."""
    sources = [s for s in ("p", "zd", "equalizer") if getattr(args, s, None) is not None]
    if len(sources) != 1:
        raise ValidationError("provide exactly one of --p, --zd, or --equalizer")
    if args.p is not None:
        return _strategy(args.p, "--p")
    if args.zd is not None:
        kappa, chi, phi = _parse_reals(args.zd, 3, "--zd")
        return zd_strategy(game, ZDParams(kappa, chi, phi))
    pcc, pdd = _parse_reals(args.equalizer, 2, "--equalizer")
    return equalizer_strategy(game, pcc, pdd)[0]


def _emit(payload: dict, args) -> None:
    text = json.dumps(payload, indent=1)
    out = getattr(args, "out", None)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _seed(args, config: dict) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    if "seed" in config:
        return int(config["seed"])
    env = os.environ.get("PAYOFFLAB_SEED")
    return int(env) if env else 0


def _learner_config(args, defaults: LearnerConfig | None = None) -> LearnerConfig:
    base = defaults or LearnerConfig()
    kwargs = asdict(base)
    mapping = {
        "eta": "learning_rate", "tol": "payoff_tolerance",
        "max_iter": "max_iterations", "error_rate": "error_rate",
        "radius": "lrs_radius", "patience": "lrs_patience",
        "discount": "lrs_discount", "record_every": "record_every",
    }
    for flag, field_name in mapping.items():
        value = getattr(args, flag, None)
        if value is not None:
            kwargs[field_name] = type(kwargs[field_name])(value)
    return LearnerConfig(**kwargs)


def _game_dict(game: GameParams) -> list[float]:
    return [game.R, game.S, game.T, game.P]


def _write_trajectory_csv(trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "q_cc", "q_cd", "q_dc", "q_dd",
                         "pi_y", "pi_x", "grad_norm"])
        for i in range(len(trajectory.iterations)):
            writer.writerow([
                int(trajectory.iterations[i]),
                *(repr(float(v)) for v in trajectory.strategies[i]),
                repr(float(trajectory.pi_y[i])), repr(float(trajectory.pi_x[i])),
                repr(float(trajectory.grad_norm[i])),
            ])


def _trajectory_payload(trajectory, game, p, q0, cfg, seed=None) -> dict:
    payload = {
        "game": _game_dict(game),
        "p": [float(v) for v in p.as_array()],
        "q0": [float(v) for v in q0.as_array()],
        "config": asdict(cfg),
        "endpoint": [float(v) for v in trajectory.endpoint.as_array()],
        "endpoint_form": classify_endpoint(trajectory.endpoint).kind.value,
        "pi_y": trajectory.endpoint_payoff.pi_y,
        "pi_x": trajectory.endpoint_payoff.pi_x,
        "pi_y_2dp": round(trajectory.endpoint_payoff.pi_y, 2),
        "pi_x_2dp": round(trajectory.endpoint_payoff.pi_x, 2),
        "termination": trajectory.termination.value,
        "n_steps": trajectory.n_steps,
    }
    if seed is not None:
        payload["seed"] = seed
    return payload


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_payoff(args, config) -> int:
    game = _game(args)
    p = _strategy(args.p, "--p")
    q = _strategy(args.q, "--q")
    nu0 = _parse_reals(args.nu0, 4, "--nu0") if args.nu0 else None
    if args.lam is not None:
        pair = discounted_payoffs(p, q, game, nu0=nu0, lam=float(args.lam))
    else:
        pair = average_payoffs(p, q, game, nu0=nu0)
    _emit({
        "game": _game_dict(game), "p": list(p.components()), "q": list(q.components()),
        "pi_y": pair.pi_y, "pi_x": pair.pi_x,
        "pi_y_2dp": round(pair.pi_y, 2), "pi_x_2dp": round(pair.pi_x, 2),
    }, args)
    return 0


def _cmd_gradient(args, config) -> int:
    game = _game(args)
    p = _strategy(args.p, "--p")
    q = _strategy(args.q, "--q")
    try:
        grad = payoff_gradient(p, q, game)
        fallback = False
    except DegenerateChainError:
        grad = discounted_fallback_gradient(p, q, game)
        fallback = True
    _emit({
        "game": _game_dict(game), "p": list(p.components()), "q": list(q.components()),
        "gradient": {"q_cc": grad.d_cc, "q_cd": grad.d_cd,
                     "q_dc": grad.d_dc, "q_dd": grad.d_dd},
        "max_norm": grad.max_norm(),
        "discounted_fallback": fallback,
    }, args)
    return 0


def _cmd_zd_make(args, config) -> int:
    game = _game(args)
    params = ZDParams(float(args.kappa), float(args.chi), float(args.phi))
    p = zd_strategy(game, params)
    _emit({
        "game": _game_dict(game),
        "kappa": params.kappa, "chi": params.chi, "phi": params.phi,
        "phi_max": phi_max(game, params.kappa, params.chi),
        "p": list(p.components()),
    }, args)
    return 0


def _cmd_zd_check(args, config) -> int:
    game = _game(args)
    params = ZDParams(float(args.kappa), float(args.chi), float(args.phi))
    p = _strategy(args.p, "--p") if args.p else zd_strategy(game, params)
    seed = _seed(args, config)
    gen = _rng.stream(seed, 0)
    residuals = []
    for _ in range(args.n):
        q = MemoryOneStrategy.from_array(gen.uniform(0.01, 0.99, 4))
        residuals.append(zd_relation_residual(p, params, q, game))
    _emit({
        "game": _game_dict(game), "p": list(p.components()),
        "kappa": params.kappa, "chi": params.chi, "phi": params.phi,
        "n": args.n, "seed": seed,
        "max_residual": max(residuals), "mean_residual": float(np.mean(residuals)),
        "enforced": max(residuals) < 1e-9,
    }, args)
    return 0


def _cmd_equalizer_make(args, config) -> int:
    game = _game(args)
    p, value = equalizer_strategy(game, float(args.pcc), float(args.pdd))
    _emit({
        "game": _game_dict(game), "p_cc": float(args.pcc), "p_dd": float(args.pdd),
        "p": list(p.components()), "enforced_pi_y": value,
    }, args)
    return 0


def _cmd_equalizer_test(args, config) -> int:
    game = _game(args)
    if args.p is not None:
        p = _strategy(args.p, "--p")
        enforced = None
    elif args.pcc is not None and args.pdd is not None:
        p, enforced = equalizer_strategy(game, float(args.pcc), float(args.pdd))
    else:
        raise ValidationError("equalizer test needs --p or both --pcc and --pdd")
    seed = _seed(args, config)
    gen = _rng.stream(seed, 0)
    values = []
    for _ in range(args.n):
        q = MemoryOneStrategy.from_array(gen.uniform(0.01, 0.99, 4))
        values.append(average_payoffs(p, q, game).pi_y)
    payload = {
        "game": _game_dict(game), "p": list(p.components()),
        "n": args.n, "seed": seed,
        "pi_y_min": min(values), "pi_y_max": max(values),
        "spread": max(values) - min(values),
        "is_equalizer": is_equalizer(p, game, eps=args.eps, tol=args.tol),
        "e0_solution": equalizer_e0_solve(p, game),
    }
    if enforced is not None:
        payload["enforced_pi_y"] = enforced
        payload["max_deviation"] = max(abs(v - enforced) for v in values)
    _emit(payload, args)
    return 0


def _cmd_conditions(args, config) -> int:
    game = _game(args)
    p = _strategy(args.p, "--p") if args.p else None
    report = chen_zinger_conditions(game, p=p,
                                    chi=float(args.chi) if args.chi is not None else None)
    _emit({
        "game": _game_dict(game),
        "p": list(p.components()) if p else None,
        "classification": {"is_ipd": classify_game(game).is_ipd,
                           "regime": classify_game(game).regime.value},
        **asdict(report),
        "robust": report.robust,
    }, args)
    return 0


def _cmd_region(args, config) -> int:
    game = _game(args)
    p = _fixed_strategy(args, game)
    fr = feasible_region(p, game)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["q_cc", "q_cd", "q_dc", "q_dd", "states", "pi_y", "pi_x"])
            for c in fr.candidates:
                writer.writerow([*c.q, "|".join(map(str, c.states)),
                                 repr(c.payoff.pi_y), repr(c.payoff.pi_x)])
    _emit({
        "game": _game_dict(game), "p": list(p.components()),
        "hull": [[v.pi_y, v.pi_x] for v in fr.hull],
        "rightmost": [fr.rightmost.pi_y, fr.rightmost.pi_x],
        "rightmost_2dp": [round(fr.rightmost.pi_y, 2), round(fr.rightmost.pi_x, 2)],
        "degeneracy": fr.degeneracy,
        "classification": classify_fixed_strategy(p, game).value,
        "n_candidates": len(fr.candidates),
    }, args)
    return 0


def _run_learner(args, config, learner: str) -> int:
    game = _game(args)
    p = _fixed_strategy(args, game)
    q0 = _strategy(args.q0, "--q0")
    cfg = _learner_config(args)
    seed = _seed(args, config)
    if learner == "pga":
        trajectory = pga_run(p, q0, game, cfg)
    else:
        trajectory = lrs_run(p, q0, game, cfg, _rng.stream(seed, 0))
    if args.csv:
        _write_trajectory_csv(trajectory, args.csv)
    if args.svg:
        trajectory_svg(trajectory, args.svg, title=f"{learner} strategy trajectory")
    _emit(_trajectory_payload(trajectory, game, p, q0, cfg, seed=seed), args)
    return 3 if trajectory.termination is Termination.MAX_ITERATIONS else 0


def _census_outputs(census: CensusResult, args, extra: dict | None = None) -> None:
    prefix = getattr(args, "out_prefix", None)
    if prefix:
        write_runs_csv(census, f"{prefix}_runs.csv")
        write_clusters_csv(census, f"{prefix}_clusters.csv")
        write_census_json(census, f"{prefix}.json")
    if getattr(args, "svg", None):
        grid = heatmap_grid(census, bins=args.bins, game=census.game)
        heatmap_svg(grid, census.game, args.svg,
                    highlights=[c.key() for c in census.clusters],
                    title="final payoff distribution")
    payload = {
        **{k: v for k, v in census_report(census).items() if k != "runs"},
        "n_runs_reported": census.n_samples,
    }
    if extra:
        payload.update(extra)
    _emit(payload, args)


def _cmd_sweep_endpoints(args, config) -> int:
    game = _game(args)
    p = _fixed_strategy(args, game)
    cfg = _learner_config(args)
    census = endpoint_distribution(p, game, args.n, learner=args.learner,
                                   cfg=cfg, seed=_seed(args, config),
                                   workers=args.threads)
    _census_outputs(census, args)
    return 0


def _cmd_sweep_pczd(args, config) -> int:
    game = _game(args)
    chis = range(int(args.chi_min), int(args.chi_max) + 1)
    report = pczd_sweep(game, chis, phi_count=args.phi_count, n_q0=args.n_q0,
                        seed=_seed(args, config), cfg=_learner_config(args),
                        workers=args.threads)
    payload = {
        "game": _game_dict(game), "kappa": report.kappa,
        "chi_min": int(args.chi_min), "chi_max": int(args.chi_max),
        "phi_count": args.phi_count, "n_q0": args.n_q0, "seed": report.seed,
        "n_cells": len(report.cells),
        "feasible_cells": len(report.feasible_cells),
        "multi_endpoint_cells": len(report.multi_endpoint_cells),
        "mean_suboptimal_frequency": report.mean_suboptimal_frequency,
        "cells": [{
            "chi": c.chi, "phi": c.phi, "p": list(c.p) if c.p else None,
            "feasible": c.feasible, "n_clusters": c.n_clusters,
            "suboptimal_frequency": c.suboptimal_frequency,
            "global_payoff": list(c.global_payoff) if c.global_payoff else None,
            "clusters": [[cl.pi_y_2dp, cl.pi_x_2dp, cl.count] for cl in c.clusters],
        } for c in report.cells],
    }
    _emit(payload, args)
    return 0


def _cmd_sweep_noise(args, config) -> int:
    game = _game(args)
    p_set = []
    if args.from_pczd:
        with open(args.from_pczd) as fh:
            sweep = json.load(fh)
        p_set = [validate_strategy(c["p"]) for c in sweep["cells"]
                 if c["feasible"] and c["n_clusters"] > 1]
    for text in args.p or ():
        p_set.append(_strategy(text, "--p"))
    if not p_set:
        raise ValidationError("no fixed strategies: pass --p or --from-pczd")
    report = lrs_noise_sweep(p_set, game, n_q0=args.n_q0,
                             seed=_seed(args, config), cfg=_learner_config(args),
                             workers=args.threads)
    _emit({
        "game": _game_dict(game), "n_strategies": len(p_set), "n_q0": args.n_q0,
        "seed": report.seed,
        "eps_values": [float(e) for e in report.eps_values],
        "positive_fraction": report.positive_fraction,
        "negative_fraction": report.negative_fraction,
        "zero_fraction": report.zero_fraction,
        "strategies_with_3plus_decreases": report.strategies_with_decreases(3),
        "mean_payoffs": report.mean_payoffs.tolist(),
    }, args)
    return 0


def _cmd_sweep_tremble(args, config) -> int:
    games = [GameParams(*_parse_reals(g, 4, "--game")) for g in args.game]
    reports = trembling_sweep(games, n_p=args.n_p, n_q0=args.n_q0,
                              error_rate=args.error_rate,
                              seed=_seed(args, config), cfg=_learner_config(args),
                              workers=args.threads)
    _emit({
        "error_rate": args.error_rate, "n_p": args.n_p, "n_q0": args.n_q0,
        "seed": _seed(args, config),
        "games": [{
            "game": _game_dict(r.game),
            "all_converged_global": r.all_converged_global,
            "max_iteration_runs": r.total_max_iterations,
            "strategies": [{
                "p": list(s.p), "global_payoff": list(s.global_payoff),
                "baseline_global": list(s.baseline_global),
                "n_converged": s.n_converged, "n_at_global": s.n_at_global,
                "n_max_iterations": s.n_max_iterations,
            } for s in r.results],
        } for r in reports],
    }, args)
    return 0


# ---------------------------------------------------------------------------
# canned replications


def _replicate_census(args, config, game_t, p_source, default_n) -> int:
    game = GameParams(*game_t)
    if isinstance(p_source, tuple) and len(p_source) == 3:
        p = zd_strategy(game, ZDParams(*p_source))
    else:
        p = validate_strategy(p_source)
    n = 100_000 if args.full else (args.samples or default_n)
    census = endpoint_distribution(p, game, n, learner="pga",
                                   cfg=LearnerConfig(), seed=_seed(args, config),
                                   workers=args.threads)
    _census_outputs(census, args, extra={"replicates": args.figure})
    return 0


def _cmd_replicate(args, config) -> int:
    fig = args.figure
    seed = _seed(args, config)
    if fig == "fig1f":
        game = GameParams(2.0, -1.0, 7.0, 0.0) if args.game is None else _game(args)
        n = 1_000_000 if args.full else (args.samples or 20_000)
        pts = np.empty((n, 2))
        for i in range(n):
            p = MemoryOneStrategy.from_array(arcsine_sample(_rng.stream(seed, i), 4))
            best = feasible_region(p, game).rightmost
            pts[i] = (best.pi_y, best.pi_x)
        grid = heatmap_grid(pts, bins=args.bins, game=game)
        if args.svg:
            heatmap_svg(grid, game, args.svg, title="selfish-optimum distribution")
        _emit({"figure": fig, "game": _game_dict(game), "n": n, "seed": seed,
               "nonzero_bins": grid.nonzero_bins, "total": grid.total}, args)
        return 0
    if fig == "fig2":
        game = GameParams(*FIG2_GAME)
        p = zd_strategy(game, ZDParams(*FIG2_ZD))
        cfg = LearnerConfig(record_every=args.record_every or 10)
        results = {}
        for name, q0_t in FIG2_STARTS.items():
            trajectory = pga_run(p, validate_strategy(q0_t), game, cfg)
            if args.out_prefix:
                _write_trajectory_csv(trajectory, f"{args.out_prefix}_{name}.csv")
                trajectory_svg(trajectory, f"{args.out_prefix}_{name}.svg",
                               title=f"fair control, start {name}")
            results[name] = _trajectory_payload(trajectory, game, p,
                                                validate_strategy(q0_t), cfg)
        _emit({"figure": fig, "seed": seed, "runs": results}, args)
        return 0
    if fig == "fig3a":
        return _replicate_census(args, config, FIG2_GAME, FIG2_ZD, 10_000)
    if fig == "fig3b":
        return _replicate_census(args, config, FIG3B_GAME, FIG3B_ZD, 10_000)
    if fig == "fig4a":
        return _replicate_census(args, config, FIG4_GAME, FIG4A_P, 10_000)
    if fig == "fig4b":
        return _replicate_census(args, config, FIG4_GAME, FIG4B_P, 10_000)
    if fig == "fig5":
        game = GameParams(*FIG4_GAME)
        p = validate_strategy(FIG4A_P)
        q0 = validate_strategy(FIG5_START)
        cfg0 = LearnerConfig(record_every=args.record_every or 100)
        cfg1 = LearnerConfig(record_every=args.record_every or 100, error_rate=1e-3)
        base = pga_run(p, q0, game, cfg0)
        errs = pga_run(p, q0, game, cfg1)
        if args.out_prefix:
            _write_trajectory_csv(base, f"{args.out_prefix}_error_free.csv")
            _write_trajectory_csv(errs, f"{args.out_prefix}_trembling.csv")
            trajectory_svg(base, f"{args.out_prefix}_error_free.svg",
                           title="no implementation errors")
            trajectory_svg(errs, f"{args.out_prefix}_trembling.svg",
                           title="error rate 1e-3")
        _emit({"figure": fig, "seed": seed,
               "error_free": _trajectory_payload(base, game, p, q0, cfg0),
               "trembling": _trajectory_payload(errs, game, p, q0, cfg1)}, args)
        return 0
    raise ValidationError(f"unknown figure {fig!r}")


# ---------------------------------------------------------------------------
# parser


def _add_learner_flags(sp, lrs: bool = False):
    sp.add_argument("--eta", type=float, help="gradient step size")
    sp.add_argument("--tol", type=float, help="payoff convergence tolerance")
    sp.add_argument("--max-iter", dest="max_iter", type=int)
    sp.add_argument("--error-rate", dest="error_rate", type=float)
    sp.add_argument("--record-every", dest="record_every", type=int)
    if lrs:
        sp.add_argument("--radius", type=float, help="candidate box half-width")
        sp.add_argument("--patience", type=int)
        sp.add_argument("--discount", type=float)


def _add_fixed_strategy_flags(sp):
    sp.add_argument("--p", help="fixed strategy p_cc,p_cd,p_dc,p_dd")
    sp.add_argument("--zd", help="construct fixed strategy from kappa,chi,phi")
    sp.add_argument("--equalizer", help="construct fixed strategy from p_cc,p_dd")


# SUPPRESS keeps a leaf subparser from clobbering values the top-level parser
# already consumed (the flags work both before and after the subcommand)
_COMMON = argparse.ArgumentParser(add_help=False)
_COMMON.add_argument("--config", default=argparse.SUPPRESS,
                     help="config file (key per line, [command] sections); "
                     "flags override it")
_COMMON.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                     help="master seed (default: $PAYOFFLAB_SEED, else 0)")


def build_parser() -> _Parser:
    parser = _Parser(prog="payofflab", description=__doc__, parents=[_COMMON])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("payoff", help="long-run payoff pair", parents=[_COMMON])
    sp.add_argument("--game"); sp.add_argument("--p", required=True)
    sp.add_argument("--q", required=True)
    sp.add_argument("--nu0", help="initial distribution over CC,CD,DC,DD")
    sp.add_argument("--lam", type=float, help="evaluate at this discount factor")
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_payoff)

    sp = sub.add_parser("gradient", help="payoff gradient of the adapting player", parents=[_COMMON])
    sp.add_argument("--game"); sp.add_argument("--p", required=True)
    sp.add_argument("--q", required=True); sp.add_argument("--out")
    sp.set_defaults(func=_cmd_gradient)

    zd = sub.add_parser("zd", help="linear payoff-relation strategies").add_subparsers(
        dest="zd_command", required=True)
    sp = zd.add_parser("make", parents=[_COMMON])
    sp.add_argument("--game"); sp.add_argument("--kappa", required=True, type=float)
    sp.add_argument("--chi", required=True, type=float)
    sp.add_argument("--phi", required=True, type=float); sp.add_argument("--out")
    sp.set_defaults(func=_cmd_zd_make)
    sp = zd.add_parser("check", parents=[_COMMON])
    sp.add_argument("--game"); sp.add_argument("--kappa", required=True, type=float)
    sp.add_argument("--chi", required=True, type=float)
    sp.add_argument("--phi", required=True, type=float)
    sp.add_argument("--p", help="check this strategy instead of constructing one")
    sp.add_argument("--n", type=int, default=100); sp.add_argument("--out")
    sp.set_defaults(func=_cmd_zd_check)

    eq = sub.add_parser("equalizer", help="fix the co-player's payoff").add_subparsers(
        dest="equalizer_command", required=True)
    sp = eq.add_parser("make", parents=[_COMMON])
    sp.add_argument("--game"); sp.add_argument("--pcc", required=True, type=float)
    sp.add_argument("--pdd", required=True, type=float); sp.add_argument("--out")
    sp.set_defaults(func=_cmd_equalizer_make)
    sp = eq.add_parser("test", parents=[_COMMON])
    sp.add_argument("--game"); sp.add_argument("--p")
    sp.add_argument("--pcc", type=float); sp.add_argument("--pdd", type=float)
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--eps", type=float, default=0.01)
    sp.add_argument("--tol", type=float, default=1e-9); sp.add_argument("--out")
    sp.set_defaults(func=_cmd_equalizer_test)

    sp = sub.add_parser("conditions", help="robustness-coverage conditions", parents=[_COMMON])
    sp.add_argument("--game"); sp.add_argument("--p")
    sp.add_argument("--chi", type=float); sp.add_argument("--out")
    sp.set_defaults(func=_cmd_conditions)

    sp = sub.add_parser("region", help="feasible payoff region for fixed p", parents=[_COMMON])
    sp.add_argument("--game"); _add_fixed_strategy_flags(sp)
    sp.add_argument("--csv", help="write candidate payoff points")
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_region)

    for learner in ("pga", "lrs"):
        sp = sub.add_parser(learner, help=f"single {learner} run", parents=[_COMMON])
        sp.add_argument("--game"); _add_fixed_strategy_flags(sp)
        sp.add_argument("--q0", required=True)
        _add_learner_flags(sp, lrs=learner == "lrs")
        sp.add_argument("--csv", help="trajectory CSV path")
        sp.add_argument("--svg", help="trajectory SVG path")
        sp.add_argument("--out")
        sp.set_defaults(func=lambda a, c, _l=learner: _run_learner(a, c, _l))

    sweep = sub.add_parser("sweep", help="batch studies").add_subparsers(
        dest="sweep_command", required=True)
    sp = sweep.add_parser("endpoints", parents=[_COMMON])
    sp.add_argument("--game"); _add_fixed_strategy_flags(sp)
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--learner", choices=("pga", "lrs"), default="pga")
    _add_learner_flags(sp, lrs=True)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--out-prefix", dest="out_prefix")
    sp.add_argument("--svg"); sp.add_argument("--bins", type=int, default=100)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_sweep_endpoints)
    sp = sweep.add_parser("pczd", parents=[_COMMON])
    sp.add_argument("--game")
    sp.add_argument("--chi-min", dest="chi_min", type=int, default=1)
    sp.add_argument("--chi-max", dest="chi_max", type=int, default=20)
    sp.add_argument("--phi-count", dest="phi_count", type=int, default=5)
    sp.add_argument("--n-q0", dest="n_q0", type=int, default=100)
    _add_learner_flags(sp)
    sp.add_argument("--threads", type=int); sp.add_argument("--out")
    sp.set_defaults(func=_cmd_sweep_pczd)
    sp = sweep.add_parser("noise", parents=[_COMMON])
    sp.add_argument("--game")
    sp.add_argument("--p", action="append", help="fixed strategy (repeatable)")
    sp.add_argument("--from-pczd", dest="from_pczd",
                    help="pull multi-endpoint strategies from a pczd sweep JSON")
    sp.add_argument("--n-q0", dest="n_q0", type=int, default=200)
    _add_learner_flags(sp, lrs=True)
    sp.add_argument("--threads", type=int); sp.add_argument("--out")
    sp.set_defaults(func=_cmd_sweep_noise)
    sp = sweep.add_parser("tremble", parents=[_COMMON])
    sp.add_argument("--game", action="append", required=True,
                    help="game R,S,T,P (repeatable)")
    sp.add_argument("--n-p", dest="n_p", type=int, default=50)
    sp.add_argument("--n-q0", dest="n_q0", type=int, default=50)
    sp.add_argument("--error-rate", dest="error_rate", type=float, default=1e-3)
    sp.add_argument("--eta", type=float); sp.add_argument("--tol", type=float)
    sp.add_argument("--max-iter", dest="max_iter", type=int)
    sp.add_argument("--record-every", dest="record_every", type=int)
    sp.add_argument("--threads", type=int); sp.add_argument("--out")
    sp.set_defaults(func=_cmd_sweep_tremble)

    sp = sub.add_parser("replicate", help="canned studies with the published parameters", parents=[_COMMON])
    sp.add_argument("figure", choices=("fig1f", "fig2", "fig3a", "fig3b",
                                       "fig4a", "fig4b", "fig5"))
    sp.add_argument("--game")
    sp.add_argument("--samples", type=int)
    sp.add_argument("--full", action="store_true",
                    help="run at the published sample counts")
    sp.add_argument("--record-every", dest="record_every", type=int)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--out-prefix", dest="out_prefix")
    sp.add_argument("--svg"); sp.add_argument("--bins", type=int, default=100)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_replicate)
    return parser


def _coerce(text: str):
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def _load_config(path) -> dict:
    """Key-per-line config with optional [subcommand] sections."""
    parser = configparser.ConfigParser(default_section="global")
    with open(path) as fh:
        # keys before the first section header count as global
        parser.read_string("[global]\n" + fh.read())
    config: dict = {k: _coerce(v) for k, v in parser.defaults().items()}
    for section in parser.sections():
        config[section] = {k: _coerce(v) for k, v in parser[section].items()}
    return config


def _apply_config(args, config: dict) -> None:
    """Fill in unset flags from the config file (flags always win)."""
    section = config.get(args.command, {}) if args.command else {}
    merged = {**{k: v for k, v in config.items() if not isinstance(v, dict)},
              **(section if isinstance(section, dict) else {})}
    for key, value in merged.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) in (None, False):
            setattr(args, attr, value)


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config_path = getattr(args, "config", None)
        config = _load_config(config_path) if config_path else {}
        _apply_config(args, config)
        return args.func(args, config)
    except _UsageError:
        return 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 3
    except (DegenerateChainError, PayoffLabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
