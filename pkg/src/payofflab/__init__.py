"""Long-run payoffs of memory-one strategies in iterated 2x2 games,
payoff-control (zero-determinant, equalizer) construction and verification,
and selfish-learning experiments (projected gradient ascent, local random
search, trembling-hand errors)."""

from .errors import (ConvergenceError, DegenerateChainError, InfeasibleError,
                     PayoffLabError, ValidationError)
from .games import (GameClass, GameParams, MemoryOneStrategy, PayoffPair,
                    Regime, arcsine_sample, classify_game,
                    sample_arcsine_strategy, validate_strategy)
from .markov import (ClosedClass, StationarySet, average_payoffs, cesaro_limit,
                     discounted_payoffs, initial_distribution, stationary_set,
                     transition_matrix)
from .payoff import (MultilinearComponents, PayoffGradient,
                     discounted_fallback_gradient, multilinear_components,
                     payoff_gradient, press_dyson_payoff)
from .zd import (ConditionReport, ZDParams, boundary_payoff_matrix,
                 chen_zinger_conditions, equalizer_e0_solve,
                 equalizer_enforced_value, equalizer_strategy,
                 gradient_coeff_matrix, is_equalizer, phi_max,
                 zd_relation_residual, zd_strategy)
from .region import (FeasibleRegion, StrategyNature, classify_fixed_strategy,
                     feasible_region, full_payoff_hull)
from .learn import (EndpointForm, EndpointKind, LearnerConfig, Termination,
                    Trajectory, classify_endpoint, effective_strategy,
                    lrs_batch, lrs_run, pga_batch, pga_run,
                    project_to_hypercube)
from .experiments import (CensusResult, EndpointCluster, HeatmapGrid,
                          NoiseReport, SweepReport, endpoint_distribution,
                          heatmap_grid, lrs_noise_sweep, pczd_sweep,
                          trembling_sweep)

__version__ = "0.1.0"
