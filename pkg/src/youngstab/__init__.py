"""Numerical toolkit for controlled differential equations in the Young
regime: p-variation analysis, Young integration, a priori solution bounds,
the explicit stability criterion and random-attractor experiments."""

from .bounds import (
    BoundReport,
    IntervalFunctionals,
    StabilityConstants,
    apriori_bounds,
    derive_constants,
    deterministic_comparison,
    discrete_gronwall,
    interval_functionals,
    two_solution_bounds,
    ytest_chain_bound,
)
from .fields import DiffusionField, DriftField
from .noise import (
    FbmSpec,
    GammaEstimate,
    estimate_gamma,
    fbm_ensemble,
    sample_fbm,
    temperedness_diagnostic,
)
from .paths import (
    GreedyPartition,
    SamplePath,
    greedy_times,
    holder_norm,
    p_variation,
    p_variation_norm,
    read_csv,
    wiener_shift,
    write_csv,
)
from .pendulum import ExperimentReport, PendulumParams, build_pendulum, run_scenario
from .solver import (
    SemigroupConstants,
    YdeSystem,
    semigroup_constants,
    solve_yde,
    variation_of_constants_residual,
)
from .stability import (
    AttractorEstimate,
    CriterionReport,
    attractor_continuity_sweep,
    check_criterion,
    commuting_linear_oracle,
    dissipation_check,
    forward_experiment,
    pullback_experiment,
    singleton_rate_estimate,
    tail_functionals,
)
from .young import YoungIntegralResult, young_integral, young_loeve_defect

__version__ = "0.1.0"
