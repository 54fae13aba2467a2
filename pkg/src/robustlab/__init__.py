"""Robust mean estimation laboratory: a perturbed quantile-spread estimator,
its capped-weight spectral core, contamination models and exact oracles."""

from .contamination import (
    AttackSpec,
    CleanSampleSpec,
    CorruptedSample,
    TailLadder,
    check_tail_decay,
    check_truncated_lemmas,
    corrupt,
    sample_clean,
    tail_ladder,
    truncate,
)
from .core import (
    Dataset,
    NumericError,
    RngStream,
    UsageError,
    top_eigenpair,
    weighted_mean,
    weighted_second_moment,
)
from .harness import (
    ExperimentConfig,
    SeparationConfig,
    TrialRecord,
    empirical_mean,
    median_of_means,
    run_experiment,
    separation_demo,
    trimmed_mean,
)
from .kernels import BACKEND
from .search import DirectionSearchConfig
from .spread_estimator import (
    SubGaussianEstimate,
    TailWeightProfile,
    comparison,
    max_spread_direction,
    quantile_weights,
    spread,
    subg_estimate,
    subg_estimate_pair,
)
from .stability import (
    RobSdpSolution,
    RoundingOutcome,
    StabilityCertificate,
    check_stability,
    extract_stable_set,
    gaussian_round,
    rob_sdp_value_bruteforce,
    solve_rob_sdp,
    vectorized_objective,
)
from .theorycheck import (
    CubeSet,
    binomial_anticoncentration_check,
    hamming_blowup_exact,
    high_prob_from_robust,
)
from .weights import (
    CappedWeights,
    min_linear_over_capped_simplex,
    mean_proximity_bound_check,
    tv_distance,
    uniform_weights,
)

__version__ = "0.1.0"
