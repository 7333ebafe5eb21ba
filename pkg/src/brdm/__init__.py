"""Bounded-rational decision-making with anytime chains and adaptive priors."""

from .agents import (
    BudgetSplit,
    DecisionSystem,
    EpisodeRecord,
    MultinomialPrior,
    SystemConfig,
    efficiency_point,
    empirical_expected_utility,
    empirical_mutual_information,
    train_system,
)
from .baseline import (
    DiscretePolicy,
    FrontierPoint,
    TwoStageSolution,
    expected_utility,
    free_energy,
    mutual_information,
    rate_distortion_curve,
    solve_single_stage,
    solve_two_stage,
    two_stage_residuals,
)
from .core import (
    GaussianTaskSpec,
    WorldModel,
    clamp01,
    make_gaussian_task,
    make_rng,
    spawn_rng,
)
from .mcmc import (
    ChainConfig,
    ChainResult,
    SelectionConfig,
    anneal_gamma,
    mh_accept_prob,
    propose,
    run_action_chain,
    run_selection_chain,
)
from .vae import (
    ElboReport,
    VaeArch,
    VaePrior,
    decode,
    elbo,
    encode,
    init_vae,
    kl_to_standard_normal,
    sample_action,
    train_step,
)

__version__ = "0.1.0"
