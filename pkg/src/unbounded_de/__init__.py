from .adaptation import SuccessHistory, SuccessSets, lehmer_mean, sample_C, sample_F, sample_T, update_history
from .analysis import (
    TrialMatrix,
    bsf_at,
    compare_at,
    ecdf_curve,
    ecdf_targets,
    failed_parent_fraction,
    smooth_T_trace,
    wilcoxon_rank_sum,
    win_tie_loss,
)
from .core import Archive, Individual, PopulationStore, RngStream, RunRecord, StoreMode, rank_of, record_improvement
from .engines import (
    lpsr_next_size,
    run_de,
    run_engine,
    run_lshade,
    run_shade,
    run_ude,
    run_ude_df,
    run_ushade,
    run_ushade_df,
)
from .errors import BudgetExhausted, ConfigError, ContractViolation, ResultMismatch, UnknownIndividual
from .harness import failed_individual_suite, load_results, robustness_suite, run_experiment
from .models import (
    AdaptationConfig,
    DEConfig,
    ExperimentPlan,
    LSHADEConfig,
    ObjectiveSpec,
    SelectionConfig,
    SHADEConfig,
    UnboundedConfig,
)
from .objectives import Objective, clamp_population_init, evaluate
from .selection import select_DPT, select_pbest, select_T, select_uniform, tournament_probability
from .settings import load_plan
from .variation import binomial_crossover, current_to_pbest, rand1, repair_bounds

__all__ = [
    "AdaptationConfig",
    "Archive",
    "BudgetExhausted",
    "ConfigError",
    "ContractViolation",
    "DEConfig",
    "ExperimentPlan",
    "Individual",
    "LSHADEConfig",
    "Objective",
    "ObjectiveSpec",
    "PopulationStore",
    "ResultMismatch",
    "RngStream",
    "RunRecord",
    "SHADEConfig",
    "SelectionConfig",
    "StoreMode",
    "SuccessHistory",
    "SuccessSets",
    "TrialMatrix",
    "UnboundedConfig",
    "UnknownIndividual",
    "binomial_crossover",
    "bsf_at",
    "clamp_population_init",
    "compare_at",
    "current_to_pbest",
    "ecdf_curve",
    "ecdf_targets",
    "evaluate",
    "failed_individual_suite",
    "failed_parent_fraction",
    "lehmer_mean",
    "load_plan",
    "load_results",
    "lpsr_next_size",
    "rand1",
    "rank_of",
    "record_improvement",
    "repair_bounds",
    "robustness_suite",
    "run_de",
    "run_engine",
    "run_experiment",
    "run_lshade",
    "run_shade",
    "run_ude",
    "run_ude_df",
    "run_ushade",
    "run_ushade_df",
    "sample_C",
    "sample_F",
    "sample_T",
    "select_DPT",
    "select_T",
    "select_pbest",
    "select_uniform",
    "smooth_T_trace",
    "tournament_probability",
    "update_history",
    "wilcoxon_rank_sum",
    "win_tie_loss",
]
