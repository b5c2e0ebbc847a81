from .base import Engine, validate_engine
from .classic import DEEngine, LSHADEEngine, SHADEEngine, lpsr_next_size, run_de, run_lshade, run_shade
from .unbounded import UnboundedEngine, run_ude, run_ude_df, run_ushade, run_ushade_df

RUNNERS = {
    "DE": run_de,
    "SHADE": run_shade,
    "LSHADE": run_lshade,
    "UDE": run_ude,
    "UDE/DF": run_ude_df,
    "USHADE": run_ushade,
    "USHADE/DF": run_ushade_df,
}


def run_engine(config, objective, seed, **kwargs):
    """Dispatch on config.engine."""
    return RUNNERS[config.engine](config, objective, seed, **kwargs)


__all__ = [
    "Engine",
    "DEEngine",
    "SHADEEngine",
    "LSHADEEngine",
    "UnboundedEngine",
    "RUNNERS",
    "lpsr_next_size",
    "run_de",
    "run_engine",
    "run_lshade",
    "run_shade",
    "run_ude",
    "run_ude_df",
    "run_ushade",
    "run_ushade_df",
    "validate_engine",
]
