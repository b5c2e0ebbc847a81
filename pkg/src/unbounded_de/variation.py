"""Mutation, binomial crossover and midpoint bound repair."""

import numpy as np

from .core import RngStream
from .errors import ContractViolation


def _same_length(*genomes: np.ndarray) -> None:
    lengths = {len(g) for g in genomes}
    if len(lengths) != 1:
        raise ContractViolation(f"Genome lengths differ: {sorted(lengths)}")


def rand1(x_r1: np.ndarray, x_r2: np.ndarray, x_r3: np.ndarray, F: float) -> np.ndarray:
    _same_length(x_r1, x_r2, x_r3)
    return x_r1 + F * (x_r2 - x_r3)


def current_to_pbest(
    x_p: np.ndarray, x_pbest: np.ndarray, x_r1: np.ndarray, x_r2: np.ndarray, F: float
) -> np.ndarray:
    _same_length(x_p, x_pbest, x_r1, x_r2)
    return x_p + F * (x_pbest - x_p) + F * (x_r1 - x_r2)


def binomial_crossover(parent: np.ndarray, mutant: np.ndarray, C: float, rng: RngStream) -> np.ndarray:
    """
    Take each coordinate from the mutant with probability C, and always at j_rand.

    j_rand is drawn before the D per-dimension uniforms, in that order.
    """
    _same_length(parent, mutant)
    j_rand = rng.integers(0, len(parent))
    take = rng.uniform(len(parent)) <= C
    take[j_rand] = True
    return np.where(take, mutant, parent)


def repair_bounds(offspring: np.ndarray, parent: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """
    Move every violated coordinate halfway between the parent and the violated
    bound. A parent lying on the bound gets the nearest float inside instead.
    """
    below = np.maximum((parent + lower) / 2.0, np.nextafter(lower, upper))
    above = np.minimum((parent + upper) / 2.0, np.nextafter(upper, lower))
    repaired = np.where(offspring < lower, below, offspring)
    return np.where(offspring > upper, above, repaired)
