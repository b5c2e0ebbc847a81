"""
Selection policies over a PopulationStore.

Every selector returns a slot (store position) rather than a copy of the
individual; engines read genomes straight from the store arrays.
"""

from fractions import Fraction
from math import comb
from typing import Iterable, Optional, Set, Tuple, Union

import numpy as np

from .core import PopulationStore, RngStream, round_half_up
from .errors import ContractViolation

ROLES = ("parent", "r1", "r2", "r3")


def _valid_exclusions(exclude: Optional[Iterable[int]], size: int) -> list:
    if not exclude:
        return []
    return sorted({int(e) for e in exclude if 0 <= e < size})


def select_uniform(store: PopulationStore, rng: RngStream, exclude: Optional[Iterable[int]] = None) -> int:
    """Uniform slot outside `exclude`, by rejection resampling."""
    size = len(store)
    excluded = set(_valid_exclusions(exclude, size))
    if size <= len(excluded):
        raise ContractViolation(f"Cannot select from {size} individuals with {len(excluded)} excluded")
    while True:
        slot = rng.integers(0, size)
        if slot not in excluded:
            return slot


def pbest_pool_size(size: int, p: float) -> int:
    return min(size, max(2, round_half_up(p * size)))


def select_pbest(store: PopulationStore, p: float, rng: RngStream) -> int:
    """Uniform over the best max(2, round(p·|P|)) individuals."""
    if len(store) < 2:
        raise ContractViolation("pbest selection needs at least two individuals")
    rank = rng.integers(0, pbest_pool_size(len(store), p)) + 1
    return store.slot_at_rank(rank)


def tournament_probability(i: int, n: int, N: int, exact: bool = False) -> Union[float, Fraction]:
    """Probability that rank i wins a size-n tournament drawn without replacement from N."""
    if not (1 <= i <= N and 1 <= n <= N):
        raise ContractViolation(f"Invalid tournament arguments i={i}, n={n}, N={N}")
    value = Fraction(comb(N - i, n - 1), comb(N, n))
    return value if exact else float(value)


def tournament_size(population_size: int, T: float) -> int:
    return min(population_size, max(1, round_half_up(population_size / T)))


def _sample_skipping(rng: RngStream, size: int, k: int, excluded: list) -> np.ndarray:
    picks = rng.sample_without_replacement(size - len(excluded), k)
    for e in excluded:
        picks = picks + (picks >= e)
    return picks


def select_T(store: PopulationStore, T: float, rng: RngStream, exclude: Optional[Iterable[int]] = None) -> int:
    """
    Tournament of n = max(1, round(|P|/T)) candidates sampled without
    replacement from the store minus `exclude`; n is clamped to the support.
    """
    size = len(store)
    excluded = _valid_exclusions(exclude, size)
    support = size - len(excluded)
    if support <= 0:
        raise ContractViolation(f"Tournament support is empty ({size} individuals, all excluded)")
    n = min(tournament_size(size, T), support)
    return store.best_of(_sample_skipping(rng, size, n, excluded))


def select_DPT(
    store: PopulationStore,
    gensize: int,
    offspring_slot: int,
    role: str,
    T: float,
    rng: RngStream,
    already_chosen_j: Optional[Set[int]] = None,
    exclude: Optional[Iterable[int]] = None,
) -> Tuple[int, Optional[int]]:
    """
    Diversity-preserving tournament inside the residue class
    S_j = {x : insertion_index mod gensize == j}.

    The parent uses j = offspring_slot; other roles draw j uniformly among the
    classes not yet used for this offspring. When every class is taken
    (gensize smaller than the number of roles) the draw falls back to a plain
    tournament over the store minus `exclude`, and j is None.
    """
    if role not in ROLES:
        raise ContractViolation(f"Unknown DPT role {role!r}")
    chosen = already_chosen_j or set()
    if role == "parent":
        j = offspring_slot % gensize
    elif len(chosen) >= gensize:
        return select_T(store, T, rng, exclude), None
    else:
        while True:
            j = rng.integers(0, gensize)
            if j not in chosen:
                break
    members = store.slots_with_residue(j, gensize)
    if len(members) == 0:
        raise ContractViolation(f"DPT subset {j} is empty; |P^1| must be at least gensize")
    n = min(len(members), tournament_size(len(store), T))
    candidates = members[rng.sample_without_replacement(len(members), n)]
    return store.best_of(candidates), j
