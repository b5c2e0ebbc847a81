"""
Fixed-population engines with generational replacement: DE, SHADE and LSHADE.
"""

import logging
from typing import List, Tuple

import numpy as np

from ..adaptation import SuccessHistory, SuccessSets, sample_C, sample_F, update_history
from ..core import Archive, RunRecord, StoreMode, round_half_up
from ..models import DEConfig, LSHADEConfig, MutationStrategy, SHADEConfig
from ..selection import select_pbest, select_uniform
from ..variation import current_to_pbest, rand1
from .base import Engine

logger = logging.getLogger(__name__)


def lpsr_next_size(P1: int, consumed_evals: int, target_budget: int, min_size: int = 4) -> int:
    """Linear population size reduction from P1 down to min_size at target_budget."""
    consumed = min(max(consumed_evals, 0), target_budget)
    return round_half_up((P1 - min_size) * (1.0 - consumed / target_budget)) + min_size


class DEEngine(Engine):
    mode = StoreMode.SLOT
    engine_names = ("DE",)

    def sample_parameters(self) -> Tuple[float, float]:
        return self.config.F, self.config.C

    def mutant(self, i: int, F: float) -> np.ndarray:
        genome = self.store.genome_at
        if self.config.mutation is MutationStrategy.RAND1:
            r1 = select_uniform(self.store, self.rng, {i})
            r2 = select_uniform(self.store, self.rng, {i, r1})
            r3 = select_uniform(self.store, self.rng, {i, r1, r2})
            return rand1(genome(r1), genome(r2), genome(r3), F)
        pbest = select_pbest(self.store, self.config.p, self.rng)
        r1 = select_uniform(self.store, self.rng, {i})
        return current_to_pbest(genome(i), genome(pbest), genome(r1), self.second_donor(i, r1), F)

    def second_donor(self, i: int, r1: int) -> np.ndarray:
        return self.store.genome_at(select_uniform(self.store, self.rng, {i, r1}))

    def on_success(self, F: float, C: float, delta_f: float) -> None:
        pass

    def on_replace(self, displaced) -> None:
        pass

    def end_generation(self) -> None:
        pass

    def step(self) -> None:
        count = min(len(self.store), self.objective.remaining)
        trials: List[tuple] = []
        for i in range(count):
            F, C = self.sample_parameters()
            trials.append((i, self.offspring(i, self.mutant(i, F), C), F, C))

        fitness = [self.evaluate(child, parent_successful=bool(self.store.successful[i])) for i, child, _, _ in trials]

        for (i, child, F, C), value in zip(trials, fitness):
            parent_fitness = float(self.store.fitness[i])
            if value <= parent_fitness:
                self.on_success(F, C, parent_fitness - value)
                parent_index = int(self.store.insertion_indices[i])
                self.on_replace(self.store.replace(i, child, value, parent_index=parent_index, successful=True))
        self.end_generation()


class SHADEEngine(DEEngine):
    """DE plus success-history F/C sampling and an archive of replaced parents."""

    engine_names = ("SHADE",)

    def __init__(self, config: SHADEConfig, objective, seed, **kwargs):
        super().__init__(config, objective, seed, **kwargs)
        self.history = SuccessHistory(config.history_length(self.dimension), config.adaptation)
        self.sets = SuccessSets()
        self.archive = Archive(self.archive_capacity(self.initial_size))

    def archive_capacity(self, population_size: int) -> int:
        return round_half_up(self.config.archive_rate * population_size)

    def sample_parameters(self) -> Tuple[float, float]:
        r = self.history.draw_slot(self.params_rng)
        return sample_F(self.history, self.params_rng, r), sample_C(self.history, self.params_rng, r)

    def mutant(self, i: int, F: float) -> np.ndarray:
        genome = self.store.genome_at
        pbest = select_pbest(self.store, self.config.p, self.rng)
        r1 = select_uniform(self.store, self.rng, {i})
        return current_to_pbest(genome(i), genome(pbest), genome(r1), self.second_donor(i, r1), F)

    def second_donor(self, i: int, r1: int) -> np.ndarray:
        """Uniform over P ∪ A, never the parent or r1."""
        size = len(self.store)
        while True:
            k = self.rng.integers(0, size + len(self.archive))
            if k >= size:
                return self.archive.genome(k - size)
            if k != i and k != r1:
                return self.store.genome_at(k)

    def on_success(self, F: float, C: float, delta_f: float) -> None:
        self.sets.add(F, C, delta_f)

    def on_replace(self, displaced) -> None:
        self.archive.add(displaced, self.rng)

    def end_generation(self) -> None:
        update_history(self.history, self.sets)
        self.sets.clear()


class LSHADEEngine(SHADEEngine):
    """SHADE with linear population size reduction and an archive that tracks |P^t|."""

    engine_names = ("LSHADE",)

    def __init__(self, config: LSHADEConfig, objective, seed, **kwargs):
        super().__init__(config, objective, seed, **kwargs)
        self.target_budget = config.lpsr_target(self.objective.budget)
        self.size_trace: List[Tuple[int, int]] = []

    def initialize(self) -> None:
        super().initialize()
        self.size_trace.append((self.objective.evaluations, len(self.store)))

    def end_generation(self) -> None:
        super().end_generation()
        target = lpsr_next_size(
            self.initial_size, self.objective.evaluations, self.target_budget, self.config.min_size
        )
        if target < len(self.store):
            self.store.remove_worst(len(self.store) - target)
            self.archive.resize(self.archive_capacity(len(self.store)), self.rng)
        self.size_trace.append((self.objective.evaluations, len(self.store)))


def run_de(config: DEConfig, objective, seed: int, **kwargs) -> RunRecord:
    return DEEngine(config, objective, seed, **kwargs).run()


def run_shade(config: SHADEConfig, objective, seed: int, **kwargs) -> RunRecord:
    return SHADEEngine(config, objective, seed, **kwargs).run()


def run_lshade(config: LSHADEConfig, objective, seed: int, **kwargs) -> RunRecord:
    return LSHADEEngine(config, objective, seed, **kwargs).run()
