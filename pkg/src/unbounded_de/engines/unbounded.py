"""
Unbounded-population engines: UDE, UDE/DF, USHADE and USHADE/DF.

Offspring are appended to a grow-only store instead of replacing their
parents; selection pressure comes from tournaments over the whole history.
The /DF variants admit only offspring that are no worse than their parent.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from ..adaptation import SuccessHistory, SuccessSets, sample_C, sample_F, sample_T, update_history
from ..core import RunRecord, StoreMode, round_half_up
from ..errors import ConfigError
from ..models import MutationStrategy, SelectionPolicy, TMode, UnboundedConfig
from ..selection import select_DPT, select_pbest, select_T, select_uniform
from ..variation import current_to_pbest, rand1
from .base import Engine

logger = logging.getLogger(__name__)


class UnboundedEngine(Engine):
    mode = StoreMode.APPEND
    engine_names = ("UDE", "UDE/DF", "USHADE", "USHADE/DF")

    def __init__(self, config: UnboundedConfig, objective, seed, **kwargs):
        super().__init__(config, objective, seed, **kwargs)
        self.roles = ("parent", "r1", "r2")
        if config.mutation is not MutationStrategy.CURRENT_TO_PBEST:
            self.roles += ("r3",)
        self.history: Optional[SuccessHistory] = None
        self.sets = SuccessSets()
        if config.adaptive:
            self.history = SuccessHistory(
                config.history_length(self.dimension), config.adaptation, initial_T=self.initial_size
            )
            self.record.T_trace = []
        self.generation_sizes: List[int] = []
        self._T_window: List[float] = []

    def _store_capacity(self) -> int:
        return max(self.initial_size, 1024)

    def trace_T(self, T: float) -> None:
        """Log the mean T of each checkpoint window, closing the last window at the budget."""
        self._T_window.append(T)
        count = self.objective.evaluations
        if count % self.stride == 0 or self.objective.remaining == 0:
            self.record.T_trace.append((count, float(np.mean(self._T_window))))
            self._T_window.clear()

    def fixed_T(self) -> float:
        if self.config.selection.T_mode is TMode.GROWTH_RATIO:
            return max(1, round_half_up(len(self.store) / self.initial_size))
        return float(self.initial_size)

    def sample_parameters(self, T_fixed: float) -> Tuple[float, float, float]:
        if self.history is None:
            return self.config.F, self.config.C, T_fixed
        r = self.history.draw_slot(self.params_rng)
        return (
            sample_F(self.history, self.params_rng, r),
            sample_C(self.history, self.params_rng, r),
            sample_T(self.history, self.params_rng, r),
        )

    def choose(self, i: int, T: float) -> List[int]:
        """Slots for parent, r1, r2 (and r3), pairwise distinct."""
        policy = self.config.selection.policy
        chosen: List[int] = []
        used_j = set()
        for role in self.roles:
            if policy is SelectionPolicy.DPT:
                slot, j = select_DPT(
                    self.store, self.config.gensize, i, role, T, self.rng, used_j, exclude=chosen
                )
                if j is not None:
                    used_j.add(j)
            elif policy is SelectionPolicy.T:
                slot = select_T(self.store, T, self.rng, exclude=chosen)
            else:
                slot = select_uniform(self.store, self.rng, exclude=chosen)
            chosen.append(slot)
        return chosen

    def build(self, i: int, T_fixed: float) -> tuple:
        F, C, T = self.sample_parameters(T_fixed)
        slots = self.choose(i, T)
        genome = self.store.genome_at
        if self.config.mutation is MutationStrategy.RAND1:
            mutant = rand1(genome(slots[1]), genome(slots[2]), genome(slots[3]), F)
        else:
            pbest = select_pbest(self.store, self.config.p, self.rng)
            mutant = current_to_pbest(genome(slots[0]), genome(pbest), genome(slots[1]), genome(slots[2]), F)
        return slots[0], self.offspring(slots[0], mutant, C), F, C, T

    def step(self) -> None:
        count = min(self.config.gensize, self.objective.remaining)
        T_fixed = self.fixed_T()
        batch = [self.build(i, T_fixed) for i in range(count)]

        admitted = 0
        for parent, child, F, C, T in batch:
            value = self.evaluate(child, parent_successful=bool(self.store.successful[parent]))
            if self.record.T_trace is not None:
                self.trace_T(T)
            parent_fitness = float(self.store.fitness[parent])
            success = value <= parent_fitness
            if success:
                self.sets.add(F, C, parent_fitness - value, T)
            if success or not self.config.discard_failed:
                self.store.add(
                    child,
                    value,
                    parent_index=int(self.store.insertion_indices[parent]),
                    successful=success,
                )
                admitted += 1
        self.generation_sizes.append(admitted)

        if self.history is not None:
            update_history(self.history, self.sets)
        self.sets.clear()


def _run(config: UnboundedConfig, objective, seed: int, engines: tuple, **kwargs) -> RunRecord:
    if config.engine not in engines:
        raise ConfigError(f"Expected engine in {engines}, got {config.engine!r}")
    return UnboundedEngine(config, objective, seed, **kwargs).run()


def run_ude(config: UnboundedConfig, objective, seed: int, **kwargs) -> RunRecord:
    return _run(config, objective, seed, ("UDE",), **kwargs)


def run_ude_df(config: UnboundedConfig, objective, seed: int, **kwargs) -> RunRecord:
    return _run(config, objective, seed, ("UDE/DF",), **kwargs)


def run_ushade(config: UnboundedConfig, objective, seed: int, **kwargs) -> RunRecord:
    return _run(config, objective, seed, ("USHADE",), **kwargs)


def run_ushade_df(config: UnboundedConfig, objective, seed: int, **kwargs) -> RunRecord:
    return _run(config, objective, seed, ("USHADE/DF",), **kwargs)
