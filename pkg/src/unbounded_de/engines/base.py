"""
Shared kernel of every engine: streams, the store, the evaluation hook that
keeps the RunRecord current, and the generation loop.
"""

import logging
from typing import Optional, Union

import numpy as np

from ..core import PopulationStore, RngStream, RunRecord, StoreMode, record_improvement
from ..errors import BudgetExhausted, ConfigError
from ..models import (
    DEConfig,
    LSHADEConfig,
    ObjectiveSpec,
    SelectionPolicy,
    SHADEConfig,
    UnboundedConfig,
)
from ..objectives import Objective, clamp_population_init
from ..variation import binomial_crossover, repair_bounds

logger = logging.getLogger(__name__)

AnyEngineConfig = Union[DEConfig, SHADEConfig, LSHADEConfig, UnboundedConfig]

PARAMS_STREAM = 1


def validate_engine(config: AnyEngineConfig, spec: ObjectiveSpec) -> None:
    """Cross-field checks that need the problem dimension."""
    size = config.initial_size(spec.dimension)
    if size < 4:
        raise ConfigError(f"{config.label}: |P^1| must be at least 4, got {size}")
    if isinstance(config, UnboundedConfig) and config.selection.policy is SelectionPolicy.DPT:
        if size < config.gensize:
            raise ConfigError(
                f"{config.label}: DPT needs |P^1| >= gensize, got {size} < {config.gensize} for D={spec.dimension}"
            )


def default_stride(budget: int, divisor: int = 200) -> int:
    return max(1, budget // divisor)


class Engine:
    """
    Base driver. Subclasses set `mode` and implement `step`, which must spend
    at most `objective.remaining` evaluations.
    """

    mode = StoreMode.SLOT
    engine_names: tuple = ()

    def __init__(
        self,
        config: AnyEngineConfig,
        objective: Union[Objective, ObjectiveSpec],
        seed: int,
        algorithm: str = "PCG64",
        checkpoint_stride: Optional[int] = None,
    ):
        if self.engine_names and config.engine not in self.engine_names:
            raise ConfigError(f"{type(self).__name__} cannot run engine {config.engine!r}")
        if isinstance(objective, ObjectiveSpec):
            objective = Objective(objective, trial_seed=seed)
        validate_engine(config, objective.spec)
        self.config = config
        self.objective = objective
        self.dimension = objective.dimension
        self.rng = RngStream(seed, algorithm)
        self.params_rng = self.rng.spawn(PARAMS_STREAM)
        self.record = RunRecord(seed=seed)
        self.stride = checkpoint_stride or default_stride(objective.budget)
        self.initial_size = config.initial_size(self.dimension)
        self.store = PopulationStore(self.dimension, self.mode, capacity=self._store_capacity())
        self.generation = 0

    def _store_capacity(self) -> int:
        return self.initial_size

    def evaluate(self, genome: np.ndarray, parent_successful: Optional[bool]) -> float:
        fitness = self.objective.evaluate(genome)
        count = self.objective.evaluations
        if not self.record.trajectory or fitness < self.record.best_so_far:
            record_improvement(self.record, count, fitness, parent_successful)
        if count % self.stride == 0:
            self.record.checkpoint(count)
        return fitness

    def initialize(self) -> None:
        count = min(self.initial_size, self.objective.remaining)
        genomes = clamp_population_init(self.objective.spec, self.rng, self.initial_size)
        for genome in genomes[:count]:
            self.store.add(genome, self.evaluate(genome, parent_successful=None))

    def offspring(self, parent_slot: int, mutant: np.ndarray, C: float) -> np.ndarray:
        parent = self.store.genome_at(parent_slot)
        child = binomial_crossover(parent, mutant, C, self.rng)
        return repair_bounds(child, parent, self.objective.lower, self.objective.upper)

    def step(self) -> None:
        raise NotImplementedError

    def run(self) -> RunRecord:
        self.initialize()
        try:
            while self.objective.remaining > 0:
                self.step()
                self.generation += 1
                logger.debug(
                    "%s generation %d: |P|=%d bsf=%.6g evals=%d",
                    self.config.label,
                    self.generation,
                    len(self.store),
                    self.record.best_so_far,
                    self.objective.evaluations,
                )
        except BudgetExhausted:
            # step() never asks for more than the remaining budget
            logger.error("%s overran its budget in generation %d", self.config.label, self.generation)
            raise
        self.record.checkpoint(self.objective.evaluations)
        self.record.evaluations = self.objective.evaluations
        logger.info(
            "%s on %s finished: best=%.6g after %d evaluations",
            self.config.label,
            self.objective.spec.label,
            self.record.final_best,
            self.record.evaluations,
        )
        return self.record
