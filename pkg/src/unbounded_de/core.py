"""
Domain types shared by every engine: individuals, population stores,
the SHADE archive, the per-trial random stream and the run record.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from .errors import ContractViolation, UnknownIndividual

SUPPORTED_BIT_GENERATORS = ("PCG64", "PCG64DXSM", "Philox", "SFC64", "MT19937")


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves away from zero for positive x."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True, slots=True)
class Individual:
    genome: np.ndarray
    fitness: float
    insertion_index: int
    parent_index: Optional[int] = None
    successful: bool = True


class RngStream:
    """
    Seeded random stream backed by a named numpy bit generator.

    Identical (seed, algorithm) pairs give identical draw sequences on every
    platform. `spawn` derives an independent child stream from the same seed,
    so one trial can keep parameter sampling apart from selection draws.
    """

    def __init__(self, seed: int, algorithm: str = "PCG64", *, spawn_key: Tuple[int, ...] = ()):
        if algorithm not in SUPPORTED_BIT_GENERATORS:
            raise ContractViolation(
                f"Unknown bit generator {algorithm!r}; expected one of {SUPPORTED_BIT_GENERATORS}"
            )
        self.seed = int(seed)
        self.algorithm = algorithm
        self.spawn_key = tuple(spawn_key)
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.spawn_key)
        self._gen = np.random.Generator(getattr(np.random, algorithm)(sequence))

    def spawn(self, key: int) -> "RngStream":
        return RngStream(self.seed, self.algorithm, spawn_key=self.spawn_key + (int(key),))

    def uniform(self, size=None):
        """Uniform reals on [0, 1)."""
        if size is None:
            return float(self._gen.random())
        return self._gen.random(size)

    def integers(self, low: int, high: int, size=None):
        """Uniform integers on [low, high)."""
        if size is None:
            return int(self._gen.integers(low, high))
        return self._gen.integers(low, high, size=size)

    def normal(self, size=None):
        if size is None:
            return float(self._gen.standard_normal())
        return self._gen.standard_normal(size)

    def cauchy(self, size=None):
        """Standard Cauchy draws through the inverse CDF, one uniform per draw."""
        u = self.uniform(size)
        return np.tan(np.pi * (u - 0.5)) if size is not None else math.tan(math.pi * (u - 0.5))

    def sample_without_replacement(self, population: int, k: int) -> np.ndarray:
        if k > population:
            raise ContractViolation(f"Cannot draw {k} distinct items from {population}")
        return self._gen.choice(population, size=k, replace=False)


class StoreMode(str, Enum):
    SLOT = "slot"
    APPEND = "append"


class PopulationStore:
    """
    Container for evaluated individuals.

    Append mode only ever grows and keeps slot == insertion index. Slot mode
    replaces in place and shrinks through `remove_worst`. Both keep a sorted
    view keyed by (fitness, insertion_index), updated per insert.
    """

    def __init__(self, dimension: int, mode: StoreMode = StoreMode.APPEND, capacity: int = 256):
        if dimension < 1:
            raise ContractViolation(f"Dimension must be positive, got {dimension}")
        self.dimension = dimension
        self.mode = StoreMode(mode)
        capacity = max(int(capacity), 4)
        self._genomes = np.empty((capacity, dimension))
        self._fitness = np.empty(capacity)
        self._insertion = np.empty(capacity, dtype=np.int64)
        self._parent = np.full(capacity, -1, dtype=np.int64)
        self._successful = np.ones(capacity, dtype=bool)
        self._size = 0
        self._next_index = 0
        self._keys: List[Tuple[float, int]] = []
        self._slot_of: dict[int, int] = {}

    def __len__(self) -> int:
        return self._size

    # --- read access -------------------------------------------------

    @property
    def genomes(self) -> np.ndarray:
        return self._genomes[: self._size]

    @property
    def fitness(self) -> np.ndarray:
        return self._fitness[: self._size]

    @property
    def insertion_indices(self) -> np.ndarray:
        return self._insertion[: self._size]

    @property
    def successful(self) -> np.ndarray:
        return self._successful[: self._size]

    @property
    def sorted_view(self) -> List[int]:
        """Insertion indices in rank order (rank 1 first)."""
        return [index for _, index in self._keys]

    def slot_of(self, insertion_index: int) -> int:
        if self.mode is StoreMode.APPEND:
            if 0 <= insertion_index < self._size:
                return int(insertion_index)
        elif insertion_index in self._slot_of:
            return self._slot_of[insertion_index]
        raise UnknownIndividual(f"Insertion index {insertion_index} is not in the store")

    def individual_at(self, slot: int) -> Individual:
        if not 0 <= slot < self._size:
            raise UnknownIndividual(f"Slot {slot} outside store of size {self._size}")
        parent = int(self._parent[slot])
        return Individual(
            genome=self._genomes[slot].copy(),
            fitness=float(self._fitness[slot]),
            insertion_index=int(self._insertion[slot]),
            parent_index=None if parent < 0 else parent,
            successful=bool(self._successful[slot]),
        )

    def individual(self, insertion_index: int) -> Individual:
        return self.individual_at(self.slot_of(insertion_index))

    def genome_at(self, slot: int) -> np.ndarray:
        return self._genomes[slot]

    def rank_of(self, insertion_index: int) -> int:
        slot = self.slot_of(insertion_index)
        return bisect.bisect_left(self._keys, (float(self._fitness[slot]), int(insertion_index))) + 1

    def best_slot(self) -> int:
        return self.slot_of(self._keys[0][1])

    @property
    def best_fitness(self) -> float:
        return self._keys[0][0] if self._keys else math.inf

    def top_slots(self, k: int) -> List[int]:
        return [self.slot_of(index) for _, index in self._keys[:k]]

    def slot_at_rank(self, rank: int) -> int:
        return self.slot_of(self._keys[rank - 1][1])

    def best_of(self, slots: np.ndarray) -> int:
        """Fittest slot among `slots`; equal fitness goes to the earlier insertion."""
        slots = np.asarray(slots)
        values = self._fitness[slots]
        ties = slots[values == values.min()]
        if len(ties) == 1:
            return int(ties[0])
        return int(ties[np.argmin(self._insertion[ties])])

    def slots_with_residue(self, residue: int, modulus: int) -> np.ndarray:
        if self.mode is StoreMode.APPEND:
            return np.arange(residue, self._size, modulus)
        return np.flatnonzero(self.insertion_indices % modulus == residue)

    # --- mutation ----------------------------------------------------

    def add(
        self,
        genome: np.ndarray,
        fitness: float,
        parent_index: Optional[int] = None,
        successful: bool = True,
    ) -> int:
        """Store an evaluated individual and return its insertion index."""
        genome = self._checked(genome, fitness)
        if self._size == len(self._fitness):
            self._grow()
        slot = self._size
        index = self._next_index
        self._write(slot, index, genome, fitness, parent_index, successful)
        self._size += 1
        self._next_index += 1
        return index

    def replace(
        self,
        slot: int,
        genome: np.ndarray,
        fitness: float,
        parent_index: Optional[int] = None,
        successful: bool = True,
    ) -> Individual:
        """Overwrite a slot with a new individual; returns the displaced one."""
        if self.mode is not StoreMode.SLOT:
            raise ContractViolation("Append-mode stores never overwrite individuals")
        genome = self._checked(genome, fitness)
        displaced = self.individual_at(slot)
        self._drop_key(displaced.fitness, displaced.insertion_index)
        del self._slot_of[displaced.insertion_index]
        index = self._next_index
        self._write(slot, index, genome, fitness, parent_index, successful)
        self._next_index += 1
        return displaced

    def remove_worst(self, count: int) -> List[Individual]:
        """Delete the `count` worst-ranked individuals (slot mode only)."""
        if self.mode is not StoreMode.SLOT:
            raise ContractViolation("Append-mode stores never shrink")
        if count <= 0:
            return []
        count = min(count, self._size)
        doomed = [self.slot_of(index) for _, index in self._keys[-count:]]
        removed = [self.individual_at(slot) for slot in doomed]
        keep = np.setdiff1d(np.arange(self._size), doomed)
        size = len(keep)
        for column in (self._genomes, self._fitness, self._insertion, self._parent, self._successful):
            column[:size] = column[keep]
        self._size = size
        del self._keys[-count:]
        self._slot_of = {int(self._insertion[slot]): slot for slot in range(size)}
        return removed

    # --- internals ---------------------------------------------------

    def _checked(self, genome: np.ndarray, fitness: float) -> np.ndarray:
        genome = np.asarray(genome, dtype=float)
        if genome.shape != (self.dimension,):
            raise ContractViolation(f"Genome shape {genome.shape} does not match dimension {self.dimension}")
        if not math.isfinite(fitness):
            raise ContractViolation(f"Refusing to store non-finite fitness {fitness}")
        return genome

    def _write(self, slot, index, genome, fitness, parent_index, successful) -> None:
        self._genomes[slot] = genome
        self._fitness[slot] = fitness
        self._insertion[slot] = index
        self._parent[slot] = -1 if parent_index is None else parent_index
        self._successful[slot] = successful
        bisect.insort(self._keys, (float(fitness), index))
        if self.mode is StoreMode.SLOT:
            self._slot_of[index] = slot

    def _drop_key(self, fitness: float, index: int) -> None:
        position = bisect.bisect_left(self._keys, (fitness, index))
        del self._keys[position]

    def _grow(self) -> None:
        capacity = 2 * len(self._fitness)
        self._genomes = np.resize(self._genomes, (capacity, self.dimension))
        self._fitness = np.resize(self._fitness, capacity)
        self._insertion = np.resize(self._insertion, capacity)
        self._parent = np.resize(self._parent, capacity)
        self._successful = np.resize(self._successful, capacity)


def rank_of(store: PopulationStore, individual_index: int) -> int:
    """Rank (1 = best) of the individual with the given insertion index."""
    return store.rank_of(individual_index)


class Archive:
    """Bounded pool of replaced parents used by SHADE-style mutation."""

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ContractViolation(f"Archive capacity must be >= 0, got {capacity}")
        self.capacity = int(capacity)
        self.members: List[Individual] = []

    def __len__(self) -> int:
        return len(self.members)

    def add(self, individual: Individual, rng: RngStream) -> None:
        if self.capacity == 0:
            return
        if len(self.members) < self.capacity:
            self.members.append(individual)
        else:
            self.members[rng.integers(0, len(self.members))] = individual

    def resize(self, capacity: int, rng: RngStream) -> List[Individual]:
        """Set a new capacity, evicting uniformly random members if over it."""
        self.capacity = max(int(capacity), 0)
        evicted = []
        while len(self.members) > self.capacity:
            evicted.append(self.members.pop(rng.integers(0, len(self.members))))
        return evicted

    def genome(self, k: int) -> np.ndarray:
        return self.members[k].genome


class RunRecord(BaseModel):
    """Trajectory and lineage counters of a single trial."""

    trial_id: str = Field(default="", description="Identifier of the (algorithm, problem, trial) cell")
    seed: int = Field(default=0, description="Seed of the trial's random stream")
    trajectory: List[Tuple[int, float]] = Field(
        default_factory=list,
        description="(evaluation_count, best_so_far) at every improvement and checkpoint",
    )
    final_best: float = Field(default=math.inf, description="Best fitness at termination")
    evaluations: int = Field(default=0, description="Evaluations consumed by the trial")
    failed_parent_updates: int = Field(default=0, description="Best-so-far updates whose parent had failed")
    total_bsf_updates: int = Field(default=0, description="Best-so-far updates made by offspring")
    T_trace: Optional[List[Tuple[int, float]]] = Field(
        default=None, description="(evaluation_count, mean sampled T) per checkpoint window, USHADE family only"
    )

    @property
    def best_so_far(self) -> float:
        return self.trajectory[-1][1] if self.trajectory else math.inf

    def checkpoint(self, eval_count: int) -> None:
        if self.trajectory and self.trajectory[-1][0] < eval_count:
            self.trajectory.append((eval_count, self.trajectory[-1][1]))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.trajectory, columns=["eval_count", "best_so_far"])
        frame.insert(0, "trial_id", self.trial_id)
        return frame


def record_improvement(
    record: RunRecord,
    eval_count: int,
    fitness: float,
    parent_successful: Optional[bool],
) -> RunRecord:
    """
    Log a new best-so-far value.

    The very first evaluation and initial individuals (parent_successful None)
    only extend the trajectory; every later offspring improvement also feeds
    the failed-parent counters.
    """
    first = not record.trajectory
    if record.trajectory and record.trajectory[-1][0] == eval_count:
        record.trajectory[-1] = (eval_count, fitness)
    else:
        record.trajectory.append((eval_count, fitness))
    record.final_best = fitness
    if not first and parent_successful is not None:
        record.total_bsf_updates += 1
        if not parent_successful:
            record.failed_parent_updates += 1
    return record


def stable_rank_order(fitness: Iterable[float]) -> List[int]:
    """From-scratch reference ordering: sort by (fitness, position)."""
    values = list(fitness)
    return sorted(range(len(values)), key=lambda i: (values[i], i))
