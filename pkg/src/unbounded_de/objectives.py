"""
Shifted (and optionally rotated) benchmark functions with a hard
evaluation budget.

Every base function is written in vectorised numpy and reaches exactly 0
at its optimum. Rosenbrock keeps its textbook optimum at shift + 1; every
other function is optimal at the shift itself.
"""

import logging
import math
from typing import Callable, Dict, Optional

import numpy as np

from .core import RngStream
from .errors import BudgetExhausted, ContractViolation
from .models import FunctionId, ObjectiveSpec

logger = logging.getLogger(__name__)

SCHWEFEL_OFFSET = 4.209687462275036e002
SCHWEFEL_SCALE = 1000.0 / 100.0
HAPPYCAT_SCALE = 5.0 / 100.0
SHIFT_FRACTION = 0.8


def sphere(z: np.ndarray) -> float:
    return float(np.dot(z, z))


def rosenbrock(z: np.ndarray) -> float:
    head, tail = z[:-1], z[1:]
    return float(np.sum(100.0 * (tail - head**2) ** 2 + (head - 1.0) ** 2))


def rastrigin(z: np.ndarray) -> float:
    return float(np.sum(z**2 - 10.0 * np.cos(2.0 * np.pi * z) + 10.0))


def ackley(z: np.ndarray) -> float:
    a = -0.2 * math.sqrt(float(np.mean(z**2)))
    b = float(np.mean(np.cos(2.0 * np.pi * z)))
    # grouped so both brackets cancel exactly at z = 0
    return (20.0 - 20.0 * math.exp(a)) + (math.e - math.exp(b))


def griewank(z: np.ndarray) -> float:
    i = np.arange(1, len(z) + 1)
    return float(np.sum(z**2) / 4000.0 - np.prod(np.cos(z / np.sqrt(i))) + 1.0)


def _schwefel_terms(y: np.ndarray, dimension: int) -> np.ndarray:
    terms = np.empty_like(y)
    inside = np.abs(y) <= 500.0
    terms[inside] = y[inside] * np.sin(np.sqrt(np.abs(y[inside])))
    above = y > 500.0
    folded = 500.0 - np.fmod(y[above], 500.0)
    terms[above] = folded * np.sin(np.sqrt(folded)) - ((y[above] - 500.0) / 100.0) ** 2 / dimension
    below = y < -500.0
    folded = 500.0 - np.fmod(np.abs(y[below]), 500.0)
    terms[below] = -folded * np.sin(np.sqrt(folded)) - ((y[below] + 500.0) / 100.0) ** 2 / dimension
    return terms


SCHWEFEL_PEAK = float(_schwefel_terms(np.array([SCHWEFEL_OFFSET]), 1)[0])


def schwefel(z: np.ndarray) -> float:
    y = SCHWEFEL_SCALE * z + SCHWEFEL_OFFSET
    return float(np.sum(SCHWEFEL_PEAK - _schwefel_terms(y, len(z))))


def happycat(z: np.ndarray) -> float:
    y = HAPPYCAT_SCALE * z - 1.0
    dimension = len(z)
    r2 = float(np.dot(y, y))
    return abs(r2 - dimension) ** 0.25 + (0.5 * r2 + float(np.sum(y))) / dimension + 0.5


def expanded_schaffer_f6(z: np.ndarray) -> float:
    squares = z**2 + np.roll(z, -1) ** 2
    return float(np.sum(0.5 + (np.sin(np.sqrt(squares)) ** 2 - 0.5) / (1.0 + 0.001 * squares) ** 2))


FUNCTIONS: Dict[FunctionId, Callable[[np.ndarray], float]] = {
    FunctionId.SPHERE: sphere,
    FunctionId.ROSENBROCK: rosenbrock,
    FunctionId.RASTRIGIN: rastrigin,
    FunctionId.ACKLEY: ackley,
    FunctionId.GRIEWANK: griewank,
    FunctionId.SCHWEFEL: schwefel,
    FunctionId.HAPPYCAT: happycat,
    FunctionId.EXPANDED_SCHAFFER_F6: expanded_schaffer_f6,
}

OPTIMUM_OFFSET = {FunctionId.ROSENBROCK: 1.0}


def draw_shift(spec: ObjectiveSpec, seed: int) -> np.ndarray:
    """Uniform optimum offset inside the central 80% of the box ([0.8·lower, 0.8·upper] for symmetric bounds)."""
    lower, upper = spec.lower_bounds(), spec.upper_bounds()
    center, half_width = (lower + upper) / 2.0, (upper - lower) / 2.0
    u = RngStream(seed).uniform(spec.dimension)
    return center + SHIFT_FRACTION * half_width * (2.0 * u - 1.0)


def rotation_matrix(dimension: int, seed: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix from a sign-corrected QR factorisation."""
    gaussian = RngStream(seed).normal((dimension, dimension))
    q, r = np.linalg.qr(gaussian)
    return q * np.sign(np.diag(r))


class Objective:
    """
    One trial's view of an ObjectiveSpec: resolved shift and rotation plus the
    evaluation counter that enforces the budget.
    """

    def __init__(self, spec: ObjectiveSpec, trial_seed: Optional[int] = None):
        self.spec = spec
        self.dimension = spec.dimension
        self.lower = spec.lower_bounds()
        self.upper = spec.upper_bounds()
        self.budget = spec.budget
        self.evaluations = 0
        self._function = FUNCTIONS[spec.function]

        if spec.shift is not None:
            self.shift = np.asarray(spec.shift, dtype=float)
        elif spec.shift_seed is not None:
            self.shift = draw_shift(spec, spec.shift_seed)
        elif trial_seed is not None:
            self.shift = draw_shift(spec, trial_seed)
        else:
            self.shift = np.zeros(self.dimension)

        self.rotation = (
            rotation_matrix(self.dimension, spec.rotation_seed) if spec.rotation_seed is not None else None
        )

    @property
    def remaining(self) -> int:
        return self.budget - self.evaluations

    def transform(self, x: np.ndarray) -> np.ndarray:
        z = x - self.shift
        if self.rotation is not None:
            z = self.rotation @ z
        return z

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ContractViolation(f"Expected a vector of length {self.dimension}, got shape {x.shape}")
        if self.evaluations >= self.budget:
            raise BudgetExhausted(f"Budget of {self.budget} evaluations already consumed")
        self.evaluations += 1
        return self._function(self.transform(x))

    def optimum(self) -> np.ndarray:
        offset = np.full(self.dimension, OPTIMUM_OFFSET.get(self.spec.function, 0.0))
        if self.rotation is not None:
            offset = self.rotation.T @ offset
        return self.shift + offset


def evaluate(objective: Objective, x) -> float:
    return objective.evaluate(x)


def clamp_population_init(spec: ObjectiveSpec, rng: RngStream, n: int) -> np.ndarray:
    """n genomes drawn i.i.d. uniform inside the bounds, one row each."""
    if n < 4:
        raise ContractViolation(f"Initial population needs at least 4 individuals, got {n}")
    lower, upper = spec.lower_bounds(), spec.upper_bounds()
    return lower + (upper - lower) * rng.uniform((n, spec.dimension))
