import hashlib
from enum import Enum
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, confloat, conint, model_validator

from .core import SUPPORTED_BIT_GENERATORS, round_half_up


class FunctionId(str, Enum):
    SPHERE = "sphere"
    ROSENBROCK = "rosenbrock"
    RASTRIGIN = "rastrigin"
    ACKLEY = "ackley"
    GRIEWANK = "griewank"
    SCHWEFEL = "schwefel"
    HAPPYCAT = "happycat"
    EXPANDED_SCHAFFER_F6 = "expanded_schaffer_f6"


class EngineName(str, Enum):
    DE = "DE"
    SHADE = "SHADE"
    LSHADE = "LSHADE"
    UDE = "UDE"
    UDE_DF = "UDE/DF"
    USHADE = "USHADE"
    USHADE_DF = "USHADE/DF"


class SelectionPolicy(str, Enum):
    UNIFORM = "uniform"
    T = "T"
    DPT = "DPT"


class TMode(str, Enum):
    INITIAL_SIZE = "initial_size"
    GROWTH_RATIO = "growth_ratio"


class MutationStrategy(str, Enum):
    CURRENT_TO_PBEST = "current_to_pbest"
    RAND1 = "rand1"


class Verdict(str, Enum):
    A_BETTER = "a_better"
    B_BETTER = "b_better"
    NO_DIFFERENCE = "no_difference"


Bound = Union[float, List[float]]


class ObjectiveSpec(BaseModel):
    function: FunctionId = Field(description="Base benchmark function")
    dimension: conint(ge=2) = Field(description="Problem dimension D")
    budget: conint(gt=0) = Field(description="Evaluation budget L_max of one trial")
    lower: Bound = Field(default=-100.0, description="Lower bound, scalar or per dimension")
    upper: Bound = Field(default=100.0, description="Upper bound, scalar or per dimension")
    shift: Optional[List[float]] = Field(default=None, description="Explicit optimum offset")
    shift_seed: Optional[int] = Field(
        default=None, description="Seed for a fixed random shift; per-trial shift when absent"
    )
    rotation_seed: Optional[int] = Field(
        default=None, description="Seed of an orthogonal rotation applied after shifting"
    )
    name: Optional[str] = Field(default=None, description="Display label, defaults to function-D")

    @property
    def label(self) -> str:
        return self.name or f"{self.function.value}-{self.dimension}D"

    def lower_bounds(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.lower, dtype=float), (self.dimension,)).copy()

    def upper_bounds(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.upper, dtype=float), (self.dimension,)).copy()

    @model_validator(mode="after")
    def _check_geometry(self):
        for bound in (self.lower, self.upper):
            if isinstance(bound, list) and len(bound) != self.dimension:
                raise ValueError(f"Bound vector has length {len(bound)}, expected {self.dimension}")
        lower, upper = self.lower_bounds(), self.upper_bounds()
        if not np.all(lower < upper):
            raise ValueError("lower must be strictly below upper in every dimension")
        if self.shift is not None:
            shift = np.asarray(self.shift, dtype=float)
            if shift.shape != (self.dimension,):
                raise ValueError(f"Shift has length {len(self.shift)}, expected {self.dimension}")
            if not np.all((lower < shift) & (shift < upper)):
                raise ValueError("Shift must lie strictly inside the bounds")
        return self


class SelectionConfig(BaseModel):
    policy: SelectionPolicy = Field(default=SelectionPolicy.DPT, description="Parent/r1/r2 selection policy")
    T_mode: TMode = Field(
        default=TMode.INITIAL_SIZE,
        description="Non-adaptive T: fixed to |P^1| or round(|P^t|/|P^1|)",
    )


class AdaptationConfig(BaseModel):
    H: Optional[conint(ge=1)] = Field(default=None, description="History length; engine default when absent")
    sigma_C: confloat(ge=0) = Field(default=0.1, description="Normal scale for crossover rate draws")
    gamma_F: confloat(ge=0) = Field(default=0.1, description="Cauchy scale for scale factor draws")
    sigma_T: confloat(ge=0) = Field(default=10.0, description="Normal scale for tournament divisor draws")
    T_min: confloat(ge=1) = Field(default=100.0, description="Floor of sampled T")
    frozen: bool = Field(default=False, description="Never update the memories")


class _EngineBase(BaseModel):
    name: Optional[str] = Field(default=None, description="Display label overriding the derived one")
    population_size: Optional[conint(ge=4)] = Field(
        default=None, description="Initial population size |P^1|; engine default when absent"
    )

    def initial_size(self, dimension: int) -> int:
        raise NotImplementedError

    @property
    def label(self) -> str:
        return self.name or self.engine


class DEConfig(_EngineBase):
    engine: Literal["DE"] = "DE"
    F: confloat(gt=0, le=1) = Field(default=0.5, description="Fixed scale factor")
    C: confloat(ge=0, le=1) = Field(default=0.5, description="Fixed crossover rate")
    p: confloat(gt=0, le=1) = Field(default=0.11, description="pbest rate")
    mutation: MutationStrategy = Field(default=MutationStrategy.CURRENT_TO_PBEST)

    def initial_size(self, dimension: int) -> int:
        return self.population_size or 100


class SHADEConfig(_EngineBase):
    engine: Literal["SHADE"] = "SHADE"
    p: confloat(gt=0, le=1) = Field(default=0.1, description="pbest rate")
    archive_rate: confloat(ge=0) = Field(default=2.0, description="Archive capacity as a multiple of |P|")
    adaptation: AdaptationConfig = Field(default_factory=AdaptationConfig)

    def initial_size(self, dimension: int) -> int:
        return self.population_size or 100

    def history_length(self, dimension: int) -> int:
        return self.adaptation.H or dimension


class LSHADEConfig(_EngineBase):
    engine: Literal["LSHADE"] = "LSHADE"
    p: confloat(gt=0, le=1) = Field(default=0.11, description="pbest rate")
    archive_rate: confloat(ge=0) = Field(default=1.4, description="Archive capacity as a multiple of |P^t|")
    min_size: conint(ge=4) = Field(default=4, description="Population size at the end of the schedule")
    schedule_factor: confloat(gt=0) = Field(
        default=1.0, description="LPSR target budget as a multiple of the evaluation budget"
    )
    target_budget: Optional[conint(gt=0)] = Field(
        default=None, description="Absolute LPSR target budget, overrides schedule_factor"
    )
    adaptation: AdaptationConfig = Field(default_factory=AdaptationConfig)

    def initial_size(self, dimension: int) -> int:
        return self.population_size or 18 * dimension

    def history_length(self, dimension: int) -> int:
        return self.adaptation.H or 6

    def lpsr_target(self, budget: int) -> int:
        if self.target_budget is not None:
            return self.target_budget
        return max(1, round_half_up(self.schedule_factor * budget))

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        named = {0.5: "half", 2.0: "double"}
        if self.target_budget is not None:
            return f"LSHADE(target={self.target_budget})"
        if self.schedule_factor == 1.0:
            return "LSHADE"
        return f"LSHADE({named.get(self.schedule_factor, f'x{self.schedule_factor:g}')})"


class UnboundedConfig(_EngineBase):
    engine: Literal["UDE", "UDE/DF", "USHADE", "USHADE/DF"] = "UDE"
    F: confloat(gt=0, le=1) = Field(default=0.5, description="Fixed scale factor (UDE)")
    C: confloat(ge=0, le=1) = Field(default=0.5, description="Fixed crossover rate (UDE)")
    p: confloat(gt=0, le=1) = Field(default=0.11, description="pbest rate over the whole store")
    gensize: conint(ge=1) = Field(default=100, description="Offspring per generation")
    mutation: MutationStrategy = Field(default=MutationStrategy.CURRENT_TO_PBEST)
    selection: SelectionConfig = Field(default_factory=SelectionConfig)
    adaptation: AdaptationConfig = Field(default_factory=AdaptationConfig)

    def initial_size(self, dimension: int) -> int:
        return self.population_size or 18 * dimension

    def history_length(self, dimension: int) -> int:
        return self.adaptation.H or 6

    @property
    def adaptive(self) -> bool:
        return self.engine.startswith("USHADE")

    @property
    def discard_failed(self) -> bool:
        return self.engine.endswith("/DF")

    @property
    def label(self) -> str:
        return self.name or f"{self.engine}({self.selection.policy.value})"

    @model_validator(mode="after")
    def _check_partition(self):
        if (
            self.selection.policy is SelectionPolicy.DPT
            and self.population_size is not None
            and self.population_size < self.gensize
        ):
            raise ValueError(
                f"DPT needs |P^1| >= gensize, got {self.population_size} < {self.gensize}"
            )
        return self


EngineConfig = Annotated[
    Union[DEConfig, SHADEConfig, LSHADEConfig, UnboundedConfig],
    Field(discriminator="engine"),
]


class RngConfig(BaseModel):
    algorithm: Literal[SUPPORTED_BIT_GENERATORS] = Field(
        default="PCG64", description="numpy bit generator behind every trial stream"
    )


class HarnessConfig(BaseModel):
    trials: conint(ge=1) = Field(default=51, description="Independent trials per (algorithm, problem) cell")
    base_seed: conint(ge=0) = Field(default=0, description="Root of every derived trial seed")
    workers: conint(ge=1) = Field(default=1, description="Worker processes")
    output_dir: str = Field(default="out", description="Result directory")
    checkpoint_divisor: conint(ge=1) = Field(
        default=200, description="Trajectory checkpoint stride is budget / checkpoint_divisor"
    )


class ExperimentPlan(BaseModel):
    harness: HarnessConfig = Field(default_factory=HarnessConfig)
    rng: RngConfig = Field(default_factory=RngConfig)
    problems: List[ObjectiveSpec] = Field(min_length=1, description="Benchmark problems")
    engines: List[EngineConfig] = Field(min_length=1, description="Algorithms to compare")

    def plan_hash(self) -> str:
        """Digest of everything that influences trial outputs (not workers or output paths)."""
        payload = self.model_dump_json(exclude={"harness": {"workers", "output_dir"}})
        return hashlib.sha256(payload.encode()).hexdigest()

    @model_validator(mode="after")
    def _check_labels(self):
        for items, kind in ((self.engines, "engine"), (self.problems, "problem")):
            labels = [item.label for item in items]
            duplicates = sorted({label for label in labels if labels.count(label) > 1})
            if duplicates:
                raise ValueError(f"Duplicate {kind} labels: {duplicates}")
        return self


class TrialEntry(BaseModel):
    algorithm: str
    problem: str
    trial: int
    seed: int
    shift_seed: int


class Manifest(BaseModel):
    version: str = Field(description="Package version that produced the results")
    plan_hash: str
    quantile_method: str = Field(default="linear", description="Quantile convention of ECDF targets")
    plan: ExperimentPlan
    trials: List[TrialEntry] = Field(default_factory=list)


class TrialSummary(BaseModel):
    trial_id: str
    algorithm: str
    problem: str
    trial: int
    seed: int
    plan_hash: str
    final_best: float
    evaluations: int
    failed_parent_updates: int
    total_bsf_updates: int
    T_trace: Optional[List[Tuple[int, float]]] = None


class EcdfTargets(BaseModel):
    q1: float = Field(description="First quartile of pooled finals")
    median: float = Field(description="Median of pooled finals")
    q3: float = Field(description="Third quartile of pooled finals")

    def as_list(self) -> List[float]:
        return [self.q1, self.median, self.q3]


class WilcoxonResult(BaseModel):
    p_value: confloat(ge=0, le=1)
    verdict: Verdict
    statistic: float = Field(description="Rank sum of sample a")
    method: Literal["exact", "normal"]


class WinTieLoss(BaseModel):
    wins: int = 0
    ties: int = 0
    losses: int = 0


class RobustnessRow(BaseModel):
    algorithm: str
    problem: str
    pre_rate: float = Field(description="Median bsf decrease per 1e4 evaluations from the first evaluation to B/2")
    post_rate: float = Field(description="Median bsf decrease per 1e4 evaluations from B/2 to B")
    median_final: float
    versus_reference: Optional[Verdict] = Field(
        default=None, description="Wilcoxon verdict of finals against the unbounded reference"
    )
    p_value: Optional[float] = None


class FailedIndividualRow(BaseModel):
    problem: str
    eval_count: int
    p_value: float
    verdict: Verdict
    median_kept: float = Field(description="Median bsf of the engine that keeps failed offspring")
    median_discarded: float = Field(description="Median bsf of the /DF engine")
    lineage_kept: Optional[float] = None
    lineage_discarded: Optional[float] = None
