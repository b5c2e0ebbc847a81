"""
Success-history parameter control for F, C and the tournament divisor T.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core import RngStream
from .errors import ContractViolation
from .models import AdaptationConfig


class SuccessHistory:
    """Circular memories M_F, M_C and optionally M_T with a shared cursor."""

    def __init__(self, H: int, config: Optional[AdaptationConfig] = None, initial_T: Optional[float] = None):
        if H < 1:
            raise ContractViolation(f"History length must be positive, got {H}")
        self.config = config or AdaptationConfig()
        self.H = H
        self.M_F = np.full(H, 0.5)
        self.M_C = np.full(H, 0.5)
        self.M_T = None if initial_T is None else np.full(H, max(float(initial_T), self.config.T_min))
        self.k = 0

    def draw_slot(self, rng: RngStream) -> int:
        return rng.integers(0, self.H)

    def snapshot(self) -> tuple:
        return (
            self.M_F.copy(),
            self.M_C.copy(),
            None if self.M_T is None else self.M_T.copy(),
            self.k,
        )


@dataclass
class SuccessSets:
    S_F: List[float] = field(default_factory=list)
    S_C: List[float] = field(default_factory=list)
    S_T: List[float] = field(default_factory=list)
    S_df: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.S_df)

    def add(self, F: float, C: float, delta_f: float, T: Optional[float] = None) -> None:
        # ties count as successes elsewhere but carry zero weight here
        if delta_f <= 0:
            return
        self.S_F.append(F)
        self.S_C.append(C)
        if T is not None:
            self.S_T.append(T)
        self.S_df.append(delta_f)

    def clear(self) -> None:
        for values in (self.S_F, self.S_C, self.S_T, self.S_df):
            values.clear()


def sample_F(history: SuccessHistory, rng: RngStream, slot: Optional[int] = None) -> float:
    """Cauchy(M_F[r], gamma_F) clipped to 1 above and redrawn while not positive."""
    r = history.draw_slot(rng) if slot is None else slot
    while True:
        F = history.M_F[r] + history.config.gamma_F * rng.cauchy()
        if F > 1.0:
            return 1.0
        if F > 0.0:
            return float(F)


def sample_C(history: SuccessHistory, rng: RngStream, slot: Optional[int] = None) -> float:
    r = history.draw_slot(rng) if slot is None else slot
    return float(min(1.0, max(0.0, history.M_C[r] + history.config.sigma_C * rng.normal())))


def sample_T(history: SuccessHistory, rng: RngStream, slot: Optional[int] = None) -> float:
    if history.M_T is None:
        raise ContractViolation("This history carries no M_T memory")
    r = history.draw_slot(rng) if slot is None else slot
    return float(max(history.config.T_min, history.M_T[r] + history.config.sigma_T * rng.normal()))


def lehmer_mean(values: Sequence[float], weights: Sequence[float]) -> float:
    """Weighted Lehmer mean sum(w·x²) / sum(w·x)."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size == 0 or values.shape != weights.shape:
        raise ContractViolation(
            f"Lehmer mean needs equal non-empty inputs, got {values.size} values and {weights.size} weights"
        )
    if np.any(weights <= 0):
        raise ContractViolation("Lehmer mean weights must be positive")
    denominator = np.dot(weights, values)
    if denominator == 0:
        raise ContractViolation("Lehmer mean is undefined when every value is zero")
    return float(np.dot(weights, values**2) / denominator)


def update_history(history: SuccessHistory, sets: SuccessSets) -> SuccessHistory:
    """Write the generation's Lehmer means at the cursor and advance it."""
    if len(sets) == 0 or history.config.frozen:
        return history
    k = history.k
    weights = np.asarray(sets.S_df)
    history.M_F[k] = lehmer_mean(sets.S_F, weights)
    history.M_C[k] = 0.0 if not any(sets.S_C) else lehmer_mean(sets.S_C, weights)
    if history.M_T is not None and sets.S_T:
        history.M_T[k] = lehmer_mean(sets.S_T, weights)
    history.k = (k + 1) % history.H
    return history
