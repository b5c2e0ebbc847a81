"""
Post-processing of finished trials: ECDF targets and attainment curves,
Wilcoxon rank-sum comparisons, and failed-parent lineage statistics.
"""

import bisect
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import norm, rankdata, tiecorrect

from .core import RunRecord, round_half_up
from .errors import ContractViolation
from .models import EcdfTargets, Verdict, WilcoxonResult, WinTieLoss

logger = logging.getLogger(__name__)

EXACT_LIMIT = 16
QUANTILE_METHOD = "linear"


@dataclass
class TrialMatrix:
    """RunRecords per (algorithm, problem) cell, plus each problem's budget and dimension."""

    records: Dict[Tuple[str, str], List[RunRecord]] = field(default_factory=dict)
    budgets: Dict[str, int] = field(default_factory=dict)
    dimensions: Dict[str, int] = field(default_factory=dict)

    def add(self, algorithm: str, problem: str, record: RunRecord) -> None:
        self.records.setdefault((algorithm, problem), []).append(record)

    @property
    def algorithms(self) -> List[str]:
        return list(dict.fromkeys(a for a, _ in self.records))

    @property
    def problems(self) -> List[str]:
        return list(dict.fromkeys(p for _, p in self.records))

    def cell(self, algorithm: str, problem: str) -> List[RunRecord]:
        try:
            return self.records[(algorithm, problem)]
        except KeyError as e:
            raise ContractViolation(f"No trials for {algorithm!r} on {problem!r}") from e

    def finals(self, algorithm: str, problem: str) -> List[float]:
        return [record.final_best for record in self.cell(algorithm, problem)]


def bsf_at(record: RunRecord, eval_count: int) -> float:
    """Best-so-far value at an evaluation count; +inf before the first point."""
    counts = [point[0] for point in record.trajectory]
    position = bisect.bisect_right(counts, eval_count) - 1
    return record.trajectory[position][1] if position >= 0 else math.inf


def ecdf_targets(finals: Iterable[float]) -> EcdfTargets:
    pool = np.asarray(list(finals), dtype=float)
    if pool.size == 0:
        raise ContractViolation("Cannot derive ECDF targets from an empty pool")
    q1, median, q3 = np.quantile(pool, [0.25, 0.5, 0.75], method=QUANTILE_METHOD)
    return EcdfTargets(q1=q1, median=median, q3=q3)


def ecdf_curve(
    records: Sequence[RunRecord],
    targets: EcdfTargets,
    eval_grid: Sequence[int],
    per_target: bool = False,
) -> np.ndarray:
    """
    Fraction of trials whose best-so-far is strictly below each target at each
    grid point. Averaged over the three targets unless `per_target`, in which
    case the result has shape (3, len(eval_grid)).
    """
    if not records:
        raise ContractViolation("ECDF needs at least one trial")
    values = np.array([[bsf_at(record, e) for e in eval_grid] for record in records])
    attained = np.stack([(values < z).mean(axis=0) for z in targets.as_list()])
    return attained if per_target else attained.mean(axis=0)


def budget_grid(budget: int, points: int = 200) -> List[int]:
    return [max(1, round_half_up(budget * k / points)) for k in range(1, points + 1)]


def problem_targets(matrix: TrialMatrix) -> Dict[str, EcdfTargets]:
    return {
        problem: ecdf_targets(v for algorithm in matrix.algorithms for v in matrix.finals(algorithm, problem))
        for problem in matrix.problems
    }


def ecdf_table(matrix: TrialMatrix, points: int = 200) -> pd.DataFrame:
    targets = problem_targets(matrix)
    rows = []
    for problem in matrix.problems:
        grid = budget_grid(matrix.budgets[problem], points)
        for algorithm in matrix.algorithms:
            curve = ecdf_curve(matrix.cell(algorithm, problem), targets[problem], grid)
            rows.extend(
                {"algorithm": algorithm, "problem": problem, "eval": e, "attainment": a}
                for e, a in zip(grid, curve)
            )
    return pd.DataFrame(rows, columns=["algorithm", "problem", "eval", "attainment"])


def suite_ecdf(ecdf: pd.DataFrame, points: int = 200) -> pd.DataFrame:
    """Average attainment over problems at matching budget fractions."""
    frame = ecdf.copy()
    frame["fraction"] = frame.groupby(["algorithm", "problem"]).cumcount().add(1) / points
    suite = frame.groupby(["algorithm", "fraction"], sort=False)["attainment"].mean().reset_index()
    return suite


def wilcoxon_rank_sum(
    sample_a: Sequence[float], sample_b: Sequence[float], alpha: float = 0.05
) -> WilcoxonResult:
    """
    Two-sided rank-sum test with average ranks for ties.

    Exact permutation distribution when the pooled size is at most 16,
    otherwise the normal approximation with tie and continuity correction.
    Lower values are better, so a significant result goes to the sample with
    the smaller mean rank.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ContractViolation("Both samples must be non-empty")
    na, nb = a.size, b.size
    n = na + nb
    ranked = rankdata(np.concatenate([a, b]))
    statistic = float(ranked[:na].sum())
    expected = na * (n + 1) / 2.0
    observed = abs(statistic - expected)

    if n <= EXACT_LIMIT:
        method = "exact"
        sums = np.array([ranked[list(c)].sum() for c in combinations(range(n), na)])
        p_value = float(np.mean(np.abs(sums - expected) >= observed - 1e-9))
    else:
        method = "normal"
        variance = tiecorrect(ranked) * na * nb * (n + 1) / 12.0
        if variance == 0:
            p_value = 1.0
        else:
            z = max(observed - 0.5, 0.0) / math.sqrt(variance)
            p_value = float(min(1.0, 2.0 * norm.sf(z)))

    verdict = Verdict.NO_DIFFERENCE
    if p_value < alpha:
        mean_rank_a = statistic / na
        mean_rank_b = (n * (n + 1) / 2.0 - statistic) / nb
        verdict = Verdict.A_BETTER if mean_rank_a < mean_rank_b else Verdict.B_BETTER
    return WilcoxonResult(p_value=p_value, verdict=verdict, statistic=statistic, method=method)


def compare_at(
    matrix: TrialMatrix,
    problem: str,
    alg_a: str,
    alg_b: str,
    eval_count: Optional[int] = None,
    alpha: float = 0.05,
) -> WilcoxonResult:
    """Rank-sum test on best-so-far values at `eval_count` (final values when None)."""
    if eval_count is None:
        return wilcoxon_rank_sum(matrix.finals(alg_a, problem), matrix.finals(alg_b, problem), alpha)
    return wilcoxon_rank_sum(
        [bsf_at(r, eval_count) for r in matrix.cell(alg_a, problem)],
        [bsf_at(r, eval_count) for r in matrix.cell(alg_b, problem)],
        alpha,
    )


def win_tie_loss(
    matrix: TrialMatrix, alg_a: str, alg_b: str, fraction: Optional[float] = None, alpha: float = 0.05
) -> WinTieLoss:
    """Count problems where alg_a is significantly better, indistinguishable, or worse."""
    tally = WinTieLoss()
    for problem in matrix.problems:
        eval_count = None if fraction is None else round_half_up(fraction * matrix.budgets[problem])
        verdict = compare_at(matrix, problem, alg_a, alg_b, eval_count, alpha).verdict
        if verdict is Verdict.A_BETTER:
            tally.wins += 1
        elif verdict is Verdict.B_BETTER:
            tally.losses += 1
        else:
            tally.ties += 1
    return tally


def wilcoxon_table(
    matrix: TrialMatrix, fractions: Sequence[Optional[float]] = (None,), alpha: float = 0.05
) -> pd.DataFrame:
    """Every ordered algorithm pair (a before b in plan order) on every problem."""
    rows = []
    algorithms = matrix.algorithms
    for fraction in fractions:
        for problem in matrix.problems:
            budget = matrix.budgets[problem]
            eval_count = budget if fraction is None else round_half_up(fraction * budget)
            for alg_a, alg_b in combinations(algorithms, 2):
                result = compare_at(matrix, problem, alg_a, alg_b, eval_count, alpha)
                rows.append(
                    {
                        "problem": problem,
                        "alg_a": alg_a,
                        "alg_b": alg_b,
                        "eval": eval_count,
                        "p": result.p_value,
                        "verdict": result.verdict.value,
                        "method": result.method,
                    }
                )
    return pd.DataFrame(rows, columns=["problem", "alg_a", "alg_b", "eval", "p", "verdict", "method"])


def failed_parent_fraction(record: RunRecord) -> Optional[float]:
    """Share of best-so-far updates made by offspring of failed parents; None without updates."""
    if record.total_bsf_updates == 0:
        return None
    return record.failed_parent_updates / record.total_bsf_updates


def lineage_table(matrix: TrialMatrix) -> pd.DataFrame:
    rows = [
        {"algorithm": algorithm, "problem": problem, "trial": trial, "fraction": failed_parent_fraction(record)}
        for (algorithm, problem), records in matrix.records.items()
        for trial, record in enumerate(records)
    ]
    return pd.DataFrame(rows, columns=["algorithm", "problem", "trial", "fraction"])


def smooth_T_trace(record: RunRecord, window: int) -> pd.Series:
    """Moving average of the sampled T values, indexed by evaluation count."""
    if not record.T_trace:
        return pd.Series(dtype=float, name="T")
    evals, values = zip(*record.T_trace)
    series = pd.Series(values, index=pd.Index(evals, name="eval_count"), name="T", dtype=float)
    return series.rolling(window, min_periods=1).mean()


def improvement_rate(record: RunRecord, start: int, stop: int) -> float:
    """Decrease of best-so-far per 10^4 evaluations between two counts."""
    if stop <= start:
        return 0.0
    before, after = bsf_at(record, start), bsf_at(record, stop)
    if not math.isfinite(before):
        return math.inf
    return (before - after) / (stop - start) * 1e4
