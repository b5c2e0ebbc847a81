"""
Experiment orchestration: seeds, trial execution over a process pool,
idempotent persistence, and the budget-robustness and failed-individual
comparison suites.
"""

import hashlib
import json
import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from importlib.metadata import PackageNotFoundError, version
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .analysis import TrialMatrix, bsf_at, compare_at, failed_parent_fraction, improvement_rate
from .core import RunRecord
from .engines import run_engine, validate_engine
from .errors import ConfigError, ResultMismatch
from .models import (
    ExperimentPlan,
    FailedIndividualRow,
    LSHADEConfig,
    Manifest,
    ObjectiveSpec,
    RobustnessRow,
    SelectionPolicy,
    TrialEntry,
    TrialSummary,
    UnboundedConfig,
)
from .objectives import Objective

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
RECORDS = "records"
ROBUSTNESS_FACTORS = (0.5, 1.0, 2.0)


def package_version() -> str:
    try:
        return version("unbounded-de")
    except PackageNotFoundError:
        return "0+unknown"


def derive_seed(base_seed: int, *parts) -> int:
    """64-bit seed from the first eight bytes of sha256 over the joined parts."""
    key = "|".join(str(part) for part in (base_seed, *parts))
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")


def slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", label).strip("_")


def trial_id(algorithm: str, problem: str, trial: int) -> str:
    return f"{algorithm}|{problem}|{trial}"


@dataclass
class TrialTask:
    config: object
    spec: ObjectiveSpec
    trial: int
    seed: int
    shift_seed: int

    @property
    def algorithm(self) -> str:
        return self.config.label

    def paths(self, out_dir: str) -> Tuple[str, str]:
        base = os.path.join(out_dir, RECORDS, slug(self.algorithm), slug(self.spec.label), f"trial-{self.trial}")
        return base + ".csv", base + ".json"


def plan_tasks(plan: ExperimentPlan) -> List[TrialTask]:
    base = plan.harness.base_seed
    return [
        TrialTask(
            config=config,
            spec=spec,
            trial=trial,
            seed=derive_seed(base, config.label, spec.label, trial),
            shift_seed=derive_seed(base, spec.label, trial),
        )
        for config in plan.engines
        for spec in plan.problems
        for trial in range(plan.harness.trials)
    ]


def validate_plan(plan: ExperimentPlan) -> None:
    for spec in plan.problems:
        for config in plan.engines:
            validate_engine(config, spec)


def run_trial(task: TrialTask, rng_algorithm: str, checkpoint_divisor: int) -> RunRecord:
    objective = Objective(task.spec, trial_seed=task.shift_seed)
    stride = max(1, task.spec.budget // checkpoint_divisor)
    record = run_engine(task.config, objective, task.seed, algorithm=rng_algorithm, checkpoint_stride=stride)
    record.trial_id = trial_id(task.algorithm, task.spec.label, task.trial)
    return record


def save_record(out_dir: str, task: TrialTask, record: RunRecord, plan_hash: str) -> None:
    csv_path, json_path = task.paths(out_dir)
    os.makedirs(os.path.dirname(csv_path), exist_ok=True)
    frame = record.to_frame()
    frame["plan_hash"] = plan_hash
    _write_atomic(csv_path, frame.to_csv(index=False))
    summary = TrialSummary(
        trial_id=record.trial_id,
        algorithm=task.algorithm,
        problem=task.spec.label,
        trial=task.trial,
        seed=task.seed,
        plan_hash=plan_hash,
        final_best=record.final_best,
        evaluations=record.evaluations,
        failed_parent_updates=record.failed_parent_updates,
        total_bsf_updates=record.total_bsf_updates,
        T_trace=record.T_trace,
    )
    _write_atomic(json_path, summary.model_dump_json())


def _write_atomic(path: str, text: str) -> None:
    partial = path + ".part"
    with open(partial, "w") as f:
        f.write(text)
    os.replace(partial, path)


def _read_summary(json_path: str) -> TrialSummary:
    with open(json_path) as f:
        return TrialSummary.model_validate_json(f.read())


def _read_summary_or_none(json_path: str) -> Optional[TrialSummary]:
    try:
        return _read_summary(json_path)
    except ValidationError as e:
        logger.warning("Unreadable record %s (%s); recomputing it", json_path, e.errors()[0]["type"])
        return None


def is_complete(out_dir: str, task: TrialTask, plan_hash: str) -> bool:
    csv_path, json_path = task.paths(out_dir)
    if not (os.path.exists(csv_path) and os.path.exists(json_path)):
        return False
    summary = _read_summary_or_none(json_path)
    if summary is None:
        return False
    if summary.plan_hash != plan_hash:
        raise ResultMismatch(f"{json_path} was produced by plan {summary.plan_hash[:12]}, not {plan_hash[:12]}")
    return True


def write_manifest(out_dir: str, plan: ExperimentPlan, tasks: List[TrialTask], plan_hash: str) -> None:
    manifest_path = os.path.join(out_dir, MANIFEST)
    if os.path.exists(manifest_path):
        with open(manifest_path) as f:
            previous = json.load(f).get("plan_hash")
        if previous != plan_hash:
            raise ResultMismatch(
                f"{out_dir} holds results of plan {str(previous)[:12]}; refusing to mix with plan {plan_hash[:12]}"
            )
    manifest = Manifest(
        version=package_version(),
        plan_hash=plan_hash,
        plan=plan,
        trials=[
            TrialEntry(
                algorithm=t.algorithm, problem=t.spec.label, trial=t.trial, seed=t.seed, shift_seed=t.shift_seed
            )
            for t in tasks
        ],
    )
    os.makedirs(out_dir, exist_ok=True)
    with open(manifest_path, "w") as f:
        f.write(manifest.model_dump_json(indent=2, exclude={"plan": {"harness": {"workers", "output_dir"}}}))


def run_experiment(plan: ExperimentPlan) -> str:
    """Execute every missing trial of the plan and return the output directory."""
    validate_plan(plan)
    out_dir = plan.harness.output_dir
    plan_hash = plan.plan_hash()
    tasks = plan_tasks(plan)
    write_manifest(out_dir, plan, tasks, plan_hash)

    pending = [task for task in tasks if not is_complete(out_dir, task, plan_hash)]
    logger.info("Plan %s: %d of %d trials to run in %s", plan_hash[:12], len(pending), len(tasks), out_dir)
    if not pending:
        return out_dir

    args = (plan.rng.algorithm, plan.harness.checkpoint_divisor)
    workers = plan.harness.workers
    if workers == 1:
        for done, task in enumerate(pending, start=1):
            save_record(out_dir, task, run_trial(task, *args), plan_hash)
            logger.info("Running trials... %d/%d completed", done, len(pending))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_trial, task, *args): task for task in pending}
            for done, future in enumerate(as_completed(futures), start=1):
                save_record(out_dir, futures[future], future.result(), plan_hash)
                logger.info("Running trials... %d/%d completed", done, len(pending))
    logger.info("Finished running trials")
    return out_dir


def load_manifest(out_dir: str) -> Manifest:
    manifest_path = os.path.join(out_dir, MANIFEST)
    if not os.path.exists(manifest_path):
        raise ConfigError(f"No {MANIFEST} in {out_dir}; run the plan first")
    with open(manifest_path) as f:
        return Manifest.model_validate_json(f.read())


def load_results(out_dir: str) -> TrialMatrix:
    """Read every record listed in the manifest back into a TrialMatrix."""
    manifest = load_manifest(out_dir)
    matrix = TrialMatrix(
        budgets={spec.label: spec.budget for spec in manifest.plan.problems},
        dimensions={spec.label: spec.dimension for spec in manifest.plan.problems},
    )
    for entry in manifest.trials:
        base = os.path.join(out_dir, RECORDS, slug(entry.algorithm), slug(entry.problem), f"trial-{entry.trial}")
        try:
            summary = _read_summary(base + ".json")
            frame = pd.read_csv(base + ".csv")
        except FileNotFoundError as e:
            raise ResultMismatch(f"Missing record for {trial_id(entry.algorithm, entry.problem, entry.trial)}") from e
        except ValidationError as e:
            raise ResultMismatch(f"Unreadable record {base}.json; rerun the plan to recompute it") from e
        if summary.plan_hash != manifest.plan_hash:
            raise ResultMismatch(f"{base}.json belongs to plan {summary.plan_hash[:12]}")
        record = RunRecord(
            trial_id=summary.trial_id,
            seed=summary.seed,
            trajectory=list(zip(frame["eval_count"].astype(int).tolist(), frame["best_so_far"].astype(float).tolist())),
            final_best=summary.final_best,
            evaluations=summary.evaluations,
            failed_parent_updates=summary.failed_parent_updates,
            total_bsf_updates=summary.total_bsf_updates,
            T_trace=summary.T_trace,
        )
        matrix.add(entry.algorithm, entry.problem, record)
    return matrix


def _schedule_factor(config: LSHADEConfig, budget: int) -> float:
    return config.lpsr_target(budget) / budget


def _unbounded_reference(plan: ExperimentPlan, engine: str = "USHADE") -> UnboundedConfig:
    for config in plan.engines:
        if (
            isinstance(config, UnboundedConfig)
            and config.engine == engine
            and config.selection.policy is SelectionPolicy.DPT
        ):
            return config
    raise ConfigError(f"Plan must include {engine} with DPT selection")


def robustness_suite(plan: ExperimentPlan) -> pd.DataFrame:
    """
    Improvement rates over the first half of the budget (from the first
    evaluation to B/2) and over the second half (B/2 to B) for every engine
    and problem, plus each engine's final-value verdict against USHADE(DPT).
    """
    reference = _unbounded_reference(plan)
    for spec in plan.problems:
        factors = {
            round(_schedule_factor(c, spec.budget), 6) for c in plan.engines if isinstance(c, LSHADEConfig)
        }
        missing = [f for f in ROBUSTNESS_FACTORS if f not in factors]
        if missing:
            raise ConfigError(f"Plan lacks LSHADE schedules {missing} (as multiples of the budget) for {spec.label}")

    matrix = load_results(run_experiment(plan))
    rows = []
    for spec in plan.problems:
        budget = spec.budget
        half = budget // 2
        for config in plan.engines:
            records = matrix.cell(config.label, spec.label)
            row = RobustnessRow(
                algorithm=config.label,
                problem=spec.label,
                pre_rate=float(np.median([improvement_rate(r, 1, half) for r in records])),
                post_rate=float(np.median([improvement_rate(r, half, budget) for r in records])),
                median_final=float(np.median([r.final_best for r in records])),
            )
            if config.label != reference.label:
                result = compare_at(matrix, spec.label, config.label, reference.label)
                row.versus_reference, row.p_value = result.verdict, result.p_value
            rows.append(row.model_dump(mode="json"))
    return pd.DataFrame(rows)


def _failed_pair(plan: ExperimentPlan) -> Tuple[UnboundedConfig, UnboundedConfig]:
    unbounded = [c for c in plan.engines if isinstance(c, UnboundedConfig)]
    for kept in unbounded:
        if kept.discard_failed:
            continue
        for discarded in unbounded:
            if discarded.engine == f"{kept.engine}/DF" and discarded.selection.policy is kept.selection.policy:
                return kept, discarded
    raise ConfigError("Plan must include an unbounded engine and its /DF variant with the same selection policy")


def _median_fraction(records: List[RunRecord]) -> Optional[float]:
    fractions = [f for f in (failed_parent_fraction(r) for r in records) if f is not None]
    return float(np.median(fractions)) if fractions else None


def failed_individual_suite(plan: ExperimentPlan) -> pd.DataFrame:
    """Keep-failed versus discard-failed comparison at the budget midpoint and endpoint."""
    kept, discarded = _failed_pair(plan)
    matrix = load_results(run_experiment(plan))
    rows = []
    for spec in plan.problems:
        kept_records = matrix.cell(kept.label, spec.label)
        discarded_records = matrix.cell(discarded.label, spec.label)
        for eval_count in (spec.budget // 2, spec.budget):
            result = compare_at(matrix, spec.label, kept.label, discarded.label, eval_count)
            rows.append(
                FailedIndividualRow(
                    problem=spec.label,
                    eval_count=eval_count,
                    p_value=result.p_value,
                    verdict=result.verdict,
                    median_kept=float(np.median([bsf_at(r, eval_count) for r in kept_records])),
                    median_discarded=float(np.median([bsf_at(r, eval_count) for r in discarded_records])),
                    lineage_kept=_median_fraction(kept_records),
                    lineage_discarded=_median_fraction(discarded_records),
                ).model_dump(mode="json")
            )
    return pd.DataFrame(rows)


def export_tables(tables: Dict[str, pd.DataFrame], out_dir: str) -> List[str]:
    written = []
    for name, frame in tables.items():
        path = os.path.join(out_dir, f"{name}.csv")
        frame.to_csv(path, index=False)
        written.append(path)
    return written
