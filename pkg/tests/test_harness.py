import json
import os

import numpy as np
import pytest
import yaml
from typer.testing import CliRunner

from unbounded_de.analysis import improvement_rate
from unbounded_de.errors import ConfigError, ResultMismatch
from unbounded_de.harness import (
    MANIFEST,
    derive_seed,
    failed_individual_suite,
    load_results,
    plan_tasks,
    robustness_suite,
    run_experiment,
)
from unbounded_de.main import app
from unbounded_de.models import ExperimentPlan, Verdict
from unbounded_de.settings import build_plan, load_plan, read_plan_file

SMALL_PLAN = {
    "harness": {"trials": 3, "base_seed": 42, "checkpoint_divisor": 20},
    "objective": {"dimension": 5, "budget": 1000},
    "problems": [{"function": "sphere"}, {"function": "rastrigin"}],
    "selection": {"policy": "DPT"},
    "engines": [{"engine": "DE", "population_size": 20}, {"engine": "UDE", "gensize": 30}],
}


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in ("UDE_OUTPUT_DIR", "UDE_WORKERS", "UDE_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


def small_plan(out_dir, **harness) -> ExperimentPlan:
    raw = json.loads(json.dumps(SMALL_PLAN))
    raw["harness"].update(output_dir=str(out_dir), **harness)
    return build_plan(raw)


def record_files(out_dir):
    found = []
    for root, _, files in os.walk(os.path.join(out_dir, "records")):
        found.extend(os.path.join(root, name) for name in files)
    return sorted(found)


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


@pytest.mark.integration
class TestRunExperiment:
    def test_writes_one_record_per_trial_and_a_manifest(self, tmp_path):
        out_dir = run_experiment(small_plan(tmp_path))
        files = record_files(out_dir)
        assert len([f for f in files if f.endswith(".csv")]) == 12
        assert len([f for f in files if f.endswith(".json")]) == 12
        with open(os.path.join(out_dir, MANIFEST)) as f:
            manifest = json.load(f)
        assert len(manifest["trials"]) == 12
        assert manifest["quantile_method"] == "linear"
        assert "workers" not in manifest["plan"]["harness"]

    def test_rerun_recomputes_only_missing_records(self, tmp_path):
        plan = small_plan(tmp_path)
        run_experiment(plan)
        files = record_files(tmp_path)
        missing_csv = [f for f in files if f.endswith("trial-1.csv")][0]
        pair = (missing_csv, missing_csv[: -len(".csv")] + ".json")
        stamps = {f: os.stat(f).st_mtime_ns for f in files if f not in pair}
        originals = {f: read_bytes(f) for f in pair}
        os.remove(missing_csv)
        run_experiment(plan)
        assert {f: read_bytes(f) for f in pair} == originals
        assert all(os.stat(f).st_mtime_ns == stamp for f, stamp in stamps.items())

    @pytest.mark.parametrize("damage", ["", '{"trial_id": "DE|sphere-5D|0", "algo'])
    def test_rerun_recovers_a_damaged_summary(self, tmp_path, damage):
        plan = small_plan(tmp_path)
        run_experiment(plan)
        damaged = [f for f in record_files(tmp_path) if f.endswith("trial-0.json")][0]
        original = read_bytes(damaged)
        with open(damaged, "w") as f:
            f.write(damage)
        with pytest.raises(ResultMismatch):
            load_results(str(tmp_path))
        run_experiment(plan)
        assert read_bytes(damaged) == original
        assert not any(f.endswith(".part") for f in record_files(tmp_path))
        assert len(load_results(str(tmp_path)).cell("DE", "sphere-5D")) == 3

    def test_stored_T_trace_is_bounded_by_the_checkpoint_stride(self, tmp_path):
        plan = build_plan(
            {
                "harness": {"trials": 2, "base_seed": 5, "checkpoint_divisor": 20, "output_dir": str(tmp_path)},
                "objective": {"dimension": 5, "budget": 2000},
                "problems": [{"function": "sphere"}],
                "engines": [{"engine": "USHADE", "selection": {"policy": "T"}}],
            }
        )
        matrix = load_results(run_experiment(plan))
        (algorithm,) = matrix.algorithms
        for record in matrix.cell(algorithm, "sphere-5D"):
            assert 0 < len(record.T_trace) <= 2000 // 100 + 1
            assert record.T_trace[-1][0] == 2000

    def test_outputs_are_byte_identical_across_runs_and_worker_counts(self, tmp_path):
        serial = run_experiment(small_plan(tmp_path / "serial"))
        parallel = run_experiment(small_plan(tmp_path / "parallel", workers=2))
        serial_files = record_files(serial)
        parallel_files = record_files(parallel)
        assert [os.path.relpath(f, serial) for f in serial_files] == [
            os.path.relpath(f, parallel) for f in parallel_files
        ]
        for a, b in zip(serial_files, parallel_files):
            with open(a, "rb") as fa, open(b, "rb") as fb:
                assert fa.read() == fb.read()

    def test_refuses_to_mix_plans(self, tmp_path):
        run_experiment(small_plan(tmp_path))
        with pytest.raises(ResultMismatch):
            run_experiment(small_plan(tmp_path, base_seed=43))

    def test_workers_and_output_dir_do_not_change_the_hash(self, tmp_path):
        assert small_plan(tmp_path / "a").plan_hash() == small_plan(tmp_path / "b", workers=4).plan_hash()

    def test_load_results(self, tmp_path):
        matrix = load_results(run_experiment(small_plan(tmp_path)))
        assert matrix.algorithms == ["DE", "UDE(DPT)"]
        assert matrix.problems == ["sphere-5D", "rastrigin-5D"]
        assert matrix.budgets == {"sphere-5D": 1000, "rastrigin-5D": 1000}
        cell = matrix.cell("UDE(DPT)", "sphere-5D")
        assert len(cell) == 3
        assert all(r.evaluations == 1000 and r.trajectory[-1] == (1000, r.final_best) for r in cell)

    def test_load_results_reports_missing_records(self, tmp_path):
        run_experiment(small_plan(tmp_path))
        os.remove([f for f in record_files(tmp_path) if f.endswith(".json")][0])
        with pytest.raises(ResultMismatch):
            load_results(str(tmp_path))

    def test_load_results_without_manifest(self, tmp_path):
        with pytest.raises(ConfigError):
            load_results(str(tmp_path))


@pytest.mark.unit
class TestSeeds:
    def test_seeds_are_unique_per_cell(self, tmp_path):
        tasks = plan_tasks(small_plan(tmp_path))
        assert len({t.seed for t in tasks}) == len(tasks)

    def test_algorithms_share_the_problem_instance(self, tmp_path):
        tasks = plan_tasks(small_plan(tmp_path))
        by_cell = {(t.spec.label, t.trial): set() for t in tasks}
        for t in tasks:
            by_cell[(t.spec.label, t.trial)].add(t.shift_seed)
        assert all(len(seeds) == 1 for seeds in by_cell.values())

    def test_derive_seed_is_stable(self):
        assert derive_seed(1, "DE", "sphere-5D", 0) == derive_seed(1, "DE", "sphere-5D", 0)
        assert derive_seed(1, "DE", "sphere-5D", 0) != derive_seed(2, "DE", "sphere-5D", 0)
        assert 0 <= derive_seed(0, "x") < 2**64


def robustness_plan(out_dir, factors=(0.5, 1.0, 2.0), with_reference=True):
    engines = [{"engine": "LSHADE", "schedule_factor": f} for f in factors]
    if with_reference:
        engines.append({"engine": "USHADE", "gensize": 30})
    return build_plan(
        {
            "harness": {"trials": 2, "base_seed": 5, "output_dir": str(out_dir)},
            "objective": {"dimension": 5, "budget": 2000},
            "problems": [{"function": "rastrigin"}],
            "engines": engines,
        }
    )


@pytest.mark.integration
class TestSuites:
    def test_robustness_table(self, tmp_path):
        table = robustness_suite(robustness_plan(tmp_path))
        assert len(table) == 4
        assert set(table["algorithm"]) == {"LSHADE(half)", "LSHADE", "LSHADE(double)", "USHADE(DPT)"}
        reference = table[table.algorithm == "USHADE(DPT)"].iloc[0]
        assert reference.versus_reference is None
        others = table[table.algorithm != "USHADE(DPT)"]
        assert set(others.versus_reference) <= {v.value for v in Verdict}
        assert (table.pre_rate >= 0).all() and (table.post_rate >= 0).all()

    def test_robustness_rates_cover_each_half_of_the_budget(self, tmp_path):
        plan = robustness_plan(tmp_path)
        table = robustness_suite(plan).set_index("algorithm")
        matrix = load_results(str(tmp_path))
        for algorithm in table.index:
            records = matrix.cell(algorithm, "rastrigin-5D")
            assert table.loc[algorithm, "pre_rate"] == pytest.approx(
                np.median([improvement_rate(r, 1, 1000) for r in records])
            )
            assert table.loc[algorithm, "post_rate"] == pytest.approx(
                np.median([improvement_rate(r, 1000, 2000) for r in records])
            )

    @pytest.mark.parametrize("factors,with_reference", [((0.5, 1.0, 2.0), False), ((1.0, 2.0), True)])
    def test_robustness_needs_full_plan(self, tmp_path, factors, with_reference):
        with pytest.raises(ConfigError):
            robustness_suite(robustness_plan(tmp_path, factors, with_reference))

    def test_failed_individual_table(self, tmp_path):
        plan = build_plan(
            {
                "harness": {"trials": 3, "base_seed": 6, "output_dir": str(tmp_path)},
                "objective": {"dimension": 5, "budget": 1500},
                "problems": [{"function": "ackley"}],
                "engines": [{"engine": "UDE", "gensize": 30}, {"engine": "UDE/DF", "gensize": 30}],
            }
        )
        table = failed_individual_suite(plan)
        assert table["eval_count"].tolist() == [750, 1500]
        assert table["lineage_discarded"].isna().all() or (table["lineage_discarded"] == 0).all()

    def test_failed_individual_needs_pair(self, tmp_path):
        plan = build_plan(
            {
                "harness": {"output_dir": str(tmp_path)},
                "objective": {"dimension": 5, "budget": 1000},
                "problems": [{"function": "sphere"}],
                "engines": [{"engine": "UDE", "gensize": 30}],
            }
        )
        with pytest.raises(ConfigError):
            failed_individual_suite(plan)


@pytest.mark.unit
class TestSettings:
    def test_packaged_plan(self):
        plan = load_plan()
        assert plan.harness.trials == 51
        assert len(plan.problems) == 8
        assert all(p.budget == 200_000 and p.dimension == 10 for p in plan.problems)
        assert [e.label for e in plan.engines] == ["DE", "SHADE", "LSHADE", "UDE(DPT)", "USHADE(DPT)", "USHADE/DF(DPT)"]

    def test_precedence_file_then_environment_then_flags(self, tmp_path, monkeypatch):
        path = write_yaml(tmp_path / "plan.yaml", {**SMALL_PLAN, "harness": {"trials": 5, "workers": 1}})
        monkeypatch.setenv("UDE_WORKERS", "3")
        monkeypatch.setenv("UDE_OUTPUT_DIR", str(tmp_path / "env"))
        plan = load_plan(path)
        assert (plan.harness.trials, plan.harness.workers, plan.harness.output_dir) == (5, 3, str(tmp_path / "env"))
        plan = load_plan(path, trials=2, workers=1, output_dir="cli", base_seed=9, budget=400)
        assert (plan.harness.trials, plan.harness.workers, plan.harness.output_dir) == (2, 1, "cli")
        assert plan.harness.base_seed == 9
        assert all(p.budget == 400 for p in plan.problems)

    def test_engine_flag_filters_or_adds(self, tmp_path):
        path = write_yaml(tmp_path / "plan.yaml", SMALL_PLAN)
        assert [e.label for e in load_plan(path, engine="DE").engines] == ["DE"]
        plan = load_plan(path, engine="USHADE/DF")
        assert [e.label for e in plan.engines] == ["USHADE/DF(DPT)"]

    def test_section_defaults_reach_every_entry(self):
        raw = {
            "objective": {"dimension": 20, "budget": 500},
            "problems": [{"function": "sphere"}, {"function": "ackley", "dimension": 30}],
            "selection": {"policy": "T"},
            "adaptation": {"sigma_T": 5.0},
            "engines": [{"engine": "USHADE"}, {"engine": "SHADE", "adaptation": {"H": 3}}],
        }
        plan = build_plan(raw)
        assert [p.dimension for p in plan.problems] == [20, 30]
        ushade, shade = plan.engines
        assert ushade.selection.policy.value == "T"
        assert ushade.adaptation.sigma_T == 5.0
        assert (shade.adaptation.H, shade.adaptation.sigma_T) == (3, 5.0)

    def test_invalid_values(self, tmp_path, monkeypatch):
        with pytest.raises(ConfigError):
            build_plan({**SMALL_PLAN, "engines": [{"engine": "GA"}]})
        with pytest.raises(ConfigError):
            build_plan({**SMALL_PLAN, "engines": [{"population_size": 10}]})
        with pytest.raises(ConfigError):
            build_plan({**SMALL_PLAN, "engines": [{"engine": "DE"}, {"engine": "DE"}]})
        monkeypatch.setenv("UDE_WORKERS", "many")
        with pytest.raises(ConfigError):
            build_plan(SMALL_PLAN)

    def test_unreadable_files(self, tmp_path):
        with pytest.raises(ConfigError):
            read_plan_file(str(tmp_path / "missing.yaml"))
        broken = tmp_path / "broken.yaml"
        broken.write_text("engines: [DE\n")
        with pytest.raises(ConfigError):
            read_plan_file(str(broken))
        scalar = tmp_path / "scalar.yaml"
        scalar.write_text("42\n")
        with pytest.raises(ConfigError):
            read_plan_file(str(scalar))


@pytest.mark.integration
class TestCli:
    def test_run_analyze_and_targets(self, tmp_path):
        runner = CliRunner()
        path = write_yaml(tmp_path / "plan.yaml", SMALL_PLAN)
        out = str(tmp_path / "out")
        result = runner.invoke(app, ["run", "--config", path, "--out", out, "--trials", "2"])
        assert result.exit_code == 0, result.output
        result = runner.invoke(app, ["analyze", "--out", out, "--at", "0.5", "--points", "20"])
        assert result.exit_code == 0, result.output
        for name in ("ecdf", "ecdf_suite", "wilcoxon", "lineage"):
            assert os.path.exists(os.path.join(out, f"{name}.csv"))
        result = runner.invoke(app, ["targets", "--out", out])
        assert result.exit_code == 0
        assert "sphere-5D" in result.output

    def test_config_error_exit_code(self, tmp_path):
        broken = tmp_path / "broken.yaml"
        broken.write_text("engines: [DE\n")
        result = CliRunner().invoke(app, ["run", "--config", str(broken), "--out", str(tmp_path / "out")])
        assert result.exit_code == 2

    def test_result_mismatch_exit_code(self, tmp_path):
        runner = CliRunner()
        path = write_yaml(tmp_path / "plan.yaml", SMALL_PLAN)
        out = str(tmp_path / "out")
        assert runner.invoke(app, ["run", "--config", path, "--out", out, "--trials", "1"]).exit_code == 0
        result = runner.invoke(app, ["run", "--config", path, "--out", out, "--trials", "1", "--seed", "1"])
        assert result.exit_code == 3

    def test_analyze_without_results(self, tmp_path):
        assert CliRunner().invoke(app, ["analyze", "--out", str(tmp_path)]).exit_code == 2
