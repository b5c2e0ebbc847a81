"""
Desk-scale reproductions of the headline comparisons. Each runs for several
minutes; select them with `pytest -m slow`.
"""

import os

import numpy as np
import pytest

from unbounded_de.analysis import failed_parent_fraction, win_tie_loss
from unbounded_de.harness import load_results, robustness_suite, run_experiment
from unbounded_de.models import Verdict
from unbounded_de.settings import build_plan, load_plan

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "config")
WORKERS = os.cpu_count() or 1

pytestmark = [pytest.mark.regression, pytest.mark.slow]


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in ("UDE_OUTPUT_DIR", "UDE_WORKERS"):
        monkeypatch.delenv(name, raising=False)


def plan_file(name, out_dir):
    return load_plan(os.path.join(CONFIG_DIR, name), output_dir=str(out_dir), workers=WORKERS)


def test_ude_beats_baseline_de(tmp_path):
    matrix = load_results(run_experiment(plan_file("ude_vs_de.yaml", tmp_path)))
    tally = win_tie_loss(matrix, "UDE(DPT)", "DE")
    assert tally.wins >= 2
    assert tally.losses == 0


def test_half_schedule_stagnates_while_ushade_keeps_up(tmp_path):
    table = robustness_suite(plan_file("robustness.yaml", tmp_path)).set_index("algorithm")
    half = table.loc["LSHADE(half)"]
    assert half.post_rate < 0.25 * half.pre_rate
    assert half.versus_reference != Verdict.A_BETTER.value


def test_failed_parent_fraction_order_of_magnitude(tmp_path):
    plan = build_plan(
        {
            "harness": {"trials": 15, "base_seed": 17, "workers": WORKERS, "output_dir": str(tmp_path)},
            "objective": {"dimension": 10, "budget": 100_000},
            "problems": [{"function": "rastrigin"}, {"function": "ackley"}],
            "engines": [{"engine": "USHADE", "selection": {"policy": "DPT"}}],
        }
    )
    matrix = load_results(run_experiment(plan))
    for problem in matrix.problems:
        fractions = [failed_parent_fraction(r) for r in matrix.cell("USHADE(DPT)", problem)]
        assert 0.05 <= np.median([f for f in fractions if f is not None]) <= 0.6


def test_ushade_converges_on_sphere(tmp_path):
    plan = build_plan(
        {
            "harness": {"trials": 25, "base_seed": 19, "workers": WORKERS, "output_dir": str(tmp_path)},
            "objective": {"dimension": 10, "budget": 50_000},
            "problems": [{"function": "sphere"}],
            "engines": [{"engine": "USHADE", "selection": {"policy": "DPT"}}],
        }
    )
    finals = load_results(run_experiment(plan)).finals("USHADE(DPT)", "sphere-10D")
    assert sum(value < 1e-8 for value in finals) >= 24
