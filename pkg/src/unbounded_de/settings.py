"""
Plan loading: YAML file, then UDE_* environment variables, then CLI flags.
"""

import copy
import os
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from .errors import ConfigError
from .models import ExperimentPlan

load_dotenv(override=True)

DEFAULT_PLAN = os.path.join(os.path.dirname(__file__), "config", "experiment.yaml")
DEFAULT_OUTPUT_DIR = "out"
DEFAULT_LOG_LEVEL = "INFO"

ADAPTIVE_ENGINES = {"SHADE", "LSHADE", "USHADE", "USHADE/DF"}
UNBOUNDED_ENGINES = {"UDE", "UDE/DF", "USHADE", "USHADE/DF"}


def log_level() -> str:
    return os.getenv("UDE_LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()


def output_dir() -> str:
    return os.getenv("UDE_OUTPUT_DIR", DEFAULT_OUTPUT_DIR)


def environment_overrides() -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if os.getenv("UDE_OUTPUT_DIR"):
        overrides["output_dir"] = os.getenv("UDE_OUTPUT_DIR")
    if os.getenv("UDE_WORKERS"):
        try:
            overrides["workers"] = int(os.getenv("UDE_WORKERS"))
        except ValueError as e:
            raise ConfigError(f"UDE_WORKERS must be an integer, got {os.getenv('UDE_WORKERS')!r}") from e
    return overrides


def _merged(defaults: Dict[str, Any], entry: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    merged = copy.deepcopy(defaults)
    for key, value in (entry or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merged(merged[key], value)
        else:
            merged[key] = value
    return merged


def _section(raw: Dict[str, Any], name: str) -> Dict[str, Any]:
    value = raw.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"Section {name!r} must be a mapping, got {type(value).__name__}")
    return value


def read_plan_file(path: str) -> Dict[str, Any]:
    try:
        with open(path) as f:
            raw = yaml.safe_load(f) or {}
    except FileNotFoundError as e:
        raise ConfigError(f"Plan file not found: {path}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Plan file {path} is not valid YAML: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"Plan file {path} must contain a mapping at the top level")
    return raw


def build_plan(raw: Dict[str, Any], cli: Optional[Dict[str, Any]] = None) -> ExperimentPlan:
    """
    Expand section defaults into every problem and engine entry and validate.

    `cli` may carry trials, workers, output_dir, base_seed, budget and engine;
    None values are ignored.
    """
    cli = {key: value for key, value in (cli or {}).items() if value is not None}
    objective = _section(raw, "objective")
    selection = _section(raw, "selection")
    adaptation = _section(raw, "adaptation")

    problems = [_merged(objective, entry) for entry in (raw.get("problems") or [{}])]
    if "budget" in cli:
        for problem in problems:
            problem["budget"] = cli["budget"]

    entries = raw.get("engines") or []
    if "engine" in cli:
        wanted = cli["engine"]
        entries = [
            e for e in entries if isinstance(e, dict) and wanted in (e.get("engine"), e.get("name"))
        ] or [{"engine": wanted}]

    engines = []
    for entry in entries:
        if not isinstance(entry, dict) or "engine" not in entry:
            raise ConfigError(f"Every engine entry needs an 'engine' key, got {entry!r}")
        entry = copy.deepcopy(entry)
        if entry["engine"] in UNBOUNDED_ENGINES:
            entry["selection"] = _merged(selection, entry.get("selection"))
        if entry["engine"] in ADAPTIVE_ENGINES:
            entry["adaptation"] = _merged(adaptation, entry.get("adaptation"))
        engines.append(entry)

    harness = _merged(_section(raw, "harness"), environment_overrides())
    for key in ("trials", "workers", "output_dir", "base_seed"):
        if key in cli:
            harness[key] = cli[key]

    try:
        return ExperimentPlan.model_validate(
            {"harness": harness, "rng": _section(raw, "rng"), "problems": problems, "engines": engines}
        )
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment plan: {e}") from e


def load_plan(path: Optional[str] = None, **cli) -> ExperimentPlan:
    return build_plan(read_plan_file(path or DEFAULT_PLAN), cli)
