"""Scenario configs, sweep runner, figure regeneration and the command-line interface."""

from .config import ConfigError, Scenario, load_config, parse_config
from .figures import FIGURES, reproduce_figure
from .runner import CSV_COLUMNS, ResultRow, ScenarioAborted, format_csv, run_scenario

__all__ = [
    "CSV_COLUMNS",
    "ConfigError",
    "FIGURES",
    "ResultRow",
    "Scenario",
    "ScenarioAborted",
    "format_csv",
    "load_config",
    "parse_config",
    "reproduce_figure",
    "run_scenario",
]
