"""Naive T-cell repertoire aging simulated two ways: a deterministic stock-flow
(system dynamics) engine and a stochastic agent-based engine, validated against
age-binned TREC data."""

from .agents import AbsConfig, AgentPopulation, EnsembleStats, run_abs, step_abs
from .model import (
    ActivesTable,
    ModelParams,
    StateVector,
    death_modifier,
    derivatives,
    dilution_modifier,
    export_modifier,
    proliferation_rate_from_table1,
    thymic_export_rate,
)
from .scenarios import ScenarioSpec, parse_config, preset_params
from .sd import SdConfig, Trajectory, rk4_step, run_sd
from .validation import TREC_DATA, FitReport, dataset_to_percentage, qualitative_checks, sse

__version__ = "0.1.0"
