"""Choquet-integral composite endpoint analysis with a trial simulator and sweep harness."""

__version__ = "0.1.0"

from .capacity import (  # noqa: E402
    FuzzyMeasure, MeasureSpec, build_measure, capacity_of, choquet, choquet_scores,
    default_measure, shapley_values,
)
from .encoding import EncodingConfig, encode_cohort  # noqa: E402
from .inference import CbiResult, cbi, cbi_test, shapley_attribution  # noqa: E402
from .records import Cohort, PatientRecord, read_csv, write_csv  # noqa: E402
from .simulator import ScenarioSpec, SimConfig, scenario_registry, simulate_trial  # noqa: E402

__all__ = [
    "CbiResult", "Cohort", "EncodingConfig", "FuzzyMeasure", "MeasureSpec", "PatientRecord",
    "ScenarioSpec", "SimConfig", "build_measure", "capacity_of", "cbi", "cbi_test", "choquet",
    "choquet_scores", "default_measure", "encode_cohort", "read_csv", "scenario_registry",
    "shapley_attribution", "shapley_values", "simulate_trial", "write_csv",
]
