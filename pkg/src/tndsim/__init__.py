"""Simulation and estimation toolkit for test-negative design (TND)
vaccine-effectiveness studies."""

from .diagnostic import (
    ConfusionTable,
    DiagnosticTest,
    apply_test,
    correct_observed_rate,
    fp_exceeds_tp_prevalence,
    observed_positive_rate,
    raw_corrected_rate,
)
from .errors import (
    ConfigError,
    DegenerateTestError,
    EmptyControlGroupError,
    InvalidInputError,
    NonInvertibleTestError,
    NoValidReplicatesError,
    TNDError,
    UndefinedEstimateError,
)
from .estimators import (
    ObservedCounts,
    VEEstimate,
    estimate,
    estimate_all,
    select_control,
    ve_corrected,
    ve_odds_ratio,
    ve_pipeline_with_misclassification,
    ve_risk_ratio,
)
from .population import (
    LatentPopulation,
    StudyTable,
    assumption_gap,
    build_study_table,
    validate_table,
)
from .simulate import (
    Axis,
    Scenario,
    SweepSpec,
    derive_seed,
    find_sign_boundary,
    monte_carlo,
    run_scenario,
    run_sweep,
)

__version__ = "0.1.0"
