"""Combinations of LMS adaptive filters with cyclic coefficients feedback.

Simulation of two-filter combinations (independent, leakage, handover and
cyclic feedback topologies), steady-state and transient performance
models, and a Monte Carlo harness to compare the two.
"""
from .combinations import (CYCLIC_FEEDBACK, HANDOVER, INDEPENDENT, LEAKAGE, CombinationState,
                           DivergenceError, Topology, combination_step, combine_output,
                           net_step_size)
from .config import (BaselineSpec, CombinationSpec, ExperimentConfig, SupervisorSpec,
                     load_config, parse_config, save_config)
from .filters import FilterState, VssLmsState, lms_predict, lms_update, vss_lms_step
from .harness import (ExperimentFailure, MetricsTable, TheoryTable, compare, db,
                      estimate_steady_state, run_ensemble, run_theory)
from .scenario import BatchStream, ConfigError, ScenarioConfig, generate_stream
from .supervisors import Activation, Normalization, SupervisorState, supervisor_update
from .theory import (optimal_eta, optimal_eta_from_emse, run_transient, steady_state_emse,
                     transient_init, transient_step, transient_step_white, white_transient_init)

__version__ = "0.1.0"
