"""Bayesian recovery of a steady divergence-free flow from noisy point
observations of an advected scalar on the periodic unit square."""

from .errors import (BudgetExceededError, ConfigError, LatticeMismatchError,
                     NumericsError, PriorRejectionError, SolverBlowupError)
from .fields import (FourierScalarField, FourierVelocityField, ModeLattice,
                     load_field_csv, save_field_csv)
from .solver import (EnergyReport, ScalarTrajectory, SingleVelocityPropagator,
                     SolverConfig, energy_report, export_trajectory,
                     load_trajectory, paired_distance_L2, paired_solve, solve)
from .observations import (ICPair, ObservationDesign, ObservationSet,
                           SpanningReport, canonical_ic_pair, check_spanning,
                           forward_map, forward_map_batch,
                           load_observations_csv, run_paired_batch,
                           sample_design, save_observations_csv,
                           synthesize_data)
from .inference import (ChainTrace, ParamMap, Potential, PriorSpec,
                        QuadratureResult, ZeroPotential, load_trace_csv,
                        pcn_chain, quadrature_posterior, sample_prior,
                        sample_prior_field, save_quadrature_json,
                        save_trace_csv)
from .consistency import (ExperimentRecord, compare_records, load_record,
                          rerun, run_experiment, save_record)
from . import presets

__version__ = "0.1.0"

__all__ = [
    "BudgetExceededError", "ConfigError", "LatticeMismatchError",
    "NumericsError", "PriorRejectionError", "SolverBlowupError",
    "FourierScalarField", "FourierVelocityField", "ModeLattice",
    "load_field_csv", "save_field_csv",
    "EnergyReport", "ScalarTrajectory", "SingleVelocityPropagator",
    "SolverConfig", "energy_report", "export_trajectory", "load_trajectory",
    "paired_distance_L2", "paired_solve", "solve",
    "ICPair", "ObservationDesign", "ObservationSet", "SpanningReport",
    "canonical_ic_pair", "check_spanning", "forward_map", "forward_map_batch",
    "load_observations_csv", "run_paired_batch", "sample_design",
    "save_observations_csv", "synthesize_data",
    "ChainTrace", "ParamMap", "Potential", "PriorSpec", "QuadratureResult",
    "ZeroPotential", "load_trace_csv", "pcn_chain", "quadrature_posterior",
    "sample_prior", "sample_prior_field", "save_quadrature_json",
    "save_trace_csv",
    "ExperimentRecord", "compare_records", "load_record", "rerun",
    "run_experiment", "save_record",
    "presets",
]
