"""Weak-measurement feedback simulation and stability checks for n-level systems."""

from .analysis import (
    AssumptionReport,
    EscapeMatrixResult,
    InvariantSetResult,
    InvariantSetSweep,
    check_assumptions,
    common_eigenkets,
    escape_matrix,
    expected_escape_increment,
    invariant_set_slice,
    invariant_set_sweep,
    shifted_controls_independent,
)
from .control import (
    GeneratorTerms,
    closed_loop_generator,
    control_signals,
    directional_gradients,
    lyapunov_floor,
    lyapunov_generator,
    lyapunov_increment,
    lyapunov_value,
    min_lyapunov_at_distance,
)
from .dynamics import (
    TrajectoryRecord,
    WienerPath,
    diffusion,
    drift,
    euler_maruyama_step,
    simulate_trajectory,
)
from .ensemble import (
    EnsembleSummary,
    StabilityBoundReport,
    SupermartingaleResult,
    invariance_probe,
    run_ensemble,
    stability_bound_test,
    supermartingale_test,
)
from .errors import IntegrationError, PreconditionError, ValidationError
from .io import (
    RunParams,
    bundled_fixture,
    dump_definition,
    load_definition,
    to_jsonable,
    write_report_json,
    write_trajectory_csv,
)
from .model import ControlLaw, SystemModel
from .quantum import (
    EquivalenceClass,
    connecting_generator,
    eigenstate_eigenvalue,
    eigh_fixed,
    equivalence_distance,
    expectation_value,
    fidelity,
    normalize,
    orthonormal_completion,
)

__version__ = "0.1.0"

__all__ = [
    "AssumptionReport",
    "ControlLaw",
    "EnsembleSummary",
    "EquivalenceClass",
    "EscapeMatrixResult",
    "GeneratorTerms",
    "IntegrationError",
    "InvariantSetResult",
    "InvariantSetSweep",
    "PreconditionError",
    "RunParams",
    "StabilityBoundReport",
    "SupermartingaleResult",
    "SystemModel",
    "TrajectoryRecord",
    "ValidationError",
    "WienerPath",
    "bundled_fixture",
    "check_assumptions",
    "closed_loop_generator",
    "common_eigenkets",
    "connecting_generator",
    "control_signals",
    "diffusion",
    "directional_gradients",
    "drift",
    "dump_definition",
    "eigenstate_eigenvalue",
    "eigh_fixed",
    "equivalence_distance",
    "escape_matrix",
    "euler_maruyama_step",
    "expectation_value",
    "expected_escape_increment",
    "fidelity",
    "invariance_probe",
    "invariant_set_slice",
    "invariant_set_sweep",
    "load_definition",
    "lyapunov_floor",
    "lyapunov_generator",
    "lyapunov_increment",
    "lyapunov_value",
    "min_lyapunov_at_distance",
    "normalize",
    "orthonormal_completion",
    "run_ensemble",
    "shifted_controls_independent",
    "simulate_trajectory",
    "stability_bound_test",
    "supermartingale_test",
    "to_jsonable",
    "write_report_json",
    "write_trajectory_csv",
]
