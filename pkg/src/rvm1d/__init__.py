"""Relativistic Vlasov-Maxwell system in 1.5D on (0, 1) with a confining external field."""
from .characteristics import ConfinementError, FieldSampler, PhasePoint, confinement_bound, trace
from .core import (
    AllowanceSpec,
    BoundaryDataSpec,
    ConfigError,
    ExternalPotential,
    InitialDataSpec,
    OutputSpec,
    PhaseSpaceGrid,
    SimConfig,
    config_from_dict,
    config_to_dict,
    load_config,
    validate_config,
)
from .diagnostics import TheoreticalConstants, check_all, theoretical_constants
from .driver import (
    BoundViolation,
    PicardDivergence,
    SimulationRun,
    run,
    run_picard,
    run_time_marching,
)
from .fields import FieldState, solve_e2_b_direct, step_fields
from .profiles import PlasmaProfile, Profile
from .vlasov import DistributionState, advance_f, moments

__version__ = "0.1.0"
