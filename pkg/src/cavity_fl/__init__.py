"""Feedback-linearising cavity-pressure control for a servo-electric injection moulding model."""

from .controller import (
    REFERENCE_GAINS,
    ControlDecision,
    DecouplingError,
    Gains,
    Mapping,
    RouthStatus,
    control_law,
    error_derivatives,
    routh_hurwitz,
    synthetic_input,
)
from .lie import fd_lglf3, fd_lie, lglf3, lie_chain, lie_f, relative_degree_check, verification_report
from .model import ParameterError, PlantParams, SingularityError, derive_q, f_of, g_of, rhs
from .reference import Profile, ProfileError, ProfileKind, ReferenceSample, eval_profile, validate_profile
from .sim import ControlMode, Metrics, SimConfig, SimResult, Status, metrics, rk4_step, simulate
from .tune import TuneConfig, TuneMethod, TuneResult, objective, tune

__version__ = "0.1.0"
