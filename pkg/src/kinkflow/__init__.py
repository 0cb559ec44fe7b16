"""Two-phase elastic curves: diffuse energies, constrained gradient flow,
near-limit recovery constructions and limit-convergence experiments."""

from .model import (
    CurvatureSpec,
    EnergyBreakdown,
    FieldState,
    Grid,
    Junction,
    ModelParams,
    PotentialSpec,
    QUARTIC_DOUBLE_WELL,
    SINGLE_WELL,
    Segment,
    SharpState,
    closure_defect,
    energy_in_window,
    interface_cost,
    jump_magnitude,
    kink_cost,
    phase_field_energy,
    potential_eval,
    reconstruct_curve,
    sharp_energy,
    spontaneous_curvature,
)
from .flow import (
    FlowParams,
    FlowResult,
    angle_gradient,
    phase_gradient,
    project_closure,
    run_flow,
    step_flow,
)
from .recovery import (
    KinkPatch,
    ProfileTable,
    TransitionRamp,
    build_recovery,
    build_recovery_with_patches,
    correct_closure,
    correct_volume,
    kink_half_width,
    optimal_profile,
    transition_ramp,
)
from .analysis import (
    DetectionThresholds,
    GridPolicy,
    SweepTable,
    detect_interfaces,
    detect_kinks,
    extract_sharp,
    gamma_sweep,
    segment_stats,
)

__version__ = "0.1.0"
