"""Rescaled mean curvature flow of radial graphs near the round sphere.

Spectral (real spherical harmonic) discretization of normal graphs over
the shrinking sphere, the rescaled and unrescaled flows, their linearization,
mode-cone diagnostics, singularity classification, extinction centering and
arrival-time regularity probes.
"""

from .errors import (
    FitError,
    FlowError,
    GraphError,
    ShapeMismatch,
    SweepError,
    TrajectoryGap,
    UnsupportedDimension,
)
from .harmonics import (
    SpectralField,
    SphereGrid,
    eigenvalue,
    heat_semigroup,
    mode_split,
    q_norm,
    sphere_grid,
    symmetry_projector,
)
from .geometry import (
    RadialGraph,
    SimilarityAction,
    apply_similarity,
    first_order_similarity,
    mean_curvature,
    rescaled_speed,
    solve_rays,
    transplant,
)
from .flow import (
    FlowControls,
    FlowTrajectory,
    PropagatorMatrix,
    adjoint_propagator,
    evolve_mcf,
    evolve_rmcf,
    linear_propagator,
    pde_adjoint,
    propagator_matrix,
    step_rmcf,
)
from .analysis import (
    ConeQuery,
    SingularityReport,
    classify_singularity,
    cone_growth_check,
    cone_membership,
    decay_rate,
    design_perturbation,
)
from .centering import (
    CenteringTransform,
    ExtinctionEvent,
    center_flow,
    centering_map,
    extinction_event,
    recenter_and_compare,
)
from .arrival import ArrivalSamples, ProbeReport, arrival_time, expansion_fit, regularity_probe
from .config import ExperimentConfig, load_config

__version__ = "0.1.0"
