"""Data-driven KKL observers for measure-preserving discrete-time systems.

The package synthesizes Kazantzis-Kravaris/Luenberger observers purely from
trajectory data: the observer's linear filter is fixed in a stable cascade
form, the injection map is estimated from backward histories, a single long
orbit, or snapshot pairs, and its pseudo-inverse is learned by kernel ridge
regression.
"""

from .dynamics import (
    DiscreteSystem,
    DivergenceError,
    LongOrbit,
    OrbitSet,
    SnapshotSet,
    circle_rotation,
    discretize,
    generate_long_orbit,
    generate_orbit_set,
    generate_snapshots,
    limit_cycle_system,
    lorenz_system,
    trajectory,
)
from .kernels import (
    GaussianKernel,
    MaternKernel,
    RadialKernel,
    WendlandKernel,
    gram,
    kernel_from_spec,
    wendland_profile,
)
from .observer import (
    DeepKKLParams,
    ObserverMatrices,
    analytic_injection,
    analytic_pseudo_inverse,
    build_matrices,
    run_observer,
    series_weights,
    truncated_injection,
    truncation_bound,
)
from .pipelines import (
    EvaluationReport,
    SynthesisConfig,
    algorithm1,
    algorithm2,
    algorithm3,
    evaluate_observer,
)
from .regression import (
    ConditioningError,
    InterpolantModel,
    PseudoInverseModel,
    cross_validate,
    fill_distance,
    grid_search,
    kernel_interpolate,
    krr_fit,
)
from .spectral import (
    SnapshotMatrices,
    SpectralModel,
    build_snapshot_matrices,
    candidate_grid,
    decompose_kernel_section,
    fit_spectral_model,
    solve_candidate,
    spectral_injection,
)

__version__ = "0.1.0"
