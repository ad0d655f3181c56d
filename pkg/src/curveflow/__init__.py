"""Lagrangian evolution of closed plane curves under ``beta = -k_ss + b(k)``.

Surface diffusion (``b = 0``) and Willmore flow (``b = -k^3/2``) are
advanced by a semi-implicit flowing finite-volume scheme with asymptotically
uniform tangential redistribution of the grid points.
"""

from .flow_models import FlowModel, eval_b, eval_phi
from .geometry import (
    DegeneratePoints,
    DegenerateSegment,
    DiscreteCurve,
    GeometryError,
    ShapeSpec,
    TooFewPoints,
    area_and_length,
    generate,
    init_from_points,
    isoperimetric_ratio,
    signed_curvature_three_point,
    uniformity_ratio,
)
from .linsolve import (
    CyclicBandedSystem,
    NotConverged,
    SingularMatrix,
    SolverError,
    ZeroDiagonal,
    residual_norm,
    solve_dense,
    solve_gauss_seidel,
)
from .stepper import (
    EvolutionAborted,
    MeshCollapse,
    Snapshot,
    StepDiagnostics,
    StepFailure,
    StepParams,
    assemble_curvature_system,
    assemble_position_system,
    compute_alpha,
    compute_beta,
    evolve,
    step,
    update_eta_r,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
