"""HJB equations on closed surfaces, solved on Cartesian narrow bands."""

__version__ = "0.1.0"

from .band import (
    CartesianGrid,
    NarrowBand,
    build_band,
    build_ghost_closures,
    covering_grid,
    discretize_target,
    refresh_ghosts,
    unit_cube_grid,
)
from .geometry import (
    AnalyticProvider,
    ClosestPointRecord,
    Sphere,
    Torus,
    b_tensor,
    closest_point,
    projection_jacobian,
)
from .hamiltonian import (
    ControlDisc,
    CostModel,
    CurvatureAniso,
    HamiltonianModel,
    Isotropic,
    hamiltonian_value,
    normal_curvature,
    speed,
)
from .metrics import ErrorReport, convergence_table, l1_band_error, linf_surface_error, sphere_exact_distance
from .paths import PathConfig, SurfacePath, belt_sort, trace_anisotropic, trace_isotropic
from .pointcloud import CloudProvider, LocalPatch, PointCloud, cp_field_from_cloud, fit_local_patch, newton_closest_point
from .solver_sweep import SolutionField, SweepConfig, lf_node_update, residual, sweep_solve
from .solver_weno import TimeMarchConfig, steady_state_solve, weno3_gradient

__all__ = [
    "AnalyticProvider", "CartesianGrid", "ClosestPointRecord", "CloudProvider",
    "ControlDisc", "CostModel", "CurvatureAniso", "ErrorReport", "HamiltonianModel",
    "Isotropic", "LocalPatch", "NarrowBand", "PathConfig", "PointCloud",
    "SolutionField", "Sphere", "SurfacePath", "SweepConfig", "TimeMarchConfig",
    "Torus", "b_tensor", "belt_sort", "build_band", "build_ghost_closures",
    "closest_point", "convergence_table", "covering_grid", "cp_field_from_cloud",
    "discretize_target", "fit_local_patch", "hamiltonian_value", "l1_band_error",
    "lf_node_update", "linf_surface_error", "newton_closest_point", "normal_curvature",
    "projection_jacobian", "refresh_ghosts", "residual", "speed",
    "sphere_exact_distance", "steady_state_solve", "sweep_solve", "trace_anisotropic",
    "trace_isotropic", "unit_cube_grid", "weno3_gradient",
]
