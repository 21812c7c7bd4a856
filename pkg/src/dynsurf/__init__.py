"""dynsurf: time-varying B-spline surfaces from sparse scattered station data.

The library reconstructs a smooth trivariate B-spline M(u, v, t) that
exactly interpolates sparse, non-uniformly scattered time-series samples
while approximating a kriging-densified grid. The stages are:

1. simplify the region border to a polygon of comparable size (`border`),
2. triangulate stations plus border and parametrize into the unit square
   (`triangulation`, `meshparam`),
3. merge near-duplicate parameters under an orientation guard (`meshparam`),
4. densify onto the parameter grid with ordinary kriging (`kriging`),
5. fit the volume by three levels of key-constrained curve fits (`keyfit`).

`pipeline` wires the stages behind a batch CLI (`dynsurf.cli`).
"""

from .bspline import (
    BSplineCurve,
    BSplineVolume,
    KnotVector,
    averaging_knots,
    basis_funs,
    eval_curve,
    eval_volume,
    find_span,
    insert_knot,
)
from .border import CornerParams, Polyline, detect_corners, simplify_border
from .errors import (
    ConfigError,
    DomainError,
    DynsurfError,
    FeasibilityError,
    GeometryError,
    InputError,
    NumericalError,
    ParametrizationError,
    RefinementError,
    TopologyError,
)
from .keyfit import FitRow, KeyCurveFit, fit_key_curve, fit_volume, propagate_keys, refine_knots_for_keys
from .kriging import (
    GriddedDataset,
    VariogramModel,
    build_grid,
    empirical_semivariogram,
    fit_variogram,
    krige,
)
from .meshparam import (
    ParamAssignment,
    ParamGrid,
    mean_value_param,
    merge_params,
    orientation_sign,
    perturbation_loop,
)
from .pipeline import PipelineConfig, RunReport, extract_iso_u_curve, ingest, run_pipeline, sample_surface
from .triangulation import TriangleMesh, constrained_delaunay

__all__ = [
    "BSplineCurve",
    "BSplineVolume",
    "KnotVector",
    "averaging_knots",
    "basis_funs",
    "eval_curve",
    "eval_volume",
    "find_span",
    "insert_knot",
    "CornerParams",
    "Polyline",
    "detect_corners",
    "simplify_border",
    "TriangleMesh",
    "constrained_delaunay",
    "ParamAssignment",
    "ParamGrid",
    "mean_value_param",
    "merge_params",
    "orientation_sign",
    "perturbation_loop",
    "VariogramModel",
    "GriddedDataset",
    "empirical_semivariogram",
    "fit_variogram",
    "krige",
    "build_grid",
    "FitRow",
    "KeyCurveFit",
    "refine_knots_for_keys",
    "fit_key_curve",
    "propagate_keys",
    "fit_volume",
    "PipelineConfig",
    "RunReport",
    "ingest",
    "run_pipeline",
    "sample_surface",
    "extract_iso_u_curve",
    "DynsurfError",
    "DomainError",
    "GeometryError",
    "InputError",
    "ConfigError",
    "TopologyError",
    "FeasibilityError",
    "ParametrizationError",
    "NumericalError",
    "RefinementError",
]
