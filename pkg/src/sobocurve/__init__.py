"""Geodesics, distances and shape distances between closed curves under Sobolev metrics."""

from .curves import (
    Diffeo,
    DiscreteCurve,
    ImmersionError,
    act,
    arc_derivative,
    as_curve,
    binomial_sum,
    circle,
    constant_speed_reparam,
    ellipse,
    length,
    norm,
    periodic_interpolate,
    speed,
    theta_derivative,
    unit_tangent,
    winding_number,
)
from .geodesics import (
    ComponentMismatchError,
    CurvePath,
    GeodesicFlow,
    GeodesicResult,
    VelocityRecoveryError,
    distance,
    exp_map,
    integrate_geodesic,
    log_map,
    path_energy,
    path_length,
    solve_bvp,
)
from .metrics import (
    MetricSpec,
    curvature,
    metric_gradient,
    metric_inner,
    metric_inner_variation,
    metric_matrix,
    momentum,
    variation_arc_derivative,
    variation_speed,
)
from .shape_space import ShapeDistanceResult, midpoint_check, shape_distance

__version__ = "0.1.0"
