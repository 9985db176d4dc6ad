"""Augmented Lagrangian spectral projected gradient solver built on Euclidean projections."""

from .auglag import AlspgConfig, AlspgResult, ConstraintBlock, al_gradient, al_value, alspg_solve, distance_block
from .geometry import (
    AffineSlabSet,
    BernsteinCurve2D,
    BoxSet,
    ConvexPolygon2D,
    GeometryError,
    MinkowskiObstacle2D,
    ProductSet,
    ProjectableSet,
    QuadricAnnulusSet,
    ReplicatedSet,
    SecondOrderConeSet,
    SingletonSet,
    WholeSpace,
    c_obstacle,
    minkowski_sum,
)
from .ocp import ShootingProblem, adjoint_vjp, ilqr_baseline, rollout, solve_ocp
from .spg import LineSearchConfig, ObjectiveOracle, SpgConfig, SpgResult, spg_minimize

__version__ = "0.1.0"

__all__ = [
    "AffineSlabSet",
    "AlspgConfig",
    "AlspgResult",
    "BernsteinCurve2D",
    "BoxSet",
    "ConstraintBlock",
    "ConvexPolygon2D",
    "GeometryError",
    "LineSearchConfig",
    "MinkowskiObstacle2D",
    "ObjectiveOracle",
    "ProductSet",
    "ProjectableSet",
    "QuadricAnnulusSet",
    "ReplicatedSet",
    "SecondOrderConeSet",
    "ShootingProblem",
    "SingletonSet",
    "SpgConfig",
    "SpgResult",
    "WholeSpace",
    "adjoint_vjp",
    "al_gradient",
    "al_value",
    "alspg_solve",
    "c_obstacle",
    "distance_block",
    "ilqr_baseline",
    "minkowski_sum",
    "rollout",
    "solve_ocp",
    "spg_minimize",
]
