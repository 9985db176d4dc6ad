"""Benchmark problems: planar-arm IK family, robust IK, pusher-slider and obstacle-avoiding cars."""

from .arm import (
    ChanceConstraintSpec,
    PlanarArm,
    arm_com,
    arm_fk,
    ik_problem,
    reach_problem,
    robust_ik_problem,
    whole_body_ik_problem,
)
from .base import ConstrainedProblem, without_projections
from .car import Bicycle, CarModel, car_obstacle_problem, min_clearance, random_scene, scene_rng
from .pusher import PusherSlider, PusherSliderDynamics, push_problem, pusher_slider_dynamics
from .stats import normal_cdf, normal_quantile

__all__ = [
    "Bicycle",
    "CarModel",
    "ChanceConstraintSpec",
    "ConstrainedProblem",
    "PlanarArm",
    "PusherSlider",
    "PusherSliderDynamics",
    "arm_com",
    "arm_fk",
    "car_obstacle_problem",
    "ik_problem",
    "min_clearance",
    "normal_cdf",
    "normal_quantile",
    "push_problem",
    "pusher_slider_dynamics",
    "random_scene",
    "reach_problem",
    "robust_ik_problem",
    "scene_rng",
    "whole_body_ik_problem",
    "without_projections",
]
