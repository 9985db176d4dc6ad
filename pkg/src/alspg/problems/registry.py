"""String ids for benchmark problems, usable from scenario files and the CLI.

A builder takes typed parameters, named shapes and a seed and returns an
:class:`Instance`.  Builders are registered with :func:`register`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..geometry import (
    AffineSlabSet,
    BernsteinCurve2D,
    BoxSet,
    ConvexPolygon2D,
    MinkowskiObstacle2D,
    QuadricAnnulusSet,
    SingletonSet,
    c_obstacle,
    weighted_box,
)
from ..ocp import ShootingProblem, rollout
from .arm import ChanceConstraintSpec, PlanarArm, arm_fk, ik_problem, reach_problem, robust_ik_problem, whole_body_ik_problem
from .base import ConstrainedProblem
from .car import CarModel, car_obstacle_problem, min_clearance, random_scene, scene_rng
from .pusher import push_problem
from .stats import normal_quantile


class ParamError(ValueError):
    """Bad or unknown problem parameter."""


class Params:
    """Typed view over ``key = value`` strings; remembers which keys were read."""

    def __init__(self, raw: dict[str, str] | None = None):
        self.raw = dict(raw or {})
        self.used: set[str] = set()

    def _get(self, key):
        self.used.add(key)
        return self.raw.get(key)

    def has(self, key) -> bool:
        return key in self.raw

    def str(self, key, default=None) -> str:
        v = self._get(key)
        if v is None:
            if default is None:
                raise ParamError(f"missing parameter {key!r}")
            return default
        return v.strip()

    def float(self, key, default=None) -> float:
        v = self._get(key)
        if v is None:
            if default is None:
                raise ParamError(f"missing parameter {key!r}")
            return float(default)
        try:
            return float(v)
        except ValueError:
            raise ParamError(f"parameter {key!r}: expected a number, got {v!r}") from None

    def int(self, key, default=None) -> int:
        x = self.float(key, default)
        if x != int(x):
            raise ParamError(f"parameter {key!r}: expected an integer, got {x}")
        return int(x)

    def vector(self, key, default=None, size: int | None = None) -> np.ndarray:
        v = self._get(key)
        if v is None:
            if default is None:
                raise ParamError(f"missing parameter {key!r}")
            out = np.asarray(default, float)
        else:
            try:
                out = np.array([float(t) for t in v.replace(",", " ").split()])
            except ValueError:
                raise ParamError(f"parameter {key!r}: expected numbers, got {v!r}") from None
        if size is not None and out.size != size:
            raise ParamError(f"parameter {key!r}: expected {size} values, got {out.size}")
        return out

    def unused(self) -> list[str]:
        return sorted(set(self.raw) - self.used)


@dataclass
class Instance:
    """A built benchmark instance.

    ``kind`` is ``static`` (a :class:`ConstrainedProblem`) or ``ocp`` (a
    :class:`ShootingProblem` solved over controls).  ``unconstrained`` is
    the variant handed to solvers without bound handling, when one exists.
    ``evaluate`` maps a solution to problem-specific metrics.
    """

    kind: str
    problem: ConstrainedProblem | ShootingProblem
    x0: np.ndarray
    shapes: dict[str, tuple[str, np.ndarray]] = field(default_factory=dict)
    unconstrained: ShootingProblem | None = None
    evaluate: Callable[[np.ndarray], dict] | None = None


Builder = Callable[[Params, dict, int], Instance]
REGISTRY: dict[str, Builder] = {}


def register(name: str):
    def deco(fn):
        REGISTRY[name] = fn
        return fn

    return deco


def build(name: str, params: Params, shapes: dict, seed: int) -> Instance:
    if name not in REGISTRY:
        raise ParamError(f"unknown problem id {name!r}; known ids: {', '.join(sorted(REGISTRY))}")
    inst = REGISTRY[name](params, shapes, seed)
    extra = params.unused()
    if extra:
        raise ParamError(f"unknown parameter(s) for problem {name!r}: {', '.join(extra)}")
    return inst


def _polygon(shapes, name) -> ConvexPolygon2D:
    kind, verts = shapes[name]
    if kind != "polygon":
        raise ParamError(f"shape {name!r} must be a polygon")
    return ConvexPolygon2D(verts)


def _circle(center, r, k: int = 64) -> np.ndarray:
    th = 2 * math.pi * np.arange(k) / k
    return np.asarray(center) + r * np.c_[np.cos(th), np.sin(th)]


def _arm(p: Params, default_links) -> PlanarArm:
    links = p.vector("links", default_links)
    lim = p.float("joint_limit", math.pi)
    return PlanarArm(links, BoxSet(np.full(links.size, -lim), np.full(links.size, lim)))


def _arm_evaluate(arm: PlanarArm):
    def evaluate(q):
        pos = arm_fk(arm, q)[0]
        return {"ee_x": float(pos[0]), "ee_y": float(pos[1])}

    return evaluate


@register("ik")
def _build_ik(p: Params, shapes, seed) -> Instance:
    arm = _arm(p, (1.0, 1.0, 1.0))
    q0 = p.vector("q0", np.zeros(arm.dof), arm.dof)
    q_init = p.vector("q_init", q0, arm.dof)
    kind = p.str("target")
    geo = {}
    if kind == "point":
        target = SingletonSet(p.vector("point", size=2))
    elif kind == "halfspace":
        target = AffineSlabSet(p.vector("normal", size=2), upper=p.float("offset", 0.0))
    elif kind == "annulus":
        c = p.vector("center", (0.0, 0.0), 2)
        r_in, r_out = p.float("r_inner", 0.0), p.float("r_outer")
        target = QuadricAnnulusSet.from_radii(c, r_in, r_out)
        geo["target_outer"] = ("polyline", _circle(c, r_out))
        if r_in > 0:
            geo["target_inner"] = ("polyline", _circle(c, r_in))
    elif kind == "box":
        target = weighted_box(p.vector("center", size=2), p.vector("weights", (1.0, 1.0), 2), p.float("half_width"))
        lo, hi = target.lower, target.upper
        geo["target"] = ("polygon", np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]]))
    elif kind == "polygon":
        poly = _polygon(shapes, "target")
        target = MinkowskiObstacle2D(poly, "keep-in")
    elif kind == "curve":
        ck, cp = shapes["target"]
        if ck != "curve":
            raise ParamError("target shape must be a curve")
        target = BernsteinCurve2D(cp)
        geo["target_path"] = ("polyline", target.points(np.linspace(0.0, 1.0, 65)))
    else:
        raise ParamError(f"unknown ik target {kind!r}")
    prob = ik_problem(arm, q0, target, q_init)
    return Instance("static", prob, prob.x0, {**shapes, **geo}, evaluate=_arm_evaluate(arm))


@register("robust_ik")
def _build_robust_ik(p: Params, shapes, seed) -> Instance:
    arm = _arm(p, (1.0, 1.0, 1.0))
    q0 = p.vector("q0", np.zeros(arm.dof), arm.dof)
    q_init = p.vector("q_init", q0, arm.dof)
    mu = p.vector("mu", size=2)
    sigma = p.vector("sigma", size=4).reshape(2, 2)
    spec = ChanceConstraintSpec(mu, sigma, p.float("eta"))
    samples = p.int("mc_samples", 10000)
    prob = robust_ik_problem(arm, q0, spec, q_init)

    def evaluate(q):
        pos = arm_fk(arm, q)[0]
        rng = scene_rng(seed)
        a = rng.multivariate_normal(spec.mu, spec.sigma, size=samples, method="eigh")
        return {
            "mc_satisfaction": float(np.mean(a @ pos <= 0.0)),
            "quantile": normal_quantile(spec.eta),
            "ee_x": float(pos[0]),
            "ee_y": float(pos[1]),
        }

    return Instance("static", prob, prob.x0, dict(shapes), evaluate=evaluate)


@register("whole_body_ik")
def _build_whole_body(p: Params, shapes, seed) -> Instance:
    arm = _arm(p, (0.6, 0.5, 0.4, 0.3, 0.2))
    q0 = p.vector("q0", np.zeros(arm.dof), arm.dof)
    q_init = p.vector("q_init", q0, arm.dof)
    com_c, com_h = p.vector("com_center", size=2), p.vector("com_half", size=2)
    com_box = BoxSet(com_c - com_h, com_c + com_h)
    c = p.vector("ee_center", size=2)
    r_in, r_out = p.float("ee_r_inner", 0.0), p.float("ee_r_outer")
    ee = QuadricAnnulusSet.from_radii(c, r_in, r_out)
    prob = whole_body_ik_problem(arm, q0, com_box, ee, p.float("ee_angle"), q_init)
    lo, hi = com_box.lower, com_box.upper
    geo = {
        "com_box": ("polygon", np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])),
        "ee_outer": ("polyline", _circle(c, r_out)),
    }
    return Instance("static", prob, prob.x0, {**shapes, **geo}, evaluate=_arm_evaluate(arm))


def random_push_goal(seed: int) -> np.ndarray:
    rng = scene_rng(seed)
    return np.array([rng.uniform(0.05, 0.3), rng.uniform(-0.15, 0.15), rng.uniform(-math.pi / 2, math.pi / 2)])


@register("push")
def _build_push(p: Params, shapes, seed) -> Instance:
    goal = random_push_goal(seed) if p.str("goal", "random") == "random" else p.vector("goal", size=3)
    kw = dict(
        horizon=p.int("horizon", 60),
        dt=p.float("dt", 0.1),
        contact_offset=p.float("contact_offset", 0.0),
        w_goal=p.vector("w_goal", (100.0, 100.0, 1.0), 3),
        r_u=p.float("r_u", 1e-2),
    )
    speed = p.float("max_speed", 0.1)
    prob = push_problem(goal, max_speed=speed, **kw)
    u0 = np.tile(p.vector("u0", (0.02, 0.0), 2), prob.horizon)

    def evaluate(u):
        xs = rollout(prob.dynamics, prob.x0, u)
        err = xs[-1, :3] - goal
        return {"goal_x": goal[0], "goal_y": goal[1], "goal_theta": goal[2], "terminal_error": float(np.linalg.norm(err))}

    return Instance("ocp", prob, u0, dict(shapes), unconstrained=replace(prob, control_domain=None), evaluate=evaluate)


@register("car")
def _build_car(p: Params, shapes, seed) -> Instance:
    variant = p.str("variant", "point-double-integrator")
    limit = p.vector("control_limit", (0.6, 2.0) if variant == "bicycle" else (5.0, 5.0), 2)
    model = CarModel(variant, p.float("wheelbase", 2.7), p.float("dt", 0.1), tuple(limit))
    start, goal = p.vector("start", (0.0, 0.0)), p.vector("goal", (10.0, 0.0))
    obstacle_names = sorted(k for k in shapes if k.startswith("obstacle"))
    robot_half = p.float("robot_half", 0.2)
    if obstacle_names:
        obstacles = [_polygon(shapes, k) for k in obstacle_names]
        robot = _polygon(shapes, "robot") if "robot" in shapes else None
    else:
        scene = random_scene(
            seed,
            p.int("n_obstacles", 4),
            start[:2],
            goal[:2],
            robot_half,
            tuple(p.vector("half_extent_range", (0.3, 1.0), 2)),
            p.float("margin", 0.3),
        )
        obstacles, robot = scene.obstacles, scene.robot
    prob = car_obstacle_problem(
        model,
        obstacles,
        robot,
        start,
        goal,
        horizon=p.int("horizon", 50),
        w_goal=p.float("w_goal", 1.0),
        w_heading=p.float("w_heading", 0.1),
        w_vel=p.float("w_vel", 0.1),
        r_u=p.float("r_u", 1e-3),
    )
    u0 = np.tile(p.vector("u0", (0.0, 0.0), 2), prob.horizon)
    geo = {f"obstacle{i}": ("polygon", ob.vertices) for i, ob in enumerate(obstacles)}
    if robot is not None:
        geo["robot"] = ("polygon", robot.vertices)
    for i, ob in enumerate(obstacles):
        geo[f"cspace{i}"] = ("polygon", c_obstacle(robot, ob).sum.vertices)
    geo["start"] = ("point", start[None, :2])
    geo["goal"] = ("point", goal[None, :2])

    def evaluate(u):
        return {"min_clearance": float(min_clearance(prob, rollout(prob.dynamics, prob.x0, u)))}

    return Instance("ocp", prob, u0, {**shapes, **geo}, evaluate=evaluate)


@register("reach")
def _build_reach(p: Params, shapes, seed) -> Instance:
    arm = _arm(p, np.full(7, 3.0 / 7))
    q0 = p.vector("q0", np.full(arm.dof, 0.2), arm.dof)
    target = p.vector("target", (1.0, 1.8), 2)
    horizon = p.int("horizon", 50)
    duration = p.float("duration", 1.0)
    prob = reach_problem(
        arm, q0, target, horizon, duration=duration,
        w_pos=p.float("w_pos", 1e3), w_vel=p.float("w_vel", 1.0), r_u=p.float("r_u", 1e-3),
    )
    geo = {"target": ("point", target[None, :])}
    return Instance("ocp", prob, np.zeros(prob.n_controls), {**shapes, **geo})
