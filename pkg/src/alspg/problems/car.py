"""Obstacle-avoiding cars: a point double integrator and a kinematic bicycle."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import ConvexPolygon2D, MinkowskiObstacle2D, c_obstacle, polygons_intersect
from ..ocp import DoubleIntegrator, DynamicsModel, QuadraticCost, ShootingProblem, StateConstraint, control_box

VARIANTS = ("point-double-integrator", "bicycle")


class Bicycle(DynamicsModel):
    """Kinematic bicycle, explicit Euler.  State ``(x, y, theta, v)``, control ``(delta, a)``."""

    state_dim, control_dim = 4, 2

    def __init__(self, wheelbase: float = 2.7, dt: float = 0.1):
        if wheelbase <= 0:
            raise ValueError("wheelbase must be positive")
        self.wheelbase, self.dt = wheelbase, dt

    def step(self, x, u):
        px, py, th, v = x
        delta, a = u
        dt, L = self.dt, self.wheelbase
        return np.array([px + dt * v * math.cos(th), py + dt * v * math.sin(th), th + dt * v * math.tan(delta) / L, v + dt * a])

    def linearize(self, x, u):
        _, _, th, v = x
        delta = u[0]
        dt, L = self.dt, self.wheelbase
        c, s, t = math.cos(th), math.sin(th), math.tan(delta)
        A = np.eye(4)
        A[0, 2], A[0, 3] = -dt * v * s, dt * c
        A[1, 2], A[1, 3] = dt * v * c, dt * s
        A[2, 3] = dt * t / L
        B = np.zeros((4, 2))
        B[2, 0] = dt * v / (L * math.cos(delta) ** 2)
        B[3, 1] = dt
        return A, B


@dataclass
class CarModel:
    variant: str = "point-double-integrator"
    wheelbase: float = 2.7
    dt: float = 0.1
    # per-step control bounds, symmetric
    control_limit: tuple[float, float] = (5.0, 5.0)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown car variant {self.variant!r}")
        if self.wheelbase <= 0:
            raise ValueError("wheelbase must be positive")

    @property
    def state_dim(self) -> int:
        return 4

    @property
    def control_dim(self) -> int:
        return 2

    def dynamics(self) -> DynamicsModel:
        if self.variant == "bicycle":
            return Bicycle(self.wheelbase, self.dt)
        return DoubleIntegrator(2, self.dt)

    def state(self, position, heading: float = 0.0) -> np.ndarray:
        """Rest state at ``position``; heading is ignored for the point car."""
        px, py = position
        if self.variant == "bicycle":
            return np.array([px, py, heading, 0.0])
        return np.array([px, py, 0.0, 0.0])


def car_obstacle_problem(
    model: CarModel,
    obstacles,
    robot,
    start,
    goal,
    horizon: int = 50,
    w_goal: float = 1.0,
    w_heading: float = 0.1,
    w_vel: float = 0.1,
    r_u: float = 1e-3,
) -> ShootingProblem:
    """Reach ``goal`` from ``start`` while the robot footprint avoids every obstacle.

    ``start``/``goal`` are ``(x, y)`` or ``(x, y, heading)``.  Each obstacle
    yields a keep-out constraint on the position at every step.
    """
    start, goal = np.asarray(start, float), np.asarray(goal, float)
    sets = [c_obstacle(robot, ob, "keep-out") for ob in obstacles]
    for i, s in enumerate(sets):
        if s.collides(start[:2]):
            raise ValueError(f"start {start[:2].tolist()} lies inside obstacle {i}")
    x0 = model.state(start[:2], start[2] if start.size > 2 else 0.0)
    xg = model.state(goal[:2], goal[2] if goal.size > 2 else 0.0)
    if model.variant == "bicycle":
        wf = [w_goal, w_goal, w_heading if goal.size > 2 else 0.0, w_vel]
    else:
        wf = [w_goal, w_goal, w_vel, w_vel]
    cost = QuadraticCost(Q=np.zeros((4, 4)), R=r_u * np.eye(2), Qf=np.diag(wf), x_goal=xg)
    lim = np.asarray(model.control_limit, float)
    constraints = [StateConstraint(s, (0, 1), None, name=f"obstacle{i}") for i, s in enumerate(sets)]
    return ShootingProblem(
        model.dynamics(), x0, horizon, cost, control_box(-lim, lim, horizon), state_constraints=constraints
    )


def scene_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by ``seed``; streams are portable across platforms."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


@dataclass
class Scene:
    obstacles: list[ConvexPolygon2D]
    start: np.ndarray
    goal: np.ndarray
    robot: ConvexPolygon2D | None


def random_scene(
    seed: int,
    n_obstacles: int = 4,
    start=(0.0, 0.0),
    goal=(10.0, 0.0),
    robot_half: float = 0.2,
    half_extent_range=(0.3, 1.0),
    margin: float = 0.3,
    max_tries: int = 1000,
) -> Scene:
    """Scaled, rotated rectangles scattered across the corridor between start and goal.

    Rectangles whose C-obstacle comes within ``margin`` of the start or goal,
    or whose inflated footprint touches an earlier rectangle, are redrawn so a
    passage of at least the robot width remains between obstacles.
    """
    rng = scene_rng(seed)
    start, goal = np.asarray(start, float), np.asarray(goal, float)
    robot = ConvexPolygon2D.rectangle((0.0, 0.0), (robot_half, robot_half)) if robot_half > 0 else None
    d = goal - start
    length = float(np.linalg.norm(d))
    ex = d / length
    ey = np.array([-ex[1], ex[0]])
    inflate = ConvexPolygon2D.rectangle((0.0, 0.0), (2 * robot_half + margin,) * 2)
    obstacles = []
    for _ in range(max_tries):
        if len(obstacles) == n_obstacles:
            break
        along = rng.uniform(0.2, 0.8) * length
        # the first rectangle straddles the straight path so every scene needs a detour
        spread = 0.02 if not obstacles else 0.2
        across = rng.uniform(-spread, spread) * length
        half = rng.uniform(*half_extent_range, size=2)
        angle = rng.uniform(0.0, math.pi)
        ob = ConvexPolygon2D.rectangle(start + along * ex + across * ey, half, angle)
        mink = c_obstacle(robot, ob).sum
        if min(mink.signed_distance(start), mink.signed_distance(goal)) <= margin:
            continue
        big = c_obstacle(inflate, ob).sum
        if any(polygons_intersect(big, other) for other in obstacles):
            continue
        obstacles.append(ob)
    if len(obstacles) < n_obstacles:
        raise RuntimeError("could not place obstacles clear of start and goal")
    return Scene(obstacles, start, goal, robot)


def min_clearance(prob: ShootingProblem, xs) -> float:
    """Smallest signed distance from the trajectory positions to any C-obstacle (negative = collision)."""
    best = math.inf
    for sc in prob.state_constraints:
        if isinstance(sc.set, MinkowskiObstacle2D):
            poly = sc.set.sum
            pts = np.asarray(xs)[:, list(sc.coords)]
            best = min(best, min(poly.signed_distance(p) for p in pts))
    return best
