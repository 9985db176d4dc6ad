"""Quasi-static pusher-slider with a single sticking contact.

The pusher touches the slider's left face (body frame ``x = -a``) at
offset ``p_y``.  Under sticking contact the contact point moves with the
pusher, and the slider twist follows from an ellipsoidal limit surface
with ratio ``c = m_max / f_max``.  No face switching or sliding modes are
modelled; the contact offset is carried in the state and stays constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..ocp import DynamicsModel, QuadraticCost, ShootingProblem, control_box


@dataclass
class PusherSlider:
    half_length: float = 0.045  # along body x, the pushed direction
    half_width: float = 0.045
    # m_max / f_max for uniform pressure; default is the mean radius of the rectangle
    ls_ratio: float | None = None

    def __post_init__(self):
        if self.half_length <= 0 or self.half_width <= 0:
            raise ValueError("slider half dimensions must be positive")
        if self.ls_ratio is None:
            self.ls_ratio = _mean_radius(self.half_length, self.half_width)

    def contact_point(self, p_y: float) -> np.ndarray:
        return np.array([-self.half_length, p_y])


def _mean_radius(a: float, b: float, n: int = 200) -> float:
    # midpoint rule over the rectangle
    xs = (np.arange(n) + 0.5) / n * 2 * a - a
    ys = (np.arange(n) + 0.5) / n * 2 * b - b
    X, Y = np.meshgrid(xs, ys)
    return float(np.mean(np.hypot(X, Y)))


class PusherSliderDynamics(DynamicsModel):
    """State ``(x, y, theta, p_y)``, control ``(v_n, v_t)``: pusher velocity in the slider frame.

    ``v_n >= 0`` keeps contact; for ``v_n < 0`` the pusher pulls away
    and the slider does not move during that step.
    """

    state_dim, control_dim = 4, 2

    def __init__(self, slider: PusherSlider | None = None, dt: float = 0.1):
        self.slider = slider or PusherSlider()
        self.dt = dt

    def body_map(self, p_y: float) -> tuple[np.ndarray, np.ndarray]:
        """3 x 2 map from pusher velocity to body twist ``(v_x, v_y, omega)`` and its ``p_y`` derivative."""
        a, c2 = self.slider.half_length, self.slider.ls_ratio**2
        den = c2 + a * a + p_y * p_y
        N = np.array([[c2 + a * a, -a * p_y], [-a * p_y, c2 + p_y * p_y]])
        dN = np.array([[0.0, -a], [-a, 2.0 * p_y]])
        V = N / den
        dV = dN / den - N * (2.0 * p_y / den**2)
        # omega = (p_x v_y - p_y v_x) / c^2 with p_x = -a
        w = (-a * V[1] - p_y * V[0]) / c2
        dw = (-a * dV[1] - V[0] - p_y * dV[0]) / c2
        return np.vstack([V, w]), np.vstack([dV, dw])

    def step(self, x, u):
        x = np.asarray(x, float)
        if u[0] < 0.0:
            return x.copy()
        M, _ = self.body_map(x[3])
        vx, vy, w = M @ u
        c, s = math.cos(x[2]), math.sin(x[2])
        dt = self.dt
        return np.array([x[0] + dt * (c * vx - s * vy), x[1] + dt * (s * vx + c * vy), x[2] + dt * w, x[3]])

    def linearize(self, x, u):
        A, B = np.eye(4), np.zeros((4, 2))
        if u[0] < 0.0:
            return A, B
        M, dM = self.body_map(x[3])
        vx, vy, _ = M @ u
        dvx, dvy, dw = dM @ u
        c, s = math.cos(x[2]), math.sin(x[2])
        dt = self.dt
        R = np.array([[c, -s], [s, c]])
        A[0, 2] = dt * (-s * vx - c * vy)
        A[1, 2] = dt * (c * vx - s * vy)
        A[0, 3] = dt * (c * dvx - s * dvy)
        A[1, 3] = dt * (s * dvx + c * dvy)
        A[2, 3] = dt * dw
        B[:2] = dt * R @ M[:2]
        B[2] = dt * M[2]
        return A, B


def pusher_slider_dynamics(slider: PusherSlider | None = None, dt: float = 0.1) -> PusherSliderDynamics:
    return PusherSliderDynamics(slider, dt)


def push_problem(
    goal,
    horizon: int = 60,
    dt: float = 0.1,
    contact_offset: float = 0.0,
    w_goal=(100.0, 100.0, 1.0),
    r_u: float = 1e-2,
    slider: PusherSlider | None = None,
    max_speed: float | None = 0.1,
) -> ShootingProblem:
    """Plan pusher velocities taking the slider from the origin to ``goal = (x, y, theta)``.

    Cost: control effort plus a weighted squared terminal pose error.  With
    ``max_speed`` set, controls live in the box ``0 <= v_n <= max_speed``,
    ``|v_t| <= max_speed``; pulling never helps, so the box only removes the
    flat separated region.  ``max_speed=None`` leaves controls unconstrained.
    """
    dyn = pusher_slider_dynamics(slider, dt)
    goal = np.r_[np.asarray(goal, float), contact_offset]
    Qf = np.diag(np.r_[np.asarray(w_goal, float), 0.0])
    cost = QuadraticCost(Q=np.zeros((4, 4)), R=r_u * np.eye(2), Qf=Qf, x_goal=goal)
    box = None if max_speed is None else control_box([0.0, -max_speed], [max_speed, max_speed], horizon)
    return ShootingProblem(dyn, np.array([0.0, 0.0, 0.0, contact_offset]), horizon, cost, box)
