"""Planar serial arm: kinematics, IK problem family, robust IK and reach planning."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..auglag import ConstraintBlock
from ..geometry import AffineSlabSet, BoxSet, ProjectableSet, SecondOrderConeSet, SingletonSet
from ..ocp import Cost, DoubleIntegrator, ShootingProblem
from .base import ConstrainedProblem
from .stats import normal_quantile


@dataclass
class PlanarArm:
    link_lengths: np.ndarray
    joint_limits: BoxSet | None = None

    def __post_init__(self):
        self.link_lengths = np.asarray(self.link_lengths, float)
        if np.any(self.link_lengths <= 0):
            raise ValueError("link lengths must be positive")
        if self.joint_limits is None:
            self.joint_limits = BoxSet(np.full(self.dof, -math.pi), np.full(self.dof, math.pi))
        elif self.joint_limits.dim != self.dof:
            raise ValueError("joint limits do not match the number of links")

    @property
    def dof(self) -> int:
        return self.link_lengths.size

    @property
    def reach(self) -> float:
        return float(self.link_lengths.sum())


def _check_q(arm, q):
    q = np.asarray(q, float)
    if q.shape != (arm.dof,):
        raise ValueError(f"q has shape {q.shape}, expected ({arm.dof},)")
    return q


def arm_fk(arm: PlanarArm, q) -> tuple[np.ndarray, np.ndarray]:
    """End-effector position and its 2 x dof Jacobian."""
    q = _check_q(arm, q)
    phi = np.cumsum(q)
    dx, dy = arm.link_lengths * np.cos(phi), arm.link_lengths * np.sin(phi)
    pos = np.array([dx.sum(), dy.sum()])
    # column j collects the links at or after joint j
    J = np.vstack([-np.cumsum(dy[::-1])[::-1], np.cumsum(dx[::-1])[::-1]])
    return pos, J


def arm_com(arm: PlanarArm, q) -> tuple[np.ndarray, np.ndarray]:
    """Center of mass (link mass proportional to length) and its Jacobian."""
    q = _check_q(arm, q)
    l = arm.link_lengths
    w = l / l.sum()
    phi = np.cumsum(q)
    c, s = np.cos(phi), np.sin(phi)
    # link i center: sum_{k<i} l_k dir_k + l_i/2 dir_i; weight of dir_k in the COM
    coef = l * (np.cumsum(w[::-1])[::-1] - 0.5 * w)
    pos = np.array([(coef * c).sum(), (coef * s).sum()])
    J = np.vstack([-np.cumsum((coef * s)[::-1])[::-1], np.cumsum((coef * c)[::-1])[::-1]])
    return pos, J


def fk_block(arm: PlanarArm, target: ProjectableSet, name: str = "ee") -> ConstraintBlock:
    return ConstraintBlock(
        g=lambda q: arm_fk(arm, q)[0],
        jvp_t=lambda q, r: arm_fk(arm, q)[1].T @ r,
        set=target,
        name=name,
    )


def _distance_objective(q0):
    q0 = np.asarray(q0, float)
    return (lambda q: float((q - q0) @ (q - q0))), (lambda q: 2.0 * (q - q0))


def ik_problem(arm: PlanarArm, q0, target_set: ProjectableSet, q_init=None) -> ConstrainedProblem:
    """``min |q - q0|^2`` over the joint limits with the end effector in ``target_set``."""
    q0 = _check_q(arm, q0)
    fun, grad = _distance_objective(q0)
    x0 = q0 if q_init is None else _check_q(arm, q_init)
    return ConstrainedProblem(fun, grad, arm.joint_limits, [fk_block(arm, target_set)], x0, name="ik")


@dataclass
class ChanceConstraintSpec:
    """Half-plane ``a^T p <= 0`` with ``a ~ N(mu, sigma)`` to hold with probability ``eta``."""

    mu: np.ndarray
    sigma: np.ndarray
    eta: float

    def __post_init__(self):
        self.mu = np.asarray(self.mu, float)
        self.sigma = np.atleast_2d(np.asarray(self.sigma, float))
        if self.sigma.shape != (self.mu.size, self.mu.size):
            raise ValueError("sigma must be square and match mu")
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-12):
            raise ValueError("sigma must be symmetric")
        evals = np.linalg.eigvalsh(self.sigma)
        if evals.min() < -1e-12 * max(1.0, abs(evals).max()):
            raise ValueError("sigma must be positive semidefinite")
        if not 0.5 <= self.eta < 1.0:
            raise ValueError("eta must lie in [0.5, 1)")

    @property
    def sqrt_sigma(self) -> np.ndarray:
        evals, evecs = np.linalg.eigh(self.sigma)
        return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T

    @property
    def quantile(self) -> float:
        return normal_quantile(self.eta)

    def margin(self, p) -> float:
        """``mu^T p + quantile * |sigma^{1/2} p|``; feasible when <= 0."""
        p = np.asarray(p, float)
        return float(self.mu @ p + self.quantile * np.linalg.norm(self.sqrt_sigma @ p))


def chance_block(arm: PlanarArm, spec: ChanceConstraintSpec) -> ConstraintBlock:
    """Second-order cone block equivalent to the chance constraint on the end effector.

    ``g(q) = [S f(q); -mu^T f(q) / k]`` with ``S = sigma^{1/2}`` and ``k`` the
    normal quantile of ``eta``; cone membership ``|S f| <= -mu^T f / k`` is the
    chance constraint.  ``eta = 0.5`` (``k = 0``) degenerates to the half-plane
    ``mu^T f(q) <= 0``.
    """
    k = spec.quantile
    if k <= 1e-12:
        return ConstraintBlock(
            g=lambda q: np.array([spec.mu @ arm_fk(arm, q)[0]]),
            jvp_t=lambda q, r: arm_fk(arm, q)[1].T @ (spec.mu * r[0]),
            set=AffineSlabSet([1.0], upper=0.0),
            name="chance",
        )
    S = spec.sqrt_sigma
    G = np.vstack([S, -spec.mu[None, :] / k])

    def g(q):
        return G @ arm_fk(arm, q)[0]

    def jvp_t(q, r):
        return arm_fk(arm, q)[1].T @ (G.T @ r)

    return ConstraintBlock(g, jvp_t, SecondOrderConeSet(), name="chance")


def robust_ik_problem(arm: PlanarArm, q0, spec: ChanceConstraintSpec, q_init=None) -> ConstrainedProblem:
    q0 = _check_q(arm, q0)
    fun, grad = _distance_objective(q0)
    x0 = q0 if q_init is None else _check_q(arm, q_init)
    return ConstrainedProblem(fun, grad, arm.joint_limits, [chance_block(arm, spec)], x0, name="robust_ik")


def whole_body_ik_problem(
    arm: PlanarArm,
    q0,
    com_box: BoxSet,
    ee_set: ProjectableSet,
    ee_angle: float,
    q_init=None,
) -> ConstrainedProblem:
    """Desk-scale analog of a humanoid IK test.

    Center of mass inside ``com_box``, end effector in ``ee_set`` and a fixed
    end-effector orientation ``sum(q) = ee_angle`` as an equality block.
    """
    q0 = _check_q(arm, q0)
    fun, grad = _distance_objective(q0)
    ones = np.ones(arm.dof)
    blocks = [
        ConstraintBlock(lambda q: arm_com(arm, q)[0], lambda q, r: arm_com(arm, q)[1].T @ r, com_box, name="com"),
        fk_block(arm, ee_set),
        ConstraintBlock(lambda q: np.array([ones @ q - ee_angle]), lambda q, r: ones * r[0], SingletonSet.zeros(1), name="orient"),
    ]
    x0 = q0 if q_init is None else _check_q(arm, q_init)
    return ConstrainedProblem(fun, grad, arm.joint_limits, blocks, x0, name="whole_body_ik")


class ReachCost(Cost):
    """Control effort plus terminal end-effector and velocity errors for a joint-space double integrator."""

    def __init__(self, arm: PlanarArm, target, w_pos: float = 1e3, w_vel: float = 1.0, r_u: float = 1e-3):
        self.arm, self.target = arm, np.asarray(target, float)
        self.w_pos, self.w_vel, self.r_u = w_pos, w_vel, r_u

    def _split(self, xs):
        d = self.arm.dof
        return xs[-1, :d], xs[-1, d:]

    def value(self, xs, us):
        q, dq = self._split(xs)
        e = arm_fk(self.arm, q)[0] - self.target
        return 0.5 * (self.r_u * float(np.sum(us * us)) + self.w_pos * float(e @ e) + self.w_vel * float(dq @ dq))

    def gradient(self, xs, us):
        q, dq = self._split(xs)
        p, J = arm_fk(self.arm, q)
        gx = np.zeros_like(xs)
        gx[-1] = np.r_[self.w_pos * J.T @ (p - self.target), self.w_vel * dq]
        return gx, self.r_u * us

    def hessians(self, xs, us):
        T, m = xs.shape
        d = self.arm.dof
        _, J = arm_fk(self.arm, xs[-1, :d])
        lxx = np.zeros((T, m, m))
        lxx[-1, :d, :d] = self.w_pos * J.T @ J
        lxx[-1, d:, d:] = self.w_vel * np.eye(d)
        luu = np.broadcast_to(self.r_u * np.eye(us.shape[1]), (T, us.shape[1], us.shape[1])).copy()
        return lxx, luu


def reach_problem(
    arm: PlanarArm, q0, target, horizon: int, dt: float = 0.01, duration: float | None = None, **cost_kw
) -> ShootingProblem:
    """Joint-acceleration controlled reach to ``target``; state is ``(q, dq)``.

    With ``duration`` the step is ``duration / horizon``, so changing the
    horizon refines the time grid of one fixed task instead of lengthening it.
    """
    q0 = _check_q(arm, q0)
    if duration is not None:
        dt = duration / horizon
    dyn = DoubleIntegrator(arm.dof, dt)
    return ShootingProblem(dyn, np.r_[q0, np.zeros(arm.dof)], horizon, ReachCost(arm, target, **cost_kw))
