"""Direct shooting: optimal control as an optimization over the control sequence only.

States are eliminated by forward rollout ``x_{t+1} = f(x_t, u_t)``.  The
transposed sensitivity product ``(dF/du)^T y`` needed by every gradient is
computed by a single backward sweep without forming the block-triangular
sensitivity matrix.

Array conventions: controls ``u`` have shape ``(T, n)`` (rows ``u_0 ..
u_{T-1}``), states ``xs`` have shape ``(T, m)`` (rows ``x_1 .. x_T``).  Flat
vectors of length ``T*n`` / ``T*m`` are accepted wherever a trajectory is.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .auglag import AlspgConfig, AlspgResult, ConstraintBlock, alspg_solve, distance_block
from .geometry import BoxSet, ProjectableSet, ReplicatedSet, SingletonSet, WholeSpace
from .spg import IterRecord, ObjectiveOracle, SpgConfig, spg_minimize


class RolloutError(FloatingPointError):
    """Non-finite state during a rollout."""

    def __init__(self, t: int):
        super().__init__(f"non-finite state at step {t}")
        self.t = t


# --------------------------------------------------------------------------
# Dynamics


class DynamicsModel:
    """Discrete-time dynamics ``x_{t+1} = step(x_t, u_t)`` with Jacobians.

    Subclasses set ``state_dim``, ``control_dim`` and ``dt`` and implement
    :meth:`step` and :meth:`linearize`.
    """

    state_dim: int
    control_dim: int
    dt: float = 1.0

    def step(self, x, u) -> np.ndarray:
        raise NotImplementedError

    def linearize(self, x, u) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(A, B)`` with ``A = df/dx`` (m x m) and ``B = df/du`` (m x n)."""
        raise NotImplementedError


class LinearDynamics(DynamicsModel):
    def __init__(self, A, B, dt: float = 1.0):
        self.A = np.atleast_2d(np.asarray(A, float))
        self.B = np.asarray(B, float).reshape(self.A.shape[0], -1)
        self.state_dim, self.control_dim = self.B.shape
        self.dt = dt

    def step(self, x, u):
        return self.A @ x + self.B @ u

    def linearize(self, x, u):
        return self.A, self.B


class SingleIntegrator(LinearDynamics):
    """``x_{t+1} = x_t + dt * u_t``."""

    def __init__(self, dim: int = 1, dt: float = 0.1):
        super().__init__(np.eye(dim), dt * np.eye(dim), dt)


class DoubleIntegrator(LinearDynamics):
    """Explicit Euler point mass; state ``(position, velocity)``, control acceleration."""

    def __init__(self, dim: int = 2, dt: float = 0.1):
        i, z = np.eye(dim), np.zeros((dim, dim))
        A = np.block([[i, dt * i], [z, i]])
        B = np.vstack([z, dt * i])
        super().__init__(A, B, dt)


class Pendulum(DynamicsModel):
    """Damped pendulum, state ``(theta, omega)`` with ``theta = 0`` hanging down."""

    state_dim, control_dim = 2, 1

    def __init__(self, dt: float = 0.05, length: float = 1.0, mass: float = 1.0, damping: float = 0.1, g: float = 9.81):
        self.dt, self.length, self.mass, self.damping, self.g = dt, length, mass, damping, g

    def step(self, x, u):
        th, om = x
        acc = -self.g / self.length * math.sin(th) - self.damping * om + u[0] / (self.mass * self.length**2)
        return np.array([th + self.dt * om, om + self.dt * acc])

    def linearize(self, x, u):
        th, _ = x
        dt = self.dt
        A = np.array([[1.0, dt], [-dt * self.g / self.length * math.cos(th), 1.0 - dt * self.damping]])
        B = np.array([[0.0], [dt / (self.mass * self.length**2)]])
        return A, B


class CountingDynamics(DynamicsModel):
    """Delegates to ``inner`` while tallying ``step`` and ``linearize`` calls."""

    def __init__(self, inner: DynamicsModel):
        self.inner = inner
        self.state_dim, self.control_dim, self.dt = inner.state_dim, inner.control_dim, inner.dt
        self.n_step = 0
        self.n_linearize = 0

    def step(self, x, u):
        self.n_step += 1
        return self.inner.step(x, u)

    def linearize(self, x, u):
        self.n_linearize += 1
        return self.inner.linearize(x, u)


def _as_controls(u, n: int) -> np.ndarray:
    return np.asarray(u, float).reshape(-1, n)


def rollout(dyn: DynamicsModel, x0, u) -> np.ndarray:
    """States ``x_1 .. x_T`` as a ``(T, m)`` array."""
    us = _as_controls(u, dyn.control_dim)
    x = np.asarray(x0, float)
    if x.shape != (dyn.state_dim,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({dyn.state_dim},)")
    xs = np.empty((len(us), dyn.state_dim))
    for t, ut in enumerate(us):
        x = np.asarray(dyn.step(x, ut), float)
        if not np.all(np.isfinite(x)):
            raise RolloutError(t)
        xs[t] = x
    return xs


def linearize_trajectory(dyn: DynamicsModel, x0, u, xs) -> tuple[np.ndarray, np.ndarray]:
    """Stacked ``A_t, B_t`` at ``(x_t, u_t)`` for ``t = 0 .. T-1``."""
    us = _as_controls(u, dyn.control_dim)
    prev = np.vstack([np.asarray(x0, float)[None], np.asarray(xs)[:-1]])
    T, m, n = len(us), dyn.state_dim, dyn.control_dim
    As, Bs = np.empty((T, m, m)), np.empty((T, m, n))
    for t in range(T):
        As[t], Bs[t] = dyn.linearize(prev[t], us[t])
    return As, Bs


def adjoint_products(As, Bs, y) -> np.ndarray:
    """``(dF/du)^T y`` from stacked Jacobians by one backward sweep.

    ``y`` has one row per state ``x_1 .. x_T``; the result has one row per
    control.  Only the running adjoint (length m) is kept besides the output.
    """
    T, m, n = Bs.shape
    y = np.asarray(y, float).reshape(T, m)
    z = np.empty((T, n))
    zbar = y[T - 1].copy()
    z[T - 1] = Bs[T - 1].T @ zbar
    for t in range(T - 2, -1, -1):
        zbar = y[t] + As[t + 1].T @ zbar
        z[t] = Bs[t].T @ zbar
    return z


def adjoint_vjp(dyn: DynamicsModel, x0, u, xs, y, jacobians=None) -> np.ndarray:
    """``grad_u F(x0, u)^T y`` as a ``(T, n)`` array.

    ``jacobians`` may carry precomputed ``(As, Bs)`` for the trajectory.
    """
    us = _as_controls(u, dyn.control_dim)
    y = np.asarray(y, float)
    if y.size != len(us) * dyn.state_dim:
        raise ValueError(f"y has {y.size} entries, expected {len(us) * dyn.state_dim}")
    As, Bs = jacobians if jacobians is not None else linearize_trajectory(dyn, x0, us, xs)
    return adjoint_products(As, Bs, y)


def dense_sensitivity(As, Bs) -> np.ndarray:
    """Explicit ``dF/du`` of shape ``(T*m, T*n)``; for checking and small problems only."""
    T, m, n = Bs.shape
    S = np.zeros((T * m, T * n))
    for t in range(T):
        blk = Bs[t]
        for k in range(t, T):
            if k > t:
                blk = As[k] @ blk
            S[k * m:(k + 1) * m, t * n:(t + 1) * n] = blk
    return S


# --------------------------------------------------------------------------
# Costs


class Cost:
    """Separable trajectory cost ``sum_k l_k(x_k) + sum_t r_t(u_t)``.

    :meth:`hessians` returns Gauss-Newton curvature blocks and is only
    needed by the iLQR baseline.
    """

    def value(self, xs, us) -> float:
        raise NotImplementedError

    def gradient(self, xs, us) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def hessians(self, xs, us) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


class ZeroCost(Cost):
    def value(self, xs, us):
        return 0.0

    def gradient(self, xs, us):
        return np.zeros_like(xs), np.zeros_like(us)

    def hessians(self, xs, us):
        T, m = xs.shape
        n = us.shape[1]
        return np.zeros((T, m, m)), np.zeros((T, n, n))


@dataclass
class QuadraticCost(Cost):
    """``sum_{k<T} |x_k - x_ref|_Q^2/2 + |x_T - x_goal|_Qf^2/2 + sum_t |u_t - u_ref|_R^2/2``."""

    Q: np.ndarray
    R: np.ndarray
    Qf: np.ndarray
    x_goal: np.ndarray
    x_ref: np.ndarray | None = None
    u_ref: np.ndarray | None = None

    def __post_init__(self):
        self.Q, self.R, self.Qf = (np.atleast_2d(np.asarray(a, float)) for a in (self.Q, self.R, self.Qf))
        self.x_goal = np.asarray(self.x_goal, float)
        self.x_ref = self.x_goal if self.x_ref is None else np.asarray(self.x_ref, float)
        self.u_ref = np.zeros(self.R.shape[0]) if self.u_ref is None else np.asarray(self.u_ref, float)

    def _dx(self, xs):
        dx = xs - self.x_ref
        dx[-1] = xs[-1] - self.x_goal
        return dx

    def _weights(self, T):
        W = np.broadcast_to(self.Q, (T,) + self.Q.shape).copy()
        W[-1] = self.Qf
        return W

    def value(self, xs, us):
        dx, du = self._dx(xs), us - self.u_ref
        W = self._weights(len(xs))
        return 0.5 * float(np.einsum("ti,tij,tj->", dx, W, dx) + np.einsum("ti,ij,tj->", du, self.R, du))

    def gradient(self, xs, us):
        dx = self._dx(xs)
        W = self._weights(len(xs))
        return np.einsum("tij,tj->ti", W, dx), (us - self.u_ref) @ self.R.T

    def hessians(self, xs, us):
        return self._weights(len(xs)), np.broadcast_to(self.R, (len(us),) + self.R.shape).copy()


# --------------------------------------------------------------------------
# Problem


@dataclass
class StateConstraint:
    """``x_k[coords] in set`` for every step ``k`` in ``steps`` (1-based; ``None`` = all)."""

    set: ProjectableSet
    coords: Sequence[int]
    steps: Sequence[int] | None = None
    name: str = ""


@dataclass
class EqualityConstraint:
    """``h(xs, us) = 0``; ``jvp_t(xs, us, r)`` returns ``(dh/dxs^T r, dh/dus^T r)``."""

    h: Callable
    jvp_t: Callable
    name: str = ""


@dataclass
class ShootingProblem:
    dynamics: DynamicsModel
    x0: np.ndarray
    horizon: int
    cost: Cost
    control_domain: ProjectableSet | None = None
    state_constraints: list[StateConstraint] = field(default_factory=list)
    equalities: list[EqualityConstraint] = field(default_factory=list)

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, float)
        if self.x0.shape != (self.dynamics.state_dim,):
            raise ValueError("x0 does not match the dynamics state dimension")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        dom = self.control_domain
        if dom is not None and dom.dim is not None and dom.dim != self.n_controls:
            raise ValueError(f"control domain has dim {dom.dim}, expected {self.n_controls}")

    @property
    def n_controls(self) -> int:
        return self.horizon * self.dynamics.control_dim

    def controls(self, u) -> np.ndarray:
        return _as_controls(u, self.dynamics.control_dim)

    @property
    def has_constraints(self) -> bool:
        return bool(self.state_constraints or self.equalities)


def control_box(lower, upper, horizon: int) -> BoxSet:
    """Per-step control bounds replicated over the horizon."""
    lo = np.tile(np.atleast_1d(np.asarray(lower, float)), horizon)
    hi = np.tile(np.atleast_1d(np.asarray(upper, float)), horizon)
    return BoxSet(lo, hi)


class TrajectoryCache:
    """Caches the rollout and Jacobians for the most recent control vector."""

    def __init__(self, prob: ShootingProblem):
        self.prob = prob
        self._u = None
        self._xs = None
        self._jac = None

    def states(self, u) -> np.ndarray:
        u = np.asarray(u, float).ravel()
        if self._u is None or not np.array_equal(self._u, u):
            self._xs = rollout(self.prob.dynamics, self.prob.x0, u)
            self._u = u.copy()
            self._jac = None
        return self._xs

    def jacobians(self, u):
        xs = self.states(u)
        if self._jac is None:
            self._jac = linearize_trajectory(self.prob.dynamics, self.prob.x0, u, xs)
        return self._jac

    def vjp(self, u, y) -> np.ndarray:
        return adjoint_products(*self.jacobians(u), y)


def reduced_objective(prob: ShootingProblem, u, cache: TrajectoryCache | None = None) -> tuple[float, np.ndarray]:
    """Value and flat gradient of ``c(F(x0, u), u)``."""
    cache = cache or TrajectoryCache(prob)
    us = prob.controls(u)
    xs = cache.states(u)
    gx, gu = prob.cost.gradient(xs, us)
    grad = gu + cache.vjp(u, gx)
    return prob.cost.value(xs, us), grad.ravel()


def objective_oracle(prob: ShootingProblem, cache: TrajectoryCache | None = None) -> ObjectiveOracle:
    cache = cache or TrajectoryCache(prob)

    def fun(u):
        return prob.cost.value(cache.states(u), prob.controls(u))

    def grad(u):
        return reduced_objective(prob, u, cache)[1]

    return ObjectiveOracle(fun, grad)


def constraint_blocks(prob: ShootingProblem, cache: TrajectoryCache | None = None) -> list[ConstraintBlock]:
    """AL blocks for the state constraints and equalities of ``prob``."""
    cache = cache or TrajectoryCache(prob)
    T, m = prob.horizon, prob.dynamics.state_dim
    blocks = []
    for sc in prob.state_constraints:
        steps = np.arange(T) if sc.steps is None else np.asarray(sc.steps, int) - 1
        coords = np.asarray(sc.coords, int)
        if steps.size and (steps.min() < 0 or steps.max() >= T):
            raise ValueError(f"state constraint steps must lie in 1..{T}")

        def g(u, steps=steps, coords=coords):
            return cache.states(u)[np.ix_(steps, coords)].ravel()

        def jvp_t(u, r, steps=steps, coords=coords):
            y = np.zeros((T, m))
            y[np.ix_(steps, coords)] = np.asarray(r, float).reshape(len(steps), len(coords))
            return cache.vjp(u, y).ravel()

        blocks.append(ConstraintBlock(g, jvp_t, ReplicatedSet(sc.set, len(steps), len(coords)), name=sc.name))
    for eq in prob.equalities:

        def g(u, eq=eq):
            return np.atleast_1d(np.asarray(eq.h(cache.states(u), prob.controls(u)), float))

        def jvp_t(u, r, eq=eq):
            rx, ru = eq.jvp_t(cache.states(u), prob.controls(u), r)
            return (np.asarray(ru, float) + cache.vjp(u, rx)).ravel()

        n_eq = np.atleast_1d(eq.h(rollout(prob.dynamics, prob.x0, np.zeros(prob.n_controls)), np.zeros((T, prob.dynamics.control_dim)))).size
        blocks.append(ConstraintBlock(g, jvp_t, SingletonSet.zeros(n_eq), name=eq.name))
    return blocks


def solve_ocp(prob: ShootingProblem, u0=None, cfg: AlspgConfig | None = None, projections: bool = True) -> AlspgResult:
    """Solve the reduced problem with ALSPG, or with plain SPG when only controls are constrained.

    ``projections=False`` is the ablation: set constraints enter as distance equalities.
    """
    cfg = cfg or AlspgConfig()
    u0 = np.zeros(prob.n_controls) if u0 is None else np.asarray(u0, float).ravel()
    cache = TrajectoryCache(prob)
    oracle = objective_oracle(prob, cache)
    domain = prob.control_domain
    if not prob.has_constraints:
        res = spg_minimize(oracle, domain, u0, cfg.inner)
        status = {"converged": "converged", "max_iter": "max_iter", "line_search_failed": "inner_failed"}[res.status]
        counters = dict(res.counters, n_g=0, n_jac=0)
        return AlspgResult(
            x_star=res.x_star,
            f_star=res.f_star,
            status=status,
            outer_iterations=0,
            blocks=[],
            violations=[],
            counters=counters,
            trace=[],
            history=res.history,
            inner_iterations=res.iterations,
        )
    blocks = constraint_blocks(prob, cache)
    if not projections:
        blocks = [b if isinstance(b.set, SingletonSet) else distance_block(b) for b in blocks]
    return alspg_solve(oracle, domain, blocks, u0, cfg)


# --------------------------------------------------------------------------
# iLQR baseline


@dataclass
class IlqrResult:
    x_star: np.ndarray  # flat controls
    f_star: float
    status: str  # converged | max_iter | line_search_failed
    iterations: int
    history: list[IterRecord]
    counters: dict

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def ilqr_baseline(
    prob: ShootingProblem,
    u0=None,
    max_iter: int = 100,
    tol: float = 1e-8,
    reg_init: float = 1e-6,
    reg_max: float = 1e2,
    max_halvings: int = 20,
) -> IlqrResult:
    """Gauss-Newton iLQR for unconstrained problems.

    Backward Riccati pass on the linearized dynamics and quadratized cost,
    then a forward rollout with the feedback policy and a halving line search
    on the step ``alpha``.  A non-positive-definite control Hessian raises
    the Levenberg term ``mu`` tenfold and retries.  Stops when the relative
    cost decrease falls below ``tol``.

    Counters: ``n_f`` cost evaluations (one per forward rollout),
    ``n_grad`` cost-gradient evaluations, ``n_jac`` trajectory
    linearizations (one per backward pass).
    """
    if prob.has_constraints or not isinstance(prob.control_domain, (type(None), WholeSpace)):
        raise ValueError("ilqr_baseline handles unconstrained problems only")
    dyn, cost = prob.dynamics, prob.cost
    T, m, n = prob.horizon, dyn.state_dim, dyn.control_dim
    us = np.zeros((T, n)) if u0 is None else prob.controls(u0).copy()
    counters = {"n_f": 0, "n_grad": 0, "n_jac": 0, "backward_passes": 0, "forward_rollouts": 0}

    xs = rollout(dyn, prob.x0, us)
    J = cost.value(xs, us)
    counters["n_f"] += 1
    counters["forward_rollouts"] += 1
    history = [IterRecord(0, J, math.nan, math.nan, math.nan, counters["n_f"], counters["n_grad"])]
    mu = reg_init
    status = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        As, Bs = linearize_trajectory(dyn, prob.x0, us, xs)
        counters["n_jac"] += 1
        lx, lu = cost.gradient(xs, us)
        counters["n_grad"] += 1
        lxx, luu = cost.hessians(xs, us)

        while True:
            gains = _backward_pass(As, Bs, lx, lu, lxx, luu, mu)
            counters["backward_passes"] += 1
            if gains is not None:
                break
            mu *= 10.0
            if mu > reg_max:
                break
        if gains is None:
            status = "line_search_failed"
            break
        k_ff, K_fb, expected = gains
        if -expected <= tol * max(1.0, abs(J)):
            status = "converged"
            break

        alpha, accepted = 1.0, False
        for _ in range(max_halvings):
            xs_new, us_new = _forward(dyn, prob.x0, xs, us, k_ff, K_fb, alpha)
            counters["forward_rollouts"] += 1
            J_new = cost.value(xs_new, us_new) if xs_new is not None else math.inf
            counters["n_f"] += 1
            if J_new < J:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if mu >= reg_max:
                status = "line_search_failed"
                break
            mu = min(reg_max, mu * 10.0)
            history.append(IterRecord(it, J, float(np.max(np.abs(k_ff))), mu, 0.0, counters["n_f"], counters["n_grad"]))
            continue
        decrease = J - J_new
        xs, us, J = xs_new, us_new, J_new
        mu = max(reg_init, mu / 10.0)
        history.append(IterRecord(it, J, float(np.max(np.abs(k_ff))), mu, alpha, counters["n_f"], counters["n_grad"]))
        if decrease <= tol * max(1.0, abs(J)):
            status = "converged"
            break
    return IlqrResult(us.ravel(), J, status, it, history, counters)


def _backward_pass(As, Bs, lx, lu, lxx, luu, mu):
    T, m, n = Bs.shape
    k_ff, K_fb = np.empty((T, n)), np.empty((T, n, m))
    Vx, Vxx = lx[T - 1].copy(), lxx[T - 1].copy()
    expected = 0.0
    for t in range(T - 1, -1, -1):
        A, B = As[t], Bs[t]
        Qx = A.T @ Vx
        Qu = lu[t] + B.T @ Vx
        Qxx = A.T @ Vxx @ A
        Quu = luu[t] + B.T @ Vxx @ B
        Qux = B.T @ Vxx @ A
        Quu_reg = Quu + mu * np.eye(n)
        try:
            L = np.linalg.cholesky(0.5 * (Quu_reg + Quu_reg.T))
        except np.linalg.LinAlgError:
            return None
        k = -_chol_solve(L, Qu)
        K = -_chol_solve(L, Qux)
        k_ff[t], K_fb[t] = k, K
        expected += float(k @ Qu)
        Vx = Qx + K.T @ Quu @ k + K.T @ Qu + Qux.T @ k
        Vxx = Qxx + K.T @ Quu @ K + K.T @ Qux + Qux.T @ K
        Vxx = 0.5 * (Vxx + Vxx.T)
        if t > 0:
            Vx = Vx + lx[t - 1]
            Vxx = Vxx + lxx[t - 1]
    return k_ff, K_fb, expected


def _chol_solve(L, b):
    return np.linalg.solve(L.T, np.linalg.solve(L, b))


def _forward(dyn, x0, xs, us, k_ff, K_fb, alpha):
    T = len(us)
    x = np.asarray(x0, float)
    x_ref = np.vstack([x[None], xs[:-1]])
    xs_new, us_new = np.empty_like(xs), np.empty_like(us)
    for t in range(T):
        u = us[t] + alpha * k_ff[t] + K_fb[t] @ (x - x_ref[t])
        x = np.asarray(dyn.step(x, u), float)
        if not np.all(np.isfinite(x)):
            return None, None
        us_new[t], xs_new[t] = u, x
    return xs_new, us_new


# --------------------------------------------------------------------------
# Export


def write_trajectory_csv(prob: ShootingProblem, u, fh) -> None:
    """Rows ``t, x_0.., u_0..`` for ``t = 0 .. T``; the last row has no control."""
    us = prob.controls(u)
    xs = np.vstack([prob.x0[None], rollout(prob.dynamics, prob.x0, us)])
    m, n = prob.dynamics.state_dim, prob.dynamics.control_dim
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t"] + [f"x{i}" for i in range(m)] + [f"u{j}" for j in range(n)])
    for t in range(prob.horizon + 1):
        ctrl = [repr(float(v)) for v in us[t]] if t < prob.horizon else [""] * n
        w.writerow([t] + [repr(float(v)) for v in xs[t]] + ctrl)
