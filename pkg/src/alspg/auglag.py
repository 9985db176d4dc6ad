"""Augmented Lagrangian outer loop over projection constraints ``g_i(x) in C_i``.

Each subproblem ``min_{x in D} L(x; lambda, rho)`` is solved with
:func:`alspg.spg.spg_minimize`.  The penalty term only needs the set
projection and a transposed-Jacobian product of ``g_i``; the projection
itself is never differentiated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .geometry import ProjectableSet, ReplicatedSet, SingletonSet, WholeSpace
from .spg import IterRecord, ObjectiveOracle, SpgConfig, spg_minimize


@dataclass(frozen=True, eq=False)
class ConstraintBlock:
    """Constraint ``g(x) in set`` with its multiplier and penalty.

    ``jvp_t(x, r)`` returns ``grad g(x)^T r``.  ``lam=None`` and ``rho=None``
    are filled from the solver configuration.
    """

    g: Callable
    jvp_t: Callable
    set: ProjectableSet
    lam: np.ndarray | None = None
    rho: float | None = None
    name: str = ""

    def shifted_residual(self, gx: np.ndarray) -> np.ndarray:
        """``w - P(w)`` with ``w = g(x) + lam / rho``."""
        w = gx + self.lam / self.rho
        return w - self.set.project(w)

    def violation(self, gx: np.ndarray) -> float:
        """Auxiliary measure ``V = ||g(x) - P(g(x) + lam / rho)||``."""
        return float(np.linalg.norm(gx - self.set.project(gx + self.lam / self.rho)))


def _ready(block: ConstraintBlock, x, rho0: float, lam0=None) -> ConstraintBlock:
    lam, rho = block.lam, block.rho
    if rho is None:
        rho = rho0
    if lam is None:
        m = np.asarray(block.g(x)).size
        lam = np.zeros(m) if lam0 is None else np.broadcast_to(np.asarray(lam0, float), (m,)).copy()
    if not rho > 0:
        raise ValueError("penalty rho must be positive")
    return replace(block, lam=np.asarray(lam, float), rho=float(rho))


def al_value(x, blocks, f: ObjectiveOracle) -> float:
    """``f(x) + sum_i rho_i/2 * ||w_i - P_i(w_i)||^2`` with ``w_i = g_i(x) + lam_i/rho_i``."""
    total = f.value(x)
    for b in blocks:
        r = b.shifted_residual(np.asarray(b.g(x), float))
        total += 0.5 * b.rho * float(r @ r)
    return total


def al_gradient(x, blocks, f: ObjectiveOracle) -> np.ndarray:
    """``grad f(x) + sum_i rho_i * grad g_i(x)^T (w_i - P_i(w_i))``."""
    grad = np.array(f.gradient(x), dtype=float)
    for b in blocks:
        r = b.shifted_residual(np.asarray(b.g(x), float))
        grad += b.rho * np.asarray(b.jvp_t(x, r), float)
    return grad


@dataclass
class AlspgConfig:
    rho0: float = 0.1
    lambda0: float | np.ndarray = 0.0
    outer_tol: float = 1e-4
    penalty_growth: float = 10.0
    # rho is kept when V_new <= decrease_ratio * V_old; 1.0 keeps it whenever V did not increase
    decrease_ratio: float = 1.0
    max_outer: int = 300
    inner: SpgConfig = field(default_factory=SpgConfig)
    # inner tolerance starts here and shrinks by inner_tol_factor per outer
    # iteration down to inner.tol; None runs every subproblem at inner.tol
    inner_tol_start: float | None = 1e-3
    inner_tol_factor: float = 0.1
    lambda_clip: float = 1e8

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not self.penalty_growth > 1:
            raise ValueError("penalty_growth must exceed 1")
        if not 0 < self.decrease_ratio <= 1:
            raise ValueError("decrease_ratio must lie in (0, 1]")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")


@dataclass
class OuterRecord:
    outer: int
    violations: list[float]
    rhos: list[float]
    lambda_norms: list[float]
    inner_iterations: int
    inner_status: str
    n_f: int
    n_grad: int
    n_g: int
    n_jac: int


@dataclass
class AlspgResult:
    x_star: np.ndarray
    f_star: float
    status: str  # converged | max_outer | inner_failed
    outer_iterations: int
    blocks: list[ConstraintBlock]
    violations: list[float]
    counters: dict
    trace: list[OuterRecord]
    history: list[IterRecord]
    inner_iterations: int = 0

    @property
    def max_violation(self) -> float:
        return max(self.violations, default=0.0)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


class _Counted:
    """Wraps block callables with evaluation tallies and a one-point cache for ``g``."""

    def __init__(self):
        self.n_g = 0
        self.n_jac = 0

    def block(self, b: ConstraintBlock) -> ConstraintBlock:
        cache = {"x": None, "gx": None}

        def g(x):
            if cache["x"] is not None and np.array_equal(cache["x"], x):
                return cache["gx"]
            self.n_g += 1
            gx = np.asarray(b.g(x), float)
            cache["x"], cache["gx"] = np.array(x, copy=True), gx
            return gx

        def jvp_t(x, r):
            self.n_jac += 1
            return b.jvp_t(x, r)

        return replace(b, g=g, jvp_t=jvp_t)


def alspg_solve(
    f: ObjectiveOracle,
    domain: ProjectableSet | None,
    blocks,
    x0,
    cfg: AlspgConfig | None = None,
) -> AlspgResult:
    """Augmented Lagrangian loop with SPG subproblems.

    Per outer iteration: solve the subproblem from the previous iterate and
    spectral step, set ``lam <- rho * (w - P(w))`` for every block, keep
    ``rho`` when ``V`` did not increase and multiply it by
    ``penalty_growth`` otherwise.  Stops once every ``V_i < outer_tol``.
    """
    cfg = cfg or AlspgConfig()
    domain = domain if domain is not None else WholeSpace()
    counted = _Counted()
    x = domain.project(np.asarray(x0, dtype=float))
    blocks = [_ready(counted.block(b), x, cfg.rho0, cfg.lambda0) for b in blocks]

    inner_oracle = ObjectiveOracle(lambda z: al_value(z, blocks, f), lambda z: al_gradient(z, blocks, f))
    v_prev = [b.violation(b.g(x)) for b in blocks]
    violations = list(v_prev)
    history: list[IterRecord] = []
    trace: list[OuterRecord] = []
    gamma = None
    inner_tol = cfg.inner.tol if cfg.inner_tol_start is None else max(cfg.inner_tol_start, cfg.inner.tol)
    status = "max_outer"
    outer = 0
    inner_total = 0

    def counters():
        return {"n_f": f.n_f, "n_grad": f.n_grad, "n_g": counted.n_g, "n_jac": counted.n_jac}

    for outer in range(1, cfg.max_outer + 1):
        inner_cfg = replace(cfg.inner, tol=inner_tol)
        res = spg_minimize(inner_oracle, domain, x, inner_cfg, gamma0=gamma)
        offset = history[-1].iter + 1 if history else 0
        history.extend(replace(h, iter=h.iter + offset) for h in res.history)
        inner_total += res.iterations
        x, gamma = res.x_star, res.gamma

        violations = []
        for i, b in enumerate(blocks):
            gx = b.g(x)
            lam = np.clip(b.rho * b.shifted_residual(gx), -cfg.lambda_clip, cfg.lambda_clip)
            v_new = float(np.linalg.norm(gx - b.set.project(gx + lam / b.rho)))
            rho = b.rho if v_new <= cfg.decrease_ratio * v_prev[i] else b.rho * cfg.penalty_growth
            blocks[i] = replace(b, lam=lam, rho=rho)
            violations.append(v_new)
            v_prev[i] = blocks[i].violation(gx)

        trace.append(
            OuterRecord(
                outer=outer,
                violations=list(violations),
                rhos=[b.rho for b in blocks],
                lambda_norms=[float(np.linalg.norm(b.lam)) for b in blocks],
                inner_iterations=res.iterations,
                inner_status=res.status,
                **counters(),
            )
        )
        if res.status == "line_search_failed":
            status = "inner_failed"
            break
        if max(violations, default=0.0) < cfg.outer_tol:
            status = "converged"
            break
        inner_tol = max(cfg.inner.tol, inner_tol * cfg.inner_tol_factor)

    f_star = f.value(x)
    return AlspgResult(
        x_star=x,
        f_star=f_star,
        status=status,
        outer_iterations=outer,
        blocks=blocks,
        violations=violations,
        counters=counters(),
        trace=trace,
        history=history,
        inner_iterations=inner_total,
    )


TRACE_COLUMNS = ("outer", "block", "violation", "rho", "lambda_norm", "inner_iterations", "inner_status", "n_f", "n_grad", "n_g", "n_jac")


def write_trace_csv(result: AlspgResult, fh) -> None:
    """Outer-loop trace, one row per (outer iteration, block)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    names = [b.name or f"block{i}" for i, b in enumerate(result.blocks)]
    for rec in result.trace:
        for name, v, rho, lam in zip(names, rec.violations, rec.rhos, rec.lambda_norms):
            w.writerow([rec.outer, name, repr(v), repr(rho), repr(lam), rec.inner_iterations, rec.inner_status,
                        rec.n_f, rec.n_grad, rec.n_g, rec.n_jac])


def _distance_parts(s: ProjectableSet, w: np.ndarray):
    """Distances to ``s`` and unit residual directions, one row per replica."""
    if isinstance(s, ReplicatedSet):
        blocks = w.reshape(s.count, s.block_dim)
        r = blocks - s.base.project_rows(blocks)
    else:
        r = (w - s.project(w))[None, :]
    d = np.linalg.norm(r, axis=1)
    unit = np.divide(r, d[:, None], out=np.zeros_like(r), where=d[:, None] > 0)
    return d, unit


def distance_block(block: ConstraintBlock) -> ConstraintBlock:
    """Recast ``g(x) in C`` as ``h(x) = dist(g(x), C) = 0`` with an explicit gradient.

    ``h`` is the hinge-clamped distance (zero inside the set); replicated
    sets yield one scalar per replica.  The solver then sees an ordinary
    equality constraint whose gradient is ``grad g^T * unit residual``.
    """
    s = block.set

    def h(x):
        return _distance_parts(s, np.asarray(block.g(x), float))[0]

    def jvp_t(x, r):
        _, units = _distance_parts(s, np.asarray(block.g(x), float))
        r = np.atleast_1d(np.asarray(r, float))
        return block.jvp_t(x, (units * r[:, None]).ravel())

    n = s.count if isinstance(s, ReplicatedSet) else 1
    return ConstraintBlock(h, jvp_t, SingletonSet.zeros(n), name=(block.name or "block") + ":dist")
