"""Spectral projected gradient descent with a non-monotone line search."""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import ProjectableSet, WholeSpace


class ObjectiveOracle:
    """Objective ``f`` and gradient with call counters.

    ``n_f`` and ``n_grad`` increase by exactly one per call of
    :meth:`value` and :meth:`gradient`.
    """

    def __init__(self, fun: Callable, grad: Callable):
        self.fun = fun
        self.grad = grad
        self.n_f = 0
        self.n_grad = 0

    def value(self, x) -> float:
        self.n_f += 1
        return float(self.fun(x))

    def gradient(self, x) -> np.ndarray:
        self.n_grad += 1
        return np.asarray(self.grad(x), dtype=float)

    def counters(self) -> dict:
        return {"n_f": self.n_f, "n_grad": self.n_grad}


class NonDescentDirection(ValueError):
    pass


class LineSearchFailed(RuntimeError):
    pass


@dataclass
class LineSearchConfig:
    beta: float = 1e-4
    alpha_init: float = 1.0
    memory: int = 10
    interp_lo: float = 0.1
    interp_hi: float = 0.9
    max_backtracks: int = 50

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if not 0 < self.interp_lo < self.interp_hi < 1:
            raise ValueError("need 0 < interp_lo < interp_hi < 1")


@dataclass
class SpgConfig:
    tol: float = 1e-5
    max_iter: int = 1000
    gamma_small: float = 1e-4
    gamma_min: float = 1e-10
    gamma_max: float = 1e10
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0 < self.gamma_min < self.gamma_max:
            raise ValueError("need 0 < gamma_min < gamma_max")


@dataclass
class LineSearchResult:
    alpha: float
    x: np.ndarray
    f: float
    fmax: float
    slope: float
    backtracks: int


@dataclass
class IterRecord:
    iter: int
    f: float
    stationarity: float
    gamma: float
    alpha: float  # step that produced this iterate (nan at iter 0)
    n_f: int
    n_grad: int
    fmax: float = math.nan
    slope: float = math.nan


@dataclass
class SpgResult:
    x_star: np.ndarray
    f_star: float
    status: str  # converged | max_iter | line_search_failed
    iterations: int
    gamma: float
    history: list[IterRecord]
    counters: dict

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def nonmonotone_line_search(
    oracle: ObjectiveOracle,
    x: np.ndarray,
    d: np.ndarray,
    f_history,
    cfg: LineSearchConfig,
    grad: np.ndarray | None = None,
    fx: float | None = None,
) -> LineSearchResult:
    """Backtrack along ``d`` until ``f(x + a d) <= f_max + a * beta * c``.

    ``f_history`` holds the objective values of the most recent accepted
    iterates, newest last; only the last ``cfg.memory`` are used.
    Quadratic interpolation proposes the next trial step and is accepted
    when it lies in ``[interp_lo * a, interp_hi * a]``; otherwise the step
    is halved.
    """
    if grad is None:
        grad = oracle.gradient(x)
    hist = list(f_history)
    if fx is None:
        fx = hist[-1]
    c = float(grad @ d)
    if not c < 0:
        raise NonDescentDirection(f"directional derivative {c:g} is not negative")
    fmax = max(hist[-cfg.memory:])
    alpha = cfg.alpha_init
    x_new = x + alpha * d
    f_new = oracle.value(x_new)
    backtracks = 0
    while not f_new <= fmax + alpha * cfg.beta * c:
        if backtracks >= cfg.max_backtracks:
            raise LineSearchFailed(f"no acceptable step after {backtracks} backtracks")
        denom = f_new - fx - alpha * c
        trial = -0.5 * alpha**2 * c / denom if denom > 0 and math.isfinite(denom) else -1.0
        if cfg.interp_lo * alpha <= trial <= cfg.interp_hi * alpha:
            alpha = trial
        else:
            alpha *= 0.5
        x_new = x + alpha * d
        f_new = oracle.value(x_new)
        backtracks += 1
    return LineSearchResult(alpha, x_new, f_new, fmax, c, backtracks)


def spectral_stepsize(s, y, cfg: SpgConfig, prev_gamma: float | None = None) -> float:
    """Safeguarded spectral step from the pair ``(s, y)``.

    Falls back to ``gamma_max`` when ``s.y <= 0`` and to ``prev_gamma`` when
    ``s`` vanishes.
    """
    ss = float(s @ s)
    if ss == 0.0 and prev_gamma is not None:
        return prev_gamma
    sy = float(s @ y)
    if not sy > 0:
        return cfg.gamma_max
    g1 = ss / sy
    g2 = sy / float(y @ y)
    gamma = g2 if g1 < 2.0 * g2 else g1 - 0.5 * g2
    return min(cfg.gamma_max, max(cfg.gamma_min, gamma))


def projected_gradient_norm(domain: ProjectableSet, x, g) -> float:
    """``||P(x - g) - x||_inf``, zero exactly at stationary points."""
    return float(np.max(np.abs(domain.project(x - g) - x)))


def initial_stepsize(oracle, domain, x, g, cfg: SpgConfig) -> float:
    x_bar = x - cfg.gamma_small * g
    y_bar = oracle.gradient(x_bar) - g
    if not np.any(y_bar):
        return 1.0
    return spectral_stepsize(x_bar - x, y_bar, cfg)


def spg_minimize(
    oracle: ObjectiveOracle,
    domain: ProjectableSet | None,
    x0,
    cfg: SpgConfig | None = None,
    gamma0: float | None = None,
) -> SpgResult:
    """Minimize ``oracle`` over ``domain`` starting from the projection of ``x0``.

    ``gamma0`` warm-starts the spectral step; otherwise it is estimated from a
    probe step of length ``gamma_small`` (one extra gradient call).
    """
    cfg = cfg or SpgConfig()
    ls = cfg.line_search
    domain = domain if domain is not None else WholeSpace()
    x = domain.project(np.asarray(x0, dtype=float))
    f = oracle.value(x)
    g = oracle.gradient(x)
    gamma = gamma0 if gamma0 is not None else initial_stepsize(oracle, domain, x, g, cfg)

    f_hist = deque([f], maxlen=ls.memory)
    history: list[IterRecord] = []
    best_x, best_f = x, f
    status = "max_iter"
    alpha = fmax = slope = math.nan
    k = 0
    while True:
        stat = projected_gradient_norm(domain, x, g)
        history.append(IterRecord(k, f, stat, gamma, alpha, oracle.n_f, oracle.n_grad, fmax, slope))
        if stat <= cfg.tol:
            status = "converged"
            break
        if k >= cfg.max_iter:
            break
        d = domain.project(x - gamma * g) - x
        try:
            res = nonmonotone_line_search(oracle, x, d, f_hist, ls, grad=g, fx=f)
        except (LineSearchFailed, NonDescentDirection):
            status = "line_search_failed"
            x, f = best_x, best_f
            break
        g_new = oracle.gradient(res.x)
        gamma = spectral_stepsize(res.x - x, g_new - g, cfg, prev_gamma=gamma)
        x, f, g = res.x, res.f, g_new
        alpha, fmax, slope = res.alpha, res.fmax, res.slope
        f_hist.append(f)
        if f < best_f:
            best_x, best_f = x, f
        k += 1

    return SpgResult(
        x_star=x,
        f_star=f,
        status=status,
        iterations=k,
        gamma=gamma,
        history=history,
        counters=oracle.counters(),
    )


HISTORY_COLUMNS = ("iter", "f", "stationarity", "gamma", "alpha", "n_f", "n_grad")


def write_history_csv(result: SpgResult, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(HISTORY_COLUMNS)
    for r in result.history:
        w.writerow([r.iter, repr(r.f), repr(r.stationarity), repr(r.gamma), repr(r.alpha), r.n_f, r.n_grad])
