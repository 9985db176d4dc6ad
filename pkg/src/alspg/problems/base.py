from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..auglag import AlspgConfig, AlspgResult, ConstraintBlock, alspg_solve, distance_block
from ..geometry import ProjectableSet, SingletonSet
from ..spg import ObjectiveOracle


@dataclass
class ConstrainedProblem:
    """``min_{x in domain} f(x)`` subject to projection blocks ``g_i(x) in C_i``."""

    fun: Callable
    grad: Callable
    domain: ProjectableSet | None
    blocks: list[ConstraintBlock]
    x0: np.ndarray
    name: str = ""
    meta: dict = field(default_factory=dict)

    def oracle(self) -> ObjectiveOracle:
        return ObjectiveOracle(self.fun, self.grad)

    def solve(self, cfg: AlspgConfig | None = None, x0=None) -> AlspgResult:
        return alspg_solve(self.oracle(), self.domain, self.blocks, self.x0 if x0 is None else x0, cfg)

    def feasible(self, x, tol: float = 1e-4) -> bool:
        """Every block within ``tol`` of its set and ``x`` inside the domain."""
        ok = self.domain is None or self.domain.contains(x, 1e-9)
        return ok and all(b.set.distance(b.g(x)) <= tol for b in self.blocks)


def without_projections(problem: ConstrainedProblem) -> ConstrainedProblem:
    """Ablation form: every projection block becomes a distance equality."""
    blocks = [b if isinstance(b.set, SingletonSet) else distance_block(b) for b in problem.blocks]
    return replace(problem, blocks=blocks, name=problem.name + "-noproj")
