"""Generic stacked rational-expectations system ``E_t f(y_{t-1}, y_t, y_{t+1}, eps_t) = 0``.

The perturbation and differentiation code only ever sees this interface, so
small hand-written test models and the full economy go through the same path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ResidualFn = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class StackedPoint:
    y_prev: np.ndarray
    y_curr: np.ndarray
    y_next: np.ndarray
    eps: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.y_prev, self.y_curr, self.y_next, self.eps])

    @classmethod
    def steady(cls, ss: np.ndarray, n_shocks: int) -> "StackedPoint":
        ss = np.asarray(ss, dtype=float)
        return cls(ss, ss, ss, np.zeros(n_shocks))


@dataclass(frozen=True)
class DynamicSystem:
    """Residual function plus the bookkeeping the solvers need.

    ``residual`` accepts arrays shaped ``(n,)`` or ``(n, B)`` (a batch of B
    points) for the three endogenous blocks and ``(n_e,)``/``(n_e, B)`` for
    the shocks, and returns ``(n,)``/``(n, B)``.
    """

    var_names: tuple[str, ...]
    shock_names: tuple[str, ...]
    residual: ResidualFn
    steady_state: np.ndarray
    predetermined: tuple[str, ...]
    equation_names: tuple[str, ...] = ()
    shock_cov: np.ndarray | None = None
    expected_unit_roots: tuple[float, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return len(self.var_names)

    @property
    def n_e(self) -> int:
        return len(self.shock_names)

    @property
    def stacked_dim(self) -> int:
        return 3 * self.n + self.n_e

    @property
    def pred_index(self) -> np.ndarray:
        pos = {nm: i for i, nm in enumerate(self.var_names)}
        return np.array(sorted(pos[nm] for nm in self.predetermined), dtype=int)

    def index(self, name: str) -> int:
        return self.var_names.index(name)

    def shock_index(self, name: str) -> int:
        return self.shock_names.index(name)

    def eval_stacked(self, w: np.ndarray) -> np.ndarray:
        """Evaluate on stacked argument(s) ``w`` of shape ``(m,)`` or ``(m, B)``."""
        n = self.n
        return self.residual(w[:n], w[n:2 * n], w[2 * n:3 * n], w[3 * n:])

    def stacked_steady(self) -> np.ndarray:
        return StackedPoint.steady(self.steady_state, self.n_e).stacked()

    def covariance(self) -> np.ndarray:
        if self.shock_cov is None:
            return np.eye(self.n_e)
        return np.asarray(self.shock_cov, dtype=float)

    def with_cov(self, cov: np.ndarray) -> "DynamicSystem":
        from dataclasses import replace
        return replace(self, shock_cov=np.asarray(cov, dtype=float))
