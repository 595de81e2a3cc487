"""Parameters to steady state to derivatives to policy function, in one call."""

from __future__ import annotations

from dataclasses import dataclass

from .diff import DerivativeBundle, derivatives
from .model import build_system
from .params import ModelParameters
from .perturbation import FirstOrderSolution, SecondOrderSolution, solve_first_order, solve_second_order
from .steady_state import SteadyState, solve_steady_state
from .system import DynamicSystem


@dataclass(frozen=True)
class ModelSolution:
    params: ModelParameters
    steady_state: SteadyState
    system: DynamicSystem
    derivatives: DerivativeBundle
    solution: FirstOrderSolution | SecondOrderSolution

    @property
    def first(self) -> FirstOrderSolution:
        return self.solution.first


def solve_model(params: ModelParameters, order: int = 2, *, strict: bool = True,
                steady_state: SteadyState | None = None, warn: bool = True) -> ModelSolution:
    """Solve the economy to the requested perturbation order.

    ``strict=False`` turns Richardson disagreements in the derivatives into
    warnings instead of errors.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    ss = steady_state or solve_steady_state(params)
    system = build_system(ss.params, ss.values)
    d = derivatives(system, order=order, strict=strict)
    first = solve_first_order(d, system, warn=warn)
    sol = first if order == 1 else solve_second_order(d, first)
    return ModelSolution(params=ss.params, steady_state=ss, system=system, derivatives=d, solution=sol)
