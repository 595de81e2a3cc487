"""Perturbation toolkit for a two-agent New Keynesian small open economy with Stone-Geary demand."""

from .params import ModelParameters, build_benchmark_parameters, load_parameters
from .model import ModelVectors, VECTORS, residuals
from .steady_state import SteadyState, solve_steady_state, steady_state_report

__version__ = "0.1.0"
