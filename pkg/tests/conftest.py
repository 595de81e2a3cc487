"""Shared fixtures: the benchmark solution (solved once per session) and small test systems."""

import warnings

import numpy as np
import pytest

from tanksoe import build_benchmark_parameters, solve_steady_state
from tanksoe.pipeline import solve_model
from tanksoe.system import DynamicSystem


@pytest.fixture(autouse=True)
def _quiet_near_unit_roots():
    # the scale-factor root at delta_Z is expected; other warnings stay visible in dedicated tests
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="generalised eigenvalue moduli near one")
        yield


@pytest.fixture(scope="session")
def params():
    return build_benchmark_parameters()


@pytest.fixture(scope="session")
def ss(params):
    return solve_steady_state(params)


@pytest.fixture(scope="session")
def model(params, ss):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return solve_model(params, order=2, steady_state=ss)


@pytest.fixture(scope="session")
def sol(model):
    return model.solution


def scalar_system(a=0.5, b=0.3, sd=1.0):
    """``y_t = a E_t y_{t+1} + b y_{t-1} + e_t``."""
    def f(yp, yc, yn, e):
        return yc - (a * yn + b * yp + e)
    return DynamicSystem(var_names=("y",), shock_names=("e",), residual=f, steady_state=np.zeros(1),
                         predetermined=("y",), shock_cov=np.array([[sd ** 2]]))


def static_system():
    """``y_t = 2 w_t + e1``, ``w_t = -e2``: no leads or lags."""
    def f(yp, yc, yn, e):
        return np.stack([yc[0] - 2.0 * yc[1] - e[0], yc[1] + e[1]])
    return DynamicSystem(var_names=("y", "w"), shock_names=("e1", "e2"), residual=f,
                         steady_state=np.zeros(2), predetermined=())


def linear_system(rho=0.9, beta=0.99):
    """``x_t = rho x_{t-1} + e``, ``y_t = beta E y_{t+1} + x_t``."""
    def f(yp, yc, yn, e):
        return np.stack([yc[0] - rho * yp[0] - e[0], yc[1] - beta * yn[1] - yc[0]])
    return DynamicSystem(var_names=("x", "y"), shock_names=("e",), residual=f, steady_state=np.zeros(2),
                         predetermined=("x",), shock_cov=np.array([[0.01]]))


def polynomial_system(a=0.8, b=1.0, c=0.4, d=0.6, exu=0.3):
    """Backward-looking quadratic law with an exactly known second-order policy."""
    def f(yp, yc, yn, e):
        x1, u = yp[0], e[0]
        return np.stack([yc[0] - (a * x1 + b * u + 0.5 * c * x1 ** 2 + 0.5 * d * u ** 2 + exu * x1 * u)])
    return DynamicSystem(var_names=("x",), shock_names=("e",), residual=f, steady_state=np.zeros(1),
                         predetermined=("x",), shock_cov=np.array([[0.04]]))


def forward_quadratic_system(rho=0.7, beta=0.95):
    """``x_t = rho x_{t-1} + e``, ``y_t = beta E y_{t+1} + x_t^2``: variance feeds the mean of y."""
    def f(yp, yc, yn, e):
        return np.stack([yc[0] - rho * yp[0] - e[0], yc[1] - beta * yn[1] - yc[0] ** 2])
    return DynamicSystem(var_names=("x", "y"), shock_names=("e",), residual=f, steady_state=np.zeros(2),
                         predetermined=("x",), shock_cov=np.array([[0.01]]))
