"""Calibrated parameters of the two-agent small open economy model."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError, ParameterError


@dataclass(frozen=True)
class ModelParameters:
    """Every calibrated constant and shock-process setting.

    Quantities are per quarter. ``chi_R``, ``chi_H``, ``gbar`` and ``ybar`` are
    placeholders until :func:`tanksoe.steady_state.solve_steady_state` fills
    them in; the residual function needs the completed set.
    """

    # households
    beta: float = 1.05 ** -0.25
    lambda_R: float = 0.50
    varphi: float = 1.0
    chi_R: float = 1.0
    chi_H: float = 1.0
    alpha_Co: float = 0.25
    phi_Co: float = 0.45
    lbar: float = 0.10563

    # production, trade and investment
    omega_D: float = 0.45
    eta_c: float = 2.25
    gamma_I: float = 0.25
    nu_I: float = 0.75
    kappa_I: float = 2.0
    delta_K: float = 0.025
    alpha: float = 0.4
    theta: float = 0.75
    epsilon: float = 6.0
    nu_subsidy: float = 1.0 - 5.0 / 6.0

    # external sector
    eta_f: float = 1.5
    Ybar_f: float = 5.0
    Ybar_Co: float = 2.0
    Pbar_Co: float = 0.15
    Pbar_f: float = 1.8927
    zbar: float = 0.0029516
    delta_Z: float = 0.999
    DeltaA_bar: float = math.log(1.03) / 4
    pi_f: float = 1.0
    gamma_portfolio: float = 0.01
    Upsilon: float = 0.4

    # government
    eta_g: float = 0.30
    gbar: float = 0.0
    ybar: float = 0.0

    # policy rules
    pi_bar: float = 1.05 ** 0.25
    rho_R: float = 0.75
    phi_pi: float = 1.5
    phi_y: float = 0.05
    phi_s: float = 0.02
    tau_C: float = 0.0

    # shock processes
    rho_Pco: float = 0.9
    sigma_Pco: float = 0.05
    rho_Rstar: float = 0.9
    sigma_Rstar: float = 0.0015
    sigma_R: float = 0.0025
    rho_yCo: float = 0.9
    sigma_yCo: float = 0.0
    rho_A: float = 0.5
    sigma_A: float = 0.0

    # constant added to period utility of both households (welfare plumbing)
    utility_shift: float = 0.0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ParameterError(msg)

        need(0 < self.beta < 1, "beta must lie in (0, 1)")
        need(0 < self.lambda_R < 1, "lambda_R must lie in (0, 1)")
        need(0 <= self.theta < 1, "theta must lie in [0, 1)")
        need(self.epsilon > 1, "epsilon must exceed 1")
        need(0 < self.delta_K < 1, "delta_K must lie in (0, 1)")
        need(0 < self.alpha_Co < 1, "alpha_Co must lie in (0, 1)")
        need(0 < self.alpha < 1, "alpha must lie in (0, 1)")
        need(0 < self.delta_Z < 1, "delta_Z must lie in (0, 1)")
        need(self.phi_Co >= 0, "phi_Co must be non-negative")
        need(0 <= self.eta_g < 1, "eta_g must lie in [0, 1)")
        for name in ("varphi", "eta_c", "nu_I", "eta_f", "kappa_I", "lbar",
                     "Ybar_f", "Ybar_Co", "Pbar_Co", "Pbar_f", "zbar", "pi_f", "pi_bar"):
            need(getattr(self, name) > 0, f"{name} must be positive")
        for name in ("sigma_Pco", "sigma_Rstar", "sigma_R", "sigma_yCo", "sigma_A"):
            need(getattr(self, name) >= 0, f"{name} must be non-negative")
        for name in ("rho_Pco", "rho_Rstar", "rho_yCo", "rho_A", "rho_R"):
            need(-1 < getattr(self, name) < 1, f"{name} must lie in (-1, 1)")

    def with_(self, **changes) -> "ModelParameters":
        return replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)

    # steady-state anchors that follow directly from the parameters
    @property
    def growth(self) -> float:
        return math.exp(self.DeltaA_bar)

    @property
    def Rd_bar(self) -> float:
        return self.pi_bar * self.growth / self.beta

    @property
    def Rstar_bar(self) -> float:
        return self.pi_f * self.growth / self.beta

    @property
    def psi_S(self) -> float:
        return self.pi_bar / self.pi_f

    @property
    def shock_std(self) -> tuple[float, ...]:
        return (self.sigma_Pco, self.sigma_Rstar, self.sigma_R, self.sigma_yCo, self.sigma_A)


FIELD_NAMES = tuple(f.name for f in fields(ModelParameters))


def build_benchmark_parameters() -> ModelParameters:
    """Benchmark calibration; household-specific labor scales are left at 1."""
    return ModelParameters()


def parse_config_text(text: str) -> dict[str, float]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in FIELD_NAMES:
            raise ConfigError(f"unknown parameter key {key!r} (line {lineno})")
        try:
            out[key] = float(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: value for {key!r} is not a number: {value!r}") from None
    return out


def load_parameters(path: str | Path | None, base: ModelParameters | None = None) -> ModelParameters:
    base = base or build_benchmark_parameters()
    if path is None:
        return base
    overrides = parse_config_text(Path(path).read_text())
    try:
        return base.with_(**overrides)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def format_config(params: ModelParameters) -> str:
    return "".join(f"{k} = {v!r}\n" for k, v in params.as_dict().items())
