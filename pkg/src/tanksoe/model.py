"""Variable ordering and equilibrium conditions of the economy.

All real quantities are deflated by current technology ``A_t`` and all prices
are relative to the domestic final good. Inflation and interest rates are
gross. ``Stil`` is the detrended log nominal exchange rate (zero in steady
state); the exogenous AR(1) drivers are carried as endogenous states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DomainError, ParameterError
from .params import ModelParameters
from .system import DynamicSystem, StackedPoint

ENDOGENOUS = (
    # households
    "cR", "cH", "lR", "lH", "l", "w", "VR", "VH",
    # firms and Calvo block
    "y", "k", "i", "pstar", "Kc", "Fc", "MC", "pi",
    # relative prices
    "pN", "pm", "pCo", "pcR", "pcH", "px", "pI", "pk", "q",
    # inflation rates
    "piN", "piCo", "picR", "picH",
    # exchange rate, rates of return
    "s", "Stil", "Rd", "Rk", "r",
    # external and government
    "dstar", "fO", "z", "g", "x",
    # demand schedules
    "cCoR", "cNR", "cDR", "cFR", "cCoH", "cNH", "cDH", "cFH", "cN",
    # exogenous states
    "Pco", "Rstar", "yCo", "dA",
)

SHOCKS = ("eps_P", "eps_Rstar", "eps_R", "eps_C", "eps_A")

PREDETERMINED = (
    "pstar", "k", "i", "pN", "pCo", "pcR", "pcH", "q", "Stil", "Rd", "pk",
    "fO", "z", "Pco", "Rstar", "yCo", "dA",
)
FORWARD = ("Kc", "Fc", "pi", "cR", "s", "Rk", "VR", "VH")

EQUATIONS = (
    "calvo_K", "calvo_F", "calvo_reset", "price_dispersion", "marginal_cost",
    "euler_bond", "euler_foreign", "euler_capital",
    "production", "goods_market", "noncommodity_aggregate",
    "price_N", "real_exchange_rate", "price_Co", "bundle_R", "bundle_H",
    "infl_N", "infl_Co", "infl_cR", "infl_cH",
    "demand_Co_R", "demand_N_R", "demand_D_R", "demand_F_R",
    "demand_Co_H", "demand_N_H", "demand_D_H", "demand_F_H",
    "terms_of_trade", "rer_law", "depreciation",
    "price_capital", "capital_accumulation", "rental_rate", "return_capital", "price_I",
    "labor_aggregate", "labor_supply_H", "labor_supply_R", "budget_H",
    "scale_factor",
    "external_balance", "foreign_assets",
    "taylor_rule", "fiscal_rule",
    "exports",
    "law_Pco", "law_Rstar", "law_yCo", "law_dA",
    "welfare_R", "welfare_H",
)

# transformation used for reported responses: "pct" = percent of level,
# "ann" = annualised percentage points for gross quarterly rates,
# "log100" = already a log level, "level" = raw deviation
RATE_VARS = ("pi", "piN", "piCo", "picR", "picH", "Rd", "Rk", "Rstar", "s")
UNITS = {nm: ("ann" if nm in RATE_VARS else "log100" if nm == "Stil"
              else "level" if nm in ("VR", "VH", "dA") else "pct") for nm in ENDOGENOUS}


@dataclass(frozen=True)
class ModelVectors:
    endogenous_names: tuple[str, ...] = ENDOGENOUS
    shock_names: tuple[str, ...] = SHOCKS
    equation_names: tuple[str, ...] = EQUATIONS
    predetermined: tuple[str, ...] = PREDETERMINED
    forward: tuple[str, ...] = FORWARD

    def __post_init__(self):
        if len(self.endogenous_names) != len(self.equation_names):
            raise ValueError("equation count differs from variable count")
        for group in (self.endogenous_names, self.shock_names, self.equation_names):
            if len(set(group)) != len(group):
                raise ValueError("duplicate names")
        if not set(self.predetermined) <= set(self.endogenous_names):
            raise ValueError("unknown predetermined variable")

    def classification(self) -> dict[str, str]:
        return {nm: "predetermined" if nm in self.predetermined
                else "non-predetermined" if nm in self.forward else "static"
                for nm in self.endogenous_names}

    def index(self) -> dict[str, int]:
        return {nm: i for i, nm in enumerate(self.endogenous_names)}


VECTORS = ModelVectors()
_IDX = VECTORS.index()


def unpack(y: np.ndarray) -> dict[str, np.ndarray]:
    return {nm: y[i] for nm, i in _IDX.items()}


def pack(values: Mapping[str, float]) -> np.ndarray:
    return np.array([values[nm] for nm in ENDOGENOUS], dtype=float)


def unit_cost(p: ModelParameters, pCo, pN):
    """Price of one unit of the Stone-Geary utility index above subsistence."""
    a = p.alpha_Co
    return (pCo / a) ** a * (pN / (1 - a)) ** (1 - a)


def adj_cost(p: ModelParameters, x):
    return 0.5 * p.kappa_I * (x - p.growth) ** 2


def adj_cost_prime(p: ModelParameters, x):
    return p.kappa_I * (x - p.growth)


def residuals(params: ModelParameters, pt: StackedPoint | None = None, *,
              y_prev=None, y_curr=None, y_next=None, eps=None) -> np.ndarray:
    """Stacked equilibrium residuals, one per equation in ``EQUATIONS`` order.

    Accepts either a :class:`StackedPoint` or the four blocks as keywords;
    blocks may carry a trailing batch axis.
    """
    if pt is not None:
        y_prev, y_curr, y_next, eps = pt.y_prev, pt.y_curr, pt.y_next, pt.eps
    if params.ybar <= 0:
        raise ParameterError("ybar/gbar not calibrated; run solve_steady_state first")
    with np.errstate(all="ignore"):
        out = _residuals(params, np.asarray(y_prev, float), np.asarray(y_curr, float),
                         np.asarray(y_next, float), np.asarray(eps, float))
    if not np.all(np.isfinite(out)):
        raise DomainError("residual evaluated outside its domain (non-positive log/power argument)")
    return out


def _residuals(p: ModelParameters, yp, yc, yn, e) -> np.ndarray:
    L, C, N = unpack(yp), unpack(yc), unpack(yn)
    eP, eRs, eR, eC, eA = e[0], e[1], e[2], e[3], e[4]
    lam, aCo, beta = p.lambda_R, p.alpha_Co, p.beta
    eps, theta, alpha = p.epsilon, p.theta, p.alpha
    gr_c, gr_n = np.exp(C["dA"]), np.exp(N["dA"])

    pu_c = unit_cost(p, C["pCo"], C["pN"])
    # marginal utility of expenditure, 1 / (p^c c), as in the equilibrium conditions
    lam_c = 1.0 / (C["pcR"] * C["cR"])
    lam_n = 1.0 / (N["pcR"] * N["cR"])
    sdf = beta * lam_n / (lam_c * gr_n)      # real discount factor t -> t+1

    reset = ((1 - theta * C["pi"] ** (eps - 1)) / (1 - theta)) ** (1 / (1 - eps))
    klr = L["k"] / (gr_c * C["l"])  # capital per effective hour

    x_c = C["i"] * gr_c / L["i"]
    x_n = N["i"] * gr_n / C["i"]

    def cd_demand(c, pu, pCo, pN):
        cCo = aCo * pu * c / pCo + p.phi_Co
        cNv = (1 - aCo) * pu * c / pN
        return cCo, cNv

    cCoR, cNR = cd_demand(C["cR"], pu_c, C["pCo"], C["pN"])
    cCoH, cNH = cd_demand(C["cH"], pu_c, C["pCo"], C["pN"])
    om, etac = p.omega_D, p.eta_c
    inv_dom = p.gamma_I * C["pI"] ** p.nu_I * C["i"]
    inv_imp = (1 - p.gamma_I) * (C["pI"] / C["pm"]) ** p.nu_I * C["i"]

    inflation_gap = (lam * C["picR"] + (1 - lam) * C["picH"]) / p.pi_bar
    taylor_rhs = (p.rho_R * np.log(L["Rd"] / p.Rd_bar)
                  + (1 - p.rho_R) * (p.phi_pi * np.log(inflation_gap)
                                     + p.phi_y * np.log(C["y"] / p.ybar)
                                     + p.phi_s * C["Stil"])
                  + eR)

    flow_R = np.log(C["cR"]) - p.chi_R * C["lR"] ** (1 + p.varphi) / (1 + p.varphi) + p.utility_shift
    flow_H = np.log(C["cH"]) - p.chi_H * C["lH"] ** (1 + p.varphi) / (1 + p.varphi) + p.utility_shift

    res = [
        # Calvo pricing
        C["Kc"] - (eps / (eps - 1) * lam_c * C["y"] * C["MC"] + beta * theta * N["pi"] ** eps * N["Kc"]),
        C["Fc"] - (lam_c * C["y"] + beta * theta * N["pi"] ** (eps - 1) * N["Fc"]),
        C["Kc"] / C["Fc"] - reset,
        1 / C["pstar"] - ((1 - theta) * reset ** (-eps) + theta * C["pi"] ** eps / L["pstar"]),
        C["MC"] - (1 - p.nu_subsidy) * C["w"] / ((1 - alpha) * klr ** alpha),
        # Ricardian Euler equations
        1 - sdf * C["Rd"] / N["pi"],
        1 / C["cR"] - (-p.gamma_portfolio * (C["dstar"] / (C["z"] * C["pcR"]) - p.Upsilon)
                       + beta * N["s"] * C["Rstar"] / (N["picR"] * N["cR"] * gr_n)),
        1 - sdf * N["Rk"] / N["pi"],
        # production and market clearing
        C["y"] - C["pstar"] * klr ** alpha * C["l"],
        C["y"] - (inv_dom + lam * C["cDR"] + (1 - lam) * C["cDH"] + C["g"] * C["z"] + C["x"]),
        C["cN"] - (lam * C["cNR"] + (1 - lam) * C["cNH"]),
        # relative prices
        C["pN"] - (om + (1 - om) * C["pm"] ** (1 - etac)) ** (1 / (1 - etac)),
        C["q"] - C["pm"] / C["pcR"],
        C["pCo"] - C["pm"] * C["Pco"] / p.Pbar_f,
        C["pcR"] - (pu_c + C["pCo"] * p.phi_Co / C["cR"]),
        C["pcH"] - (pu_c + C["pCo"] * p.phi_Co / C["cH"]),
        # inflation rates
        C["piN"] - C["pi"] * C["pN"] / L["pN"],
        C["piCo"] - C["pi"] * C["pCo"] / L["pCo"],
        C["picR"] - C["pi"] * C["pcR"] / L["pcR"],
        C["picH"] - C["pi"] * C["pcH"] / L["pcH"],
        # Ricardian demand schedules
        C["cCoR"] - cCoR,
        C["cNR"] - cNR,
        C["cDR"] - om * C["pN"] ** etac * C["cNR"],
        C["cFR"] - (1 - om) * (C["pN"] / C["pm"]) ** etac * C["cNR"],
        # hand-to-mouth demand schedules
        C["cCoH"] - cCoH,
        C["cNH"] - cNH,
        C["cDH"] - om * C["pN"] ** etac * C["cNH"],
        C["cFH"] - (1 - om) * (C["pN"] / C["pm"]) ** etac * C["cNH"],
        # exchange rates
        C["q"] * C["px"] * C["pcR"] - 1,
        C["q"] / L["q"] - C["s"] * p.pi_f / C["picR"],
        C["s"] - p.psi_S * np.exp(C["Stil"] - L["Stil"]),
        # investment
        C["pI"] - (C["pk"] * (1 - adj_cost(p, x_c) - adj_cost_prime(p, x_c) * x_c)
                   + sdf * N["pk"] * adj_cost_prime(p, x_n) * x_n ** 2),
        C["k"] - ((1 - p.delta_K) * L["k"] / gr_c + (1 - adj_cost(p, x_c)) * C["i"]),
        C["r"] - alpha / (1 - alpha) * (1 - p.nu_subsidy) * C["w"] / klr,
        C["Rk"] - C["pi"] * (C["r"] + (1 - p.delta_K) * C["pk"]) / L["pk"],
        C["pI"] - (p.gamma_I + (1 - p.gamma_I) * C["pm"] ** (1 - p.nu_I)) ** (1 / (1 - p.nu_I)),
        # labor
        C["l"] - (lam * C["lR"] + (1 - lam) * C["lH"]),
        C["w"] - C["pcH"] * C["cH"] * p.chi_H * C["lH"] ** p.varphi,
        C["w"] - C["pcR"] * C["cR"] * p.chi_R * C["lR"] ** p.varphi,
        C["pcH"] * C["cH"] - C["w"] * C["lH"],
        # scale factor
        np.log(C["z"] / p.zbar) - (p.delta_Z * np.log(L["z"] / p.zbar) - p.delta_Z * (C["dA"] - p.DeltaA_bar)),
        # external balance
        (C["x"] + C["pCo"] * (C["yCo"] - lam * C["cCoR"] - (1 - lam) * C["cCoH"])
         - C["pm"] * (inv_imp + lam * C["cFR"] + (1 - lam) * C["cFH"]))
        - (C["fO"] - C["s"] * L["Rstar"] * L["fO"] / (C["pi"] * gr_c)),
        C["dstar"] - C["fO"],
        # policy
        np.log(C["Rd"] / p.Rd_bar) - taylor_rhs,
        C["g"] - (p.gbar + p.tau_C * (C["Pco"] * C["yCo"] / (p.Pbar_Co * p.Ybar_Co) - 1)),
        # non-commodity exports
        C["x"] - C["px"] ** (-p.eta_f) * p.Ybar_f * C["z"],
        # exogenous laws of motion
        np.log(C["Pco"] / p.Pbar_Co) - (p.rho_Pco * np.log(L["Pco"] / p.Pbar_Co) + eP),
        np.log(C["Rstar"] / p.Rstar_bar) - (p.rho_Rstar * np.log(L["Rstar"] / p.Rstar_bar) + eRs),
        np.log(C["yCo"] / p.Ybar_Co) - (p.rho_yCo * np.log(L["yCo"] / p.Ybar_Co) + eC),
        (C["dA"] - p.DeltaA_bar) - (p.rho_A * (L["dA"] - p.DeltaA_bar) + eA),
        # welfare recursions
        C["VR"] - (flow_R + beta * N["VR"]),
        C["VH"] - (flow_H + beta * N["VH"]),
    ]
    return np.stack(res)


def shock_covariance(params: ModelParameters) -> np.ndarray:
    return np.diag(np.square(params.shock_std))


def build_system(params: ModelParameters, ss: np.ndarray) -> DynamicSystem:
    """Wrap the economy as a :class:`DynamicSystem` around a solved steady state."""
    def f(yp, yc, yn, e):
        return residuals(params, y_prev=yp, y_curr=yc, y_next=yn, eps=e)
    return DynamicSystem(
        var_names=ENDOGENOUS, shock_names=SHOCKS, residual=f,
        steady_state=np.asarray(ss, float), predetermined=PREDETERMINED,
        equation_names=EQUATIONS, shock_cov=shock_covariance(params),
        expected_unit_roots=(params.delta_Z,),
        meta={"params": params, "units": UNITS},
    )
