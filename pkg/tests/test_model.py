"""Parameters, variable bookkeeping and equilibrium residuals."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from tanksoe import VECTORS, ModelParameters, build_benchmark_parameters, residuals
from tanksoe.diff import jacobians
from tanksoe.errors import ConfigError, DomainError, ParameterError
from tanksoe.model import EQUATIONS, build_system
from tanksoe.params import format_config, load_parameters, parse_config_text
from tanksoe.system import StackedPoint

REQUIRED = ("cR cH lR lH l w k i y pstar Kc Fc MC pi piN piCo picR picH pN pm pCo pcR pcH px pI pk q "
            "s Stil Rd Rk r dstar fO z g x cCoR cNR cDR cFR cCoH cNH cDH cFH").split()


def test_benchmark_defaults():
    p = build_benchmark_parameters()
    assert p.beta == pytest.approx(0.98788, abs=5e-6)
    assert p.epsilon == 6.0
    assert p.nu_subsidy == pytest.approx(1 - 5 / 6, abs=1e-15)
    assert p.tau_C == 0.0
    assert p.phi_Co == 0.45 and p.alpha_Co == 0.25


@pytest.mark.parametrize("change", [
    dict(beta=1.0), dict(beta=0.0), dict(lambda_R=1.0), dict(theta=1.0), dict(epsilon=1.0),
    dict(delta_K=0.0), dict(eta_c=0.0), dict(sigma_R=-0.1), dict(rho_Pco=1.0), dict(phi_Co=-0.1),
    dict(eta_g=1.0),
])
def test_invalid_parameters_rejected(change):
    with pytest.raises(ParameterError):
        build_benchmark_parameters().with_(**change)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.99, 0.99), st.floats(0.0, 0.2), st.floats(0.01, 0.99))
def test_valid_parameters_accepted(rho, sigma, lam):
    p = build_benchmark_parameters().with_(rho_Pco=rho, sigma_Pco=sigma, lambda_R=lam)
    assert p.rho_Pco == rho


def test_vectors_bookkeeping():
    v = VECTORS
    assert len(v.endogenous_names) == len(v.equation_names) == 52
    assert set(REQUIRED) <= set(v.endogenous_names)
    cls = v.classification()
    assert sum(c == "predetermined" for c in cls.values()) == 17


def test_config_round_trip(tmp_path):
    p = build_benchmark_parameters().with_(phi_s=0.5, tau_C=-1.0)
    f = tmp_path / "p.cfg"
    f.write_text(format_config(p))
    assert load_parameters(f) == p


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="unknown parameter key 'bogus'"):
        parse_config_text("beta = 0.99\nbogus = 1\n")
    with pytest.raises(ConfigError, match="not a number"):
        parse_config_text("beta = abc")
    with pytest.raises(ConfigError, match="key = value"):
        parse_config_text("beta 0.99")
    f = tmp_path / "bad.cfg"
    f.write_text("beta = 1.5  # out of range\n")
    with pytest.raises(ConfigError):
        load_parameters(f)


def test_steady_state_residuals_vanish(ss):
    pt = StackedPoint.steady(ss.values, 5)
    assert np.max(np.abs(residuals(ss.params, pt))) < 1e-8


def test_uncalibrated_parameters_rejected(ss):
    with pytest.raises(ParameterError):
        residuals(build_benchmark_parameters(), StackedPoint.steady(ss.values, 5))


def test_non_positive_consumption_is_a_domain_error(ss):
    y = ss.values.copy()
    y[VECTORS.index()["cH"]] = -1.0
    with pytest.raises(DomainError):
        residuals(ss.params, StackedPoint(ss.values, y, ss.values, np.zeros(5)))


def test_taylor_rule_fixed_point(ss):
    r = residuals(ss.params, StackedPoint.steady(ss.values, 5))
    assert r[EQUATIONS.index("taylor_rule")] == 0.0


def test_batched_evaluation_matches_columns(ss):
    rng = np.random.default_rng(0)
    Y = ss.values[:, None, None] * (1 + 1e-3 * rng.standard_normal((ss.values.size, 3, 4)))
    E = 1e-3 * rng.standard_normal((5, 4))
    batch = residuals(ss.params, y_prev=Y[:, 0], y_curr=Y[:, 1], y_next=Y[:, 2], eps=E)
    for j in range(4):
        one = residuals(ss.params, y_prev=Y[:, 0, j], y_curr=Y[:, 1, j], y_next=Y[:, 2, j], eps=E[:, j])
        assert_allclose(batch[:, j], one, rtol=0, atol=1e-14)


def test_exchange_rate_level_is_nominal(ss):
    """Shifting the log nominal exchange-rate level in every period only moves the rule that targets it."""
    rng = np.random.default_rng(1)
    base = [ss.values * (1 + 1e-3 * rng.standard_normal(ss.values.size)) for _ in range(3)]
    i = VECTORS.index()["Stil"]
    shifted = [b.copy() for b in base]
    for b in shifted:
        b[i] += 0.37
    e = np.zeros(5)
    r0 = residuals(ss.params, StackedPoint(*base, e))
    r1 = residuals(ss.params, StackedPoint(*shifted, e))
    k = EQUATIONS.index("taylor_rule")
    others = np.arange(len(EQUATIONS)) != k
    assert_allclose(r1[others], r0[others], rtol=0, atol=1e-12)
    p = ss.params
    assert_allclose(r1[k] - r0[k], -(1 - p.rho_R) * p.phi_s * 0.37, rtol=1e-12)


def test_resource_identity(ss):
    """Final expenditure equals domestic output plus commodity output, given the demand schedules."""
    v, p = ss.as_dict(), ss.params
    lam = p.lambda_R
    imports = ((1 - p.gamma_I) * (v["pI"] / v["pm"]) ** p.nu_I * v["i"] + lam * v["cFR"] + (1 - lam) * v["cFH"])
    cCo = lam * v["cCoR"] + (1 - lam) * v["cCoH"]
    nx = v["x"] + v["pCo"] * (v["yCo"] - cCo) - v["pm"] * imports
    spend = lam * v["pcR"] * v["cR"] + (1 - lam) * v["pcH"] * v["cH"] + v["pI"] * v["i"] + v["g"] * v["z"] + nx
    assert abs(spend - (v["y"] + v["pCo"] * v["yCo"])) < 1e-10


def test_budget_of_hand_to_mouth_holds(ss):
    v = ss.as_dict()
    assert abs(v["pcH"] * v["cH"] - v["w"] * v["lH"]) < 1e-12
    for j in ("R", "H"):
        spend = v[f"pcR" if j == "R" else "pcH"] * v[f"c{j}"]
        parts = v["pCo"] * v[f"cCo{j}"] + v["pN"] * v[f"cN{j}"]
        assert abs(spend - parts) < 1e-12


def test_homothetic_bundle_price_ignores_consumption(params):
    from tanksoe import solve_steady_state
    ss0 = solve_steady_state(params.with_(phi_Co=0.0))
    sysm = build_system(ss0.params, ss0.values)
    d = jacobians(sysm)
    idx = VECTORS.index()
    for eq, var in (("bundle_R", "cR"), ("bundle_H", "cH")):
        assert d.J_curr[EQUATIONS.index(eq), idx[var]] == 0.0
