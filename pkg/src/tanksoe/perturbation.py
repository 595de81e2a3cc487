"""First- and second-order perturbation of ``E_t f(y_{t-1}, y_t, y_{t+1}, eps_t) = 0``.

Notation (deviations from steady state, ``P`` = predetermined variables):

* first order: ``x_t = T x_{t-1} + R eps_t`` with ``T`` zero outside the ``P`` columns;
* second order in the state ``s_t = (x_{t-1,P}, eps_t)`` of size ``k``:
  ``x_t = g_s s_t + 1/2 G (s_t kron s_t) + 1/2 g_ss`` where ``g_s = [T_P, R]``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la

from .diff import DerivativeBundle
from .errors import BKViolationTooFew, BKViolationTooMany, SingularSylvester
from .system import DynamicSystem

UNIT_BAND = (0.999, 1.001)
INF_TOL = 1e-10
SYLVESTER_COND = 1e13


class NearUnitRoot(UserWarning):
    pass


@dataclass(frozen=True)
class EigenReport:
    moduli: np.ndarray
    n_stable: int
    n_unstable: int
    n_infinite: int
    n_forward: int
    n_predetermined: int
    near_unit: tuple[float, ...] = ()

    def summary(self) -> str:
        return (f"stable={self.n_stable} unstable={self.n_unstable} (infinite {self.n_infinite}) "
                f"forward-looking={self.n_forward} predetermined={self.n_predetermined}")


@dataclass(frozen=True)
class FirstOrderSolution:
    T: np.ndarray
    R: np.ndarray
    system: DynamicSystem = field(repr=False, compare=False)
    eigen: EigenReport | None = None
    residual: float = 0.0

    @property
    def var_names(self):
        return self.system.var_names

    @property
    def shock_names(self):
        return self.system.shock_names

    @property
    def pred(self) -> np.ndarray:
        return self.system.pred_index

    @property
    def hx(self) -> np.ndarray:
        """State-to-state block ``T[P, P]``."""
        p = self.pred
        return self.T[np.ix_(p, p)]

    @property
    def g_s(self) -> np.ndarray:
        return np.hstack([self.T[:, self.pred], self.R])

    @property
    def steady_state(self) -> np.ndarray:
        return self.system.steady_state

    @property
    def shock_cov(self) -> np.ndarray:
        return self.system.covariance()

    @property
    def order(self) -> int:
        return 1

    @property
    def first(self) -> "FirstOrderSolution":
        return self


@dataclass(frozen=True)
class SecondOrderSolution:
    first: FirstOrderSolution
    G_xx: np.ndarray        # (n, k, k), symmetric in the last two indices
    G_ss: np.ndarray        # (n,)
    shock_cov: np.ndarray
    residual: float = 0.0

    @property
    def order(self) -> int:
        return 2

    @property
    def system(self) -> DynamicSystem:
        return self.first.system

    @property
    def var_names(self):
        return self.first.var_names

    @property
    def shock_names(self):
        return self.first.shock_names

    @property
    def steady_state(self) -> np.ndarray:
        return self.first.steady_state

    @property
    def T(self):
        return self.first.T

    @property
    def R(self):
        return self.first.R

    @property
    def G(self) -> np.ndarray:
        """``G_xx`` flattened to ``(n, k*k)``."""
        n, k, _ = self.G_xx.shape
        return self.G_xx.reshape(n, k * k)


def _incidence_report(d: DerivativeBundle, system: DynamicSystem) -> str:
    lag = np.any(d.J_prev != 0, axis=0)
    lead = np.any(d.J_next != 0, axis=0)
    pred = set(system.predetermined)
    lines = []
    for i, nm in enumerate(system.var_names):
        declared = "P" if nm in pred else "-"
        lines.append(f"{nm}: lag={'y' if lag[i] else 'n'} lead={'y' if lead[i] else 'n'} declared={declared}")
    return "\n".join(lines)


def solve_first_order(d: DerivativeBundle, system: DynamicSystem, *, warn: bool = True) -> FirstOrderSolution:
    """Solve the linearised system by an ordered generalised Schur decomposition.

    Pencil on ``z_t = (x_{t-1}, x_t)``::

        [I 0; 0 J_next] z_{t+1} = [0 I; -J_prev -J_curr] z_t

    Stable roots (strictly inside the unit circle) are ordered first; a unique
    bounded solution needs exactly ``n`` of them. Roots on the circle count as
    unstable.
    """
    n = system.n
    A, B, C, D = d.J_prev, d.J_curr, d.J_next, d.J_eps
    pred = system.pred_index
    nonpred = np.setdiff1d(np.arange(n), pred)
    if np.any(A[:, nonpred] != 0):
        bad = [system.var_names[i] for i in nonpred if np.any(A[:, i] != 0)]
        raise BKViolationTooMany(
            f"variables appear lagged but are not declared predetermined: {bad}\n"
            + _incidence_report(d, system), n_stable=-1, n_required=n)
    I, Z = np.eye(n), np.zeros((n, n))
    E = np.block([[I, Z], [Z, C]])
    F = np.block([[Z, I], [-A, -B]])
    S, Tt, alpha, beta, Q, Zm = la.ordqz(F, E, sort="iuc", output="real")
    with np.errstate(divide="ignore", invalid="ignore"):
        moduli = np.where(np.abs(beta) > INF_TOL * np.maximum(np.abs(alpha), 1), np.abs(alpha / beta), np.inf)
    n_stable = int(np.sum(moduli < 1))
    n_inf = int(np.sum(np.isinf(moduli)))
    n_forward = int(np.sum(np.any(C != 0, axis=0)))
    expected = tuple(system.expected_unit_roots)
    near = tuple(float(m) for m in np.sort(moduli)
                 if UNIT_BAND[0] < m < UNIT_BAND[1] and not any(abs(m - e) < 1e-6 for e in expected))
    report = EigenReport(moduli=np.sort(moduli), n_stable=n_stable, n_unstable=2 * n - n_stable,
                         n_infinite=n_inf, n_forward=n_forward, n_predetermined=len(pred), near_unit=near)
    policy = {k: getattr(system.meta.get("params"), k) for k in ("phi_s", "tau_C", "phi_pi")
              if system.meta.get("params") is not None}
    if n_stable < n:
        raise BKViolationTooMany(
            f"Blanchard-Kahn: {n_stable} stable roots, {n} required (too many unstable roots; "
            f"no bounded solution). {report.summary()} policy={policy}", n_stable, n, report)
    if n_stable > n:
        raise BKViolationTooFew(
            f"Blanchard-Kahn: {n_stable} stable roots, {n} required (indeterminacy). "
            f"{report.summary()} policy={policy}", n_stable, n, report)
    if near and warn:
        warnings.warn(f"generalised eigenvalue moduli near one: {near}", NearUnitRoot, stacklevel=2)

    Z11, Z21 = Zm[:n, :n], Zm[n:, :n]
    T = np.linalg.solve(Z11.T, Z21.T).T
    T[:, nonpred] = 0.0
    lhs = B + C @ T
    R = np.linalg.solve(lhs, -D)
    r1 = A + lhs @ T
    r2 = lhs @ R + D
    resid = float(max(np.max(np.abs(r1)), np.max(np.abs(r2)) if r2.size else 0.0))
    return FirstOrderSolution(T=T, R=R, system=system, eigen=report, residual=resid)


def linearized_residual(d: DerivativeBundle, sol: FirstOrderSolution) -> float:
    """Max-norm of ``J_prev + J_curr T + J_next T^2`` and ``(J_curr + J_next T) R + J_eps``."""
    T, R = sol.T, sol.R
    r1 = d.J_prev + d.J_curr @ T + d.J_next @ T @ T
    r2 = (d.J_curr + d.J_next @ T) @ R + d.J_eps
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2)) if r2.size else 0.0))


def _state_maps(first: FirstOrderSolution):
    """Selection/propagation matrices of the stacked argument with respect to ``s``."""
    sysm = first.system
    n, ne = sysm.n, sysm.n_e
    P = first.pred
    nP = len(P)
    k = nP + ne
    SP = np.zeros((n, k))
    SP[P, np.arange(nP)] = 1.0
    Se = np.zeros((ne, k))
    Se[:, nP:] = np.eye(ne)
    gs = first.g_s
    M = np.zeros((k, k))
    M[:nP] = gs[P]
    w_s = np.vstack([SP, gs, gs @ M, Se])
    return w_s, M, gs, nP, k


def _quadratic_forms(H, w_s: np.ndarray, n_eq: int, m: int) -> np.ndarray:
    """``(n_eq, k*k)`` array of ``w_s' H_i w_s`` for each equation."""
    k = w_s.shape[1]
    out = np.zeros((n_eq, k * k))
    for i in range(n_eq):
        row = H[i]
        if row.nnz == 0:
            continue
        Hi = row.toarray().reshape(m, m)
        out[i] = (w_s.T @ Hi @ w_s).ravel()
    return out


def solve_kron_sylvester(A: np.ndarray, B: np.ndarray, h: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Solve ``A X + B X (h kron h) = C`` for ``X`` of shape ``(n, p*p)``.

    Uses a complex Schur form ``h = U S U^H``; ``S kron S`` is upper triangular
    so the transformed columns follow by forward substitution.
    """
    p = h.shape[0]
    if p == 0:
        return np.zeros((A.shape[0], 0))
    S, U = la.schur(h.astype(complex), output="complex")
    UU = np.kron(U, U)
    Ct = C.astype(complex) @ UU
    K = np.kron(S, S)
    pp = p * p
    Y = np.zeros((A.shape[0], pp), complex)
    BY = np.zeros((A.shape[0], pp), complex)
    for j in range(pp):
        rhs = Ct[:, j] - BY[:, :j] @ K[:j, j]
        M = A + K[j, j] * B
        if np.linalg.cond(M) > SYLVESTER_COND:
            raise SingularSylvester(
                f"resolvent A + lambda B singular at lambda = {K[j, j]:.6g} (likely a unit root)")
        Y[:, j] = np.linalg.solve(M, rhs)
        BY[:, j] = B @ Y[:, j]
    X = Y @ UU.conj().T
    return X.real


def solve_second_order(d: DerivativeBundle, first: FirstOrderSolution,
                       shock_cov: np.ndarray | None = None) -> SecondOrderSolution:
    """Quadratic policy coefficients and the variance correction."""
    if d.H is None:
        raise ValueError("derivative bundle has no Hessian")
    sysm = first.system
    n, ne, m = sysm.n, sysm.n_e, d.m
    Sigma = sysm.covariance() if shock_cov is None else np.asarray(shock_cov, float)
    w_s, M, gs, nP, k = _state_maps(first)
    Fc, Fn = d.J_curr, d.J_next
    T = first.T
    A = Fc + Fn @ T
    C = -_quadratic_forms(d.H, w_s, d.n_eq, m)

    # columns with both indices in the lagged-state block close among themselves
    idx = np.arange(k * k).reshape(k, k)
    pp = idx[:nP, :nP].ravel()
    X_pp = solve_kron_sylvester(A, Fn, M[:nP, :nP], C[:, pp])
    MP = M[:nP]
    G = np.linalg.solve(A, C - Fn @ X_pp @ np.kron(MP, MP))
    G[:, pp] = X_pp
    G3 = G.reshape(n, k, k)
    G3 = 0.5 * (G3 + G3.transpose(0, 2, 1))
    G = G3.reshape(n, k * k)

    # variance correction
    R = first.R
    Gee = G3[:, nP:, nP:]
    term_g = np.einsum("iab,ab->i", Gee, Sigma)
    RSR = R @ Sigma @ R.T
    nxt = slice(2 * n, 3 * n)
    term_h = np.zeros(d.n_eq)
    for i in range(d.n_eq):
        row = d.H[i]
        if row.nnz:
            Hi = row.toarray().reshape(m, m)[nxt, nxt]
            term_h[i] = np.sum(Hi * RSR)
    Ass = Fc + Fn + Fn @ T
    G_ss = np.linalg.solve(Ass, -Fn @ term_g - term_h)

    # plug-back residuals of both linear systems
    r1 = A @ G + Fn @ G @ np.kron(M, M) - C
    r2 = Ass @ G_ss + Fn @ term_g + term_h
    resid = float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))
    return SecondOrderSolution(first=first, G_xx=G3, G_ss=G_ss, shock_cov=Sigma, residual=resid)


def with_shock_cov(sol: SecondOrderSolution, d: DerivativeBundle, cov: np.ndarray) -> SecondOrderSolution:
    return solve_second_order(d, sol.first, cov)


def policy_step(sol, x_prev: np.ndarray, eps: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    """Unpruned policy ``x_t`` (deviations) given ``x_{t-1}`` and ``eps_t``."""
    first = sol.first
    s = np.concatenate([x_prev[first.pred], eps])
    x = first.g_s @ s
    if sol.order == 2:
        x = x + 0.5 * np.einsum("iab,a,b->i", sol.G_xx, s, s) + 0.5 * sigma ** 2 * sol.G_ss
    return x


def write_solution_csv(sol, directory: str | Path) -> list[Path]:
    """Export ``T`` (predetermined columns), ``R``, and at second order ``G_ss`` and ``G_xx``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    first = sol.first
    names = first.var_names
    P = first.pred
    state_names = [f"{names[i]}(-1)" for i in P] + list(first.shock_names)
    paths = []

    def dump(path, header, rows):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            wr.writerows(rows)
        paths.append(path)

    dump(d / "policy_first_order.csv", ["variable", *state_names],
         [[nm, *(f"{v:.12g}" for v in row)] for nm, row in zip(names, first.g_s)])
    dump(d / "eigenvalues.csv", ["modulus"],
         [[f"{m:.12g}"] for m in first.eigen.moduli] if first.eigen is not None else [])
    if sol.order == 2:
        dump(d / "policy_G_ss.csv", ["variable", "G_ss"],
             [[nm, f"{v:.12g}"] for nm, v in zip(names, sol.G_ss)])
        rows = []
        k = len(state_names)
        for i, nm in enumerate(names):
            for a in range(k):
                for b in range(a, k):
                    v = sol.G_xx[i, a, b]
                    if v != 0.0:
                        rows.append([nm, state_names[a], state_names[b], f"{v:.12g}"])
        dump(d / "policy_G_xx.csv", ["variable", "state1", "state2", "value"], rows)
    return paths
