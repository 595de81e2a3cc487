"""Impulse responses, pruned simulation and moments of a perturbation solution.

Pruned second order (deviations from steady state)::

    xf_t = T xf_{t-1} + R eps_t
    xs_t = T xs_{t-1} + 1/2 G (s_t kron s_t) + 1/2 g_ss,   s_t = (xf_{t-1,P}, eps_t)
    x_t  = xf_t + xs_t

Both recursions only need the predetermined block, so they run in that
subspace through :func:`tanksoe.kernels.linear_recursion`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la

from .errors import ExplosivePath, UnknownShock
from .kernels import linear_recursion
from .perturbation import FirstOrderSolution, SecondOrderSolution, policy_step

DEFAULT_HORIZON = 20
EXPLOSION_BOUND = 1e10
CHUNK = 8192


def _units(sol) -> tuple[str, ...]:
    units = sol.first.system.meta.get("units", {})
    return tuple(units.get(nm, "level") for nm in sol.var_names)


def transform(dev: np.ndarray, ss: np.ndarray, units) -> np.ndarray:
    """Map level deviations to reporting units, column by column.

    ``pct``: percent of steady state; ``ann``: annualised percentage points
    (400 x deviation / steady state); ``log100``: 100 x deviation; ``level``: raw.
    """
    out = np.array(dev, dtype=float, copy=True)
    for j, u in enumerate(units):
        if u == "pct" and ss[j] != 0:
            out[..., j] *= 100.0 / ss[j]
        elif u == "ann" and ss[j] != 0:
            out[..., j] *= 400.0 / ss[j]
        elif u in ("log100", "pct", "ann"):
            out[..., j] *= 100.0
    return out


@dataclass(frozen=True)
class ImpulseResponse:
    shock: str
    size_sigma: float
    horizon: int
    order: int
    var_names: tuple[str, ...]
    deviations: np.ndarray          # (horizon, n) level deviations
    steady_state: np.ndarray
    units: tuple[str, ...]
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def values(self) -> np.ndarray:
        """Responses in reporting units (see :func:`transform`)."""
        return transform(self.deviations, self.steady_state, self.units)

    def series(self, name: str, transformed: bool = True) -> np.ndarray:
        j = self.var_names.index(name)
        return self.values[:, j] if transformed else self.deviations[:, j]

    def peak(self, name: str) -> float:
        return float(np.max(np.abs(self.series(name)))) if self.horizon else 0.0


@dataclass(frozen=True)
class PairedImpulseResponse:
    a: ImpulseResponse
    b: ImpulseResponse
    amplification: dict[str, float]


@dataclass(frozen=True)
class MomentTable:
    var_names: tuple[str, ...]
    mean: np.ndarray                # mean level
    mean_deviation: np.ndarray      # mean minus deterministic steady state
    std: np.ndarray
    T_periods: int
    burn_in: int
    seed: int
    order: int

    def as_dict(self) -> dict[str, dict[str, float]]:
        return {nm: {"mean": float(m), "mean_dev": float(d), "std": float(s)}
                for nm, m, d, s in zip(self.var_names, self.mean, self.mean_deviation, self.std)}


def shock_factor(cov: np.ndarray) -> np.ndarray:
    """Matrix ``L`` with ``L L' = cov``; works for singular covariances."""
    cov = np.asarray(cov, float)
    if np.allclose(cov, np.diag(np.diag(cov))):
        return np.diag(np.sqrt(np.maximum(np.diag(cov), 0.0)))
    w, V = np.linalg.eigh(cov)
    return V * np.sqrt(np.maximum(w, 0.0))


def _pieces(sol):
    first = sol.first
    P = first.pred
    TP = first.T[:, P]
    return first, P, TP, first.hx, first.R


def _quadratic(sol, SP: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Rows ``1/2 G (s_t kron s_t)`` for states ``s_t = (SP[t], E[t])``."""
    n, k, _ = sol.G_xx.shape
    G = sol.G_xx.reshape(n, k * k)
    out = np.empty((SP.shape[0], n))
    for a in range(0, SP.shape[0], CHUNK):
        S = np.hstack([SP[a:a + CHUNK], E[a:a + CHUNK]])
        kron = (S[:, :, None] * S[:, None, :]).reshape(S.shape[0], k * k)
        out[a:a + CHUNK] = 0.5 * kron @ G.T
    return out


def _linear_path(TP, hx, P, B_full: np.ndarray, x0P: np.ndarray) -> np.ndarray:
    """``x_t = TP x_{t-1,P} + B_full[t]`` with the P block iterated by the kernel."""
    xP = linear_recursion(hx, np.ascontiguousarray(B_full[:, P]), x0P)
    lagged = np.vstack([x0P[None, :], xP[:-1]])
    return lagged @ TP.T + B_full


def pruned_path(sol, eps: np.ndarray, *, include_sigma: bool = True, x0f=None, x0s=None) -> np.ndarray:
    """Deviation path for innovations ``eps`` (T x n_e); first order if ``sol.order == 1``."""
    first, P, TP, hx, R = _pieces(sol)
    eps = np.asarray(eps, float)
    nP = len(P)
    x0f = np.zeros(nP) if x0f is None else np.asarray(x0f, float)[P]
    xf = _linear_path(TP, hx, P, eps @ R.T, x0f)
    if sol.order == 1:
        return xf
    lagP = np.vstack([x0f[None, :], xf[:-1, P]])
    b = _quadratic(sol, lagP, eps)
    if include_sigma:
        b = b + 0.5 * sol.G_ss
    x0s = np.zeros(nP) if x0s is None else np.asarray(x0s, float)[P]
    xs = _linear_path(TP, hx, P, b, x0s)
    return xf + xs


def unpruned_path(sol, eps: np.ndarray) -> np.ndarray:
    """Iterate the quadratic policy directly. Not used for moments: it can explode."""
    x = np.zeros(sol.first.system.n)
    out = np.empty((len(eps), x.size))
    for t, e in enumerate(np.asarray(eps, float)):
        x = policy_step(sol, x, e)
        out[t] = x
    return out


def _shock_vector(sol, shock: str, size_sigma: float) -> np.ndarray:
    names = tuple(sol.shock_names)
    if shock not in names:
        raise UnknownShock(f"unknown shock {shock!r}; declared shocks: {', '.join(names)}")
    j = names.index(shock)
    sd = float(np.sqrt(sol.first.shock_cov[j, j]))
    e = np.zeros(len(names))
    # a shock with zero variance is sized in raw innovation units
    e[j] = size_sigma * (sd if sd > 0 else 1.0)
    return e


def impulse_response(sol, shock: str, size_sigma: float = 1.0, horizon: int = DEFAULT_HORIZON,
                     order: int | None = None) -> ImpulseResponse:
    """Response to a one-time innovation at period 0, all other innovations zero.

    First order uses the closed form ``T^k R eps``. Second order is the pruned
    shocked path minus the pruned baseline path (the ``g_ss`` drift cancels).
    """
    order = sol.order if order is None else order
    if order == 2 and sol.order < 2:
        raise ValueError("second-order response requested from a first-order solution")
    e = _shock_vector(sol, shock, size_sigma)
    E = np.zeros((horizon, e.size))
    if horizon:
        E[0] = e
    use = sol if order == 2 else sol.first
    dev = pruned_path(use, E, include_sigma=False)
    return ImpulseResponse(shock=shock, size_sigma=float(size_sigma), horizon=horizon, order=order,
                           var_names=tuple(sol.var_names), deviations=dev,
                           steady_state=np.asarray(sol.steady_state, float), units=_units(sol))


def amplification(a: ImpulseResponse, b: ImpulseResponse) -> dict[str, float]:
    """Peak absolute response in ``a`` over peak absolute response in ``b``, per variable."""
    pa = np.max(np.abs(a.values), axis=0) if a.horizon else np.zeros(len(a.var_names))
    pb = np.max(np.abs(b.values), axis=0) if b.horizon else np.zeros(len(b.var_names))
    out = {}
    for nm, x, y in zip(a.var_names, pa, pb):
        out[nm] = float(x / y) if y > 0 else (1.0 if x == 0 else float("inf"))
    return out


def compare_irf(params_a, params_b, shock: str, horizon: int = DEFAULT_HORIZON, size_sigma: float = 1.0,
                order: int = 1) -> PairedImpulseResponse:
    """Re-solve both parameter sets and return aligned responses with amplification ratios."""
    from .pipeline import solve_model
    sa = solve_model(params_a, order=order).solution
    sb = solve_model(params_b, order=order).solution
    a = impulse_response(sa, shock, size_sigma, horizon)
    b = impulse_response(sb, shock, size_sigma, horizon)
    return PairedImpulseResponse(a=a, b=b, amplification=amplification(a, b))


def draw_innovations(cov: np.ndarray, T_periods: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    L = shock_factor(cov)
    return rng.standard_normal((T_periods, L.shape[1])) @ L.T


def simulate(sol, T_periods: int, seed: int, shock_cov=None, *, pruned: bool = True) -> np.ndarray:
    """Deviation path of length ``T_periods`` from the steady state."""
    cov = sol.first.shock_cov if shock_cov is None else np.asarray(shock_cov, float)
    eps = draw_innovations(cov, T_periods, seed)
    path = pruned_path(sol, eps) if pruned else unpruned_path(sol, eps)
    if not np.all(np.isfinite(path)) or np.max(np.abs(path)) > EXPLOSION_BOUND:
        raise ExplosivePath(f"simulated deviation exceeds {EXPLOSION_BOUND:g}; check covariance or near-unit roots")
    return path


def simulate_moments(sol, T_periods: int = 100_000, burn_in: int = 1000, seed: int = 0,
                     shock_cov=None, *, pruned: bool = True) -> MomentTable:
    """Sample means and standard deviations from one seeded simulation."""
    if T_periods <= burn_in:
        raise ValueError("T_periods must exceed burn_in")
    path = simulate(sol, T_periods, seed, shock_cov, pruned=pruned)[burn_in:]
    ss = np.asarray(sol.steady_state, float)
    mdev = path.mean(axis=0)
    return MomentTable(var_names=tuple(sol.var_names), mean=ss + mdev, mean_deviation=mdev,
                       std=path.std(axis=0), T_periods=T_periods, burn_in=burn_in, seed=seed,
                       order=sol.order)


def state_variance(first: FirstOrderSolution, shock_cov=None) -> np.ndarray:
    """Stationary variance of the predetermined block at first order."""
    cov = first.shock_cov if shock_cov is None else np.asarray(shock_cov, float)
    P = first.pred
    RP = first.R[P]
    return la.solve_discrete_lyapunov(first.hx, RP @ cov @ RP.T)


def first_order_variance(first: FirstOrderSolution, shock_cov=None) -> np.ndarray:
    """Stationary variance of all variables at first order (Lyapunov equation)."""
    cov = first.shock_cov if shock_cov is None else np.asarray(shock_cov, float)
    VP = state_variance(first, cov)
    TP = first.T[:, first.pred]
    return TP @ VP @ TP.T + first.R @ cov @ first.R.T


def analytic_mean(sol, shock_cov=None) -> np.ndarray:
    """Ergodic mean deviation under the pruned second-order solution (zero at first order)."""
    first = sol.first
    n = first.system.n
    if sol.order == 1:
        return np.zeros(n)
    cov = sol.shock_cov if shock_cov is None else np.asarray(shock_cov, float)
    P = first.pred
    VP = state_variance(first, cov)
    Ess = la.block_diag(VP, cov)
    quad = 0.5 * np.einsum("iab,ab->i", sol.G_xx, Ess) + 0.5 * sol.G_ss
    hx = first.hx
    mP = np.linalg.solve(np.eye(len(P)) - hx, quad[P])
    return first.T[:, P] @ mP + quad


def analytic_moments(sol, shock_cov=None) -> MomentTable:
    """Means (second-order corrected) and first-order standard deviations, no Monte Carlo."""
    ss = np.asarray(sol.steady_state, float)
    mdev = analytic_mean(sol, shock_cov)
    std = np.sqrt(np.maximum(np.diag(first_order_variance(sol.first, shock_cov)), 0.0))
    return MomentTable(var_names=tuple(sol.var_names), mean=ss + mdev, mean_deviation=mdev, std=std,
                       T_periods=0, burn_in=0, seed=-1, order=sol.order)


def batch_means_se(x: np.ndarray, n_batches: int = 50) -> float:
    """Standard error of the mean of an autocorrelated series by non-overlapping batch means."""
    x = np.asarray(x, float)
    m = len(x) // n_batches
    means = x[:m * n_batches].reshape(n_batches, m).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


def write_irf_csv(irf: ImpulseResponse, path: str | Path, seed: int | None = None,
                  layout: str = "csv") -> Path:
    """Columns are variables, rows are horizons; first row carries the metadata.

    ``layout="gnuplot"`` writes whitespace-separated columns with ``#`` headers.
    """
    path = Path(path)
    meta = f"shock={irf.shock};size_sigma={irf.size_sigma:.12g};order={irf.order};seed={seed if seed is not None else ''}"
    vals = irf.values
    if layout == "gnuplot":
        with open(path, "w") as fh:
            fh.write(f"# {meta}\n# horizon {' '.join(irf.var_names)}\n")
            for h in range(irf.horizon):
                fh.write(" ".join([str(h), *(f"{v:.12g}" for v in vals[h])]) + "\n")
        return path
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([f"# {meta}"])
        wr.writerow(["horizon", *irf.var_names])
        wr.writerow(["units", *irf.units])
        for h in range(irf.horizon):
            wr.writerow([h, *(f"{v:.12g}" for v in vals[h])])
    return path


def write_moments_csv(table: MomentTable, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([f"# T_periods={table.T_periods};burn_in={table.burn_in};seed={table.seed};order={table.order}"])
        wr.writerow(["variable", "mean", "mean_deviation", "std"])
        for nm, m, d, s in zip(table.var_names, table.mean, table.mean_deviation, table.std):
            wr.writerow([nm, f"{m:.12g}", f"{d:.12g}", f"{s:.12g}"])
    return path
