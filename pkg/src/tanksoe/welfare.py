"""Household welfare under alternative (tau_C, phi_s) rules and the policy grid search."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import AllPointsInfeasible, BKViolation, ParameterError, SingularSylvester
from .params import ModelParameters
from .pipeline import solve_model
from .simulation import analytic_mean, first_order_variance
from .steady_state import SteadyState, solve_steady_state

TAU_BOUNDS = (-1.0, 1.0)
PHI_S_MIN = 0.0002
DEFAULT_TAU_GRID = (-1.0, -0.5, 0.0, 0.5, 1.0)
DEFAULT_PHI_S_GRID = tuple(float(v) for v in np.geomspace(PHI_S_MIN, 40.0, 13))
HOUSEHOLDS = ("R", "H")
SUMMARY_VARS = ("cR", "cH", "lR", "lH")


@dataclass(frozen=True, order=True)
class PolicyPoint:
    tau_C: float
    phi_s: float

    def __post_init__(self):
        if not TAU_BOUNDS[0] <= self.tau_C <= TAU_BOUNDS[1]:
            raise ParameterError(f"tau_C = {self.tau_C} outside [{TAU_BOUNDS[0]}, {TAU_BOUNDS[1]}]")
        if not self.phi_s >= PHI_S_MIN:
            raise ParameterError(f"phi_s = {self.phi_s} below the lower bound {PHI_S_MIN}")

    def apply(self, params: ModelParameters) -> ModelParameters:
        return params.with_(tau_C=float(self.tau_C), phi_s=float(self.phi_s))


@dataclass(frozen=True)
class WelfareResult:
    point: PolicyPoint | None
    V: dict[str, float]
    mean: dict[str, float]
    std: dict[str, float]
    conditional: bool = False


@dataclass(frozen=True)
class PolicyGridResult:
    points: tuple[PolicyPoint, ...]
    welfare: np.ndarray               # (n_points, 2), NaN where infeasible
    mean: np.ndarray                  # (n_points, 4) over SUMMARY_VARS
    std: np.ndarray
    feasible: np.ndarray
    infeasible: tuple[tuple[PolicyPoint, str], ...]
    benchmark: WelfareResult | None   # None when the benchmark policy itself is infeasible
    argmax: dict[str, PolicyPoint]
    phi_Co: float
    meta: dict = field(default_factory=dict, compare=False)

    def index(self, point: PolicyPoint) -> int:
        return self.points.index(point)

    def welfare_at(self, point: PolicyPoint, household: str) -> float:
        return float(self.welfare[self.index(point), HOUSEHOLDS.index(household)])

    def best_welfare(self, household: str) -> float:
        return self.welfare_at(self.argmax[household], household)

    def gain(self, household: str) -> float:
        """Welfare at the household's optimum minus benchmark welfare."""
        if self.benchmark is None:
            return float("nan")
        return self.best_welfare(household) - self.benchmark.V[household]

    def table(self) -> dict[str, dict[str, float]]:
        """Benchmark-relative statistics at each household's optimum.

        Std ratios are optimum over benchmark; mean changes are percent changes in
        the level of the mean.
        """
        out = {}
        b = self.benchmark
        for j, hh in enumerate(HOUSEHOLDS):
            i = self.index(self.argmax[hh])
            row = {"tau_C": self.argmax[hh].tau_C, "phi_s": self.argmax[hh].phi_s,
                   "welfare": float(self.welfare[i, j]), "welfare_gain": self.gain(hh)}
            for v in (f"c{hh}", f"l{hh}"):
                k = SUMMARY_VARS.index(v)
                if b is None:
                    row[f"std_ratio_{v[0]}"] = row[f"mean_change_{v[0]}"] = float("nan")
                    continue
                row[f"std_ratio_{v[0]}"] = float(self.std[i, k] / b.std[v]) if b.std[v] > 0 else float("nan")
                row[f"mean_change_{v[0]}"] = 100.0 * (self.mean[i, k] / b.mean[v] - 1.0)
            out[hh] = row
        return out


def _policy_invariant_ss(params: ModelParameters, ss: SteadyState | None) -> SteadyState:
    return ss if ss is not None else solve_steady_state(params)


def evaluate_welfare(params: ModelParameters, point: PolicyPoint | None = None, *,
                     conditional: bool = False, steady_state: SteadyState | None = None,
                     strict: bool = True) -> WelfareResult:
    """Second-order welfare ``E[V^R], E[V^H]`` plus analytic moments of c and l.

    The rules enter only through deviations, so a steady state solved for any
    policy point can be passed in and reused.
    """
    ss = _policy_invariant_ss(params, steady_state)
    p = point.apply(ss.params) if point is not None else ss.params
    ss_p = replace(ss, params=p)
    m = solve_model(p, order=2, steady_state=ss_p, strict=strict, warn=False)
    sol = m.solution
    names = sol.var_names
    ssv = np.asarray(sol.steady_state)
    mdev = 0.5 * sol.G_ss if conditional else analytic_mean(sol)
    var = np.diag(first_order_variance(sol.first))
    V = {hh: float(ssv[names.index(f"V{hh}")] + mdev[names.index(f"V{hh}")]) for hh in HOUSEHOLDS}
    mean = {v: float(ssv[names.index(v)] + analytic_mean(sol)[names.index(v)]) for v in SUMMARY_VARS}
    std = {v: float(np.sqrt(max(var[names.index(v)], 0.0))) for v in SUMMARY_VARS}
    return WelfareResult(point=point, V=V, mean=mean, std=std, conditional=conditional)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("TANKSOE_THREADS", "1")))
    except ValueError:
        return 1


def _evaluate_many(params, points, ss, conditional):
    def one(pt):
        try:
            return evaluate_welfare(params, pt, conditional=conditional, steady_state=ss), None
        except (BKViolation, SingularSylvester) as exc:
            return None, f"{type(exc).__name__}: {str(exc).splitlines()[0]}"
    n = _workers()
    if n == 1:
        return [one(pt) for pt in points]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(one, points))   # map keeps grid order


def _refine(tau_grid, phi_grid, best: PolicyPoint) -> list[PolicyPoint]:
    """Geometric midpoints in phi_s on either side of the argmax, at the argmax tau."""
    phis = sorted(phi_grid)
    j = phis.index(best.phi_s) if best.phi_s in phis else None
    out = []
    if j is None:
        return out
    for nb in (j - 1, j + 1):
        if 0 <= nb < len(phis):
            out.append(PolicyPoint(best.tau_C, float(np.sqrt(phis[j] * phis[nb]))))
    return out


def grid_search(params: ModelParameters, tau_grid=DEFAULT_TAU_GRID, phi_s_grid=DEFAULT_PHI_S_GRID, *,
                refine: bool = True, conditional: bool = False,
                steady_state: SteadyState | None = None) -> PolicyGridResult:
    """Evaluate every grid point, drop indeterminate/explosive ones, pick per-household optima.

    With ``refine`` one extra level of phi_s midpoints is evaluated around each
    household's argmax. The benchmark for the ratios is the policy already in
    ``params``.
    """
    tau_grid = [float(t) for t in tau_grid]
    phi_s_grid = [float(f) for f in phi_s_grid]
    if not tau_grid or not phi_s_grid:
        raise ParameterError("policy grids must be non-empty")
    points = [PolicyPoint(t, f) for t in tau_grid for f in phi_s_grid]
    ss = _policy_invariant_ss(params, steady_state)
    results = _evaluate_many(params, points, ss, conditional)
    try:
        bench = evaluate_welfare(params, None, conditional=conditional, steady_state=ss)
    except (BKViolation, SingularSylvester):
        bench = None

    def best_of(pts, res):
        W = np.array([[r.V[h] for h in HOUSEHOLDS] if r is not None else [np.nan, np.nan] for r, _ in res])
        if np.all(np.isnan(W)):
            raise AllPointsInfeasible(f"no feasible point among {len(pts)} policy points")
        return W, {h: pts[int(np.nanargmax(W[:, j]))] for j, h in enumerate(HOUSEHOLDS)}

    W, argmax = best_of(points, results)
    if refine:
        extra = []
        for h in HOUSEHOLDS:
            for pt in _refine(tau_grid, phi_s_grid, argmax[h]):
                if pt not in points and pt not in extra:
                    extra.append(pt)
        if extra:
            points = points + extra
            results = results + _evaluate_many(params, extra, ss, conditional)
            W, argmax = best_of(points, results)
    mean = np.array([[r.mean[v] for v in SUMMARY_VARS] if r is not None else [np.nan] * 4 for r, _ in results])
    std = np.array([[r.std[v] for v in SUMMARY_VARS] if r is not None else [np.nan] * 4 for r, _ in results])
    feasible = np.array([r is not None for r, _ in results])
    infeasible = tuple((pt, msg) for pt, (r, msg) in zip(points, results) if r is None)
    return PolicyGridResult(points=tuple(points), welfare=W, mean=mean, std=std, feasible=feasible,
                            infeasible=infeasible, benchmark=bench, argmax=argmax, phi_Co=params.phi_Co,
                            meta={"conditional": conditional, "refined": refine})


@dataclass(frozen=True)
class HomotheticityComparison:
    non_homothetic: PolicyGridResult
    homothetic: PolicyGridResult

    def gain_ratio(self, household: str = "H") -> float:
        """Welfare gain at optimum, non-homothetic over homothetic."""
        g0 = self.homothetic.gain(household)
        return self.non_homothetic.gain(household) / g0 if g0 != 0 else float("inf")


def homotheticity_comparison(params: ModelParameters, tau_grid=DEFAULT_TAU_GRID,
                             phi_s_grid=DEFAULT_PHI_S_GRID, *, phi_Co_alt: float = 0.0,
                             refine: bool = True, conditional: bool = False) -> HomotheticityComparison:
    """Run the grid with the calibrated subsistence level and with ``phi_Co_alt`` (hours re-matched)."""
    a = grid_search(params, tau_grid, phi_s_grid, refine=refine, conditional=conditional)
    b = grid_search(params.with_(phi_Co=phi_Co_alt), tau_grid, phi_s_grid, refine=refine,
                    conditional=conditional)
    return HomotheticityComparison(non_homothetic=a, homothetic=b)


TABLE_COLUMNS = ("regime", "household", "tau_C", "phi_s", "std_ratio_c", "std_ratio_l",
                 "mean_change_c", "mean_change_l", "welfare", "welfare_gain")


def write_grid_csv(result: PolicyGridResult, path: str | Path) -> Path:
    """Every evaluated point with welfare and moments; infeasible points flagged."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["tau_C", "phi_s", "feasible", "V_R", "V_H",
                     *(f"mean_{v}" for v in SUMMARY_VARS), *(f"std_{v}" for v in SUMMARY_VARS)])
        for i, pt in enumerate(result.points):
            wr.writerow([f"{pt.tau_C:.12g}", f"{pt.phi_s:.12g}", int(result.feasible[i]),
                         *(f"{v:.12g}" for v in result.welfare[i]),
                         *(f"{v:.12g}" for v in result.mean[i]), *(f"{v:.12g}" for v in result.std[i])])
    return path


def write_table_csv(results: dict[str, PolicyGridResult], path: str | Path) -> Path:
    """Optimal-policy table: one row per preference regime and household."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(TABLE_COLUMNS)
        for regime, res in results.items():
            for hh, row in res.table().items():
                wr.writerow([regime, hh, *(f"{row[c]:.12g}" for c in TABLE_COLUMNS[2:])])
    return path
