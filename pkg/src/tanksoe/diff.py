"""First and second derivatives of a stacked system by central finite differences.

All evaluations are batched: the residual function receives many stacked points
as columns of one array, so a full Hessian costs a handful of vectorised calls.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, NonFiniteDerivative, RichardsonDisagreement
from .system import DynamicSystem

RICHARDSON_RTOL = 1e-5
SYMMETRY_TOL = 1e-7
MAX_RETRIES = 3
HESSIAN_REL_STEP = 1e-3
BATCH = 4096
ROUNDOFF = 64 * np.finfo(float).eps


class RichardsonWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DerivativeBundle:
    """Derivatives of ``f(y_prev, y_curr, y_next, eps)`` at one stacked point.

    ``H`` is a sparse ``(n_eq, m*m)`` matrix; row ``i`` is the flattened
    ``m x m`` Hessian of equation ``i`` over the stacked argument of size ``m``.
    """

    J_prev: np.ndarray
    J_curr: np.ndarray
    J_next: np.ndarray
    J_eps: np.ndarray
    H: sp.csr_matrix | None = None
    steps: np.ndarray | None = None
    hessian_steps: np.ndarray | None = None
    flagged: tuple = ()
    asymmetry: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.J_curr.shape[1]

    @property
    def n_eq(self) -> int:
        return self.J_curr.shape[0]

    @property
    def n_e(self) -> int:
        return self.J_eps.shape[1]

    @property
    def m(self) -> int:
        return 3 * self.n + self.n_e

    @property
    def J(self) -> np.ndarray:
        return np.hstack([self.J_prev, self.J_curr, self.J_next, self.J_eps])

    def hessian(self, eq: int) -> np.ndarray:
        return self.H[eq].toarray().reshape(self.m, self.m)

    def hessian_dense(self) -> np.ndarray:
        return self.H.toarray().reshape(self.n_eq, self.m, self.m)

    def is_finite(self) -> bool:
        ok = all(np.all(np.isfinite(a)) for a in (self.J_prev, self.J_curr, self.J_next, self.J_eps))
        return ok and (self.H is None or bool(np.all(np.isfinite(self.H.data))))


def _eval(system: DynamicSystem, X: np.ndarray) -> np.ndarray:
    """Evaluate columns of ``X``; columns outside the domain come back as NaN."""
    out = np.empty((len(system.equation_names) or system.n, X.shape[1]))
    for s in range(0, X.shape[1], BATCH):
        blk = X[:, s:s + BATCH]
        try:
            out[:, s:s + BATCH] = system.eval_stacked(blk)
        except DomainError:
            for j in range(blk.shape[1]):
                try:
                    out[:, s + j] = system.eval_stacked(blk[:, j])
                except DomainError:
                    out[:, s + j] = np.nan
    return out


def jacobian_steps(x: np.ndarray) -> np.ndarray:
    return np.maximum(1e-6, 1e-7 * np.abs(x))


def _central_columns(system, x, h, cols):
    """Central differences for the coordinates in ``cols`` with steps ``h[cols]``."""
    k = len(cols)
    X = np.repeat(x[:, None], 2 * k, axis=1)
    X[cols, np.arange(k)] += h[cols]
    X[cols, k + np.arange(k)] -= h[cols]
    hh = (X[cols, np.arange(k)] - X[cols, k + np.arange(k)]) / 2  # representable step
    F = _eval(system, X)
    return (F[:, :k] - F[:, k:]) / (2 * hh), hh


def _fd_jacobian(system: DynamicSystem, x: np.ndarray, h: np.ndarray):
    """Central-difference Jacobian with per-coordinate retries on domain failures."""
    m = x.size
    h = h.astype(float).copy()
    J = np.full((_eval(system, x[:, None]).shape[0], m), np.nan)
    todo = np.arange(m)
    for attempt in range(MAX_RETRIES + 1):
        D, hh = _central_columns(system, x, h, todo)
        h[todo] = hh
        good = np.all(np.isfinite(D), axis=0)
        J[:, todo[good]] = D[:, good]
        todo = todo[~good]
        if todo.size == 0:
            return J, h
        h[todo] /= 10
    raise NonFiniteDerivative(f"non-finite derivative for stacked coordinates {todo.tolist()}")


def _flag(D: np.ndarray, R: np.ndarray, tol: float) -> np.ndarray:
    return np.abs(D - R) > tol * np.maximum(np.abs(R), 1.0)


def _report(flagged, strict: bool, what: str) -> None:
    if not flagged:
        return
    msg = f"{len(flagged)} {what} entries disagree with their Richardson extrapolate, e.g. {flagged[:5]}"
    if strict:
        raise RichardsonDisagreement(msg)
    warnings.warn(msg, RichardsonWarning, stacklevel=3)


def jacobians(system: DynamicSystem, point: np.ndarray | None = None, *, strict: bool = True,
              rtol: float = RICHARDSON_RTOL) -> DerivativeBundle:
    """First derivatives with step ``max(1e-6, 1e-7|x|)`` and a Richardson cross-check.

    The check compares ``D(h)`` with ``(4 D(h) - D(2h)) / 3``; entries off by
    more than ``rtol`` (relative, floored at 1) are flagged. With ``strict`` the
    run aborts, otherwise a :class:`RichardsonWarning` is issued.
    """
    x = system.stacked_steady() if point is None else np.asarray(point, float)
    J, h = _fd_jacobian(system, x, jacobian_steps(x))
    J2, _ = _fd_jacobian(system, x, 2 * h)
    R = (4 * J - J2) / 3
    bad = np.argwhere(_flag(J, R, rtol))
    flagged = tuple((int(i), int(j)) for i, j in bad)
    _report(flagged, strict, "Jacobian")
    n = system.n
    return DerivativeBundle(J_prev=J[:, :n], J_curr=J[:, n:2 * n], J_next=J[:, 2 * n:3 * n],
                            J_eps=J[:, 3 * n:], steps=h, flagged=flagged)


def incidence(system: DynamicSystem, x: np.ndarray, seed: int = 0) -> np.ndarray:
    """Boolean (equation x coordinate) incidence, taken at the point and a random nearby point.

    The nearby point catches arguments whose first derivative happens to vanish
    exactly at the steady state (e.g. quadratic adjustment costs).
    """
    rng = np.random.default_rng(seed)
    jitter = x + 1e-3 * (np.abs(x) + 1e-2) * rng.uniform(-1, 1, x.size)
    inc = np.zeros((_eval(system, x[:, None]).shape[0], x.size), bool)
    for pt in (x, jitter):
        J, _ = _fd_jacobian(system, pt, jacobian_steps(pt))
        inc |= J != 0
    return inc


def hessian_steps(x: np.ndarray, rel: float = HESSIAN_REL_STEP) -> np.ndarray:
    ax = np.abs(x)
    return rel * np.where(ax > 1e-8, ax, 1.0)


def _second_differences(system, x, h, pairs):
    """Four-point mixed differences for ``pairs`` (a, b); a == b uses the 3-point rule."""
    a, b = pairs[:, 0], pairs[:, 1]
    k = len(pairs)
    X = np.repeat(x[:, None], 4 * k, axis=1)
    cols = np.arange(k)
    for blk, (sa, sb) in enumerate(((1, 1), (1, -1), (-1, 1), (-1, -1))):
        np.add.at(X, (a, blk * k + cols), sa * h[a])
        np.add.at(X, (b, blk * k + cols), sb * h[b])
    F = _eval(system, X)
    D = (F[:, :k] - F[:, k:2 * k] - F[:, 2 * k:3 * k] + F[:, 3 * k:]) / (4 * h[a] * h[b])
    # rounding error bound of the stencil, per equation and pair
    Fmax = np.maximum.reduce([np.abs(F[:, i * k:(i + 1) * k]) for i in range(4)])
    return D, ROUNDOFF * Fmax / (h[a] * h[b])


def hessians(system: DynamicSystem, point: np.ndarray | None = None, *, strict: bool = True,
             rtol: float = RICHARDSON_RTOL, rel_step: float = HESSIAN_REL_STEP,
             first: DerivativeBundle | None = None) -> DerivativeBundle:
    """Second derivatives over the stacked argument, stored sparse.

    Nested central differences at steps ``h`` and ``h/2`` combined by one
    Richardson step. Only coordinate pairs that co-occur in some equation are
    differentiated, and entries below the stencil's rounding bound are dropped. The raw array is checked for symmetry before it is
    symmetrised.
    """
    x = system.stacked_steady() if point is None else np.asarray(point, float)
    first = first or jacobians(system, x, strict=strict, rtol=rtol)
    m = x.size
    inc = incidence(system, x)
    n_eq = inc.shape[0]
    # ordered pairs so symmetry of the raw estimate can be checked
    pair_mask = (inc.T.astype(np.int64) @ inc.astype(np.int64)) > 0
    pairs = np.argwhere(pair_mask)
    h = hessian_steps(x, rel_step)
    for attempt in range(MAX_RETRIES + 1):
        D1, _ = _second_differences(system, x, h, pairs)
        D2, noise = _second_differences(system, x, h / 2, pairs)
        if np.all(np.isfinite(D1)) and np.all(np.isfinite(D2)):
            break
        badc = np.unique(pairs[~np.all(np.isfinite(D1) & np.isfinite(D2), axis=0)].ravel())
        if attempt == MAX_RETRIES:
            raise NonFiniteDerivative(f"non-finite second derivative for coordinates {badc.tolist()}")
        h[badc] /= 10
    R = (4 * D2 - D1) / 3
    # an equation only has second derivatives in coordinates it contains
    keep = inc[:, pairs[:, 0]] & inc[:, pairs[:, 1]]
    R = np.where(keep & (np.abs(R) > noise), R, 0.0)
    scale = np.maximum(np.abs(R), 1.0)
    flagged = tuple((int(i), int(pairs[j, 0]), int(pairs[j, 1]))
                    for i, j in np.argwhere(np.abs(D2 - R) * keep > 100 * rtol * scale))
    _report(flagged, strict, "Hessian")

    flat = pairs[:, 0] * m + pairs[:, 1]
    rows, cols_ = np.nonzero(R)
    raw = sp.csr_matrix((R[rows, cols_], (rows, flat[cols_])), shape=(n_eq, m * m))
    # symmetry check and symmetrisation
    perm = (np.arange(m * m) % m) * m + np.arange(m * m) // m
    rawT = raw[:, perm]
    asym = abs(raw - rawT).max() if raw.nnz else 0.0
    H = ((raw + rawT) * 0.5).tocsr()
    H.eliminate_zeros()
    return DerivativeBundle(J_prev=first.J_prev, J_curr=first.J_curr, J_next=first.J_next,
                            J_eps=first.J_eps, H=H, steps=first.steps, hessian_steps=h,
                            flagged=first.flagged + flagged, asymmetry=float(asym))


def derivatives(system: DynamicSystem, *, order: int = 2, strict: bool = True) -> DerivativeBundle:
    first = jacobians(system, strict=strict)
    if order < 2:
        return first
    return hessians(system, strict=strict, first=first)


def model_derivatives(params, ss, *, order: int = 2, strict: bool = True) -> DerivativeBundle:
    """Derivatives of the economy at a solved steady state."""
    from .model import build_system
    values = getattr(ss, "values", ss)
    params = getattr(ss, "params", params)
    return derivatives(build_system(params, values), order=order, strict=strict)


def write_derivatives_csv(bundle: DerivativeBundle, directory: str | Path,
                          system: DynamicSystem) -> list[Path]:
    """Dump Jacobian blocks (dense) and Hessian non-zeros (coordinate list) to CSV."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    eqs = system.equation_names or tuple(f"eq{i}" for i in range(bundle.n_eq))
    out = []
    for tag, mat, cols in (("J_prev", bundle.J_prev, system.var_names),
                           ("J_curr", bundle.J_curr, system.var_names),
                           ("J_next", bundle.J_next, system.var_names),
                           ("J_eps", bundle.J_eps, system.shock_names)):
        path = d / f"{tag}.csv"
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["equation", *cols])
            for eq, row in zip(eqs, mat):
                wr.writerow([eq, *(f"{v:.12g}" for v in row)])
        out.append(path)
    if bundle.H is not None:
        names = ([f"{v}(-1)" for v in system.var_names] + list(system.var_names)
                 + [f"{v}(+1)" for v in system.var_names] + list(system.shock_names))
        path = d / "H.csv"
        coo = bundle.H.tocoo()
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["equation", "arg1", "arg2", "value"])
            for i, c, v in zip(coo.row, coo.col, coo.data):
                wr.writerow([eqs[i], names[c // bundle.m], names[c % bundle.m], f"{v:.12g}"])
        out.append(path)
    return out
