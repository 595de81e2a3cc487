"""Command-line entry point: one subcommand per experiment, CSV artifacts plus a run manifest."""

from __future__ import annotations

import argparse
import os
import platform
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import ConfigError, TankSoeError
from .kernels import BACKEND
from .params import ModelParameters, format_config, load_parameters
from .pipeline import solve_model
from .simulation import (DEFAULT_HORIZON, analytic_moments, compare_irf, impulse_response, simulate_moments,
                         write_irf_csv, write_moments_csv)
from .steady_state import solve_steady_state, steady_state_report, write_steady_state_csv
from .welfare import (DEFAULT_PHI_S_GRID, DEFAULT_TAU_GRID, PolicyPoint, grid_search, homotheticity_comparison,
                      write_grid_csv, write_table_csv)

COMMANDS = ("steady-state", "irf", "compare-irf", "moments", "welfare-grid", "homothetic-compare")
MANIFEST = "manifest.cfg"


@dataclass
class ExperimentConfig:
    command: str
    config: Path | None = None
    out: Path = Path("out")
    seed: int = 0
    order: int = 2
    shock: str = "eps_R"
    size: float = 1.0
    horizon: int = DEFAULT_HORIZON
    grid_tau: tuple[float, ...] = DEFAULT_TAU_GRID
    grid_phis: tuple[float, ...] = DEFAULT_PHI_S_GRID
    periods: int = 100_000
    layout: str = "csv"
    timings: dict[str, float] = field(default_factory=dict)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.config is not None and not self.config.is_file():
            raise ConfigError(f"config file not found: {self.config}")
        if self.order not in (1, 2):
            raise ConfigError("--order must be 1 or 2")
        if self.horizon < 1:
            raise ConfigError("--horizon must be positive")
        if not self.grid_tau or not self.grid_phis:
            raise ConfigError("policy grids must be non-empty")
        for t in self.grid_tau:
            for f in self.grid_phis:
                PolicyPoint(t, f)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tanksoe", description=__doc__)
    ap.add_argument("--version", action="version", version=f"tanksoe {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", type=Path, help="flat key = value parameter overrides")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--order", type=int, default=2, choices=(1, 2))
        if cmd in ("irf", "compare-irf"):
            sp.add_argument("--shock", default="eps_R")
            sp.add_argument("--size", type=float, default=1.0, help="innovation size in standard deviations")
            sp.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
            sp.add_argument("--layout", choices=("csv", "gnuplot"), default="csv")
        if cmd == "moments":
            sp.add_argument("--periods", type=int, default=0,
                            help="simulation length; 0 reports analytic moments only")
        if cmd in ("welfare-grid", "homothetic-compare"):
            sp.add_argument("--grid-tau", type=_float_list, default=DEFAULT_TAU_GRID)
            sp.add_argument("--grid-phis", type=_float_list, default=DEFAULT_PHI_S_GRID)
    return ap


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig(command=ns.command, config=ns.config, out=ns.out, seed=ns.seed, order=ns.order)
    for name in ("shock", "size", "horizon", "grid_tau", "grid_phis", "periods", "layout"):
        if hasattr(ns, name):
            setattr(cfg, name, getattr(ns, name))
    cfg.validate()
    return cfg


def _steady_state(cfg, params):
    ss = solve_steady_state(params)
    write_steady_state_csv(ss, cfg.out / "steady_state.csv", steady_state_report(ss))
    return ss.params


def _irf(cfg, params):
    m = solve_model(params, order=cfg.order)
    irf = impulse_response(m.solution, cfg.shock, cfg.size, cfg.horizon)
    ext = "dat" if cfg.layout == "gnuplot" else "csv"
    write_irf_csv(irf, cfg.out / f"irf_{cfg.shock}.{ext}", seed=cfg.seed, layout=cfg.layout)
    return m.params


def _compare_irf(cfg, params):
    pair = compare_irf(params, params.with_(phi_Co=0.0), cfg.shock, cfg.horizon, cfg.size, order=cfg.order)
    write_irf_csv(pair.a, cfg.out / f"irf_{cfg.shock}_nonhomothetic.csv", seed=cfg.seed)
    write_irf_csv(pair.b, cfg.out / f"irf_{cfg.shock}_homothetic.csv", seed=cfg.seed)
    with open(cfg.out / f"amplification_{cfg.shock}.csv", "w") as fh:
        fh.write("variable,amplification\n")
        for nm, v in pair.amplification.items():
            fh.write(f"{nm},{v:.12g}\n")
    return params


def _moments(cfg, params):
    m = solve_model(params, order=cfg.order)
    write_moments_csv(analytic_moments(m.solution), cfg.out / "moments_analytic.csv")
    if cfg.periods:
        write_moments_csv(simulate_moments(m.solution, cfg.periods, seed=cfg.seed),
                          cfg.out / "moments_simulated.csv")
    return m.params


def _welfare_grid(cfg, params):
    res = grid_search(params, cfg.grid_tau, cfg.grid_phis)
    write_grid_csv(res, cfg.out / "welfare_grid.csv")
    write_table_csv({"non_homothetic": res}, cfg.out / "optimal_policy.csv")
    return params


def _homothetic_compare(cfg, params):
    cmp = homotheticity_comparison(params, cfg.grid_tau, cfg.grid_phis)
    write_grid_csv(cmp.non_homothetic, cfg.out / "welfare_grid_nonhomothetic.csv")
    write_grid_csv(cmp.homothetic, cfg.out / "welfare_grid_homothetic.csv")
    write_table_csv({"non_homothetic": cmp.non_homothetic, "homothetic": cmp.homothetic},
                    cfg.out / "optimal_policy.csv")
    with open(cfg.out / "welfare_gain_ratio.csv", "w") as fh:
        fh.write("household,gain_ratio\n")
        for hh in ("R", "H"):
            fh.write(f"{hh},{cmp.gain_ratio(hh):.12g}\n")
    return params


RUNNERS = {
    "steady-state": _steady_state, "irf": _irf, "compare-irf": _compare_irf, "moments": _moments,
    "welfare-grid": _welfare_grid, "homothetic-compare": _homothetic_compare,
}


def write_manifest(cfg: ExperimentConfig, params: ModelParameters) -> Path:
    """Resolved parameters as a loadable config, with run metadata in comments."""
    lines = [
        f"# tanksoe {__version__}; numpy {np.__version__}; scipy {scipy.__version__}; "
        f"python {platform.python_version()}; kernels {BACKEND}",
        f"# command={cfg.command} seed={cfg.seed} order={cfg.order} shock={cfg.shock} "
        f"size={cfg.size!r} horizon={cfg.horizon}",
        f"# grid_tau={','.join(repr(t) for t in cfg.grid_tau)}",
        f"# grid_phis={','.join(repr(f) for f in cfg.grid_phis)}",
        *(f"# time_{k}={v:.3f}s" for k, v in cfg.timings.items()),
    ]
    path = cfg.out / MANIFEST
    path.write_text("\n".join(lines) + "\n" + format_config(params))
    return path


def run(cfg: ExperimentConfig) -> int:
    cfg.validate()
    t0 = time.perf_counter()
    params = load_parameters(cfg.config)
    cfg.out.mkdir(parents=True, exist_ok=True)
    resolved = RUNNERS[cfg.command](cfg, params)
    cfg.timings["total"] = time.perf_counter() - t0
    write_manifest(cfg, resolved)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return ConfigError.exit_code if exc.code else 0
    try:
        with warnings.catch_warnings():
            if not os.environ.get("TANKSOE_VERBOSE"):
                warnings.simplefilter("ignore")
            return run(config_from_args(ns))
    except TankSoeError as exc:
        print(f"tanksoe: {type(exc).__name__}: {str(exc).splitlines()[0]}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
