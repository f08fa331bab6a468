"""Command-line orchestration: evolve, sweep-R, manybody, verify, hierarchy-check.

Exit codes: 0 ok, 2 config error, 3 blow-up or propagation failure,
4 invariant violation, 5 budget exceeded.  Flag > environment variable >
config file, with environment variables ANYONLAB_OUT, ANYONLAB_SEED,
ANYONLAB_THREADS, ANYONLAB_QUIET.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
import warnings

import numpy as np

from . import __version__, _fft
from .config import RunConfig, parse_config
from .errors import (AnyonLabError, BlowUpError, BoundaryViolationError,
                     BudgetExceededError, ConfigError, KrylovBreakdownError)
from .fields import WaveField, gaussian_wavefield
from .grid import Grid2D
from .kernels import kernel_spectrum
from .store import ArtifactStore, load_field_file

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_INVARIANT = 4
EXIT_BUDGET = 5

_EPILOG = """exit codes:
  0  success
  2  configuration error (missing/invalid field)
  3  blow-up or propagation failure
  4  invariant violation (normalization/boundary)
  5  memory budget exceeded
"""


def _env_override(args):
    if args.out is None:
        args.out = os.environ.get("ANYONLAB_OUT")
    if args.seed is None:
        env = os.environ.get("ANYONLAB_SEED")
        args.seed = int(env) if env is not None else None
    if args.threads is None:
        env = os.environ.get("ANYONLAB_THREADS")
        args.threads = int(env) if env is not None else None
    if not args.quiet and os.environ.get("ANYONLAB_QUIET"):
        args.quiet = True
    return args


def _initial_field(cfg: RunConfig, grid: Grid2D) -> WaveField:
    init = cfg.initial
    if init["kind"] == "gaussian":
        return gaussian_wavefield(grid, init["sigma"], init["center"],
                                  init["momentum"])
    values = load_field_file(init["path"])
    u = WaveField(grid, values)
    # renormalize only when actually off, to keep loaded fields bit-exact
    return u if abs(u.norm() - 1.0) <= 1e-12 else u.normalize()


def _setup(args, experiment):
    args = _env_override(args)
    cfg = parse_config(args.config, experiment)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out is not None:
        cfg.out = args.out
    _fft.set_workers(cfg.threads)
    out_dir = cfg.out or os.path.join("runs", experiment.replace("-", "_"))
    store = ArtifactStore(out_dir)
    return cfg, store


def _finish(cfg, store, timings, caught, quiet, extra=None):
    store.write_config(cfg.normalized())
    store.write_meta(__version__, timings=timings,
                     warnings_list=[str(w.message) for w in caught],
                     extra=extra)
    if not quiet:
        print(f"artifacts written to {store.run_dir}")


def cmd_evolve(args):
    cfg, store = _setup(args, "evolve")
    from .css import CssParams, evolve
    grid = cfg.grid()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        u0 = _initial_field(cfg, grid)
        params = CssParams(beta=cfg.beta, R=cfg.R, g=cfg.g,
                           dt=cfg.effective_dt(), T=cfg.T,
                           sample_every=cfg.sample_every)
        t0 = time.perf_counter()
        traj = evolve(u0, params, stepper=cfg.stepper,
                      store_snapshots=cfg.store_snapshots)
        elapsed = time.perf_counter() - t0
    store.write_config(cfg.normalized())
    store.write_diagnostics(traj.diagnostics.columns, traj.diagnostics.rows)
    store.save_field("field_initial", u0.values)
    store.save_field("field_final", traj.final.values)
    _finish(cfg, store, {"evolve_seconds": elapsed}, caught, args.quiet,
            extra={"boundary_flagged": traj.diagnostics.boundary_flagged})
    return EXIT_OK


def cmd_sweep_r(args):
    cfg, store = _setup(args, "sweep-R")
    from .css import CssParams, sweep_R
    grid = cfg.grid()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        u0 = _initial_field(cfg, grid)
        params = CssParams(beta=cfg.beta, R=cfg.R, g=cfg.g,
                           dt=cfg.effective_dt(), T=cfg.T,
                           sample_every=cfg.sample_every)
        t0 = time.perf_counter()
        table = sweep_R(params, cfg.radii, u0, stepper=cfg.stepper)
        elapsed = time.perf_counter() - t0
    store.write_config(cfg.normalized())
    store.write_diagnostics(("R", "sup_error"), table.rows(), name="sweep.csv")
    store.write_json("result.json", {"slope": table.slope,
                                     "reference_R": table.reference_R})
    _finish(cfg, store, {"sweep_seconds": elapsed}, caught, args.quiet)
    return EXIT_OK


def cmd_manybody(args):
    cfg, store = _setup(args, "manybody")
    from .manybody import MANYBODY_COLUMNS, condensate_experiment
    grid = cfg.grid()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        phi0 = _initial_field(cfg, grid)
        t0 = time.perf_counter()
        rows, final_state, norm_drift = condensate_experiment(
            phi0, cfg.N, cfg.beta, cfg.R, cfg.T, cfg.effective_dt(),
            sample_every=cfg.sample_every, budget=cfg.budget)
        elapsed = time.perf_counter() - t0
    store.write_config(cfg.normalized())
    store.write_diagnostics(MANYBODY_COLUMNS, rows)
    store.save_field("state_final", final_state.values)
    _finish(cfg, store, {"manybody_seconds": elapsed}, caught, args.quiet,
            extra={"norm_drift": norm_drift})
    return EXIT_OK


def cmd_verify(args):
    cfg, store = _setup(args, "verify")
    from .verify import (check_appendix_a, check_three_body_positivity,
                         check_two_body_forms)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        radii = cfg.radii or [cfg.R or 0.1]
        reports = []
        t0 = time.perf_counter()
        if "two_body" in cfg.checks:
            pair_grid = Grid2D(cfg.pair_n, cfg.grid_L)
            reports.append(check_two_body_forms(
                pair_grid, radii, samples=cfg.samples, seed=cfg.seed))
        if "three_body" in cfg.checks:
            triple_grid = Grid2D(cfg.triple_n, cfg.grid_L)
            for R in radii:
                reports.append(check_three_body_positivity(
                    triple_grid, R, samples=cfg.samples, seed=cfg.seed))
        if "appendix_a" in cfg.checks:
            reports.append(check_appendix_a(
                cfg.grid(), radii, cfg.beta, samples=cfg.samples,
                seed=cfg.seed))
        elapsed = time.perf_counter() - t0
    store.write_config(cfg.normalized())
    store.write_json("verify_reports.json", [r.to_dict() for r in reports])
    all_passed = all(r.passed for r in reports)
    _finish(cfg, store, {"verify_seconds": elapsed}, caught, args.quiet,
            extra={"all_passed": all_passed})
    if not all_passed:
        raise AssertionError("one or more inequality checks failed; see "
                             + store.path("verify_reports.json"))
    return EXIT_OK


def cmd_hierarchy_check(args):
    cfg, store = _setup(args, "hierarchy-check")
    from .verify import hierarchy_residual
    grid = cfg.grid()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        phi = _initial_field(cfg, grid)
        kspec = kernel_spectrum(grid, cfg.R)
        t0 = time.perf_counter()
        residual = hierarchy_residual(phi, cfg.beta, cfg.R, kspec)
        chi = gaussian_wavefield(grid, 0.5 * cfg.initial.get("sigma", 1.0),
                                 center=(0.12 * grid.L, -0.07 * grid.L),
                                 momentum=(2.0 * math.pi / grid.L * 4, 0.0))
        perturbed = hierarchy_residual(phi, cfg.beta, cfg.R, kspec,
                                       perturbation=(chi, 0.1))
        elapsed = time.perf_counter() - t0
    store.write_config(cfg.normalized())
    store.write_json("hierarchy.json", {"residual": residual,
                                        "perturbed_residual": perturbed})
    _finish(cfg, store, {"hierarchy_seconds": elapsed}, caught, args.quiet)
    return EXIT_OK


_COMMANDS = {
    "evolve": cmd_evolve,
    "sweep-R": cmd_sweep_r,
    "manybody": cmd_manybody,
    "verify": cmd_verify,
    "hierarchy-check": cmd_hierarchy_check,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="anyonlab",
        description="Gauge-coupled Schrodinger dynamics laboratory",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, epilog=_EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="RNG seed")
        p.add_argument("--threads", type=int, default=None,
                       help="FFT worker threads")
        p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowUpError, KrylovBreakdownError) as exc:
        print(f"propagation failure: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (BoundaryViolationError, AssertionError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except AnyonLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
