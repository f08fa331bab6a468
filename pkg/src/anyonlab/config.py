"""Run configuration: JSON schema validation and normalized echo."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field as dc_field

from .errors import ConfigError
from .grid import Grid2D

_VALID_EXPERIMENTS = ("evolve", "sweep-R", "manybody", "verify",
                      "hierarchy-check")
_VALID_CHECKS = ("two_body", "three_body", "appendix_a")


def _req(d, key, where):
    if key not in d:
        raise ConfigError(f"{where}.{key}" if where else key, "missing field")
    return d[key]


def _num(val, field, *, minimum=None, strict_min=False, integer=False):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(field, f"must be a number, got {val!r}")
    if integer and int(val) != val:
        raise ConfigError(field, f"must be an integer, got {val!r}")
    v = int(val) if integer else float(val)
    if minimum is not None:
        if strict_min and not v > minimum:
            raise ConfigError(field, f"must be > {minimum}, got {v}")
        if not strict_min and not v >= minimum:
            raise ConfigError(field, f"must be >= {minimum}, got {v}")
    return v


@dataclass
class RunConfig:
    """Validated, fully-defaulted experiment description."""

    experiment: str
    grid_n: int
    grid_L: float
    beta: float = 0.0
    R: float = 0.0
    g: float = 0.0
    dt: float | None = None
    T: float = 1.0
    sample_every: int = 10
    initial: dict = dc_field(default_factory=lambda: {
        "kind": "gaussian", "sigma": 1.0, "center": [0.0, 0.0],
        "momentum": [0.0, 0.0]})
    radii: list = dc_field(default_factory=list)
    N: int = 2
    seed: int = 0
    samples: int = 100
    stepper: str = "ifrk4"
    store_snapshots: bool = True
    budget: int = 2**24
    threads: int = 1
    out: str | None = None
    pair_n: int = 16
    triple_n: int = 8
    checks: list = dc_field(default_factory=lambda: list(_VALID_CHECKS))

    def grid(self) -> Grid2D:
        return Grid2D(self.grid_n, self.grid_L)

    def effective_dt(self) -> float:
        if self.dt is not None:
            return self.dt
        from .css import default_dt
        return default_dt(self.grid())

    def normalized(self) -> dict:
        """Echo with every default filled in."""
        return {
            "experiment": self.experiment,
            "grid": {"n": self.grid_n, "L": self.grid_L},
            "params": {
                "beta": self.beta, "R": self.R, "g": self.g,
                "dt": self.effective_dt(), "T": self.T,
                "sample_every": self.sample_every,
            },
            "initial": self.initial,
            "radii": self.radii,
            "N": self.N,
            "seed": self.seed,
            "samples": self.samples,
            "stepper": self.stepper,
            "store_snapshots": self.store_snapshots,
            "budget": self.budget,
            "threads": self.threads,
            "out": self.out,
            "pair_n": self.pair_n,
            "triple_n": self.triple_n,
            "checks": self.checks,
        }


def _validate_grid_n(n, field):
    n = _num(n, field, minimum=4, integer=True)
    if n & (n - 1) != 0:
        raise ConfigError(field, f"must be a power of two, got {n}")
    return n


def from_dict(raw: dict, experiment: str | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    exp = raw.get("experiment", experiment)
    if exp is None:
        raise ConfigError("experiment", "missing field")
    if exp not in _VALID_EXPERIMENTS:
        raise ConfigError("experiment",
                          f"must be one of {_VALID_EXPERIMENTS}, got {exp!r}")
    if experiment is not None and exp != experiment:
        raise ConfigError("experiment",
                          f"config says {exp!r} but subcommand is {experiment!r}")

    g = _req(raw, "grid", "")
    n = _validate_grid_n(_req(g, "n", "grid"), "grid.n")
    L = _num(_req(g, "L", "grid"), "grid.L", minimum=0.0, strict_min=True)

    p = raw.get("params", {})
    cfg = RunConfig(experiment=exp, grid_n=n, grid_L=L)
    cfg.beta = _num(p.get("beta", 0.0), "params.beta")
    cfg.R = _num(p.get("R", 0.0), "params.R", minimum=0.0)
    cfg.g = _num(p.get("g", 0.0), "params.g")
    if "dt" in p:
        cfg.dt = _num(p["dt"], "params.dt", minimum=0.0, strict_min=True)
    cfg.T = _num(p.get("T", 1.0), "params.T", minimum=0.0)
    cfg.sample_every = _num(p.get("sample_every", 10), "params.sample_every",
                            minimum=1, integer=True)

    init = raw.get("initial", None)
    if init is not None:
        kind = init.get("kind", "gaussian")
        if kind == "gaussian":
            cfg.initial = {
                "kind": "gaussian",
                "sigma": _num(init.get("sigma", 1.0), "initial.sigma",
                              minimum=0.0, strict_min=True),
                "center": [float(v) for v in init.get("center", [0.0, 0.0])],
                "momentum": [float(v) for v in init.get("momentum",
                                                        [0.0, 0.0])],
            }
        elif kind == "file":
            path = _req(init, "path", "initial")
            cfg.initial = {"kind": "file", "path": str(path)}
        else:
            raise ConfigError("initial.kind",
                              f"must be 'gaussian' or 'file', got {kind!r}")

    if "radii" in raw:
        radii = raw["radii"]
        if not isinstance(radii, list) or not radii:
            raise ConfigError("radii", "must be a nonempty list")
        vals = [_num(r, "radii", minimum=0.0) for r in radii]
        if sorted(vals, reverse=True) != vals:
            raise ConfigError("radii", "must be sorted in decreasing order")
        cfg.radii = vals
    elif exp == "sweep-R":
        raise ConfigError("radii", "missing field (required for sweep-R)")

    cfg.N = _num(raw.get("N", 2), "N", minimum=2, integer=True)
    if cfg.N not in (2, 3):
        raise ConfigError("N", f"must be 2 or 3, got {cfg.N}")
    cfg.seed = _num(raw.get("seed", 0), "seed", minimum=0, integer=True)
    cfg.samples = _num(raw.get("samples", 100), "samples", minimum=1,
                       integer=True)
    cfg.stepper = raw.get("stepper", "ifrk4")
    if cfg.stepper not in ("ifrk4", "strang"):
        raise ConfigError("stepper", f"unknown stepper {cfg.stepper!r}")
    cfg.store_snapshots = bool(raw.get("store_snapshots", True))
    cfg.budget = _num(raw.get("budget", 2**24), "budget", minimum=1,
                      integer=True)
    cfg.threads = _num(raw.get("threads", 1), "threads", minimum=1,
                       integer=True)
    cfg.out = raw.get("out")
    cfg.pair_n = _validate_grid_n(raw.get("pair_n", 16), "pair_n")
    cfg.triple_n = _validate_grid_n(raw.get("triple_n", 8), "triple_n")
    checks = raw.get("checks", list(_VALID_CHECKS))
    for c in checks:
        if c not in _VALID_CHECKS:
            raise ConfigError("checks", f"unknown check {c!r}")
    cfg.checks = list(checks)

    if exp == "verify" and cfg.R >= math.exp(-1.0) and not cfg.radii:
        import warnings
        warnings.warn(f"params.R = {cfg.R} is outside (0, e^-1); the "
                      "log-divergence estimates assume R < e^-1")
    return cfg


def parse_config(path: str, experiment: str | None = None) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError("config", f"file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from exc
    return from_dict(raw, experiment)
