"""Seeded Monte Carlo sweeps over SINR targets, RIS size and RIS placement.

Rows are deterministic: realization i derives its channel and solver-init
seeds purely from (spec.seed, i), independent of the sweep point and the
variant.  All variants AND all sweep values therefore see identical draws
at matching realization indices, making dB gaps paired comparisons (for
the element sweep the clustered channels are nested across RIS sizes,
since ray draws do not depend on the array geometry).  Output is
plot-ready CSV.
"""

import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import individual, penalty, system
from .channel import generate_scenario
from .system import ConfigError, SystemConfig, dbm_to_watts, db_to_linear, watts_to_dbm

SWEEP_KINDS = ("sinr", "elements", "distance", "convergence")
VARIANTS = (
    "penalty_hybrid",
    "penalty_fully_digital",
    "random_theta",
    "maxmin_theta_joint_wv",
    "individual",
)

CSV_HEADER = "variant,sweep_value,realization,power_dbm,converged,min_sinr_db,outer_iters,wall_ms"
TRACE_HEADER = "outer_iter,rho,objective,xi"


@dataclass(frozen=True)
class SweepSpec:
    kind: str
    values: tuple
    realizations: int = 20
    variants: tuple = ("penalty_hybrid",)
    seed: int = 1

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ConfigError(f"unknown sweep kind {self.kind!r}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ConfigError("sweep values must be non-empty")
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise ConfigError("sweep values must be sorted ascending")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "variants", tuple(self.variants))
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant {v!r}")
        if not self.variants:
            raise ConfigError("at least one variant required")


@dataclass
class ResultRow:
    variant: str
    sweep_value: float
    realization: int
    power_dbm: float
    converged: bool
    min_sinr_db: float
    outer_iters: int
    wall_ms: float = 0.0


def derive_seed(base, realization, tag=0):
    """Deterministic per-realization seed, shared by all sweep points and variants."""
    ss = np.random.SeedSequence((int(base), int(realization), int(tag)))
    return int(ss.generate_state(1, np.uint64)[0])


def apply_sweep_value(config, kind, value):
    """Specialize the base config for one sweep point."""
    if kind == "sinr":
        return replace(config, gamma=np.full(config.k, db_to_linear(value)))
    if kind == "elements":
        f2 = value / config.f1
        if abs(f2 - round(f2)) > 1e-9 or round(f2) < 1:
            raise ConfigError(f"element count {value} is not a multiple of f1={config.f1}")
        return replace(config, f2=int(round(f2)))
    if kind == "distance":
        if value <= 0:
            raise ConfigError("RIS distance must be positive")
        return replace(config, ris_distance=float(value))
    return config  # convergence: base config as-is


def run_variant(variant, config, channels, base_seed, realization):
    """Run one solver variant; returns (power_w, converged, min_sinr_db, outer_iters, records)."""
    init_seed = derive_seed(base_seed, realization, tag=1)
    records = None
    if variant == "penalty_hybrid":
        sol, _, diag = penalty.solve(config, channels, init_seed)
        converged, outer, records = diag.converged, len(diag.records), diag.records
        cfg_eval = config
    elif variant == "penalty_fully_digital":
        cfg_eval = replace(config, n=config.m)
        sol, _, diag = penalty.solve(cfg_eval, channels, init_seed)
        converged, outer, records = diag.converged, len(diag.records), diag.records
    elif variant == "random_theta":
        rng = np.random.default_rng(derive_seed(base_seed, realization, tag=2))
        b = np.exp(1j * rng.uniform(0, 2 * np.pi, config.f))
        sol, _, diag = penalty.solve(config, channels, init_seed, fixed_theta=b)
        converged, outer, records = diag.converged, len(diag.records), diag.records
        cfg_eval = config
    elif variant == "maxmin_theta_joint_wv":
        b = individual.ris_max_min(channels)
        sol, _, diag = penalty.solve(config, channels, init_seed, fixed_theta=b)
        converged, outer, records = diag.converged, len(diag.records), diag.records
        cfg_eval = config
    elif variant == "individual":
        cfg_eval = config
        outer = 0
        try:
            sol = individual.individual_solve(config, channels)
        except (individual.InfeasibleError, individual.DegenerateChannelError):
            return float("nan"), False, float("nan"), 0, None
        sinr_db = system.linear_to_db(system.all_sinrs(sol, channels))
        converged = bool(np.all(sinr_db >= system.linear_to_db(config.gamma) - 0.1))
    else:
        raise ConfigError(f"unknown variant {variant!r}")

    power_w = system.transmit_power(sol.W, cfg_eval.d)
    min_sinr_db = float(np.min(system.linear_to_db(system.all_sinrs(sol, channels))))
    return power_w, converged, min_sinr_db, outer, records


def _run_row(args):
    config, spec, si, ri, variant, measure_time = args
    value = spec.values[si]
    cfg = apply_sweep_value(config, spec.kind, value)
    channels = generate_scenario(cfg, derive_seed(spec.seed, ri))
    t0 = time.perf_counter() if measure_time else 0.0
    power_w, converged, min_sinr_db, outer, records = run_variant(
        variant, cfg, channels, spec.seed, ri)
    wall_ms = (time.perf_counter() - t0) * 1e3 if measure_time else 0.0
    row = ResultRow(
        variant=variant,
        sweep_value=value,
        realization=ri,
        power_dbm=float(watts_to_dbm(power_w)) if power_w > 0 else float("nan"),
        converged=bool(converged),
        min_sinr_db=min_sinr_db,
        outer_iters=outer,
        wall_ms=wall_ms,
    )
    return row, records


def run_sweep(spec, config_base, *, workers=1, measure_time=False, collect_trace=False):
    """Execute the sweep; rows ordered by (sweep index, realization, variant).

    Returns (rows, trace) where trace holds the per-outer-iteration records
    of the first executed row (None unless collect_trace and the first
    variant is penalty-based).
    """
    jobs = [
        (config_base, spec, si, ri, variant, measure_time)
        for si in range(len(spec.values))
        for ri in range(spec.realizations)
        for variant in spec.variants
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_row, jobs))
    else:
        outcomes = [_run_row(j) for j in jobs]
    rows = [row for row, _ in outcomes]
    trace = outcomes[0][1] if collect_trace else None
    return rows, trace


def format_row(row):
    conv = "true" if row.converged else "false"
    return (f"{row.variant},{row.sweep_value:g},{row.realization},"
            f"{row.power_dbm:.6f},{conv},{row.min_sinr_db:.6f},"
            f"{row.outer_iters},{row.wall_ms:.3f}")


def emit_csv(rows, path):
    """Write result rows with the pinned header; byte-stable for fixed inputs."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in rows:
                fh.write(format_row(row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def emit_trace(records, path):
    """Write per-outer-iteration solver records (outer_iter, rho, objective, xi)."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(TRACE_HEADER + "\n")
            for r in records or []:
                fh.write(f"{r.outer_iter},{r.rho:.6e},{r.objective:.10e},{r.xi:.10e}\n")
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


CONFIG_KEYS = ("m", "n", "k", "f1", "f2", "gamma_db", "noise_dbm", "ris_distance",
               "rho0", "c", "eps1", "eps2", "seed")


def parse_config_text(text):
    """Parse the flat key-value config format; returns (SystemConfig, seed)."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = body.partition("=")
        key = key.strip().lower()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            raw[key] = float(value.strip())
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}") from exc

    def geti(key, default):
        return int(raw.get(key, default))

    k = geti("k", 3)
    gamma_db = raw.get("gamma_db", 10.0)
    noise_dbm = raw.get("noise_dbm", -85.0)
    config = SystemConfig(
        m=geti("m", 16),
        n=geti("n", 4),
        k=k,
        f1=geti("f1", 4),
        f2=geti("f2", 4),
        gamma=np.full(k, db_to_linear(gamma_db)),
        sigma2=np.full(k, dbm_to_watts(noise_dbm)),
        ris_distance=raw.get("ris_distance", 50.0),
        rho0=raw.get("rho0", 1e-3),
        c=raw.get("c", 0.9),
        eps1=raw.get("eps1", 1e-4),
        eps2=raw.get("eps2", 1e-7),
    )
    return config, geti("seed", 1)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)
