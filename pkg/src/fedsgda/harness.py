"""Experiment orchestration: config files, multi-seed runs, sweeps, CSV output, presets.

Config files are flat ``key = value`` lines with ``#`` comments. Problem
settings use dotted keys such as ``problem.synthetic.nu = 1.0``. Lists are
comma separated and fractions such as ``1/3`` are accepted for reals.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import (
    ConfigError,
    EstimatorKind,
    RoundMetrics,
    RunConfig,
    SmoothnessConstants,
)
from .engine import run
from .oracle import estimate_phi_min, population
from .problems import (
    AucProblem,
    AucProblemConfig,
    ClientDataset,
    SyntheticProblem,
    SyntheticProblemConfig,
    generate_auc_split,
    generate_synthetic,
    lipschitz_constants,
)

METRIC_COLUMNS = (
    "round", "eta", "gamma", "alpha", "grad_phi_norm_sq", "phi_minus_f",
    "eps_x", "eps_y", "potential_shifted", "clients_contacted",
)
AUC_COLUMN = "test_auc"
FAMILIES = ("synthetic", "auc")

_RUN_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_RUN_KEYS = set(_RUN_FIELDS) - {"num_clients", "seed"}
_PROBLEM_CONFIGS = {"synthetic": SyntheticProblemConfig, "auc": AucProblemConfig}
_TOP_KEYS = {"name", "family", "seeds", "output", "workers", "c0_starts", "verify.canary"}
_SWEEP_KEYS = {"sweep.S": "clients_per_round", "sweep.K": "local_steps", "sweep.estimator": "estimator"}


# -- config text --------------------------------------------------------------------

def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines into an ordered dict of raw strings."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def format_config(mapping: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in mapping.items())


def _parse_bool(key: str, value: str) -> bool:
    low = value.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _parse_float(key: str, value: str) -> float:
    try:
        return float(Fraction(value)) if "/" in value else float(value)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key}: expected a real number, got {value!r}") from None


def _coerce(key: str, value: str, kind):
    """Convert a raw string using the annotated type of a dataclass field."""
    kind = str(kind)
    if value.lower() == "none" and "Optional" in kind:
        return None
    if "bool" in kind:
        return _parse_bool(key, value)
    if "int" in kind:
        return _parse_int(key, value)
    if "float" in kind:
        return _parse_float(key, value)
    return value


def _split_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


# -- experiment config -----------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """A run configuration plus problem, seeds and output location."""

    run: RunConfig
    family: str
    problem: object
    seeds: tuple[int, ...] = (0,)
    output: Optional[Path] = None
    name: str = "experiment"
    workers: int = 1
    c0_starts: int = 20
    canary: float = 0.0
    sweep: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown problem family {self.family!r}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        for s in self.seeds:
            if not 0 <= s < 2**64:
                raise ConfigError(f"seed {s} is not a 64-bit unsigned integer")
        if self.problem.num_clients != self.run.num_clients:
            raise ConfigError("run and problem disagree on the number of clients")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.c0_starts < 0:
            raise ConfigError("c0_starts must be >= 0")

    def with_run(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, run=dataclasses.replace(self.run, **changes))


def experiment_from_mapping(mapping: dict[str, str]) -> ExperimentConfig:
    """Build and validate an :class:`ExperimentConfig` from raw key/value strings."""
    family = mapping.get("family", "synthetic")
    if family not in FAMILIES:
        raise ConfigError(f"family must be one of {FAMILIES}, got {family!r}")
    prob_cls = _PROBLEM_CONFIGS[family]
    prob_fields = {f.name: f for f in dataclasses.fields(prob_cls)}
    prob_kwargs, run_kwargs, sweep, overrides = {}, {}, {}, {}
    prefix = f"problem.{family}."
    for key, value in mapping.items():
        if key in _TOP_KEYS:
            continue
        if key.startswith(prefix):
            name = key[len(prefix):]
            if name not in prob_fields:
                raise ConfigError(f"unknown key {key!r}")
            prob_kwargs[name] = _coerce(key, value, prob_fields[name].type)
        elif key in _RUN_KEYS:
            run_kwargs[key] = _coerce(key, value, _RUN_FIELDS[key].type)
        elif key in _SWEEP_KEYS:
            target = _SWEEP_KEYS[key]
            items = _split_list(value)
            if not items:
                raise ConfigError(f"{key}: empty grid")
            if target == "estimator":
                sweep[target] = [EstimatorKind(v.upper()) for v in items]
            else:
                sweep[target] = [_parse_int(key, v) for v in items]
        elif key.startswith("override."):
            parts = key.split(".")
            if len(parts) != 3 or parts[2] not in _RUN_KEYS:
                raise ConfigError(f"unknown key {key!r}; expected override.<ESTIMATOR>.<run key>")
            try:
                est = EstimatorKind(parts[1].upper())
            except ValueError:
                raise ConfigError(f"{key}: unknown estimator {parts[1]!r}") from None
            overrides.setdefault(est, {})[parts[2]] = _coerce(key, value, _RUN_FIELDS[parts[2]].type)
        else:
            raise ConfigError(f"unknown key {key!r}")
    if "estimator" in run_kwargs:
        try:
            run_kwargs["estimator"] = EstimatorKind(str(run_kwargs["estimator"]).upper())
        except ValueError:
            raise ConfigError(f"unknown estimator {run_kwargs['estimator']!r}") from None
    for key in ("schedule", "sampling"):
        if key in run_kwargs:
            run_kwargs[key] = str(run_kwargs[key]).upper()
    try:
        prob_cfg = prob_cls(**prob_kwargs)
        missing = [k for k in ("clients_per_round", "local_steps", "rounds", "local_batch_size")
                   if k not in run_kwargs]
        if missing:
            raise ConfigError(f"missing required keys: {', '.join(missing)}")
        seeds = tuple(_parse_int("seeds", s) for s in _split_list(mapping.get("seeds", "0")))
        run_cfg = RunConfig(num_clients=prob_cfg.num_clients, seed=seeds[0] if seeds else 0, **run_kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    output = mapping.get("output")
    cfg = ExperimentConfig(
        run=run_cfg,
        family=family,
        problem=prob_cfg,
        seeds=seeds,
        output=Path(output) if output else None,
        name=mapping.get("name", "experiment"),
        workers=_parse_int("workers", mapping.get("workers", "1")),
        c0_starts=_parse_int("c0_starts", mapping.get("c0_starts", "20")),
        canary=_parse_float("verify.canary", mapping.get("verify.canary", "0")),
        sweep=sweep,
        overrides=overrides,
    )
    for est, changes in overrides.items():
        # catch bad per-estimator settings before any compute
        dataclasses.replace(run_cfg, estimator=est, **changes)
    return cfg


def load_config(source: str, updates: Sequence[str] = ()) -> ExperimentConfig:
    """Load a config file, or a preset when ``source`` names one.

    ``updates`` are extra ``key=value`` strings applied on top.
    """
    path = Path(source)
    if path.is_file():
        mapping = parse_config_text(path.read_text())
    elif source in PRESETS:
        mapping = dict(PRESETS[source])
    else:
        raise FileNotFoundError(f"no config file or preset named {source!r}")
    for item in updates:
        extra = parse_config_text(item)
        if not extra:
            raise ConfigError(f"empty override {item!r}")
        mapping.update(extra)
    return experiment_from_mapping(mapping)


# -- problem construction ------------------------------------------------------------

@dataclass
class ProblemInstance:
    problem: object
    datasets: list[ClientDataset]
    test: Optional[ClientDataset] = None


def build_instance(cfg: ExperimentConfig, seed: int) -> ProblemInstance:
    """Generate the datasets for ``seed``; depends only on the problem config and seed."""
    if cfg.family == "synthetic":
        datasets = generate_synthetic(cfg.problem, seed)
        return ProblemInstance(SyntheticProblem(cfg.problem), datasets)
    split = generate_auc_split(cfg.problem, seed)
    return ProblemInstance(AucProblem.from_data(cfg.problem, split.clients), split.clients, split.test)


# -- runs -----------------------------------------------------------------------------

@dataclass
class SeedResult:
    seed: int
    metrics: list[RoundMetrics]
    constants: SmoothnessConstants
    c0_estimate: Optional[float]


@dataclass
class RunSummary:
    """Per-seed metric series and their cross-seed aggregates."""

    name: str
    config: ExperimentConfig
    seeds: list[SeedResult]
    columns: tuple[str, ...]
    mean: np.ndarray
    min: np.ndarray
    max: np.ndarray

    @property
    def rounds(self) -> int:
        return self.mean.shape[0]

    def column(self, name: str, stat: str = "mean") -> np.ndarray:
        return getattr(self, stat)[:, self.columns.index(name)]

    def series(self, name: str) -> np.ndarray:
        """Array of shape (seeds, rounds) for one metric."""
        return np.array([[getattr(m, name) for m in s.metrics] for s in self.seeds], dtype=np.float64)

    @property
    def final_grad_phi_norm_sq_mean(self) -> float:
        return float(self.column("grad_phi_norm_sq")[-1])

    @property
    def c0_estimate(self) -> Optional[float]:
        values = [s.c0_estimate for s in self.seeds if s.c0_estimate is not None]
        return float(np.mean(values)) if values else None


def _columns(family: str) -> tuple[str, ...]:
    return METRIC_COLUMNS + ((AUC_COLUMN,) if family == "auc" else ())


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def metrics_csv(metrics: Sequence[RoundMetrics], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for m in metrics:
        writer.writerow([_fmt(getattr(m, c)) for c in columns])
    return buf.getvalue()


def _config_echo(cfg: ExperimentConfig) -> dict:
    run_cfg = {k: (v.value if hasattr(v, "value") else v) for k, v in dataclasses.asdict(cfg.run).items()}
    run_cfg.pop("seed")
    return {
        "name": cfg.name,
        "family": cfg.family,
        "seeds": list(cfg.seeds),
        "run": run_cfg,
        "problem": dataclasses.asdict(cfg.problem),
    }


def _sidecar(cfg: ExperimentConfig, result: SeedResult) -> dict:
    meta = {
        "config": _config_echo(cfg),
        "seed": result.seed,
        "constants": result.constants.as_dict(),
        "sigma_estimates": {"sigma1_sq": result.constants.sigma1_sq, "sigma2_sq": result.constants.sigma2_sq},
        "sampling": cfg.run.sampling.value,
        "same_subsets": cfg.run.same_subsets,
        "c0_estimate": result.c0_estimate,
        "c0_note": "estimate from multi-start descent on Phi; not a certified optimum",
        "potential_note": "potential_shifted omits the unknown constant -Phi(x*)",
    }
    if cfg.family == "auc":
        meta["test_auc_note"] = ("linear scorer on generated data with a held-out split; "
                                 "not comparable to image-model results")
    return meta


def run_seed(cfg: ExperimentConfig, seed: int) -> SeedResult:
    inst = build_instance(cfg, seed)
    p, q = inst.problem.dims
    x0, y0 = np.zeros(p), np.zeros(q)
    consts = lipschitz_constants(inst.problem, inst.datasets, x0, y0, seed=seed)
    pop = population(inst.problem, inst.datasets)
    c0 = None
    if cfg.c0_starts > 0:
        phi_star = estimate_phi_min(inst.problem, inst.datasets, consts, x0, starts=cfg.c0_starts, seed=seed)
        ev = pop.evaluate(x0, y0)
        c0 = 2 * ev.phi - phi_star - ev.f
    run_cfg = dataclasses.replace(cfg.run, seed=seed)
    _, metrics = run(run_cfg, inst.problem, inst.datasets, consts, x0, y0, pop=pop,
                     test=inst.test, workers=cfg.workers)
    return SeedResult(seed, metrics, consts, c0)


def summarize(cfg: ExperimentConfig, results: list[SeedResult]) -> RunSummary:
    columns = _columns(cfg.family)
    stat_cols = columns[1:]
    lengths = {len(r.metrics) for r in results}
    if lengths != {cfg.run.rounds}:
        raise RuntimeError(f"metric series lengths {sorted(lengths)} differ from T={cfg.run.rounds}")
    data = np.array([[[np.nan if getattr(m, c) is None else getattr(m, c) for c in stat_cols]
                      for m in r.metrics] for r in results], dtype=np.float64)
    rounds = np.arange(cfg.run.rounds, dtype=np.float64)[:, None]
    agg = [np.hstack([rounds, f(data, axis=0)]) for f in (np.mean, np.min, np.max)]
    return RunSummary(cfg.name, cfg, results, columns, *agg)


def summary_csv(summary: RunSummary) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    stats = ("mean", "min", "max")
    header = ["round"] + [f"{c}_{s}" for c in summary.columns[1:] for s in stats]
    writer.writerow(header)
    for t in range(summary.rounds):
        row = [str(t)]
        for j in range(1, len(summary.columns)):
            row.extend(_fmt(getattr(summary, s)[t, j]) for s in stats)
        writer.writerow(row)
    return buf.getvalue()


def write_summary(summary: RunSummary, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    cfg = summary.config
    for r in summary.seeds:
        (out / f"seed_{r.seed}.csv").write_text(metrics_csv(r.metrics, summary.columns))
        (out / f"seed_{r.seed}.json").write_text(json.dumps(_sidecar(cfg, r), indent=2, sort_keys=True) + "\n")
    (out / "summary.csv").write_text(summary_csv(summary))
    meta = {
        "config": _config_echo(cfg),
        "final_grad_phi_norm_sq_mean": summary.final_grad_phi_norm_sq_mean,
        "c0_estimate_mean": summary.c0_estimate,
    }
    (out / "summary.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> RunSummary:
    """Run every seed, aggregate, and write CSVs when an output path is set.

    Any failing seed aborts the experiment before anything is aggregated.
    """
    results = [run_seed(cfg, seed) for seed in cfg.seeds]
    summary = summarize(cfg, results)
    if write and cfg.output is not None:
        write_summary(summary, cfg.output)
    return summary


# -- sweeps ---------------------------------------------------------------------------

def cell_name(run_cfg: RunConfig) -> str:
    return f"S{run_cfg.clients_per_round}_K{run_cfg.local_steps}_{run_cfg.estimator.value}"


def sweep_cells(base: ExperimentConfig, grid: Optional[dict] = None) -> list[ExperimentConfig]:
    """Cartesian product over ``{clients_per_round, local_steps, estimator}``.

    Per-estimator overrides from ``base.overrides`` are applied to matching cells.
    """
    grid = dict(base.sweep if grid is None else grid)
    unknown = set(grid) - set(_SWEEP_KEYS.values())
    if unknown:
        raise ConfigError(f"unknown sweep axes {sorted(unknown)}")
    axes = [k for k in ("clients_per_round", "local_steps", "estimator")]
    values = [list(grid.get(k, [getattr(base.run, k)])) for k in axes]
    if any(not v for v in values):
        raise ConfigError("sweep grid must be nonempty")
    cells = []
    for combo in itertools.product(*values):
        changes = dict(zip(axes, combo))
        est = EstimatorKind(changes["estimator"])
        changes.update(base.overrides.get(est, {}))
        if est is not EstimatorKind.SPIDER:
            changes.setdefault("spider_period", None)
            changes.setdefault("spider_big_batch", None)
        cfg = base.with_run(**changes)
        name = cell_name(cfg.run)
        out = base.output / name if base.output is not None else None
        cells.append(dataclasses.replace(cfg, name=name, output=out, sweep={}, overrides={}))
    return cells


def sweep_table(summaries: Sequence[RunSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    has_auc = any(s.config.family == "auc" for s in summaries)
    header = ["cell", "S", "K", "estimator", "final_grad_phi_norm_sq_mean",
              "final_grad_phi_norm_sq_min", "final_grad_phi_norm_sq_max"]
    if has_auc:
        header.append("final_test_auc_mean")
    writer.writerow(header)
    for s in summaries:
        r = s.config.run
        row = [s.name, r.clients_per_round, r.local_steps, r.estimator.value,
               _fmt(s.column("grad_phi_norm_sq")[-1]), _fmt(s.column("grad_phi_norm_sq", "min")[-1]),
               _fmt(s.column("grad_phi_norm_sq", "max")[-1])]
        if has_auc:
            row.append(_fmt(s.column(AUC_COLUMN)[-1]))
        writer.writerow(row)
    return buf.getvalue()


def sweep(base: ExperimentConfig, grid: Optional[dict] = None, write: bool = True) -> list[RunSummary]:
    """Run every grid cell with the base seeds; the combined table is written last."""
    cells = sweep_cells(base, grid)
    summaries = [run_experiment(c, write=write) for c in cells]
    if write and base.output is not None:
        base.output.mkdir(parents=True, exist_ok=True)
        (base.output / "sweep_summary.csv").write_text(sweep_table(summaries))
    return summaries


# -- presets --------------------------------------------------------------------------

def _synthetic_base(S, K, b) -> dict:
    return {
        "family": "synthetic",
        "problem.synthetic.p": "100",
        "problem.synthetic.nu": "1",
        "problem.synthetic.mu": "1",
        "problem.synthetic.num_clients": "500",
        "problem.synthetic.samples_per_client": "100",
        "problem.synthetic.center_var": "0.5",
        "problem.synthetic.sample_var": "0.1",
        "clients_per_round": str(S),
        "local_steps": str(K),
        "local_batch_size": str(b),
        "rounds": "500",
        "seeds": "0",
    }


def _auc_base(S, K, b, sorted_fraction="0") -> dict:
    return {
        "family": "auc",
        "problem.auc.num_clients": "500",
        "problem.auc.samples_per_client": "100",
        "problem.auc.positive_fraction": "0.1",
        "problem.auc.sorted_fraction": sorted_fraction,
        "clients_per_round": str(S),
        "local_steps": str(K),
        "local_batch_size": str(b),
        "rounds": "500",
        "seeds": "0",
    }


# (S, K, b, MB eta, MB gamma, STORM c_eta, c_gamma, c_alpha)
SYNTHETIC_TABLE = [
    (5, 5, 5, "1e-3", "1e-3", "1e-2", "1e-1", "1"),
    (5, 10, 5, "1e-4", "1e-3", "1e-3", "1e-2", "10"),
    (5, 20, 5, "1e-4", "1e-3", "1e-3", "1e-1", "1"),
    (10, 5, 5, "1e-3", "1e-3", "1e-2", "1e-1", "1"),
    (10, 10, 5, "1e-4", "1e-3", "1e-3", "1e-2", "1"),
    (10, 20, 5, "1e-4", "1e-3", "1e-3", "1e-2", "1"),
    (20, 5, 5, "1e-3", "1e-3", "1e-2", "1e-1", "1"),
    (20, 10, 5, "1e-3", "1e-2", "1e-3", "1e-2", "1"),
    (20, 20, 5, "1e-4", "1e-3", "1e-3", "1e-3", "1"),
]

# (S, K, b, MB eta, MB gamma, STORM c_eta, c_gamma, c_alpha, rho)
AUC_TABLE = [
    (5, 1, 5, "1", "1e-2", "1", "1e-1", "5", "1/5"),
    (5, 1, 10, "1", "1e-2", "1", "1e-1", "5", "1/5"),
    (5, 10, 5, "1e-1", "1e-2", "1", "1e-1", "10", "1/5"),
    (5, 10, 10, "1", "1e-1", "1", "1", "10", "1/5"),
    (5, 20, 5, "1e-1", "1e-1", "1", "1", "10", "1/5"),
    (5, 20, 10, "1", "1", "1", "1e-1", "10", "1/5"),
    (10, 1, 5, "1", "1e-2", "1", "1e-1", "5", "1/5"),
    (10, 1, 10, "1", "1e-3", "1", "1e-1", "5", "1/5"),
    (10, 10, 5, "1", "1", "1", "1", "5", "1/5"),
    (10, 10, 10, "1", "1e-1", "1", "1e-1", "5", "1/5"),
    (10, 20, 5, "1", "1e-1", "1", "1", "10", "1/5"),
    (10, 20, 10, "1", "1", "1", "1", "10", "1/5"),
    (20, 1, 5, "1", "1e-3", "1", "1e-1", "5", "1/5"),
    (20, 1, 10, "1", "1e-2", "1", "1e-1", "5", "1/5"),
    (20, 10, 5, "1", "1", "1", "1", "5", "1/5"),
    (20, 10, 10, "1", "1e-2", "1", "1e-1", "10", "1/5"),
    (20, 20, 5, "1", "1e-1", "1", "1e-1", "10", "1/5"),
    (20, 20, 10, "1", "1", "1", "1", "10", "1/5"),
]

AUC_SORTED_TABLE = [
    (5, 1, 10, "1", "1e-2", "1", "1e-1", "5", "1/5"),
    (5, 10, 10, "1e-1", "1e-3", "1e-1", "1e-2", "10", "1/5"),
    (5, 20, 10, "1e-1", "1", "1e-1", "1e-1", "10", "1/5"),
]


def _mb(eta, gamma) -> dict:
    return {"estimator": "MB", "c_eta": eta, "c_gamma": gamma, "c_alpha": "1", "rho": "0"}


def _storm(c_eta, c_gamma, c_alpha, rho) -> dict:
    return {"estimator": "STORM", "c_eta": c_eta, "c_gamma": c_gamma, "c_alpha": c_alpha, "rho": rho}


def _build_presets() -> dict[str, dict[str, str]]:
    presets: dict[str, dict[str, str]] = {}
    for S, K, b, eta, gamma, ce, cg, ca in SYNTHETIC_TABLE:
        tag = f"synthetic-S{S}-K{K}-b{b}"
        presets[f"{tag}-mb"] = {"name": f"{tag}-mb", **_synthetic_base(S, K, b), **_mb(eta, gamma)}
        presets[f"{tag}-storm"] = {"name": f"{tag}-storm", **_synthetic_base(S, K, b), **_storm(ce, cg, ca, "1/3")}
    for table, kind, frac in ((AUC_TABLE, "auc", "0"), (AUC_SORTED_TABLE, "auc-sorted", "0.9")):
        for S, K, b, eta, gamma, ce, cg, ca, rho in table:
            tag = f"{kind}-S{S}-K{K}-b{b}"
            presets[f"{tag}-mb"] = {"name": f"{tag}-mb", **_auc_base(S, K, b, frac), **_mb(eta, gamma)}
            presets[f"{tag}-storm"] = {"name": f"{tag}-storm", **_auc_base(S, K, b, frac), **_storm(ce, cg, ca, rho)}
    presets["desk-synthetic"] = {
        "name": "desk-synthetic",
        "family": "synthetic",
        "problem.synthetic.p": "10",
        "problem.synthetic.num_clients": "20",
        "problem.synthetic.samples_per_client": "20",
        "clients_per_round": "5",
        "local_steps": "5",
        "local_batch_size": "5",
        "rounds": "200",
        "seeds": "0",
        **_mb("1e-2", "1e-1"),
    }
    presets["desk-auc"] = {
        "name": "desk-auc",
        "family": "auc",
        "problem.auc.d": "20",
        "problem.auc.num_clients": "50",
        "problem.auc.samples_per_client": "100",
        "clients_per_round": "5",
        "local_steps": "10",
        "local_batch_size": "10",
        "rounds": "300",
        "seeds": "0",
        **_mb("1e-1", "1e-1"),
    }
    return presets


PRESETS = _build_presets()


def preset_names() -> list[str]:
    return list(PRESETS)
