"""Reproducible experiment driver: simulate, solve, evaluate, record.

One experiment sweeps every simulation-grid source (one trial per source)
across the configured noise levels and solver settings on a spherical
head model, always simulating on one jittered grid and reconstructing on
the other to avoid the inverse crime. The output directory receives

* ``config.json`` — the canonical echo of the configuration;
* ``ground_truth.csv`` — one row per (trial, noise level);
* ``results.csv`` — one row per (trial, noise level, solver), sorted
  canonically, floats in shortest round-trip notation, deterministic down
  to the byte for a fixed master seed regardless of thread count;
* ``timings.csv`` — wall-clock runtimes, kept out of ``results.csv``
  because they are not reproducible;
* ``summary.json`` — aggregate tables (see :mod:`besi.report`);
* ``trials/`` — per-trial scratch files that make interrupted runs
  resumable.

Per-trial randomness derives from the master seed and the (noise level,
trial) index pair alone, so parallel and serial executions produce
identical rows.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._version import __version__
from .evaluation import MassDistribution, depth_of_max, emd_single_truth
from .exceptions import BesiError, ConfigError
from .forward import (
    SimulationConfig,
    SphereHeadModel,
    build_sphere_leadfield,
    make_dual_grids,
    simulate_measurement,
)
from .solvers import SolverConfig, solve
from .weighting import Optimizer, PriorFamily, PriorSpec, SnrContext, snr_from_data

__all__ = [
    "SolverSetting",
    "ExperimentConfig",
    "run_experiment",
    "RESULT_COLUMNS",
    "TIMING_COLUMNS",
    "GROUND_TRUTH_COLUMNS",
    "load_results",
]

RESULT_COLUMNS = (
    "trial_id",
    "solver",
    "noise_percent",
    "source_index",
    "depth_true_mm",
    "depth_recon_mm",
    "emd_mm",
    "iterations",
    "status",
    "seed",
    "config_hash",
    "version",
)
TIMING_COLUMNS = ("trial_id", "solver", "noise_percent", "runtime_s")
GROUND_TRUTH_COLUMNS = (
    "trial_id",
    "source_index",
    "depth_mm",
    "moment",
    "noise_percent",
    "seed",
)

_CONDITIONAL_FAMILIES = frozenset(
    {
        PriorFamily.WCG_GA,
        PriorFamily.WCG_IG,
        PriorFamily.WCG_GEN,
        PriorFamily.WCL,
        PriorFamily.WCGL,
    }
)


@dataclass(frozen=True)
class SolverSetting:
    """One solver variant of the sweep (family plus hyperparameter choices)."""

    family: str
    optimizer: Optional[str] = None
    alpha_bar: Optional[float] = None
    s: Optional[float] = None
    moment_consistent: bool = False

    def __post_init__(self):
        fam = PriorFamily(self.family)
        object.__setattr__(self, "family", fam.value)
        if self.optimizer is not None:
            object.__setattr__(self, "optimizer", Optimizer(self.optimizer).value)
        if fam is PriorFamily.WCG_GEN and self.s is None:
            raise ConfigError("cg-gen solver settings need an explicit s")

    def label(self) -> str:
        fam = PriorFamily(self.family)
        base = {
            PriorFamily.WG: "wmne",
            PriorFamily.WL: "wl",
            PriorFamily.WGL: "wgl",
            PriorFamily.WCG_GA: "cg-ga",
            PriorFamily.WCG_IG: "cg-ig",
            PriorFamily.WCG_GEN: f"cg-gen(s={self.s:g})" if self.s else "cg-gen",
            PriorFamily.WCL: "wcl",
            PriorFamily.WCGL: "wcgl",
        }[fam]
        if fam in _CONDITIONAL_FAMILIES:
            opt = self.optimizer if self.optimizer is not None else Optimizer.EM.value
            return f"{base}-{opt}"
        return base

    def to_mapping(self) -> dict:
        out = {"family": self.family}
        if self.optimizer is not None:
            out["optimizer"] = self.optimizer
        if self.alpha_bar is not None:
            out["alpha_bar"] = self.alpha_bar
        if self.s is not None:
            out["s"] = self.s
        if self.moment_consistent:
            out["moment_consistent"] = True
        return out


def _default_depth_bins() -> Tuple[Tuple[float, float], ...]:
    return tuple((3.0 * i, 3.0 * (i + 1)) for i in range(10))


def _default_solvers() -> Tuple[SolverSetting, ...]:
    return (
        SolverSetting("wg"),
        SolverSetting("wcl", optimizer="em"),
        SolverSetting("wcgl", optimizer="em"),
        SolverSetting("cg-ga", optimizer="em"),
        SolverSetting("cg-ga", optimizer="ias"),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete, serializable description of one experiment."""

    master_seed: int = 20260825
    radius_mm: float = 100.0
    shell_mm: Tuple[float, float] = (55.0, 85.0)
    conductivity_s_per_m: float = 0.33
    n_electrodes: int = 64
    montage_polar_deg: float = 110.0
    source_cap_deg: float = 15.0
    d: int = 1
    n_sources_per_depth: int = 30
    depth_bins_mm: Tuple[Tuple[float, float], ...] = field(default_factory=_default_depth_bins)
    grid_jitter_max_mm: float = 3.0
    source_amplitude: float = 1.0
    noise_percents: Tuple[float, ...] = (0.01, 0.1)
    snr_mode: str = "data"
    q: int = 1
    mass_mode: str = "amplitude"
    solvers: Tuple[SolverSetting, ...] = field(default_factory=_default_solvers)
    solver_options: Tuple[Tuple[str, float], ...] = (("max_outer_iters", 2000),)

    def __post_init__(self):
        object.__setattr__(
            self, "shell_mm", (float(self.shell_mm[0]), float(self.shell_mm[1]))
        )
        object.__setattr__(
            self,
            "depth_bins_mm",
            tuple((float(lo), float(hi)) for lo, hi in self.depth_bins_mm),
        )
        object.__setattr__(
            self, "noise_percents", tuple(float(p) for p in self.noise_percents)
        )
        object.__setattr__(self, "solvers", tuple(self.solvers))
        object.__setattr__(
            self, "solver_options", tuple((str(k), v) for k, v in self.solver_options)
        )
        if not self.solvers:
            raise ConfigError("config.solvers: need at least one solver")
        if not self.noise_percents:
            raise ConfigError("config.noise_percents: need at least one noise level")
        if any(p < 0 for p in self.noise_percents):
            raise ConfigError("config.noise_percents: noise levels must be >= 0")
        if self.d not in (1, 2, 3):
            raise ConfigError("config.d: dipole dimension must be 1, 2 or 3")
        if self.n_sources_per_depth < 1:
            raise ConfigError("config.n_sources_per_depth: need at least one trial per depth")
        if self.source_amplitude <= 0:
            raise ConfigError("config.source_amplitude: must be positive")
        if not 0.0 < self.montage_polar_deg <= 180.0:
            raise ConfigError("config.montage_polar_deg: must lie in (0, 180]")
        if not 0.0 < self.source_cap_deg <= 180.0:
            raise ConfigError("config.source_cap_deg: must lie in (0, 180]")
        if self.snr_mode not in ("data", "model"):
            raise ConfigError("config.snr_mode: must be 'data' or 'model'")
        if self.mass_mode not in ("amplitude", "squared"):
            raise ConfigError("config.mass_mode: must be 'amplitude' or 'squared'")
        if self.q < 1:
            raise ConfigError("config.q: must be >= 1")
        labels = [s.label() for s in self.solvers]
        if len(set(labels)) != len(labels):
            raise ConfigError("config.solvers: duplicate solver labels " + repr(labels))

    # -- serialization ----------------------------------------------------

    def to_mapping(self) -> dict:
        out = dataclasses.asdict(self)
        out["solvers"] = [s.to_mapping() for s in self.solvers]
        out["shell_mm"] = list(self.shell_mm)
        out["depth_bins_mm"] = [list(b) for b in self.depth_bins_mm]
        out["noise_percents"] = list(self.noise_percents)
        out["solver_options"] = {k: v for k, v in self.solver_options}
        return out

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        if not isinstance(mapping, dict):
            raise ConfigError("config: expected a JSON object at the top level")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError(f"config: unknown keys {sorted(unknown)}")
        kwargs = dict(mapping)
        if "solvers" in kwargs:
            if not isinstance(kwargs["solvers"], list):
                raise ConfigError("config.solvers: expected a list of objects")
            parsed = []
            for i, entry in enumerate(kwargs["solvers"]):
                if not isinstance(entry, dict):
                    raise ConfigError(f"config.solvers[{i}]: expected an object")
                try:
                    parsed.append(SolverSetting(**entry))
                except TypeError as exc:
                    raise ConfigError(f"config.solvers[{i}]: {exc}") from exc
                except ValueError as exc:
                    raise ConfigError(f"config.solvers[{i}]: {exc}") from exc
            kwargs["solvers"] = tuple(parsed)
        if "solver_options" in kwargs:
            opts = kwargs["solver_options"]
            if not isinstance(opts, dict):
                raise ConfigError("config.solver_options: expected an object")
            valid = {f.name for f in dataclasses.fields(SolverConfig)}
            for key in opts:
                if key not in valid:
                    raise ConfigError(f"config.solver_options.{key}: unknown solver option")
            kwargs["solver_options"] = tuple(sorted(opts.items()))
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"config: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from exc
        try:
            mapping = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
        return cls.from_mapping(mapping)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_mapping(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**dict(self.solver_options))

    @property
    def n_trials(self) -> int:
        return self.n_sources_per_depth * len(self.depth_bins_mm)


def _fmt(value) -> str:
    if isinstance(value, float):
        # plain-float repr; np.float64 is a float subclass with a noisy repr
        return repr(float(value))
    return str(value)


def _draw_moment(config: ExperimentConfig, moment_seed: int) -> np.ndarray:
    """Dipole coefficients in the local orientation frame.

    For d = 1 (radial sources) the moment is simply the amplitude; for
    d > 1 a uniformly random orientation of fixed amplitude is drawn from
    the trial's own seed stream.
    """
    if config.d == 1:
        return np.array([config.source_amplitude])
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(moment_seed)))
    v = rng.standard_normal(config.d)
    norm = np.linalg.norm(v)
    while norm < 1e-12:  # pragma: no cover - essentially impossible
        v = rng.standard_normal(config.d)
        norm = np.linalg.norm(v)
    return config.source_amplitude * v / norm


def _trial_seeds(config: ExperimentConfig, noise_idx: int, trial_idx: int) -> Tuple[int, int]:
    ss = np.random.SeedSequence(
        entropy=config.master_seed, spawn_key=(noise_idx, trial_idx)
    )
    noise_seed, moment_seed = (int(v) for v in ss.generate_state(2))
    return noise_seed, moment_seed


def _run_trial(
    config: ExperimentConfig,
    lf_sim,
    lf_rec,
    sim_space,
    recon_space,
    rec_norms_sq: np.ndarray,
    noise_idx: int,
    trial_idx: int,
    solver_cfg: SolverConfig,
    cfg_hash: str,
):
    """All solver rows of one (noise level, trial) cell, fully formatted."""
    p = config.noise_percents[noise_idx]
    noise_seed, moment_seed = _trial_seeds(config, noise_idx, trial_idx)
    moment = _draw_moment(config, moment_seed)
    meas, _truth = simulate_measurement(
        lf_sim, trial_idx, moment, p, noise_seed, sim_space
    )
    true_pos = sim_space.positions[trial_idx]
    depth_true = float(sim_space.depths[trial_idx])
    if config.snr_mode == "model" and p > 0:
        snr = 1.0 + 1.0 / p**2
    else:
        snr = snr_from_data(meas)
    ctx = SnrContext(
        snr=snr,
        gamma_trace=float(np.trace(meas.noise.covariance)),
        block_norms_sq=rec_norms_sq,
        q=config.q,
    )
    result_rows, timing_rows = [], []
    for setting in config.solvers:
        label = setting.label()
        t0 = time.perf_counter()
        try:
            spec = PriorSpec.from_snr(
                PriorFamily(setting.family),
                ctx,
                config.d,
                optimizer=setting.optimizer,
                alpha_bar=setting.alpha_bar,
                s=setting.s,
                moment_consistent=setting.moment_consistent,
            )
            est, trace = solve(spec, lf_rec, meas.values, meas.noise, solver_cfg)
            dist = MassDistribution.from_estimate(est, recon_space, config.mass_mode)
            emd_mm = emd_single_truth(dist, true_pos)
            depth_recon = depth_of_max(est, recon_space)
            status, iterations = trace.status, trace.iterations
        except (BesiError, np.linalg.LinAlgError) as exc:
            emd_mm, depth_recon = float("nan"), float("nan")
            status, iterations = f"failed:{type(exc).__name__}", 0
        runtime = time.perf_counter() - t0
        result_rows.append(
            [
                str(trial_idx),
                label,
                _fmt(p),
                str(trial_idx),
                _fmt(depth_true),
                _fmt(float(depth_recon)),
                _fmt(float(emd_mm)),
                str(iterations),
                status,
                str(noise_seed),
                cfg_hash,
                __version__,
            ]
        )
        timing_rows.append([str(trial_idx), label, _fmt(p), f"{runtime:.6f}"])
    return result_rows, timing_rows


# ---------------------------------------------------------------------------
# per-trial scratch files (resume support)


def _trial_cache_path(out_dir: Path, noise_idx: int, trial_idx: int) -> Path:
    return out_dir / "trials" / f"n{noise_idx:02d}_t{trial_idx:05d}.csv"


def _write_trial_cache(path: Path, result_rows, timing_rows) -> None:
    tmp = path.with_suffix(".tmp")
    with tmp.open("w", newline="") as fh:
        fh.write("# results\n")
        writer = csv.writer(fh)
        writer.writerows(result_rows)
        fh.write("# timings\n")
        writer.writerows(timing_rows)
    os.replace(tmp, path)


def _read_trial_cache(path: Path):
    result_rows, timing_rows = [], []
    target = None
    with path.open(newline="") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if line == "# results":
                target = result_rows
                continue
            if line == "# timings":
                target = timing_rows
                continue
            if not line or target is None:
                continue
            target.append(next(csv.reader([line])))
    return result_rows, timing_rows


def _cache_valid(result_rows, config: ExperimentConfig, cfg_hash: str) -> bool:
    if len(result_rows) != len(config.solvers):
        return False
    return all(len(r) == len(RESULT_COLUMNS) and r[10] == cfg_hash for r in result_rows)


# ---------------------------------------------------------------------------
# driver


def _resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        threads = int(os.environ.get("BESI_THREADS", "1"))
    if threads < 1:
        raise ConfigError("thread count must be >= 1")
    return threads


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    tmp = path.with_suffix(".tmp")
    with tmp.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def run_experiment(
    config: ExperimentConfig, out_dir, threads: Optional[int] = None
) -> List[Dict]:
    """Execute the full sweep and write all artifacts under ``out_dir``.

    Trials already present in ``out_dir/trials`` (from an interrupted run
    with the same configuration) are reused instead of recomputed. The
    returned list contains one parsed record per results row, in the same
    canonical order as the CSV.
    """
    out_dir = Path(out_dir)
    (out_dir / "trials").mkdir(parents=True, exist_ok=True)
    cfg_hash = config.config_hash()
    solver_cfg = config.solver_config()
    (out_dir / "config.json").write_text(
        json.dumps(config.to_mapping(), indent=2, sort_keys=True) + "\n"
    )

    model = SphereHeadModel.with_fibonacci_electrodes(
        config.n_electrodes,
        radius_mm=config.radius_mm,
        shell_mm=config.shell_mm,
        conductivity_s_per_m=config.conductivity_s_per_m,
        polar_max_deg=config.montage_polar_deg,
    )
    sim_cfg = SimulationConfig(
        n_sources_per_depth=config.n_sources_per_depth,
        depth_bins_mm=config.depth_bins_mm,
        noise_percent=0.0,
        rng_seed=config.master_seed,
        grid_jitter_max_mm=config.grid_jitter_max_mm,
        source_cap_deg=config.source_cap_deg,
    )
    sim_space, recon_space, _nearest = make_dual_grids(model, sim_cfg, d=config.d)
    lf_sim = build_sphere_leadfield(model, sim_space)
    lf_rec = build_sphere_leadfield(model, recon_space)
    rec_norms_sq = lf_rec.block_norms() ** 2

    tasks = [
        (noise_idx, trial_idx)
        for noise_idx in range(len(config.noise_percents))
        for trial_idx in range(config.n_trials)
    ]

    def compute(task):
        noise_idx, trial_idx = task
        cache = _trial_cache_path(out_dir, noise_idx, trial_idx)
        if cache.exists():
            result_rows, timing_rows = _read_trial_cache(cache)
            if _cache_valid(result_rows, config, cfg_hash):
                return
        result_rows, timing_rows = _run_trial(
            config, lf_sim, lf_rec, sim_space, recon_space, rec_norms_sq,
            noise_idx, trial_idx, solver_cfg, cfg_hash,
        )
        _write_trial_cache(cache, result_rows, timing_rows)

    n_threads = _resolve_threads(threads)
    if n_threads == 1:
        for task in tasks:
            compute(task)
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            # surface the first worker exception instead of discarding it
            list(pool.map(compute, tasks))

    all_results, all_timings = [], []
    for noise_idx, trial_idx in tasks:
        result_rows, timing_rows = _read_trial_cache(
            _trial_cache_path(out_dir, noise_idx, trial_idx)
        )
        all_results.extend(result_rows)
        all_timings.extend(timing_rows)

    def result_key(row):
        return (float(row[2]), int(row[0]), row[1])

    all_results.sort(key=result_key)
    all_timings.sort(key=lambda row: (float(row[2]), int(row[0]), row[1]))
    _write_csv(out_dir / "results.csv", RESULT_COLUMNS, all_results)
    _write_csv(out_dir / "timings.csv", TIMING_COLUMNS, all_timings)

    truth_rows = []
    for noise_idx, p in enumerate(config.noise_percents):
        for trial_idx in range(config.n_trials):
            noise_seed, moment_seed = _trial_seeds(config, noise_idx, trial_idx)
            moment = _draw_moment(config, moment_seed)
            truth_rows.append(
                [
                    str(trial_idx),
                    str(trial_idx),
                    _fmt(float(sim_space.depths[trial_idx])),
                    ";".join(repr(float(v)) for v in moment),
                    _fmt(p),
                    str(noise_seed),
                ]
            )
    truth_rows.sort(key=lambda row: (float(row[4]), int(row[0])))
    _write_csv(out_dir / "ground_truth.csv", GROUND_TRUTH_COLUMNS, truth_rows)

    records = [dict(zip(RESULT_COLUMNS, row)) for row in all_results]
    records = [_parse_record(r) for r in records]

    from .report import build_summary  # local import to avoid a cycle

    summary = build_summary(records)
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    return records


def _parse_record(row: Dict[str, str]) -> Dict:
    out = dict(row)
    out["trial_id"] = int(row["trial_id"])
    out["source_index"] = int(row["source_index"])
    out["noise_percent"] = float(row["noise_percent"])
    out["depth_true_mm"] = float(row["depth_true_mm"])
    out["depth_recon_mm"] = float(row["depth_recon_mm"])
    out["emd_mm"] = float(row["emd_mm"])
    out["iterations"] = int(row["iterations"])
    out["seed"] = int(row["seed"])
    return out


def load_results(path) -> List[Dict]:
    """Parse a ``results.csv`` back into typed records."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != RESULT_COLUMNS:
            raise ConfigError(f"{path} does not look like a results file")
        return [_parse_record(row) for row in reader]
