"""Command-line interface.

Subcommands cover the full pipeline: ``gen-leadfield`` (head model +
dual grids), ``weights`` (SNR-derived prior parameters), ``simulate``
(single-trial measurement), ``solve`` (single reconstruction),
``evaluate`` (metrics over solved estimates), ``experiment`` (the whole
sweep) and ``report`` (tables + figures from a results file).

Exit codes: 0 on success, 2 on configuration/usage errors, 3 on numerical
failure of a single solve/evaluate. The ``BESI_THREADS`` environment
variable sets the default worker count of ``experiment``.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .container import (
    estimate_from_csv,
    estimate_to_csv,
    lead_field_from_csv,
    load_binary,
    measurement_from_csv,
    save_binary,
    source_space_from_json,
    source_space_to_json,
)
from .evaluation import MassDistribution, depth_of_max, emd_single_truth
from .exceptions import (
    BesiError,
    ConfigError,
    DefiniteMatrixError,
    DegenerateDataError,
    NumericalError,
)
from .experiment import (
    GROUND_TRUTH_COLUMNS,
    RESULT_COLUMNS,
    ExperimentConfig,
    SolverSetting,
    load_results,
    run_experiment,
)
from .forward import (
    SimulationConfig,
    SphereHeadModel,
    build_sphere_leadfield,
    make_dual_grids,
    simulate_measurement,
)
from .model import LeadField, Measurement
from .report import write_report
from .solvers import SolverConfig, solve
from .weighting import (
    Optimizer,
    PriorFamily,
    PriorSpec,
    SnrContext,
    beta_cg,
    beta_wcl,
    beta_wcgl,
    snr_from_data,
    theta_from_snr,
    weights_gaussian,
    weights_group_laplace,
    weights_laplace,
)

_SOLVER_LABELS = (
    "wmne", "wl", "wgl",
    "cg-ga-ias", "cg-ga-em", "cg-ig-ias", "cg-ig-em",
    "wcl-ias", "wcl-em", "wcgl-ias", "wcgl-em",
)


def _parse_solver_label(label: str) -> SolverSetting:
    label = label.strip()
    if label in ("wmne", "wg"):
        return SolverSetting("wg")
    if label in ("wl", "wgl"):
        return SolverSetting(label)
    for suffix, opt in (("-ias", "ias"), ("-em", "em")):
        if label.endswith(suffix):
            base = label[: -len(suffix)]
            if base in ("cg-ga", "cg-ig", "wcl", "wcgl"):
                return SolverSetting(base, optimizer=opt)
    if label in ("cg-ga", "cg-ig", "wcl", "wcgl"):
        return SolverSetting(label)
    raise ConfigError(
        f"unknown solver label {label!r}; expected one of {', '.join(_SOLVER_LABELS)}"
    )


def _load_lead_field(path) -> LeadField:
    path = Path(path)
    obj = lead_field_from_csv(path) if path.suffix == ".csv" else load_binary(path)
    if not isinstance(obj, LeadField):
        raise ConfigError(f"{path} does not contain a lead field")
    return obj


def _load_measurement(path) -> Measurement:
    path = Path(path)
    obj = measurement_from_csv(path) if path.suffix == ".csv" else load_binary(path)
    if not isinstance(obj, Measurement):
        raise ConfigError(f"{path} does not contain a measurement")
    return obj


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_gen_leadfield(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = SphereHeadModel.with_fibonacci_electrodes(
        args.electrodes,
        radius_mm=args.radius,
        shell_mm=tuple(args.shell),
        conductivity_s_per_m=args.conductivity,
        polar_max_deg=args.montage_polar,
    )
    bins = tuple(
        (args.bin_width * i, args.bin_width * (i + 1)) for i in range(args.n_bins)
    )
    sim_cfg = SimulationConfig(
        n_sources_per_depth=args.sources_per_depth,
        depth_bins_mm=bins,
        noise_percent=0.0,
        rng_seed=args.seed,
        grid_jitter_max_mm=args.jitter,
        source_cap_deg=args.source_cap,
    )
    sim_space, recon_space, nearest = make_dual_grids(model, sim_cfg, d=args.d)
    lf_sim = build_sphere_leadfield(model, sim_space)
    lf_rec = build_sphere_leadfield(model, recon_space)
    save_binary(lf_sim, out / "leadfield_sim.besi")
    save_binary(lf_rec, out / "leadfield_recon.besi")
    source_space_to_json(sim_space, out / "source_space_sim.json")
    source_space_to_json(recon_space, out / "source_space_recon.json")
    with (out / "nearest.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sim_index", "recon_index"])
        writer.writerows([i, int(j)] for i, j in enumerate(nearest))
    print(
        f"wrote lead fields ({model.m} electrodes, {sim_space.n} sources, d={args.d})"
        f" to {out}"
    )
    return 0


def _cmd_weights(args) -> int:
    lf = _load_lead_field(args.leadfield)
    family = PriorFamily(args.family)
    ctx = SnrContext(
        snr=args.snr,
        gamma_trace=lf.m * args.sigma**2,
        block_norms_sq=lf.block_norms() ** 2,
        q=args.q,
    )
    theta = theta_from_snr(ctx)
    if family is PriorFamily.WG:
        col, values = "weight", weights_gaussian(ctx)
    elif family is PriorFamily.WL:
        col, values = "weight", weights_laplace(ctx)
    elif family is PriorFamily.WGL:
        col, values = "weight", weights_group_laplace(ctx, lf.d)
    elif family in (PriorFamily.WCG_GA, PriorFamily.WCG_IG, PriorFamily.WCG_GEN):
        s = {PriorFamily.WCG_GA: 1.0, PriorFamily.WCG_IG: -1.0}.get(family, args.s)
        if s is None:
            raise ConfigError("cg-gen weights need --s")
        alpha_bar = args.alpha_bar if args.alpha_bar is not None else (lf.d + 1) / 2.0
        col, values = "beta", beta_cg(ctx, alpha_bar, s, lf.d)
    elif family is PriorFamily.WCL:
        alpha_bar = args.alpha_bar if args.alpha_bar is not None else 2.5
        col, values = "beta", beta_wcl(ctx, alpha_bar)
    else:
        alpha_bar = args.alpha_bar if args.alpha_bar is not None else 2.5
        col, values = "beta", beta_wcgl(ctx, alpha_bar, lf.d)
    dest = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(dest)
        writer.writerow(["location", "theta", col])
        for k in range(lf.n):
            writer.writerow([k, repr(float(theta[k])), repr(float(values[k]))])
    finally:
        if args.out:
            dest.close()
    return 0


def _cmd_simulate(args) -> int:
    lf = _load_lead_field(args.leadfield)
    space = source_space_from_json(args.space)
    moment = np.asarray(args.moment, dtype=float)
    if moment.size == 1 and lf.d == 1:
        moment = moment.reshape(1)
    if moment.shape != (lf.d,):
        raise ConfigError(f"--moment needs {lf.d} component(s) for this lead field")
    meas, truth = simulate_measurement(
        lf, args.index, moment, args.noise, args.seed, space
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meas_path = out / f"measurement_t{args.trial_id:05d}.besi"
    save_binary(meas, meas_path)
    truth_path = out / "ground_truth.csv"
    new_file = not truth_path.exists()
    with truth_path.open("a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(GROUND_TRUTH_COLUMNS)
        writer.writerow(
            [
                args.trial_id,
                truth.source_index,
                repr(float(truth.depth_mm)),
                ";".join(repr(float(v)) for v in truth.moment),
                repr(float(truth.noise_percent)),
                truth.seed,
            ]
        )
    print(f"wrote {meas_path} (sigma={truth.sigma:.3e}) and appended {truth_path}")
    return 0


def _cmd_solve(args) -> int:
    lf = _load_lead_field(args.leadfield)
    meas = _load_measurement(args.measurement)
    snr = snr_from_data(meas) if args.snr is None else args.snr
    ctx = SnrContext(
        snr=snr,
        gamma_trace=float(np.trace(meas.noise.covariance)),
        block_norms_sq=lf.block_norms() ** 2,
        q=args.q,
    )
    spec = PriorSpec.from_snr(
        PriorFamily(args.family),
        ctx,
        lf.d,
        optimizer=Optimizer(args.optimizer) if args.optimizer else None,
        alpha_bar=args.alpha_bar,
        s=args.s,
    )
    cfg = SolverConfig(max_outer_iters=args.max_outer, max_inner_iters=args.max_inner)
    est, trace = solve(spec, lf, meas.values, meas.noise, cfg)
    metadata = {
        "trial_id": args.trial_id,
        "solver": trace.solver_id,
        "noise_percent": repr(float(args.noise_percent)),
        "iterations": trace.iterations,
        "status": trace.status,
        "seed": args.seed if args.seed is not None else 0,
    }
    estimate_to_csv(est, args.out, metadata)
    residual = float(np.linalg.norm(meas.values - lf.entries @ est.coefficients))
    print(
        f"solver={trace.solver_id} status={trace.status} "
        f"iterations={trace.iterations} residual={residual:.6e} -> {args.out}"
    )
    return 0


def _read_truth_table(path):
    table = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != GROUND_TRUTH_COLUMNS:
            raise ConfigError(f"{path} is not a ground-truth CSV")
        for row in reader:
            key = (int(row["trial_id"]), float(row["noise_percent"]))
            table[key] = row
    return table


def _cmd_evaluate(args) -> int:
    truth = _read_truth_table(args.truth)
    sim_space = source_space_from_json(args.sim_space)
    recon_space = source_space_from_json(args.recon_space)
    paths = []
    for entry in args.estimates:
        p = Path(entry)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.csv")))
        else:
            paths.append(p)
    if not paths:
        raise ConfigError("no estimate files given")
    rows = []
    for path in paths:
        est, meta = estimate_from_csv(path)
        try:
            trial_id = int(meta["trial_id"])
            solver = meta["solver"]
            noise_percent = float(meta["noise_percent"])
        except KeyError as exc:
            raise ConfigError(f"{path}: estimate metadata missing {exc}") from exc
        key = (trial_id, noise_percent)
        if key not in truth:
            raise ConfigError(f"{path}: no ground-truth row for trial {key}")
        t = truth[key]
        source_index = int(t["source_index"])
        dist = MassDistribution.from_estimate(est, recon_space, args.mass_mode)
        emd_mm = emd_single_truth(dist, sim_space.positions[source_index])
        rows.append(
            [
                str(trial_id),
                solver,
                repr(noise_percent),
                str(source_index),
                t["depth_mm"],
                repr(depth_of_max(est, recon_space)),
                repr(emd_mm),
                meta.get("iterations", "0"),
                meta.get("status", "unknown"),
                meta.get("seed", t["seed"]),
                "-",
                __version__,
            ]
        )
    rows.sort(key=lambda r: (float(r[2]), int(r[0]), r[1]))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results_path = out / "results.csv"
    with results_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        writer.writerows(rows)
    records = load_results(results_path)
    from .report import build_summary

    (out / "summary.json").write_text(
        json.dumps(build_summary(records), indent=2, sort_keys=True) + "\n"
    )
    print(f"evaluated {len(rows)} estimate(s) -> {results_path}")
    return 0


def _cmd_experiment(args) -> int:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
    else:
        config = ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.solvers:
        overrides["solvers"] = tuple(
            _parse_solver_label(tok) for tok in args.solvers.split(",") if tok.strip()
        )
    if args.noise:
        overrides["noise_percents"] = tuple(
            float(tok) for tok in args.noise.split(",") if tok.strip()
        )
    if overrides:
        config = dataclasses.replace(config, **overrides)
    records = run_experiment(config, args.out_dir, threads=args.threads)
    write_report(records, args.out_dir, figures=not args.no_figures)
    n_failed = sum(1 for r in records if str(r["status"]).startswith("failed"))
    print(
        f"experiment complete: {len(records)} rows "
        f"({n_failed} failed) -> {args.out_dir}"
    )
    return 0


def _cmd_report(args) -> int:
    records = load_results(args.results)
    out_dir = args.out_dir if args.out_dir else Path(args.results).parent
    paths = write_report(
        records, out_dir, bin_width_mm=args.bin_width, figures=not args.no_figures
    )
    print(f"wrote {len(paths)} report artifact(s) to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="besi",
        description="Depth-weighted Bayesian source imaging on linear inverse problems.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-leadfield", help="build sphere lead fields on dual jittered grids")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--electrodes", type=int, default=64)
    p.add_argument("--radius", type=float, default=100.0, help="sphere radius [mm]")
    p.add_argument("--shell", type=float, nargs=2, default=[55.0, 85.0],
                   metavar=("RMIN", "RMAX"), help="source shell radii [mm]")
    p.add_argument("--conductivity", type=float, default=0.33, help="[S/m]")
    p.add_argument("--d", type=int, default=1, choices=(1, 2, 3),
                   help="dipole components per source")
    p.add_argument("--sources-per-depth", type=int, default=30)
    p.add_argument("--n-bins", type=int, default=10)
    p.add_argument("--bin-width", type=float, default=3.0, help="[mm]")
    p.add_argument("--jitter", type=float, default=3.0, help="max grid jitter [mm]")
    p.add_argument("--montage-polar", type=float, default=110.0,
                   help="electrode coverage: max polar angle from +z [deg]")
    p.add_argument("--source-cap", type=float, default=15.0,
                   help="source region half-angle about +z [deg]; 180 = full shell")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_leadfield)

    p = sub.add_parser("weights", help="SNR-derived prior parameters per location")
    p.add_argument("--leadfield", required=True)
    p.add_argument("--family", required=True, choices=[f.value for f in PriorFamily])
    p.add_argument("--snr", type=float, required=True, help="target SNR (> 1)")
    p.add_argument("--sigma", type=float, required=True, help="noise std per channel")
    p.add_argument("--q", type=int, default=1, help="expected active sources")
    p.add_argument("--alpha-bar", type=float, default=None)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.set_defaults(func=_cmd_weights)

    p = sub.add_parser("simulate", help="simulate one single-dipole measurement")
    p.add_argument("--leadfield", required=True)
    p.add_argument("--space", required=True, help="source-space JSON of the lead field")
    p.add_argument("--index", type=int, required=True, help="true source index")
    p.add_argument("--moment", type=float, nargs="+", default=[1.0],
                   help="dipole coefficients in the local frame")
    p.add_argument("--noise", type=float, default=0.01, help="noise fraction of signal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trial-id", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("solve", help="reconstruct one measurement")
    p.add_argument("--leadfield", required=True)
    p.add_argument("--measurement", required=True)
    p.add_argument("--family", required=True, choices=[f.value for f in PriorFamily])
    p.add_argument("--optimizer", default=None, choices=("ias", "em"))
    p.add_argument("--alpha-bar", type=float, default=None)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--snr", type=float, default=None,
                   help="override the data-driven SNR estimate")
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--max-outer", type=int, default=200)
    p.add_argument("--max-inner", type=int, default=200)
    p.add_argument("--trial-id", type=int, default=0)
    p.add_argument("--noise-percent", type=float, default=0.0,
                   help="bookkeeping value stored in the estimate metadata")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="estimate CSV path")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("evaluate", help="score estimates against ground truth")
    p.add_argument("--estimates", nargs="+", required=True,
                   help="estimate CSV files or directories of them")
    p.add_argument("--truth", required=True, help="ground-truth CSV")
    p.add_argument("--sim-space", required=True)
    p.add_argument("--recon-space", required=True)
    p.add_argument("--mass-mode", default="amplitude", choices=("amplitude", "squared"))
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("experiment", help="run the full simulate/solve/evaluate sweep")
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--solvers", default=None,
                   help="comma-separated solver labels, e.g. wmne,wcl-em,cg-ga-ias")
    p.add_argument("--noise", default=None, help="comma-separated noise fractions")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: BESI_THREADS or 1)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("report", help="tables and figures from a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--bin-width", type=float, default=3.0)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, DegenerateDataError, DefiniteMatrixError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except BesiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
