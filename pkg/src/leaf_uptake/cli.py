"""Command-line entry point: ``leaf-uptake <subcommand>``."""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd
import yaml

from leaf_uptake.config_schema import Config, bundled_config_path, load_config
from leaf_uptake.data_io import band_at, bundled_path, BUNDLED_DATASET, load_dataset, write_report, write_table
from leaf_uptake.empirical import McGowanRelation, empirical_table, with_literature_partitions
from leaf_uptake.errors import SolverError
from leaf_uptake.estimation import estimate_all
from leaf_uptake.model import COMPARTMENTS, Compartment, Compound
from leaf_uptake.solver import simulate
from leaf_uptake.steady_state import SweepVariable, steady_state, steady_state_sweep
from leaf_uptake.sweep import default_jobs, parse_grid, run_sweep, summarize_region

logger = logging.getLogger(__name__)

STEADY_STATE_COLUMNS = ["compound", "c_drop", "m_uniform", "c_leaf", "pct_droplet", "pct_cuticle", "pct_leaf"]


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """Reports usage problems to main() instead of exiting with status 2."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _banner(title: str) -> None:
    print("\n" + "=" * 60)
    print(title)
    print("=" * 60)


def _saved(path: Path) -> None:
    print(f"✓ Saved: {path}")


def _load(args) -> Config:
    path = args.config or bundled_config_path()
    print(f"Loading configuration: {path}")
    return load_config(path)


def _out_dir(args, config: Optional[Config] = None) -> Path:
    if args.out:
        return Path(args.out)
    return config.out_dir if config is not None else Path("runs")


def _parse_values(text: str) -> List[float]:
    """A start:stop:step grid or a comma-separated list."""
    if ":" in text:
        return [float(v) for v in parse_grid(text)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"grid values must be numbers, got {text!r}") from None


def _with_solver_overrides(config: Config, args) -> Config:
    updates = {}
    if args.t_end is not None:
        updates["t_end"] = args.t_end
    if args.n_cells is not None:
        updates["n_cells"] = args.n_cells
    if not updates:
        return config
    solver = config.solver.model_validate({**config.solver.model_dump(), **updates})
    return config.model_copy(update={"solver": solver})


def cmd_steady(args) -> int:
    config = _load(args)
    geom, aj, ai, _ = config.build()
    if aj.loss or ai.loss:
        logger.info("Setting transfer rates to zero for the conservative steady state")
    aj = aj.model_copy(update={"loss": 0.0})
    ai = ai.model_copy(update={"loss": 0.0})
    out_dir = _out_dir(args, config)

    rows = []
    for compound, params in ((Compound.AJ, aj), (Compound.AI, ai)):
        ss = steady_state(geom, params)
        rows.append((compound.value, ss.c_drop, ss.m_uniform, ss.c_leaf, ss.pct_drop, ss.pct_cuticle, ss.pct_leaf))
    table = pd.DataFrame(rows, columns=STEADY_STATE_COLUMNS)

    _banner("Steady state (no transfer to the rest of the plant)")
    print(table.to_string(index=False))
    _saved(write_table(table, out_dir, "steady_state.csv"))

    if args.vary:
        if not args.grid:
            raise ValueError("--vary requires --grid")
        params = aj if args.compound == Compound.AJ.value else ai
        sweep = steady_state_sweep(geom, params, SweepVariable(args.vary), _parse_values(args.grid))
        print(f"\n{args.compound} steady state versus {args.vary}:")
        print(sweep.to_string(index=False))
        _saved(write_table(sweep, out_dir, "steady_state_sweep.csv"))
    return 0


def cmd_simulate(args) -> int:
    config = _with_solver_overrides(_load(args), args)
    adjuvant = config.adjuvant
    active = config.active_ingredient
    if args.diffusion is not None:
        adjuvant = adjuvant.model_copy(update={"D_P": args.diffusion})
        active = active.model_copy(update={"D_Q0": args.diffusion})
    if args.alpha is not None:
        active = active.model_copy(update={"alpha": args.alpha})
    if args.sigma is not None:
        active = active.model_copy(update={"sigma": args.sigma})
    config = config.model_copy(update={"adjuvant": adjuvant, "active_ingredient": active})
    config = Config.model_validate(config.model_dump())

    geom, aj, ai, d_model = config.build()
    if args.literature_partitions:
        if adjuvant.log_pow is None or active.log_pow is None:
            raise ValueError("--literature-partitions needs log_pow for both compounds in the configuration")
        aj = with_literature_partitions(aj, adjuvant.log_pow)
        ai = with_literature_partitions(ai, active.log_pow)
        logger.info("Partition coefficients from log Pow: AJ k_in=%.4g AI k_in=%.4g", aj.k_in, ai.k_in)

    out_dir = _out_dir(args, config)
    print(f"Simulating to t={config.solver.t_end:g} min on {config.solver.n_cells} cuticle elements...")
    trajectory = simulate(geom, aj, ai, d_model, config.solver)

    _banner("Final compartment split (% of applied amount)")
    for compound in Compound:
        pct = trajectory.final_percentages(compound)
        split = ", ".join(f"{c.short} {p:.2f}" for c, p in zip(COMPARTMENTS, pct))
        print(f"  {compound.value}: {split}")
    print(f"  {trajectory.n_steps} steps, dt <= {trajectory.dt:.4g} min")

    _saved(write_table(trajectory.to_frame(), out_dir, "trajectory.csv"))
    _saved(write_table(trajectory.profiles_frame(), out_dir, "profiles.csv"))
    return 0


def _dataset(args):
    path = args.data or bundled_path(BUNDLED_DATASET)
    print(f"Loading dataset: {path}")
    dataset = load_dataset(path)
    for v in dataset.closure_violations:
        print(f"  ⚠️  {v.compound.value} at t={v.t:g}: compartments sum to {v.total:.2f}%")
    return dataset


def cmd_estimate(args) -> int:
    config = _load(args)
    dataset = _dataset(args)
    est = config.estimation
    estimates = estimate_all(
        dataset,
        config.geometry.to_geometry(),
        (est.t_lag_min, est.t_lag_max),
        decay_time=est.decay_time,
        balance_time=est.balance_time,
        balance_rates={Compound.AJ: est.balance_rate_AJ, Compound.AI: est.balance_rate_AI},
        equilibrium_points=est.equilibrium_points,
    )
    report = estimates.to_frame()

    _banner("Parameter estimates")
    print(report.to_string(index=False))
    _saved(write_table(report, _out_dir(args, config), "parameter_report.csv"))
    return 0


def cmd_sweep(args) -> int:
    config = _with_solver_overrides(_load(args), args)
    dataset = _dataset(args)
    geom, aj, ai, _ = config.build()
    settings = config.sweep

    alphas = parse_grid(args.alpha or settings.alpha)
    sigmas = parse_grid(args.sigma or settings.sigma)
    selected = [Compartment.parse(t) for t in (args.bands.split(",") if args.bands else settings.bands)]
    band_time = next(t for t in (args.band_time, settings.band_time, config.solver.t_end) if t is not None)
    jobs = args.jobs or settings.jobs or default_jobs()

    bands = {c: band_at(dataset, Compound.AI, c, band_time) for c in selected}
    for c in COMPARTMENTS:
        if c not in bands and dataset.get(Compound.AI, c, band_time) is not None:
            bands[c] = band_at(dataset, Compound.AI, c, band_time)

    print(f"Sweeping {alphas.size} alpha x {sigmas.size} sigma values with {jobs} job(s)...")
    result = run_sweep(
        geom, aj, ai, config.active_ingredient.D_Q0, alphas, sigmas, bands, config.solver,
        selected=selected, jobs=jobs,
    )
    report = summarize_region(result)

    out_dir = _out_dir(args, config)
    _banner("Feasible (alpha, sigma) region")
    print(report.describe())
    _saved(write_table(result.to_frame(), out_dir, "sweep.csv"))
    _saved(write_report(report.to_dict(), out_dir, "region_report.json"))
    return 0


def cmd_empirical(args) -> int:
    if args.logpow is None and args.mcgowan is None:
        raise ValueError("give --logpow and/or --mcgowan")
    relations = tuple(McGowanRelation(r) for r in args.relation) if args.relation else tuple(McGowanRelation)
    table = empirical_table(args.logpow, args.mcgowan, relations)

    _banner("Empirical coefficients")
    print(table.to_string(index=False))
    _saved(write_table(table, _out_dir(args), "empirical.csv"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="leaf-uptake", description="Droplet / cuticle / leaf uptake model")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)

    def common(p, data: bool = False):
        p.add_argument("--config", help="YAML configuration (default: bundled parameter means)")
        p.add_argument("--out", help="Output directory (default: config out_dir)")
        if data:
            p.add_argument("--data", help="Dataset CSV (default: bundled reconstructed dataset)")

    def solver_overrides(p):
        p.add_argument("--t-end", type=float, help="Override final time (min)")
        p.add_argument("--n-cells", type=int, help="Override number of cuticle elements")

    p = sub.add_parser("steady", help="Closed-form steady state")
    common(p)
    p.add_argument("--vary", choices=[v.value for v in SweepVariable], help="Parameter to vary")
    p.add_argument("--grid", help="Values as start:stop:step or a comma list")
    p.add_argument("--compound", choices=[c.value for c in Compound], default=Compound.AI.value)
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("simulate", help="Time-dependent simulation of both compounds")
    common(p)
    solver_overrides(p)
    p.add_argument("--diffusion", type=float, help="Use this coefficient for both D_P and D_Q0")
    p.add_argument("--alpha", type=float, help="Override AI enhancement alpha")
    p.add_argument("--sigma", type=float, help="Override AI half-saturation sigma")
    p.add_argument("--literature-partitions", action="store_true",
                   help="Replace partition coefficients by the log Pow correlations")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="Parameter estimates from a dataset")
    common(p, data=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="(alpha, sigma) feasibility sweep")
    common(p, data=True)
    solver_overrides(p)
    p.add_argument("--alpha", help="alpha grid start:stop:step")
    p.add_argument("--sigma", help="sigma grid start:stop:step")
    p.add_argument("--bands", help="Comma list of compartments to intersect, e.g. droplet,leaf,rest")
    p.add_argument("--band-time", type=float, help="Dataset time of the bands (default: t_end)")
    p.add_argument("--jobs", type=int, help="Worker processes (default: physical cores)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("empirical", help="Coefficients from log Pow and McGowan volume")
    p.add_argument("--logpow", type=float, help="log10 octanol/water partition coefficient")
    p.add_argument("--mcgowan", type=float, help="McGowan volume (cm^3/mol)")
    p.add_argument("--relation", action="append", choices=[r.value for r in McGowanRelation],
                   help="Diffusion correlation(s) to apply (default: all)")
    p.add_argument("--out", help="Output directory (default: runs)")
    p.set_defaults(func=cmd_empirical)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on usage, validation or data errors, 2 on solver failure
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        parser.print_usage(sys.stderr)
        print(e, file=sys.stderr)
        return 1

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1

    try:
        return args.func(args)
    except SolverError as e:
        print(f"Solver failure: {e}", file=sys.stderr)
        return 2
    except (ValueError, LookupError, FileNotFoundError, yaml.YAMLError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
