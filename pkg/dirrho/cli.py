"""
Command-line front end: ``dirrho estimate | exact | simulate | sample``.

Exit status: 0 success, 2 usage error, 3 data validation error, 4 numerical failure.
"""

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np
import pandas as pd
from rich.console import Console
from rich.logging import RichHandler

from dirrho import __version__
from dirrho.config import load_settings, get_preset, resolve_seed
from dirrho.copulas import from_spec
from dirrho.core import Direction, TiePolicy, all_directions, compute_ranks
from dirrho.dataio import FORMATS, OutputSpec, ingest_csv, write_samples_csv, write_table
from dirrho.errors import ConfigError, DataValidationError, DirRhoError, DomainError, IntegrationError
from dirrho.estimators import estimate_all_directions, rho_hat_star3
from dirrho.exact import decomposition_terms, directional_rho
from dirrho.integrate import IntegratorConfig
from dirrho.simulation import RHO_STAR, ReplicationPlan, convergence_diagnostic, run_plan

logger = logging.getLogger("dirrho")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _add_output_arguments(parser):
    parser.add_argument("--format", choices=FORMATS, default=None,
                        help="Output format (default: from settings, table)")
    parser.add_argument("--output", "-o", default=None,
                        help="Write to this file instead of standard output")
    parser.add_argument("--precision", type=int, default=None,
                        help="Decimals printed in csv/table output (default: 4)")


def _add_direction_arguments(parser):
    parser.add_argument("--direction", "-a", action="append", default=None,
                        help="Direction as (-1,1,1) or -++; repeat for several (default: all)")
    parser.add_argument("--all", action="store_true",
                        help="Use all 2^d directions")


def parse_args(argv=None):
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        prog="dirrho",
        description="Multivariate directional rho-coefficients: exact values, rank estimators and simulations",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--settings", default=None,
                        help="JSON settings file merged over the packaged defaults")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Only log warnings and errors")
    commands = parser.add_subparsers(dest="command", required=True)

    estimate = commands.add_parser("estimate", help="Estimate directional coefficients from a CSV file")
    estimate.add_argument("path", help="Delimited UTF-8 file with one observation per row")
    estimate.add_argument("--no-header", action="store_true", help="The file has no header line")
    estimate.add_argument("--delimiter", default=",", help="Field separator (default: ,)")
    estimate.add_argument("--columns", default=None,
                          help="Comma-separated column names or 0-based positions to use")
    estimate.add_argument("--ties", choices=[p.value for p in TiePolicy], default=TiePolicy.STABLE.value,
                          help="Tie-breaking policy (default: stable)")
    estimate.add_argument("--seed", type=int, default=None, help="Seed for random tie-breaking")
    estimate.add_argument("--allow-large", action="store_true",
                          help="Enumerate all directions above the dimension guard")
    _add_direction_arguments(estimate)
    _add_output_arguments(estimate)

    exact = commands.add_parser("exact", help="Population coefficients of a copula family")
    exact.add_argument("family", help="Family spec, e.g. clayton:theta=1:d=3 or fgm:lambda=0.6:d=4")
    exact.add_argument("--method", choices=["gauss_legendre_tensor", "monte_carlo"], default=None,
                       help="Integration method (default: from settings)")
    exact.add_argument("--route", choices=["auto", "closed_form", "decomposition", "definition"],
                       default="auto", help="Evaluation route (default: auto)")
    exact.add_argument("--nodes", type=int, default=None, help="Gauss-Legendre nodes per dimension")
    exact.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count")
    exact.add_argument("--seed", type=int, default=None, help="Monte Carlo seed")
    exact.add_argument("--strict", action="store_true",
                       help="Fail when Monte Carlo misses its standard error target")
    exact.add_argument("--explain", action="store_true",
                       help="Print the margin decomposition coefficients instead of values")
    _add_direction_arguments(exact)
    _add_output_arguments(exact)

    simulate = commands.add_parser("simulate", help="Replicate the rank estimators on copula samples")
    simulate.add_argument("--preset", default=None, help="Plan preset from the settings file, e.g. table1")
    simulate.add_argument("--family", default=None, help="Copula family name")
    simulate.add_argument("--dimension", "-d", type=int, default=None, help="Dimension")
    simulate.add_argument("--params", type=float, nargs="+", default=None, help="Parameter grid")
    simulate.add_argument("--sizes", type=int, nargs="+", default=None, help="Sample sizes")
    simulate.add_argument("--direction", "-a", action="append", default=None, help="Direction; repeatable")
    simulate.add_argument("--reps", type=int, default=None, help="Replicates per cell")
    simulate.add_argument("--seed", type=int, default=None, help="Master seed")
    simulate.add_argument("--workers", type=int, default=None, help="Worker processes")
    simulate.add_argument("--star", action="store_true", help="Also report the mean pairwise estimator (d=3)")
    simulate.add_argument("--decomposition", action="store_true",
                          help="Report margin estimators next to the assembled estimate")
    simulate.add_argument("--diagnostic", action="store_true",
                          help="Report the spread of the estimator along the sample sizes")
    _add_output_arguments(simulate)

    sample = commands.add_parser("sample", help="Write a synthetic sample from a copula family as CSV")
    sample.add_argument("family", help="Family spec, e.g. comonotone:d=3")
    sample.add_argument("--n", type=int, required=True, help="Sample size")
    sample.add_argument("--seed", type=int, default=None, help="Seed")
    sample.add_argument("--output", "-o", default=None, help="Output file (default: standard output)")

    return parser.parse_args(argv)


def setup_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    handler = RichHandler(console=Console(stderr=True), show_time=False, show_path=False)
    logging.basicConfig(level=level, format="%(message)s", handlers=[handler], force=True)


def _output_spec(args, settings):
    section = settings.get("output", {})
    return OutputSpec(
        format=args.format or section.get("format", "table"),
        destination=args.output,
        precision=args.precision if args.precision is not None else section.get("precision", 4),
    )


def _directions(args, d, limit):
    if args.direction and not args.all:
        directions = [Direction.parse(text) for text in args.direction]
        for alpha in directions:
            if alpha.d != d:
                raise DomainError(f"direction {alpha} has {alpha.d} coordinates, expected {d}")
        return directions
    return all_directions(d, limit)


def cmd_estimate(args, settings):
    """Estimate every requested direction on a dataset, sorted by descending value."""
    columns = args.columns.split(",") if args.columns else None
    dataset = ingest_csv(args.path, header=not args.no_header, delimiter=args.delimiter, columns=columns)
    policy = TiePolicy(args.ties)
    rng = resolve_seed(args.seed, settings) if policy is TiePolicy.RANDOM else None
    ranks = compute_ranks(dataset.data, policy, rng)

    limits = settings["limits"]
    limit = limits["max_library_dimension"] if args.allow_large else limits["max_enumerated_dimension"]
    results = estimate_all_directions(ranks, _directions(args, dataset.d, limit))
    results.sort(key=lambda r: r.value, reverse=True)
    rows = [{"alpha": str(r.alpha), "rho_hat": r.value} for r in results]
    if dataset.d == 3:
        rows.append({"alpha": RHO_STAR, "rho_hat": rho_hat_star3(ranks)})
    if ranks.tie_count:
        logger.warning("%d tie(s) broken with the %s policy", ranks.tie_count, policy.value)

    metadata = {"source": dataset.source, "columns": list(dataset.names), "n": dataset.n, "d": dataset.d,
                "tie_count": ranks.tie_count, "tie_policy": policy.value}
    write_table(pd.DataFrame(rows, columns=["alpha", "rho_hat"]), _output_spec(args, settings),
                title=f"Directional estimates, n={dataset.n}", metadata=metadata)
    return EXIT_OK


def _integrator(args, settings):
    cfg = IntegratorConfig.from_settings(settings["integration"])
    changes = {"seed": resolve_seed(args.seed, settings), "strict": args.strict}
    if args.method:
        changes["method"] = args.method
    if args.nodes:
        changes["nodes_per_dim"] = args.nodes
        changes["nodes_per_dim_high"] = args.nodes
    if args.samples:
        changes["sample_count"] = args.samples
    return replace(cfg, **changes)


def _subset_text(subset):
    return "{" + ",".join(str(i + 1) for i in subset) + "}"


def cmd_exact(args, settings):
    """Population coefficients per direction, or their margin decomposition with ``--explain``."""
    model = from_spec(args.family)
    directions = _directions(args, model.d, settings["limits"]["max_enumerated_dimension"])

    if args.explain:
        rows = [
            {"alpha": str(alpha), "margin": _subset_text(subset), "coefficient": str(coef), "value": float(coef)}
            for alpha in directions
            for subset, coef in decomposition_terms(alpha)
        ]
        write_table(pd.DataFrame(rows, columns=["alpha", "margin", "coefficient", "value"]),
                    _output_spec(args, settings), title="rho^alpha as a combination of margin rho^-",
                    metadata={"dimension": model.d})
        return EXIT_OK

    cfg = _integrator(args, settings)
    rows = []
    for alpha in directions:
        result = directional_rho(model, alpha, cfg, route=args.route)
        rows.append({"alpha": str(alpha), "rho": result.value, "method": result.estimate.method.value,
                     "std_error": result.estimate.std_error})
    metadata = {"family": model.family, "parameters": model.parameters, "dimension": model.d,
                "integration": cfg.method.value, "seed": cfg.seed}
    write_table(pd.DataFrame(rows, columns=["alpha", "rho", "method", "std_error"]).astype({"std_error": float}),
                _output_spec(args, settings), title=model.spec, metadata=metadata)
    return EXIT_OK


def _plan(args, settings):
    """The replication plan, and whether it runs as a convergence diagnostic."""
    seed = resolve_seed(args.seed, settings)
    defaults = settings["simulation"]
    if args.preset:
        preset = get_preset(args.preset, settings)
        for key, value in (("family", args.family), ("dimension", args.dimension), ("parameters", args.params),
                           ("sizes", args.sizes), ("directions", args.direction)):
            if value is not None:
                preset[key] = value
        if args.star:
            preset["include_star"] = True
        if args.decomposition:
            preset["decomposition"] = True
        plan = ReplicationPlan.from_preset(preset, seed=seed, replicates=args.reps, workers=args.workers,
                                           defaults=defaults)
        return plan, args.diagnostic or bool(preset.get("diagnostic", False))
    if not (args.family and args.dimension and args.sizes):
        raise ConfigError("simulate needs --preset, or --family, --dimension and --sizes")
    directions = args.direction
    if not directions and not args.star:
        directions = [str(a) for a in all_directions(args.dimension, settings["limits"]["max_enumerated_dimension"])]
    plan = ReplicationPlan(
        family=args.family,
        dimension=args.dimension,
        parameters=tuple(args.params) if args.params else (None,),
        sizes=tuple(args.sizes),
        directions=tuple(directions or ()),
        replicates=args.reps if args.reps is not None else defaults["replicates"],
        seed=seed,
        include_star=args.star,
        decomposition=args.decomposition,
        workers=args.workers if args.workers is not None else defaults["workers"],
    )
    return plan, args.diagnostic


def _diagnostic(args, settings, plan):
    if len(plan.parameters) != 1 or len(plan.directions) != 1:
        raise DomainError("a convergence diagnostic needs exactly one parameter and one direction")
    parameter, alpha = plan.parameters[0], plan.directions[0]
    frame = convergence_diagnostic(plan.family, parameter, alpha, list(plan.sizes), replicates=plan.replicates,
                                   seed=plan.seed, workers=plan.workers)
    metadata = {"family": plan.family, "dimension": plan.dimension, "parameters": list(plan.parameters),
                "direction": str(alpha), "seed": plan.seed, "replicates": plan.replicates}
    title = f"Spread of rho^{alpha}, {plan.family} {plan.parameter_label}={parameter}, {plan.replicates} replicates"
    write_table(frame, _output_spec(args, settings), title=title, metadata=metadata)
    return EXIT_OK


def cmd_simulate(args, settings):
    """Run a replication plan and print its table, or its spread along n as a diagnostic."""
    plan, diagnostic = _plan(args, settings)
    if diagnostic:
        return _diagnostic(args, settings, plan)
    cfg = IntegratorConfig.from_settings(settings["integration"])
    report = run_plan(plan, cfg)
    frame = report.decomposition_frame() if plan.decomposition and len(plan.directions) == 1 else report.grid()
    metadata = {
        "family": plan.family,
        "dimension": plan.dimension,
        "parameters": list(plan.parameters),
        "sizes": list(plan.sizes),
        "seed": plan.seed,
        "replicates": plan.replicates,
        "integration": cfg.method.value,
        "max_identity_gap": report.max_identity_gap,
        "cells": report.to_frame().to_dict(orient="records"),
    }
    title = f"{plan.family} d={plan.dimension}, {plan.replicates} replicates, seed {plan.seed}"
    write_table(frame, _output_spec(args, settings), title=title, metadata=metadata)
    return EXIT_OK


def cmd_sample(args, settings):
    """Write ``--n`` draws of a family as CSV with full precision."""
    model = from_spec(args.family)
    if args.n < 1:
        raise DomainError(f"--n must be positive, got {args.n}")
    rng = np.random.default_rng(resolve_seed(args.seed, settings))
    write_samples_csv(model.sample(args.n, rng), args.output)
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "exact": cmd_exact,
    "simulate": cmd_simulate,
    "sample": cmd_sample,
}


def main(argv=None):
    """Main function: parse arguments, run the command and map errors to exit codes."""
    args = parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    try:
        settings = load_settings(args.settings)
        return COMMANDS[args.command](args, settings)
    except DataValidationError as exc:
        print(f"dirrho: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except IntegrationError as exc:
        print(f"dirrho: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DomainError, ConfigError) as exc:
        print(f"dirrho: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DirRhoError as exc:
        print(f"dirrho: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
