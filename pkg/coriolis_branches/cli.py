import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError
from rich.console import Console

from coriolis_branches import classify, config, degree, dynamics, rt4bp, utils
from coriolis_branches.classify import BrouwerIndexRequiredError, ClassificationError
from coriolis_branches.models import BranchOrigin, SpectralData
from coriolis_branches.rt4bp import RegionLostZeroError


# stdout carries only JSON or the bare degree; everything for humans goes to stderr
console = Console(stderr=True)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CLAIM_FAILED = 1
EXIT_USAGE = 2
EXIT_INDEX_REQUIRED = 3
EXIT_REGION_LOST = 4


def setup_logging():
    """Basic logging configuration for the application."""
    logging.basicConfig(
        level=config.settings.LOG_LEVEL,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )


def parse_masses(text: str) -> tuple[float, float, float]:
    """'eq' or 'm1,m2,m3'."""
    if text.strip().lower() == "eq":
        return rt4bp.SQRT3, rt4bp.SQRT3, rt4bp.SQRT3
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected 'eq' or three comma-separated masses, got {text!r}")
    try:
        m1, m2, m3 = (float(p) for p in parts)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"masses must be numbers, got {text!r}") from e
    return m1, m2, m3


def _mass_triple(masses: tuple[float, float, float], normalize: bool) -> rt4bp.MassTriple:
    if normalize:
        return rt4bp.MassTriple.normalized(*masses)
    return rt4bp.MassTriple(*masses)


def _print_validation_error(e: ValidationError):
    for error in e.errors():
        field = ".".join(str(part) for part in error["loc"]) or "input"
        console.print(f"[bold red]✗[/bold red] {field}: {error['msg']}")


def command_classify(args) -> int:
    """Command handler for classifying (β1, β2[, β3])."""
    try:
        run = config.RunConfig(
            command="classify",
            beta1=args.beta1,
            beta2=args.beta2,
            beta3=args.beta3,
            ib=args.ib,
            extremum=args.extremum,
            even=args.even,
        )
    except ValidationError as e:
        _print_validation_error(e)
        return EXIT_USAGE

    betas = SpectralData(run.beta1, run.beta2, run.beta3)
    try:
        report = classify.emanation_report(
            betas, ib=run.ib, extremum=run.extremum, even=run.even
        )
    except BrouwerIndexRequiredError as e:
        console.print(f"[bold red]✗[/bold red] {e}. Pass --ib, --extremum or --even.")
        return EXIT_INDEX_REQUIRED
    except ClassificationError as e:
        console.print(f"[bold red]✗[/bold red] {e}")
        return EXIT_USAGE

    console.print(
        f"[green]✓[/green] Region [cyan]{report.region.value}[/cyan], "
        f"{report.predicted_branches} branch(es) predicted"
    )
    for note in report.notes:
        console.print(f"   - {note}")
    print(utils.dumps_report(report.to_dict()))
    return EXIT_OK


def _gamma_lookup(report: rt4bp.RT4BPReport):
    def lookup(period: float, q: tuple[float, ...]) -> int:
        for lp in report.points:
            if np.allclose(lp.position, q[:2], atol=1e-6):
                b = lp.betas
                return classify.gamma3(b.beta1, b.beta2, b.beta3, lp.brouwer_index, period)
        return 0

    return lookup


def continue_vertical_branches(
    report: rt4bp.RT4BPReport, run: config.RunConfig
) -> list[dict]:
    """Continue one vertical branch per tracked region and write a CSV for each."""
    system = rt4bp.hamiltonian_system(report.masses, dim=3, equilibria=report.points)
    regions, origins = [], []
    for name in rt4bp.REGION_NAMES:
        lp = report.chosen[name]
        if lp is not None:
            regions.append(name)
            origins.append(BranchOrigin(lp.vertical_period, lp.position, lp.gamma3_vertical))

    console.print(f"[bold yellow]Continuing {len(origins)} vertical branches...[/bold yellow]")
    branches = dynamics.continue_all(
        system,
        origins,
        max_workers=run.threads,
        max_steps=run.max_steps,
        gamma_lookup=_gamma_lookup(report),
    )

    summaries = []
    for name, branch in zip(regions, branches):
        entry = {
            "region": name,
            "T0": branch.origin.period,
            "gamma": branch.origin.gamma,
            "status": branch.status.value,
            "orbits": len(branch.orbits),
            "gamma_sum": branch.gamma_sum,
            "csv": None,
            "evidence": branch.evidence,
        }
        if branch.orbits:
            label = utils.normalize_label_for_filename(f"branch_{name}_T{branch.origin.period:.4f}")
            path = utils.write_branch_csv(run.output_dir / f"{label}.csv", branch.to_rows())
            entry["csv"] = str(path)
            console.print(
                f"   [green]✓[/green] {name}: {len(branch.orbits)} orbits, "
                f"{branch.status.value} -> [cyan]{path}[/cyan]"
            )
        else:
            console.print(f"   [red]✗[/red] {name}: branch not started")
        summaries.append(entry)
    return summaries


def command_rt4bp(args) -> int:
    """Command handler for the RT4BP libration analysis."""
    s = config.settings
    try:
        masses = _mass_triple(args.masses, args.normalize)
        run = config.RunConfig(
            command="rt4bp",
            masses=masses.to_list(),
            epsilon=args.eps if args.eps is not None else s.DEGREE_EPSILON,
            continue_branches=args.continue_branches,
            max_steps=args.max_steps if args.max_steps is not None else s.CONT_MAX_STEPS,
            output_dir=args.out if args.out is not None else s.OUTPUT_DIR,
            threads=s.THREAD_COUNT,
        )
    except ValidationError as e:
        _print_validation_error(e)
        return EXIT_USAGE
    except rt4bp.RT4BPError as e:
        console.print(f"[bold red]✗[/bold red] {e}")
        return EXIT_USAGE

    console.print(f"[bold cyan]RT4BP analysis[/bold cyan] masses = {masses.to_list()}")
    try:
        report = rt4bp.analyze(masses, eps=run.epsilon, max_workers=run.threads)
    except RegionLostZeroError as e:
        console.print(f"[bold red]✗[/bold red] {e}")
        return EXIT_REGION_LOST

    console.print(f"   [green]✓[/green] {len(report.points)} libration points located")
    for claim, holds in report.claims.items():
        mark = "[green]✓[/green]" if holds else "[red]✗[/red]"
        console.print(f"   {mark} {claim}")

    payload = report.to_dict()
    if run.continue_branches:
        payload["branches"] = continue_vertical_branches(report, run)
    print(utils.dumps_report(payload))
    return EXIT_OK if report.all_claims_hold else EXIT_CLAIM_FAILED


def command_degree(args) -> int:
    """Command handler for the winding degree of V' on one region."""
    s = config.settings
    try:
        masses = _mass_triple(args.masses, args.normalize)
        run = config.RunConfig(
            command="degree",
            masses=masses.to_list(),
            region=args.region,
            epsilon=args.eps if args.eps is not None else s.DEGREE_EPSILON,
        )
    except ValidationError as e:
        _print_validation_error(e)
        return EXIT_USAGE
    except rt4bp.RT4BPError as e:
        console.print(f"[bold red]✗[/bold red] {e}")
        return EXIT_USAGE

    try:
        value = rt4bp.region_degree(masses, run.region, run.epsilon)
    except degree.DegreeError as e:
        console.print(f"[bold red]✗[/bold red] {e}")
        return EXIT_CLAIM_FAILED

    print(value)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coriolis-branches",
        description="Branches of closed orbits near equilibria of rotating-frame systems",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--config",
        type=Path,
        default=None,
        help="key=value file overriding the default settings",
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # Subcommand: classify
    classify_parser = subparsers.add_parser(
        "classify",
        help="Classify (beta1, beta2[, beta3]) and list emanating branches",
    )
    classify_parser.add_argument("--beta1", type=float, required=True, help="First planar eigenvalue")
    classify_parser.add_argument("--beta2", type=float, required=True, help="Second planar eigenvalue")
    classify_parser.add_argument(
        "--beta3",
        type=float,
        default=None,
        help="Vertical eigenvalue (spatial problems, must be positive)",
    )
    classify_parser.add_argument(
        "--ib",
        type=int,
        choices=(-1, 0, 1),
        default=None,
        help="Brouwer index of the equilibrium, required on the axes",
    )
    classify_parser.add_argument(
        "--extremum",
        action="store_true",
        help="V restricted to the plane has a strict local extremum at the equilibrium",
    )
    classify_parser.add_argument(
        "--even",
        action="store_true",
        help="V restricted to the plane is even about the equilibrium (odd Brouwer index)",
    )

    # Subcommand: rt4bp
    rt4bp_parser = subparsers.add_parser(
        "rt4bp",
        help="Locate and classify RT4BP libration points",
    )
    rt4bp_parser.add_argument(
        "--masses",
        type=parse_masses,
        required=True,
        help="'eq' or m1,m2,m3 summing to 3*sqrt(3)",
    )
    rt4bp_parser.add_argument(
        "--normalize",
        action="store_true",
        help="Rescale the masses to sum 3*sqrt(3)",
    )
    rt4bp_parser.add_argument(
        "--continue",
        dest="continue_branches",
        action="store_true",
        help="Continue one vertical branch per region and write CSV files",
    )
    rt4bp_parser.add_argument("--out", type=Path, default=None, help="Directory for branch CSVs")
    rt4bp_parser.add_argument("--max-steps", type=int, default=None, help="Continuation steps")
    rt4bp_parser.add_argument("--eps", type=float, default=None, help="Boundary offset for degrees")

    # Subcommand: degree
    degree_parser = subparsers.add_parser(
        "degree",
        help="Winding degree of V' on one tracked region",
    )
    degree_parser.add_argument("--region", choices=rt4bp.REGION_NAMES, required=True)
    degree_parser.add_argument("--masses", type=parse_masses, required=True)
    degree_parser.add_argument("--normalize", action="store_true")
    degree_parser.add_argument("--eps", type=float, default=None, help="Boundary offset")

    return parser


def main(argv: list[str] | None = None):
    """Main entry point of the CLI."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.config is not None:
        try:
            config.settings = config.load_settings(args.config)
        except (FileNotFoundError, ValidationError) as e:
            console.print(f"[bold red]✗[/bold red] Invalid configuration: {e}")
            sys.exit(EXIT_USAGE)

    setup_logging()

    handlers = {
        "classify": command_classify,
        "rt4bp": command_rt4bp,
        "degree": command_degree,
    }
    if args.command not in handlers:
        parser.print_help(sys.stderr)
        sys.exit(EXIT_USAGE)

    try:
        code = handlers[args.command](args)
    except KeyboardInterrupt:
        console.print("\n[yellow]⚠️  Interrupted by user[/yellow]")
        code = EXIT_CLAIM_FAILED
    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {e}", exc_info=True)
        console.print(f"\n[bold red]❌ Error: {e}[/bold red]")
        code = EXIT_CLAIM_FAILED
    sys.exit(code)


if __name__ == "__main__":
    main()
