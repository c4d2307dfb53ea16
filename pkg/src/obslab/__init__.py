import sys
import click

from functools import wraps
from typing import Callable, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from .errors import ObslabError, ProblemFormatError
from .settings import ObslabSettings
from .engine import ObstructionEngine
from .types import ProblemSpec, Report
from .utilities import load_problem, parse_group, parse_module, render_report


def build_settings(**cli_overrides) -> ObslabSettings:
    """Build ObslabSettings with CLI overrides (non-None values take precedence)."""
    overrides = {k: v for k, v in cli_overrides.items() if v is not None}
    return ObslabSettings(**overrides)


def settings_options(command: Callable) -> Callable:
    options = [
        click.option('--budget', 'OBSLAB_BUDGET', type=int, default=None, envvar='OBSLAB_BUDGET', help='Bound on enumeration candidates and linear-system sizes.'),
        click.option('--flow-window', 'OBSLAB_FLOW_WINDOW', type=int, default=None, envvar='OBSLAB_FLOW_WINDOW', help='Flow window W for checks on G x Z.'),
        click.option('--seed', 'OBSLAB_SEED', type=int, default=None, envvar='OBSLAB_SEED', help='Seed for sampled checks.'),
        click.option('--format', 'OBSLAB_FORMAT', type=click.Choice(["text", "json"]), default=None, envvar='OBSLAB_FORMAT', help='Report format.'),
        click.option('--log-level', 'OBSLAB_LOG_LEVEL', type=str, default=None, envvar='OBSLAB_LOG_LEVEL', help='Log level on stderr.'),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def problem_options(command: Callable) -> Callable:
    command = click.option('--fixture', 'fixture', type=str, default=None, help='Named fixture: FX1, FX-KLEIN, FX-C2, HEIS-k.')(command)
    command = click.option('--problem', 'problem_path', type=click.Path(exists=True, dir_okay=False, readable=True), default=None, help='JSON problem document.')(command)
    return command


def obstruction_options(command: Callable) -> Callable:
    command = click.option('--nu', 'nu', type=click.Choice(["injective", "zero"]), default="injective", help='Heisenberg nu.')(command)
    command = click.option('--k', 'k', type=int, default=None, help='Use the Heisenberg obstruction for Heis(k).')(command)
    return command


def _split_settings(kwargs: dict) -> dict:
    return {key: kwargs.pop(key) for key in list(kwargs) if key.startswith("OBSLAB_")}


def run_command(run: Callable[[ObstructionEngine, Optional[ProblemSpec]], Report]) -> Callable:
    """Shared body of every subcommand: settings, problem, engine, report, exit code."""

    @wraps(run)
    def command(**kwargs) -> None:
        load_dotenv()
        try:
            settings = build_settings(**_split_settings(kwargs))
        except ValidationError as e:
            click.echo(f"error: invalid settings: {e.errors()[0]['msg']}", err=True)
            sys.exit(2)
        try:
            problem_path = kwargs.pop("problem_path", None)
            problem = load_problem(problem_path) if problem_path is not None else None
            with ObstructionEngine(settings) as engine:
                report = run(engine, problem, **kwargs)
        except ObslabError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(e.exit_code)
        click.echo(render_report(report, settings.FORMAT))
        if report.exit_code:
            sys.exit(report.exit_code)

    return command


@click.group()
def cli():
    """obslab - finite twisted cohomology, obstruction maps and their oracles"""
    pass


@cli.command('group-check')
@settings_options
@click.option('--problem', 'problem_path', type=click.Path(exists=True, dir_okay=False, readable=True), default=None, help='JSON problem document.')
@click.option('--group', 'group', type=str, default=None, help='cyclic:n, heisenberg:k, klein or product:axb.')
@click.option('--table', 'table', type=str, default=None, help='Multiplication table as a JSON list of rows.')
@run_command
def group_check(engine: ObstructionEngine, problem: Optional[ProblemSpec], group: Optional[str], table: Optional[str]) -> Report:
    """Validate a group given by family or by table."""
    if table is not None:
        spec = parse_group(table)
    elif group is not None:
        spec = parse_group(group)
    elif problem is not None:
        spec = problem.group
    else:
        raise ProblemFormatError("give --group, --table or --problem")
    return engine.group_check(spec)


@cli.command('cohomology')
@settings_options
@click.option('--problem', 'problem_path', type=click.Path(exists=True, dir_okay=False, readable=True), default=None, help='JSON problem document.')
@click.option('--group', 'group', type=str, default=None, help='cyclic:n, heisenberg:k, klein or product:axb.')
@click.option('--module', 'module', type=str, default=None, help='Moduli, e.g. Z2 or Z2+Z4 (trivial action).')
@click.option('--degree', 'degree', type=click.IntRange(0, 3), required=True, help='Cohomological degree.')
@click.option('--brute-force/--no-brute-force', 'brute_force', default=False, help='Cross-check by exhaustive enumeration.')
@run_command
def cohomology(engine: ObstructionEngine, problem: Optional[ProblemSpec], group: Optional[str], module: Optional[str],
               degree: int, brute_force: bool) -> Report:
    """H^n(G, A) as invariant factors."""
    return engine.cohomology(degree, problem=problem, group=parse_group(group) if group else None,
                             module=parse_module(module) if module else None, brute_force=brute_force)


@cli.command('delta-hjr')
@settings_options
@problem_options
@run_command
def delta_hjr(engine: ObstructionEngine, problem: Optional[ProblemSpec], fixture: Optional[str]) -> Report:
    """HJR 3-cocycle of a characteristic cocycle."""
    return engine.delta_hjr(problem, fixture)


@cli.command('delta-mod')
@settings_options
@problem_options
@run_command
def delta_mod(engine: ObstructionEngine, problem: Optional[ProblemSpec], fixture: Optional[str]) -> Report:
    """Modular obstruction of a characteristic cocycle over H >= L >= M."""
    return engine.delta_mod(problem, fixture)


@cli.command('partial')
@settings_options
@problem_options
@obstruction_options
@click.option('--inf/--no-inf', 'inflate', default=True, help='Also inflate to H and check triviality.')
@run_command
def partial(engine: ObstructionEngine, problem: Optional[ProblemSpec], fixture: Optional[str], k: Optional[int],
            nu: str, inflate: bool) -> Report:
    """Torus-valued 3-cocycle on G from a modular obstruction."""
    return engine.partial(problem, fixture, k, nu, inflate)


@cli.command('resolve')
@settings_options
@problem_options
@run_command
def resolve(engine: ObstructionEngine, problem: Optional[ProblemSpec], fixture: Optional[str]) -> Report:
    """Resolution group of a 3-cocycle."""
    return engine.resolve(problem, fixture)


@cli.command('resolve-obstruction')
@settings_options
@problem_options
@obstruction_options
@run_command
def resolve_obstruction(engine: ObstructionEngine, problem: Optional[ProblemSpec], fixture: Optional[str],
                        k: Optional[int], nu: str) -> Report:
    """Realize a modular obstruction by a characteristic cocycle."""
    return engine.resolve_obstruction(problem, fixture, k, nu)


@cli.command('fiber-check')
@settings_options
@problem_options
@obstruction_options
@run_command
def fiber_check(engine: ObstructionEngine, problem: Optional[ProblemSpec], fixture: Optional[str],
                k: Optional[int], nu: str) -> Report:
    """Check the fiber-product condition of an obstruction."""
    return engine.fiber_check(problem, fixture, k, nu)


@cli.command('section-change')
@settings_options
@problem_options
@obstruction_options
@run_command
def section_change(engine: ObstructionEngine, problem: Optional[ProblemSpec], fixture: Optional[str],
                   k: Optional[int], nu: str) -> Report:
    """Chain rule and round trips of section transport."""
    return engine.section_change(problem, fixture, k, nu)


@cli.command('exactness')
@settings_options
@problem_options
@run_command
def exactness(engine: ObstructionEngine, problem: Optional[ProblemSpec], fixture: Optional[str]) -> Report:
    """Exhaustive exactness check on a tower."""
    return engine.exactness(problem, fixture)


@cli.command('heisenberg')
@settings_options
@click.option('--k', 'k', type=click.IntRange(min=2), required=True, help='Heisenberg modulus.')
@click.option('--nu', 'nu', type=click.Choice(["injective", "zero"]), default="injective", help='nu(c) = c w with w = 1 or 0.')
@click.option('--modulus', 'modulus', type=click.IntRange(min=1), default=None, help='Coefficients Z/modulus (default k).')
@run_command
def heisenberg(engine: ObstructionEngine, problem: Optional[ProblemSpec], k: int, nu: str, modulus: Optional[int]) -> Report:
    """Splitting test for the Heisenberg obstruction."""
    return engine.heisenberg(k, nu, modulus)


@cli.command('oracle-compare')
@settings_options
@click.option('--problem', 'problem_path', type=click.Path(exists=True, dir_okay=False, readable=True), default=None, help='JSON problem document.')
@click.option('--report', 'report_path', type=click.Path(exists=True, dir_okay=False, readable=True), default=None, help='JSON report whose witnesses are replayed.')
@click.option('--group', 'group', type=str, default=None, help='cyclic:n, heisenberg:k, klein or product:axb.')
@click.option('--module', 'module', type=str, default=None, help='Moduli, e.g. Z2 or Z2+Z4 (trivial action).')
@click.option('--samples', 'samples', type=click.IntRange(min=0), default=0, help='Random 2-cochains whose coboundaries are re-solved.')
@run_command
def oracle_compare(engine: ObstructionEngine, problem: Optional[ProblemSpec], report_path: Optional[str],
                   group: Optional[str], module: Optional[str], samples: int) -> Report:
    """Replay recorded witnesses, or compare Smith-form cohomology with enumeration."""
    return engine.oracle_compare(report_path, problem=problem, group=parse_group(group) if group else None,
                                 module=parse_module(module) if module else None, samples=samples)


def main():
    cli()
