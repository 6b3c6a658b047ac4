from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import click
from rich.console import Console

from .app import ExperimentApp
from .config import ExperimentConfig

console = Console()

MODELS = ["schrodinger", "bloch", "lindblad", "markov", "spinbath"]


class ConfigError(click.ClickException):
    """Invalid configuration; exits with status 2."""

    exit_code = 2


def build_config(config_path: Optional[Path], overrides: Dict[str, Any]) -> ExperimentConfig:
    """Config file (or defaults) with command-line overrides applied on top."""
    try:
        base = ExperimentConfig.from_json(config_path) if config_path else ExperimentConfig()
        data = base.model_dump()
        data.update({key: value for key, value in overrides.items() if value is not None})
        config = ExperimentConfig(**data)
        config.validate_for_model()
        return config
    except ValueError as e:
        raise ConfigError(str(e))


def common_options(func):
    """--config, --seed, --out, --jobs and --verbose shared by every subcommand."""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="JSON configuration file"),
        click.option("--seed", type=int, help="Random seed (overrides the config seeds)"),
        click.option("--out", type=click.Path(path_type=Path), help="Output file"),
        click.option("--jobs", type=int, help="Worker processes"),
        click.option("--verbose/--quiet", default=None, help="Enable verbose output"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


SCHEDULE_FILES = click.Path(exists=True, dir_okay=False, path_type=Path)


def _shared(seed: Optional[int], out: Optional[Path], jobs: Optional[int], verbose: Optional[bool]) -> Dict[str, Any]:
    return {
        "seeds": [seed] if seed is not None else None,
        "output": out,
        "jobs": jobs,
        "verbose": verbose,
    }


@click.group()
def main():
    """Simulate annealing-time dependence of small Ising problems.

    Examples:

        # Lindblad sweep for 2S1 at 35 mK with the default onset window
        python -m src.cli sweep --model lindblad --problem 2S1 --t-a 0.5 --t-a 10 --t-a 100

        # Run a sweep described by a config file on four workers
        python -m src.cli sweep --config experiment.json --jobs 4

        # Closed-form <E> of open ferromagnetic chains
        python -m src.cli gibbs --beta 7.48 --chain-length 10 --chain-length 100

        # Extract (h1, h2, J, beta) from sampled states
        python -m src.cli extract --input samples.txt --problem 2S4

        # Fast anneal of a field-free three-spin problem
        python -m src.cli sweep --model schrodinger --problem 3S-fast --schedule fast --t-a 0.005 --t-a 0.01

        # Dump the fast-anneal schedule
        python -m src.cli schedules --schedule fast
    """


@main.command()
@click.option("--model", type=click.Choice(MODELS), help="Dynamical model")
@click.option("--problem", help="Instance name (e.g. 2S1) or problem JSON file")
@click.option("--schedule", type=click.Choice(["standard", "fast"]), help="Annealing schedule")
@click.option("--schedule-files", type=SCHEDULE_FILES, nargs=2, help="CSV tables of (s, A) and (s, B) in GHz")
@click.option("--embed/--no-embed", default=None, help="Replace fields by flux-biased auxiliary qubits (schrodinger only)")
@click.option("--t-a", "t_a_us", type=float, multiple=True, help="Annealing time in µs (repeatable)")
@click.option("--dt", "dt_ns", type=float, help="Time step in ns")
@click.option("--temperature", "temperature_mk", type=float, help="Effective temperature in mK")
@click.option("--beta", type=float, help="Inverse temperature (overrides --temperature)")
@common_options
@click.pass_context
def sweep(ctx, model, problem, schedule, schedule_files, embed, t_a_us, dt_ns, temperature_mk, beta, config_path, seed, out, jobs, verbose):
    """Sweep annealing times through one dynamical model."""
    overrides = dict(
        model=model,
        problem=problem,
        schedule=schedule,
        schedule_files=schedule_files or None,
        embed=embed,
        t_a_us=list(t_a_us) or None,
        dt_ns=dt_ns,
        temperature_mk=temperature_mk,
        beta=beta,
        **_shared(seed, out, jobs, verbose),
    )
    config = build_config(config_path, overrides)
    if config.model in ("gibbs", "extract"):
        raise ConfigError(f"Model '{config.model}' has its own subcommand")

    try:
        result = ExperimentApp(config).run_sweep()
    except Exception as e:
        console.print(f"[red]Error: {e}[/red]")
        raise click.ClickException(str(e))
    if not result.ok:
        ctx.exit(1)


@main.command()
@click.option("--problem", help="Instance name or problem JSON file")
@click.option("--temperature", "temperature_mk", type=float, help="Effective temperature in mK")
@click.option("--beta", type=float, help="Inverse temperature (overrides --temperature)")
@click.option("--chain-length", "chain_lengths", type=int, multiple=True, help="Open-chain length (repeatable)")
@click.option("--chain-j", type=float, help="Chain coupling")
@common_options
def gibbs(problem, temperature_mk, beta, chain_lengths, chain_j, config_path, seed, out, jobs, verbose):
    """Equilibrium probabilities of a problem or <E> of open chains."""
    overrides = dict(
        model="gibbs",
        problem=problem,
        temperature_mk=temperature_mk,
        beta=beta,
        chain_lengths=list(chain_lengths) or None,
        chain_j=chain_j,
        **_shared(seed, out, jobs, verbose),
    )
    config = build_config(config_path, overrides)
    try:
        ExperimentApp(config).run_gibbs()
    except Exception as e:
        console.print(f"[red]Error: {e}[/red]")
        raise click.ClickException(str(e))


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Frequency CSV or sample file")
@click.option("--problem", help="Instance name or problem JSON file")
@click.option("--smooth/--no-smooth", default=None, help="Add-half smoothing of the frequencies")
@click.option("--bootstrap", type=int, help="Bootstrap resamples for error bars")
@common_options
def extract(input_path, problem, smooth, bootstrap, config_path, seed, out, jobs, verbose):
    """Extract (h1, h2, J, beta) with both maximum-entropy methods."""
    overrides = dict(
        model="extract",
        input=input_path,
        problem=problem,
        smooth=smooth,
        bootstrap=bootstrap,
        **_shared(seed, out, jobs, verbose),
    )
    config = build_config(config_path, overrides)
    try:
        ExperimentApp(config).run_extract()
    except Exception as e:
        console.print(f"[red]Error: {e}[/red]")
        raise click.ClickException(str(e))


@main.command()
@click.option("--schedule", type=click.Choice(["standard", "fast"]), help="Annealing schedule")
@click.option("--schedule-files", type=SCHEDULE_FILES, nargs=2, help="CSV tables of (s, A) and (s, B) in GHz")
@click.option("--points", default=101, type=int, help="Number of s values")
@click.option("--t-a", "t_a_us", type=float, help="Annealing time in µs; adds the B' column")
@click.option("--onset", "onset_us", type=float, nargs=2, help="Onset window start and end in µs")
@common_options
def schedules(schedule, schedule_files, points, t_a_us, onset_us: Optional[Tuple[float, float]], config_path, seed, out, jobs, verbose):
    """Dump s, A(s), B(s) and optionally B'(s) as CSV."""
    if points < 2:
        raise ConfigError("At least two points are needed")
    overrides = dict(
        schedule=schedule,
        schedule_files=schedule_files or None,
        onset_us=onset_us or None,
        **_shared(seed, None, jobs, verbose),
    )
    try:
        base = ExperimentConfig.from_json(config_path) if config_path else ExperimentConfig()
        data = base.model_dump()
        data.update({key: value for key, value in overrides.items() if value is not None})
        config = ExperimentConfig(**data)
        config.annealing_schedule
    except ValueError as e:
        raise ConfigError(str(e))

    content = ExperimentApp(config).show_schedules(points, 1e3 * t_a_us if t_a_us else None, out)
    if out is None:
        click.echo(content, nl=False)


if __name__ == "__main__":
    main()
