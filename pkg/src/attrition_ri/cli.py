"""Command-line entry point: ``attrition-ri test`` and ``attrition-ri simulate``."""

from __future__ import annotations

import dataclasses
import json
import sys

import click

from .errors import AttritionRIError
from .io import dumps, load_csv
from .simulation import SimulationConfig, run_study


def _emit(obj, output):
    text = dumps(obj)
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


@click.group()
def main():
    """Worst-case randomization tests for always-reporter effects under attrition."""


@main.command("test")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["exact", "continuous", "asymptotic"]), default="continuous")
@click.option("--stat", "kind", type=click.Choice(["t0", "t1", "t2"]), default="t2")
@click.option("--alpha", type=float, default=0.05)
@click.option("--beta", type=float, default=0.005)
@click.option("--n-mc", type=int, default=300)
@click.option("--seed", type=int, default=0)
@click.option("--pretest-side", type=click.Choice(["two", "paper"]), default="two")
@click.option("--asy-variant", type=click.Choice(["min", "max"]), default="min")
@click.option("--max-support", type=int, default=6)
@click.option("--grid-step", type=float, default=0.01)
@click.option("--node-budget", type=int, default=2_000_000)
@click.option("--tol", type=float, default=1e-4)
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def test_cmd(input_path, mode, kind, alpha, beta, n_mc, seed, pretest_side, asy_variant,
             max_support, grid_step, node_budget, tol, output):
    """Test the sharp null on a y,d,r CSV file and print the decision as JSON."""
    try:
        _check_levels(alpha, beta)
        data = load_csv(input_path)
        if mode == "exact":
            from .exact import worst_case_small_support
            dec = worst_case_small_support(kind, data, alpha, beta, pretest_side,
                                           max_support=max_support, n_mc=n_mc, seed=seed)
        elif mode == "continuous":
            from .continuous import ContinuousConfig, worst_case_continuous
            cfg = ContinuousConfig(n_mc=n_mc, seed=seed, grid_step=grid_step,
                                   node_budget=node_budget, tol=tol, side=pretest_side)
            dec = worst_case_continuous(kind, data, alpha, beta, cfg)
        else:
            from .asymptotic import asymptotic_decision
            dec = asymptotic_decision(kind, data, alpha, beta, asy_variant, side=pretest_side,
                                      tol=tol, node_budget=node_budget, seed=seed)
    except AttritionRIError as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    _emit(dec, output)


def _check_levels(alpha, beta):
    from .errors import InvariantViolation
    if not 0.0 < alpha < 1.0:
        raise InvariantViolation("alpha must lie in (0, 1)")
    if not 0.0 <= beta < alpha:
        raise InvariantViolation("need 0 <= beta < alpha")


_SIM_FIELDS = {f.name: f for f in dataclasses.fields(SimulationConfig)}


@main.command("simulate")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file with SimulationConfig fields; flags override it.")
@click.option("--n", type=int)
@click.option("--n1", type=int)
@click.option("--shares", type=str, help="Comma-separated AR,IR,NR shares.")
@click.option("--tau", type=float)
@click.option("--n-mc", type=int)
@click.option("--alpha", type=float)
@click.option("--beta", type=float)
@click.option("--reps", type=int)
@click.option("--seed", type=int)
@click.option("--mode", type=click.Choice(["exact", "continuous", "asymptotic"]))
@click.option("--stat", "kind", type=click.Choice(["t0", "t1", "t2"]))
@click.option("--outcome", type=click.Choice(["normal", "binary"]))
@click.option("--pretest-side", type=click.Choice(["two", "paper"]))
@click.option("--asy-variant", type=click.Choice(["min", "max"]))
@click.option("--grid-step", type=float)
@click.option("--node-budget", type=int)
@click.option("--tol", type=float)
@click.option("--max-support", type=int)
@click.option("--rep-budget-s", type=float)
@click.option("--per-rep/--no-per-rep", default=True, help="Include per-replication rows.")
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def simulate_cmd(config_path, per_rep, output, **flags):
    """Run a simulation study and print the study report as JSON."""
    try:
        fields = {}
        if config_path:
            with open(config_path) as fh:
                fields.update(json.load(fh))
            unknown = set(fields) - set(_SIM_FIELDS)
            if unknown:
                raise click.ClickException(f"unknown config fields: {', '.join(sorted(unknown))}")
        for name, value in flags.items():
            if value is None:
                continue
            if name == "shares":
                value = tuple(float(x) for x in value.split(","))
            fields[name] = value
        config = SimulationConfig(**fields)
        study = run_study(config)
    except AttritionRIError as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    if not per_rep:
        study.pop("per_rep")
    _emit(study, output)


if __name__ == "__main__":
    sys.exit(main())
