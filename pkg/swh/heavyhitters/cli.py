# Copyright (C) 2026  The Software Heritage developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

from concurrent.futures import ProcessPoolExecutor
import csv
import logging
import math
from typing import Any, Callable, Dict, List, Sequence, Tuple

import click
from click.core import ParameterSource

from swh.core.cli import CONTEXT_SETTINGS
from swh.core.cli import swh as swh_cli_group

RUN_COLUMNS = [
    "mechanism",
    "n",
    "N",
    "epsilon",
    "delta",
    "beta",
    "seed",
    "reported_index",
    "true_hh_index",
    "deficit",
    "message_reals",
    "wall_ms",
]

SWEEP_COLUMNS = RUN_COLUMNS + ["axis"]

LOWER_BOUND_COLUMNS = [
    "mechanism",
    "n",
    "epsilon",
    "delta",
    "runs",
    "noiseless",
    "median_abs_error",
    "error_over_sqrt_n",
]

logger = logging.getLogger(__name__)

FAILURE_MARKER = "FAIL"

SWEEP_AXES: Dict[str, Callable[[str], Any]] = {
    "n": int,
    "epsilon": float,
    "N": int,
}


@swh_cli_group.group(name="heavy-hitters", context_settings=CONTEXT_SETTINGS)
@click.option(
    "--config-file",
    "-C",
    default=None,
    envvar="SWH_CONFIG_FILENAME",
    type=click.Path(
        exists=True,
        dir_okay=False,
    ),
    help="Configuration file.",
)
@click.pass_context
def heavy_hitters_cli_group(ctx, config_file):
    """Simulation of locally differentially private heavy hitter protocols."""
    ctx.ensure_object(dict)
    ctx.obj["config_file"] = config_file


def experiment_options(f):
    """Options shared by the commands driven by an experiment configuration.

    Only options given on the command line override the configuration file.
    """
    options = [
        click.option(
            "--mechanism",
            type=click.Choice(["jl", "glps", "bucket", "naive"]),
            help="Mechanism to simulate.",
        ),
        click.option("--n", "n", type=int, help="Number of clients."),
        click.option("--N", "universe_size", type=int, help="Universe size."),
        click.option("--epsilon", type=float, help="Privacy parameter epsilon."),
        click.option("--delta", type=float, help="Privacy parameter delta."),
        click.option("--beta", type=float, help="Failure probability."),
        click.option(
            "--data",
            help=(
                "Data generator: planted:INDEX:COUNT, zipf:EXPONENT, "
                "uniformbits or file:PATH."
            ),
        ),
        click.option("--seeds", type=int, help="Number of seeded runs."),
        click.option(
            "--master-seed",
            type=int,
            help=(
                "Seed of the first run, run k uses master seed + k "
                "(the LDPHH_SEED environment variable takes precedence)."
            ),
        ),
        click.option("--gamma", type=float, help="Projection distortion (jl)."),
        click.option(
            "--paper-gamma",
            "--inverse-square-gamma",
            "inverse_square_gamma",
            is_flag=True,
            help="Use a 1/n^2 projection distortion (jl).",
        ),
        click.option("--sparsity", type=int, help="Recovery sparsity (glps)."),
        click.option(
            "--repeats", type=int, help="Odd number of recovery repeats (glps)."
        ),
        click.option(
            "--k1-rule",
            type=click.Choice(["exact-recovery", "unique-wins"]),
            help="Number of hashes per trial (bucket).",
        ),
        click.option("--jobs", type=int, help="Number of worker processes."),
        click.option(
            "--out",
            type=click.Path(dir_okay=False),
            help="CSV output file, standard output by default.",
        ),
        click.option(
            "--unsafe-no-noise",
            is_flag=True,
            help="Disable the Laplace noise. The output is NOT private.",
        ),
        click.option(
            "--replacement-dp",
            is_flag=True,
            help="Double the sensitivities for the replacement neighbor convention.",
        ),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _load_config(ctx, params: Dict[str, Any]):
    from swh.heavyhitters.config import load_config

    overrides = {
        name: value
        for name, value in params.items()
        if ctx.get_parameter_source(name) == ParameterSource.COMMANDLINE
    }
    try:
        return load_config(ctx.obj["config_file"], overrides)
    except Exception as e:
        ctx.fail(str(e))


def run_seed(task: Tuple[Any, int]) -> Dict[str, Any]:
    """Generate the data of one seed, run the mechanism and build its CSV row.

    A mechanism rejecting the parameters of this seed gives a FAIL row, the
    other seeds still run.
    """
    from swh.heavyhitters.config import parse_data_kind
    from swh.heavyhitters.core import build_histogram, heavy_hitter
    from swh.heavyhitters.harness import (
        DataGenSpec,
        ProtocolOptions,
        generate,
        run_protocol,
    )
    from swh.heavyhitters.jl_hh import inverse_square_gamma

    config, seed = task
    records = generate(
        DataGenSpec(
            kind=parse_data_kind(config.data),
            n=config.n,
            universe_size=config.universe_size,
            seed=seed,
        )
    )
    row = {
        "mechanism": config.mechanism,
        "n": config.n,
        "N": config.universe_size,
        "epsilon": config.epsilon,
        "delta": config.delta,
        "beta": config.beta,
        "seed": seed,
    }
    try:
        options = ProtocolOptions(
            gamma=(
                inverse_square_gamma(config.n)
                if config.inverse_square_gamma
                else config.gamma
            ),
            sparsity=config.sparsity,
            repeats=config.repeats,
            k1_rule=config.k1_rule,
            noiseless=config.unsafe_no_noise,
        )
        summary = run_protocol(
            config.mechanism,
            records,
            config.universe_size,
            config.budget,
            config.beta,
            seed,
            options,
        )
    except ValueError as e:
        logger.error("%s run with seed %d failed: %s", config.mechanism, seed, e)
        true_index, _ = heavy_hitter(build_histogram(records, config.universe_size))
        return {
            **row,
            "reported_index": FAILURE_MARKER,
            "true_hh_index": true_index,
            "deficit": FAILURE_MARKER,
            "message_reals": 0,
            "wall_ms": 0,
        }
    result = summary.result
    return {
        **row,
        "reported_index": result.index if result else FAILURE_MARKER,
        "true_hh_index": summary.true_hh_index,
        "deficit": result.true_deficit if result else FAILURE_MARKER,
        "message_reals": summary.per_client_message_reals,
        "wall_ms": round(summary.wall_time * 1000),
    }


def run_rows(tasks: Sequence[Tuple[Any, int]], jobs: int) -> List[Dict[str, Any]]:
    """Rows of all tasks, in task order whatever the number of workers."""
    if jobs <= 1:
        return [run_seed(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(run_seed, tasks))


def write_csv(path, columns: List[str], rows: List[Dict[str, Any]]) -> None:
    with click.open_file(path or "-", "w") as output:
        writer = csv.DictWriter(output, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _execute(ctx, tasks, jobs: int) -> List[Dict[str, Any]]:
    try:
        rows = run_rows(tasks, jobs)
    except Exception as e:
        click.echo(f"Error: {e}", err=True)
        ctx.exit(1)
    return rows


def _exit_on_failures(ctx, rows: List[Dict[str, Any]]) -> None:
    failures = sum(1 for row in rows if row["reported_index"] == FAILURE_MARKER)
    if failures:
        click.echo(f"{failures} of {len(rows)} runs failed", err=True)
        ctx.exit(1)


@heavy_hitters_cli_group.command("run")
@experiment_options
@click.pass_context
def run(ctx, **params):
    """Run a mechanism on one database per seed and write one CSV row per seed.

    Runs that fail to name a heavy hitter are written with a FAIL marker and
    make the command exit with status 1.
    """
    config = _load_config(ctx, params)
    tasks = [(config, config.master_seed + k) for k in range(config.seeds)]
    rows = _execute(ctx, tasks, config.jobs)
    write_csv(config.out, RUN_COLUMNS, rows)
    _exit_on_failures(ctx, rows)


@heavy_hitters_cli_group.command("sweep")
@click.option(
    "--axis",
    type=click.Choice(sorted(SWEEP_AXES)),
    required=True,
    help="Parameter to sweep.",
)
@click.option(
    "--values",
    "values",
    required=True,
    help="Comma separated values of the swept parameter.",
)
@experiment_options
@click.pass_context
def sweep(ctx, axis, values, **params):
    """Run a mechanism for every value of a parameter and every seed."""
    config = _load_config(ctx, params)
    try:
        grid = [SWEEP_AXES[axis](v) for v in values.split(",") if v.strip()]
        if not grid:
            raise ValueError("At least one value to sweep is required")
        field_name = "universe_size" if axis == "N" else axis
        configs = [config.override(**{field_name: value}) for value in grid]
    except Exception as e:
        ctx.fail(str(e))
    tasks = [
        (point, point.master_seed + k)
        for point in configs
        for k in range(point.seeds)
    ]
    rows = _execute(ctx, tasks, config.jobs)
    for row in rows:
        row["axis"] = axis
    write_csv(config.out, SWEEP_COLUMNS, rows)
    _exit_on_failures(ctx, rows)


@heavy_hitters_cli_group.command("lowerbound")
@click.option(
    "--mechanism",
    type=click.Choice(["jl", "naive"]),
    default="jl",
    show_default=True,
    help="Mechanism estimating the count of element 1.",
)
@click.option(
    "--n",
    "n_values",
    default="100,400,1600",
    show_default=True,
    help="Comma separated numbers of clients.",
)
@click.option("--runs", type=int, default=100, show_default=True)
@click.option("--epsilon", type=float, default=0.5, show_default=True)
@click.option("--delta", type=float, default=1e-5, show_default=True)
@click.option("--beta", type=float, default=0.1, show_default=True)
@click.option("--master-seed", type=int, default=0, show_default=True)
@click.option(
    "--gamma",
    type=float,
    default=None,
    help="Projection distortion of jl, 1/8 by default.",
)
@click.option("--unsafe-no-noise", is_flag=True, help="Disable the Laplace noise.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def lowerbound(
    ctx,
    mechanism,
    n_values,
    runs,
    epsilon,
    delta,
    beta,
    master_seed,
    gamma,
    unsafe_no_noise,
    out,
):
    """Median absolute count error on uniform bit databases, one row per n."""
    from swh.heavyhitters.config import seed_from_environment
    from swh.heavyhitters.harness import (
        LOWER_BOUND_CAVEAT,
        LOWER_BOUND_GAMMA,
        lower_bound_experiment,
    )
    from swh.heavyhitters.privacy import PrivacyBudget

    try:
        if runs < 1:
            raise ValueError(f"The number of runs must be positive, got {runs}")
        ns = [int(v) for v in n_values.split(",") if v.strip()]
        if not ns or min(ns) < 1:
            raise ValueError("At least one positive number of clients is required")
        budget = PrivacyBudget(epsilon=epsilon, delta=delta)
        env_seed = seed_from_environment()
    except Exception as e:
        ctx.fail(str(e))
    if env_seed is not None:
        master_seed = env_seed
    click.echo(LOWER_BOUND_CAVEAT, err=True)
    rows = []
    for n in ns:
        try:
            median = lower_bound_experiment(
                mechanism,
                n,
                runs,
                budget,
                beta=beta,
                master_seed=master_seed,
                noiseless=unsafe_no_noise,
                gamma=LOWER_BOUND_GAMMA if gamma is None else gamma,
            )
        except Exception as e:
            click.echo(f"Error: {e}", err=True)
            ctx.exit(1)
        rows.append(
            {
                "mechanism": mechanism,
                "n": n,
                "epsilon": epsilon,
                "delta": delta,
                "runs": runs,
                "noiseless": int(unsafe_no_noise),
                "median_abs_error": median,
                "error_over_sqrt_n": median / math.sqrt(n),
            }
        )
    write_csv(out, LOWER_BOUND_COLUMNS, rows)


@heavy_hitters_cli_group.command("selftest")
@click.option(
    "--suite",
    "suites",
    multiple=True,
    type=click.Choice(
        ["gf2_oracle", "hash_enumeration", "calibration", "laplace_statistics"]
    ),
    help="Suite to run, all suites by default.",
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def selftest(ctx, suites, seed):
    """Run the property suites, print one summary line per suite."""
    from swh.heavyhitters.selftest import run_selftest

    results = run_selftest(suites or None, seed=seed)
    for result in results:
        click.echo(result.summary())
    if not all(result.passed for result in results):
        ctx.exit(1)
