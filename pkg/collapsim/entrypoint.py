r"""
The collapsim suite.

EXAMPLES::

    >>> from collapsim.test.cli import invoke
    >>> invoke(cli, "--help")  # doctest: +NORMALIZE_WHITESPACE
    Usage: cli [OPTIONS] COMMAND [ARGS]...
      The collapsim suite.
    Options:
      --help  Show this message and exit.
    Commands:
      estimates  Print scale estimates as JSON.
      plot       Plot a column of an emitted CSV file.
      presets    Print the configuration of a preset.
      run        Run a scenario and write its outputs.

"""
# ********************************************************************
#  This file is part of collapsim.
#
#        Copyright (C) 2026 the collapsim authors
#
#  collapsim is free software: you can redistribute it and/or modify
#  it under the terms of the GNU General Public License as published by
#  the Free Software Foundation, either version 3 of the License, or
#  (at your option) any later version.
#
#  collapsim is distributed in the hope that it will be useful,
#  but WITHOUT ANY WARRANTY; without even the implied warranty of
#  MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#  GNU General Public License for more details.
#
#  You should have received a copy of the GNU General Public License
#  along with collapsim. If not, see <https://www.gnu.org/licenses/>.
# ********************************************************************
import logging
import os

import click

logger = logging.getLogger("collapsim")


@click.group(help=__doc__.split("EXAMPLES")[0])
def cli():
    r"""
    Entry point of the command line interface.

    This redirects to the individual commands listed below.
    """


def _parse_emit(ctx, param, value):  # pylint: disable=unused-argument
    r"""
    Return the list of outputs requested with ``--emit``.

    EXAMPLES::

        >>> _parse_emit(None, None, "gamma, traces")
        ['gamma', 'traces']
        >>> _parse_emit(None, None, None) is None
        True

    """
    if value is None:
        return None
    from collapsim.scenario import EMIT

    flags = [flag.strip() for flag in value.split(",") if flag.strip()]
    unknown = [flag for flag in flags if flag not in EMIT]
    if unknown:
        raise click.BadParameter(
            f"Cannot emit {', '.join(unknown)}; expected any of {', '.join(EMIT)}."
        )
    return flags


seed_option = click.option(
    "--seed",
    type=click.IntRange(0, 2**64 - 1),
    default=None,
    help="Master seed; overrides the seed of the configuration and COLLAPSIM_SEED.",
)

outdir_option = click.option(
    "--out",
    "outdir",
    type=click.Path(file_okay=False),
    required=True,
    help="Write output files to this directory.",
)

workers_option = click.option(
    "--workers",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    help="Number of worker processes for ensembles.",
)

emit_option = click.option(
    "--emit",
    default=None,
    callback=_parse_emit,
    help="Comma separated list of additional outputs: traces, gamma, audits.",
)

verbose_option = click.option(
    "--verbose", is_flag=True, help="Log progress to standard error."
)


def _outfile(name, outdir):
    r"""
    Return the path of the file ``name`` in ``outdir`` and create the
    directory if needed.

    EXAMPLES::

        >>> import tempfile
        >>> with tempfile.TemporaryDirectory() as directory:
        ...     outname = _outfile("summary.json", os.path.join(directory, "out"))
        ...     os.path.isdir(os.path.join(directory, "out")), os.path.basename(outname)
        (True, 'summary.json')

    """
    os.makedirs(outdir, exist_ok=True)
    return os.path.join(outdir, name)


def _versions():
    r"""
    Return the versions of the packages that determine the results of a
    run.
    """
    from importlib.metadata import PackageNotFoundError, version

    versions = {}
    for package in ("collapsim", "numpy", "scipy", "pandas", "astropy"):
        try:
            versions[package] = version(package)
        except PackageNotFoundError:
            versions[package] = None
    return versions


def _manifest(config):
    return {
        "scenario": config.name,
        "seed": config.seed,
        "sha256": config.sha256,
        "versions": _versions(),
        "config": config.data,
    }


def _create_package(csvnames, outdir):
    r"""
    Return a data package describing the CSV files ``csvnames`` in
    ``outdir``.

    This is a helper method for :meth:`_write_outputs`.
    """
    from frictionless import Package, Resource

    package = Package(
        resources=[Resource(path=csvname, basepath=outdir) for csvname in csvnames],
    )
    package.infer()
    return package


def _write_metadata(out, metadata):
    r"""
    Write ``metadata`` to the ``out`` stream in JSON format.

    This is a helper method for :meth:`_write_outputs`.

    EXAMPLES::

        >>> import io, math
        >>> out = io.StringIO()
        >>> _write_metadata(out, {"frequency": math.nan, "steps": 3})
        >>> print(out.getvalue(), end="")
        {
            "frequency": null,
            "steps": 3
        }

    """

    def defaultconverter(item):
        r"""
        Return ``item`` that Python's json package does not know how to
        serialize in a format that Python's json package does know how to
        serialize.
        """
        import numpy as np

        if isinstance(item, np.integer):
            return int(item)
        if isinstance(item, np.floating):
            return float(item)
        if isinstance(item, np.ndarray):
            return item.tolist()

        raise TypeError(f"Cannot serialize {item} of type {type(item)} to JSON.")

    import json

    json.dump(
        _sanitize(metadata),
        out,
        default=defaultconverter,
        ensure_ascii=False,
        indent=4,
        allow_nan=False,
    )
    # json.dump does not terminate files with a newline.
    out.write("\n")


def _sanitize(value):
    r"""
    Return ``value`` with non-finite floats replaced by ``None``.
    """
    import math

    if isinstance(value, dict):
        return {key: _sanitize(item) for (key, item) in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(item) for item in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _write_outputs(result, outdir):
    r"""
    Write the manifest, summary, tables and data package of ``result`` to
    ``outdir``.
    """
    config = result.config

    with open(_outfile("manifest.json", outdir), mode="w", encoding="utf-8") as out:
        _write_metadata(out, _manifest(config))

    with open(_outfile("summary.json", outdir), mode="w", encoding="utf-8") as out:
        _write_metadata(
            out,
            {
                "scenario": config.name,
                "seed": config.seed,
                "passed": result.report.passed,
                "failed": result.report.failed,
                **result.summary,
            },
        )

    csvnames = sorted(result.tables)
    for csvname in csvnames:
        result.tables[csvname].to_csv(
            _outfile(csvname, outdir), index=False, encoding="utf-8"
        )

    if "audits" in config.emit:
        with open(_outfile("audits.json", outdir), mode="w", encoding="utf-8") as out:
            _write_metadata(out, result.report.to_dict())

    package = _create_package(csvnames, outdir)
    with open(_outfile("datapackage.json", outdir), mode="w", encoding="utf-8") as out:
        _write_metadata(out, package.to_dict())


@click.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="Scenario file in YAML format or the manifest.json of a previous run.",
)
@seed_option
@outdir_option
@workers_option
@emit_option
@verbose_option
def run(config_path, seed, outdir, workers, emit, verbose):
    r"""
    Run a scenario and write its outputs.

    The exit code is 1 if an audit of the scenario fails and 2 if the
    configuration is invalid.
    \f

    EXAMPLES::

        >>> from collapsim.test.cli import invoke, ScenarioFiles
        >>> with ScenarioFiles("single_detector_reduced") as files:
        ...     invoke(cli, "run", "--config", files.config("single_detector_reduced"), "--out", files.path("out"))
        ...     files.outputs()
        ...     files.summary()["passed"]
        ['checkpoints.csv', 'datapackage.json', 'manifest.json', 'outcomes.csv', 'summary.json']
        True

    The seed flag overrides the seed of the file and the outputs do not
    depend on the number of workers::

        >>> with ScenarioFiles("single_detector_reduced") as files:
        ...     config = files.config("single_detector_reduced")
        ...     invoke(cli, "run", "--config", config, "--seed", "5", "--out", files.path("a"))
        ...     invoke(cli, "run", "--config", config, "--seed", "5", "--workers", "2", "--out", files.path("b"))
        ...     [open(files.path("a", name), "rb").read() == open(files.path("b", name), "rb").read() for name in ("outcomes.csv", "summary.json", "manifest.json")]
        [True, True, True]

    A manifest reproduces its run::

        >>> with ScenarioFiles("single_detector_reduced") as files:
        ...     invoke(cli, "run", "--config", files.config("single_detector_reduced"), "--emit", "traces,audits", "--out", files.path("a"))
        ...     invoke(cli, "run", "--config", files.path("a", "manifest.json"), "--out", files.path("b"))
        ...     files.outputs("b")
        ...     open(files.path("a", "traces.csv"), "rb").read() == open(files.path("b", "traces.csv"), "rb").read()
        ['audits.json', 'checkpoints.csv', 'datapackage.json', 'manifest.json', 'outcomes.csv', 'summary.json', 'traces.csv']
        True

    A missing configuration is a usage error and nothing is written::

        >>> with ScenarioFiles() as files:  # doctest: +ELLIPSIS
        ...     invoke(cli, "run", "--config", files.config("missing"), "--out", files.path("out"))
        ...     os.path.exists(files.path("out"))
        Usage: cli run [OPTIONS]
        Try 'cli run --help' for help.
        <BLANKLINE>
        Error: Invalid value for '--config': ... does not exist.
        exit code: 2
        False

    Unknown configuration keys are rejected::

        >>> with ScenarioFiles("unknown_key") as files:
        ...     invoke(cli, "run", "--config", files.config("unknown_key"), "--out", files.path("out"))
        Usage: cli run [OPTIONS]
        Try 'cli run --help' for help.
        <BLANKLINE>
        Error: Invalid value for '--config': Unknown configuration key 'walk.temperature'.
        exit code: 2

    Jittered detectors in both branches decide::

        >>> with ScenarioFiles("dual_detector_jittered") as files:
        ...     invoke(cli, "run", "--config", files.config("dual_detector_jittered"), "--out", files.path("out"))
        ...     files.summary()["passed"]
        True

    A failing audit sets the exit code::

        >>> with ScenarioFiles("strict") as files:
        ...     invoke(cli, "run", "--config", files.config("strict"), "--out", files.path("out"))
        ...     files.summary()["passed"]
        Audits failed in scenario single_detector_reduced: born rule
        exit code: 1
        False

    """
    from collapsim.exceptions import ScenarioConfigError
    from collapsim.scenario import ScenarioConfig, run_scenario

    if verbose:
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")

    try:
        config = ScenarioConfig.from_file(config_path, seed=seed, emit=emit)
    except ScenarioConfigError as e:
        raise click.BadParameter(str(e), param_hint="'--config'") from e

    result = run_scenario(config, workers=workers)
    _write_outputs(result, outdir)
    logger.info(f"Wrote the outputs of scenario {config.name} to {outdir}.")

    if not result.report.passed:
        click.echo(
            f"Audits failed in scenario {config.name}: {', '.join(result.report.failed)}",
            err=True,
        )
        raise SystemExit(1)


@click.command()
@click.argument("name", required=False)
def presets(name):
    r"""
    Print the configuration of a preset.

    Without a NAME, the available presets are listed.
    \f

    EXAMPLES::

        >>> from collapsim.test.cli import invoke
        >>> invoke(cli, "presets")
        single_detector_reduced (reduced)
        dual_detector_reduced (reduced)
        single_detector_grid (grid)
        dual_detector_grid (grid)
        scattering_gamma_probe (probe)
        conservation_2d (conservation)
        energy_deviation_sweep (sweep)
        beam_splitter_entanglement (estimates)

    ::

        >>> invoke(cli, "presets", "beam_splitter_entanglement")  # doctest: +ELLIPSIS
        scenario: beam_splitter_entanglement
        seed: null
        emit: []
        ...
        audit:
          sigma: 3.0
        ...

    ::

        >>> invoke(cli, "presets", "cat")  # doctest: +ELLIPSIS
        Usage: cli presets [OPTIONS] [NAME]
        ...
        Error: Invalid value for 'NAME': Unknown scenario 'cat'; ...
        exit code: 2

    """
    from collapsim.exceptions import ScenarioConfigError
    from collapsim.scenario import KINDS, preset

    if name is None:
        for scenario, kind in KINDS.items():
            click.echo(f"{scenario} ({kind})")
        return

    try:
        configuration = preset(name)
    except ScenarioConfigError as e:
        raise click.BadParameter(str(e), param_hint="'NAME'") from e

    import yaml

    click.echo(yaml.safe_dump(configuration, sort_keys=False), nl=False)


@click.command()
@click.option("--ratio", type=float, default=None, help="Coupling V̄/(m_j + m_k)c².")
@click.option("--mass-energy", type=float, default=None, help="Rest energy (m_j + m_k)c² in J.")
@click.option("--delta-t", type=float, default=None, help="Interaction time in s.")
@click.option("--step-size", type=float, default=None, help="Step size of a bounded walk.")
@click.option("--delta", type=float, default=None, help="Fraction split off by a beam splitter.")
def estimates(ratio, mass_energy, delta_t, step_size, delta):
    r"""
    Print scale estimates as JSON.
    \f

    EXAMPLES::

        >>> from collapsim.test.cli import invoke
        >>> invoke(cli, "estimates", "--mass-energy", "1e-13", "--delta-t", "1e-17", "--step-size", "5e-4")  # doctest: +ELLIPSIS
        {
            "reference_ratio": 5.32513...e-05,
            "max_ratio": 0.000532513...,
            "interaction_time": 2.4188...e-17,
            "perturbation_ratio": 0.000105457...,
            "steps": 4000000
        }

    ::

        >>> invoke(cli, "estimates", "--delta", "2")  # doctest: +ELLIPSIS
        Usage: cli estimates [OPTIONS]
        ...
        Error: Invalid value: The splitting fraction must lie in (0, 1) but got 2.0.
        exit code: 2

    """
    from collapsim.branchwalk import entanglement_estimate, scale_estimates
    from collapsim.exceptions import DomainError

    try:
        values = scale_estimates(
            ratio=ratio, mass_energy=mass_energy, delta_t=delta_t, step_size=step_size
        )
        if delta is not None:
            values["entanglement"] = entanglement_estimate(delta)
    except DomainError as e:
        raise click.BadParameter(str(e)) from e

    import sys

    _write_metadata(sys.stdout, values)


@click.command()
@click.argument("csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--x", "x", default=None, help="Column on the horizontal axis, by default the first one.")
@click.option("--y", "y", multiple=True, help="Columns to plot, by default all others.")
@click.option("--out", "outfile", type=click.Path(dir_okay=False), default=None, help="Save the plot to this file instead of showing it.")
def plot(csv, x, y, outfile):
    r"""
    Plot a column of an emitted CSV file.
    \f

    EXAMPLES::

        >>> from collapsim.test.cli import invoke, ScenarioFiles
        >>> with ScenarioFiles("beam_splitter") as files:
        ...     invoke(cli, "run", "--config", files.config("beam_splitter"), "--out", files.directory)
        ...     invoke(cli, "plot", files.path("entanglement.csv"), "--out", files.path("entanglement.png"))
        ...     os.path.exists(files.path("entanglement.png"))
        True

    """
    import pandas as pd

    frame = pd.read_csv(csv)
    x = x or frame.columns[0]
    columns = list(y) or [column for column in frame.columns if column != x]
    missing = [column for column in [x, *columns] if column not in frame.columns]
    if missing:
        raise click.BadParameter(f"No columns {', '.join(missing)} in {csv}.")

    import matplotlib

    if outfile is not None:
        matplotlib.use("Agg")

    import matplotlib.pyplot as plt

    ax = frame.plot(x=x, y=columns)
    ax.set_xlabel(x)
    if outfile is None:
        plt.show()
    else:
        ax.figure.savefig(outfile)
        plt.close(ax.figure)


cli.add_command(run)
cli.add_command(presets)
cli.add_command(estimates)
cli.add_command(plot)

# Register command docstrings for doctesting.
# Since commands are not functions anymore due to their decorator, their
# docstrings would otherwise be ignored.
__test__ = {
    name: command.__doc__ for (name, command) in cli.commands.items() if command.__doc__
}
