r"""
Helpers for testing the command line interface.

Scenario runs write into directories and report failures through their exit
code, so these helpers copy scenario files to a temporary directory, read
back what a run wrote there, and print the exit code of failing invocations.

"""
# *********************************************************************
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
# *********************************************************************
import os


def invoke(command, *args):
    r"""
    Invoke the click ``command`` with the given list of string arguments.

    >>> import click
    >>> @click.command()
    ... def hello(): print("Hello World")
    >>> invoke(hello)
    Hello World

    The exit code is printed when it signals a failure::

    >>> @click.command()
    ... def fails(): raise SystemExit(1)
    >>> invoke(fails)
    exit code: 1

    Unexpected errors are not caught::

    >>> @click.command()
    ... def broken(): raise Exception("expected error")
    >>> invoke(broken)
    Traceback (most recent call last):
    ...
    Exception: expected error

    """
    from click.testing import CliRunner

    invocation = CliRunner().invoke(command, args, catch_exceptions=False)
    output = invocation.output.strip()
    if output:
        print(output)
    if invocation.exit_code:
        print(f"exit code: {invocation.exit_code}")


class ScenarioFiles:
    r"""
    A temporary directory with copies of the scenario files ``names`` from
    ``test/data`` to run the command line interface on.

    EXAMPLES::

        >>> with ScenarioFiles("single_detector_reduced") as files:
        ...     os.listdir(files.directory)
        ...     os.path.basename(files.config("single_detector_reduced"))
        ['single_detector_reduced.yaml']
        'single_detector_reduced.yaml'

    The directory is removed afterwards::

        >>> os.path.exists(files.directory)
        False

    Only existing scenario files can be copied::

        >>> ScenarioFiles("missing").__enter__()  # doctest: +ELLIPSIS
        Traceback (most recent call last):
        ...
        FileNotFoundError: No scenario file missing.yaml in .../test/data.

    """

    DATA = os.path.join(os.path.dirname(__file__), "..", "..", "test", "data")

    def __init__(self, *names):
        self._names = names
        self._tmpdir = None

    @property
    def directory(self):
        return self._tmpdir.name

    def __enter__(self):
        import shutil
        import tempfile

        sources = [os.path.join(self.DATA, f"{name}.yaml") for name in self._names]
        for source in sources:
            if not os.path.exists(source):
                raise FileNotFoundError(
                    f"No scenario file {os.path.basename(source)} in {os.path.normpath(self.DATA)}."
                )

        self._tmpdir = tempfile.TemporaryDirectory()
        for source in sources:
            shutil.copy(source, self._tmpdir.name)
        return self

    def __exit__(self, *args):
        self._tmpdir.cleanup()

    def path(self, *parts):
        return os.path.join(self.directory, *parts)

    def config(self, name):
        r"""
        Return the path of the copied scenario file ``name``.
        """
        return self.path(f"{name}.yaml")

    def outputs(self, run="out"):
        r"""
        Return the sorted names of the files written into the output
        directory ``run``.
        """
        return sorted(os.listdir(self.path(run)))

    def summary(self, run="out"):
        r"""
        Return the parsed ``summary.json`` written into the output directory
        ``run``.
        """
        import json

        with open(self.path(run, "summary.json"), encoding="utf-8") as summary:
            return json.load(summary)
