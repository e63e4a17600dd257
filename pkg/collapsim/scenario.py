r"""
Scenario configurations and their execution.

A scenario is named after one of the built-in presets in :data:`PRESETS`.
A configuration file only needs to name the preset and the values it
changes; everything else is taken from the preset::

    scenario: single_detector_reduced
    seed: 7
    walk:
      p0: 0.3

EXAMPLES::

    >>> config = ScenarioConfig.from_dict({"scenario": "single_detector_reduced", "seed": 7, "ensemble": {"size": 200}, "walk": {"p0": 0.3}, "audit": {"sigma": 5}})
    >>> config.kind, config.seed, config.walk["p0"], config.walk["dt"]
    ('reduced', 7, 0.3, 0.01)

    >>> result = run_scenario(config)
    >>> result.report.passed
    True
    >>> sorted(result.tables)
    ['checkpoints.csv', 'outcomes.csv']

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
import copy
import logging
import math
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from collapsim.exceptions import ScenarioConfigError

logger = logging.getLogger("scenario")

EMIT = ("traces", "gamma", "audits")

# Every configuration key with its default. Presets and files may only set
# keys that appear here.
DEFAULTS = {
    "scenario": None,
    "seed": None,
    "emit": [],
    "ensemble": {"size": 200, "chunk": 50},
    "grid": {
        "dims_per_particle": 1,
        "points_per_axis": 128,
        "extent": 20.0,
        "masses": [1.0, 1.0],
        "absorbing_width": 0.0,
        "memory_budget": 2**30,
    },
    "potential": {
        "family": "gaussian_well",
        "depth": -1.0,
        "range": 1.0,
        "softening": None,
    },
    "collapse": {
        "kappa": 1e-4,
        "E0": 0.0,
        "guard": 1e-12,
        "rest_energy": None,
        "frame": "literal",
    },
    "state": {"preset": "two_branch", "parameters": {}},
    "evolution": {
        "dt": 0.005,
        "steps": 1000,
        "record_every": 1,
        "termination_eps": None,
        "split": 0.0,
        "target": "left",
    },
    "walk": {
        "p0": 0.5,
        "kappa1": 1.0,
        "kappa2": 0.0,
        "schedule": {
            "kind": "constant",
            "rate": 1.0,
            "width": 1.0,
            "period": 2.0,
            "count": 1,
            "start": 0.0,
        },
        "dt": 0.01,
        "max_steps": 100000,
        "termination_eps": 0.01,
        "step_size": None,
        "onset_jitter": 0.0,
        "height_jitter": 0.0,
        "sample_every": 100,
        "checkpoints": [],
    },
    "audit": {
        "sigma": 3.0,
        "steps": 0,
        "drift_tolerance": None,
        "gamma_interval": [1.0, 3.0],
        "frustration_tolerance": 1e-6,
        "band_fraction": 0.95,
        "absorbed_fraction": 0.99,
        "absorbed_tolerance": 1e-6,
        "terminated_fraction": 0.9,
        "kappas": [1e-4, 2e-4, 4e-4],
        "deltas": [0.001, 0.01, 0.05, 0.1, 0.2, 0.5],
    },
}

# Keys whose values are passed on without validation.
FREE_FORM = {("state", "parameters")}

_SINGLE_DETECTOR_GRID = {
    "ensemble": {"size": 200, "chunk": 10},
    "grid": {
        "points_per_axis": 128,
        "extent": 28.0,
        "masses": [20.0, 20.0],
        "absorbing_width": 2.0,
    },
    "potential": {"family": "gaussian_well", "depth": -1.0, "range": 1.0},
    "collapse": {"kappa": 1e-2, "E0": "auto", "frame": "interacting"},
    "state": {
        "preset": "two_branch",
        "parameters": {
            "weights": [0.3, 0.7],
            "separation": 20.0,
            "width": 1.5,
            "detector": -9.2,
            "detector_width": 1.0,
        },
    },
    "evolution": {
        "dt": 0.005,
        "steps": 20000,
        "record_every": 100,
        "termination_eps": 0.01,
        "target": "left",
    },
    "audit": {"steps": 5},
}

PRESETS = {
    "single_detector_reduced": {
        "ensemble": {"size": 2000, "chunk": 500},
        "walk": {
            "p0": 0.5,
            "kappa1": 1.0,
            "schedule": {"kind": "constant", "rate": 1.0},
            "dt": 0.01,
            "max_steps": 100000,
            "checkpoints": [0, 50, 100, 200, 500, 1000, 2000, 5000],
        },
    },
    "dual_detector_reduced": {
        "ensemble": {"size": 1000, "chunk": 500},
        "walk": {
            "p0": 0.5,
            "kappa1": 1.0,
            "kappa2": 1.0,
            "schedule": {"kind": "pulses", "width": 1.0, "period": 2.0, "count": 100},
            "dt": 0.01,
            "max_steps": 20000,
            "onset_jitter": 0.0,
        },
    },
    "single_detector_grid": _SINGLE_DETECTOR_GRID,
    "dual_detector_grid": {
        **_SINGLE_DETECTOR_GRID,
        "ensemble": {"size": 100, "chunk": 10},
        "state": {
            "preset": "two_branch",
            "parameters": {
                "weights": [0.5, 0.5],
                "separation": 20.0,
                "width": 1.5,
                "detector": -9.2,
                "detector_width": 1.0,
                "mirrored": True,
            },
        },
    },
    "scattering_gamma_probe": {
        "grid": {"points_per_axis": 256, "extent": 32.0},
        "potential": {"family": "gaussian_well", "depth": -3.0, "range": 4.0},
        "collapse": {"kappa": 1e-4, "E0": 0.0},
        "state": {
            "preset": "gaussian_packet",
            "parameters": {"centers": [-10.0, 10.0], "wavevectors": [1.0, -1.0], "width": 2.0},
        },
        "evolution": {"dt": 0.005, "steps": 4000, "record_every": 10},
        "audit": {"steps": 5, "gamma_interval": [1.0, 3.0]},
    },
    "conservation_2d": {
        "grid": {"dims_per_particle": 2, "points_per_axis": 32, "extent": 12.0},
        "potential": {"family": "gaussian_well", "depth": -1.0, "range": 1.5},
        "collapse": {"kappa": 1e-3, "E0": 0.0},
        "state": {
            "preset": "rotating_pair",
            "parameters": {"width": 1.5, "relative_width": 1.5, "winding": 1},
        },
        "evolution": {"dt": 0.01, "steps": 10},
        "audit": {"drift_tolerance": 1e-6},
    },
    "energy_deviation_sweep": {
        "grid": {"points_per_axis": 128, "extent": 16.0},
        "potential": {"family": "gaussian_well", "depth": -1.0, "range": 2.0},
        "collapse": {"kappa": 1e-4, "E0": 0.0},
        "state": {
            "preset": "gaussian_packet",
            "parameters": {"centers": [-3.0, 3.0], "wavevectors": [1.0, -1.0], "width": 1.5},
        },
        "evolution": {"dt": 0.005, "steps": 200},
        "audit": {"kappas": [1e-4, 2e-4, 4e-4]},
    },
    "beam_splitter_entanglement": {
        "collapse": {"kappa": 1e-4},
        "walk": {"step_size": 5e-4},
        "audit": {"deltas": [0.001, 0.01, 0.05, 0.1, 0.2, 0.5]},
    },
}

KINDS = {
    "single_detector_reduced": "reduced",
    "dual_detector_reduced": "reduced",
    "single_detector_grid": "grid",
    "dual_detector_grid": "grid",
    "scattering_gamma_probe": "probe",
    "conservation_2d": "conservation",
    "energy_deviation_sweep": "sweep",
    "beam_splitter_entanglement": "estimates",
}


def _validate(data, schema, path=()):
    r"""
    Return a copy of ``data`` in which numbers written as strings have been
    converted; raise if ``data`` contains keys that do not appear in
    ``schema``.

    EXAMPLES::

        >>> _validate({"walk": {"dt": "1e-3"}}, DEFAULTS)
        {'walk': {'dt': 0.001}}
        >>> _validate({"walk": {"dtt": 0.1}}, DEFAULTS)
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: Unknown configuration key 'walk.dtt'.

    """
    if not isinstance(data, dict):
        raise ScenarioConfigError(
            f"Configuration section {'.'.join(path) or 'root'!r} must be a mapping."
        )

    validated = {}
    for key, value in data.items():
        location = path + (str(key),)
        if key not in schema:
            raise ScenarioConfigError(f"Unknown configuration key {'.'.join(location)!r}.")
        default = schema[key]
        if location in FREE_FORM:
            if not isinstance(value, dict):
                raise ScenarioConfigError(f"{'.'.join(location)!r} must be a mapping.")
            validated[key] = copy.deepcopy(value)
        elif isinstance(default, dict):
            validated[key] = _validate(value, default, location)
        elif isinstance(value, str) and not isinstance(default, str) and value != "auto" and location != ("seed",):
            # YAML reads exponents without a decimal point such as 1e-4 as strings.
            try:
                validated[key] = float(value)
            except ValueError as e:
                if default is not None:
                    raise ScenarioConfigError(
                        f"{'.'.join(location)!r} must be a number but got {value!r}."
                    ) from e
                validated[key] = value
        else:
            validated[key] = copy.deepcopy(value)
    return validated


def _resolve_seed(flag, configured):
    r"""
    Return the master seed: the command line flag, then the configured seed,
    then the environment variable ``COLLAPSIM_SEED``, then 0.

    EXAMPLES::

        >>> _resolve_seed(3, 5), _resolve_seed(None, 5)
        (3, 5)
        >>> _resolve_seed(None, -1)
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: The seed must be an integer in [0, 2**64) but got -1.

    """
    for seed in (flag, configured, os.environ.get("COLLAPSIM_SEED")):
        if seed is None or seed == "":
            continue
        try:
            value = int(seed)
        except (TypeError, ValueError) as e:
            raise ScenarioConfigError(f"The seed must be an integer but got {seed!r}.") from e
        if not 0 <= value < 2**64:
            raise ScenarioConfigError(
                f"The seed must be an integer in [0, 2**64) but got {value}."
            )
        return value
    return 0


def preset(name):
    r"""
    Return the configuration of the preset ``name`` with all defaults filled
    in.

    EXAMPLES::

        >>> preset("dual_detector_grid")["state"]["parameters"]["mirrored"]
        True
        >>> preset("cat")
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: Unknown scenario 'cat'; expected one of single_detector_reduced, dual_detector_reduced, single_detector_grid, dual_detector_grid, scattering_gamma_probe, conservation_2d, energy_deviation_sweep, beam_splitter_entanglement.

    """
    if name not in PRESETS:
        raise ScenarioConfigError(
            f"Unknown scenario {name!r}; expected one of {', '.join(PRESETS)}."
        )
    from mergedeep import Strategy, merge

    return merge(
        {"scenario": name},
        copy.deepcopy(DEFAULTS),
        copy.deepcopy(PRESETS[name]),
        {"scenario": name},
        strategy=Strategy.REPLACE,
    )


def ground_state_energy(grid, potential):
    r"""
    Return the energy of the pair ground state of ``potential`` on ``grid``.
    """
    from collapsim.grid import init_wavefunction
    from collapsim.operators import observables

    ground = init_wavefunction(grid, "pair_ground_state", potential=potential)
    return float(observables(ground, potential).mean_H)


class ScenarioConfig:
    r"""
    A fully resolved and validated scenario configuration.

    Use :meth:`from_dict` or :meth:`from_file` to create a configuration. The
    resolved configuration in :attr:`data` contains every key so that it
    reproduces a run on its own.

    EXAMPLES::

        >>> config = ScenarioConfig.from_dict({"scenario": "energy_deviation_sweep", "seed": 1})
        >>> config.grid_spec.shape
        (128, 128)
        >>> config.potential
        PotentialSpec('gaussian_well', depth=-1.0, range=2.0, softening=None)
        >>> len(config.sha256)
        64

    Invalid values are reported before anything is computed::

        >>> ScenarioConfig.from_dict({"scenario": "energy_deviation_sweep", "grid": {"points_per_axis": 100}})
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: points_per_axis must be a power of two but got 100.

    ::

        >>> ScenarioConfig.from_dict({"scenario": "energy_deviation_sweep", "state": {"parameters": {"spin": 1}}})
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: Invalid parameters for the initial state 'gaussian_packet': ...

    """

    def __init__(self, data):
        self.data = data

    @classmethod
    def from_dict(cls, data, seed=None, emit=None):
        r"""
        Return the configuration described by ``data`` merged on top of its
        preset.

        The ``seed`` and ``emit`` arguments override the corresponding keys.
        """
        if not isinstance(data, dict):
            raise ScenarioConfigError("A scenario configuration must be a mapping.")
        data = _validate(data, DEFAULTS)
        name = data.get("scenario")
        resolved = preset(name)

        state = data.get("state", {})
        if "preset" in state and state["preset"] != resolved["state"]["preset"]:
            resolved["state"]["parameters"] = {}

        from mergedeep import Strategy, merge

        merge(resolved, data, strategy=Strategy.REPLACE)

        resolved["seed"] = _resolve_seed(seed, resolved["seed"])
        if emit is not None:
            resolved["emit"] = list(emit)
        unknown = [flag for flag in resolved["emit"] if flag not in EMIT]
        if unknown:
            raise ScenarioConfigError(
                f"Cannot emit {', '.join(unknown)}; expected any of {', '.join(EMIT)}."
            )
        resolved["emit"] = [flag for flag in EMIT if flag in resolved["emit"]]

        config = cls(resolved)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path, seed=None, emit=None):
        r"""
        Return the configuration stored in the YAML file ``path``.

        A ``manifest.json`` written by a previous run is accepted as well.

        EXAMPLES::

            >>> from collapsim.test.cli import ScenarioFiles
            >>> with ScenarioFiles("single_detector_reduced") as files:
            ...     config = ScenarioConfig.from_file(files.config("single_detector_reduced"))
            >>> config.name, config.ensemble["size"]
            ('single_detector_reduced', 200)

        """
        import yaml

        with open(path, encoding="utf-8") as source:
            try:
                data = yaml.load(source, Loader=yaml.SafeLoader)
            except yaml.YAMLError as e:
                raise ScenarioConfigError(f"Could not parse {path}: {e}") from e

        if isinstance(data, dict) and "config" in data and "sha256" in data:
            data = data["config"]
        return cls.from_dict(data, seed=seed, emit=emit)

    def validate(self):
        r"""
        Create the objects this scenario needs so that invalid values are
        reported before a run starts.
        """
        if self.kind == "reduced":
            self.walk_params  # pylint: disable=pointless-statement
            if not 0 <= self.walk["p0"] <= 1:
                raise ScenarioConfigError(
                    f"walk.p0 must lie in [0, 1] but got {self.walk['p0']}."
                )
        elif self.kind != "estimates":
            self.grid_spec  # pylint: disable=pointless-statement
            self.potential  # pylint: disable=pointless-statement
            if self.collapse["E0"] == "auto":
                self.data["collapse"]["E0"] = ground_state_energy(self.grid_spec, self.potential)
                logger.info(f"Resolved the ground state energy E0={self.collapse['E0']}.")
            self.collapse_params  # pylint: disable=pointless-statement
            self.initial_state  # pylint: disable=pointless-statement
            if self.ensemble["size"] < 1 or self.ensemble["chunk"] < 1:
                raise ScenarioConfigError("Ensemble size and chunk must be positive.")

    @property
    def name(self):
        return self.data["scenario"]

    @property
    def kind(self):
        return KINDS[self.name]

    @property
    def seed(self):
        return self.data["seed"]

    @property
    def emit(self):
        return tuple(self.data["emit"])

    def __getattr__(self, section):
        if section in DEFAULTS and isinstance(DEFAULTS[section], dict):
            return self.__dict__["data"][section]
        raise AttributeError(section)

    @cached_property
    def grid_spec(self):
        from collapsim.grid import GridSpec

        return GridSpec(**{**self.grid, "masses": tuple(self.grid["masses"])})

    @cached_property
    def potential(self):
        from collapsim.operators import PotentialSpec

        return PotentialSpec(**self.data["potential"])

    @cached_property
    def collapse_params(self):
        from collapsim.collapse import CollapseParams

        return CollapseParams(**self.collapse)

    @cached_property
    def initial_state(self):
        from collapsim.grid import init_wavefunction

        name = self.state["preset"]
        parameters = dict(self.state["parameters"])
        if name == "pair_ground_state":
            parameters.setdefault("potential", self.potential)
        try:
            return init_wavefunction(self.grid_spec, name, **parameters)
        except TypeError as e:
            raise ScenarioConfigError(
                f"Invalid parameters for the initial state {name!r}: {e}"
            ) from e

    @cached_property
    def regions(self):
        from collapsim.grid import Region

        left = Region.half_space("left", axis=0, threshold=self.evolution["split"])
        return (left, left.complement("right"))

    @property
    def target(self):
        return self.evolution["target"]

    @property
    def mirrored(self):
        return bool(self.state["parameters"].get("mirrored", False))

    @cached_property
    def walk_params(self):
        r"""
        Return the :class:`~collapsim.branchwalk.WalkParams` of the ``walk``
        section.

        EXAMPLES::

            >>> config = ScenarioConfig.from_dict({"scenario": "dual_detector_reduced"})
            >>> config.walk_params.gamma_schedule
            PulseSchedule(100 pulses of width 1.0)

        """
        from collapsim.branchwalk import ConstantSchedule, PulseSchedule, WalkParams

        walk = self.walk
        schedule = walk["schedule"]
        if schedule["kind"] == "constant":
            rates = ConstantSchedule(schedule["rate"])
        elif schedule["kind"] == "pulses":
            rates = PulseSchedule.train(
                width=schedule["width"],
                period=schedule["period"],
                count=int(schedule["count"]),
                start=schedule["start"],
            )
        else:
            raise ScenarioConfigError(
                f"Unknown schedule {schedule['kind']!r}; expected 'constant' or 'pulses'."
            )
        return WalkParams(
            kappa1=walk["kappa1"],
            kappa2=walk["kappa2"],
            gamma_schedule=rates,
            dt=walk["dt"],
            max_steps=int(walk["max_steps"]),
            termination_eps=walk["termination_eps"],
            step_size=walk["step_size"],
            onset_jitter=walk["onset_jitter"],
            height_jitter=walk["height_jitter"],
            sample_every=int(walk["sample_every"]),
            checkpoints=walk["checkpoints"],
        )

    def canonical_json(self):
        import json

        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def sha256(self):
        import hashlib

        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def to_yaml(self):
        import yaml

        return yaml.safe_dump(self.data, sort_keys=False)

    def __repr__(self):
        return f"ScenarioConfig({self.name!r}, seed={self.seed})"


@dataclass
class ScenarioResult:
    r"""
    The outcome of :func:`run_scenario`: a JSON serializable ``summary``,
    the audit ``report``, and data ``tables`` by file name.
    """
    config: ScenarioConfig
    summary: dict
    report: object
    tables: dict = field(default_factory=dict)


def _born_check(frequency, weight, trials, sigma):
    from collapsim.audit import AuditCheck

    if trials == 0 or math.isnan(frequency):
        return AuditCheck.create("born rule", math.nan, sigma)
    error = math.sqrt(weight * (1 - weight) / trials)
    if error == 0:
        return AuditCheck.create("born rule", abs(frequency - weight), 0.0)
    return AuditCheck.create("born rule", abs(frequency - weight) / error, sigma)


def _pooled(report, summary):
    r"""
    Return ``report`` extended by one check per audit that ran on the
    trajectories of ``summary``.
    """
    from collapsim.audit import AuditCheck, AuditReport

    checks = [
        AuditCheck(name, total["max_residual"], math.nan, total["failed"] == 0)
        for (name, total) in summary.audit_totals().items()
    ]
    return report + AuditReport(checks)


def _emitted(config, summary):
    import pandas as pd

    tables = {}
    if "traces" in config.emit:
        frames = []
        for stats in summary.completed:
            if stats.trace is None:
                continue
            if isinstance(stats.trace, tuple):
                every = config.walk["sample_every"]
                frame = pd.DataFrame(
                    {"step": np.arange(len(stats.trace)) * every, "mu2": stats.trace}
                )
            else:
                frame = stats.trace.copy()
            frame.insert(0, "trajectory", stats.index)
            frames.append(frame)
        if frames:
            tables["traces.csv"] = pd.concat(frames, ignore_index=True)
    if "gamma" in config.emit:
        frames = []
        for stats in summary.completed:
            if stats.gamma is not None:
                frame = stats.gamma.copy()
                frame.insert(0, "trajectory", stats.index)
                frames.append(frame)
        if frames:
            tables["gamma.csv"] = pd.concat(frames, ignore_index=True)
    return tables


def _run_reduced(config, workers):
    import pandas as pd

    from collapsim.audit import AuditReport, martingale_check, threshold_check
    from collapsim.ensemble import run_ensemble

    summary = run_ensemble(config, workers=workers)
    walk, audit = config.walk, config.audit
    completed = len(summary.completed)
    report = AuditReport()

    if walk["kappa2"]:
        if walk["onset_jitter"] or walk["height_jitter"]:
            absorbed = (completed - summary.nonterminated) / completed if completed else 0.0
            report = report + AuditReport(
                [threshold_check("absorbed fraction", max(audit["absorbed_fraction"] - absorbed, 0), 0)]
            )
        else:
            band = summary.in_band_fraction
            report = report + AuditReport(
                [
                    threshold_check("absorbed", completed - summary.nonterminated, 0),
                    threshold_check("in band fraction", max(audit["band_fraction"] - band, 0), 0),
                ]
            )
    else:
        frequency, _ = summary.frequency("interacting")
        terminated = completed - summary.nonterminated
        report = report + AuditReport(
            [_born_check(frequency, walk["p0"], terminated, audit["sigma"])]
        )

    tables = {"outcomes.csv": summary.outcome_table()}
    checkpoints = summary.checkpoints()
    if walk["checkpoints"] and completed:
        if completed >= 100:
            report = report + martingale_check(checkpoints, initial=walk["p0"], sigma=audit["sigma"])
        tables["checkpoints.csv"] = pd.DataFrame(
            {
                "step": sorted(int(step) for step in walk["checkpoints"]),
                "mean": checkpoints.mean(axis=0),
                "stderr": checkpoints.std(axis=0, ddof=1) / math.sqrt(completed)
                if completed > 1
                else np.nan,
            }
        )
    tables.update(_emitted(config, summary))
    return ScenarioResult(config, summary.to_dict(target="interacting"), report, tables)


def _weight_check(mean, error, weight, sigma):
    r"""
    Return a check that the mean final weight of the target branch has not
    moved from its initial ``weight``.

    EXAMPLES::

        >>> _weight_check(0.32, 0.01, 0.3, 3.0).passed
        True
        >>> _weight_check(0.35, 0.01, 0.3, 3.0).passed
        False

    Without spread between trajectories the weights must agree exactly::

        >>> _weight_check(0.3, 0.0, 0.3, 3.0).passed
        True

    """
    from collapsim.audit import AuditCheck

    if math.isnan(mean):
        return AuditCheck.create("mean final weight", math.nan, sigma)
    if math.isnan(error) or error == 0:
        return AuditCheck.create("mean final weight", abs(mean - weight), 1e-9)
    return AuditCheck.create("mean final weight", abs(mean - weight) / error, sigma)


def _run_grid(config, workers):
    r"""
    Run an ensemble of grid trajectories and audit it.

    Trajectories that do not terminate still enter the mean final weight of
    the target branch; the frequency of the target outcome is only checked
    once most trajectories terminated.

    EXAMPLES:

    Without collapse nothing decides and the weights stay put::

        >>> config = ScenarioConfig.from_dict({"scenario": "single_detector_grid", "ensemble": {"size": 2, "chunk": 1}, "collapse": {"kappa": 0.0}, "evolution": {"steps": 200}, "audit": {"steps": 0}})
        >>> result = run_scenario(config)
        >>> result.report.passed, result.summary["terminated_fraction"]
        (True, 0.0)
        >>> abs(result.summary["final_weight"] - result.summary["initial_weight"]) < 1e-9
        True
        >>> [check.name for check in result.report.checks]
        ['mean final weight', 'absorbed weight']

    A short collapsing ensemble keeps the mean weight within its error::

        >>> config = ScenarioConfig.from_dict({"scenario": "single_detector_grid", "ensemble": {"size": 6, "chunk": 3}, "evolution": {"steps": 200}, "audit": {"steps": 2, "sigma": 4.0}})
        >>> result = run_scenario(config)
        >>> result.report.passed
        True

    """
    from collapsim.audit import AuditReport, threshold_check
    from collapsim.ensemble import run_ensemble

    summary = run_ensemble(config, workers=workers)
    audit = config.audit
    checks = []

    if config.mirrored:
        transfer = max((s.max_transfer for s in summary.completed), default=math.nan)
        checks.append(threshold_check("frustration", transfer, audit["frustration_tolerance"]))
    else:
        mean, error = summary.final_weight()
        checks.append(_weight_check(mean, error, summary.initial_weight, audit["sigma"]))
        if summary.terminated_fraction >= audit["terminated_fraction"]:
            frequency, _ = summary.frequency(config.target)
            terminated = len(summary.completed) - summary.nonterminated
            checks.append(_born_check(frequency, summary.initial_weight, terminated, audit["sigma"]))
        elif summary.completed:
            logger.warning(
                f"Only {summary.terminated_fraction:.1%} of the trajectories terminated; "
                "the outcome frequency is not audited."
            )
    absorbed = max((s.absorbed_weight for s in summary.completed), default=0.0)
    checks.append(threshold_check("absorbed weight", absorbed, audit["absorbed_tolerance"]))
    report = _pooled(AuditReport(checks), summary)

    tables = {"outcomes.csv": summary.outcome_table()}
    tables.update(_emitted(config, summary))
    return ScenarioResult(config, summary.to_dict(target=config.target), report, tables)


def _audited_prefix(config, which="P"):
    r"""
    Return the conservation report of the first audited steps of
    trajectory 0.
    """
    from collapsim.audit import AuditReport, conservation_report
    from collapsim.collapse import run_trajectory
    from collapsim.ensemble import trajectory_generator

    steps = config.audit["steps"]
    if not steps:
        return AuditReport()
    prefix = run_trajectory(
        config.initial_state,
        config.potential,
        config.collapse_params,
        trajectory_generator(config.seed, 0),
        dt=config.evolution["dt"],
        steps=steps,
        keep_states=True,
    )
    return conservation_report(prefix, which)


def _run_probe(config, workers):  # pylint: disable=unused-argument
    r"""
    Run a single scattering trajectory and check the integral of its rate.

    EXAMPLES:

    Far apart packets hardly interact in a few steps::

        >>> config = ScenarioConfig.from_dict({"scenario": "scattering_gamma_probe", "grid": {"points_per_axis": 128}, "evolution": {"steps": 10}})
        >>> result = run_scenario(config)
        >>> result.report.failed
        ['gamma integral']
        >>> result.summary["gamma_integral"] < 1e-3
        True

    A complete passage through the well accumulates a rate integral of
    order one; a coarser grid and step cover the same time::

        >>> config = ScenarioConfig.from_dict({"scenario": "scattering_gamma_probe", "grid": {"points_per_axis": 128}, "evolution": {"dt": 0.01, "steps": 2000}})
        >>> result = run_scenario(config)
        >>> 1 < result.summary["gamma_integral"] < 3, result.report.passed
        (True, True)

    """
    from collapsim.audit import AuditReport, interval_check
    from collapsim.collapse import run_trajectory
    from collapsim.ensemble import trajectory_generator

    evolution = config.evolution
    record = run_trajectory(
        config.initial_state,
        config.potential,
        config.collapse_params,
        trajectory_generator(config.seed, 0),
        dt=evolution["dt"],
        steps=evolution["steps"],
        record_every=evolution["record_every"],
    )
    integral = record.gamma_integral
    low, high = config.audit["gamma_interval"]
    report = AuditReport([interval_check("gamma integral", integral, low, high)])
    report = report + _audited_prefix(config)

    gammas = record.gamma_frame()
    summary = {
        "steps": record.steps,
        "gamma_integral": integral,
        "max_gamma": float(gammas["gamma"].max()) if len(gammas) else 0.0,
        "max_norm_excess": record.max_norm_excess,
    }
    return ScenarioResult(config, summary, report, {"gamma.csv": gammas})


def _run_conservation(config, workers):  # pylint: disable=unused-argument
    r"""
    Audit angular and linear momentum along a single trajectory of a
    rotating pair.

    EXAMPLES::

        >>> result = run_scenario(ScenarioConfig.from_dict({"scenario": "conservation_2d"}))
        >>> result.report.passed
        True
        >>> result.tables["conservation.csv"].columns.tolist()
        ['t', 'L_drift', 'L_total_drift', 'L_commutator', 'P_commutator']
        >>> len(result.tables["conservation.csv"])
        11

    """
    import pandas as pd

    from collapsim.audit import conservation_report
    from collapsim.collapse import run_trajectory
    from collapsim.ensemble import trajectory_generator

    evolution = config.evolution
    record = run_trajectory(
        config.initial_state,
        config.potential,
        config.collapse_params,
        trajectory_generator(config.seed, 0),
        dt=evolution["dt"],
        steps=evolution["steps"],
        keep_states=True,
    )
    angular = conservation_report(record, "L", drift_tolerance=config.audit["drift_tolerance"])
    linear = conservation_report(record, "P")
    report = angular + linear

    series = pd.DataFrame({"t": [state.time for state in record.states]})
    for name in ("L drift", "L total drift"):
        series[name.replace(" ", "_")] = report.series[name]
    for name in ("L commutator", "P commutator"):
        series[name.replace(" ", "_")] = [0.0] + list(report.series[name])

    summary = {
        "steps": record.steps,
        "gamma_integral": record.gamma_integral,
        "max_norm_excess": record.max_norm_excess,
    }
    return ScenarioResult(config, summary, report, {"conservation.csv": series})


def _run_sweep(config, workers):  # pylint: disable=unused-argument
    import pandas as pd
    from scipy.stats import linregress

    from collapsim.audit import AuditReport, energy_deviation_series, energy_report, interval_check
    from collapsim.collapse import CollapseParams, run_trajectory
    from collapsim.ensemble import trajectory_generator

    evolution = config.evolution
    kappas = [float(kappa) for kappa in config.audit["kappas"]]
    if len(kappas) < 2:
        raise ScenarioConfigError("An energy deviation sweep needs at least two couplings.")

    report = AuditReport()
    frames, rows = [], []
    for kappa in kappas:
        record = run_trajectory(
            config.initial_state,
            config.potential,
            CollapseParams(**{**config.collapse, "kappa": kappa}),
            trajectory_generator(config.seed, 0),
            dt=evolution["dt"],
            steps=evolution["steps"],
            keep_states=True,
        )
        series = energy_deviation_series(record)
        energies = energy_report(series)
        report = report.merge(energies, prefix=f"kappa={kappa:g} ")
        series.insert(0, "kappa", kappa)
        frames.append(series)
        rows.append(
            {
                "kappa": kappa,
                "gradient": float(series["gradient"].abs().mean()),
                "quadratic": float(series["quadratic"].mean()),
                "gradient_integral": energies.series["gradient integral"][-1]
                if energies.series
                else 0.0,
            }
        )

    sweep = pd.DataFrame(rows)
    slopes = {
        term: float(linregress(np.log(sweep["kappa"]), np.log(sweep[term])).slope)
        for term in ("gradient", "quadratic")
    }
    report = report + AuditReport(
        [
            interval_check("gradient slope", slopes["gradient"], 0.8, 1.2),
            interval_check("quadratic slope", slopes["quadratic"], 1.7, 2.3),
        ]
    )
    summary = {"slopes": slopes, "sweep": sweep.to_dict(orient="records")}
    return ScenarioResult(
        config,
        summary,
        report,
        {"energy.csv": pd.concat(frames, ignore_index=True), "sweep.csv": sweep},
    )


def _run_estimates(config, workers):  # pylint: disable=unused-argument
    r"""
    Tabulate the entangled share for the configured splitting fractions.

    EXAMPLES::

        >>> result = run_scenario(ScenarioConfig.from_dict({"scenario": "beam_splitter_entanglement"}))
        >>> result.report.passed
        True
        >>> result.summary["estimates"]["steps"]
        4000000
        >>> result.tables["entanglement.csv"].columns.tolist()
        ['delta', 'entangled']

    """
    import pandas as pd

    from collapsim.audit import AuditReport, threshold_check
    from collapsim.branchwalk import entanglement_estimate, scale_estimates

    deltas = sorted(float(delta) for delta in config.audit["deltas"])
    table = pd.DataFrame(
        {"delta": deltas, "entangled": [entanglement_estimate(delta) for delta in deltas]}
    )
    decreasing = int(np.sum(np.diff(table["entangled"]) <= 0))
    report = AuditReport([threshold_check("entanglement increasing", decreasing, 0)])

    step_size = config.walk["step_size"]
    estimates = scale_estimates(ratio=config.collapse["kappa"], step_size=step_size)
    return ScenarioResult(
        config,
        {"estimates": estimates, "entanglement": table.to_dict(orient="records")},
        report,
        {"entanglement.csv": table},
    )


RUNNERS = {
    "reduced": _run_reduced,
    "grid": _run_grid,
    "probe": _run_probe,
    "conservation": _run_conservation,
    "sweep": _run_sweep,
    "estimates": _run_estimates,
}


def run_scenario(config, workers=1):
    r"""
    Run the scenario ``config`` and return its :class:`ScenarioResult`.

    EXAMPLES:

    Synchronized detectors in both branches never decide::

        >>> config = ScenarioConfig.from_dict({"scenario": "dual_detector_reduced", "ensemble": {"size": 100}, "walk": {"max_steps": 2000}})
        >>> result = run_scenario(config)
        >>> result.report.passed, result.summary["nonterminated"]
        (True, 100)

    """
    logger.info(f"Running scenario {config.name} with seed {config.seed}.")
    return RUNNERS[config.kind](config, workers)
