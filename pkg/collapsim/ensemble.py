r"""
Monte Carlo ensembles of trajectories.

Every trajectory of an ensemble draws its random numbers from its own stream,
derived from the master seed and the index of the trajectory. Trajectories
can therefore be computed in any order and on any number of worker
processes; the :class:`EnsembleSummary` of the results does not depend on
it.

EXAMPLES::

    >>> from collapsim.scenario import ScenarioConfig
    >>> config = ScenarioConfig.from_dict({"scenario": "single_detector_reduced", "seed": 7, "walk": {"p0": 0.5}})
    >>> summary = run_ensemble(config, N=500)
    >>> frequency, (low, high) = summary.frequency("interacting")
    >>> abs(frequency - 0.5) < 4 * (0.25 / 500) ** 0.5
    True

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
import time
from dataclasses import dataclass, field

import numpy as np

from collapsim.exceptions import ScenarioConfigError

logger = logging.getLogger("ensemble")

OUTCOMES = {1: "interacting", 0: "other"}


def trajectory_generator(master, index):
    r"""
    Return the random number generator of trajectory ``index`` of an
    ensemble with seed ``master``.

    Streams are counter based, the stream of a trajectory does not depend on
    how many other streams have been created.

    EXAMPLES::

        >>> a = trajectory_generator(5, 3).standard_normal(3)
        >>> b = trajectory_generator(5, 3).standard_normal(3)
        >>> c = trajectory_generator(5, 4).standard_normal(3)
        >>> np.array_equal(a, b), np.array_equal(a, c)
        (True, False)

    """
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(int(master), spawn_key=(int(index),)))
    )


@dataclass(frozen=True)
class TrajectoryStats:
    r"""
    The result of a single trajectory of an ensemble.

    ``outcome`` is the label of the selected branch or ``None`` if the
    trajectory did not terminate; ``error`` describes why a trajectory
    failed. ``final_weight`` is the weight of the target branch when the
    trajectory ended and ``absorbed_weight`` the weight lost to an absorbing
    layer. ``trace`` and ``gamma`` hold optional data frames of the branch
    weights and of the rate.
    """
    index: int
    seed: int = 0
    outcome: object = None
    steps: int = 0
    initial_weight: float = float("nan")
    final_weight: float = float("nan")
    max_transfer: float = 0.0
    absorbed_weight: float = 0.0
    gamma_integral: float = 0.0
    clamps: int = 0
    in_band: int = 0
    samples: int = 0
    checkpoints: tuple = ()
    audits: tuple = ()
    error: object = None
    wall_time: float = field(default=0.0, compare=False)
    trace: object = field(default=None, compare=False, repr=False)
    gamma: object = field(default=None, compare=False, repr=False)

    def as_row(self):
        return {
            "trajectory": self.index,
            "outcome": self.outcome,
            "steps": self.steps,
            "initial_weight": self.initial_weight,
            "final_weight": self.final_weight,
            "max_transfer": self.max_transfer,
            "absorbed_weight": self.absorbed_weight,
            "gamma_integral": self.gamma_integral,
            "clamps": self.clamps,
            "error": self.error,
        }


class EnsembleSummary:
    r"""
    The results of the trajectories of an ensemble.

    Summaries form a commutative monoid under ``+``, the union of the
    trajectories, with :meth:`empty` as the neutral element.

    EXAMPLES::

        >>> a = EnsembleSummary([TrajectoryStats(0, outcome="left"), TrajectoryStats(1, outcome="right")])
        >>> b = EnsembleSummary([TrajectoryStats(2, outcome="left"), TrajectoryStats(3, error="diverged")])
        >>> a + b == b + a, a + EnsembleSummary.empty() == a
        (True, True)
        >>> summary = a + b
        >>> summary.outcome_counts()
        {'left': 2, 'right': 1, 'none': 1}
        >>> summary.frequency("left")[0]
        0.6666666666666666
        >>> len(summary.failures)
        1

    Conflicting results for the same trajectory cannot be merged::

        >>> a + EnsembleSummary([TrajectoryStats(0, outcome="right")])
        Traceback (most recent call last):
        ...
        ValueError: Cannot merge summaries with conflicting results for trajectories [0].

    """

    def __init__(self, stats=()):
        self.stats = {s.index: s for s in stats}

    @classmethod
    def empty(cls):
        return cls()

    @classmethod
    def failed(cls, indices, seed, error):
        return cls(TrajectoryStats(index, seed=seed, error=str(error)) for index in indices)

    def __add__(self, other):
        conflicts = sorted(
            index
            for index in self.stats.keys() & other.stats.keys()
            if self.stats[index] != other.stats[index]
        )
        if conflicts:
            raise ValueError(
                f"Cannot merge summaries with conflicting results for trajectories {conflicts}."
            )
        return EnsembleSummary([*self.stats.values(), *other.stats.values()])

    def __eq__(self, other):
        return isinstance(other, EnsembleSummary) and self.ordered() == other.ordered()

    def __len__(self):
        return len(self.stats)

    def __repr__(self):
        return f"EnsembleSummary({len(self)} trajectories)"

    def ordered(self):
        return [self.stats[index] for index in sorted(self.stats)]

    @property
    def failures(self):
        return [s for s in self.ordered() if s.error is not None]

    @property
    def completed(self):
        return [s for s in self.ordered() if s.error is None]

    @property
    def nonterminated(self):
        return sum(1 for s in self.completed if s.outcome is None)

    def outcome_counts(self):
        counts = {}
        for s in self.completed:
            label = "none" if s.outcome is None else s.outcome
            counts[label] = counts.get(label, 0) + 1
        return dict(sorted(counts.items(), key=lambda item: (item[0] == "none", item[0])))

    def frequency(self, label):
        r"""
        Return the frequency of ``label`` among the terminated trajectories
        and its 95% confidence interval.
        """
        from collapsim.branchwalk import binomial_ci

        terminated = [s for s in self.completed if s.outcome is not None]
        hits = sum(1 for s in terminated if s.outcome == label)
        frequency = hits / len(terminated) if terminated else float("nan")
        return frequency, binomial_ci(hits, len(terminated))

    @property
    def initial_weight(self):
        weights = [s.initial_weight for s in self.completed]
        return float(np.mean(weights)) if weights else float("nan")

    def final_weight(self):
        r"""
        Return the mean final weight of the target branch over all completed
        trajectories, terminated or not, and its standard error.

        EXAMPLES::

            >>> summary = EnsembleSummary([TrajectoryStats(0, final_weight=0.0), TrajectoryStats(1, final_weight=1.0), TrajectoryStats(2, final_weight=0.5)])
            >>> mean, error = summary.final_weight()
            >>> mean, round(error, 4)
            (0.5, 0.2887)

        """
        weights = np.array([s.final_weight for s in self.completed], dtype=float)
        if len(weights) == 0:
            return float("nan"), float("nan")
        error = float(np.std(weights, ddof=1) / np.sqrt(len(weights))) if len(weights) > 1 else float("nan")
        return float(np.mean(weights)), error

    @property
    def terminated_fraction(self):
        completed = len(self.completed)
        return (completed - self.nonterminated) / completed if completed else float("nan")

    @property
    def in_band_fraction(self):
        samples = sum(s.samples for s in self.completed)
        return sum(s.in_band for s in self.completed) / samples if samples else float("nan")

    def checkpoints(self):
        r"""
        Return the recorded checkpoint weights with one row per completed
        trajectory.
        """
        return np.array([s.checkpoints for s in self.completed], dtype=float)

    def audit_totals(self):
        r"""
        Return, per audit check, the number of trajectories it ran on, the
        number of failures and the largest residual.

        EXAMPLES::

            >>> from collapsim.audit import AuditCheck
            >>> summary = EnsembleSummary([TrajectoryStats(0, audits=(AuditCheck.create("total", 1e-12, 1e-10),)), TrajectoryStats(1, audits=(AuditCheck.create("total", 1e-9, 1e-10),))])
            >>> summary.audit_totals()
            {'total': {'trajectories': 2, 'failed': 1, 'max_residual': 1e-09}}

        """
        totals = {}
        for s in self.completed:
            for check in s.audits:
                total = totals.setdefault(
                    check.name, {"trajectories": 0, "failed": 0, "max_residual": 0.0}
                )
                total["trajectories"] += 1
                total["failed"] += 0 if check.passed else 1
                total["max_residual"] = max(total["max_residual"], check.max_residual)
        return totals

    def outcome_table(self):
        r"""
        Return the per trajectory results as a data frame.
        """
        import pandas as pd

        return pd.DataFrame(
            [s.as_row() for s in self.ordered()],
            columns=[
                "trajectory",
                "outcome",
                "steps",
                "initial_weight",
                "final_weight",
                "max_transfer",
                "absorbed_weight",
                "gamma_integral",
                "clamps",
                "error",
            ],
        )

    def to_dict(self, target=None):
        r"""
        Return a summary of the ensemble that can be serialized as JSON.
        """
        summary = {
            "trajectories": len(self),
            "failures": len(self.failures),
            "nonterminated": self.nonterminated,
            "outcomes": self.outcome_counts(),
            "mean_steps": float(np.mean([s.steps for s in self.completed]))
            if self.completed
            else None,
            "audits": self.audit_totals(),
        }
        if target is not None:
            frequency, ci = self.frequency(target)
            summary["target"] = target
            summary["frequency"] = _json_float(frequency)
            summary["ci"] = [_json_float(bound) for bound in ci]
            summary["initial_weight"] = _json_float(self.initial_weight)
            mean, error = self.final_weight()
            summary["final_weight"] = _json_float(mean)
            summary["final_weight_error"] = _json_float(error)
            summary["terminated_fraction"] = _json_float(self.terminated_fraction)
        if any(s.samples for s in self.completed):
            summary["in_band_fraction"] = self.in_band_fraction
        if any(s.absorbed_weight for s in self.completed):
            summary["max_absorbed_weight"] = max(s.absorbed_weight for s in self.completed)
        return summary


def _json_float(value):
    return None if np.isnan(value) else float(value)


def _walk_chunk(config, indices):
    r"""
    Return the :class:`EnsembleSummary` of the reduced walks ``indices``.
    """
    from collapsim.branchwalk import run_walks

    start = time.perf_counter()
    params = config.walk_params
    p0 = config.walk["p0"]
    indices = list(indices)
    batch = run_walks(
        p0,
        params,
        [trajectory_generator(config.seed, index) for index in indices],
        record_traces="traces" in config.emit,
    )
    wall_time = (time.perf_counter() - start) / max(len(indices), 1)

    stats = []
    for row, index in enumerate(indices):
        outcome = batch.outcome(row)
        trace = None
        if batch.traces is not None:
            trace = tuple(float(value) for value in batch.traces[row])
        stats.append(
            TrajectoryStats(
                index=index,
                seed=config.seed,
                outcome=None if outcome.absorbed_at is None else OUTCOMES[outcome.absorbed_at],
                steps=outcome.steps,
                initial_weight=float(p0),
                final_weight=outcome.mu2,
                max_transfer=abs(outcome.mu2 - p0),
                clamps=outcome.clamps,
                in_band=int(batch.in_band[row]),
                samples=batch.samples,
                checkpoints=tuple(float(value) for value in batch.checkpoints[row]),
                wall_time=wall_time,
                trace=trace,
            )
        )
    return EnsembleSummary(stats)


def grid_trajectory(config, index, psi=None):
    r"""
    Return the :class:`TrajectoryStats` of trajectory ``index`` of a grid
    scenario.

    If the scenario requests audits, the first steps of the trajectory are
    replayed with their states kept and audited.

    EXAMPLES::

        >>> from collapsim.scenario import ScenarioConfig
        >>> config = ScenarioConfig.from_dict({"scenario": "dual_detector_grid", "evolution": {"steps": 4}, "audit": {"steps": 2}})
        >>> stats = grid_trajectory(config, 0)
        >>> stats.steps, stats.outcome
        (4, None)
        >>> stats.max_transfer < 1e-6, stats.absorbed_weight < 1e-6
        (True, True)
        >>> all(check.passed for check in stats.audits)
        True

    """
    from collapsim.audit import (
        AuditReport,
        conservation_report,
        density_change_decomposition,
        summarize_checks,
    )
    from collapsim.collapse import run_trajectory

    start = time.perf_counter()
    psi = config.initial_state if psi is None else psi
    evolution = config.evolution
    regions = config.regions
    target = config.target

    record = run_trajectory(
        psi,
        config.potential,
        config.collapse_params,
        trajectory_generator(config.seed, index),
        dt=evolution["dt"],
        steps=evolution["steps"],
        regions=regions,
        record_every=evolution["record_every"],
        termination_eps=evolution["termination_eps"],
    )
    weights = np.array(record.weights[target])

    audits = ()
    audit_steps = min(config.audit["steps"], record.steps)
    if audit_steps:
        prefix = run_trajectory(
            psi,
            config.potential,
            config.collapse_params,
            trajectory_generator(config.seed, index),
            dt=evolution["dt"],
            steps=audit_steps,
            keep_states=True,
        )
        report = AuditReport()
        for before, after, gamma, noise in zip(
            prefix.states, prefix.states[1:], prefix.gammas, prefix.noises
        ):
            report = report + density_change_decomposition(
                before,
                after,
                prefix.potential,
                prefix.params,
                gamma,
                noise,
                prefix.dt,
                regions=regions,
            )
        report = report + conservation_report(prefix, "P")
        audits = tuple(summarize_checks(report.checks))

    return TrajectoryStats(
        index=index,
        seed=config.seed,
        outcome=record.outcome,
        steps=record.steps,
        initial_weight=float(weights[0]),
        final_weight=float(weights[-1]),
        max_transfer=float(np.max(np.abs(weights - weights[0]))),
        absorbed_weight=record.absorbed_weight,
        gamma_integral=record.gamma_integral,
        audits=audits,
        wall_time=time.perf_counter() - start,
        trace=record.weight_frame() if "traces" in config.emit else None,
        gamma=record.gamma_frame() if "gamma" in config.emit else None,
    )


def _grid_chunk(config, indices):
    r"""
    Return the :class:`EnsembleSummary` of the grid trajectories
    ``indices``; trajectories that fail are recorded with their error.
    """
    psi = config.initial_state
    stats = []
    for index in indices:
        try:
            stats.append(grid_trajectory(config, index, psi))
        except (RuntimeError, ValueError, ArithmeticError) as error:
            logger.warning(f"Trajectory {index} failed: {error}")
            stats.append(TrajectoryStats(index, seed=config.seed, error=str(error)))
    return EnsembleSummary(stats)


def run_ensemble(config, N=None, workers=1):
    r"""
    Return the :class:`EnsembleSummary` of ``N`` trajectories of the
    scenario ``config`` computed by ``workers`` processes.

    Reduced scenarios run walks in vectorized chunks, grid scenarios one
    trajectory at a time.

    EXAMPLES:

    The result does not depend on the number of workers::

        >>> from collapsim.scenario import ScenarioConfig
        >>> config = ScenarioConfig.from_dict({"scenario": "single_detector_reduced", "ensemble": {"chunk": 50}, "walk": {"p0": 0.3}})
        >>> run_ensemble(config, N=200, workers=1) == run_ensemble(config, N=200, workers=2)
        True

    ::

        >>> run_ensemble(config, N=0)
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: An ensemble needs at least one trajectory and one worker but got N=0 and workers=1.

    """
    N = int(config.ensemble["size"] if N is None else N)
    if N < 1 or workers < 1:
        raise ScenarioConfigError(
            f"An ensemble needs at least one trajectory and one worker but got N={N} and workers={workers}."
        )

    runner = _walk_chunk if config.kind == "reduced" else _grid_chunk
    chunk = int(config.ensemble["chunk"])
    chunks = [range(start, min(start + chunk, N)) for start in range(0, N, chunk)]

    summary = EnsembleSummary.empty()
    if workers == 1:
        for indices in chunks:
            summary = summary + runner(config, indices)
            logger.info(f"Completed {len(summary)} of {N} trajectories.")
        return summary

    from concurrent.futures import ProcessPoolExecutor, as_completed

    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(runner, config, indices): indices for indices in chunks}
        for future in as_completed(futures):
            indices = futures[future]
            try:
                part = future.result()
            except Exception as error:  # pylint: disable=broad-except
                logger.warning(
                    f"Trajectories {indices.start} to {indices.stop - 1} failed: {error}"
                )
                part = EnsembleSummary.failed(indices, config.seed, error)
            summary = summary + part
            logger.info(f"Completed {len(summary)} of {N} trajectories.")
    return summary
