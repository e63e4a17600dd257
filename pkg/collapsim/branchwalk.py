r"""
The reduced model of branch selection.

The weight ``μ²`` of the branch in which a detector interacts changes by

    Δμ² = μ²ν²·(κ₁√γ₁ - κ₂√γ₂)·(dξ* + dξ)

where ``ν² = 1 - μ²`` and the second term is present when an interaction
happens in the other branch as well. The weights perform a martingale random
walk that ends at ``0`` or ``1``, so the interacting branch is selected with
probability ``μ²``.

EXAMPLES::

    >>> params = WalkParams(kappa1=1, gamma_schedule=ConstantSchedule(1.0), dt=0.01, max_steps=10**5)
    >>> estimate = born_estimate(0.3, 2000, params, seed=1)
    >>> abs(estimate.frequency - 0.3) < 4 * (0.21 / 2000) ** 0.5
    True
    >>> estimate.nonterminated
    0

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
import math
from dataclasses import dataclass

import numpy as np

from collapsim.exceptions import DomainError, ScenarioConfigError

logger = logging.getLogger("branchwalk")

BAND = (0.45, 0.55)


class ConstantSchedule:
    r"""
    A rate ``γ`` that does not depend on time.

    EXAMPLES::

        >>> schedule = ConstantSchedule(2.0)
        >>> schedule(0.5), schedule.peak
        (2.0, 2.0)

    """

    def __init__(self, rate):
        if rate < 0:
            raise ScenarioConfigError(f"Rates must not be negative but got {rate}.")
        self.rate = float(rate)

    def __call__(self, t):
        if np.ndim(t):
            return np.full(np.shape(t), self.rate)
        return self.rate

    @property
    def peak(self):
        return self.rate

    def jittered(self, rng, onset_jitter=0.0, height_jitter=0.0):
        r"""
        Return a copy with the rate scaled by ``1 + height_jitter·g`` for a
        standard normal ``g`` drawn from ``rng``.
        """
        if not height_jitter:
            return self
        return ConstantSchedule(
            max(0.0, self.rate * (1 + height_jitter * rng.standard_normal()))
        )

    def __repr__(self):
        return f"ConstantSchedule({self.rate})"


class PulseSchedule:
    r"""
    Rectangular rate pulses of width ``width`` starting at ``onsets``.

    Without explicit ``heights``, every pulse has height ``1/width`` so
    that it integrates to one.

    EXAMPLES::

        >>> schedule = PulseSchedule.train(width=0.5, period=2.0, count=3)
        >>> schedule(np.array([0.0, 0.25, 0.5, 2.1, 4.49, 6.0]))
        array([2., 2., 0., 2., 2., 0.])
        >>> schedule.area
        3.0

    Pulses must not overlap::

        >>> PulseSchedule([0, 0.25], width=0.5)
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: Pulses of width 0.5 starting at [0.0, 0.25] overlap.

    """

    def __init__(self, onsets, width, heights=None):
        if not width > 0:
            raise ScenarioConfigError(f"Pulse width must be positive but got {width}.")
        onsets = np.asarray(onsets, dtype=float)
        if onsets.ndim != 1 or len(onsets) == 0:
            raise ScenarioConfigError("A pulse schedule needs at least one onset.")
        if np.any(np.diff(onsets) < width):
            raise ScenarioConfigError(
                f"Pulses of width {width} starting at {onsets.tolist()} overlap."
            )
        heights = (
            np.full(len(onsets), 1 / width)
            if heights is None
            else np.asarray(heights, dtype=float)
        )
        if heights.shape != onsets.shape or np.any(heights < 0):
            raise ScenarioConfigError(
                "Pulse heights must be non-negative and given for every onset."
            )
        self.onsets = onsets
        self.width = float(width)
        self.heights = heights

    @classmethod
    def train(cls, width, period, count, start=0.0):
        r"""
        Return ``count`` pulses repeating every ``period``.
        """
        return cls(start + period * np.arange(count), width)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        index = np.searchsorted(self.onsets, t, side="right") - 1
        inside = (index >= 0) & (t < self.onsets[np.maximum(index, 0)] + self.width)
        rates = np.where(inside, self.heights[np.maximum(index, 0)], 0.0)
        return float(rates) if rates.ndim == 0 else rates

    @property
    def peak(self):
        return float(np.max(self.heights))

    @property
    def area(self):
        return float(np.sum(self.heights) * self.width)

    def jittered(self, rng, onset_jitter=0.0, height_jitter=0.0):
        r"""
        Return a copy with randomly displaced onsets and scaled heights.

        Each onset moves uniformly by at most ``onset_jitter`` times the pulse
        width. Shifts are clipped to half the gap between neighbouring pulses
        so that jittered pulses never overlap, and onsets never move before
        time zero. Heights are scaled by ``1 + height_jitter·g`` for standard
        normal ``g``.

        EXAMPLES::

            >>> schedule = PulseSchedule.train(width=0.5, period=2.0, count=10)
            >>> jittered = schedule.jittered(np.random.default_rng(0), onset_jitter=0.2, height_jitter=0.1)
            >>> shifts = jittered.onsets - schedule.onsets
            >>> bool(np.all(np.abs(shifts) <= 0.1)), bool(np.any(shifts != 0))
            (True, True)
            >>> bool(np.all(jittered.onsets >= 0))
            True
            >>> jittered.peak != schedule.peak
            True

        Wide jitter is limited by the gap between pulses::

            >>> schedule = PulseSchedule.train(width=1.0, period=1.5, count=10)
            >>> jittered = schedule.jittered(np.random.default_rng(1), onset_jitter=1.0)
            >>> bool(np.all(np.abs(jittered.onsets - schedule.onsets) <= 0.25))
            True

        """
        onsets = self.onsets
        if onset_jitter:
            shifts = rng.uniform(-1, 1, len(onsets)) * onset_jitter * self.width
            if len(onsets) > 1:
                gap = float(np.min(np.diff(onsets))) - self.width
                shifts = np.clip(shifts, -gap / 2, gap / 2)
            onsets = np.maximum(onsets + shifts, 0.0)
        heights = self.heights
        if height_jitter:
            heights = np.maximum(
                0.0, heights * (1 + height_jitter * rng.standard_normal(len(heights)))
            )
        return PulseSchedule(onsets, self.width, heights)

    def __repr__(self):
        return f"PulseSchedule({len(self.onsets)} pulses of width {self.width})"


@dataclass(frozen=True)
class BranchState:
    r"""
    The weight ``μ²`` of the interacting branch at time ``t``.
    """
    mu2: float
    t: float = 0.0
    clamps: int = 0

    @property
    def nu2(self):
        return 1 - self.mu2


class WalkParams:
    r"""
    Parameters of the reduced walk.

    INPUT:

    - ``kappa1``, ``kappa2`` -- couplings of the interaction in the first
      and in the second branch; ``kappa2 = 0`` for a single detector

    - ``gamma_schedule`` -- the rate ``γ₁`` as a function of time

    - ``second_schedule`` -- the rate ``γ₂``; the same as ``γ₁`` if not given

    - ``dt`` -- time step

    - ``max_steps`` -- walks that are not absorbed after this many steps are
      reported as not terminated

    - ``termination_eps`` -- a walk is absorbed once ``μ²`` is within this
      distance of 0 or 1

    - ``step_size`` -- if set, a number or a schedule ``s(t)``; the walk then
      moves by ``±min(s, μ², ν²)`` instead

    - ``onset_jitter``, ``height_jitter`` -- per walk randomization of the
      schedules, see :meth:`PulseSchedule.jittered`

    - ``sample_every`` -- the interval in steps at which ``μ²`` is sampled

    - ``checkpoints`` -- steps at which ``μ²`` of every walk is recorded

    EXAMPLES::

        >>> WalkParams(termination_eps=0.1)
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: termination_eps must lie in (0, 0.01] but got 0.1.

    ::

        >>> WalkParams(gamma_schedule=ConstantSchedule(20), dt=0.01)
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: Time step 0.01 resolves rates up to 10 but the schedules reach 20.0.

    """

    def __init__(
        self,
        kappa1=1.0,
        kappa2=0.0,
        gamma_schedule=None,
        dt=0.01,
        max_steps=10**5,
        termination_eps=0.01,
        second_schedule=None,
        step_size=None,
        onset_jitter=0.0,
        height_jitter=0.0,
        sample_every=100,
        checkpoints=(),
    ):
        if min(kappa1, kappa2) < 0:
            raise ScenarioConfigError("Couplings must not be negative.")
        if not 0 < termination_eps <= 0.01:
            raise ScenarioConfigError(
                f"termination_eps must lie in (0, 0.01] but got {termination_eps}."
            )
        if not dt > 0:
            raise ScenarioConfigError(f"Time step must be positive but got {dt}.")
        if not 0 <= onset_jitter <= 1:
            raise ScenarioConfigError(
                f"onset_jitter must lie in [0, 1] but got {onset_jitter}."
            )
        if isinstance(step_size, (int, float)) and not step_size > 0:
            raise ScenarioConfigError(f"Step size must be positive but got {step_size}.")

        self.kappa1 = float(kappa1)
        self.kappa2 = float(kappa2)
        self.gamma_schedule = gamma_schedule or ConstantSchedule(1.0)
        self.second_schedule = second_schedule or self.gamma_schedule
        self.dt = float(dt)
        self.max_steps = int(max_steps)
        self.termination_eps = float(termination_eps)
        self.step_size = step_size
        self.onset_jitter = float(onset_jitter)
        self.height_jitter = float(height_jitter)
        self.sample_every = max(1, int(sample_every))
        self.checkpoints = tuple(sorted(int(step) for step in checkpoints))

        peak = max(self.gamma_schedule.peak, self.second_schedule.peak)
        if self.dt * peak > 0.1 + 1e-12:
            raise ScenarioConfigError(
                f"Time step {self.dt} resolves rates up to {0.1 / self.dt:.3g} but the schedules reach {peak}."
            )

    @property
    def lemma(self):
        r"""
        Whether the walk moves by bounded steps ``±min(s, μ², ν²)``.
        """
        return self.step_size is not None

    def step_at(self, t):
        if callable(self.step_size):
            return self.step_size(t)
        return self.step_size

    def samples(self):
        return self.max_steps // self.sample_every + 1


def _clamp(mu2):
    clamped = np.clip(mu2, 0.0, 1.0)
    return clamped, clamped != mu2


def walk_step(s, p, n):
    r"""
    Return the state after one step of the reduced walk driven by the noise
    increment ``n``.

    EXAMPLES::

        >>> from collapsim.collapse import NoiseIncrement
        >>> params = WalkParams(kappa1=1, gamma_schedule=ConstantSchedule(1.0), dt=1e-4)
        >>> after = walk_step(BranchState(0.5), params, NoiseIncrement(0.005, dt=1e-4))
        >>> round(after.mu2 - 0.5, 12)
        0.0025
        >>> after.t
        0.0001

    The boundaries are absorbing::

        >>> walk_step(BranchState(0.0), params, NoiseIncrement(0.3, dt=1e-4)).mu2
        0.0

    Perfectly synchronized interactions in both branches cancel::

        >>> dual = WalkParams(kappa1=1, kappa2=1, gamma_schedule=ConstantSchedule(1.0), dt=1e-4)
        >>> walk_step(BranchState(0.4), dual, NoiseIncrement(0.02 - 0.01j, dt=1e-4)).mu2
        0.4

    With a step size, the walk moves by bounded steps::

        >>> lemma = WalkParams(step_size=0.05)
        >>> walk_step(BranchState(0.5), lemma, NoiseIncrement(-0.001, dt=0.01)).mu2
        0.45
        >>> walk_step(BranchState(0.02), lemma, NoiseIncrement(-0.001, dt=0.01)).mu2
        0.0

    """
    mu2, nu2 = s.mu2, 1 - s.mu2
    transfer = n.transfer
    if p.lemma:
        delta = math.copysign(min(p.step_at(s.t), mu2, nu2), transfer)
    else:
        delta = (
            mu2
            * nu2
            * (
                p.kappa1 * math.sqrt(p.gamma_schedule(s.t))
                - p.kappa2 * math.sqrt(p.second_schedule(s.t))
            )
            * transfer
        )
    mu2, clamped = _clamp(mu2 + delta)
    return BranchState(float(mu2), s.t + n.dt, s.clamps + int(clamped))


class _Rates:
    r"""
    Rates of a schedule for a batch of walks, possibly with a jittered copy
    of the schedule per walk.
    """

    def __init__(self, schedules):
        first = schedules[0]
        self.shared = all(schedule is first for schedule in schedules)
        self.schedule = first
        if self.shared:
            return
        if isinstance(first, ConstantSchedule):
            self.constant = np.array([schedule.rate for schedule in schedules])
            return
        self.constant = None
        self.onsets = np.stack([schedule.onsets for schedule in schedules])
        self.heights = np.stack([schedule.heights for schedule in schedules])
        self.width = first.width
        self.cursor = np.zeros(len(schedules), dtype=int)

    def __call__(self, t, rows):
        if self.shared:
            return np.full(len(rows), self.schedule(t))
        if self.constant is not None:
            return self.constant[rows]

        pulses = self.onsets.shape[1]
        while True:
            cursor = self.cursor[rows]
            started = (cursor < pulses) & (
                self.onsets[rows, np.minimum(cursor, pulses - 1)] <= t
            )
            if not started.any():
                break
            self.cursor[rows[started]] += 1

        last = np.maximum(self.cursor[rows] - 1, 0)
        inside = (self.cursor[rows] > 0) & (t < self.onsets[rows, last] + self.width)
        return np.where(inside, self.heights[rows, last], 0.0)


@dataclass(frozen=True)
class WalkOutcome:
    r"""
    The result of a single walk; ``absorbed_at`` is ``None`` if the walk did
    not terminate.
    """
    absorbed_at: object
    steps: int
    mu2: float
    clamps: int = 0
    mu2_series: object = None


class WalkBatch:
    r"""
    The results of a batch of walks as arrays indexed by walk.

    ``absorbed_at`` holds ``-1`` for walks that did not terminate;
    ``samples`` is the number of times ``μ²`` was sampled before all walks
    terminated.
    """

    def __init__(
        self, params, initial, absorbed_at, steps, mu2, clamps, in_band, checkpoints, traces, samples
    ):
        self.params = params
        self.initial = initial
        self.absorbed_at = absorbed_at
        self.steps = steps
        self.mu2 = mu2
        self.clamps = clamps
        self.in_band = in_band
        self.checkpoints = checkpoints
        self.traces = traces
        self.samples = samples

    def __len__(self):
        return len(self.steps)

    def outcome(self, index):
        absorbed_at = int(self.absorbed_at[index])
        return WalkOutcome(
            absorbed_at=None if absorbed_at < 0 else absorbed_at,
            steps=int(self.steps[index]),
            mu2=float(self.mu2[index]),
            clamps=int(self.clamps[index]),
            mu2_series=None if self.traces is None else self.traces[index],
        )

    @property
    def in_band_fraction(self):
        r"""
        Return the fraction of sampled times at which ``μ²`` was within
        ``[0.45, 0.55]``.

        EXAMPLES:

        Walks that terminate early count only the samples taken::

            >>> params = WalkParams(step_size=0.25, max_steps=10**4, termination_eps=1e-3)
            >>> batch = run_walks(0.5, params, [np.random.default_rng(i) for i in range(5)])
            >>> batch.samples, batch.in_band_fraction
            (1, 1.0)

        """
        return float(np.sum(self.in_band) / (len(self) * self.samples))

    def frame(self, index=None):
        r"""
        Return the outcomes as a data frame with columns ``walk``,
        ``absorbed_at``, ``steps``, ``mu2`` and ``clamps``.

        EXAMPLES::

            >>> params = WalkParams(dt=0.01, max_steps=10**4)
            >>> run_walks(0.5, params, [np.random.default_rng(i) for i in range(3)]).frame().columns.tolist()
            ['walk', 'absorbed_at', 'steps', 'mu2', 'clamps']

        """
        import pandas as pd

        index = np.arange(len(self)) if index is None else np.asarray(index)
        absorbed_at = pd.array(
            np.where(self.absorbed_at < 0, None, self.absorbed_at).tolist(), dtype="Int64"
        )
        return pd.DataFrame(
            {
                "walk": index,
                "absorbed_at": absorbed_at,
                "steps": self.steps,
                "mu2": self.mu2,
                "clamps": self.clamps,
            }
        )


NOISE_BLOCK = 256


def run_walks(initial, params, generators, record_traces=False):
    r"""
    Return the :class:`WalkBatch` of one walk per generator in
    ``generators`` all starting from ``μ² = initial``.

    Every walk draws its schedule jitter and then its noise from its own
    generator, so a walk's outcome does not depend on the other walks in the
    batch.

    EXAMPLES::

        >>> params = WalkParams(dt=0.01, max_steps=10**4, checkpoints=(10, 100))
        >>> generators = [np.random.default_rng(i) for i in range(20)]
        >>> batch = run_walks(0.5, params, generators)
        >>> alone = run_walks(0.5, params, [np.random.default_rng(7)])
        >>> batch.outcome(7) == alone.outcome(0)
        True
        >>> batch.checkpoints.shape
        (20, 2)

    The mean number of steps for bounded steps of constant size ``s`` grows
    like ``1/s²``::

        >>> from scipy.stats import linregress
        >>> sizes = [1e-2, 5e-3, 2.5e-3]
        >>> means = [run_walks(0.5, WalkParams(step_size=s, max_steps=10**7, termination_eps=1e-3), [np.random.default_rng(i) for i in range(200)]).steps.mean() for s in sizes]
        >>> abs(linregress(np.log(sizes), np.log(means)).slope + 2) < 0.2
        True

    From ``μ² = 0.5`` the median number of steps is about ``0.76·(0.5/s)²``,
    so steps of size ``5e-4`` need most of a million steps::

        >>> batch = run_walks(0.5, WalkParams(step_size=0.02, max_steps=10**5), [np.random.default_rng(i) for i in range(400)])
        >>> batch.absorbed_at.min() >= 0
        True
        >>> 6e5 < np.median(batch.steps) * (0.02 / 5e-4) ** 2 < 9e5
        True

    """
    count = len(generators)
    p = params
    sqrt_2dt = math.sqrt(2 * p.dt)

    first, second = p.gamma_schedule, p.second_schedule
    if p.onset_jitter or p.height_jitter:
        firsts, seconds = [], []
        for rng in generators:
            firsts.append(first.jittered(rng, p.onset_jitter, p.height_jitter))
            seconds.append(
                second.jittered(rng, p.onset_jitter, p.height_jitter)
                if p.kappa2
                else second
            )
        peak = max(schedule.peak for schedule in firsts + seconds)
        if p.dt * peak > 0.1:
            logger.warning(
                f"Jittered rates reach {peak:.3g} which is not resolved by the time step {p.dt}."
            )
    else:
        firsts, seconds = [first] * count, [second] * count
    rates1, rates2 = _Rates(firsts), _Rates(seconds)

    mu2 = np.full(count, float(initial))
    absorbed_at = np.full(count, -1)
    absorbed_at[mu2 >= 1 - p.termination_eps] = 1
    absorbed_at[mu2 <= p.termination_eps] = 0
    steps = np.zeros(count, dtype=int)
    clamps = np.zeros(count, dtype=int)
    in_band = np.zeros(count, dtype=int)
    checkpoints = np.full((count, len(p.checkpoints)), np.nan)
    traces = np.full((count, p.samples()), np.nan) if record_traces else None
    noise = np.empty((count, NOISE_BLOCK))
    taken = 0

    def sample(column):
        nonlocal taken
        taken += 1
        in_band[:] += (mu2 >= BAND[0]) & (mu2 <= BAND[1])
        if traces is not None:
            traces[:, column] = mu2

    checkpoint = 0

    def record_checkpoints(step):
        nonlocal checkpoint
        while checkpoint < len(p.checkpoints) and p.checkpoints[checkpoint] <= step:
            checkpoints[:, checkpoint] = mu2
            checkpoint += 1

    sample(0)
    record_checkpoints(0)
    for step in range(1, p.max_steps + 1):
        active = np.flatnonzero(absorbed_at < 0)
        if len(active) == 0:
            break

        offset = (step - 1) % NOISE_BLOCK
        if offset == 0:
            for walk in active:
                noise[walk] = generators[walk].standard_normal(NOISE_BLOCK)
        transfer = noise[active, offset] * sqrt_2dt

        t = (step - 1) * p.dt
        x = mu2[active]
        if p.lemma:
            delta = np.sign(transfer) * np.minimum(np.minimum(p.step_at(t), x), 1 - x)
        else:
            coupling = p.kappa1 * np.sqrt(rates1(t, active))
            if p.kappa2:
                coupling = coupling - p.kappa2 * np.sqrt(rates2(t, active))
            delta = x * (1 - x) * coupling * transfer
        x, clamped = _clamp(x + delta)
        mu2[active] = x
        clamps[active] += clamped
        steps[active] = step

        absorbed_at[active[x >= 1 - p.termination_eps]] = 1
        absorbed_at[active[x <= p.termination_eps]] = 0

        record_checkpoints(step)
        if step % p.sample_every == 0:
            sample(step // p.sample_every)

    # Absorbed walks keep their final weight.
    checkpoints[:, checkpoint:] = mu2[:, None]
    if traces is not None:
        traces = np.where(np.isnan(traces), mu2[:, None], traces)

    if clamps.any():
        logger.warning(
            f"Weights were clamped to [0, 1] {int(clamps.sum())} times; consider a smaller time step."
        )

    return WalkBatch(
        p, float(initial), absorbed_at, steps, mu2, clamps, in_band, checkpoints, traces, taken
    )


def run_walk(initial, p, rng):
    r"""
    Return the :class:`WalkOutcome` of a single walk starting from
    ``μ² = initial``.

    EXAMPLES::

        >>> outcome = run_walk(0.5, WalkParams(dt=0.01), np.random.default_rng(0))
        >>> outcome.absorbed_at in (0, 1), outcome.steps > 0
        (True, True)

    A walk that cannot move does not terminate::

        >>> outcome = run_walk(0.5, WalkParams(kappa1=1, kappa2=1, max_steps=100), np.random.default_rng(0))
        >>> outcome.absorbed_at, outcome.steps, outcome.mu2
        (None, 100, 0.5)

    """
    if not 0 <= initial <= 1:
        raise ValueError(f"Initial weight must lie in [0, 1] but got {initial}.")
    return run_walks(initial, p, [rng], record_traces=True).outcome(0)


@dataclass(frozen=True)
class BornEstimate:
    r"""
    Statistics of the outcomes of many walks.

    ``frequency`` is the fraction of terminated walks that selected the
    interacting branch, ``ci`` its 95% confidence interval.
    """
    p0: float
    walks: int
    absorbed_one: int
    absorbed_zero: int
    nonterminated: int
    frequency: float
    ci: tuple
    in_band_fraction: float
    mean_steps: float
    clamps: int

    def as_dict(self):
        return {
            "p0": self.p0,
            "walks": self.walks,
            "absorbed_one": self.absorbed_one,
            "absorbed_zero": self.absorbed_zero,
            "nonterminated": self.nonterminated,
            "frequency": self.frequency,
            "ci": list(self.ci),
            "in_band_fraction": self.in_band_fraction,
            "mean_steps": self.mean_steps,
            "clamps": self.clamps,
        }


def binomial_ci(successes, trials, confidence_level=0.95):
    r"""
    Return the Wilson confidence interval of a binomial proportion.

    EXAMPLES::

        >>> low, high = binomial_ci(30, 100)
        >>> round(low, 3), round(high, 3)
        (0.219, 0.396)
        >>> binomial_ci(0, 0)
        (nan, nan)

    """
    if trials == 0:
        return (math.nan, math.nan)
    from scipy.stats import binomtest

    interval = binomtest(int(successes), int(trials)).proportion_ci(
        confidence_level=confidence_level, method="wilson"
    )
    return (float(interval.low), float(interval.high))


def summarize_walks(batch):
    r"""
    Return the :class:`BornEstimate` of a :class:`WalkBatch`.
    """
    one = int(np.sum(batch.absorbed_at == 1))
    zero = int(np.sum(batch.absorbed_at == 0))
    terminated = one + zero
    return BornEstimate(
        p0=batch.initial,
        walks=len(batch),
        absorbed_one=one,
        absorbed_zero=zero,
        nonterminated=len(batch) - terminated,
        frequency=one / terminated if terminated else math.nan,
        ci=binomial_ci(one, terminated),
        in_band_fraction=batch.in_band_fraction,
        mean_steps=float(np.mean(batch.steps)),
        clamps=int(np.sum(batch.clamps)),
    )


def born_estimate(p0, N, params, seed=0):
    r"""
    Return the :class:`BornEstimate` of ``N`` independent walks starting
    from ``μ² = p0``.

    Walk ``i`` draws from the stream of index ``i`` of the master ``seed``.

    EXAMPLES::

        >>> params = WalkParams(kappa1=1, gamma_schedule=ConstantSchedule(1.0), dt=0.01, max_steps=10**5)
        >>> estimate = born_estimate(0.7, 20000, params, seed=3)
        >>> abs(estimate.frequency - 0.7) < 4 * (0.21 / 20000) ** 0.5
        True
        >>> estimate.ci[0] < estimate.frequency < estimate.ci[1]
        True

    A decided walk does not move::

        >>> estimate = born_estimate(1.0, 100, params)
        >>> estimate.frequency, estimate.mean_steps
        (1.0, 0.0)

    Synchronized detectors in both branches frustrate each other::

        >>> dual = WalkParams(kappa1=1, kappa2=1, gamma_schedule=PulseSchedule.train(width=1, period=2, count=50), dt=0.01, max_steps=10000)
        >>> estimate = born_estimate(0.5, 100, dual)
        >>> estimate.nonterminated, estimate.in_band_fraction >= 0.95
        (100, True)

    """
    if N < 100:
        raise ValueError(f"A Born estimate needs at least 100 walks but got {N}.")
    if not 0 <= p0 <= 1:
        raise ValueError(f"Initial weight must lie in [0, 1] but got {p0}.")

    from collapsim.ensemble import trajectory_generator

    batch = run_walks(p0, params, [trajectory_generator(seed, i) for i in range(N)])
    return summarize_walks(batch)


def reference_ratio():
    r"""
    Return the square of the fine structure constant, the ratio of the
    electrostatic energy of an electron in an atom to its rest energy.

    EXAMPLES::

        >>> f"{reference_ratio():.2e}"
        '5.33e-05'

    """
    from astropy import constants

    return float(constants.alpha**2)


def max_ratio():
    r"""
    Return the largest plausible coupling ``κ``, one order of magnitude
    above :func:`reference_ratio`.

    EXAMPLES::

        >>> f"{max_ratio():.0e}"
        '5e-04'

    """
    return 10 * reference_ratio()


def interaction_time(velocity=None):
    r"""
    Return the time an electron moving with ``velocity`` needs to cross a
    Bohr radius, by default for the velocity ``αc`` of a bound electron.

    EXAMPLES::

        >>> from astropy import units as u
        >>> f"{interaction_time().to_value(u.s):.1e}"
        '2.4e-17'

    """
    from astropy import constants
    from astropy import units as u

    velocity = constants.alpha * constants.c if velocity is None else velocity
    return (constants.a0 / velocity).to(u.s)


def perturbation_ratio(mass_energy, delta_t):
    r"""
    Return ``ħ/(δt·(m_j + m_k)c²)``, the size of the nonlinear perturbation
    relative to the unitary evolution, for a rest energy in J and a time in s.

    EXAMPLES::

        >>> f"{perturbation_ratio(1e-13, 1e-17):.0e}"
        '1e-04'

    """
    from astropy import constants
    from astropy import units as u

    if not (mass_energy > 0 and delta_t > 0):
        raise DomainError("The rest energy and the time must be positive.")
    ratio = constants.hbar / ((delta_t * u.s) * (mass_energy * u.J))
    return float(ratio.to_value(u.dimensionless_unscaled))


def steps(step_size):
    r"""
    Return the number of steps ``⌈1/s²⌉`` a walk with steps of size ``s``
    typically needs to reach a boundary.

    EXAMPLES::

        >>> steps(5e-4)
        4000000

    """
    if not step_size > 0:
        raise DomainError(f"The step size must be positive but got {step_size}.")
    return math.ceil(round(1 / step_size**2, 9))


def worst_case_steps(ratio, weight=0.01):
    r"""
    Return the number of steps ``⌈1/(ratio·μ²ν²)²⌉`` for a coupling
    ``ratio`` when the branch weights ``μ²ν²`` are as small as ``weight``.

    EXAMPLES::

        >>> worst_case_steps(1e-4)
        1000000000000

    """
    if not (ratio > 0 and weight > 0):
        raise DomainError("The ratio and the weight must be positive.")
    return math.ceil(round(1 / (ratio * weight) ** 2, 9))


def scale_estimates(ratio=None, mass_energy=None, delta_t=None, step_size=None):
    r"""
    Return the scale estimates that can be computed from the given inputs
    as a dictionary.

    EXAMPLES::

        >>> estimates = scale_estimates(step_size=5e-4, mass_energy=1e-13, delta_t=1e-17)
        >>> sorted(estimates)
        ['interaction_time', 'max_ratio', 'perturbation_ratio', 'reference_ratio', 'steps']
        >>> estimates["steps"]
        4000000

    """
    from astropy import units as u

    estimates = {
        "reference_ratio": reference_ratio(),
        "max_ratio": max_ratio(),
        "interaction_time": float(interaction_time().to_value(u.s)),
    }
    if ratio is not None:
        estimates["worst_case_steps"] = worst_case_steps(ratio)
    if mass_energy is not None or delta_t is not None:
        if mass_energy is None or delta_t is None:
            raise DomainError("The perturbation ratio needs both a rest energy and a time.")
        estimates["perturbation_ratio"] = perturbation_ratio(mass_energy, delta_t)
    if step_size is not None:
        estimates["steps"] = steps(step_size)
    return estimates


def entanglement_estimate(delta):
    r"""
    Return ``(δ/2)·|1 - ln(δ/2)|``, the share of a conserved quantity that
    ends up entangled when a fraction ``δ`` splits off a beam.

    EXAMPLES::

        >>> round(entanglement_estimate(0.01), 4)
        0.0315
        >>> entanglement_estimate(1e-12) < 1e-10
        True
        >>> values = [entanglement_estimate(delta) for delta in np.linspace(1e-3, 0.1, 50)]
        >>> all(a < b for a, b in zip(values, values[1:]))
        True

    ::

        >>> entanglement_estimate(0)
        Traceback (most recent call last):
        ...
        collapsim.exceptions.DomainError: The splitting fraction must lie in (0, 1) but got 0.

    """
    if not 0 < delta < 1:
        raise DomainError(f"The splitting fraction must lie in (0, 1) but got {delta}.")
    half = delta / 2
    return half * abs(1 - math.log(half))


def with_params(params, **changes):
    r"""
    Return a copy of ``params`` with ``changes`` applied.

    EXAMPLES::

        >>> with_params(WalkParams(dt=0.01), max_steps=10).max_steps
        10

    """
    values = dict(vars(params))
    if values["second_schedule"] is values["gamma_schedule"] and "gamma_schedule" in changes:
        values["second_schedule"] = None
    values.update(changes)
    return WalkParams(**values)
