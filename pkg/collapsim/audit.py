r"""
Audits of simulated trajectories.

Every audit replays recorded data, i.e., states, rates and noise increments,
and compares it to an identity that the collapse dynamics must satisfy. The
results are collected in an :class:`AuditReport` of named checks, each with
the largest residual found and the tolerance it was held to.

EXAMPLES::

    >>> report = AuditReport([threshold_check("gamma integral", 0.5, 1.0)])
    >>> report.passed
    True
    >>> report = report + AuditReport([interval_check("frequency", 0.2, 0.25, 0.35)])
    >>> report.passed, report.failed
    (False, ['frequency'])

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

from collapsim.exceptions import AuditError

logger = logging.getLogger("audit")


@dataclass(frozen=True)
class AuditCheck:
    r"""
    A single named check; it passes if its residual does not exceed the
    tolerance.

    EXAMPLES::

        >>> AuditCheck.create("norm", 1e-12, 1e-10).passed
        True
        >>> AuditCheck.create("norm", float("nan"), 1e-10).passed
        False

    """
    name: str
    max_residual: float
    tolerance: float
    passed: bool

    @classmethod
    def create(cls, name, max_residual, tolerance):
        max_residual = float(max_residual)
        tolerance = float(tolerance)
        return cls(name, max_residual, tolerance, bool(max_residual <= tolerance))

    def as_dict(self):
        return {
            "name": self.name,
            "max_residual": _finite(self.max_residual),
            "tolerance": _finite(self.tolerance),
            "passed": self.passed,
        }


def _finite(value):
    return value if math.isfinite(value) else None


def interval_check(name, value, low, high):
    r"""
    Return a check that ``value`` lies in ``[low, high]``; the residual is
    the distance to the interval.

    EXAMPLES::

        >>> interval_check("gamma integral", 2.1, 1, 3).passed
        True
        >>> interval_check("gamma integral", 0.5, 1, 3).max_residual
        0.5

    """
    value = float(value)
    residual = max(low - value, value - high, 0.0) if math.isfinite(value) else math.nan
    return AuditCheck.create(name, residual, 0.0)


def threshold_check(name, value, threshold):
    r"""
    Return a check that ``|value|`` does not exceed ``threshold``.
    """
    return AuditCheck.create(name, abs(float(value)), threshold)


def summarize_checks(checks):
    r"""
    Return one check per name; it passes if all checks of that name pass and
    reports the check closest to (or furthest beyond) its tolerance.

    EXAMPLES::

        >>> checks = [AuditCheck.create("total", 1e-12, 1e-10), AuditCheck.create("total", 5e-11, 1e-10), AuditCheck.create("norm", 0, 0)]
        >>> summarize_checks(checks)
        [AuditCheck(name='total', max_residual=5e-11, tolerance=1e-10, passed=True), AuditCheck(name='norm', max_residual=0.0, tolerance=0.0, passed=True)]

    """
    def severity(check):
        if not math.isfinite(check.max_residual):
            return math.inf
        if check.tolerance <= 0:
            return 0.0 if check.max_residual <= 0 else math.inf
        return check.max_residual / check.tolerance

    worst = {}
    for check in checks:
        current = worst.get(check.name)
        if current is None or severity(check) > severity(current):
            worst[check.name] = check

    return [
        AuditCheck(
            name,
            check.max_residual,
            check.tolerance,
            all(c.passed for c in checks if c.name == name),
        )
        for (name, check) in worst.items()
    ]


class AuditReport:
    r"""
    A collection of :class:`AuditCheck` together with optional per-step
    residual series.

    EXAMPLES::

        >>> report = AuditReport([AuditCheck.create("norm", 1e-12, 1e-10)], {"norm": [1e-12]})
        >>> report.to_dict()
        {'passed': True, 'checks': [{'name': 'norm', 'max_residual': 1e-12, 'tolerance': 1e-10, 'passed': True}], 'series': {'norm': [1e-12]}}

    """

    def __init__(self, checks=(), series=None):
        self.checks = list(checks)
        self.series = dict(series or {})

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    @property
    def failed(self):
        return [check.name for check in self.checks if not check.passed]

    def check(self, name):
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def merge(self, other, prefix=""):
        r"""
        Return a report containing the checks of this and of ``other``, the
        names of the latter prefixed with ``prefix``.
        """
        checks = [
            AuditCheck(prefix + check.name, check.max_residual, check.tolerance, check.passed)
            for check in other.checks
        ]
        series = {prefix + name: values for (name, values) in other.series.items()}
        return AuditReport(self.checks + checks, {**self.series, **series})

    def __add__(self, other):
        return self.merge(other)

    def to_dict(self):
        return {
            "passed": self.passed,
            "checks": [check.as_dict() for check in self.checks],
            "series": {
                name: [_finite(float(value)) for value in values]
                for (name, values) in self.series.items()
            },
        }

    def __repr__(self):
        return f"AuditReport({len(self.checks)} checks, passed={self.passed})"


def _divergence(fields, grid):
    from collapsim.operators import spectral_gradient

    return sum(
        np.real(spectral_gradient(field, grid, axes=[axis])[0])
        for (axis, field) in enumerate(fields)
    )


def density_change_decomposition(before, after, potential, params, gamma, noise, dt, regions=()):
    r"""
    Return an :class:`AuditReport` checking that the change of density from
    ``before`` to ``after`` decomposes into the divergence of the probability
    current and the stochastic term ``(ψ*𝒱ψ)(dξ* + dξ)``.

    The step is replayed: the unitary part is recomputed from ``before``,
    the stochastic part uses the recorded rate ``gamma`` and ``noise``.

    EXAMPLES::

        >>> from collapsim.collapse import CollapseParams, run_trajectory
        >>> from collapsim.grid import GridSpec, Region, init_wavefunction
        >>> from collapsim.operators import PotentialSpec
        >>> grid = GridSpec(points_per_axis=128, extent=16)
        >>> well = PotentialSpec("gaussian_well", depth=-1, range=2)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-3, 3), wavevectors=(1, -1), width=1)
        >>> left = Region.half_space("left", axis=0, threshold=0)
        >>> params = CollapseParams(kappa=1e-2)
        >>> record = run_trajectory(psi, well, params, np.random.default_rng(0), dt=0.005, steps=3, keep_states=True)
        >>> report = density_change_decomposition(record.states[1], record.states[2], well, params, record.gammas[1], record.noises[1], dt=0.005, regions=(left, left.complement()))
        >>> report.passed
        True
        >>> [check.name for check in report.checks]
        ['continuity', 'stochastic', 'total', 'stochastic left', 'stochastic not left']

    Without coupling, the density changes only by the flux::

        >>> params = CollapseParams(kappa=0)
        >>> record = run_trajectory(psi, well, params, np.random.default_rng(0), dt=0.005, steps=1, keep_states=True)
        >>> report = density_change_decomposition(record.states[0], record.states[1], well, params, record.gammas[0], record.noises[0], dt=0.005)
        >>> report.check("stochastic").max_residual
        0.0
        >>> report.passed
        True

    States must live on the same grid::

        >>> other = init_wavefunction(GridSpec(points_per_axis=64, extent=16), "gaussian_packet", width=1)
        >>> density_change_decomposition(psi, other, well, params, record.gammas[0], record.noises[0], dt=0.005)
        Traceback (most recent call last):
        ...
        collapsim.exceptions.AuditError: Cannot audit states on different grids.

    """
    if before.grid != after.grid:
        raise AuditError("Cannot audit states on different grids.")

    from collapsim.collapse import collapse_operator, hamiltonian_part
    from collapsim.operators import observables

    grid = before.grid
    evolved = hamiltonian_part(before, potential, dt)
    twice = hamiltonian_part(evolved, potential, dt)

    rho = before.density
    rho_h = evolved.density
    divergence = _divergence(observables(before, potential).current, grid)
    continuity = np.max(np.abs(rho_h - rho + divergence * dt))
    curvature = np.max(np.abs(twice.density - 2 * rho_h + rho))

    operator = (
        collapse_operator(evolved, potential, params, gamma.gamma)
        if gamma.gamma and params.kappa
        else np.zeros(grid.shape)
    )
    predicted = operator * rho_h * noise.transfer
    residual = after.density - rho_h - predicted
    bound = rho_h * operator**2 * (abs(noise.dxi) ** 2 + noise.dt)
    excess = abs(after.norm_excess)

    checks = [
        AuditCheck.create("continuity", continuity, curvature + 1e-12),
        AuditCheck.create(
            "stochastic",
            np.max(np.abs(residual)),
            2 * (np.max(bound) + excess * np.max(rho_h)) + 1e-14,
        ),
        AuditCheck.create(
            "total",
            abs(
                np.sum(after.density - rho) * grid.cell_volume
                + evolved.absorbed_weight
                - before.absorbed_weight
            ),
            1e-10,
        ),
    ]
    for region in regions:
        mask = region.indicator(grid)
        checks.append(
            AuditCheck.create(
                f"stochastic {region.label}",
                abs(np.sum(residual[mask])) * grid.cell_volume,
                2 * (np.sum(bound[mask]) + excess * np.sum(rho_h[mask])) * grid.cell_volume
                + 1e-12,
            )
        )
    return AuditReport(checks)


def _conserved(which, grid):
    from collapsim.operators import angular_momentum, total_momentum

    if which == "P":
        return lambda amplitudes: total_momentum(amplitudes, grid)
    if which == "L":
        if grid.dims_per_particle != 2:
            raise AuditError("Angular momentum requires two spatial dimensions per particle.")
        return lambda amplitudes: (angular_momentum(amplitudes, grid),)
    raise AuditError(f"Unknown conserved quantity {which!r}; expected 'P' or 'L'.")


def _commutator(Q, field, amplitudes):
    r"""
    Return ``max|Q(fψ) - fQ(ψ)| / max|Q(fψ)|`` for a multiplication by the
    real ``field``.
    """
    applied = Q(field * amplitudes)
    scale = max(float(np.max(np.abs(a))) for a in applied)
    if scale == 0:
        return 0.0
    residual = max(
        float(np.max(np.abs(a - field * b))) for a, b in zip(applied, Q(amplitudes))
    )
    return residual / scale


def _expectation(Q, psi):
    return np.array(
        [
            float(np.real(np.vdot(psi.amplitudes, q)) * psi.grid.cell_volume)
            for q in Q(psi.amplitudes)
        ]
    )


def conservation_report(record, which, drift_tolerance=None):
    r"""
    Return an :class:`AuditReport` checking that the collapse operator
    commutes with the total momentum (``which="P"``) or with the total
    angular momentum (``which="L"``) along the trajectory ``record``.

    Three properties are checked:

    - ``commutator``: ``Q̂(𝒱ψ)`` and ``𝒱Q̂ψ`` agree pointwise relative to
      ``|Q̂(𝒱ψ)|`` up to ten times the residual of the bare potential on the
      initial state, and at least up to 1e-8.

    - ``transfer``: the local density ``Re(ψ*Q̂ψ)`` changes in every point by
      the same factor as the probability density, up to the pointwise
      commutator of ``Q̂`` with the stochastic update.

    - ``drift`` (if ``drift_tolerance`` is given): ``⟨Q̂⟩`` does not move
      away from its value on the unitary trajectory from the same initial
      state by more than ``drift_tolerance`` relative to
      ``max(|⟨Q̂⟩|, ‖Q̂ψ‖)``.

    The series ``drift`` holds this difference, the series ``total drift``
    the change of ``⟨Q̂⟩`` since the initial state which includes the error
    of the unitary step.

    The trajectory must have been recorded with its states.

    EXAMPLES::

        >>> from collapsim.collapse import CollapseParams, run_trajectory
        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> from collapsim.operators import PotentialSpec
        >>> grid = GridSpec(points_per_axis=128, extent=16)
        >>> well = PotentialSpec("gaussian_well", depth=-1, range=2)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-3, 3), wavevectors=(1, -1), width=1)
        >>> record = run_trajectory(psi, well, CollapseParams(kappa=1e-2), np.random.default_rng(0), dt=0.005, steps=5, keep_states=True)
        >>> report = conservation_report(record, "P", drift_tolerance=1e-3)
        >>> report.passed
        True
        >>> len(report.series["P drift"])
        6

    Free evolution conserves momentum::

        >>> free = PotentialSpec(depth=0)
        >>> record = run_trajectory(psi, free, CollapseParams(kappa=0), np.random.default_rng(0), dt=0.005, steps=5, keep_states=True)
        >>> report = conservation_report(record, "P", drift_tolerance=1e-10)
        >>> report.passed, max(report.series["P total drift"]) < 1e-10
        (True, True)

    A rotating pair in a central potential keeps its angular momentum::

        >>> grid = GridSpec(dims_per_particle=2, points_per_axis=32, extent=12)
        >>> psi = init_wavefunction(grid, "rotating_pair", width=1.5, relative_width=1.5, winding=1)
        >>> well = PotentialSpec("gaussian_well", depth=-1, range=1.5)
        >>> record = run_trajectory(psi, well, CollapseParams(kappa=1e-3), np.random.default_rng(0), dt=0.01, steps=3, keep_states=True)
        >>> report = conservation_report(record, "L", drift_tolerance=1e-6)
        >>> report.passed
        True

    A state that does not follow the stochastic update is flagged::

        >>> from collapsim.collapse import TrajectoryRecord
        >>> tampered = TrajectoryRecord(record.initial, well, record.params, record.dt)
        >>> tampered.states = record.states[:2] + [record.states[2].evolve(np.roll(record.states[2].amplitudes, 1, axis=1))]
        >>> tampered.gammas, tampered.noises = record.gammas[:2], record.noises[:2]
        >>> conservation_report(tampered, "L").failed
        ['transfer']

    """
    from collapsim.collapse import collapse_operator, hamiltonian_part

    grid = record.initial.grid
    Q = _conserved(which, grid)
    if not record.kept_states:
        raise AuditError("Conservation audits need a trajectory recorded with its states.")

    potential, params = record.potential, record.params
    baseline = _commutator(Q, potential.on_grid(grid), record.initial.amplitudes)
    logger.debug(f"Commutator baseline of {which} on this grid is {baseline:.3g}.")

    commutators = []
    transfers = []
    for before, after, gamma, noise in zip(
        record.states, record.states[1:], record.gammas, record.noises
    ):
        if not (gamma.gamma and params.kappa):
            commutators.append(0.0)
            transfers.append(0.0)
            continue
        evolved = hamiltonian_part(before, potential, record.dt)
        operator = collapse_operator(evolved, potential, params, gamma.gamma)
        commutators.append(_commutator(Q, operator, evolved.amplitudes))

        update = 1 + operator * noise.dxi - 0.5 * operator**2 * noise.dt
        rescale = 1 + after.norm_excess
        Q_evolved = Q(evolved.amplitudes)
        scale = float(np.max(np.abs(evolved.amplitudes))) * max(
            float(np.max(np.abs(q))) for q in Q_evolved
        )
        excess = 0.0
        for q_after, q, q_updated in zip(
            Q(after.amplitudes), Q_evolved, Q(update * evolved.amplitudes)
        ):
            residual = np.abs(
                np.real(np.conj(after.amplitudes) * q_after)
                - np.abs(update) ** 2 / rescale * np.real(np.conj(evolved.amplitudes) * q)
            )
            bound = (
                np.abs(update * evolved.amplitudes) * np.abs(q_updated - update * q) / rescale
            )
            excess = max(excess, float(np.max(residual - bound)))
        transfers.append(max(excess, 0.0) / scale if scale else 0.0)

    checks = [
        AuditCheck.create(
            "commutator", max(commutators, default=0.0), max(10 * baseline, 1e-8)
        ),
        AuditCheck.create("transfer", max(transfers, default=0.0), 1e-10),
    ]

    initial = _expectation(Q, record.initial)
    norm = math.sqrt(
        sum(
            float(np.sum(np.abs(q) ** 2)) * grid.cell_volume
            for q in Q(record.initial.amplitudes)
        )
    )
    scale = max(float(np.linalg.norm(initial)), norm)

    drift = []
    total = []
    reference = record.initial
    for state in record.states:
        expectation = _expectation(Q, state)
        drift.append(float(np.linalg.norm(expectation - _expectation(Q, reference))) / scale)
        total.append(float(np.linalg.norm(expectation - initial)) / scale)
        reference = hamiltonian_part(reference, potential, record.dt)
    if drift_tolerance is not None:
        checks.append(AuditCheck.create("drift", max(drift), drift_tolerance))

    return AuditReport(
        checks,
        {
            f"{which} commutator": commutators,
            f"{which} drift": drift,
            f"{which} total drift": total,
        },
    )


@dataclass(frozen=True)
class EnergyDeviationTerms:
    r"""
    The terms of the energy change of a stochastic update, see
    :func:`energy_deviation_terms`.
    """
    proportional_term: float
    gradient_term: float
    quadratic_term: float
    ke_relativistic_correction: float
    closure: float

    def as_row(self):
        return {
            "proportional": self.proportional_term,
            "gradient": self.gradient_term,
            "quadratic": self.quadratic_term,
            "relativistic": self.ke_relativistic_correction,
            "closure": self.closure,
        }


def energy_deviation_terms(psi, spec, params, g, n):
    r"""
    Return the :class:`EnergyDeviationTerms` of the stochastic update of
    ``psi`` with rate ``g`` and noise ``n``.

    With ``M = 1 + 𝒱dξ - ½𝒱²dt``, the update changes the energy by

        ∫(|M|² - 1)(|∇ψ|²/2m + V|ψ|²) + ∫Re(M∇ψ·(ψ∇M)*)/m + ∫|ψ|²|∇M|²/2m

    before normalization; the three integrals divided by ``dt`` are the
    returned terms.

    EXAMPLES:

    Stationary states are not affected::

        >>> from collapsim.collapse import CollapseParams, gamma_jk, sample_noise
        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> from collapsim.operators import PotentialSpec, observables
        >>> harmonic = PotentialSpec("harmonic", depth=1)
        >>> grid = GridSpec(points_per_axis=64, extent=8)
        >>> ground = init_wavefunction(grid, "pair_ground_state", potential=harmonic)
        >>> params = CollapseParams(kappa=1e-4, E0=observables(ground, harmonic).mean_H)
        >>> terms = energy_deviation_terms(ground, harmonic, params, gamma_jk(ground, harmonic, params), sample_noise(np.random.default_rng(0), 0.005))
        >>> max(abs(terms.proportional_term), abs(terms.gradient_term), abs(terms.quadratic_term)) < 1e-10
        True

    The terms account for the actual change of energy::

        >>> grid = GridSpec(points_per_axis=128, extent=16)
        >>> well = PotentialSpec("gaussian_well", depth=-1, range=2)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-2, 2), wavevectors=(1, -1), width=1)
        >>> params = CollapseParams(kappa=1e-2)
        >>> noise = sample_noise(np.random.default_rng(0), 0.005)
        >>> terms = energy_deviation_terms(psi, well, params, gamma_jk(psi, well, params), noise)
        >>> terms.quadratic_term >= 0
        True
        >>> abs(terms.closure) < 1e-6 * (abs(terms.proportional_term) + abs(terms.gradient_term) + terms.quadratic_term)
        True

    The gradient term is linear and the quadratic term quadratic in the
    coupling::

        >>> from scipy.stats import linregress
        >>> kappas = [1e-4, 2e-4, 4e-4]
        >>> g = gamma_jk(psi, well, CollapseParams(kappa=1e-4))
        >>> sweep = [energy_deviation_terms(psi, well, CollapseParams(kappa=kappa), g, noise) for kappa in kappas]
        >>> abs(linregress(np.log(kappas), np.log([abs(t.gradient_term) for t in sweep])).slope - 1) < 0.2
        True
        >>> abs(linregress(np.log(kappas), np.log([t.quadratic_term for t in sweep])).slope - 2) < 0.3
        True

    """
    from collapsim.collapse import collapse_operator
    from collapsim.operators import energy, observables, spectral_gradient

    grid = psi.grid
    amplitudes = psi.amplitudes
    dt = n.dt
    rest_energy = params.total_rest_energy(spec)
    kinetic = observables(psi, spec).kinetic
    relativistic = -(kinetic**2) / (2 * rest_energy)

    if not (g.gamma and params.kappa and spec.scale):
        return EnergyDeviationTerms(0.0, 0.0, 0.0, relativistic, 0.0)

    operator = collapse_operator(psi, spec, params, g.gamma)
    c = math.sqrt(g.gamma) * params.kappa / spec.scale
    M = 1 + operator * n.dxi - 0.5 * operator**2 * dt

    gradient_V = list(spec.gradients(grid))
    gradient_V = gradient_V + [-component for component in gradient_V]
    gradient_M = [c * dV * n.dxi - c * operator * dV * dt for dV in gradient_V]
    gradient_psi = spectral_gradient(amplitudes, grid)
    masses = grid.mass_per_axis

    local = sum(np.abs(dpsi) ** 2 / (2 * m) for dpsi, m in zip(gradient_psi, masses))
    local = local + spec.on_grid(grid) * psi.density
    proportional = np.sum((np.abs(M) ** 2 - 1) * local)
    gradient = sum(
        np.sum(np.real(M * dpsi * np.conj(amplitudes * dM))) / m
        for dpsi, dM, m in zip(gradient_psi, gradient_M, masses)
    )
    quadratic = sum(
        np.sum(psi.density * np.abs(dM) ** 2) / (2 * m)
        for dM, m in zip(gradient_M, masses)
    )
    proportional, gradient, quadratic = (
        float(value) * grid.cell_volume for value in (proportional, gradient, quadratic)
    )

    change = energy(M * amplitudes, grid, spec) - energy(amplitudes, grid, spec)
    closure = change - proportional - gradient - quadratic

    return EnergyDeviationTerms(
        proportional / dt, gradient / dt, quadratic / dt, relativistic, closure / dt
    )


def energy_deviation_series(record):
    r"""
    Return the :class:`EnergyDeviationTerms` of every step of ``record`` as
    a data frame.

    EXAMPLES::

        >>> from collapsim.collapse import CollapseParams, run_trajectory
        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> from collapsim.operators import PotentialSpec
        >>> grid = GridSpec(points_per_axis=64, extent=16)
        >>> well = PotentialSpec("gaussian_well", depth=-1, range=2)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-3, 3), wavevectors=(1, -1), width=1.5)
        >>> record = run_trajectory(psi, well, CollapseParams(kappa=1e-4), np.random.default_rng(0), dt=0.01, steps=4, keep_states=True)
        >>> energy_deviation_series(record).columns.tolist()
        ['t', 'proportional', 'gradient', 'quadratic', 'relativistic', 'closure']

    """
    import pandas as pd

    from collapsim.collapse import hamiltonian_part

    if not record.kept_states:
        raise AuditError("Energy audits need a trajectory recorded with its states.")

    rows = []
    for before, gamma, noise in zip(record.states, record.gammas, record.noises):
        evolved = hamiltonian_part(before, record.potential, record.dt)
        terms = energy_deviation_terms(evolved, record.potential, record.params, gamma, noise)
        rows.append({"t": evolved.time, **terms.as_row()})
    return pd.DataFrame(
        rows, columns=["t", "proportional", "gradient", "quadratic", "relativistic", "closure"]
    )


def energy_report(series, relative_tolerance=1e-6):
    r"""
    Return an :class:`AuditReport` checking that the terms in ``series``
    (see :func:`energy_deviation_series`) account for the change of energy
    and that the quadratic term does not become negative.

    The signed integral of the gradient term, where deviations while the
    particles approach and recede partially cancel, is reported as a series
    without tolerance.
    """
    if len(series) == 0:
        return AuditReport()
    scale = (
        series["proportional"].abs() + series["gradient"].abs() + series["quadratic"].abs()
    )
    closure = (series["closure"].abs() - relative_tolerance * scale).clip(lower=0)
    dt = float(series["t"].diff().median()) if len(series) > 1 else 0.0
    return AuditReport(
        [
            AuditCheck.create("energy closure", float(closure.max()), 1e-12),
            AuditCheck.create("quadratic sign", float((-series["quadratic"]).clip(lower=0).max()), 0.0),
        ],
        {"gradient integral": (series["gradient"].cumsum() * dt).tolist()},
    )


def martingale_check(traces, initial=None, sigma=3):
    r"""
    Return an :class:`AuditReport` checking that the mean weight at every
    checkpoint stays within ``sigma`` standard errors of ``initial``.

    ``traces`` holds one row per walk and one column per checkpoint;
    ``initial`` defaults to the mean of the first column.

    EXAMPLES::

        >>> from collapsim.branchwalk import WalkParams, run_walks
        >>> params = WalkParams(dt=0.01, max_steps=2000, checkpoints=(10, 100, 1000))
        >>> batch = run_walks(0.3, params, [np.random.default_rng(i) for i in range(1500)])
        >>> martingale_check(batch.checkpoints, initial=0.3, sigma=4).passed
        True

    Constant traces pass trivially::

        >>> martingale_check(np.full((100, 3), 0.5)).passed
        True

    A drift is detected::

        >>> drifting = batch.checkpoints + 1e-4 * np.array([10, 100, 1000])
        >>> martingale_check(drifting, initial=0.3).passed
        False

    """
    traces = np.asarray(traces, dtype=float)
    if traces.ndim != 2 or traces.shape[0] < 100:
        raise ValueError("A martingale check needs at least 100 traces.")
    initial = float(np.mean(traces[:, 0])) if initial is None else float(initial)

    count = traces.shape[0]
    deviations = np.abs(np.mean(traces, axis=0) - initial)
    errors = np.std(traces, axis=0, ddof=1) / math.sqrt(count)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(deviations == 0, 0.0, deviations / errors)
    return AuditReport(
        [AuditCheck.create("martingale", float(np.max(z)), sigma)],
        {"martingale z": z.tolist()},
    )
