r"""
Stochastic collapse dynamics of an interacting pair.

A single complex Wiener increment ``dξ`` with ``E[dξ*dξ] = dt`` drives the
nonlinear update

    ψ → ψ + 𝒱ψ dξ - ½𝒱²ψ dt

with the mean-zero collapse operator ``𝒱 = √γ·κ·(V - ⟨V⟩)/V̄``. The rate
``γ`` compares how fast the expected interaction energy changes to the energy
of the interacting part of the pair in its centre-of-mass frame; it
vanishes for stationary states and for pairs that do not interact.

EXAMPLES::

    >>> import numpy as np
    >>> from collapsim.grid import GridSpec, init_wavefunction
    >>> from collapsim.operators import PotentialSpec
    >>> grid = GridSpec(points_per_axis=128, extent=16)
    >>> well = PotentialSpec("gaussian_well", depth=-1, range=2)
    >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-3, 3), wavevectors=(1, -1), width=1)
    >>> params = CollapseParams(kappa=1e-2)
    >>> step = sde_step(psi, well, params, np.random.default_rng(1), dt=0.005)
    >>> step.gamma.gamma > 0
    True
    >>> abs(step.state.norm2 - 1) < 1e-12
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
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from collapsim.exceptions import CollapseConfigurationError, ScenarioConfigError

logger = logging.getLogger("collapse")


@dataclass(frozen=True)
class NoiseIncrement:
    r"""
    A complex Wiener increment ``dξ`` over a time step ``dt``.

    EXAMPLES::

        >>> noise = NoiseIncrement(0.005 + 0.002j, dt=1e-4)
        >>> noise.transfer
        0.01

    """
    dxi: complex
    dt: float

    @property
    def transfer(self):
        r"""
        Return the real increment ``dξ* + dξ`` that moves weight between
        branches; its variance is ``2dt``.
        """
        return float((np.conj(self.dxi) + self.dxi).real)


def sample_noises(rng, dt, count):
    r"""
    Return ``count`` complex increments ``(g₁ + i·g₂)·√(dt/2)`` drawn from
    ``rng``.

    EXAMPLES:

    The increments obey the Itô rules ``E[dξ] = 0``, ``E[dξ*dξ] = dt`` and
    ``E[dξ·dξ] = 0``::

        >>> dt = 1e-3
        >>> dxi = sample_noises(np.random.default_rng(7), dt, 10**6)
        >>> standard_error = np.sqrt(dt / 10**6)
        >>> bool(abs(dxi.mean()) < 4 * standard_error)
        True
        >>> bool(abs(np.mean(np.abs(dxi) ** 2) / dt - 1) < 0.01)
        True
        >>> bool(abs(np.mean(dxi**2)) < 4 * dt / np.sqrt(10**6))
        True

    """
    if not dt > 0:
        raise ValueError(f"Time step must be positive but got {dt}.")
    g = rng.standard_normal((2, count))
    return (g[0] + 1j * g[1]) * np.sqrt(dt / 2)


def sample_noise(rng, dt):
    r"""
    Return a single :class:`NoiseIncrement` drawn from ``rng``.

    EXAMPLES::

        >>> noise = sample_noise(np.random.default_rng(0), dt=0.01)
        >>> noise.dt
        0.01
        >>> noise == sample_noise(np.random.default_rng(0), dt=0.01)
        True

    """
    return NoiseIncrement(complex(sample_noises(rng, dt, 1)[0]), dt)


class CollapseParams:
    r"""
    Parameters of the collapse term.

    INPUT:

    - ``kappa`` -- the dimensionless coupling ``V̄/((m_j + m_k)c²)``

    - ``E0`` -- the ground state energy subtracted in the centre-of-mass frame
      energy (0 for scattering)

    - ``guard`` -- relative threshold; when ``|⟨V⟩|`` is below ``guard·V̄`` the
      interaction is treated as inactive

    - ``rest_energy`` -- the rest energy ``(m_j + m_k)c²``; derived from
      ``kappa`` if not given

    - ``frame`` -- ``"literal"`` evaluates ``⟨ψ_cm|Ĥ - E₀|ψ_cm⟩`` for the
      weighted centre-of-mass frame state ``ψ_cm``; ``"interacting"`` uses
      the energy per unit weight of ``ψ_cm`` times the interacting weight
      ``⟨V⟩²/⟨V²⟩`` which does not depend on the amplitude of the
      interacting branch

    EXAMPLES::

        >>> params = CollapseParams.from_rest_energy(depth=-1, rest_energy=1e4)
        >>> params.kappa
        0.0001
        >>> params.physical
        True

    Larger couplings are accepted but flagged::

        >>> CollapseParams(kappa=1e-2).physical
        False

    ::

        >>> CollapseParams(kappa=1e-2, frame="relativistic")
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: Unknown frame 'relativistic'; expected 'literal' or 'interacting'.

    """
    PHYSICAL_BOUND = 5e-4

    def __init__(self, kappa, E0=0.0, guard=1e-12, rest_energy=None, frame="literal"):
        if kappa < 0:
            raise ScenarioConfigError(f"kappa must not be negative but got {kappa}.")
        if frame not in ("literal", "interacting"):
            raise ScenarioConfigError(
                f"Unknown frame {frame!r}; expected 'literal' or 'interacting'."
            )
        self.kappa = float(kappa)
        self.E0 = float(E0)
        self.guard = float(guard)
        self.rest_energy = None if rest_energy is None else float(rest_energy)
        self.frame = frame

        if self.kappa > self.PHYSICAL_BOUND:
            logger.warning(
                f"Coupling kappa={self.kappa} exceeds {self.PHYSICAL_BOUND}; this scenario is not physical."
            )

    @classmethod
    def from_rest_energy(cls, depth, rest_energy, **kwargs):
        r"""
        Return parameters with ``κ = |V₀|/((m_j + m_k)c²)``.
        """
        if not rest_energy > 0:
            raise ScenarioConfigError(
                f"Rest energy must be positive but got {rest_energy}."
            )
        return cls(abs(depth) / rest_energy, rest_energy=rest_energy, **kwargs)

    @property
    def physical(self):
        return 0 < self.kappa <= self.PHYSICAL_BOUND

    def threshold(self, potential):
        return self.guard * potential.scale

    def total_rest_energy(self, potential):
        r"""
        Return ``(m_j + m_k)c²``, infinite when there is no coupling.

        EXAMPLES::

            >>> from collapsim.operators import PotentialSpec
            >>> CollapseParams(kappa=1e-2).total_rest_energy(PotentialSpec(depth=-2))
            200.0
            >>> CollapseParams(kappa=0).total_rest_energy(PotentialSpec(depth=-2))
            inf

        """
        if self.rest_energy is not None:
            return self.rest_energy
        if self.kappa == 0:
            return np.inf
        return potential.scale / self.kappa

    def __repr__(self):
        return f"CollapseParams(kappa={self.kappa}, E0={self.E0}, frame={self.frame!r})"


@dataclass(frozen=True)
class GammaRecord:
    r"""
    The rate parameter ``γ`` at time ``t`` together with its ingredients.

    ``active`` is not set when ``|⟨V⟩|`` fell below the guard threshold; all
    other entries are zero then.
    """
    t: float
    gamma: float
    numerator: float
    denominator: float
    u_com: tuple
    active: bool = True

    @classmethod
    def inactive(cls, t, dims):
        return cls(t, 0.0, 0.0, 0.0, (0.0,) * dims, active=False)

    def as_row(self):
        row = {
            "t": self.t,
            "gamma": self.gamma,
            "numerator": self.numerator,
            "denominator": self.denominator,
        }
        row.update({f"u_{a}": u for (a, u) in enumerate(self.u_com)})
        return row


class _Interaction:
    r"""
    The weighting ``V/⟨V⟩`` and the spectral gradient of a state, shared by
    the computation of the centre-of-mass velocity and of ``γ``.
    """

    def __init__(self, psi, potential, params):
        self.psi = psi
        self.grid = psi.grid
        self.potential = potential
        self.V = potential.on_grid(self.grid)
        self.mean_V = float(
            np.sum(self.V * psi.density) * self.grid.cell_volume / psi.norm2
        )
        self.active = abs(self.mean_V) > params.threshold(potential)
        if not self.active:
            logger.debug(f"No active interaction at t={psi.time}, ⟨V⟩={self.mean_V:.3g}.")

    @cached_property
    def gradient(self):
        from collapsim.operators import spectral_gradient

        return spectral_gradient(self.psi.amplitudes, self.grid)

    @cached_property
    def weighting(self):
        return self.V / self.mean_V

    @cached_property
    def u(self):
        d = self.grid.dims_per_particle
        M = sum(self.grid.masses)
        conj = np.conj(self.psi.amplitudes)
        return np.array(
            [
                float(
                    np.real(
                        np.sum(
                            self.weighting
                            * conj
                            * (-1j / M)
                            * (self.gradient[a] + self.gradient[d + a])
                        )
                    )
                    * self.grid.cell_volume
                )
                for a in range(d)
            ]
        )

    @cached_property
    def potential_rate(self):
        r"""
        Return the Hermitian part of ``∫ψ*(∇_jV·v̂_j + ∇_kV·v̂_k)ψ``, i.e., the
        rate of change of ``⟨V⟩``.

        The anti-Hermitian part must equal ``i⟨∇²V⟩(1/m_j + 1/m_k)/2``; a
        residue beyond that is logged.

        EXAMPLES::

            >>> from collapsim.grid import GridSpec, init_wavefunction
            >>> from collapsim.operators import PotentialSpec
            >>> grid = GridSpec(points_per_axis=128, extent=16, masses=(1, 3))
            >>> well = PotentialSpec("gaussian_well", depth=-1, range=2)
            >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-2, 2), wavevectors=(1, -1), width=1)
            >>> interaction = _Interaction(psi, well, CollapseParams(kappa=1e-2))
            >>> interaction.potential_rate < 0
            True
            >>> interaction.residue < 1e-8
            True

        """
        d = self.grid.dims_per_particle
        m_j, m_k = self.grid.masses
        integrand = np.zeros(self.grid.shape, dtype=complex)
        for a, dV in enumerate(self.potential.gradients(self.grid)):
            integrand += dV * (-1j / m_j) * self.gradient[a]
            integrand -= dV * (-1j / m_k) * self.gradient[d + a]
        value = complex(
            np.sum(np.conj(self.psi.amplitudes) * integrand) * self.grid.cell_volume
        )
        curvature = float(
            np.sum(self.potential.laplacian(self.grid) * self.psi.density)
            * self.grid.cell_volume
        ) * (1 / m_j + 1 / m_k) / 2

        self.residue = abs(value.imag - curvature)
        if self.residue > 1e-6 * max(abs(value), abs(curvature), 1e-12):
            logger.warning(
                f"Rate of change of ⟨V⟩ at t={self.psi.time} has an imaginary residue of {self.residue:.3g}."
            )
        return value.real

    def centre_of_mass_state(self):
        r"""
        Return the weighted state transformed into the centre-of-mass frame
        moving with velocity ``u``.
        """
        d = self.grid.dims_per_particle
        m_j, m_k = self.grid.masses
        M = m_j + m_k
        phase = -0.5 * M * float(np.sum(self.u**2)) * self.psi.time
        for a in range(d):
            phase = phase - self.u[a] * (
                m_j * self.grid.coordinates[a] + m_k * self.grid.coordinates[d + a]
            )
        return self.weighting * self.psi.amplitudes * np.exp(1j * phase)


def com_velocity(psi, spec, params):
    r"""
    Return the velocity ``u`` of the interacting part of ``psi``, i.e., the
    total momentum weighted by ``V/⟨V⟩`` divided by the total mass.

    When ``|⟨V⟩|`` is below the guard threshold there is no active
    interaction and the zero vector is returned.

    EXAMPLES:

    A real wave function does not move::

        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> from collapsim.operators import PotentialSpec
        >>> grid = GridSpec(points_per_axis=128, extent=16)
        >>> well = PotentialSpec("gaussian_well", depth=-1, range=2)
        >>> params = CollapseParams(kappa=1e-2)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-1, 1), width=1)
        >>> float(np.max(np.abs(com_velocity(psi, well, params)))) < 1e-12
        True

    A common boost by ``k`` moves the pair with ``2k/(m_j + m_k)``::

        >>> grid = GridSpec(points_per_axis=128, extent=16, masses=(1, 3))
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-1, 1), wavevectors=(0.8, 0.8), width=1)
        >>> abs(float(com_velocity(psi, well, params)[0]) - 2 * 0.8 / 4) < 0.004
        True

    A branch where the pair does not interact does not contribute::

        >>> grid = GridSpec(points_per_axis=128, extent=24)
        >>> both = init_wavefunction(grid, "two_branch", weights=(0.5, 0.5), separation=20, momentum=1, detector=-11)
        >>> interacting = init_wavefunction(grid, "two_branch", weights=(1, 0), separation=20, momentum=1, detector=-11)
        >>> float(np.max(np.abs(com_velocity(both, well, params) - com_velocity(interacting, well, params)))) < 1e-9
        True

    """
    interaction = _Interaction(psi, spec, params)
    if not interaction.active:
        return np.zeros(psi.grid.dims_per_particle)
    return interaction.u


def gamma_jk(psi, spec, params):
    r"""
    Return the :class:`GammaRecord` of ``psi`` for the pair potential
    ``spec``.

    The numerator is the absolute value of the rate of change of ``⟨V⟩``,
    ``|Re ∫ψ*(∇_jV·v̂_j + ∇_kV·v̂_k)ψ|`` with the velocity operators
    ``v̂ = -i∇/m``; the denominator is the energy of the interacting part of
    the pair above ``E₀`` in its centre-of-mass frame.

    EXAMPLES:

    A stationary state does not collapse::

        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> from collapsim.operators import PotentialSpec, observables
        >>> harmonic = PotentialSpec("harmonic", depth=1)
        >>> grid = GridSpec(points_per_axis=64, extent=8)
        >>> ground = init_wavefunction(grid, "pair_ground_state", potential=harmonic)
        >>> E0 = observables(ground, harmonic).mean_H
        >>> gamma_jk(ground, harmonic, CollapseParams(kappa=1e-4, E0=E0)).gamma < 1e-10
        True

    Nor do packets that are far apart::

        >>> well = PotentialSpec("gaussian_well", depth=-1, range=1)
        >>> grid = GridSpec(points_per_axis=128, extent=20)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-5, 5), wavevectors=(1, -1), width=1)
        >>> gamma_jk(psi, well, CollapseParams(kappa=1e-4)).gamma < 1e-8
        True

    Overlapping packets that approach each other do::

        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-2, 2), wavevectors=(1, -1), width=1)
        >>> record = gamma_jk(psi, well, CollapseParams(kappa=1e-4))
        >>> record.gamma > 0, record.active
        (True, True)

    The time entering the phase of the centre-of-mass frame state does not
    change its energy::

        >>> params = CollapseParams(kappa=1e-4)
        >>> boosted = init_wavefunction(grid, "gaussian_packet", centers=(-2, 2), wavevectors=(1.5, -0.5), width=1)
        >>> a = gamma_jk(boosted, well, params).denominator
        >>> b = gamma_jk(boosted.evolve(boosted.amplitudes, time=10), well, params).denominator
        >>> abs(a - b) < 1e-12 * abs(a)
        True

    With the ``interacting`` frame, the rate does not depend on the weight
    of the interacting branch::

        >>> grid = GridSpec(points_per_axis=128, extent=24, masses=(20, 1))
        >>> params = CollapseParams(kappa=1e-2, E0=-2, frame="interacting")
        >>> small = init_wavefunction(grid, "two_branch", weights=(0.2, 0.8), separation=20, momentum=1, detector=-9)
        >>> large = init_wavefunction(grid, "two_branch", weights=(0.6, 0.4), separation=20, momentum=1, detector=-9)
        >>> a, b = gamma_jk(small, well, params).gamma, gamma_jk(large, well, params).gamma
        >>> abs(a - b) < 1e-6 * a
        True

    """
    interaction = _Interaction(psi, spec, params)
    grid = psi.grid
    if not interaction.active:
        return GammaRecord.inactive(psi.time, grid.dims_per_particle)

    from collapsim.operators import energy

    numerator = abs(interaction.potential_rate)

    psi_cm = interaction.centre_of_mass_state()
    weight = float(np.sum(np.abs(psi_cm) ** 2) * grid.cell_volume)
    denominator = energy(psi_cm, grid, spec) - params.E0 * weight
    if params.frame == "interacting":
        denominator = denominator / weight**2

    if not denominator > 0:
        raise CollapseConfigurationError(
            f"Centre-of-mass frame energy {denominator:.6g} is not positive; the ground state energy E0={params.E0} exceeds the energy of the state."
        )

    return GammaRecord(
        t=psi.time,
        gamma=numerator / denominator,
        numerator=numerator,
        denominator=denominator,
        u_com=tuple(float(u) for u in interaction.u),
    )


def collapse_operator(psi, spec, params, gamma):
    r"""
    Return the collapse operator ``√γ·κ·(V - ⟨V⟩)/V̄`` of ``psi`` as a real
    field on the grid.

    EXAMPLES:

    The operator has zero mean in the state it is built from::

        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> from collapsim.operators import PotentialSpec
        >>> grid = GridSpec(points_per_axis=128, extent=16)
        >>> well = PotentialSpec("gaussian_well", depth=-1, range=2)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-1, 2), width=1)
        >>> operator = collapse_operator(psi, well, CollapseParams(kappa=0.1), gamma=2.0)
        >>> abs(float(np.sum(operator * psi.density) * grid.cell_volume)) < 1e-12
        True

    """
    V = spec.on_grid(psi.grid)
    if not spec.scale:
        return np.zeros(psi.grid.shape)
    mean_V = np.sum(V * psi.density) * psi.grid.cell_volume / psi.norm2
    return np.sqrt(gamma) * params.kappa * (V - mean_V) / spec.scale


def apply_stochastic(psi, spec, params, g, n):
    r"""
    Return ``psi`` updated by ``𝒱ψ dξ - ½𝒱²ψ dt`` and rescaled to the norm
    of ``psi``.

    The relative norm excess before rescaling is recorded in the returned
    state. Weight that an absorbing layer removed earlier stays removed.

    EXAMPLES::

        >>> from collapsim.grid import GridSpec, Region, branch_weight, init_wavefunction
        >>> from collapsim.operators import PotentialSpec
        >>> grid = GridSpec(points_per_axis=64, extent=20)
        >>> well = PotentialSpec("gaussian_well", depth=-1, range=2)
        >>> psi = init_wavefunction(grid, "two_branch", weights=(0.3, 0.7), separation=20, width=1.5, detector=-9)
        >>> params = CollapseParams(kappa=0.5)
        >>> g = GammaRecord(t=0, gamma=1.0, numerator=1.0, denominator=1.0, u_com=(0.0,))
        >>> left = Region.half_space("left", axis=0, threshold=0)

    Weight moves from one branch to the other::

        >>> after = apply_stochastic(psi, well, params, g, NoiseIncrement(0.01, dt=1e-3))
        >>> gain = branch_weight(after, left) - branch_weight(psi, left)
        >>> loss = branch_weight(psi, left.complement()) - branch_weight(after, left.complement())
        >>> gain != 0, abs(gain - loss) < 1e-10
        (True, True)

    On average, weights do not move::

        >>> rng = np.random.default_rng(3)
        >>> changes = np.array([branch_weight(apply_stochastic(psi, well, params, g, sample_noise(rng, 1e-3)), left) - 0.3 for _ in range(1000)])
        >>> bool(abs(changes.mean()) < 4 * changes.std() / np.sqrt(1000))
        True

    Nothing happens without a rate::

        >>> g = GammaRecord(t=0, gamma=0.0, numerator=0.0, denominator=1.0, u_com=(0.0,))
        >>> apply_stochastic(psi, well, params, g, NoiseIncrement(0.01, dt=1e-3)) is psi
        True

    """
    if g.gamma == 0 or params.kappa == 0:
        return psi

    operator = collapse_operator(psi, spec, params, g.gamma)
    amplitudes = psi.amplitudes
    amplitudes = (
        amplitudes + operator * amplitudes * n.dxi - 0.5 * operator**2 * amplitudes * n.dt
    )
    excess = float(np.sum(np.abs(amplitudes) ** 2) * psi.grid.cell_volume) / psi.norm2
    return psi.evolve(amplitudes / np.sqrt(excess), norm_excess=excess - 1)


class StepResult(NamedTuple):
    state: object
    gamma: GammaRecord
    noise: NoiseIncrement


def hamiltonian_part(psi, spec, dt):
    r"""
    Return the unitary part of :func:`sde_step`, including the absorbing
    layer of the grid if configured.
    """
    from collapsim.operators import hamiltonian_step

    evolved = hamiltonian_step(psi, spec, dt)
    if psi.grid.absorbing_width:
        evolved = evolved.absorbed()
    return evolved


def sde_step(psi, spec, params, rng, dt):
    r"""
    Return the state after one step of the stochastic collapse equation
    together with the rate and the noise used.

    The unitary step comes first, the stochastic update is evaluated on its
    result. One noise increment is drawn per step, even if the rate
    vanishes, so that a stream of random numbers always maps to the same
    steps.

    EXAMPLES:

    Without coupling, this is exactly the unitary step::

        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> from collapsim.operators import PotentialSpec, hamiltonian_step
        >>> grid = GridSpec(points_per_axis=128, extent=16)
        >>> well = PotentialSpec("gaussian_well", depth=-1, range=2)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-3, 3), wavevectors=(1, -1), width=1)
        >>> step = sde_step(psi, well, CollapseParams(kappa=0), np.random.default_rng(0), dt=0.005)
        >>> np.array_equal(step.state.amplitudes, hamiltonian_step(psi, well, 0.005).amplitudes)
        True

    This holds for bound pairs whose energy lies below ``E₀`` as well; the
    rate is not evaluated then::

        >>> deep = PotentialSpec("gaussian_well", depth=-4, range=2)
        >>> bound = init_wavefunction(grid, "gaussian_packet", centers=(0, 0), width=1)
        >>> step = sde_step(bound, deep, CollapseParams(kappa=0), np.random.default_rng(0), dt=0.005)
        >>> np.array_equal(step.state.amplitudes, hamiltonian_step(bound, deep, 0.005).amplitudes)
        True
        >>> step.gamma.gamma, step.gamma.active
        (0.0, False)
        >>> sde_step(bound, deep, CollapseParams(kappa=1e-2), np.random.default_rng(0), dt=0.005)  # doctest: +ELLIPSIS
        Traceback (most recent call last):
        ...
        collapsim.exceptions.CollapseConfigurationError: Centre-of-mass frame energy ... is not positive; the ground state energy E0=0.0 exceeds the energy of the state.

    Steps are reproducible::

        >>> a = sde_step(psi, well, CollapseParams(kappa=1e-2), np.random.default_rng(5), dt=0.005)
        >>> b = sde_step(psi, well, CollapseParams(kappa=1e-2), np.random.default_rng(5), dt=0.005)
        >>> np.array_equal(a.state.amplitudes, b.state.amplitudes)
        True

    """
    evolved = hamiltonian_part(psi, spec, dt)
    if params.kappa == 0:
        gamma = GammaRecord.inactive(evolved.time, evolved.grid.dims_per_particle)
    else:
        gamma = gamma_jk(evolved, spec, params)
    noise = sample_noise(rng, dt)
    return StepResult(apply_stochastic(evolved, spec, params, gamma, noise), gamma, noise)


class TrajectoryRecord:
    r"""
    The recorded history of a trajectory of :func:`sde_step`.

    ``gammas[i]`` and ``noises[i]`` belong to the step leading from
    ``states[i]`` to ``states[i + 1]`` when states are kept.

    EXAMPLES::

        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> from collapsim.operators import PotentialSpec
        >>> grid = GridSpec(points_per_axis=64, extent=16)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-4, 4), width=1)
        >>> record = TrajectoryRecord(psi, PotentialSpec(), CollapseParams(kappa=0), dt=0.01)
        >>> record.steps, record.outcome
        (0, None)

    """

    def __init__(self, initial, potential, params, dt, regions=()):
        self.initial = initial
        self.final = initial
        self.potential = potential
        self.params = params
        self.dt = dt
        self.regions = tuple(regions)
        self.states = [initial]
        self.gammas = []
        self.noises = []
        self.norm_excess = []
        self.times = [initial.time]
        self.weights = {region.label: [] for region in self.regions}
        self.outcome = None

    @property
    def steps(self):
        return len(self.gammas)

    @property
    def kept_states(self):
        return len(self.states) == self.steps + 1

    def record_weights(self, psi, masks):
        for region, mask in zip(self.regions, masks):
            self.weights[region.label].append(
                float(np.sum(psi.density[mask]) * psi.grid.cell_volume)
            )

    @property
    def gamma_integral(self):
        return float(sum(g.gamma for g in self.gammas) * self.dt)

    @property
    def max_norm_excess(self):
        return max((abs(e) for e in self.norm_excess), default=0.0)

    @property
    def absorbed_weight(self):
        return self.final.absorbed_weight - self.initial.absorbed_weight

    def gamma_frame(self):
        r"""
        Return the rate series as a data frame with columns ``t``, ``gamma``,
        ``numerator``, ``denominator`` and the components of ``u``.
        """
        import pandas as pd

        dims = self.initial.grid.dims_per_particle
        columns = ["t", "gamma", "numerator", "denominator"] + [f"u_{a}" for a in range(dims)]
        return pd.DataFrame([g.as_row() for g in self.gammas], columns=columns)

    def weight_frame(self):
        r"""
        Return the recorded branch weights as a data frame.
        """
        import pandas as pd

        frame = pd.DataFrame({"t": self.times})
        for label, weights in self.weights.items():
            frame[label] = weights
        return frame


def run_trajectory(
    psi,
    spec,
    params,
    rng,
    dt,
    steps,
    regions=(),
    record_every=1,
    keep_states=False,
    termination_eps=None,
):
    r"""
    Return the :class:`TrajectoryRecord` of up to ``steps`` steps of
    :func:`sde_step` starting from ``psi``.

    Branch weights of ``regions`` are recorded every ``record_every`` steps.
    With ``termination_eps`` set, the trajectory ends as soon as one of the
    regions holds a weight of at least ``1 - termination_eps``; that region's
    label becomes the outcome.

    EXAMPLES::

        >>> from collapsim.grid import GridSpec, Region, init_wavefunction
        >>> from collapsim.operators import PotentialSpec
        >>> grid = GridSpec(points_per_axis=64, extent=16)
        >>> well = PotentialSpec("gaussian_well", depth=-1, range=2)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-3, 3), wavevectors=(1, -1), width=1.5)
        >>> left = Region.half_space("left", axis=0, threshold=0)
        >>> record = run_trajectory(psi, well, CollapseParams(kappa=1e-2), np.random.default_rng(0), dt=0.01, steps=20, regions=(left, left.complement()), record_every=5, keep_states=True)
        >>> record.steps, len(record.states), len(record.weights["left"])
        (20, 21, 5)
        >>> list(record.gamma_frame().columns)
        ['t', 'gamma', 'numerator', 'denominator', 'u_0']
        >>> record.max_norm_excess < 1e-3
        True

    Weight that reaches an absorbing layer is lost without shifting weight
    into the other branch::

        >>> grid = GridSpec(points_per_axis=64, extent=16, absorbing_width=4)
        >>> pair = init_wavefunction(grid, "two_branch", weights=(0.3, 0.7), separation=20, width=1, center=3)
        >>> split = Region.half_space("left", axis=0, threshold=3)
        >>> record = run_trajectory(pair, PotentialSpec(depth=0), CollapseParams(kappa=0), np.random.default_rng(0), dt=0.01, steps=20, regions=(split,))
        >>> abs(record.weights["left"][-1] - 0.3) < 1e-9, record.absorbed_weight > 1e-2
        (True, True)

    A trajectory that starts in a single branch ends immediately::

        >>> record = run_trajectory(psi, well, CollapseParams(kappa=1e-2), np.random.default_rng(0), dt=0.01, steps=20, regions=(Region.box("all", {}),), termination_eps=0.01)
        >>> record.steps, record.outcome
        (0, 'all')

    """
    record = TrajectoryRecord(psi, spec, params, dt, regions)
    masks = [region.indicator(psi.grid) for region in record.regions]
    record.record_weights(psi, masks)

    def outcome(state):
        if termination_eps is None:
            return None
        for region, mask in zip(record.regions, masks):
            if np.sum(state.density[mask]) * state.grid.cell_volume >= 1 - termination_eps:
                return region.label
        return None

    record.outcome = outcome(psi)
    step = 0
    while record.outcome is None and step < steps:
        result = sde_step(record.final, spec, params, rng, dt)
        step += 1
        record.final = result.state
        record.gammas.append(result.gamma)
        record.noises.append(result.noise)
        record.norm_excess.append(result.state.norm_excess)
        if keep_states:
            record.states.append(result.state)
        record.outcome = outcome(result.state)
        if step % record_every == 0 or record.outcome is not None:
            record.times.append(result.state.time)
            record.record_weights(result.state, masks)

    logger.debug(
        f"Trajectory ended after {record.steps} steps with outcome {record.outcome}."
    )
    return record


# Register cached properties for doctesting, see
# https://stackoverflow.com/questions/69178071/cached-property-doctest-is-not-detected/72500890#72500890
__test__ = {
    "_Interaction.potential_rate": _Interaction.potential_rate,
}
