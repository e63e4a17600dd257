r"""
Pair potentials, observables and the unitary propagator.

The pair interaction is a conservative potential that only depends on the
distance ``|w_j - w_k|`` of the two particles. Its gradients and Laplacian are
known analytically for each :class:`PotentialSpec` family so that the collapse
machinery never differentiates the potential numerically. Derivatives of wave
functions are spectral.

EXAMPLES::

    >>> from collapsim.grid import GridSpec, init_wavefunction
    >>> grid = GridSpec(points_per_axis=128, extent=16)
    >>> well = PotentialSpec("gaussian_well", depth=-1, range=1)
    >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-5, 5), wavevectors=(2, 0), width=1)
    >>> abs(float(observables(psi, well).mean_P[0]) - 2) < 0.01
    True

    >>> later = hamiltonian_step(psi, well, dt=0.01)
    >>> abs(later.norm2 - 1) < 1e-12
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
from functools import cached_property, lru_cache

import numpy as np

from collapsim.exceptions import ScenarioConfigError

logger = logging.getLogger("operators")


class PotentialSpec:
    r"""
    A conservative pair potential ``V(|w_j - w_k|)``.

    INPUT:

    - ``family`` -- one of ``gaussian_well`` (``V₀·exp(-r²/2σ²)``),
      ``soft_coulomb`` (``V₀/√(r² + s²)``) and ``harmonic`` (``V₀·r²/2``, the
      depth is the stiffness)

    - ``depth`` -- the energy scale ``V₀``; negative values are attractive for
      the well and the Coulomb families

    - ``range`` -- the width ``σ`` of the Gaussian well

    - ``softening`` -- the softening length ``s`` of the Coulomb family;
      defaults to twice the grid spacing

    - ``pair`` -- labels of the two interacting particles

    EXAMPLES::

        >>> well = PotentialSpec("gaussian_well", depth=-1, range=1)
        >>> float(well(0))
        -1.0
        >>> float(well(1)) == -np.exp(-0.5)
        True

    Specs are values::

        >>> well == PotentialSpec("gaussian_well", depth=-1.0, range=1.0)
        True

    ::

        >>> PotentialSpec("yukawa")
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: Unknown potential family 'yukawa'; expected one of gaussian_well, soft_coulomb, harmonic.

    """
    FAMILIES = ("gaussian_well", "soft_coulomb", "harmonic")

    def __init__(
        self,
        family="gaussian_well",
        depth=-1.0,
        range=1.0,  # pylint: disable=redefined-builtin
        softening=None,
        pair=(0, 1),
    ):
        if family not in self.FAMILIES:
            raise ScenarioConfigError(
                f"Unknown potential family {family!r}; expected one of {', '.join(self.FAMILIES)}."
            )
        if not range > 0:
            raise ScenarioConfigError(f"Potential range must be positive but got {range}.")
        if softening is not None and not softening > 0:
            raise ScenarioConfigError(f"Softening must be positive but got {softening}.")

        self.family = family
        self.depth = float(depth)
        self.range = float(range)
        self.softening = None if softening is None else float(softening)
        self.pair = tuple(pair)

    def _key(self):
        return (self.family, self.depth, self.range, self.softening, self.pair)

    def __eq__(self, other):
        return isinstance(other, PotentialSpec) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"PotentialSpec({self.family!r}, depth={self.depth}, range={self.range}, softening={self.softening})"

    @property
    def scale(self):
        r"""
        Return the energy scale ``V̄ = |V₀|`` used to make the collapse
        operator dimensionless.
        """
        return abs(self.depth)

    def _softening(self, grid=None):
        if self.softening is not None:
            return self.softening
        if grid is None:
            return self.range
        return 2 * grid.spacing

    def __call__(self, r, grid=None):
        r = np.asarray(r, dtype=float)
        if self.family == "gaussian_well":
            return self.depth * np.exp(-(r**2) / (2 * self.range**2))
        if self.family == "soft_coulomb":
            return self.depth / np.sqrt(r**2 + self._softening(grid) ** 2)
        return 0.5 * self.depth * r**2

    def radial_ratio(self, r, grid=None):
        r"""
        Return ``V'(r)/r`` which is finite at ``r = 0``.

        EXAMPLES::

            >>> float(PotentialSpec("harmonic", depth=3).radial_ratio(0))
            3.0
            >>> float(PotentialSpec("gaussian_well", depth=-2, range=2).radial_ratio(0))
            0.5

        """
        r = np.asarray(r, dtype=float)
        if self.family == "gaussian_well":
            return -self(r) / self.range**2
        if self.family == "soft_coulomb":
            return -self.depth * (r**2 + self._softening(grid) ** 2) ** -1.5
        return np.full_like(r, self.depth)

    def second_derivative(self, r, grid=None):
        r"""
        Return ``V''(r)``.

        EXAMPLES::

            >>> float(PotentialSpec("gaussian_well", depth=-1, range=1).second_derivative(0))
            1.0
            >>> float(PotentialSpec("soft_coulomb", depth=-1, softening=1).second_derivative(0))
            1.0

        """
        r = np.asarray(r, dtype=float)
        if self.family == "gaussian_well":
            return (r**2 / self.range**4 - 1 / self.range**2) * self(r)
        if self.family == "soft_coulomb":
            s2 = self._softening(grid) ** 2
            return self.depth * (2 * r**2 - s2) * (r**2 + s2) ** -2.5
        return np.full_like(r, self.depth)

    def on_grid(self, grid):
        r"""
        Return the potential on every point of ``grid``.

        The values are exactly invariant under a common shift of both
        particles by whole grid cells::

            >>> from collapsim.grid import GridSpec
            >>> grid = GridSpec(points_per_axis=64, extent=8)
            >>> V = PotentialSpec("soft_coulomb", depth=-1).on_grid(grid)
            >>> np.array_equal(np.roll(V, (5, 5), axis=(0, 1)), V)
            True

        """
        return _on_grid(self, grid)

    def gradients(self, grid):
        r"""
        Return the components of ``∇_j V`` on ``grid``, one per spatial
        dimension of particle ``j``; the gradient with respect to particle
        ``k`` is the negative of it.

        EXAMPLES::

            >>> from collapsim.grid import GridSpec
            >>> grid = GridSpec(points_per_axis=4, extent=2)
            >>> PotentialSpec("harmonic", depth=2).gradients(grid)[0][:, 0]
            array([ 0.,  2., -4., -2.])

        """
        return _gradients(self, grid)

    def laplacian(self, grid):
        r"""
        Return ``∇_j² V`` (which equals ``∇_k² V``) on ``grid``.

        EXAMPLES::

            >>> from collapsim.grid import GridSpec
            >>> grid = GridSpec(dims_per_particle=2, points_per_axis=4, extent=2)
            >>> float(PotentialSpec("harmonic", depth=2).laplacian(grid).max())
            4.0

        """
        ratio = self.radial_ratio(grid.distance, grid)
        return (
            self.second_derivative(grid.distance, grid)
            + (grid.dims_per_particle - 1) * ratio
        )


@lru_cache(maxsize=8)
def _on_grid(potential, grid):
    values = potential(grid.distance, grid)
    values.setflags(write=False)
    return values


@lru_cache(maxsize=8)
def _gradients(potential, grid):
    ratio = potential.radial_ratio(grid.distance, grid)
    return tuple(ratio * separation for separation in grid.separations)


def potential_eval(spec, point):
    r"""
    Return the pair potential at the configuration ``point``, i.e., the
    coordinates of particle ``j`` followed by those of particle ``k``.

    EXAMPLES::

        >>> well = PotentialSpec("gaussian_well", depth=-1, range=1)
        >>> potential_eval(well, (0, 0))
        -1.0
        >>> potential_eval(well, (1, 0)) == -np.exp(-0.5)
        True
        >>> potential_eval(well, (3, 2)) == potential_eval(well, (1, 0))
        True
        >>> potential_eval(well, (0.5, -1, 2.5, 1)) == potential_eval(well, (0, 0, 2, 2))
        True

    """
    point = np.asarray(point, dtype=float)
    if point.ndim != 1 or len(point) % 2:
        raise ValueError(
            "A configuration point lists the coordinates of both particles."
        )
    w_j, w_k = np.split(point, 2)
    return float(spec(np.sqrt(np.sum((w_j - w_k) ** 2))))


def spectral_gradient(amplitudes, grid, axes=None):
    r"""
    Return the spectral derivatives of ``amplitudes`` along ``axes``
    (all axes by default).

    EXAMPLES::

        >>> from collapsim.grid import GridSpec
        >>> grid = GridSpec(points_per_axis=32, extent=np.pi)
        >>> x, y = grid.coordinates
        >>> d_x, d_y = spectral_gradient(np.sin(x) + 0 * y, grid)
        >>> np.allclose(d_x, np.cos(x)), np.allclose(d_y, 0)
        (True, True)

    """
    axes = range(grid.ndim) if axes is None else axes
    transformed = np.fft.fftn(amplitudes)
    return [
        np.fft.ifftn(1j * grid.derivative_wavenumbers[axis] * transformed)
        for axis in axes
    ]


def kinetic(amplitudes, grid):
    r"""
    Return ``T̂ψ`` for the kinetic energy operator ``Σ -∇²/2m``.
    """
    return np.fft.ifftn(grid.kinetic_multiplier * np.fft.fftn(amplitudes))


def hamiltonian(amplitudes, grid, potential):
    r"""
    Return ``Ĥψ`` for the pair Hamiltonian.
    """
    return kinetic(amplitudes, grid) + potential.on_grid(grid) * amplitudes


def energy(amplitudes, grid, potential):
    r"""
    Return ``⟨ψ|Ĥ|ψ⟩`` for possibly unnormalized ``amplitudes``.

    EXAMPLES::

        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> grid = GridSpec(points_per_axis=128, extent=16)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-5, 5), wavevectors=(2, 0), width=1)
        >>> round(energy(2 * psi.amplitudes, grid, PotentialSpec(depth=0)), 6)
        9.0

    """
    transformed = np.fft.fftn(amplitudes)
    kinetic_part = np.sum(grid.kinetic_multiplier * np.abs(transformed) ** 2) / grid.size
    potential_part = np.sum(potential.on_grid(grid) * np.abs(amplitudes) ** 2)
    return float((kinetic_part + potential_part) * grid.cell_volume)


def total_momentum(amplitudes, grid):
    r"""
    Return the components of ``P̂ψ`` for the total momentum
    ``P̂ = -i(∇_j + ∇_k)``.
    """
    d = grid.dims_per_particle
    gradient = spectral_gradient(amplitudes, grid)
    return tuple(-1j * (gradient[a] + gradient[d + a]) for a in range(d))


def angular_momentum(amplitudes, grid):
    r"""
    Return ``L̂ψ`` for the total orbital angular momentum about the origin
    of a pair in two spatial dimensions.

    EXAMPLES::

        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> grid = GridSpec(dims_per_particle=2, points_per_axis=32, extent=12)
        >>> psi = init_wavefunction(grid, "rotating_pair", width=1.5, relative_width=1.5, winding=1)
        >>> L = angular_momentum(psi.amplitudes, grid)
        >>> float(np.max(np.abs(L - psi.amplitudes))) < 1e-6
        True

    """
    if grid.dims_per_particle != 2:
        raise ValueError("Angular momentum requires two spatial dimensions per particle.")
    gradient = spectral_gradient(amplitudes, grid)
    x_j, y_j, x_k, y_k = grid.coordinates
    return -1j * (
        x_j * gradient[1] - y_j * gradient[0] + x_k * gradient[3] - y_k * gradient[2]
    )


def _real(value, name):
    if abs(value.imag) > 1e-9:
        logger.warning(
            f"Expectation value of {name} has an imaginary residue of {abs(value.imag):.3g}."
        )
    return float(value.real)


class ObservableSet:
    r"""
    Expectation values and the probability current of a normalized wave
    function in a pair potential.

    Expectation values are computed lazily.

    EXAMPLES:

    A free packet has the analytic kinetic energy ``(k₀² + 1/4σ²)/2m`` per
    particle::

        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> grid = GridSpec(points_per_axis=128, extent=16)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-5, 5), wavevectors=(2, 0), width=1)
        >>> observables = ObservableSet(psi, PotentialSpec(depth=0))
        >>> expected = (4 + 1 / 4) / 2 + (0 + 1 / 4) / 2
        >>> abs(observables.mean_H - expected) < 0.01 * expected
        True

    A real wave function carries no flux::

        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-5, 5), width=1)
        >>> observables = ObservableSet(psi, PotentialSpec(depth=0))
        >>> float(np.max(np.abs(observables.mean_P))) < 1e-12
        True
        >>> max(float(np.max(np.abs(J))) for J in observables.current) < 1e-12
        True

    """

    def __init__(self, psi, potential):
        self.psi = psi
        self.potential = potential

    @property
    def grid(self):
        return self.psi.grid

    @cached_property
    def _transformed(self):
        return np.fft.fftn(self.psi.amplitudes)

    @cached_property
    def _momentum_density(self):
        return np.abs(self._transformed) ** 2 * self.grid.cell_volume / self.grid.size

    @cached_property
    def mean_V(self):
        return float(
            np.sum(self.potential.on_grid(self.grid) * self.psi.density)
            * self.grid.cell_volume
        )

    @cached_property
    def kinetic(self):
        return float(np.sum(self.grid.kinetic_multiplier * self._momentum_density))

    @cached_property
    def mean_H(self):
        return self.kinetic + self.mean_V

    @cached_property
    def momentum_per_axis(self):
        r"""
        Return ``⟨-i∂⟩`` along every grid axis.

        EXAMPLES::

            >>> from collapsim.grid import GridSpec, init_wavefunction
            >>> grid = GridSpec(points_per_axis=128, extent=16)
            >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-5, 5), wavevectors=(2, -1), width=1)
            >>> ObservableSet(psi, PotentialSpec()).momentum_per_axis.round(6)
            array([ 2., -1.])

        """
        return np.array(
            [
                np.sum(k * self._momentum_density)
                for k in self.grid.derivative_wavenumbers
            ]
        )

    @cached_property
    def mean_P(self):
        r"""
        Return the total momentum ``⟨P̂⟩`` with one entry per spatial
        dimension.
        """
        d = self.grid.dims_per_particle
        p = self.momentum_per_axis
        return p[:d] + p[d:]

    @cached_property
    def mean_L(self):
        r"""
        Return the total orbital angular momentum ``⟨L̂⟩`` about the origin
        or ``None`` for particles in one spatial dimension.

        EXAMPLES::

            >>> from collapsim.grid import GridSpec, init_wavefunction
            >>> grid = GridSpec(dims_per_particle=2, points_per_axis=32, extent=12)
            >>> psi = init_wavefunction(grid, "rotating_pair", width=1.5, relative_width=1.5, winding=2)
            >>> round(ObservableSet(psi, PotentialSpec()).mean_L, 6)
            2.0

        """
        if self.grid.dims_per_particle != 2:
            return None
        L = angular_momentum(self.psi.amplitudes, self.grid)
        return _real(
            np.vdot(self.psi.amplitudes, L) * self.grid.cell_volume,
            "angular momentum",
        )

    @cached_property
    def mean_force(self):
        r"""
        Return ``-⟨∂V⟩`` along every grid axis.

        By Ehrenfest's theorem this is the rate of change of
        :attr:`momentum_per_axis`::

            >>> from collapsim.grid import GridSpec, init_wavefunction
            >>> grid = GridSpec(points_per_axis=128, extent=16)
            >>> well = PotentialSpec("gaussian_well", depth=-1, range=1)
            >>> before = init_wavefunction(grid, "gaussian_packet", centers=(-1, 1), width=1)
            >>> after = hamiltonian_step(before, well, dt=0.005)
            >>> rate = (observables(after, well).momentum_per_axis - observables(before, well).momentum_per_axis) / 0.005
            >>> force = (observables(after, well).mean_force + observables(before, well).mean_force) / 2
            >>> float(np.max(np.abs(rate - force))) < 1e-4
            True

        """
        gradients = self.potential.gradients(self.grid)
        mean = [
            float(np.sum(g * self.psi.density) * self.grid.cell_volume)
            for g in gradients
        ]
        return -np.array(mean + [-m for m in mean])

    @cached_property
    def current(self):
        r"""
        Return the probability current ``Im(ψ*∂ψ)/m`` along every grid axis.
        """
        gradient = spectral_gradient(self.psi.amplitudes, self.grid)
        return tuple(
            np.imag(np.conj(self.psi.amplitudes) * g) / m
            for g, m in zip(gradient, self.grid.mass_per_axis)
        )


def observables(psi, spec):
    r"""
    Return the :class:`ObservableSet` of ``psi`` in the pair potential
    ``spec``.

    EXAMPLES::

        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> grid = GridSpec(points_per_axis=128, extent=16)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-5, 5), wavevectors=(2, 0), width=1)
        >>> abs(float(observables(psi, PotentialSpec()).mean_P[0]) - 2) < 0.01
        True

    """
    return ObservableSet(psi, spec)


class SplitStepPropagator:
    r"""
    Strang split-step propagator ``exp(-iVdt/2)·exp(-iTdt)·exp(-iVdt/2)``
    for a fixed time step.

    With ``imaginary`` set, the propagator advances in imaginary time instead
    and does not preserve the norm.

    EXAMPLES::

        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> grid = GridSpec(points_per_axis=64, extent=16)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-5, 5), wavevectors=(1, 0), width=1)
        >>> forward = SplitStepPropagator(grid, PotentialSpec(), 0.01)
        >>> backward = SplitStepPropagator(grid, PotentialSpec(), -0.01)
        >>> float(np.max(np.abs(backward(forward(psi.amplitudes)) - psi.amplitudes))) < 1e-9
        True

    """

    def __init__(self, grid, potential, dt, imaginary=False):
        budget = grid.max_stable_dt(potential)
        if abs(dt) > budget:
            logger.warning(
                f"Time step {dt} exceeds the stability budget {budget} of the split-step propagator."
            )
        factor = -0.5 * dt if imaginary else -0.5j * dt
        self.dt = dt
        self.imaginary = imaginary
        self._potential_half_step = np.exp(factor * potential.on_grid(grid))
        self._kinetic_step = np.exp(2 * factor * grid.kinetic_multiplier)

    def __call__(self, amplitudes):
        amplitudes = self._potential_half_step * amplitudes
        amplitudes = np.fft.ifftn(self._kinetic_step * np.fft.fftn(amplitudes))
        return self._potential_half_step * amplitudes


@lru_cache(maxsize=16)
def propagator(grid, potential, dt, imaginary=False):
    r"""
    Return a cached :class:`SplitStepPropagator`.
    """
    return SplitStepPropagator(grid, potential, dt, imaginary=imaginary)


def hamiltonian_step(psi, spec, dt):
    r"""
    Return ``psi`` evolved by the pair Hamiltonian over a time ``dt``.

    EXAMPLES:

    Free evolution conserves the norm and the momentum::

        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> grid = GridSpec(points_per_axis=128, extent=16)
        >>> free = PotentialSpec(depth=0)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-5, 5), wavevectors=(2, 0), width=1)
        >>> later = hamiltonian_step(psi, free, dt=0.02)
        >>> abs(later.norm2 - 1) < 1e-12
        True
        >>> float(np.max(np.abs(observables(later, free).mean_P - observables(psi, free).mean_P))) < 1e-10
        True
        >>> later.time
        0.02

    A relaxed ground state is stationary up to a global phase::

        >>> harmonic = PotentialSpec("harmonic", depth=1)
        >>> grid = GridSpec(points_per_axis=64, extent=8)
        >>> ground = init_wavefunction(grid, "pair_ground_state", potential=harmonic)
        >>> abs(ground.overlap(hamiltonian_step(ground, harmonic, dt=0.005))) >= 1 - 1e-6
        True

    """
    step = propagator(psi.grid, spec, dt)
    return psi.evolve(step(psi.amplitudes), time=psi.time + dt)


def relax_ground_state(psi, spec, dt=None, tolerance=1e-10, max_sweeps=200000):
    r"""
    Return the ground state of the pair Hamiltonian reached from ``psi`` by
    imaginary-time relaxation together with its energy.

    Relaxation stops once the energy changes by less than ``tolerance`` in a
    sweep.

    EXAMPLES::

        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> grid = GridSpec(points_per_axis=64, extent=8)
        >>> harmonic = PotentialSpec("harmonic", depth=1)
        >>> guess = init_wavefunction(grid, "gaussian_packet", centers=(0, 0), width=1)
        >>> ground, E0 = relax_ground_state(guess, harmonic, max_sweeps=20)
        >>> E0 < observables(guess, harmonic).mean_H
        True

    """
    grid = psi.grid
    dt = grid.max_stable_dt(spec) if dt is None else dt
    step = propagator(grid, spec, dt, imaginary=True)

    amplitudes = psi.amplitudes
    current = energy(amplitudes, grid, spec)
    change = np.inf
    for sweep in range(max_sweeps):
        previous = current
        amplitudes = step(amplitudes)
        amplitudes = amplitudes / np.sqrt(
            np.sum(np.abs(amplitudes) ** 2) * grid.cell_volume
        )
        current = energy(amplitudes, grid, spec)
        change = abs(current - previous)
        if change < tolerance:
            logger.debug(f"Imaginary-time relaxation converged after {sweep + 1} sweeps.")
            break
    else:
        logger.warning(
            f"Imaginary-time relaxation did not converge within {max_sweeps} sweeps; the energy still changes by {change:.3g}."
        )

    return psi.evolve(amplitudes), current


# Register cached properties for doctesting, see
# https://stackoverflow.com/questions/69178071/cached-property-doctest-is-not-detected/72500890#72500890
__test__ = {
    "ObservableSet.momentum_per_axis": ObservableSet.momentum_per_axis,
    "ObservableSet.mean_L": ObservableSet.mean_L,
    "ObservableSet.mean_force": ObservableSet.mean_force,
}
