r"""
Two-particle configuration space on a periodic grid.

A :class:`GridSpec` describes a configuration space grid for a pair of
particles ``j`` and ``k``, each living in one or two spatial dimensions. Grid
axes are ordered such that the coordinates of particle ``j`` come first,
followed by those of particle ``k``. A :class:`WaveFunction` is an immutable
snapshot of complex amplitudes on such a grid, and a :class:`Region`
selects a part of configuration space, e.g., one branch of a superposition.

EXAMPLES::

    >>> grid = GridSpec(points_per_axis=128, extent=20)
    >>> grid.shape
    (128, 128)
    >>> grid.spacing
    0.3125

    >>> psi = init_wavefunction(grid, "two_branch", weights=(0.3, 0.7), separation=10, width=1)
    >>> left = Region.half_space("left", axis=0, threshold=0)
    >>> round(branch_weight(psi, left), 10)
    0.3
    >>> round(branch_weight(psi, left) + branch_weight(psi, left.complement()), 12)
    1.0

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
from functools import cached_property

import numpy as np

from collapsim.exceptions import NonFiniteStateError, ScenarioConfigError

logger = logging.getLogger("grid")


class GridSpec:
    r"""
    A periodic grid for the configuration space of two particles.

    INPUT:

    - ``dims_per_particle`` -- 1 or 2 spatial dimensions per particle

    - ``points_per_axis`` -- a power of two

    - ``extent`` -- half-width of each axis; the axis covers ``[-extent, extent)``

    - ``masses`` -- the masses ``(m_j, m_k)``

    - ``absorbing_width`` -- width of an absorbing layer at the edges of
      each axis; ``0`` disables absorption

    - ``memory_budget`` -- maximal size in bytes of a single complex field on
      the grid

    EXAMPLES::

        >>> grid = GridSpec(dims_per_particle=2, points_per_axis=32, extent=8)
        >>> grid.shape
        (32, 32, 32, 32)
        >>> grid.particle_axes
        ((0, 1), (2, 3))

    A grid must fit into memory::

        >>> GridSpec(dims_per_particle=2, points_per_axis=512, memory_budget=2**30)
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: A grid of 512^4 points needs 1099511627776 bytes which exceeds the memory budget of 1073741824 bytes.

    Grids are values, two grids with the same parameters are equal::

        >>> GridSpec() == GridSpec()
        True
        >>> GridSpec() == GridSpec(masses=(1, 2))
        False

    """

    def __init__(
        self,
        dims_per_particle=1,
        points_per_axis=128,
        extent=20.0,
        masses=(1.0, 1.0),
        absorbing_width=0.0,
        memory_budget=2**30,
    ):
        if dims_per_particle not in (1, 2):
            raise ScenarioConfigError(
                f"dims_per_particle must be 1 or 2 but got {dims_per_particle}."
            )
        points_per_axis = int(points_per_axis)
        if points_per_axis < 4 or points_per_axis & (points_per_axis - 1):
            raise ScenarioConfigError(
                f"points_per_axis must be a power of two but got {points_per_axis}."
            )
        if not extent > 0:
            raise ScenarioConfigError(f"extent must be positive but got {extent}.")
        masses = tuple(float(mass) for mass in masses)
        if len(masses) != 2 or min(masses) <= 0:
            raise ScenarioConfigError(
                f"masses must be two positive numbers but got {masses}."
            )
        if not 0 <= absorbing_width < extent:
            raise ScenarioConfigError(
                f"absorbing_width must lie in [0, extent) but got {absorbing_width}."
            )

        required = points_per_axis ** (2 * dims_per_particle) * 16
        if required > memory_budget:
            raise ScenarioConfigError(
                f"A grid of {points_per_axis}^{2 * dims_per_particle} points needs {required} bytes which exceeds the memory budget of {memory_budget} bytes."
            )

        self.dims_per_particle = dims_per_particle
        self.points_per_axis = points_per_axis
        self.extent = float(extent)
        self.masses = masses
        self.absorbing_width = float(absorbing_width)
        self.memory_budget = memory_budget

    def _key(self):
        return (
            self.dims_per_particle,
            self.points_per_axis,
            self.extent,
            self.masses,
            self.absorbing_width,
        )

    def __eq__(self, other):
        return isinstance(other, GridSpec) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __getstate__(self):
        # Derived arrays are rebuilt lazily after unpickling.
        return {
            key: self.__dict__[key]
            for key in (
                "dims_per_particle",
                "points_per_axis",
                "extent",
                "masses",
                "absorbing_width",
                "memory_budget",
            )
        }

    def __repr__(self):
        return f"GridSpec(dims_per_particle={self.dims_per_particle}, points_per_axis={self.points_per_axis}, extent={self.extent}, masses={self.masses})"

    @cached_property
    def spacing(self):
        r"""
        Return the distance between neighbouring grid points.

        EXAMPLES::

            >>> GridSpec(points_per_axis=64, extent=16).spacing
            0.5

        """
        return 2 * self.extent / self.points_per_axis

    @cached_property
    def ndim(self):
        r"""
        Return the number of axes of configuration space.

        EXAMPLES::

            >>> GridSpec(dims_per_particle=2, points_per_axis=16).ndim
            4

        """
        return 2 * self.dims_per_particle

    @property
    def shape(self):
        return (self.points_per_axis,) * self.ndim

    @property
    def size(self):
        return self.points_per_axis**self.ndim

    @cached_property
    def cell_volume(self):
        return self.spacing**self.ndim

    @cached_property
    def particle_axes(self):
        r"""
        Return the grid axes of particle ``j`` and particle ``k``.

        EXAMPLES::

            >>> GridSpec().particle_axes
            ((0,), (1,))

        """
        d = self.dims_per_particle
        return tuple(range(d)), tuple(range(d, 2 * d))

    @cached_property
    def mass_per_axis(self):
        d = self.dims_per_particle
        return (self.masses[0],) * d + (self.masses[1],) * d

    @cached_property
    def axis(self):
        r"""
        Return the coordinates along a single axis.

        EXAMPLES::

            >>> GridSpec(points_per_axis=4, extent=2).axis
            array([-2., -1.,  0.,  1.])

        """
        return -self.extent + self.spacing * np.arange(self.points_per_axis)

    def _along(self, values, axis):
        shape = [1] * self.ndim
        shape[axis] = self.points_per_axis
        return np.reshape(values, shape)

    @cached_property
    def coordinates(self):
        r"""
        Return the coordinates of the grid as a tuple of arrays that broadcast
        against the full grid.

        EXAMPLES::

            >>> x_j, x_k = GridSpec(points_per_axis=4, extent=2).coordinates
            >>> x_j.shape, x_k.shape
            ((4, 1), (1, 4))

        """
        return tuple(self._along(self.axis, axis) for axis in range(self.ndim))

    @cached_property
    def wavenumbers(self):
        r"""
        Return the angular wavenumbers of the discrete Fourier transform along
        each axis (broadcastable against the full grid).

        EXAMPLES::

            >>> GridSpec(points_per_axis=4, extent=np.pi).wavenumbers[0].ravel()
            array([ 0.,  1., -2., -1.])

        """
        k = 2 * np.pi * np.fft.fftfreq(self.points_per_axis, d=self.spacing)
        return tuple(self._along(k, axis) for axis in range(self.ndim))

    @cached_property
    def derivative_wavenumbers(self):
        r"""
        Return the wavenumbers used for first derivatives.

        The Nyquist mode is dropped so that the spectral derivative of a real
        field is real.

        EXAMPLES::

            >>> GridSpec(points_per_axis=4, extent=np.pi).derivative_wavenumbers[0].ravel()
            array([ 0.,  1.,  0., -1.])

        """
        k = 2 * np.pi * np.fft.fftfreq(self.points_per_axis, d=self.spacing)
        k[self.points_per_axis // 2] = 0
        return tuple(self._along(k, axis) for axis in range(self.ndim))

    @cached_property
    def kinetic_multiplier(self):
        r"""
        Return the kinetic energy ``Σ k²/2m`` on the Fourier grid.

        EXAMPLES::

            >>> grid = GridSpec(points_per_axis=4, extent=np.pi, masses=(1, 2))
            >>> grid.kinetic_multiplier
            array([[0.  , 0.25, 1.  , 0.25],
                   [0.5 , 0.75, 1.5 , 0.75],
                   [2.  , 2.25, 3.  , 2.25],
                   [0.5 , 0.75, 1.5 , 0.75]])

        """
        multiplier = np.zeros(self.shape)
        for k, mass in zip(self.wavenumbers, self.mass_per_axis):
            multiplier = multiplier + k**2 / (2 * mass)
        return multiplier

    @cached_property
    def separations(self):
        r"""
        Return the components of ``w_j - w_k`` on the grid.

        Separations use the minimum image convention and are computed from
        integer index differences, so they are exactly invariant under a
        common shift of both particles by whole grid cells.

        EXAMPLES::

            >>> grid = GridSpec(points_per_axis=4, extent=2)
            >>> grid.separations[0]
            array([[ 0., -1., -2.,  1.],
                   [ 1.,  0., -1., -2.],
                   [-2.,  1.,  0., -1.],
                   [-1., -2.,  1.,  0.]])

        """
        n = self.points_per_axis
        index = np.arange(n)
        separations = []
        for a in range(self.dims_per_particle):
            i = self._along(index, a)
            m = self._along(index, self.dims_per_particle + a)
            wrapped = np.mod(i - m + n // 2, n) - n // 2
            separations.append(self.spacing * wrapped)
        return tuple(separations)

    @cached_property
    def distance(self):
        r"""
        Return ``|w_j - w_k|`` on the grid.

        EXAMPLES::

            >>> grid = GridSpec(dims_per_particle=2, points_per_axis=4, extent=2)
            >>> float(grid.distance[1, 1, 0, 0])
            1.4142135623730951

        """
        return np.sqrt(sum(s**2 for s in self.separations))

    @cached_property
    def absorbing_mask(self):
        r"""
        Return the factor applied to amplitudes in the absorbing layer, or
        ``None`` when absorption is disabled.

        EXAMPLES::

            >>> grid = GridSpec(points_per_axis=8, extent=4, absorbing_width=2)
            >>> grid.absorbing_mask[:, 4].round(3)
            array([0.   , 0.958, 1.   , 1.   , 1.   , 1.   , 1.   , 0.958])

        """
        if not self.absorbing_width:
            return None

        edge = np.minimum(self.axis + self.extent, self.extent - self.axis)
        inside = np.clip(
            (self.absorbing_width - edge) / self.absorbing_width, 0, 1
        )
        profile = np.where(inside < 1, np.cos(np.pi / 2 * inside), 0) ** 0.125
        mask = np.ones(self.shape)
        for axis in range(self.ndim):
            mask = mask * self._along(profile, axis)
        return mask

    def max_stable_dt(self, potential=None):
        r"""
        Return the largest time step permitted for split-step propagation.

        The kinetic phase bound is ``0.1·m·spacing²``, and for a nonzero
        potential of depth ``V₀`` the step is additionally bounded by
        ``0.05/|V₀|``.

        EXAMPLES::

            >>> from collapsim.operators import PotentialSpec
            >>> grid = GridSpec(points_per_axis=64, extent=16)
            >>> grid.max_stable_dt()
            0.025
            >>> grid.max_stable_dt(PotentialSpec("gaussian_well", depth=-4))
            0.0125

        """
        bound = 0.1 * min(self.masses) * self.spacing**2
        if potential is not None and potential.depth:
            bound = min(bound, 0.05 / abs(potential.depth))
        return bound


class WaveFunction:
    r"""
    Complex amplitudes on a configuration space grid at a time ``time``.

    The amplitudes are copied and frozen; every transformation returns a new
    instance. ``absorbed_weight`` is the weight removed by the absorbing layer
    of the grid so far; the norm and the absorbed weight add up to one.

    EXAMPLES::

        >>> grid = GridSpec(points_per_axis=64, extent=16)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-5, 5), wavevectors=(2, 0), width=1)
        >>> abs(psi.norm2 - 1) < 1e-12
        True
        >>> psi.amplitudes[0, 0] = 1
        Traceback (most recent call last):
        ...
        ValueError: assignment destination is read-only

    """

    def __init__(self, grid, amplitudes, time=0.0, norm_excess=0.0, absorbed_weight=0.0):
        amplitudes = np.array(amplitudes, dtype=complex)
        if amplitudes.shape != grid.shape:
            raise ValueError(
                f"Amplitudes of shape {amplitudes.shape} do not match a grid of shape {grid.shape}."
            )
        if not np.all(np.isfinite(amplitudes)):
            raise NonFiniteStateError(
                f"Wave function at t={time} has non-finite amplitudes."
            )
        amplitudes.setflags(write=False)

        self.grid = grid
        self.amplitudes = amplitudes
        self.time = float(time)
        self.norm_excess = float(norm_excess)
        self.absorbed_weight = float(absorbed_weight)

    def __repr__(self):
        return f"WaveFunction(t={self.time}, grid={self.grid!r})"

    @cached_property
    def density(self):
        return np.abs(self.amplitudes) ** 2

    @cached_property
    def norm2(self):
        r"""
        Return ``Σ|ψ|²`` times the cell volume.

        EXAMPLES::

            >>> grid = GridSpec(points_per_axis=4, extent=2)
            >>> WaveFunction(grid, np.full(grid.shape, 0.5)).norm2
            4.0

        """
        return float(np.sum(self.density) * self.grid.cell_volume)

    def is_normalized(self, tolerance=1e-9):
        return abs(self.norm2 + self.absorbed_weight - 1) <= tolerance

    def normalized(self):
        r"""
        Return this wave function scaled to unit norm.

        EXAMPLES::

            >>> grid = GridSpec(points_per_axis=4, extent=2)
            >>> WaveFunction(grid, np.full(grid.shape, 0.5)).normalized().norm2
            1.0

        """
        return self.evolve(self.amplitudes / np.sqrt(self.norm2), absorbed_weight=0.0)

    def evolve(self, amplitudes, time=None, norm_excess=0.0, absorbed_weight=None):
        r"""
        Return a wave function on the same grid with ``amplitudes`` at
        ``time`` (defaults to the current time).

        The absorbed weight is carried over unless ``absorbed_weight`` is
        given.
        """
        return WaveFunction(
            self.grid,
            amplitudes,
            time=self.time if time is None else time,
            norm_excess=norm_excess,
            absorbed_weight=self.absorbed_weight
            if absorbed_weight is None
            else absorbed_weight,
        )

    def overlap(self, other):
        r"""
        Return ``⟨self|other⟩``.

        EXAMPLES::

            >>> grid = GridSpec(points_per_axis=64, extent=16)
            >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-5, 5), width=1)
            >>> round(psi.overlap(psi).real, 12)
            1.0

        """
        if other.grid != self.grid:
            raise ValueError("Cannot compute the overlap of wave functions on different grids.")
        return complex(
            np.vdot(self.amplitudes, other.amplitudes) * self.grid.cell_volume
        )

    def absorbed(self):
        r"""
        Return this wave function with the absorbing mask of the grid applied.

        The state is not renormalized: the removed weight leaves both
        branches alike and is added to :attr:`absorbed_weight`.

        EXAMPLES::

            >>> grid = GridSpec(points_per_axis=64, extent=16, absorbing_width=4)
            >>> psi = init_wavefunction(grid, "two_branch", weights=(0.5, 0.5), separation=26, width=1)
            >>> left = Region.half_space("left", axis=0, threshold=0)
            >>> absorbed = psi.absorbed()
            >>> absorbed.absorbed_weight > 1e-3, absorbed.is_normalized()
            (True, True)
            >>> branch_weight(absorbed, left) < 0.5, branch_weight(absorbed, left.complement()) < 0.5
            (True, True)

        Absorption accumulates::

            >>> twice = absorbed.absorbed()
            >>> twice.absorbed_weight > absorbed.absorbed_weight, twice.is_normalized()
            (True, True)

        """
        mask = self.grid.absorbing_mask
        if mask is None:
            return self
        amplitudes = self.amplitudes * mask
        removed = self.norm2 - float(np.sum(np.abs(amplitudes) ** 2) * self.grid.cell_volume)
        if removed > 1e-6:
            logger.debug(f"Absorbing layer removed a weight of {removed:.3g} at t={self.time}.")
        return self.evolve(
            amplitudes,
            norm_excess=self.norm_excess,
            absorbed_weight=self.absorbed_weight + removed,
        )


class Region:
    r"""
    An axis-aligned part of configuration space.

    A region is a box given by half-open intervals ``[low, high)`` per grid
    axis (``None`` for an unbounded side) or the complement of such a box.
    Half-open intervals make a region and its complement an exact partition
    of the grid.

    EXAMPLES::

        >>> grid = GridSpec(points_per_axis=4, extent=2)
        >>> left = Region.half_space("left", axis=0, threshold=0)
        >>> left.indicator(grid)[:, 0]
        array([ True,  True, False, False])
        >>> left.complement().indicator(grid)[:, 0]
        array([False, False,  True,  True])
        >>> left.complement().label
        'not left'

    """

    def __init__(self, label, bounds, inverted=False):
        self.label = label
        self.bounds = {int(axis): tuple(bound) for (axis, bound) in bounds.items()}
        self.inverted = inverted

    @classmethod
    def half_space(cls, label, axis, threshold, below=True):
        r"""
        Return the region where the coordinate along ``axis`` is below
        ``threshold`` (or at or above it if ``below`` is not set.)
        """
        bound = (None, threshold) if below else (threshold, None)
        return cls(label, {axis: bound})

    @classmethod
    def box(cls, label, bounds):
        return cls(label, bounds)

    def complement(self, label=None):
        return Region(
            label or f"not {self.label}", self.bounds, inverted=not self.inverted
        )

    def indicator(self, grid):
        r"""
        Return a boolean array over ``grid`` selecting this region.

        EXAMPLES::

            >>> grid = GridSpec(points_per_axis=4, extent=2)
            >>> Region.box("core", {0: (-1, 1), 1: (-1, 1)}).indicator(grid).sum().item()
            4

        """
        inside = np.ones(grid.shape, dtype=bool)
        for axis, (low, high) in self.bounds.items():
            x = grid.coordinates[axis]
            if low is not None:
                inside = inside & (x >= low)
            if high is not None:
                inside = inside & (x < high)
        return ~inside if self.inverted else inside

    def __repr__(self):
        return f"Region({self.label!r})"


def branch_weight(psi, region):
    r"""
    Return the weight ``Σ|ψ|²·cellvol`` of ``psi`` inside ``region``.

    EXAMPLES::

        >>> grid = GridSpec(points_per_axis=64, extent=16)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-5, 5), width=1)
        >>> everything = Region.box("all", {})
        >>> round(branch_weight(psi, everything), 12)
        1.0
        >>> branch_weight(psi, everything.complement())
        0.0

    """
    mask = region.indicator(psi.grid)
    return float(np.sum(psi.density[mask]) * psi.grid.cell_volume)


def _per_axis(value, ndim, name):
    values = np.broadcast_to(np.asarray(value, dtype=float), (ndim,))
    if values.shape != (ndim,):
        raise ScenarioConfigError(f"{name} must have {ndim} entries.")
    return values


def _packet(grid, centers, wavevectors, widths):
    if np.min(widths) < 2 * grid.spacing:
        raise ScenarioConfigError(
            f"Packet width {np.min(widths)} is below twice the grid spacing {grid.spacing} and cannot be resolved."
        )
    amplitudes = np.ones(grid.shape, dtype=complex)
    for x, center, k, width in zip(grid.coordinates, centers, wavevectors, widths):
        amplitudes = amplitudes * np.exp(
            -((x - center) ** 2) / (4 * width**2) + 1j * k * x
        )
    return amplitudes


def _normalize(grid, amplitudes):
    return amplitudes / np.sqrt(np.sum(np.abs(amplitudes) ** 2) * grid.cell_volume)


def _gaussian_packet(grid, centers=0.0, wavevectors=0.0, width=1.0):
    centers = _per_axis(centers, grid.ndim, "centers")
    wavevectors = _per_axis(wavevectors, grid.ndim, "wavevectors")
    widths = _per_axis(width, grid.ndim, "width")
    return _normalize(grid, _packet(grid, centers, wavevectors, widths))


def _two_branch(
    grid,
    weights=(0.5, 0.5),
    separation=10.0,
    width=1.0,
    momentum=0.0,
    detector=0.0,
    detector_width=None,
    mirrored=False,
    center=0.0,
):
    weights = tuple(float(weight) for weight in weights)
    if len(weights) != 2 or min(weights) < 0 or abs(sum(weights) - 1) > 1e-9:
        raise ScenarioConfigError(
            f"Branch weights must be two non-negative numbers summing to 1 but got {weights}."
        )
    if separation < 8 * width:
        logger.warning(
            f"Branches separated by {separation} overlap noticeably for packets of width {width}."
        )

    d = grid.dims_per_particle
    detector_width = width if detector_width is None else detector_width
    widths = np.array([width] * d + [detector_width] * d, dtype=float)
    left = Region.half_space("left", axis=0, threshold=center)

    amplitudes = np.zeros(grid.shape, dtype=complex)
    for sign, weight, region in ((-1, weights[0], left), (1, weights[1], left.complement())):
        if weight == 0:
            continue
        centers = np.zeros(grid.ndim)
        wavevectors = np.zeros(grid.ndim)
        centers[0] = center + sign * separation / 2
        wavevectors[0] = sign * momentum
        centers[d] = 2 * center - detector if (mirrored and sign > 0) else detector
        branch = _packet(grid, centers, wavevectors, widths) * region.indicator(grid)
        amplitudes = amplitudes + np.sqrt(weight) * _normalize(grid, branch)
    return amplitudes


def _rotating_pair(grid, width=1.0, relative_width=1.0, winding=1):
    if grid.dims_per_particle != 2:
        raise ScenarioConfigError(
            "A rotating pair requires two spatial dimensions per particle."
        )
    if min(width, relative_width) < grid.spacing:
        raise ScenarioConfigError(
            f"Packet width {min(width, relative_width)} is below the grid spacing {grid.spacing} and cannot be resolved."
        )
    m_j, m_k = grid.masses
    x_j, y_j, x_k, y_k = grid.coordinates
    X = (m_j * x_j + m_k * x_k) / (m_j + m_k)
    Y = (m_j * y_j + m_k * y_k) / (m_j + m_k)
    vortex = (X + 1j * np.sign(winding) * Y) ** abs(int(winding))
    amplitudes = (
        vortex
        * np.exp(-(X**2 + Y**2) / (4 * width**2))
        * np.exp(-(grid.distance**2) / (4 * relative_width**2))
    )
    return _normalize(grid, amplitudes)


def _pair_ground_state(grid, potential, width=None, dt=None, tolerance=1e-10, max_sweeps=200000):
    from collapsim.operators import PotentialSpec, relax_ground_state

    if isinstance(potential, dict):
        potential = PotentialSpec(**potential)
    width = width or max(potential.range, 2 * grid.spacing)
    guess = np.exp(-(grid.distance**2) / (4 * width**2)).astype(complex)
    state, energy = relax_ground_state(
        WaveFunction(grid, _normalize(grid, guess)),
        potential,
        dt=dt,
        tolerance=tolerance,
        max_sweeps=max_sweeps,
    )
    logger.info(f"Relaxed pair ground state with energy {energy}.")
    return state.amplitudes


PRESETS = {
    "gaussian_packet": _gaussian_packet,
    "two_branch": _two_branch,
    "pair_ground_state": _pair_ground_state,
    "rotating_pair": _rotating_pair,
}


def init_wavefunction(spec, preset, **parameters):
    r"""
    Return the normalized initial state ``preset`` on the grid ``spec``.

    Supported presets are ``gaussian_packet`` (``centers``, ``wavevectors``,
    ``width`` per grid axis or scalar), ``two_branch`` (``weights``,
    ``separation``, ``width``, ``momentum``, ``detector``,
    ``detector_width``, ``mirrored``, ``center``), ``pair_ground_state``
    (``potential``, relaxed in imaginary time) and ``rotating_pair``
    (``width``, ``relative_width``, ``winding``).

    EXAMPLES::

        >>> grid = GridSpec(points_per_axis=128, extent=20)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-5, 5), wavevectors=(2, 0), width=1)
        >>> abs(psi.norm2 - 1) < 1e-12
        True

    Packets that the grid cannot resolve are rejected::

        >>> init_wavefunction(grid, "gaussian_packet", width=0.5)
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: Packet width 0.5 is below twice the grid spacing 0.3125 and cannot be resolved.

    Branch weights must sum to one::

        >>> init_wavefunction(grid, "two_branch", weights=(0.3, 0.6))
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: Branch weights must be two non-negative numbers summing to 1 but got (0.3, 0.6).

    The ground state of a harmonic pair with unit stiffness and unit masses
    has the energy ``ω/2`` of its relative motion with ``ω = √2``::

        >>> from collapsim.operators import PotentialSpec, observables
        >>> harmonic = PotentialSpec("harmonic", depth=1)
        >>> grid = GridSpec(points_per_axis=64, extent=8)
        >>> ground = init_wavefunction(grid, "pair_ground_state", potential=harmonic)
        >>> abs(observables(ground, harmonic).mean_H - np.sqrt(2) / 2) < 0.01 * np.sqrt(2) / 2
        True

    Unknown presets are rejected::

        >>> init_wavefunction(grid, "cat")
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: Unknown initial state preset 'cat'; expected one of gaussian_packet, two_branch, pair_ground_state, rotating_pair.

    """
    if preset not in PRESETS:
        raise ScenarioConfigError(
            f"Unknown initial state preset {preset!r}; expected one of {', '.join(PRESETS)}."
        )
    try:
        amplitudes = PRESETS[preset](spec, **parameters)
    except TypeError as e:
        raise ScenarioConfigError(f"Invalid parameters for preset {preset!r}: {e}") from e
    return WaveFunction(spec, amplitudes)


# Register cached properties for doctesting, see
# https://stackoverflow.com/questions/69178071/cached-property-doctest-is-not-detected/72500890#72500890
__test__ = {
    "GridSpec.spacing": GridSpec.spacing,
    "GridSpec.ndim": GridSpec.ndim,
    "GridSpec.particle_axes": GridSpec.particle_axes,
    "GridSpec.axis": GridSpec.axis,
    "GridSpec.coordinates": GridSpec.coordinates,
    "GridSpec.wavenumbers": GridSpec.wavenumbers,
    "GridSpec.derivative_wavenumbers": GridSpec.derivative_wavenumbers,
    "GridSpec.kinetic_multiplier": GridSpec.kinetic_multiplier,
    "GridSpec.separations": GridSpec.separations,
    "GridSpec.distance": GridSpec.distance,
    "GridSpec.absorbing_mask": GridSpec.absorbing_mask,
    "WaveFunction.norm2": WaveFunction.norm2,
}
