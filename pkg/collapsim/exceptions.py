r"""
A collection of custom exceptions for collapsim.
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


class ScenarioConfigError(ValueError):
    """
    Raised when a scenario, a grid or an initial state is configured
    inconsistently.

    EXAMPLES::

        >>> from collapsim.grid import GridSpec
        >>> GridSpec(points_per_axis=100)
        Traceback (most recent call last):
        ...
        collapsim.exceptions.ScenarioConfigError: points_per_axis must be a power of two but got 100.

    """


class CollapseConfigurationError(RuntimeError):
    """
    Raised when the centre-of-mass frame energy entering the rate parameter
    is not positive, i.e., the configured ground state energy is not below
    the energy of the state.

    EXAMPLES::

        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> from collapsim.operators import PotentialSpec
        >>> from collapsim.collapse import CollapseParams, gamma_jk
        >>> grid = GridSpec(points_per_axis=64, extent=16)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-1, 1), wavevectors=(1, -1), width=1)
        >>> gamma_jk(psi, PotentialSpec("gaussian_well", depth=-1, range=2), CollapseParams(kappa=1e-2, E0=100))
        Traceback (most recent call last):
        ...
        collapsim.exceptions.CollapseConfigurationError: Centre-of-mass frame energy ... is not positive; the ground state energy E0=100.0 exceeds the energy of the state.

    """


class DomainError(ValueError):
    """
    Raised when an estimate is requested outside of the range where it is
    defined.

    EXAMPLES::

        >>> from collapsim.branchwalk import entanglement_estimate
        >>> entanglement_estimate(1.5)
        Traceback (most recent call last):
        ...
        collapsim.exceptions.DomainError: The splitting fraction must lie in (0, 1) but got 1.5.

    """


class NonFiniteStateError(RuntimeError):
    """
    Raised when a wave function acquires NaN or infinite amplitudes.

    EXAMPLES::

        >>> import numpy as np
        >>> from collapsim.grid import GridSpec, WaveFunction
        >>> grid = GridSpec(points_per_axis=4, extent=2)
        >>> WaveFunction(grid, np.full(grid.shape, np.nan, dtype=complex))
        Traceback (most recent call last):
        ...
        collapsim.exceptions.NonFiniteStateError: Wave function at t=0.0 has non-finite amplitudes.

    """


class AuditError(RuntimeError):
    """
    Raised when an audit is requested on data it cannot be applied to.

    EXAMPLES::

        >>> from collapsim.audit import conservation_report
        >>> from collapsim.collapse import TrajectoryRecord
        >>> from collapsim.grid import GridSpec, init_wavefunction
        >>> from collapsim.operators import PotentialSpec
        >>> from collapsim.collapse import CollapseParams
        >>> grid = GridSpec(points_per_axis=64, extent=16)
        >>> psi = init_wavefunction(grid, "gaussian_packet", centers=(-4, 4), width=1)
        >>> record = TrajectoryRecord(psi, PotentialSpec("gaussian_well"), CollapseParams(kappa=0), dt=0.01)
        >>> conservation_report(record, "L")
        Traceback (most recent call last):
        ...
        collapsim.exceptions.AuditError: Angular momentum requires two spatial dimensions per particle.

    """
