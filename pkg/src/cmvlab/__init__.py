"""Eigenvalue statistics for random CMV matrices with decaying coefficients.

Modules
-------
sampling      random coefficient laws and decay schedules
cmv           dense unitary truncations (oracle + resolvent substrate)
prufer        relative-phase recurrence and the eigenvalue solver
ensembles     exact circular-beta, Poisson and clock references
stats         point-process statistics on rescaled spectra
sde           the coupled limiting phase SDE
localization  transfer-matrix / resolvent decay diagnostics
experiments   reproducible experiment harness (also exposed as the CLI)
"""

from .rng import RngStream, trial_stream
from .sampling import (CoefficientSequence, DecaySchedule, make_schedule,
                       sample_sequence, sample_theta_nu, validate_schedule)
from .kernels import backend_name

__all__ = [
    "RngStream", "trial_stream", "CoefficientSequence", "DecaySchedule",
    "make_schedule", "sample_sequence", "sample_theta_nu",
    "validate_schedule", "backend_name",
]

__version__ = "0.1.0"
