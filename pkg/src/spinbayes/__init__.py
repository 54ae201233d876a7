"""Adaptive Bayesian phase estimation with spin-squeezed states.

Closed-form collective-spin moments, grid-based Bayesian updates, and
correlated-noise models feed three measurement scenarios: single-phase
estimation, atom-gravimeter fringes, and an optical-clock servo.
"""

from spinbayes.collective_spin import (
    GaussianAnsatz,
    OatParams,
    SqueezedStateModel,
    ansatz_to_model,
    chi_t_for_xi,
    mean_jz,
    mean_jz2,
    optimal_rotation_angle,
    optimal_twist_time,
    phase_uncertainty,
    squeezing_parameter,
    xi_from_db,
)
from spinbayes.errors import ConfigError, ScenarioError, SpinBayesError

__version__ = "0.1.0"

__all__ = [
    "GaussianAnsatz",
    "OatParams",
    "SqueezedStateModel",
    "ansatz_to_model",
    "chi_t_for_xi",
    "mean_jz",
    "mean_jz2",
    "optimal_rotation_angle",
    "optimal_twist_time",
    "phase_uncertainty",
    "squeezing_parameter",
    "xi_from_db",
    "ConfigError",
    "ScenarioError",
    "SpinBayesError",
    "__version__",
]
