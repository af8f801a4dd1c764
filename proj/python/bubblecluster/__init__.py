"""Bubble-cluster constants, cluster certificates, predictions and experiments."""

from ._core import (
    ConfigError,
    DomainError,
    PreconditionError,
    analytic_sweep,
    bubble_eval,
    config_hash,
    constants,
    epsilon_ij,
    eta_of_eps,
    find_critical_point,
    multistart_search,
    predicted_parameters,
    project_bubble,
    run_experiment,
    solve_balancing,
    version_info,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "PreconditionError",
    "analytic_sweep",
    "bubble_eval",
    "config_hash",
    "constants",
    "epsilon_ij",
    "eta_of_eps",
    "find_critical_point",
    "multistart_search",
    "predicted_parameters",
    "project_bubble",
    "run_experiment",
    "solve_balancing",
    "version_info",
]
