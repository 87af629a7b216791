"""Instance library, artifact files and the command-line interface."""

from .artifacts import ArtifactError, load_policy, save_policy
from .config import (
    ConfigError,
    InstanceFile,
    backorder_cost_from_fill_rate,
    list_instances,
    load_hyperparameters,
    load_instance,
    read_instance,
    save_instance,
)
from .energy import EnergyBase, generate_energy_grid, instantiate, load_energy_template

__all__ = [
    "ArtifactError",
    "ConfigError",
    "EnergyBase",
    "InstanceFile",
    "backorder_cost_from_fill_rate",
    "generate_energy_grid",
    "instantiate",
    "list_instances",
    "load_energy_template",
    "load_hyperparameters",
    "load_instance",
    "load_policy",
    "read_instance",
    "save_instance",
    "save_policy",
]
