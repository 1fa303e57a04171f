"""Numerical laboratory for semiclassical concentration of principal eigenpairs.

The operator studied throughout is L_eps = -eps * lap + b . grad + c on flat
1D/2D domains, with lap the ordinary Laplacian.
"""

__version__ = "0.1.0"

from .scenario import (
    CriticalPointData,
    CycleData,
    DomainSpec,
    FieldSpec,
    ScenarioSpec,
    load_scenario,
    library_scenario,
    validate_scenario,
)

__all__ = [
    "CriticalPointData",
    "CycleData",
    "DomainSpec",
    "FieldSpec",
    "ScenarioSpec",
    "load_scenario",
    "library_scenario",
    "validate_scenario",
]
