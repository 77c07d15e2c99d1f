"""Adiabatic holonomies of open Markovian systems: quantum-jump unraveling,
a dense Lindblad oracle and holonomic gate robustness checks."""
from . import core, gates, holonomy, jumps, lindblad, models
from .errors import (BudgetError, ConfigError, ConsistencyError, DomainError, HolojumpError,
                     IntegrationError, RangeError, ShapeError)

__version__ = "0.1.0"
