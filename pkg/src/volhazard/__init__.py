"""Optimal contracts for CARA principal-agent problems with volatility moral hazard."""

from .model import (AgentResponse, ContractControls, MarketModel, Preferences,
                    QuadraticCost, ResponseKind, ValidationReport, validate)
from .agent import G_value, best_response, g_value, hamiltonian
from .firstbest import FirstBestSolution, first_best_volatility, f_rate
from .principal import (ExistenceCase, ExistenceReport, OptimizationError, Restriction,
                        SecondBestSolution, attain_first_best_contractible,
                        attain_first_best_zero_cost, check_existence,
                        objective_contractible, objective_noncontractible, optimize)

__version__ = "0.1.0"
