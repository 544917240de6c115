"""Peak-minimising pulse insulin boluses for the Magdelaine and Bergman models."""
from .config import Scenario
from .models import BergmanParams, MagdelaineParams
from .optimize import (
    SolverSettings,
    bergman_constrained_sweep,
    bergman_required_bolus,
    brute_force_oracle,
    optimize_magdelaine,
    required_amount_magdelaine,
)
from .signals import FilteredDisturbance, PulseInput, RectangularDisturbance
from .simulate import simulate

__version__ = "0.1.0"

__all__ = [
    "Scenario", "BergmanParams", "MagdelaineParams", "SolverSettings", "bergman_constrained_sweep",
    "bergman_required_bolus", "brute_force_oracle", "optimize_magdelaine", "required_amount_magdelaine",
    "FilteredDisturbance", "PulseInput", "RectangularDisturbance", "simulate",
]
