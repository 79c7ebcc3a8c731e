"""Complex-frequency decomposition of bus voltages in hybrid AC/DC grids."""

from .network import bundled_case, parse_case
from .powerflow import solve_powerflow

__version__ = "0.1.0"

__all__ = ["bundled_case", "parse_case", "solve_powerflow", "__version__"]
