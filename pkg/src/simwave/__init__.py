"""Linear stability of self-similar blowup for the radial wave equation
chi_tt - Laplace chi = chi^p in similarity coordinates."""

from .grid import GridFunction, RhoGrid, StateVector
from .pertop import NonlinearityConfig, gauge_eigenvalue, make_config
from .spectral import Contour, SpectralProjector

__all__ = ["GridFunction", "RhoGrid", "StateVector", "NonlinearityConfig",
           "gauge_eigenvalue", "make_config", "Contour", "SpectralProjector"]
__version__ = "0.1.0"
