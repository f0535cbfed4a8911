"""
Numerical checks of the spectral route to strong subadditivity of quantum
entropy: reduced spectra, majorization and rank relations, and minimization
of the entropy functional over abstract spectra.
"""

try:
    from .version import __version__  # type: ignore
except ImportError:
    __version__ = "master"
