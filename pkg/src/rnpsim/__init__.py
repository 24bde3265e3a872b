"""rnpsim - Yosida-regularized phase-field simulator for RNA-protein condensates."""

from rnpsim.version import __version__

__all__ = ["__version__"]
