"""Numerical laboratory for entangling rates, commutator bounds and area-law dynamics.

Submodules are imported on first attribute access so that ``entlab.cli`` can
set BLAS thread limits before numpy loads.
"""
from importlib import import_module

__version__ = "0.1.0"

_SUBMODULES = ("operators", "rates", "commutator", "lattice", "hamiltonian", "dynamics", "qac",
               "reports", "errors", "cli")
__all__ = ["__version__", *_SUBMODULES]


def __getattr__(name):
    if name in _SUBMODULES:
        return import_module(f".{name}", __name__)
    raise AttributeError(f"module 'entlab' has no attribute {name!r}")
