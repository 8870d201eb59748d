"""Policy-gradient training of a neural balance controller for a cart-pole rig."""
from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
