"""Desk-scale 2D embedded-boundary compressible flow / structure interaction kit."""

__version__ = "0.1.0"

from .gas import GasModel, PrimitiveState, ConservativeState  # noqa: F401
