"""Front tracking for 1-D conservation laws with nonclassical shocks."""

from ncft.models import (
    FluxModel,
    cubic_model,
    elasticity_model,
    make_model,
)

__all__ = [
    "FluxModel",
    "cubic_model",
    "elasticity_model",
    "make_model",
]

__version__ = "0.1.0"
