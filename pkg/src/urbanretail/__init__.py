"""Retail agglomeration as a potential game on symmetric geographies."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DegenerateStateError, GeographyError, NumericalError, ResourceLimitError,
    StiffnessError, UnsupportedGeographyError, UrbanRetailError,
)
from .geometry import Geography, ModelParams, parse_geo  # noqa: E402
from .model import RetailModel  # noqa: E402

__all__ = [
    "Geography", "ModelParams", "RetailModel", "parse_geo",
    "UrbanRetailError", "GeographyError", "DegenerateStateError", "StiffnessError",
    "ResourceLimitError", "NumericalError", "UnsupportedGeographyError",
]
